//! Client for custom-node endpoints.
//!
//! An endpoint is an HTTP base URL serving `GET /functions` and
//! `POST /functions/{name}` with body `{"params": .., "input": <DataValue>}`,
//! answered by `{"output": <DataValue>}` or `{"error": "..."}`.
//! The endpoint name `builtin` resolves to in-process functions.

use immerflow_core::hub::{RemoteError, RemoteFunction, RemoteFunctions};
use immerflow_core::value::{Cell, Column, ColumnType, DataValue, Table, Volume3D};
use serde_json::{json, Value};

pub const BUILTIN: &str = "builtin";

#[derive(Clone, Debug, Default)]
pub struct RemoteClient;

fn builtin_list() -> Vec<RemoteFunction> {
    [
        ("identity", "def identity(data, params):\n    return data\n"),
        (
            "scale2",
            "def scale2(table, params):\n    f = params.get('factor', 2)\n    return table.select_dtypes('number') * f\n",
        ),
        (
            "trace_neurons",
            "def trace_neurons(volume, params):\n    # voxels above threshold that are local maxima\n    ...\n",
        ),
    ]
    .into_iter()
    .map(|(name, src)| RemoteFunction {
        name: name.into(),
        source_text: src.into(),
    })
    .collect()
}

fn scale_numbers(input: &DataValue, factor: f64) -> Result<DataValue, RemoteError> {
    let DataValue::Table(t) = input else {
        return Err(RemoteError::RemoteError(format!("scale2 expects a table, got {}", input.kind())));
    };
    let rows = t
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Number(v) => Cell::Number(v * factor),
                    other => other.clone(),
                })
                .collect()
        })
        .collect();
    Ok(DataValue::table(Table {
        columns: t.columns.clone(),
        rows,
    }))
}

/// Voxels at or above `threshold` that are not smaller than any of their six
/// neighbors, as world positions with intensity.
pub fn trace_neurons(volume: &Volume3D, threshold: f64) -> Table {
    let [nx, ny, nz] = volume.dims;
    let mut rows = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let s = volume.sample(i, j, k);
                if f64::from(s) < threshold {
                    continue;
                }
                let neighbors = [
                    (i.wrapping_sub(1), j, k),
                    (i + 1, j, k),
                    (i, j.wrapping_sub(1), k),
                    (i, j + 1, k),
                    (i, j, k.wrapping_sub(1)),
                    (i, j, k + 1),
                ];
                let peak = neighbors
                    .iter()
                    .filter(|&&(a, b, c)| a < nx && b < ny && c < nz)
                    .all(|&(a, b, c)| volume.sample(a, b, c) <= s);
                if peak {
                    let p = volume.world_position(i, j, k);
                    rows.push(vec![
                        Cell::Number(p[0]),
                        Cell::Number(p[1]),
                        Cell::Number(p[2]),
                        Cell::Number(f64::from(s)),
                    ]);
                }
            }
        }
    }
    let columns = ["x", "y", "z", "intensity"]
        .iter()
        .map(|n| Column {
            name: n.to_string(),
            ty: ColumnType::Number,
        })
        .collect();
    Table { columns, rows }
}

fn call_builtin(function: &str, params: &Value, input: &DataValue) -> Result<DataValue, RemoteError> {
    match function {
        "identity" => Ok(input.clone()),
        "scale2" => scale_numbers(input, params.get("factor").and_then(Value::as_f64).unwrap_or(2.0)),
        "trace_neurons" => match input {
            DataValue::Volume3D(v) => Ok(DataValue::table(trace_neurons(
                v,
                params.get("threshold").and_then(Value::as_f64).unwrap_or(0.5),
            ))),
            other => Err(RemoteError::RemoteError(format!(
                "trace_neurons expects a volume, got {}",
                other.kind()
            ))),
        },
        other => Err(RemoteError::UnknownFunction(other.to_string())),
    }
}

fn http_error(endpoint: &str, function: &str, e: ureq::Error) -> RemoteError {
    match e {
        ureq::Error::StatusCode(404) => RemoteError::UnknownFunction(function.to_string()),
        ureq::Error::StatusCode(code) => RemoteError::RemoteError(format!("{endpoint} answered {code}")),
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            RemoteError::EndpointUnreachable(endpoint.to_string())
        }
        other => RemoteError::RemoteError(other.to_string()),
    }
}

impl RemoteFunctions for RemoteClient {
    fn list(&self, endpoint: &str) -> Result<Vec<RemoteFunction>, RemoteError> {
        if endpoint == BUILTIN {
            return Ok(builtin_list());
        }
        let url = format!("{}/functions", endpoint.trim_end_matches('/'));
        ureq::get(&url)
            .call()
            .map_err(|e| http_error(endpoint, "functions", e))?
            .body_mut()
            .read_json()
            .map_err(|e| RemoteError::RemoteError(e.to_string()))
    }

    fn call(
        &self,
        endpoint: &str,
        function: &str,
        params: &Value,
        input: &DataValue,
    ) -> Result<DataValue, RemoteError> {
        if endpoint == BUILTIN {
            return call_builtin(function, params, input);
        }
        let url = format!("{}/functions/{function}", endpoint.trim_end_matches('/'));
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let mut resp = agent
            .post(&url)
            .send_json(json!({ "params": params, "input": input }))
            .map_err(|e| http_error(endpoint, function, e))?;
        let status = resp.status().as_u16();
        let body: Option<Value> = resp.body_mut().read_json().ok();
        if let Some(msg) = body.as_ref().and_then(|b| b.get("error")) {
            let msg = msg.as_str().map(str::to_string).unwrap_or_else(|| msg.to_string());
            return Err(if status == 404 {
                RemoteError::UnknownFunction(function.to_string())
            } else {
                RemoteError::RemoteError(msg)
            });
        }
        if status == 404 {
            return Err(RemoteError::UnknownFunction(function.to_string()));
        }
        let Some(output) = body.and_then(|mut b| b.get_mut("output").map(Value::take)) else {
            return Err(RemoteError::RemoteError(format!("{endpoint} answered {status} without an output")));
        };
        let out: DataValue = serde_json::from_value(output)
            .map_err(|e| RemoteError::RemoteError(format!("undecodable output: {e}")))?;
        out.validate()
            .map_err(|e| RemoteError::RemoteError(format!("invalid result: {e}")))?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_functions() {
        let c = RemoteClient;
        assert_eq!(c.list(BUILTIN).unwrap().len(), 3);
        let t = Table {
            columns: vec![Column {
                name: "a".into(),
                ty: ColumnType::Number,
            }],
            rows: vec![vec![Cell::Number(1.5)]],
        };
        let out = c.call(BUILTIN, "scale2", &json!({}), &DataValue::table(t)).unwrap();
        let DataValue::Table(out) = out else { panic!() };
        assert_eq!(out.rows[0][0], Cell::Number(3.0));
        assert_eq!(
            c.call(BUILTIN, "nope", &json!({}), &DataValue::Scalar(1.0)),
            Err(RemoteError::UnknownFunction("nope".into()))
        );
    }

    #[test]
    fn single_peak_is_traced() {
        let v = Volume3D::from_fn([5, 5, 5], [1.0; 3], [0.0; 3], |p| {
            let d = (p[0] - 2.0).powi(2) + (p[1] - 2.0).powi(2) + (p[2] - 2.0).powi(2);
            (-d).exp()
        })
        .unwrap();
        let t = trace_neurons(&v, 0.5);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][..3], [Cell::Number(2.0), Cell::Number(2.0), Cell::Number(2.0)]);
    }

    #[test]
    fn unreachable_endpoint() {
        let err = RemoteClient
            .call("http://127.0.0.1:9", "identity", &json!({}), &DataValue::Scalar(1.0))
            .unwrap_err();
        assert_eq!(err, RemoteError::EndpointUnreachable("http://127.0.0.1:9".into()));
    }
}
