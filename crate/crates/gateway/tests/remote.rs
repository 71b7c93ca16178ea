use std::net::SocketAddr;

use axum::extract::Path;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use immerflow_core::hub::{RemoteError, RemoteFunctions};
use immerflow_core::value::DataValue;
use immerflow_gateway::remote::RemoteClient;
use serde_json::{json, Value};

async fn call(Path(name): Path<String>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    match name.as_str() {
        "double" => {
            let input: DataValue = serde_json::from_value(body["input"].clone()).unwrap();
            let DataValue::Scalar(v) = input else {
                return (StatusCode::BAD_REQUEST, Json(json!({"error": "expects a scalar"})));
            };
            let k = body["params"]["k"].as_f64().unwrap_or(2.0);
            (StatusCode::OK, Json(json!({"output": DataValue::Scalar(v * k)})))
        }
        "boom" => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "division by zero"}))),
        _ => (StatusCode::NOT_FOUND, Json(json!({"error": "no such function"}))),
    }
}

fn stub(rt: &tokio::runtime::Runtime) -> String {
    let app = Router::new()
        .route(
            "/functions",
            get(|| async { Json(json!([{"name": "double", "source_text": "def double(x, p): return x * p['k']"}])) }),
        )
        .route("/functions/{name}", post(call));
    let listener = rt
        .block_on(tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

#[test]
fn remote_functions_follow_the_wire_protocol() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(1)
        .enable_all()
        .build()
        .unwrap();
    let endpoint = stub(&rt);
    let client = RemoteClient;

    let listed = client.list(&endpoint).unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].name, "double");
    assert!(listed[0].source_text.contains("p['k']"));

    let out = client.call(&endpoint, "double", &json!({"k": 3.0}), &DataValue::Scalar(1.5)).unwrap();
    assert_eq!(out, DataValue::Scalar(4.5));
    assert_eq!(
        client.call(&endpoint, "boom", &json!({}), &DataValue::Scalar(1.0)),
        Err(RemoteError::RemoteError("division by zero".into()))
    );
    assert_eq!(
        client.call(&endpoint, "nope", &json!({}), &DataValue::Scalar(1.0)),
        Err(RemoteError::UnknownFunction("nope".into()))
    );

    // Nothing listens on the port of a dropped listener.
    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    assert!(matches!(
        client.call(&format!("http://{closed}"), "double", &json!({}), &DataValue::Scalar(1.0)),
        Err(RemoteError::EndpointUnreachable(_))
    ));
}
