use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DataflowError, ExecContext, NodeError};
use crate::value::{DataKind, DataValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Device,
    Input,
    Data,
    Position,
    Sensor,
    Encoding,
    Rendering,
}

impl Category {
    /// Data, Position, Sensor and Encoding are the processing groups.
    pub fn is_processing(&self) -> bool {
        matches!(
            self,
            Category::Data | Category::Position | Category::Sensor | Category::Encoding
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Bool(bool),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Text(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "choices", rename_all = "lowercase")]
pub enum ParamType {
    Number,
    Integer,
    Text,
    Bool,
    /// File path relative to the data-store root.
    Path,
    /// Text restricted to the listed values.
    Choice(Vec<String>),
    /// JSON text, parsed by the evaluator.
    Json,
}

impl ParamType {
    pub fn check(&self, value: &ParamValue) -> Result<(), String> {
        match (self, value) {
            (ParamType::Number, ParamValue::Number(v)) if v.is_finite() => Ok(()),
            (ParamType::Integer, ParamValue::Number(v)) if v.is_finite() && v.fract() == 0.0 => {
                Ok(())
            }
            (ParamType::Text | ParamType::Path, ParamValue::Text(_)) => Ok(()),
            (ParamType::Bool, ParamValue::Bool(_)) => Ok(()),
            (ParamType::Choice(options), ParamValue::Text(s)) => {
                if options.contains(s) {
                    Ok(())
                } else {
                    Err(format!("`{s}` is not one of {options:?}"))
                }
            }
            (ParamType::Json, ParamValue::Text(s)) => serde_json::from_str::<serde_json::Value>(s)
                .map(|_| ())
                .map_err(|e| format!("invalid JSON: {e}")),
            (ty, v) => Err(format!("expected {ty:?}, got `{v}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: ParamType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub kind: DataKind,
    /// Inputs only: evaluation may proceed without an edge here.
    #[serde(default)]
    pub optional: bool,
}

/// Params after schema defaults are filled in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(pub ParamMap);

impl Params {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    fn missing(name: &str) -> NodeError {
        NodeError::Param(format!("missing `{name}`"))
    }

    pub fn number(&self, name: &str) -> Result<f64, NodeError> {
        self.get(name)
            .and_then(ParamValue::as_f64)
            .ok_or_else(|| Self::missing(name))
    }

    pub fn integer(&self, name: &str) -> Result<i64, NodeError> {
        self.number(name).map(|v| v as i64)
    }

    pub fn text(&self, name: &str) -> Result<&str, NodeError> {
        self.get(name)
            .and_then(ParamValue::as_str)
            .ok_or_else(|| Self::missing(name))
    }

    pub fn opt_text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_str).filter(|s| !s.is_empty())
    }

    pub fn boolean(&self, name: &str) -> Result<bool, NodeError> {
        self.get(name)
            .and_then(ParamValue::as_bool)
            .ok_or_else(|| Self::missing(name))
    }

    pub fn json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Option<T>, NodeError> {
        match self.opt_text(name) {
            None => Ok(None),
            Some(s) => serde_json::from_str(s)
                .map(Some)
                .map_err(|e| NodeError::Param(format!("`{name}`: {e}"))),
        }
    }
}

pub struct EvalRequest<'a> {
    pub node_id: &'a str,
    pub inputs: &'a BTreeMap<String, DataValue>,
    pub params: &'a Params,
    pub ctx: &'a ExecContext,
}

impl EvalRequest<'_> {
    pub fn input(&self, port: &str) -> Result<&DataValue, NodeError> {
        self.inputs
            .get(port)
            .ok_or_else(|| NodeError::MissingInput(port.to_string()))
    }

    pub fn opt_input(&self, port: &str) -> Option<&DataValue> {
        self.inputs.get(port)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalOutput {
    pub outputs: BTreeMap<String, DataValue>,
    pub warnings: Vec<String>,
}

impl EvalOutput {
    pub fn single(port: &str, value: DataValue) -> Self {
        let mut outputs = BTreeMap::new();
        outputs.insert(port.to_string(), value);
        EvalOutput {
            outputs,
            warnings: Vec::new(),
        }
    }

    pub fn with(mut self, port: &str, value: DataValue) -> Self {
        self.outputs.insert(port.to_string(), value);
        self
    }

    pub fn warn(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }
}

pub type Evaluator = Arc<dyn Fn(&EvalRequest) -> Result<EvalOutput, NodeError> + Send + Sync>;

#[derive(Clone, Serialize)]
pub struct NodeSpec {
    pub kind: String,
    pub category: Category,
    pub description: String,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
    pub params: Vec<ParamSpec>,
    #[serde(skip)]
    pub evaluator: Evaluator,
}

impl fmt::Debug for NodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeSpec")
            .field("kind", &self.kind)
            .field("category", &self.category)
            .finish_non_exhaustive()
    }
}

impl NodeSpec {
    pub fn new(
        kind: &str,
        category: Category,
        evaluator: impl Fn(&EvalRequest) -> Result<EvalOutput, NodeError> + Send + Sync + 'static,
    ) -> Self {
        NodeSpec {
            kind: kind.to_string(),
            category,
            description: String::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            params: Vec::new(),
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn describe(mut self, text: &str) -> Self {
        self.description = text.to_string();
        self
    }

    pub fn input(mut self, name: &str, kind: DataKind) -> Self {
        self.inputs.push(PortSpec {
            name: name.into(),
            kind,
            optional: false,
        });
        self
    }

    pub fn optional_input(mut self, name: &str, kind: DataKind) -> Self {
        self.inputs.push(PortSpec {
            name: name.into(),
            kind,
            optional: true,
        });
        self
    }

    pub fn output(mut self, name: &str, kind: DataKind) -> Self {
        self.outputs.push(PortSpec {
            name: name.into(),
            kind,
            optional: false,
        });
        self
    }

    pub fn param(mut self, name: &str, ty: ParamType, default: impl Into<ParamValue>) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            default: Some(default.into()),
            required: false,
        });
        self
    }

    pub fn required_param(mut self, name: &str, ty: ParamType) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            default: None,
            required: true,
        });
        self
    }

    /// Param without a default that evaluators treat as absent.
    pub fn optional_param(mut self, name: &str, ty: ParamType) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            default: None,
            required: false,
        });
        self
    }

    pub fn input_port(&self, name: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output_port(&self, name: &str) -> Option<&PortSpec> {
        self.outputs.iter().find(|p| p.name == name)
    }

    /// Checks a param patch against the schema.
    pub fn check_params(&self, params: &ParamMap) -> Result<(), DataflowError> {
        for (name, value) in params {
            let spec = self
                .params
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| DataflowError::InvalidParam {
                    param: name.clone(),
                    reason: format!("`{}` has no such param", self.kind),
                })?;
            spec.ty
                .check(value)
                .map_err(|reason| DataflowError::InvalidParam {
                    param: name.clone(),
                    reason,
                })?;
        }
        Ok(())
    }

    /// Stored params with defaults filled in. Required params without a
    /// value are reported.
    pub fn resolve_params(&self, stored: &ParamMap) -> Result<Params, NodeError> {
        let mut out = ParamMap::new();
        for spec in &self.params {
            match stored.get(&spec.name).or(spec.default.as_ref()) {
                Some(v) => {
                    out.insert(spec.name.clone(), v.clone());
                }
                None if spec.required => {
                    return Err(NodeError::Param(format!("`{}` is required", spec.name)));
                }
                None => {}
            }
        }
        Ok(Params(out))
    }
}

/// Node kinds known to an engine, by kind name.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    specs: BTreeMap<String, NodeSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a kind.
    pub fn register(&mut self, spec: NodeSpec) {
        self.specs.insert(spec.kind.clone(), spec);
    }

    pub fn get(&self, kind: &str) -> Option<&NodeSpec> {
        self.specs.get(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &NodeSpec> {
        self.specs.values()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}
