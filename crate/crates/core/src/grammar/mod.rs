//! Visualization specifications: the JSON documents rendering devices parse.
//!
//! Wire format (schema version 1):
//!
//! ```json
//! {"schema_version":1, "spec_id":"s1", "mark":"point", "data_ref":"<sha256>",
//!  "channels":{"x":{"field":"loc_x","scale":{"type":"linear","domain":[0,94],"range":[0,1]},"legend":false}},
//!  "coordinate_type":"world",
//!  "transform":{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,0],"scale":1},
//!  "link":null, "filters":[]}
//! ```
//!
//! Positional channels own unit segments in the spec's local frame
//! (x → +X, y → +Y, z → +Z); a domain value maps to `axis * lerp(range, t)`.

mod build;
mod interact;
mod link;

pub use build::{build_spec, ChannelDraft, ScaleKind, SpecRequest};
pub use interact::{apply_interaction, visible_rows, Interaction};
pub use link::{axis_domains_differ, axis_point, resolve_link, SpecRegistry};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::{Similarity, Vec3};
use crate::value::DataKind;

pub const SPEC_SCHEMA_VERSION: u32 = 1;

/// Ordinal color palette, in wire order.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Two-stop ramp for linear color scales (low, high).
pub const COLOR_RAMP: [&str; 2] = ["#440154", "#fde725"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("mark `{mark}` cannot display {kind} data")]
    MarkDataMismatch { mark: Mark, kind: DataKind },
    #[error("mark `{mark}` takes no `{channel}` channel")]
    ChannelNotAllowed { mark: Mark, channel: Channel },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` cannot use a {scale:?} scale")]
    ScaleMismatch { field: String, scale: ScaleKind },
    #[error("data is empty")]
    EmptyData,
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("unknown spec schema version {0}")]
    UnknownSchemaVersion(u64),
    #[error("store: {0}")]
    Store(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("link target `{0}` is not placed")]
    DanglingLink(String),
    #[error("shared field `{field}` is not a linear positional channel of `{spec_id}`")]
    SharedFieldMissing { spec_id: String, field: String },
    #[error("link cycle through `{0}`")]
    Cycle(String),
    #[error("world placement of `{0}` needs a valid transform or a link")]
    Unplaced(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Point,
    Bar,
    Line,
    Image,
    Mesh,
    Volume,
    Text,
}

impl Mark {
    /// Marks that carry exactly one geometry payload.
    pub fn is_geometry(&self) -> bool {
        matches!(self, Mark::Image | Mark::Mesh | Mark::Volume)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mark::Point => "point",
            Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Image => "image",
            Mark::Mesh => "mesh",
            Mark::Volume => "volume",
            Mark::Text => "text",
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mark {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| GrammarError::MalformedSpec(format!("unknown mark `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Z,
    Color,
    Size,
    Text,
    Opacity,
}

impl Channel {
    /// Local unit axis of a positional channel.
    pub fn axis(&self) -> Option<Vec3> {
        match self {
            Channel::X => Some([1.0, 0.0, 0.0]),
            Channel::Y => Some([0.0, 1.0, 0.0]),
            Channel::Z => Some([0.0, 0.0, 1.0]),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateType {
    View,
    World,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleRange {
    Numeric([f64; 2]),
    Colors(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Scale {
    Linear { domain: [f64; 2], range: ScaleRange },
    Ordinal { domain: Vec<String>, range: ScaleRange },
}

impl Scale {
    pub fn range(&self) -> &ScaleRange {
        match self {
            Scale::Linear { range, .. } | Scale::Ordinal { range, .. } => range,
        }
    }

    /// Position of `value` within a linear domain, 0 at the low end.
    pub fn linear_t(&self, value: f64) -> Option<f64> {
        match self {
            Scale::Linear { domain, .. } => Some((value - domain[0]) / (domain[1] - domain[0])),
            Scale::Ordinal { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelEncoding {
    pub field: String,
    pub scale: Scale,
    #[serde(default)]
    pub legend: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Link {
    /// Anchor at a world point, optionally with a row-major rotation.
    TargetLink {
        position: Vec3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<[f64; 9]>,
    },
    /// Align the axis encoding `field` with the same field's axis on `spec_id`.
    AxisLink { spec_id: String, field: String },
    /// Group under `spec_id`: the local transform is relative to its placement.
    ObjectLink { spec_id: String },
}

impl Link {
    pub fn target_spec(&self) -> Option<&str> {
        match self {
            Link::AxisLink { spec_id, .. } | Link::ObjectLink { spec_id } => Some(spec_id),
            Link::TargetLink { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Filter {
    /// Hides rows whose `field` equals `value`.
    Toggle { field: String, value: String },
    /// Keeps rows with `lo <= field <= hi`.
    Threshold { field: String, lo: f64, hi: f64 },
}

fn default_schema_version() -> u32 {
    SPEC_SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub spec_id: String,
    pub mark: Mark,
    pub data_ref: String,
    pub channels: BTreeMap<Channel, ChannelEncoding>,
    pub coordinate_type: CoordinateType,
    pub transform: Similarity,
    pub link: Option<Link>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detail_fields: Vec<String>,
    /// 256 RGBA entries for volume marks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_function: Option<Vec<[u8; 4]>>,
}

impl VisSpec {
    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let malformed = |m: String| Err(GrammarError::MalformedSpec(m));
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(GrammarError::UnknownSchemaVersion(u64::from(self.schema_version)));
        }
        if self.spec_id.is_empty() {
            return malformed("empty spec_id".into());
        }
        if self.data_ref.is_empty() {
            return malformed("empty data_ref".into());
        }
        for (channel, enc) in &self.channels {
            if self.mark.is_geometry() && channel.axis().is_some() {
                return Err(GrammarError::ChannelNotAllowed {
                    mark: self.mark,
                    channel: *channel,
                });
            }
            match &enc.scale {
                Scale::Linear { domain, .. } => {
                    if !(domain[0] < domain[1]) || domain.iter().any(|d| !d.is_finite()) {
                        return malformed(format!("linear domain of `{channel}` must increase"));
                    }
                }
                Scale::Ordinal { domain, range } => {
                    let distinct: BTreeSet<&String> = domain.iter().collect();
                    if distinct.len() != domain.len() {
                        return malformed(format!("ordinal domain of `{channel}` repeats values"));
                    }
                    if let ScaleRange::Colors(c) = range {
                        if c.len() < domain.len() {
                            return malformed(format!("ordinal range of `{channel}` too short"));
                        }
                    }
                }
            }
        }
        if let Some(tf) = &self.transfer_function {
            if tf.len() != 256 {
                return malformed("transfer function needs 256 entries".into());
            }
        }
        if !self.transform.is_valid() {
            return malformed("transform must be finite with positive scale".into());
        }
        if let Some(Link::TargetLink { position, .. }) = &self.link {
            if position.iter().any(|p| !p.is_finite()) {
                return malformed("target link position must be finite".into());
            }
        }
        Ok(())
    }

    /// Fields referenced by any channel.
    pub fn encoded_fields(&self) -> BTreeSet<&str> {
        self.channels.values().map(|c| c.field.as_str()).collect()
    }

    pub fn channel_for_field(&self, field: &str) -> Option<(Channel, &ChannelEncoding)> {
        self.channels
            .iter()
            .find(|(ch, enc)| ch.axis().is_some() && enc.field == field)
            .map(|(ch, enc)| (*ch, enc))
    }
}

/// Grayscale ramp: entry i is `[i, i, i, i]`.
pub fn default_transfer_function() -> Vec<[u8; 4]> {
    (0..=255u8).map(|i| [i, i, i, i]).collect()
}

pub fn serialize_spec(spec: &VisSpec) -> String {
    serde_json::to_string(spec).expect("specs always serialize")
}

pub fn parse_spec(text: &str) -> Result<VisSpec, GrammarError> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GrammarError::MalformedSpec(e.to_string()))?;
    let version = raw
        .get("schema_version")
        .ok_or_else(|| GrammarError::MalformedSpec("missing field `schema_version`".into()))?
        .as_u64()
        .ok_or_else(|| GrammarError::MalformedSpec("schema_version must be an integer".into()))?;
    if version != u64::from(SPEC_SCHEMA_VERSION) {
        return Err(GrammarError::UnknownSchemaVersion(version));
    }
    let spec: VisSpec =
        serde_json::from_value(raw).map_err(|e| GrammarError::MalformedSpec(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_spec() -> VisSpec {
        let mut channels = BTreeMap::new();
        channels.insert(
            Channel::X,
            ChannelEncoding {
                field: "loc_x".into(),
                scale: Scale::Linear {
                    domain: [-250.0, 250.0],
                    range: ScaleRange::Numeric([0.0, 1.0]),
                },
                legend: false,
            },
        );
        channels.insert(
            Channel::Color,
            ChannelEncoding {
                field: "made".into(),
                scale: Scale::Ordinal {
                    domain: vec!["true".into(), "false".into()],
                    range: ScaleRange::Colors(PALETTE[..2].iter().map(|s| s.to_string()).collect()),
                },
                legend: true,
            },
        );
        VisSpec {
            schema_version: 1,
            spec_id: "scatter".into(),
            mark: Mark::Point,
            data_ref: "abc123".into(),
            channels,
            coordinate_type: CoordinateType::World,
            transform: Similarity::identity(),
            link: None,
            filters: vec![],
            detail_fields: vec![],
            transfer_function: None,
        }
    }

    #[test]
    fn wire_keys_and_explicit_identity() {
        let text = serialize_spec(&sample_spec());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "schema_version",
            "spec_id",
            "mark",
            "data_ref",
            "channels",
            "coordinate_type",
            "transform",
            "link",
            "filters",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["link"], serde_json::Value::Null);
        assert_eq!(
            v["transform"]["rotation"],
            serde_json::json!([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        );
        assert_eq!(parse_spec(&text).unwrap().transform, Similarity::identity());
    }

    #[test]
    fn missing_mark_is_malformed() {
        let mut v: serde_json::Value = serde_json::to_value(sample_spec()).unwrap();
        v.as_object_mut().unwrap().remove("mark");
        assert!(matches!(
            parse_spec(&v.to_string()),
            Err(GrammarError::MalformedSpec(_))
        ));
    }

    #[test]
    fn future_schema_is_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(sample_spec()).unwrap();
        v["schema_version"] = serde_json::json!(2);
        assert_eq!(
            parse_spec(&v.to_string()),
            Err(GrammarError::UnknownSchemaVersion(2))
        );
    }

    #[test]
    fn round_trip_is_identity() {
        let mut s = sample_spec();
        s.link = Some(Link::AxisLink {
            spec_id: "court".into(),
            field: "loc_x".into(),
        });
        s.filters.push(Filter::Threshold {
            field: "loc_x".into(),
            lo: -10.5,
            hi: 1.0 / 3.0,
        });
        assert_eq!(parse_spec(&serialize_spec(&s)).unwrap(), s);
    }
}
