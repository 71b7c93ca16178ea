use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    default_transfer_function, Channel, ChannelEncoding, CoordinateType, GrammarError, Link, Mark,
    Scale, ScaleRange, VisSpec, COLOR_RAMP, PALETTE, SPEC_SCHEMA_VERSION,
};
use crate::store::BlobStore;
use crate::transform::Similarity;
use crate::value::{Cell, ColumnType, DataKind, DataValue, Table};

/// Field name under which mesh vertex scalars can be encoded.
pub const VERTEX_SCALARS: &str = "vertex_scalars";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Linear,
    Ordinal,
}

/// A channel as requested by a user; unset parts get defaults from the data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelDraft {
    pub field: String,
    #[serde(default)]
    pub scale: Option<ScaleKind>,
    #[serde(default)]
    pub domain: Option<serde_json::Value>,
    #[serde(default)]
    pub range: Option<ScaleRange>,
    #[serde(default)]
    pub legend: bool,
}

impl ChannelDraft {
    pub fn field(name: &str) -> Self {
        ChannelDraft {
            field: name.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecRequest {
    pub spec_id: String,
    pub mark: Mark,
    #[serde(default)]
    pub channels: BTreeMap<Channel, ChannelDraft>,
    #[serde(default = "world")]
    pub coordinate_type: CoordinateType,
    #[serde(default)]
    pub transform: Similarity,
    #[serde(default)]
    pub link: Option<Link>,
}

fn world() -> CoordinateType {
    CoordinateType::World
}

impl SpecRequest {
    pub fn new(spec_id: &str, mark: Mark) -> Self {
        SpecRequest {
            spec_id: spec_id.to_string(),
            mark,
            channels: BTreeMap::new(),
            coordinate_type: CoordinateType::World,
            transform: Similarity::identity(),
            link: None,
        }
    }

    pub fn channel(mut self, channel: Channel, draft: ChannelDraft) -> Self {
        self.channels.insert(channel, draft);
        self
    }
}

fn accepts(mark: Mark, kind: DataKind) -> bool {
    match mark {
        Mark::Point => matches!(kind, DataKind::Table | DataKind::PointCloud),
        Mark::Bar | Mark::Line | Mark::Text => kind == DataKind::Table,
        Mark::Image => kind == DataKind::Image2D,
        Mark::Mesh => kind == DataKind::Mesh,
        Mark::Volume => kind == DataKind::Volume3D,
    }
}

enum FieldValues {
    Numbers(Vec<f64>),
    Labels(Vec<String>),
}

fn table_field(table: &Table, field: &str) -> Result<FieldValues, GrammarError> {
    let col = table
        .column(field)
        .ok_or_else(|| GrammarError::UnknownField(field.to_string()))?;
    let cells = table.cells(field).expect("column exists");
    Ok(match col.ty {
        ColumnType::Number => FieldValues::Numbers(cells.filter_map(Cell::as_f64).collect()),
        _ => FieldValues::Labels(
            cells
                .filter(|c| !matches!(c, Cell::Null))
                .map(Cell::label)
                .collect(),
        ),
    })
}

fn field_values(data: &DataValue, field: &str) -> Result<FieldValues, GrammarError> {
    match data {
        DataValue::Table(t) => table_field(t, field),
        DataValue::Mesh(m) if field == VERTEX_SCALARS => m
            .vertex_scalars
            .clone()
            .map(FieldValues::Numbers)
            .ok_or_else(|| GrammarError::UnknownField(field.to_string())),
        DataValue::PointCloud(p) if field == "weight" => p
            .weights
            .clone()
            .map(FieldValues::Numbers)
            .ok_or_else(|| GrammarError::UnknownField(field.to_string())),
        _ => Err(GrammarError::UnknownField(field.to_string())),
    }
}

fn is_empty(data: &DataValue) -> bool {
    match data {
        DataValue::Table(t) => t.is_empty(),
        DataValue::Mesh(m) => m.triangles.is_empty(),
        DataValue::PointCloud(p) => p.is_empty(),
        DataValue::Volume3D(v) => v.samples.is_empty(),
        DataValue::Image2D(i) => i.width == 0 || i.height == 0,
        _ => false,
    }
}

fn default_range(channel: Channel, kind: ScaleKind, domain_len: usize) -> ScaleRange {
    match (channel, kind) {
        (Channel::Color, ScaleKind::Linear) => {
            ScaleRange::Colors(COLOR_RAMP.iter().map(|s| s.to_string()).collect())
        }
        (Channel::Color, ScaleKind::Ordinal) => ScaleRange::Colors(
            (0..domain_len)
                .map(|i| PALETTE[i % PALETTE.len()].to_string())
                .collect(),
        ),
        (Channel::Size, _) => ScaleRange::Numeric([0.01, 0.05]),
        (Channel::Opacity, _) => ScaleRange::Numeric([0.2, 1.0]),
        _ => ScaleRange::Numeric([0.0, 1.0]),
    }
}

fn linear_domain(values: &[f64]) -> [f64; 2] {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return [0.0, 1.0];
    }
    if lo == hi {
        // A constant field still needs an increasing domain.
        return [lo - 0.5, hi + 0.5];
    }
    [lo, hi]
}

fn ordinal_domain(labels: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    labels
        .iter()
        .filter(|l| seen.insert(l.as_str()))
        .cloned()
        .collect()
}

fn build_scale(
    channel: Channel,
    draft: &ChannelDraft,
    values: FieldValues,
) -> Result<Scale, GrammarError> {
    let kind = match (&values, draft.scale) {
        (_, Some(k)) => k,
        (FieldValues::Numbers(_), None) => ScaleKind::Linear,
        (FieldValues::Labels(_), None) => ScaleKind::Ordinal,
    };
    let bad_domain = || GrammarError::MalformedSpec(format!("bad domain for `{}`", draft.field));
    match kind {
        ScaleKind::Linear => {
            let FieldValues::Numbers(nums) = values else {
                return Err(GrammarError::ScaleMismatch {
                    field: draft.field.clone(),
                    scale: kind,
                });
            };
            let domain = match &draft.domain {
                Some(d) => serde_json::from_value::<[f64; 2]>(d.clone()).map_err(|_| bad_domain())?,
                None => linear_domain(&nums),
            };
            let range = draft.range.clone().unwrap_or_else(|| default_range(channel, kind, 2));
            Ok(Scale::Linear { domain, range })
        }
        ScaleKind::Ordinal => {
            let labels: Vec<String> = match values {
                FieldValues::Labels(l) => l,
                FieldValues::Numbers(n) => n.iter().map(|v| format!("{v}")).collect(),
            };
            let domain = match &draft.domain {
                Some(d) => serde_json::from_value::<Vec<String>>(d.clone()).map_err(|_| bad_domain())?,
                None => ordinal_domain(&labels),
            };
            let range = draft
                .range
                .clone()
                .unwrap_or_else(|| default_range(channel, kind, domain.len()));
            Ok(Scale::Ordinal { domain, range })
        }
    }
}

/// Compile a request against its data. The data is persisted in `store` and
/// referenced by content hash.
pub fn build_spec(
    data: &DataValue,
    request: SpecRequest,
    store: &dyn BlobStore,
) -> Result<VisSpec, GrammarError> {
    let kind = data.kind();
    if !accepts(request.mark, kind) {
        return Err(GrammarError::MarkDataMismatch {
            mark: request.mark,
            kind,
        });
    }
    if is_empty(data) {
        return Err(GrammarError::EmptyData);
    }
    let mut channels = BTreeMap::new();
    for (channel, draft) in &request.channels {
        if request.mark.is_geometry() && channel.axis().is_some() {
            return Err(GrammarError::ChannelNotAllowed {
                mark: request.mark,
                channel: *channel,
            });
        }
        let values = field_values(data, &draft.field)?;
        let scale = build_scale(*channel, draft, values)?;
        channels.insert(
            *channel,
            ChannelEncoding {
                field: draft.field.clone(),
                scale,
                legend: draft.legend,
            },
        );
    }
    let data_ref = store
        .put(data)
        .map_err(|e| GrammarError::Store(e.to_string()))?;
    let spec = VisSpec {
        schema_version: SPEC_SCHEMA_VERSION,
        spec_id: request.spec_id,
        mark: request.mark,
        data_ref,
        channels,
        coordinate_type: request.coordinate_type,
        transform: request.transform,
        link: request.link,
        filters: Vec::new(),
        detail_fields: Vec::new(),
        transfer_function: (request.mark == Mark::Volume).then(default_transfer_function),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;
    use crate::value::{Column, Mesh};

    fn shots() -> Table {
        Table::new(
            vec![
                Column { name: "loc_x".into(), ty: ColumnType::Number },
                Column { name: "made".into(), ty: ColumnType::Boolean },
            ],
            vec![
                vec![Cell::Number(-10.0), Cell::Boolean(true)],
                vec![Cell::Number(30.0), Cell::Boolean(false)],
                vec![Cell::Number(5.0), Cell::Boolean(true)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn defaults_come_from_data() {
        let store = MemoryStore::default();
        let req = SpecRequest::new("s", Mark::Point)
            .channel(Channel::X, ChannelDraft::field("loc_x"))
            .channel(Channel::Color, ChannelDraft::field("made"));
        let spec = build_spec(&DataValue::table(shots()), req, &store).unwrap();
        assert_eq!(
            spec.channels[&Channel::X].scale,
            Scale::Linear {
                domain: [-10.0, 30.0],
                range: ScaleRange::Numeric([0.0, 1.0])
            }
        );
        assert_eq!(
            spec.channels[&Channel::Color].scale,
            Scale::Ordinal {
                domain: vec!["true".into(), "false".into()],
                range: ScaleRange::Colors(vec![PALETTE[0].into(), PALETTE[1].into()])
            }
        );
        assert!(store.get(&spec.data_ref).unwrap().is_some());
    }

    #[test]
    fn geometry_marks_reject_positional_channels() {
        let mesh = Mesh {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            ..Default::default()
        };
        let req = SpecRequest::new("m", Mark::Mesh).channel(Channel::X, ChannelDraft::field("a"));
        assert_eq!(
            build_spec(&DataValue::mesh(mesh), req, &MemoryStore::default()),
            Err(GrammarError::ChannelNotAllowed {
                mark: Mark::Mesh,
                channel: Channel::X
            })
        );
    }

    #[test]
    fn errors_for_unknown_fields_empty_data_and_wrong_marks() {
        let store = MemoryStore::default();
        let req = SpecRequest::new("s", Mark::Point).channel(Channel::X, ChannelDraft::field("nope"));
        assert_eq!(
            build_spec(&DataValue::table(shots()), req, &store),
            Err(GrammarError::UnknownField("nope".into()))
        );
        let empty = Table::new(shots().columns, vec![]).unwrap();
        assert_eq!(
            build_spec(&DataValue::table(empty), SpecRequest::new("s", Mark::Point), &store),
            Err(GrammarError::EmptyData)
        );
        assert!(matches!(
            build_spec(&DataValue::table(shots()), SpecRequest::new("s", Mark::Volume), &store),
            Err(GrammarError::MarkDataMismatch { .. })
        ));
    }

    #[test]
    fn constant_field_widens_domain() {
        assert_eq!(linear_domain(&[2.0, 2.0]), [1.5, 2.5]);
    }
}
