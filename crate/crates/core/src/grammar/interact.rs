use serde::{Deserialize, Serialize};

use super::{Filter, GrammarError, VisSpec};
use crate::transform::{RigidTransform, Similarity, Vec3};
use crate::value::{Cell, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Interaction {
    /// Rotate about the spec's local origin.
    Rotate { axis: Vec3, angle: f64 },
    /// Scale about the spec's local origin.
    Scale { factor: f64 },
    /// Shift in world space.
    Translate { offset: Vec3 },
    /// Hide (or, applied again, show) rows whose field equals `value`.
    ToggleFilter { field: String, value: String },
    /// Keep rows with `lo <= field <= hi`; replaces a previous range on the field.
    ThresholdFilter { field: String, lo: f64, hi: f64 },
    /// Show `field` in the per-mark detail popup.
    DetailOnDemand { field: String },
}

fn require_field(spec: &VisSpec, field: &str) -> Result<(), GrammarError> {
    if spec.encoded_fields().contains(field) {
        Ok(())
    } else {
        Err(GrammarError::UnknownField(field.to_string()))
    }
}

/// Apply one interaction, returning the updated spec. Field-based
/// interactions must name a field encoded by some channel.
pub fn apply_interaction(spec: &VisSpec, interaction: &Interaction) -> Result<VisSpec, GrammarError> {
    let mut out = spec.clone();
    match interaction {
        Interaction::Rotate { axis, angle } => {
            if axis.iter().all(|a| *a == 0.0) || !angle.is_finite() {
                return Err(GrammarError::MalformedSpec("rotation needs an axis".into()));
            }
            let r = Similarity::from(RigidTransform::from_axis_angle(*axis, *angle, [0.0; 3]));
            out.transform = spec.transform.compose(&r);
        }
        Interaction::Scale { factor } => {
            if !(*factor > 0.0) || !factor.is_finite() {
                return Err(GrammarError::MalformedSpec("scale factor must be positive".into()));
            }
            out.transform.scale *= factor;
        }
        Interaction::Translate { offset } => {
            for a in 0..3 {
                out.transform.translation[a] += offset[a];
            }
        }
        Interaction::ToggleFilter { field, value } => {
            require_field(spec, field)?;
            let filter = Filter::Toggle {
                field: field.clone(),
                value: value.clone(),
            };
            if let Some(pos) = out.filters.iter().position(|f| *f == filter) {
                out.filters.remove(pos);
            } else {
                out.filters.push(filter);
            }
        }
        Interaction::ThresholdFilter { field, lo, hi } => {
            require_field(spec, field)?;
            if !(lo <= hi) {
                return Err(GrammarError::MalformedSpec("threshold needs lo <= hi".into()));
            }
            out.filters
                .retain(|f| !matches!(f, Filter::Threshold { field: g, .. } if g == field));
            out.filters.push(Filter::Threshold {
                field: field.clone(),
                lo: *lo,
                hi: *hi,
            });
        }
        Interaction::DetailOnDemand { field } => {
            require_field(spec, field)?;
            if !out.detail_fields.contains(field) {
                out.detail_fields.push(field.clone());
            }
        }
    }
    Ok(out)
}

fn passes(filter: &Filter, table: &Table, row: &[Cell]) -> bool {
    match filter {
        Filter::Toggle { field, value } => table
            .column_index(field)
            .map_or(true, |i| row[i].label() != *value),
        Filter::Threshold { field, lo, hi } => table
            .column_index(field)
            .and_then(|i| row[i].as_f64())
            .is_some_and(|v| *lo <= v && v <= *hi),
    }
}

/// Indices of the rows every filter keeps, ascending.
pub fn visible_rows(spec: &VisSpec, table: &Table) -> Vec<usize> {
    table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, row)| spec.filters.iter().all(|f| passes(f, table, row)))
        .map(|(i, _)| i)
        .collect()
}
