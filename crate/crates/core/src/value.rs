//! Payloads carried along workflow edges.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::VisSpec;
use crate::sensor::SensorKind;
use crate::transform::{RigidTransform, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataKind {
    Table,
    Image2D,
    Volume3D,
    Mesh,
    PointCloud,
    Pose,
    VisSpec,
    DeviceKey,
    StreamHandle,
    Scalar,
    Text,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValueError {
    #[error("row {row} has {got} cells, schema has {expected} columns")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("column `{column}` expects {expected:?}, row {row} holds a different type")]
    CellType {
        column: String,
        expected: ColumnType,
        row: usize,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("volume dimensions must be positive, got {0:?}")]
    BadDims([usize; 3]),
    #[error("volume spacing must be positive, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("volume holds {got} samples, dims require {expected}")]
    SampleCount { got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("triangle {triangle} references vertex {index} of {count}")]
    BadIndex {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("{what} has {got} entries for {expected} vertices")]
    AttributeLength {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("image buffer holds {got} values, {width}x{height} requires {expected}")]
    ImageSize {
        width: u32,
        height: u32,
        got: usize,
        expected: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Number,
    Text,
    Boolean,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Boolean(bool),
    Text(String),
    Null,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Text form used for ordinal domains and equality filters.
    pub fn label(&self) -> String {
        match self {
            Cell::Number(v) => format!("{v}"),
            Cell::Boolean(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn matches(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Cell::Null, _)
                | (Cell::Number(_), ColumnType::Number)
                | (Cell::Text(_), ColumnType::Text)
                | (Cell::Boolean(_), ColumnType::Boolean)
        )
    }
}

/// Rows sharing one column schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Result<Self, ValueError> {
        let table = Table { columns, rows };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(ValueError::DuplicateColumn(c.name.clone()));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(ValueError::RowWidth {
                    row: r,
                    got: row.len(),
                    expected: self.columns.len(),
                });
            }
            for (cell, col) in row.iter().zip(&self.columns) {
                if !cell.matches(col.ty) {
                    return Err(ValueError::CellType {
                        column: col.name.clone(),
                        expected: col.ty,
                        row: r,
                    });
                }
                if let Cell::Number(v) = cell {
                    if !v.is_finite() {
                        return Err(ValueError::NonFinite("table"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Cells of one column in row order.
    pub fn cells<'a>(&'a self, name: &str) -> Option<impl Iterator<Item = &'a Cell> + 'a> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[idx]))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Pixel storage; depth values are millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", content = "data")]
pub enum Pixels {
    Gray8(Vec<u8>),
    Rgba8(Vec<u8>),
    Depth16(Vec<u16>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image2D {
    pub width: u32,
    pub height: u32,
    pub pixels: Pixels,
    /// Camera pose in world space, present for frames captured on a device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<RigidTransform>,
}

impl Image2D {
    pub fn new(width: u32, height: u32, pixels: Pixels) -> Result<Self, ValueError> {
        let img = Image2D {
            width,
            height,
            pixels,
            pose: None,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        let n = self.width as usize * self.height as usize;
        let (got, expected) = match &self.pixels {
            Pixels::Gray8(p) => (p.len(), n),
            Pixels::Rgba8(p) => (p.len(), n * 4),
            Pixels::Depth16(p) => (p.len(), n),
        };
        if got != expected {
            return Err(ValueError::ImageSize {
                width: self.width,
                height: self.height,
                got,
                expected,
            });
        }
        Ok(())
    }
}

/// Regular scalar grid, x-fastest sample layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume3D {
    pub dims: [usize; 3],
    /// Meters per voxel along each axis.
    pub spacing: [f64; 3],
    /// World position of voxel (0, 0, 0).
    pub origin: Vec3,
    pub samples: Vec<f32>,
}

impl Volume3D {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: Vec3,
        samples: Vec<f32>,
    ) -> Result<Self, ValueError> {
        let v = Volume3D {
            dims,
            spacing,
            origin,
            samples,
        };
        v.validate()?;
        Ok(v)
    }

    /// Samples `f(world_position)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: Vec3,
        f: impl Fn(Vec3) -> f64,
    ) -> Result<Self, ValueError> {
        let mut samples = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = [
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    ];
                    samples.push(f(p) as f32);
                }
            }
        }
        Volume3D::new(dims, spacing, origin, samples)
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(ValueError::BadDims(self.dims));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(ValueError::BadSpacing(self.spacing));
        }
        let expected = self.dims[0] * self.dims[1] * self.dims[2];
        if self.samples.len() != expected {
            return Err(ValueError::SampleCount {
                got: self.samples.len(),
                expected,
            });
        }
        if self.samples.iter().any(|s| !s.is_finite())
            || self.origin.iter().any(|s| !s.is_finite())
        {
            return Err(ValueError::NonFinite("volume"));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn sample(&self, i: usize, j: usize, k: usize) -> f32 {
        self.samples[self.index(i, j, k)]
    }

    pub fn world_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Physical extent covered by the voxels, `dims * spacing`.
    pub fn physical_size(&self) -> Vec3 {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    /// World position halfway between the first and last voxel.
    pub fn center(&self) -> Vec3 {
        [
            self.origin[0] + (self.dims[0] - 1) as f64 * self.spacing[0] / 2.0,
            self.origin[1] + (self.dims[1] - 1) as f64 * self.spacing[1] / 2.0,
            self.origin[2] + (self.dims[2] - 1) as f64 * self.spacing[2] / 2.0,
        ]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.samples
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<Vec3>>,
    pub triangles: Vec<[u32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_scalars: Option<Vec<f64>>,
}

impl Mesh {
    pub fn validate(&self) -> Result<(), ValueError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= n {
                    return Err(ValueError::BadIndex {
                        triangle: t,
                        index,
                        count: n,
                    });
                }
            }
        }
        if self.vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ValueError::NonFinite("mesh vertices"));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(ValueError::AttributeLength {
                    what: "normals",
                    got: normals.len(),
                    expected: n,
                });
            }
            for (i, nrm) in normals.iter().enumerate() {
                let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                if (len - 1.0).abs() > 1e-6 {
                    return Err(ValueError::NonUnitNormal(i));
                }
            }
        }
        if let Some(s) = &self.vertex_scalars {
            if s.len() != n {
                return Err(ValueError::AttributeLength {
                    what: "vertex_scalars",
                    got: s.len(),
                    expected: n,
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ValueError::NonFinite("point cloud"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.points.len() {
                return Err(ValueError::AttributeLength {
                    what: "weights",
                    got: w.len(),
                    expected: self.points.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reference to one live sensor stream of a connected device.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamHandle {
    pub device_key: String,
    pub kind: SensorKind,
}

/// Tagged payload flowing along a workflow edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum DataValue {
    Table(Arc<Table>),
    Image2D(Arc<Image2D>),
    Volume3D(Arc<Volume3D>),
    Mesh(Arc<Mesh>),
    PointCloud(Arc<PointCloud>),
    Pose(RigidTransform),
    VisSpec(Arc<VisSpec>),
    DeviceKey(String),
    StreamHandle(StreamHandle),
    Scalar(f64),
    Text(String),
}

impl DataValue {
    pub fn kind(&self) -> DataKind {
        match self {
            DataValue::Table(_) => DataKind::Table,
            DataValue::Image2D(_) => DataKind::Image2D,
            DataValue::Volume3D(_) => DataKind::Volume3D,
            DataValue::Mesh(_) => DataKind::Mesh,
            DataValue::PointCloud(_) => DataKind::PointCloud,
            DataValue::Pose(_) => DataKind::Pose,
            DataValue::VisSpec(_) => DataKind::VisSpec,
            DataValue::DeviceKey(_) => DataKind::DeviceKey,
            DataValue::StreamHandle(_) => DataKind::StreamHandle,
            DataValue::Scalar(_) => DataKind::Scalar,
            DataValue::Text(_) => DataKind::Text,
        }
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        match self {
            DataValue::Table(t) => t.validate(),
            DataValue::Image2D(i) => i.validate(),
            DataValue::Volume3D(v) => v.validate(),
            DataValue::Mesh(m) => m.validate(),
            DataValue::PointCloud(p) => p.validate(),
            DataValue::Scalar(s) if !s.is_finite() => Err(ValueError::NonFinite("scalar")),
            _ => Ok(()),
        }
    }

    /// Canonical serialized bytes; equal values give equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("data values always serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn table(t: Table) -> Self {
        DataValue::Table(Arc::new(t))
    }

    pub fn mesh(m: Mesh) -> Self {
        DataValue::Mesh(Arc::new(m))
    }

    pub fn volume(v: Volume3D) -> Self {
        DataValue::Volume3D(Arc::new(v))
    }

    pub fn points(p: PointCloud) -> Self {
        DataValue::PointCloud(Arc::new(p))
    }

    pub fn image(i: Image2D) -> Self {
        DataValue::Image2D(Arc::new(i))
    }

    pub fn spec(s: VisSpec) -> Self {
        DataValue::VisSpec(Arc::new(s))
    }
}
