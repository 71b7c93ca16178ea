//! File loaders for input nodes. Paths are relative to the data-store root.

use std::fs;
use std::io::Cursor;
use std::path::{Component, Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::Vec3;
use crate::value::{Cell, Column, ColumnType, DataValue, Image2D, Pixels, Table, Volume3D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("cannot parse {path}: {reason}")]
    ParseError { path: String, reason: String },
    #[error("{path} cannot be loaded as {kind:?}")]
    KindMismatch { kind: InputKind, path: String },
    #[error("path `{0}` escapes the data root")]
    OutsideRoot(String),
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    DataFile,
    ImageData,
    Image3DFile,
}

/// Joins a relative path onto the root, refusing absolute paths and `..`.
pub fn resolve_path(root: &Path, rel: &str) -> Result<PathBuf, LoadError> {
    let p = Path::new(rel);
    if rel.is_empty()
        || p.components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(LoadError::OutsideRoot(rel.to_string()));
    }
    Ok(root.join(p))
}

fn extension(rel: &str) -> String {
    Path::new(rel)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn read(path: &Path, rel: &str) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LoadError::FileNotFound(rel.to_string()),
        _ => LoadError::Io {
            path: rel.to_string(),
            reason: e.to_string(),
        },
    })
}

fn parse_err(rel: &str, reason: impl ToString) -> LoadError {
    LoadError::ParseError {
        path: rel.to_string(),
        reason: reason.to_string(),
    }
}

pub fn load_input(kind: InputKind, root: &Path, rel: &str) -> Result<DataValue, LoadError> {
    let ext = extension(rel);
    let ok = match kind {
        InputKind::DataFile => matches!(ext.as_str(), "json" | "csv"),
        InputKind::ImageData => matches!(ext.as_str(), "png" | "pgm"),
        InputKind::Image3DFile => ext == "raw",
    };
    if !ok {
        return Err(LoadError::KindMismatch {
            kind,
            path: rel.to_string(),
        });
    }
    let path = resolve_path(root, rel)?;
    let bytes = read(&path, rel)?;
    match (kind, ext.as_str()) {
        (InputKind::DataFile, "json") => parse_json_table(&bytes).map_err(|e| parse_err(rel, e)),
        (InputKind::DataFile, _) => parse_csv_table(&bytes).map_err(|e| parse_err(rel, e)),
        (InputKind::ImageData, "png") => decode_image(&bytes, ImageFormat::Png, rel),
        (InputKind::ImageData, _) => decode_image(&bytes, ImageFormat::Pnm, rel),
        (InputKind::Image3DFile, _) => {
            let sidecar = path.with_extension("json");
            let header = read(&sidecar, &format!("{rel} sidecar"))?;
            let header: VolumeHeader =
                serde_json::from_slice(&header).map_err(|e| parse_err(rel, e))?;
            let volume = header.decode(&bytes).map_err(|e| parse_err(rel, e))?;
            Ok(DataValue::volume(volume))
        }
    }
}

fn infer_type(values: &[&serde_json::Value]) -> ColumnType {
    use serde_json::Value;
    let present: Vec<_> = values.iter().filter(|v| !v.is_null()).collect();
    if !present.is_empty() && present.iter().all(|v| v.is_number()) {
        ColumnType::Number
    } else if !present.is_empty() && present.iter().all(|v| matches!(v, Value::Bool(_))) {
        ColumnType::Boolean
    } else {
        ColumnType::Text
    }
}

fn json_cell(v: &serde_json::Value, ty: ColumnType) -> Cell {
    use serde_json::Value;
    match (v, ty) {
        (Value::Null, _) => Cell::Null,
        (Value::Number(n), ColumnType::Number) => Cell::Number(n.as_f64().unwrap_or(f64::NAN)),
        (Value::Bool(b), ColumnType::Boolean) => Cell::Boolean(*b),
        (Value::String(s), _) => Cell::Text(s.clone()),
        (other, _) => Cell::Text(other.to_string()),
    }
}

/// Array of flat objects; columns in first-appearance order.
pub fn parse_json_table(bytes: &[u8]) -> Result<DataValue, String> {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let mut names: Vec<String> = Vec::new();
    for row in &rows {
        for (k, v) in row {
            if v.is_object() || v.is_array() {
                return Err(format!("field `{k}` is not a scalar"));
            }
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
    }
    let null = serde_json::Value::Null;
    let columns: Vec<Column> = names
        .iter()
        .map(|n| {
            let vals: Vec<_> = rows.iter().map(|r| r.get(n).unwrap_or(&null)).collect();
            Column {
                name: n.clone(),
                ty: infer_type(&vals),
            }
        })
        .collect();
    let cells = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|c| json_cell(r.get(&c.name).unwrap_or(&null), c.ty))
                .collect()
        })
        .collect();
    Table::new(columns, cells)
        .map(DataValue::table)
        .map_err(|e| e.to_string())
}

/// CSV with a header row. A column is numeric when every non-empty cell
/// parses as a number, boolean when every one is `true`/`false`.
pub fn parse_csv_table(bytes: &[u8]) -> Result<DataValue, String> {
    let mut reader = csv::Reader::from_reader(bytes);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        raw.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    let columns: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let present: Vec<&str> = raw
                .iter()
                .map(|r| r[i].as_str())
                .filter(|s| !s.is_empty())
                .collect();
            let ty = if !present.is_empty() && present.iter().all(|s| s.parse::<f64>().is_ok_and(f64::is_finite)) {
                ColumnType::Number
            } else if !present.is_empty() && present.iter().all(|s| *s == "true" || *s == "false") {
                ColumnType::Boolean
            } else {
                ColumnType::Text
            };
            Column { name: n.clone(), ty }
        })
        .collect();
    let rows = raw
        .into_iter()
        .map(|r| {
            r.into_iter()
                .zip(&columns)
                .map(|(s, c)| match c.ty {
                    _ if s.is_empty() => Cell::Null,
                    ColumnType::Number => Cell::Number(s.parse().unwrap()),
                    ColumnType::Boolean => Cell::Boolean(s == "true"),
                    ColumnType::Text => Cell::Text(s),
                })
                .collect()
        })
        .collect();
    Table::new(columns, rows)
        .map(DataValue::table)
        .map_err(|e| e.to_string())
}

/// 8-bit gray stays gray, 16-bit gray is read as depth in millimeters,
/// everything else becomes RGBA.
fn decode_image(bytes: &[u8], format: ImageFormat, rel: &str) -> Result<DataValue, LoadError> {
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| parse_err(rel, e))?;
    let (width, height) = (img.width(), img.height());
    let pixels = match img {
        DynamicImage::ImageLuma8(b) => Pixels::Gray8(b.into_raw()),
        DynamicImage::ImageLuma16(b) => Pixels::Depth16(b.into_raw()),
        other => Pixels::Rgba8(other.to_rgba8().into_raw()),
    };
    Image2D::new(width, height, pixels)
        .map(DataValue::image)
        .map_err(|e| parse_err(rel, e))
}

/// Writes a 16-bit binary PGM of depth millimeters.
pub fn write_depth_pgm(path: &Path, width: u32, height: u32, mm: &[u16]) -> Result<(), String> {
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width, height, mm.to_vec())
        .ok_or("buffer size does not match dimensions")?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut out, ImageFormat::Pnm)
        .map_err(|e| e.to_string())?;
    fs::write(path, out.into_inner()).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    U8,
    U16,
    F32,
}

impl SampleType {
    fn width(&self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 => 2,
            SampleType::F32 => 4,
        }
    }
}

/// Sidecar describing a `.raw` volume of little-endian samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    #[serde(default)]
    pub origin: Vec3,
    pub dtype: SampleType,
}

impl VolumeHeader {
    pub fn decode(&self, bytes: &[u8]) -> Result<Volume3D, String> {
        let n = self.dims.iter().product::<usize>();
        let w = self.dtype.width();
        if bytes.len() != n * w {
            return Err(format!(
                "expected {} bytes for {:?} {:?}, found {}",
                n * w,
                self.dims,
                self.dtype,
                bytes.len()
            ));
        }
        let samples = bytes
            .chunks_exact(w)
            .map(|c| match self.dtype {
                SampleType::U8 => f32::from(c[0]),
                SampleType::U16 => f32::from(u16::from_le_bytes([c[0], c[1]])),
                SampleType::F32 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
            })
            .collect();
        Volume3D::new(self.dims, self.spacing, self.origin, samples).map_err(|e| e.to_string())
    }
}

/// Writes `<stem>.raw` and its `<stem>.json` sidecar. Samples are converted
/// to `dtype` (rounded and clamped for integer types).
pub fn write_volume(raw_path: &Path, volume: &Volume3D, dtype: SampleType) -> Result<(), String> {
    let mut bytes = Vec::with_capacity(volume.samples.len() * dtype.width());
    for &s in &volume.samples {
        match dtype {
            SampleType::U8 => bytes.push(s.round().clamp(0.0, 255.0) as u8),
            SampleType::U16 => {
                bytes.extend_from_slice(&(s.round().clamp(0.0, 65535.0) as u16).to_le_bytes())
            }
            SampleType::F32 => bytes.extend_from_slice(&s.to_le_bytes()),
        }
    }
    let header = VolumeHeader {
        dims: volume.dims,
        spacing: volume.spacing,
        origin: volume.origin,
        dtype,
    };
    fs::write(raw_path, bytes).map_err(|e| e.to_string())?;
    fs::write(
        raw_path.with_extension("json"),
        serde_json::to_vec_pretty(&header).unwrap(),
    )
    .map_err(|e| e.to_string())
}
