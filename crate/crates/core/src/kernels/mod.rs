//! Numerical filters behind the processing nodes.

mod curvature;
mod icp;
mod iso;
mod kdtree;
mod mc_tables;
mod points;
mod region;
mod roi;
pub mod synth;

pub use curvature::compute_curvature;
pub use icp::{kabsch, register_icp, IcpParams, IcpResult};
pub use iso::iso_surface;
pub use kdtree::KdTree;
pub use points::volume_to_points;
pub use region::{select_region, Intrinsics, PixelRect};
pub use roi::extract_roi;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::ValueError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid input: {0}")]
    Invalid(#[from] ValueError),
    #[error("isovalue must be finite")]
    NonFiniteIsovalue,
    #[error("stride must be positive")]
    ZeroStride,
    #[error("pixel rect {rect:?} exceeds {width}x{height} image")]
    RectOutOfBounds {
        rect: PixelRect,
        width: u32,
        height: u32,
    },
    #[error("focal lengths must be positive")]
    BadIntrinsics,
    #[error("region selection needs a depth image")]
    NotDepthImage,
    #[error("every pixel in the rect has zero depth")]
    AllPixelsInvalid,
    #[error("{which} cloud is degenerate (needs at least 3 non-collinear points)")]
    DegenerateCloud { which: &'static str },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("ROI extent must be positive on every axis")]
    BadExtent,
    #[error("ROI does not intersect the volume")]
    RoiOutsideVolume,
}

/// Non-fatal conditions reported alongside a kernel result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelWarning {
    /// Isovalue outside the sample range; the mesh is empty.
    EmptySurface,
    /// No voxel met the threshold; the cloud is empty.
    EmptySelection,
    /// Vertices on an open boundary, assigned curvature 0.
    BoundaryVertices(usize),
    /// Vertices whose one-ring is not a single closed fan, assigned curvature 0.
    NonManifoldVertices(usize),
    /// ICP stopped at the iteration cap.
    IterationCap(usize),
}

impl fmt::Display for KernelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelWarning::EmptySurface => f.write_str("isovalue outside sample range, empty surface"),
            KernelWarning::EmptySelection => f.write_str("no voxel met the threshold"),
            KernelWarning::BoundaryVertices(n) => write!(f, "{n} boundary vertices set to 0"),
            KernelWarning::NonManifoldVertices(n) => {
                write!(f, "{n} non-manifold vertices set to 0")
            }
            KernelWarning::IterationCap(n) => write!(f, "stopped after {n} iterations"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<KernelWarning>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Flagged {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn flagged(value: T, warning: KernelWarning) -> Self {
        Flagged {
            value,
            warnings: vec![warning],
        }
    }

    pub fn has(&self, warning: &KernelWarning) -> bool {
        self.warnings.contains(warning)
    }
}
