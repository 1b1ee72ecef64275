//! Dataset model: videos split into fixed-length fragments, each fragment
//! carrying one precomputed feature vector.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::matrix::FragmentMatrix;

/// Video-level label, the only supervision available during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VideoLabel {
    Normal,
    Anomalous,
}

impl VideoLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            VideoLabel::Normal => 0,
            VideoLabel::Anomalous => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(VideoLabel::Normal),
            1 => Some(VideoLabel::Anomalous),
            _ => None,
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == VideoLabel::Anomalous
    }
}

/// Number of fragments covering `num_frames` frames at `k` frames per
/// fragment. The last fragment may be partial.
pub fn fragment_count(num_frames: usize, k: usize) -> usize {
    num_frames.div_ceil(k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub label: VideoLabel,
    pub num_frames: usize,
    pub features: FragmentMatrix,
}

impl VideoRecord {
    pub fn num_fragments(&self) -> usize {
        self.features.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub videos: Vec<VideoRecord>,
    pub feature_dim: usize,
    pub frames_per_fragment: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn count(&self, label: VideoLabel) -> usize {
        self.videos.iter().filter(|v| v.label == label).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyDataset,
    InvalidFragmentLength,
    InvalidFeatureDim,
    DuplicateId,
    ZeroFrames,
    EmptyFeatures,
    DimensionMismatch { expected: usize, found: usize },
    FragmentCountMismatch { expected: usize, found: usize },
    NonFinite { row: usize, col: usize },
}

/// One failed dataset invariant. `video_id` is `None` for dataset-level
/// problems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub video_id: Option<String>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = &self.video_id {
            write!(f, "video {id}: ")?;
        }
        match &self.kind {
            ViolationKind::EmptyDataset => write!(f, "dataset has no videos"),
            ViolationKind::InvalidFragmentLength => write!(f, "frames per fragment must be >= 1"),
            ViolationKind::InvalidFeatureDim => write!(f, "feature dimension must be >= 1"),
            ViolationKind::DuplicateId => write!(f, "duplicate video id"),
            ViolationKind::ZeroFrames => write!(f, "num_frames must be >= 1"),
            ViolationKind::EmptyFeatures => write!(f, "feature matrix has no rows"),
            ViolationKind::DimensionMismatch { expected, found } => {
                write!(f, "feature dimension {found}, dataset expects {expected}")
            }
            ViolationKind::FragmentCountMismatch { expected, found } => {
                write!(f, "{found} fragment rows, num_frames implies {expected}")
            }
            ViolationKind::NonFinite { row, col } => {
                write!(f, "non-finite feature at row {row}, column {col}")
            }
        }
    }
}

/// Collect every invariant violation in `d`. An empty list means the dataset
/// is well-formed.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let global = |kind| Violation {
        video_id: None,
        kind,
    };
    if d.videos.is_empty() {
        out.push(global(ViolationKind::EmptyDataset));
    }
    if d.frames_per_fragment == 0 {
        out.push(global(ViolationKind::InvalidFragmentLength));
    }
    if d.feature_dim == 0 {
        out.push(global(ViolationKind::InvalidFeatureDim));
    }

    let mut seen = HashSet::new();
    for v in &d.videos {
        let mut push = |kind| {
            out.push(Violation {
                video_id: Some(v.video_id.clone()),
                kind,
            })
        };
        if !seen.insert(v.video_id.as_str()) {
            push(ViolationKind::DuplicateId);
        }
        if v.num_frames == 0 {
            push(ViolationKind::ZeroFrames);
        }
        if v.features.rows() == 0 {
            push(ViolationKind::EmptyFeatures);
        }
        if v.features.cols() != d.feature_dim {
            push(ViolationKind::DimensionMismatch {
                expected: d.feature_dim,
                found: v.features.cols(),
            });
        }
        if d.frames_per_fragment > 0 && v.num_frames > 0 {
            let expected = fragment_count(v.num_frames, d.frames_per_fragment);
            if expected != v.features.rows() {
                push(ViolationKind::FragmentCountMismatch {
                    expected,
                    found: v.features.rows(),
                });
            }
        }
        if let Some((row, col)) = v.features.first_non_finite() {
            push(ViolationKind::NonFinite { row, col });
        }
    }
    out
}
