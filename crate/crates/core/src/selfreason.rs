//! Pseudo-labels for anomalous videos.
//!
//! Clustering splits a video's fragments in two but cannot say which half is
//! anomalous. The network's own scores settle that: the cluster labeling (or
//! its negation) that points the same way as the score vector wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::VideoLabel;

/// Cosine similarity. Zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(ab / (na * nb))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    AsIs,
    Inverted,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::AsIs => "as-is",
            Orientation::Inverted => "inverted",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoDecision {
    /// Similarity of the scores to the cluster labels.
    pub s1: f64,
    /// Similarity of the scores to the negated cluster labels.
    pub s2: f64,
    pub orientation: Orientation,
    pub labels: Vec<u8>,
}

fn check_binary(y: &[u8]) -> Result<()> {
    match y.iter().position(|&v| v > 1) {
        Some(i) => Err(Error::Shape(format!(
            "cluster label {} at {i} is not binary",
            y[i]
        ))),
        None => Ok(()),
    }
}

/// Pick the polarity of `cluster_labels` that agrees with `scores`. Ties keep
/// the labels as they are.
pub fn orient_pseudo_labels(scores: &[f64], cluster_labels: &[u8]) -> Result<PseudoDecision> {
    if scores.len() != cluster_labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} cluster labels",
            scores.len(),
            cluster_labels.len()
        )));
    }
    check_binary(cluster_labels)?;
    let yc: Vec<f64> = cluster_labels.iter().map(|&v| v as f64).collect();
    let not_yc: Vec<f64> = cluster_labels.iter().map(|&v| (1 - v) as f64).collect();
    let s1 = cosine(scores, &yc)?;
    let s2 = cosine(scores, &not_yc)?;
    let (orientation, labels) = if s1 >= s2 {
        (Orientation::AsIs, cluster_labels.to_vec())
    } else {
        (
            Orientation::Inverted,
            cluster_labels.iter().map(|&v| 1 - v).collect(),
        )
    };
    Ok(PseudoDecision {
        s1,
        s2,
        orientation,
        labels,
    })
}

/// How anomalous videos get fragment targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Oriented cluster labels.
    PseudoLabels,
    /// Every fragment of an anomalous video is labeled anomalous.
    AllOnes,
}

/// Fragment-level training targets for one video of `m` fragments.
pub fn training_targets(
    label: VideoLabel,
    m: usize,
    pseudo: Option<&PseudoDecision>,
    mode: TargetMode,
) -> Result<Vec<u8>> {
    match (label, mode) {
        (VideoLabel::Normal, _) => Ok(vec![0; m]),
        (VideoLabel::Anomalous, TargetMode::AllOnes) => Ok(vec![1; m]),
        (VideoLabel::Anomalous, TargetMode::PseudoLabels) => {
            let p = pseudo.ok_or_else(|| {
                Error::InvalidConfig("anomalous video needs pseudo-labels".into())
            })?;
            if p.labels.len() != m {
                return Err(Error::Shape(format!(
                    "{} pseudo-labels for {m} fragments",
                    p.labels.len()
                )));
            }
            Ok(p.labels.clone())
        }
    }
}
