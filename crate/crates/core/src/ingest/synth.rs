use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::matrix::Matrix;
use crate::rng::RngHandle;
use crate::types::{Dataset, VideoLabel, VideoRecord};

/// Gaussian stand-in for precomputed fragment features.
///
/// Normal fragments are drawn from `N(normal_mean, stddev^2 I)`. Each
/// anomalous video holds one contiguous run of fragments drawn from
/// `N(anomalous_mean, stddev^2 I)`, covering `round(portion * m)` of its `m`
/// fragments, and everything else in it is normal. That is the label noise a
/// video-level label hides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_normal_videos: usize,
    pub num_anomalous_videos: usize,
    pub test_normal_videos: usize,
    pub test_anomalous_videos: usize,
    /// Inclusive range of fragments per video.
    pub fragments_per_video: (usize, usize),
    pub feature_dim: usize,
    pub frames_per_fragment: usize,
    pub normal_mean: Vec<f64>,
    pub anomalous_mean: Vec<f64>,
    pub feature_stddev: f64,
    pub anomaly_portion: (f64, f64),
    pub seed: u64,
}

impl SyntheticConfig {
    /// Normal mean at the origin and anomalous mean shifted by
    /// `separation * stddev` along every coordinate.
    pub fn with_separation(
        num_normal_videos: usize,
        num_anomalous_videos: usize,
        feature_dim: usize,
        separation: f64,
        seed: u64,
    ) -> Self {
        let stddev = 1.0;
        Self {
            num_normal_videos,
            num_anomalous_videos,
            test_normal_videos: num_normal_videos / 4,
            test_anomalous_videos: num_anomalous_videos / 4,
            fragments_per_video: (8, 16),
            feature_dim,
            frames_per_fragment: 16,
            normal_mean: vec![0.0; feature_dim],
            anomalous_mean: vec![separation * stddev; feature_dim],
            feature_stddev: stddev,
            anomaly_portion: (0.2, 0.4),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_normal_videos + self.num_anomalous_videos == 0 {
            return bad("training split needs at least one video".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be >= 1".into());
        }
        if self.frames_per_fragment == 0 {
            return bad("frames_per_fragment must be >= 1".into());
        }
        let (lo, hi) = self.fragments_per_video;
        if lo == 0 || lo > hi {
            return bad(format!(
                "fragment range ({lo}, {hi}) must satisfy 1 <= min <= max"
            ));
        }
        if lo < 2 && self.num_anomalous_videos + self.test_anomalous_videos > 0 {
            return bad("anomalous videos need at least 2 fragments".into());
        }
        if self.normal_mean.len() != self.feature_dim
            || self.anomalous_mean.len() != self.feature_dim
        {
            return bad(format!(
                "means must have feature_dim = {} entries",
                self.feature_dim
            ));
        }
        if self
            .normal_mean
            .iter()
            .chain(&self.anomalous_mean)
            .any(|v| !v.is_finite())
        {
            return bad("means must be finite".into());
        }
        if !(self.feature_stddev.is_finite() && self.feature_stddev > 0.0) {
            return bad("feature_stddev must be positive".into());
        }
        let (plo, phi) = self.anomaly_portion;
        let open_unit = |p: f64| p > 0.0 && p < 1.0;
        if !(open_unit(plo) && open_unit(phi) && plo <= phi) {
            return bad(format!(
                "anomaly portion ({plo}, {phi}) must satisfy 0 < low <= high < 1"
            ));
        }
        Ok(())
    }
}

/// Generated train/test splits with fragment-level ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    /// Per video (same order as `train.videos`), per fragment: `true` when the
    /// fragment came from the anomalous distribution.
    pub train_fragment_truth: Vec<Vec<bool>>,
    pub test_fragment_truth: Vec<Vec<bool>>,
}

impl SyntheticData {
    pub fn train_ground_truth(&self) -> GroundTruth {
        GroundTruth::from_fragment_labels(&self.train, &self.train_fragment_truth)
    }

    pub fn test_ground_truth(&self) -> GroundTruth {
        GroundTruth::from_fragment_labels(&self.test, &self.test_fragment_truth)
    }
}

fn sample_row<R: Rng>(rng: &mut R, mean: &[f64], stddev: f64, out: &mut [f64]) {
    for (o, &mu) in out.iter_mut().zip(mean) {
        let z: f64 = rng.sample(StandardNormal);
        *o = mu + stddev * z;
    }
}

fn generate_video(
    cfg: &SyntheticConfig,
    rng: RngHandle,
    video_id: String,
    label: VideoLabel,
) -> (VideoRecord, Vec<bool>) {
    let mut r = rng.stream();
    let (lo, hi) = cfg.fragments_per_video;
    let m = r.random_range(lo..=hi);
    let k = cfg.frames_per_fragment;
    let num_frames = r.random_range((m - 1) * k + 1..=m * k);

    let mut truth = vec![false; m];
    if label.is_anomalous() {
        let (plo, phi) = cfg.anomaly_portion;
        let portion = if plo == phi {
            plo
        } else {
            r.random_range(plo..=phi)
        };
        let run = ((portion * m as f64).round() as usize).min(m);
        let start = r.random_range(0..=m - run);
        truth[start..start + run].iter_mut().for_each(|t| *t = true);
    }

    let mut features = Matrix::zeros(m, cfg.feature_dim);
    for (j, &anomalous) in truth.iter().enumerate() {
        let mean = if anomalous {
            &cfg.anomalous_mean
        } else {
            &cfg.normal_mean
        };
        sample_row(&mut r, mean, cfg.feature_stddev, features.row_mut(j));
    }
    (
        VideoRecord {
            video_id,
            label,
            num_frames,
            features,
        },
        truth,
    )
}

fn generate_split(
    cfg: &SyntheticConfig,
    split: &str,
    normal: usize,
    anomalous: usize,
) -> (Dataset, Vec<Vec<bool>>) {
    let root = RngHandle::new(cfg.seed).derive(split, 0);
    let mut videos = Vec::with_capacity(normal + anomalous);
    let mut truth = Vec::with_capacity(normal + anomalous);
    let specs = (0..normal)
        .map(|i| (VideoLabel::Normal, i))
        .chain((0..anomalous).map(|i| (VideoLabel::Anomalous, i)));
    for (idx, (label, i)) in specs.enumerate() {
        let kind = if label.is_anomalous() {
            "anomalous"
        } else {
            "normal"
        };
        let id = format!("{split}_{kind}_{i:04}");
        let (v, t) = generate_video(cfg, root.derive("video", idx as u64), id, label);
        videos.push(v);
        truth.push(t);
    }
    let ds = Dataset {
        videos,
        feature_dim: cfg.feature_dim,
        frames_per_fragment: cfg.frames_per_fragment,
    };
    (ds, truth)
}

/// Generate train and test splits. A pure function of `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (train, train_fragment_truth) = generate_split(
        cfg,
        "train",
        cfg.num_normal_videos,
        cfg.num_anomalous_videos,
    );
    let (test, test_fragment_truth) = generate_split(
        cfg,
        "test",
        cfg.test_normal_videos,
        cfg.test_anomalous_videos,
    );
    Ok(SyntheticData {
        train,
        test,
        train_fragment_truth,
        test_fragment_truth,
    })
}
