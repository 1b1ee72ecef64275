//! The self-reasoning training loop.
//!
//! Every step handles one whole video: score its fragments, split their
//! hidden representations in two with k-means, turn the split into
//! pseudo-labels (anomalous videos only), then take one Adam step on the
//! regression loss plus the weighted center-distance loss.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::{center_distance_gradient, cluster_degenerate, kmeans2, KMeansConfig};
use crate::error::{Error, Result};
use crate::network::{
    backward, forward, init_model, save_checkpoint, AdamConfig, AdamState, Mode, Model,
};
use crate::objective::{clustering_loss, regression_loss, total_loss, LossWeights};
use crate::rng::RngHandle;
use crate::selfreason::{orient_pseudo_labels, training_targets, Orientation, TargetMode};
use crate::types::{validate_dataset, Dataset, VideoLabel, VideoRecord};

/// Which parts of the method are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    /// Pseudo-labels and clustering distance loss.
    Full,
    /// Pseudo-labels only; the distance loss is dropped.
    NoLc,
    /// Distance loss only; anomalous videos are labeled all-anomalous.
    NoYp,
}

impl Ablation {
    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLc => "no-lc",
            Ablation::NoYp => "no-yp",
        }
    }

    pub fn uses_clustering_loss(self) -> bool {
        self != Ablation::NoLc
    }

    pub fn uses_pseudo_labels(self) -> bool {
        self != Ablation::NoYp
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Ablation::Full),
            "no-lc" | "no_lc" => Ok(Ablation::NoLc),
            "no-yp" | "no_yp" => Ok(Ablation::NoYp),
            other => Err(Error::InvalidConfig(format!(
                "unknown ablation {other:?} (expected full, no-lc or no-yp)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    /// Save after every `every` epochs.
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossWeights,
    pub adam: AdamConfig,
    pub hidden_width: usize,
    pub dropout_rate: f64,
    pub kmeans: KMeansConfig,
    pub ablation: Ablation,
    pub epochs: usize,
    /// Epochs at the start during which anomalous videos use all-ones
    /// targets. Pseudo-labels need scores that already rank anomalous
    /// fragments higher; near-constant scores orient toward the larger
    /// cluster.
    pub warmup_epochs: usize,
    pub seed: u64,
    pub checkpoint: Option<CheckpointPolicy>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossWeights::default(),
            adam: AdamConfig::default(),
            hidden_width: 512,
            dropout_rate: 0.6,
            kmeans: KMeansConfig::default(),
            ablation: Ablation::Full,
            epochs: 100,
            warmup_epochs: 5,
            seed: 0,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.adam.validate()?;
        self.kmeans.validate()?;
        if self.hidden_width == 0 {
            return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if let Some(c) = &self.checkpoint {
            if c.every == 0 {
                return Err(Error::InvalidConfig(
                    "checkpoint cadence must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn target_mode(&self, epoch: usize) -> TargetMode {
        if self.ablation.uses_pseudo_labels() && epoch > self.warmup_epochs {
            TargetMode::PseudoLabels
        } else {
            TargetMode::AllOnes
        }
    }
}

/// What happened during one training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub video_id: String,
    pub label: VideoLabel,
    pub regression: f64,
    /// Absent when the distance loss is ablated or clustering was degenerate.
    pub clustering: Option<f64>,
    pub total: f64,
    pub distance: f64,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub orientation: Option<Orientation>,
    pub degenerate: bool,
    pub targets: Vec<u8>,
}

/// One optimizer step on one video, mutating `model` and `adam`. `epoch` is
/// 1-based and only matters during warm-up.
pub fn train_step_in_place(
    model: &mut Model,
    adam: &mut AdamState,
    video: &VideoRecord,
    cfg: &TrainConfig,
    epoch: usize,
    rng: RngHandle,
) -> Result<StepRecord> {
    let x = &video.features;
    let m = x.rows();
    let mut dropout_rng = rng.derive("dropout", 0).stream();
    let cache = forward(model, x, Mode::Train(&mut dropout_rng))?;

    let clusters = if m == 1 {
        cluster_degenerate(&cache.hidden)?
    } else {
        kmeans2(&cache.hidden, rng.derive("kmeans", 0), &cfg.kmeans)?
    };
    let degenerate = clusters.degenerate;

    let mut pseudo = None;
    let mut mode = cfg.target_mode(epoch);
    if video.label.is_anomalous() && mode == TargetMode::PseudoLabels {
        if degenerate {
            mode = TargetMode::AllOnes;
        } else {
            pseudo = Some(orient_pseudo_labels(&cache.scores, &clusters.labels)?);
        }
    }
    let targets = training_targets(video.label, m, pseudo.as_ref(), mode)?;
    let target_f: Vec<f64> = targets.iter().map(|&t| t as f64).collect();
    let (regression, d_scores) = regression_loss(&target_f, &cache.scores)?;

    let lambda = cfg.loss.lambda;
    let mut clustering = None;
    let mut d_hidden = None;
    if cfg.ablation.uses_clustering_loss() && !degenerate {
        let (lc, dlc) = clustering_loss(clusters.distance, video.label, &cfg.loss);
        clustering = Some(lc);
        if dlc != 0.0 && lambda > 0.0 && clusters.distance > 0.0 {
            let mut g = center_distance_gradient(&cache.hidden, &clusters)?;
            let scale = lambda * dlc;
            g.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            d_hidden = Some(g);
        }
    }
    let total = total_loss(regression, clustering.unwrap_or(0.0), lambda);

    let grads = backward(model, &cache, &d_scores, d_hidden.as_ref())?;
    adam.apply(model, &grads)?;

    Ok(StepRecord {
        video_id: video.video_id.clone(),
        label: video.label,
        regression,
        clustering,
        total,
        distance: clusters.distance,
        s1: pseudo.as_ref().map(|p| p.s1),
        s2: pseudo.as_ref().map(|p| p.s2),
        orientation: pseudo.as_ref().map(|p| p.orientation),
        degenerate,
        targets,
    })
}

/// Functional form of [`train_step_in_place`].
pub fn train_step(
    model: &Model,
    adam: &AdamState,
    video: &VideoRecord,
    cfg: &TrainConfig,
    epoch: usize,
    rng: RngHandle,
) -> Result<(Model, AdamState, StepRecord)> {
    if video.features.cols() != model.input_dim() {
        return Err(Error::Shape(format!(
            "video {} has {} features, model expects {}",
            video.video_id,
            video.features.cols(),
            model.input_dim()
        )));
    }
    let mut model = model.clone();
    let mut adam = adam.clone();
    let rec = train_step_in_place(&mut model, &mut adam, video, cfg, epoch, rng)?;
    Ok((model, adam, rec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// 1-based epoch.
    pub epoch: usize,
    /// 1-based global step counter.
    pub iter: usize,
    pub step: StepRecord,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,iter,video_id,label,Lr,Lc,L,d,s1,s2,orientation,degenerate";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn epoch(&self, epoch: usize) -> impl Iterator<Item = &TrainRecord> {
        self.records.iter().filter(move |r| r.epoch == epoch)
    }

    /// Mean clustering loss over the records of `epoch` that have one.
    pub fn epoch_mean_clustering(&self, epoch: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .epoch(epoch)
            .filter_map(|r| r.step.clustering)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn epoch_mean_total(&self, epoch: usize) -> Option<f64> {
        let vals: Vec<f64> = self.epoch(epoch).map(|r| r.step.total).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        for r in &self.records {
            let st = &r.step;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.iter,
                st.video_id,
                st.label.as_u8(),
                st.regression,
                opt(st.clustering),
                st.total,
                st.distance,
                opt(st.s1),
                opt(st.s2),
                st.orientation.map(Orientation::as_str).unwrap_or(""),
                u8::from(st.degenerate),
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fitted {
    pub model: Model,
    pub adam: AdamState,
    pub history: TrainHistory,
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("checkpoint_epoch_{epoch:04}.srck")
}

/// Train a fresh model on `dataset`. A pure function of `(dataset, cfg)`
/// apart from checkpoint files.
pub fn fit(dataset: &Dataset, cfg: &TrainConfig) -> Result<Fitted> {
    cfg.validate()?;
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidDataset(msg.join("; ")));
    }
    let root = RngHandle::new(cfg.seed);
    let mut model = init_model(
        dataset.feature_dim,
        cfg.hidden_width,
        cfg.dropout_rate,
        root.derive("init", 0),
    )?;
    let mut adam = AdamState::new(&model, cfg.adam);
    let mut history = TrainHistory::default();

    if let Some(c) = &cfg.checkpoint {
        fs::create_dir_all(&c.dir).map_err(|e| Error::io(&c.dir, e))?;
    }

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut iter = 0usize;
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut root.derive("shuffle", epoch as u64).stream());
        for &idx in &order {
            iter += 1;
            let step_rng = root.derive("step", iter as u64);
            let step = train_step_in_place(
                &mut model,
                &mut adam,
                &dataset.videos[idx],
                cfg,
                epoch,
                step_rng,
            )?;
            history.records.push(TrainRecord { epoch, iter, step });
        }
        if let Some(c) = &cfg.checkpoint {
            if epoch % c.every == 0 {
                save_checkpoint(&model, &adam, c.dir.join(checkpoint_name(epoch)))?;
            }
        }
    }
    Ok(Fitted {
        model,
        adam,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::network::Mode;

    fn video(id: &str, label: VideoLabel, rows: &[&[f64]]) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            label,
            num_frames: rows.len() * 4,
            features: Matrix::from_rows(rows).unwrap(),
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            hidden_width: 6,
            dropout_rate: 0.0,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
            epochs: 3,
            warmup_epochs: 1,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    fn tiny_dataset() -> Dataset {
        Dataset {
            videos: vec![
                video(
                    "n0",
                    VideoLabel::Normal,
                    &[&[0.1, 0.2, 0.0], &[0.0, 0.3, 0.1], &[0.2, 0.1, 0.1]],
                ),
                video(
                    "a0",
                    VideoLabel::Anomalous,
                    &[&[0.1, 0.2, 0.0], &[2.0, 2.1, 1.9], &[0.0, 0.1, 0.3]],
                ),
                video("a1", VideoLabel::Anomalous, &[&[1.9, 2.0, 2.2]]),
            ],
            feature_dim: 3,
            frames_per_fragment: 4,
        }
    }

    #[test]
    fn lambda_zero_normal_step_is_plain_mse() {
        let mut c = cfg();
        c.loss.lambda = 0.0;
        let ds = tiny_dataset();
        let v = &ds.videos[0];
        let model = init_model(3, 6, 0.0, RngHandle::new(1)).unwrap();
        let adam = AdamState::new(&model, c.adam);
        let (m1, _, rec) = train_step(&model, &adam, v, &c, 1, RngHandle::new(2)).unwrap();
        assert_eq!(rec.targets, vec![0, 0, 0]);

        let cache = forward(&model, &v.features, Mode::Infer).unwrap();
        let (_, ds_) = regression_loss(&[0.0; 3], &cache.scores).unwrap();
        let g = backward(&model, &cache, &ds_, None).unwrap();
        let mut expect = model.clone();
        AdamState::new(&model, c.adam)
            .apply(&mut expect, &g)
            .unwrap();
        assert_eq!(m1, expect);
    }

    #[test]
    fn single_fragment_anomalous_video_is_degenerate() {
        let ds = tiny_dataset();
        let model = init_model(3, 6, 0.0, RngHandle::new(1)).unwrap();
        let adam = AdamState::new(&model, cfg().adam);
        let (_, _, rec) =
            train_step(&model, &adam, &ds.videos[2], &cfg(), 1, RngHandle::new(0)).unwrap();
        assert!(rec.degenerate);
        assert_eq!(rec.targets, vec![1]);
        assert_eq!(rec.clustering, None);
        assert_eq!(rec.total, rec.regression);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = init_model(4, 6, 0.0, RngHandle::new(1)).unwrap();
        let adam = AdamState::new(&model, cfg().adam);
        assert!(train_step(
            &model,
            &adam,
            &tiny_dataset().videos[0],
            &cfg(),
            1,
            RngHandle::new(0)
        )
        .is_err());
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let mut c = cfg();
        c.epochs = 0;
        let f = fit(&tiny_dataset(), &c).unwrap();
        assert!(f.history.is_empty());
        let init = init_model(3, 6, 0.0, RngHandle::new(c.seed).derive("init", 0)).unwrap();
        assert_eq!(f.model, init);
        assert_eq!(f.adam.step, 0);
    }

    #[test]
    fn fit_is_reproducible() {
        let mut c = cfg();
        c.dropout_rate = 0.4;
        let a = fit(&tiny_dataset(), &c).unwrap();
        let b = fit(&tiny_dataset(), &c).unwrap();
        assert_eq!(a.history.to_csv(), b.history.to_csv());
        assert_eq!(a.model, b.model);
        assert_eq!(a.history.len(), 9);
    }

    #[test]
    fn no_lc_history_has_no_clustering_loss() {
        let mut c = cfg();
        c.ablation = Ablation::NoLc;
        let f = fit(&tiny_dataset(), &c).unwrap();
        assert!(f
            .history
            .records
            .iter()
            .all(|r| r.step.clustering.is_none()));
        for line in f.history.to_csv().lines().skip(1) {
            assert_eq!(line.split(',').nth(5), Some(""));
        }
    }

    #[test]
    fn no_yp_labels_anomalous_videos_all_ones() {
        let mut c = cfg();
        c.ablation = Ablation::NoYp;
        let f = fit(&tiny_dataset(), &c).unwrap();
        for r in &f.history.records {
            if r.step.label.is_anomalous() {
                assert!(r.step.targets.iter().all(|&t| t == 1));
                assert!(r.step.s1.is_none());
            }
        }
    }

    #[test]
    fn history_csv_shape() {
        let f = fit(&tiny_dataset(), &cfg()).unwrap();
        let csv = f.history.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HISTORY_HEADER));
        for line in lines {
            assert_eq!(line.split(',').count(), 12);
        }
        let epochs: Vec<usize> = f.history.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn checkpoints_written_on_cadence() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg();
        c.epochs = 4;
        c.checkpoint = Some(CheckpointPolicy {
            dir: dir.path().to_path_buf(),
            every: 2,
        });
        fit(&tiny_dataset(), &c).unwrap();
        assert!(dir.path().join(checkpoint_name(2)).exists());
        assert!(dir.path().join(checkpoint_name(4)).exists());
        assert!(!dir.path().join(checkpoint_name(1)).exists());
    }

    #[test]
    fn ablation_parsing() {
        assert_eq!("no-lc".parse::<Ablation>().unwrap(), Ablation::NoLc);
        assert_eq!("no_yp".parse::<Ablation>().unwrap(), Ablation::NoYp);
        assert!("none".parse::<Ablation>().is_err());
    }
}
