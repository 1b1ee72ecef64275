//! Frame-level evaluation: fragment scores are spread over their frames,
//! pooled across all test videos and summarized by ROC-AUC.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{score, Model};
use crate::types::{fragment_count, Dataset, VideoRecord};

/// Give every frame the score of the fragment containing it.
pub fn expand_to_frames(fragment_scores: &[f64], k: usize, num_frames: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "frames per fragment must be >= 1".into(),
        ));
    }
    let m = fragment_count(num_frames, k);
    if fragment_scores.len() != m {
        return Err(Error::Shape(format!(
            "{} fragment scores for {num_frames} frames at k={k} (expected {m})",
            fragment_scores.len()
        )));
    }
    Ok((0..num_frames).map(|f| fragment_scores[f / k]).collect())
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted
/// as one half. `O(N log N)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels(format!(
            "need both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }

    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay
    // in integers.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let pos_in_group = idx[i..j].iter().filter(|&&t| labels[t]).count() as u128;
        // average rank of positions i+1..=j is (i + 1 + j) / 2
        twice_rank_sum += pos_in_group * (i + 1 + j) as u128;
        i = j;
    }
    let p = n_pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Frame-level anomaly annotations: half-open `[start, end)` frame intervals
/// per video. A video listed only with an empty interval is entirely normal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    intervals: BTreeMap<String, Vec<(usize, usize)>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare `video_id` annotated, with no anomalous frames yet.
    pub fn declare(&mut self, video_id: &str) {
        self.intervals.entry(video_id.to_string()).or_default();
    }

    pub fn add_interval(&mut self, video_id: &str, start: usize, end: usize) -> Result<()> {
        if start > end {
            return Err(Error::InvalidDataset(format!(
                "video {video_id}: interval [{start}, {end}) is reversed"
            )));
        }
        let v = self.intervals.entry(video_id.to_string()).or_default();
        if start < end {
            v.push((start, end));
        }
        Ok(())
    }

    pub fn contains(&self, video_id: &str) -> bool {
        self.intervals.contains_key(video_id)
    }

    pub fn intervals(&self, video_id: &str) -> Option<&[(usize, usize)]> {
        self.intervals.get(video_id).map(Vec::as_slice)
    }

    /// Per-frame labels for a video of `num_frames` frames.
    pub fn frame_labels(&self, video_id: &str, num_frames: usize) -> Result<Vec<bool>> {
        let iv = self
            .intervals
            .get(video_id)
            .ok_or_else(|| Error::MissingGroundTruth(video_id.to_string()))?;
        let mut out = vec![false; num_frames];
        for &(s, e) in iv {
            if e > num_frames {
                return Err(Error::InvalidDataset(format!(
                    "video {video_id}: interval [{s}, {e}) exceeds {num_frames} frames"
                )));
            }
            out[s..e].iter_mut().for_each(|b| *b = true);
        }
        Ok(out)
    }

    /// Convert fragment-level truth (one `Vec<bool>` per video, in dataset
    /// order) into merged frame intervals.
    pub fn from_fragment_labels(dataset: &Dataset, truth: &[Vec<bool>]) -> Self {
        let k = dataset.frames_per_fragment;
        let mut gt = GroundTruth::new();
        for (v, t) in dataset.videos.iter().zip(truth) {
            gt.declare(&v.video_id);
            let mut run: Option<usize> = None;
            for (j, &a) in t.iter().chain(std::iter::once(&false)).enumerate() {
                match (a, run) {
                    (true, None) => run = Some(j),
                    (false, Some(s)) => {
                        let end = (j * k).min(v.num_frames);
                        let _ = gt.add_interval(&v.video_id, s * k, end);
                        run = None;
                    }
                    _ => {}
                }
            }
        }
        gt
    }

    /// Parse `video_id<TAB>start<TAB>end` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str, ctx: &str) -> Result<Self> {
        let mut gt = GroundTruth::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let lctx = format!("{ctx}:{}", i + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[0].is_empty() {
                return Err(Error::parse(&lctx, "expected video_id<TAB>start<TAB>end"));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(&lctx, format!("bad frame index {s:?}")))
            };
            let (s, e) = (num(cols[1])?, num(cols[2])?);
            if s > e {
                return Err(Error::parse(&lctx, format!("start {s} after end {e}")));
            }
            gt.add_interval(cols[0], s, e)?;
        }
        Ok(gt)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (id, iv) in &self.intervals {
            if iv.is_empty() {
                let _ = writeln!(s, "{id}\t0\t0");
            }
            for &(a, b) in iv {
                let _ = writeln!(s, "{id}\t{a}\t{b}");
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameScores {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub ground_truth: Option<Vec<bool>>,
}

pub const TIMELINE_HEADER: &str = "frame_index,score,ground_truth";

impl FrameScores {
    /// `frame_index,score,ground_truth` rows; the last column is empty when
    /// there is no annotation.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TIMELINE_HEADER);
        s.push('\n');
        for (i, sc) in self.scores.iter().enumerate() {
            let gt = match &self.ground_truth {
                Some(g) => u8::from(g[i]).to_string(),
                None => String::new(),
            };
            let _ = writeln!(s, "{i},{sc},{gt}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Inference-mode frame scores for one video.
pub fn score_video(model: &Model, video: &VideoRecord, k: usize) -> Result<FrameScores> {
    let frag = score(model, &video.features)?;
    Ok(FrameScores {
        video_id: video.video_id.clone(),
        scores: expand_to_frames(&frag, k, video.num_frames)?,
        ground_truth: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub auc: f64,
    pub videos: Vec<FrameScores>,
}

/// Pooled frame-level ROC-AUC over every video in `dataset`.
pub fn evaluate(model: &Model, dataset: &Dataset, truth: &GroundTruth) -> Result<Evaluation> {
    let k = dataset.frames_per_fragment;
    let mut videos = Vec::with_capacity(dataset.len());
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    for v in &dataset.videos {
        let labels = truth.frame_labels(&v.video_id, v.num_frames)?;
        let mut fs = score_video(model, v, k)?;
        all_scores.extend_from_slice(&fs.scores);
        all_labels.extend_from_slice(&labels);
        fs.ground_truth = Some(labels);
        videos.push(fs);
    }
    let auc = roc_auc(&all_scores, &all_labels)?;
    Ok(Evaluation { auc, videos })
}
