//! Reading and writing datasets on disk, and generating synthetic ones.
//!
//! A dataset on disk is a text manifest plus one binary feature file per
//! video:
//!
//! ```text
//! #srad-manifest v1 dim=4 k=16
//! vid_000	0	48	features/vid_000.srfv
//! vid_001	1	33	features/vid_001.srfv
//! ```
//!
//! Columns are tab-separated: video id, label (`0` normal, `1` anomalous),
//! frame count, and the feature file path relative to the manifest's
//! directory.

#![allow(clippy::tabs_in_doc_comments)]

mod features;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use features::{
    decode_features, encode_features, read_features, write_features, write_features_with,
    Precision, FEATURE_MAGIC, FEATURE_VERSION, HEADER_LEN,
};
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticData};

use crate::error::{Error, Result};
use crate::types::{fragment_count, validate_dataset, Dataset, VideoLabel, VideoRecord};

pub const MANIFEST_TAG: &str = "#srad-manifest";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub label: VideoLabel,
    pub num_frames: usize,
    pub feature_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub feature_dim: usize,
    pub frames_per_fragment: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Scale each fragment's feature vector to unit L2 norm after reading.
    pub l2_normalize: bool,
}

fn parse_header_field(tok: Option<&str>, key: &str, ctx: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(ctx, format!("header missing {key}=")))?;
    let v = tok
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| Error::parse(ctx, format!("expected {key}=<n>, found {tok:?}")))?;
    let n: usize = v
        .parse()
        .map_err(|_| Error::parse(ctx, format!("{key} is not a non-negative integer: {v:?}")))?;
    if n == 0 {
        return Err(Error::parse(ctx, format!("{key} must be >= 1")));
    }
    Ok(n)
}

impl Manifest {
    pub fn parse(text: &str, ctx: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(ctx, "empty manifest"))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some(MANIFEST_TAG) {
            return Err(Error::parse(
                ctx,
                format!("first line must start with {MANIFEST_TAG}"),
            ));
        }
        if toks.next() != Some("v1") {
            return Err(Error::parse(ctx, "unsupported manifest version"));
        }
        let feature_dim = parse_header_field(toks.next(), "dim", ctx)?;
        let frames_per_fragment = parse_header_field(toks.next(), "k", ctx)?;

        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lctx = format!("{ctx}:{}", i + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    &lctx,
                    format!("expected 4 tab-separated columns, found {}", cols.len()),
                ));
            }
            let label = match cols[1] {
                "0" => VideoLabel::Normal,
                "1" => VideoLabel::Anomalous,
                other => {
                    return Err(Error::parse(
                        &lctx,
                        format!("label must be 0 or 1, got {other:?}"),
                    ))
                }
            };
            let num_frames: usize = cols[2]
                .parse()
                .map_err(|_| Error::parse(&lctx, format!("bad frame count {:?}", cols[2])))?;
            if num_frames == 0 {
                return Err(Error::parse(&lctx, "frame count must be >= 1"));
            }
            if cols[0].is_empty() {
                return Err(Error::parse(&lctx, "empty video id"));
            }
            entries.push(ManifestEntry {
                video_id: cols[0].to_string(),
                label,
                num_frames,
                feature_path: PathBuf::from(cols[3]),
            });
        }
        if entries.is_empty() {
            return Err(Error::parse(ctx, "manifest lists no videos"));
        }
        Ok(Self {
            entries,
            feature_dim,
            frames_per_fragment,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{MANIFEST_TAG} v1 dim={} k={}\n",
            self.feature_dim, self.frames_per_fragment
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                e.video_id,
                e.label.as_u8(),
                e.num_frames,
                e.feature_path.display()
            );
        }
        s
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    load_manifest_with(path, LoadOptions::default())
}

/// Load a manifest and all feature files it references.
pub fn load_manifest_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest::parse(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let k = manifest.frames_per_fragment;
    let mut videos = Vec::with_capacity(manifest.entries.len());
    for e in manifest.entries {
        let fpath = base.join(&e.feature_path);
        let rows = fragment_count(e.num_frames, k);
        let mut features = read_features(&fpath, None, Some(manifest.feature_dim))?;
        if features.rows() != rows {
            return Err(Error::Shape(format!(
                "{}: video {} has {} fragment rows, ceil({}/{k}) = {rows}",
                fpath.display(),
                e.video_id,
                features.rows(),
                e.num_frames
            )));
        }
        if opts.l2_normalize {
            features.normalize_rows();
        }
        videos.push(VideoRecord {
            video_id: e.video_id,
            label: e.label,
            num_frames: e.num_frames,
            features,
        });
    }
    let dataset = Dataset {
        videos,
        feature_dim: manifest.feature_dim,
        frames_per_fragment: k,
    };
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidDataset(msg.join("; ")));
    }
    Ok(dataset)
}

/// Write `dataset` as `<dir>/<name>.manifest` with feature files under
/// `<dir>/<name>/`. Returns the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidDataset(msg.join("; ")));
    }
    let feat_dir = dir.join(name);
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;

    let mut entries = Vec::with_capacity(dataset.len());
    for v in &dataset.videos {
        if v.video_id.contains(['\t', '\n', '\r', '/', '\\']) {
            return Err(Error::InvalidDataset(format!(
                "video id {:?} cannot be written to a manifest",
                v.video_id
            )));
        }
        let rel = PathBuf::from(name).join(format!("{}.srfv", v.video_id));
        write_features(&v.features, dir.join(&rel))?;
        entries.push(ManifestEntry {
            video_id: v.video_id.clone(),
            label: v.label,
            num_frames: v.num_frames,
            feature_path: rel,
        });
    }
    let manifest = Manifest {
        entries,
        feature_dim: dataset.feature_dim,
        frames_per_fragment: dataset.frames_per_fragment,
    };
    let mpath = dir.join(format!("{name}.manifest"));
    fs::write(&mpath, manifest.render()).map_err(|e| Error::io(&mpath, e))?;
    Ok(mpath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("m.manifest");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_single_video() {
        let dir = tempfile::tempdir().unwrap();
        let feats = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0]; 3]).unwrap();
        write_features(&feats, dir.path().join("v.srfv")).unwrap();
        let p = write_manifest(
            dir.path(),
            "#srad-manifest v1 dim=4 k=16\nv\t0\t48\tv.srfv\n",
        );
        let d = load_manifest(&p).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.videos[0].num_fragments(), 3);
        assert_eq!(d.videos[0].label, VideoLabel::Normal);
        assert_eq!(d.feature_dim, 4);
        assert_eq!(d.frames_per_fragment, 16);
    }

    #[test]
    fn row_count_must_match_frames() {
        let dir = tempfile::tempdir().unwrap();
        let feats = Matrix::from_rows(&[[1.0, 2.0]; 2]).unwrap();
        write_features(&feats, dir.path().join("v.srfv")).unwrap();
        let p = write_manifest(
            dir.path(),
            "#srad-manifest v1 dim=2 k=16\nv\t1\t33\tv.srfv\n",
        );
        assert!(matches!(load_manifest(&p), Err(Error::Shape(_))));
    }

    #[test]
    fn missing_feature_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_manifest(
            dir.path(),
            "#srad-manifest v1 dim=2 k=16\nv\t1\t33\tnope.srfv\n",
        );
        match load_manifest(&p) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("nope.srfv")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_manifests() {
        for body in [
            "",
            "#other v1 dim=2 k=16\n",
            "#srad-manifest v2 dim=2 k=16\nv\t0\t1\tx\n",
            "#srad-manifest v1 dim=0 k=16\nv\t0\t1\tx\n",
            "#srad-manifest v1 dim=2 k=16\n",
            "#srad-manifest v1 dim=2 k=16\nv\t2\t1\tx\n",
            "#srad-manifest v1 dim=2 k=16\nv\t0\tmany\tx\n",
            "#srad-manifest v1 dim=2 k=16\nv 0 1 x\n",
        ] {
            assert!(
                matches!(Manifest::parse(body, "t"), Err(Error::Parse { .. })),
                "{body:?}"
            );
        }
    }

    #[test]
    fn l2_normalization_option() {
        let dir = tempfile::tempdir().unwrap();
        let feats = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        write_features(&feats, dir.path().join("v.srfv")).unwrap();
        let p = write_manifest(dir.path(), "#srad-manifest v1 dim=2 k=4\nv\t0\t4\tv.srfv\n");
        let d = load_manifest_with(&p, LoadOptions { l2_normalize: true }).unwrap();
        assert_eq!(d.videos[0].features.row(0), &[0.6, 0.8]);
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let d = Dataset {
            videos: vec![
                VideoRecord {
                    video_id: "a".into(),
                    label: VideoLabel::Normal,
                    num_frames: 5,
                    features: Matrix::from_rows(&[[0.25, 1.0 / 3.0], [2.0, -1.0]]).unwrap(),
                },
                VideoRecord {
                    video_id: "b".into(),
                    label: VideoLabel::Anomalous,
                    num_frames: 1,
                    features: Matrix::from_rows(&[[1e-40, 5.0]]).unwrap(),
                },
            ],
            feature_dim: 2,
            frames_per_fragment: 4,
        };
        let p = save_dataset(&d, dir.path(), "train").unwrap();
        assert_eq!(load_manifest(&p).unwrap(), d);
    }
}
