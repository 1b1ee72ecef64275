//! Generate a synthetic train/test split, write it to disk and read it back.
//!
//! ```text
//! cargo run --example synthetic_dataset -- [out-dir]
//! ```

use srad::ingest::{generate_synthetic, load_manifest, save_dataset, SyntheticConfig};
use srad::VideoLabel;

fn main() -> srad::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("srad-synthetic"));
    let cfg = SyntheticConfig::with_separation(8, 8, 4, 2.0, 1);
    let data = generate_synthetic(&cfg)?;

    let manifest = save_dataset(&data.train, &out, "train")?;
    save_dataset(&data.test, &out, "test")?;
    data.test_ground_truth()
        .save(out.join("test_ground_truth.tsv"))?;

    let back = load_manifest(&manifest)?;
    println!("{}", manifest.display());
    println!(
        "{} videos ({} anomalous), D={}, k={}",
        back.len(),
        back.count(VideoLabel::Anomalous),
        back.feature_dim,
        back.frames_per_fragment
    );
    let anomalous = data
        .train
        .videos
        .iter()
        .zip(&data.train_fragment_truth)
        .filter(|(v, _)| v.label.is_anomalous());
    for (v, truth) in anomalous.take(4) {
        let marks: String = truth.iter().map(|&a| if a { '#' } else { '.' }).collect();
        println!("{:<22} {:>4} frames  {marks}", v.video_id, v.num_frames);
    }
    Ok(())
}
