//! Score one test video frame by frame and draw the timeline next to its
//! ground truth.

use srad::eval::score_video;
use srad::ingest::{generate_synthetic, SyntheticConfig};
use srad::network::AdamConfig;
use srad::train::{fit, TrainConfig};

fn main() -> srad::Result<()> {
    let data = generate_synthetic(&SyntheticConfig::with_separation(40, 40, 16, 2.0, 2))?;
    let cfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        hidden_width: 32,
        dropout_rate: 0.3,
        epochs: 40,
        seed: 2,
        ..TrainConfig::default()
    };
    let model = fit(&data.train, &cfg)?.model;

    let video = data
        .test
        .videos
        .iter()
        .find(|v| v.label.is_anomalous())
        .expect("synthetic test split has anomalous videos");
    let k = data.test.frames_per_fragment;
    let mut timeline = score_video(&model, video, k)?;
    timeline.ground_truth = Some(
        data.test_ground_truth()
            .frame_labels(&video.video_id, video.num_frames)?,
    );

    println!(
        "{} ({} frames, one row per fragment)",
        video.video_id, video.num_frames
    );
    let truth = timeline.ground_truth.as_ref().unwrap();
    for start in (0..timeline.scores.len()).step_by(k) {
        let s = timeline.scores[start];
        let bar = "#".repeat((s * 40.0).round() as usize);
        let mark = if truth[start] { "anomalous" } else { "" };
        println!("{start:>5} {s:.3} {bar:<40} {mark}");
    }
    Ok(())
}
