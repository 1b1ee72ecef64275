//! Compare the three training variants on synthetic data over several seeds.
//!
//! ```text
//! cargo run --release --example ablation -- [seeds] [warmup-epochs]
//! ```

use srad::eval::evaluate;
use srad::ingest::{generate_synthetic, SyntheticConfig};
use srad::network::AdamConfig;
use srad::train::{fit, Ablation, TrainConfig};

fn main() -> srad::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let warmup: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    for ablation in [Ablation::Full, Ablation::NoLc, Ablation::NoYp] {
        let mut aucs = Vec::new();
        for seed in 0..seeds {
            let mut data_cfg = SyntheticConfig::with_separation(40, 40, 16, 2.0, seed);
            data_cfg.test_normal_videos = 10;
            data_cfg.test_anomalous_videos = 10;
            let data = generate_synthetic(&data_cfg)?;
            let cfg = TrainConfig {
                adam: AdamConfig {
                    learning_rate: 1e-3,
                    ..AdamConfig::default()
                },
                hidden_width: 32,
                dropout_rate: 0.3,
                epochs: 100,
                seed,
                ablation,
                warmup_epochs: warmup,
                ..TrainConfig::default()
            };
            let fitted = fit(&data.train, &cfg)?;
            let e = evaluate(&fitted.model, &data.test, &data.test_ground_truth())?;
            let h = &fitted.history;
            println!(
                "{:>6} seed {seed}: AUC {:.10}  mean Lc epoch1 {:?} epoch10 {:?}",
                ablation.as_str(),
                e.auc,
                h.epoch_mean_clustering(1),
                h.epoch_mean_clustering(10)
            );
            aucs.push(e.auc);
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        println!("{:>6} mean AUC {mean:.10}", ablation.as_str());
    }
    Ok(())
}
