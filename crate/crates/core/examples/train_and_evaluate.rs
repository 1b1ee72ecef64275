//! Train on synthetic data, evaluate pooled frame-level AUC, save and reload
//! the checkpoint.
//!
//! ```text
//! cargo run --release --example train_and_evaluate -- [seed]
//! ```

use srad::eval::evaluate;
use srad::ingest::{generate_synthetic, SyntheticConfig};
use srad::network::{load_checkpoint, save_checkpoint, AdamConfig};
use srad::train::{fit, TrainConfig};

fn main() -> srad::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let data = generate_synthetic(&SyntheticConfig::with_separation(40, 40, 16, 2.0, seed))?;
    let cfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        hidden_width: 32,
        dropout_rate: 0.3,
        epochs: 100,
        seed,
        ..TrainConfig::default()
    };
    let fitted = fit(&data.train, &cfg)?;
    for epoch in [1, 10, 50, 100] {
        println!(
            "epoch {epoch:>3}: mean loss {:.5}  mean Lc {:.5}",
            fitted.history.epoch_mean_total(epoch).unwrap_or(f64::NAN),
            fitted
                .history
                .epoch_mean_clustering(epoch)
                .unwrap_or(f64::NAN)
        );
    }

    let truth = data.test_ground_truth();
    let auc = evaluate(&fitted.model, &data.test, &truth)?.auc;
    println!("test AUC {auc:.4}");

    let path = std::env::temp_dir().join(format!("srad-example-{seed}.srck"));
    save_checkpoint(&fitted.model, &fitted.adam, &path)?;
    let (model, _) = load_checkpoint(&path)?;
    let again = evaluate(&model, &data.test, &truth)?.auc;
    println!(
        "reloaded AUC identical: {}",
        again.to_bits() == auc.to_bits()
    );
    Ok(())
}
