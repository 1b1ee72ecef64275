//! Orient cluster labels against network scores and derive training targets.

use srad::selfreason::{orient_pseudo_labels, training_targets, TargetMode};
use srad::VideoLabel;

fn main() -> srad::Result<()> {
    let scores = [0.9, 0.8, 0.2, 0.1, 0.15];
    for clusters in [[1u8, 1, 0, 0, 0], [0, 0, 1, 1, 1]] {
        let p = orient_pseudo_labels(&scores, &clusters)?;
        println!(
            "clusters {clusters:?}  s1 {:.4}  s2 {:.4}  {:<8} -> {:?}",
            p.s1,
            p.s2,
            p.orientation.as_str(),
            p.labels
        );
    }

    let p = orient_pseudo_labels(&scores, &[1, 1, 0, 0, 0])?;
    for (label, mode) in [
        (VideoLabel::Anomalous, TargetMode::PseudoLabels),
        (VideoLabel::Anomalous, TargetMode::AllOnes),
        (VideoLabel::Normal, TargetMode::PseudoLabels),
    ] {
        let t = training_targets(label, scores.len(), Some(&p), mode)?;
        println!("{label:?} {mode:?}: {t:?}");
    }
    Ok(())
}
