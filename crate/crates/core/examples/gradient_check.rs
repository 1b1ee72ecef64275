//! Compare backpropagated gradients of the regression loss with central
//! differences on a small random network.

use srad::network::{backward, forward, init_model, Mode};
use srad::objective::regression_loss;
use srad::{Matrix, RngHandle};

fn main() -> srad::Result<()> {
    let mut model = init_model(4, 5, 0.0, RngHandle::new(3))?;
    model
        .b1
        .iter_mut()
        .enumerate()
        .for_each(|(i, b)| *b = 0.05 * i as f64);
    let x = Matrix::from_rows(&[
        vec![0.5, -1.0, 0.3, 0.8],
        vec![-0.2, 0.4, 1.1, -0.7],
        vec![0.9, 0.1, -0.6, 0.2],
    ])?;
    let targets = [1.0, 0.0, 1.0];

    let loss_at = |p: &[f64]| -> srad::Result<f64> {
        let mut m = model.clone();
        m.set_params(p)?;
        let cache = forward(&m, &x, Mode::Infer)?;
        Ok(regression_loss(&targets, &cache.scores)?.0)
    };

    let mut rng = rand::rng();
    let cache = forward(&model, &x, Mode::Train(&mut rng))?;
    let (_, d_scores) = regression_loss(&targets, &cache.scores)?;
    let analytic = backward(&model, &cache, &d_scores, None)?.flatten();

    let params = model.params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[i] += h;
        let up = loss_at(&p)?;
        p[i] -= 2.0 * h;
        let down = loss_at(&p)?;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / scale);
    }
    println!(
        "{} parameters, max relative error {worst:.2e}",
        params.len()
    );
    Ok(())
}
