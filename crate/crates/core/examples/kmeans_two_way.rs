//! Two-way k-means on a toy point set and the gradient of the center distance.

use srad::clustering::{center_distance_gradient, kmeans2, KMeansConfig};
use srad::{Matrix, RngHandle};

fn main() -> srad::Result<()> {
    let points = Matrix::from_rows(&[
        vec![0.0, 0.1],
        vec![0.2, 0.0],
        vec![0.1, 0.2],
        vec![3.0, 3.1],
        vec![3.2, 2.9],
    ])?;
    let result = kmeans2(&points, RngHandle::new(0), &KMeansConfig::default())?;
    println!("labels   {:?}", result.labels);
    println!("centers  {:?}", result.centers);
    println!("distance {:.6}  sse {:.6}", result.distance, result.sse);

    let grad = center_distance_gradient(&points, &result)?;
    for (i, g) in grad.row_iter().enumerate() {
        println!("d(distance)/d(x{i}) = [{:+.4}, {:+.4}]", g[0], g[1]);
    }
    Ok(())
}
