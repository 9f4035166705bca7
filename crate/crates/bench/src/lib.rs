//! Shared fixtures for the benchmark targets.

use fixpoint_core::geometry::{dft_real_matrix, SetSpec};
use fixpoint_core::point;
use fixpoint_core::point::Point;

/// The three lines of the equilateral-triangle feasibility problem.
pub fn triangle_sets() -> Vec<SetSpec> {
    let s3 = 3.0f64.sqrt();
    vec![
        SetSpec::hyperplane(point![0.0, 1.0], 0.0),
        SetSpec::hyperplane(point![-s3, 1.0], s3),
        SetSpec::hyperplane(point![s3, 1.0], s3),
    ]
}

/// A consistent toy Fourier-magnitude set with its planted signal.
pub fn phase_set(n: usize) -> (SetSpec, Point) {
    let mut coords = vec![0.0; 2 * n];
    for (i, c) in coords.iter_mut().enumerate().take(n) {
        *c = 0.3 + 0.1 * i as f64;
    }
    let planted = Point::new(coords);
    let dft = dft_real_matrix(n);
    let y = dft.matvec(planted.coords());
    let modulus: Vec<f64> = (0..n).map(|k| y[2 * k].hypot(y[2 * k + 1])).collect();
    (SetSpec::fourier_magnitude(modulus), planted)
}
