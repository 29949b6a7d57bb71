//! Shared fixtures for the criterion benchmarks.

use rqfi::{ImagingSystem, PsfModel};

/// Gaussian imaging system with x_R = 1 at the given transmissivity.
pub fn gaussian_system(eta: f64) -> ImagingSystem {
    ImagingSystem::new(eta, PsfModel::gaussian(1.0).unwrap()).unwrap()
}

/// Geometric grid of separations used by the sweep benchmarks.
pub fn separation_grid(points: usize) -> Vec<f64> {
    let (min, max) = (0.05_f64, 10.0_f64);
    (0..points)
        .map(|i| min * (max / min).powf(i as f64 / (points - 1) as f64))
        .collect()
}
