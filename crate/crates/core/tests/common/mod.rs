#![allow(dead_code)]

use std::f64::consts::PI;

use fractal_paths::rng::member_rng;
use fractal_paths::ChartPoint;
use rand::Rng;

/// Interior Schwarzschild points (M = 1) away from the horizon and the poles.
pub fn schwarzschild_points(n: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = member_rng(seed, 0);
    (0..n)
        .map(|_| {
            ChartPoint::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(2.5..30.0),
                rng.random_range(0.2..PI - 0.2),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect()
}

pub fn cartesian_points(n: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = member_rng(seed, 1);
    (0..n)
        .map(|_| {
            ChartPoint::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            )
        })
        .collect()
}
