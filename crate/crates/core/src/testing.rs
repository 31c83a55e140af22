//! Shared helpers for unit tests.

use nalgebra::Point2;
use rand::Rng;

/// Random polygon that is star-shaped with respect to `center`, with 3..=8
/// vertices in CCW order. The centroid is not necessarily in the kernel.
pub fn random_star_polygon<R: Rng>(rng: &mut R, center: Point2<f64>, scale: f64) -> Vec<Point2<f64>> {
    let n = rng.random_range(3..=8);
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        angles.sort_by(f64::total_cmp);
        let min_gap = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(angles[0] + std::f64::consts::TAU - angles[n - 1]))
            .fold(f64::INFINITY, f64::min);
        let max_gap = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(angles[0] + std::f64::consts::TAU - angles[n - 1]))
            .fold(0.0, f64::max);
        if min_gap < 0.25 || max_gap > 0.9 * std::f64::consts::PI {
            continue;
        }
        return angles
            .into_iter()
            .map(|t| {
                let r = scale * rng.random_range(0.5..1.0);
                Point2::new(center.x + r * t.cos(), center.y + r * t.sin())
            })
            .collect();
    }
}

/// Random strictly convex polygon with 3..=8 vertices (points on an ellipse).
pub fn random_convex_polygon<R: Rng>(rng: &mut R, n: usize) -> Vec<Point2<f64>> {
    let (a, b) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
    let (cx, cy) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        angles.sort_by(f64::total_cmp);
        let ok =
            angles.windows(2).all(|w| w[1] - w[0] > 0.3) && angles[0] + std::f64::consts::TAU - angles[n - 1] > 0.3;
        if ok {
            return angles
                .into_iter()
                .map(|t| Point2::new(cx + a * t.cos(), cy + b * t.sin()))
                .collect();
        }
    }
}
