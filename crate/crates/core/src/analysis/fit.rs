//! Fitting `λ(h) = λ_ex + C hᵗ` to a refinement sequence.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// Successive differences change sign; no order is fitted.
    NonMonotone,
    /// Two successive values coincide; no order is fitted.
    Stagnant,
    /// The iterative refinement did not settle; the closed-form seed is reported.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Fitted order `t`; `None` unless the status is `Ok` or `NotConverged`.
    pub order: Option<f64>,
    pub extrapolated: f64,
    pub constant: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    pub status: FitStatus,
}

/// `t` with `(h1ᵗ - h2ᵗ) / (h2ᵗ - h3ᵗ) = ratio` for `h1 > h2 > h3 > 0`, by bisection.
fn three_level_order(h: [f64; 3], ratio: f64) -> Option<f64> {
    let f = |t: f64| (h[0].powf(t) - h[1].powf(t)) / (h[1].powf(t) - h[2].powf(t)) - ratio;
    let (mut lo, mut hi) = (1e-6, 50.0);
    if f(lo) * f(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Closed form through three levels.
fn closed_form(h: [f64; 3], l: [f64; 3]) -> Option<(f64, f64, f64)> {
    let (d1, d2) = (l[0] - l[1], l[1] - l[2]);
    let r1 = h[0] / h[1];
    let r2 = h[1] / h[2];
    let geometric = ((r1 - r2) / r2).abs() < 1e-12;
    let t = if geometric {
        (d1 / d2).ln() / r1.ln()
    } else {
        three_level_order(h, d1 / d2)?
    };
    let extrapolated = if geometric {
        // Aitken's formula is exact for a constant refinement ratio
        l[2] - d2 * d2 / (d1 - d2)
    } else {
        l[2] - d2 * h[2].powf(t) / (h[1].powf(t) - h[2].powf(t))
    };
    let constant = (l[0] - extrapolated) / h[0].powf(t);
    Some((t, extrapolated, constant))
}

fn rms(h: &[f64], l: &[f64], p: &Vector3<f64>) -> f64 {
    let s: f64 = h
        .iter()
        .zip(l)
        .map(|(hi, li)| (p[0] + p[1] * hi.powf(p[2]) - li).powi(2))
        .sum();
    (s / h.len() as f64).sqrt()
}

/// Damped Gauss-Newton on `(λ_ex, C, t)`.
fn refine(h: &[f64], l: &[f64], start: Vector3<f64>) -> Option<Vector3<f64>> {
    let scale = l.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut p = start;
    let mut cost = rms(h, l, &p);
    let mut mu = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (hi, li) in h.iter().zip(l) {
            let ht = hi.powf(p[2]);
            let j = Vector3::new(1.0, ht, p[1] * ht * hi.ln());
            let r = p[0] + p[1] * ht - li;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let damped = jtj + Matrix3::from_diagonal(&jtj.diagonal()) * mu;
        let step = damped.lu().solve(&(-jtr))?;
        let trial = p + step;
        let trial_cost = rms(h, l, &trial);
        if trial_cost.is_finite() && trial_cost <= cost {
            let small = step
                .iter()
                .zip(trial.iter())
                .all(|(s, v)| s.abs() <= 1e-15 * v.abs().max(1.0));
            p = trial;
            cost = trial_cost;
            mu = (mu * 0.1).max(1e-12);
            if small || cost <= 1e-15 * scale {
                return Some(p);
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                return Some(p);
            }
        }
    }
    Some(p)
}

/// Fits `λ(h) = λ_ex + C hᵗ`. `h` must be strictly decreasing.
///
/// Three levels use the closed form. More levels start from the closed form
/// on the last three and refine all parameters by damped Gauss-Newton.
/// Sequences whose differences change sign are flagged and report the
/// finest value as `λ_ex`.
pub fn fit_order(h: &[f64], lambda: &[f64]) -> Result<OrderFit> {
    if h.len() != lambda.len() {
        return Err(VemError::InvalidArgument("h and λ lists differ in length".into()));
    }
    if h.len() < 3 {
        return Err(VemError::InvalidArgument(
            "order fitting needs at least 3 levels".into(),
        ));
    }
    let decreasing = h.windows(2).all(|w| w[1] < w[0]);
    if !decreasing || !h.iter().all(|v| *v > 0.0) {
        return Err(VemError::InvalidArgument(
            "h must be positive and strictly decreasing".into(),
        ));
    }
    let finest = *lambda.last().unwrap();
    let flagged = |status| OrderFit {
        order: None,
        extrapolated: finest,
        constant: 0.0,
        residual: 0.0,
        status,
    };
    let diffs: Vec<f64> = lambda.windows(2).map(|w| w[0] - w[1]).collect();
    if diffs.contains(&0.0) {
        return Ok(flagged(FitStatus::Stagnant));
    }
    if diffs.windows(2).any(|w| w[0].signum() != w[1].signum()) {
        return Ok(flagged(FitStatus::NonMonotone));
    }
    let n = h.len();
    let last3 = |v: &[f64]| [v[n - 3], v[n - 2], v[n - 1]];
    let Some((t, ex, c)) = closed_form(last3(h), last3(lambda)) else {
        return Ok(flagged(FitStatus::NotConverged));
    };
    let seed = Vector3::new(ex, c, t);
    if n == 3 {
        return Ok(OrderFit {
            order: Some(t),
            extrapolated: ex,
            constant: c,
            residual: rms(h, lambda, &seed),
            status: FitStatus::Ok,
        });
    }
    match refine(h, lambda, seed) {
        Some(p) if p.iter().all(|v| v.is_finite()) && p[2] > 0.0 => Ok(OrderFit {
            order: Some(p[2]),
            extrapolated: p[0],
            constant: p[1],
            residual: rms(h, lambda, &p),
            status: FitStatus::Ok,
        }),
        _ => Ok(OrderFit {
            order: Some(t),
            extrapolated: ex,
            constant: c,
            residual: rms(h, lambda, &seed),
            status: FitStatus::NotConverged,
        }),
    }
}
