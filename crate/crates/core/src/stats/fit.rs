//! Weighted least-squares fit of `f1 = a0 - a1 u - a2 u^2` with `u = 1 / (N x)`,
//! constrained to non-negative coefficients.

use super::StatsError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    /// `1 / (N_epochs x)`.
    pub inv_nx: f64,
    pub f1: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Uncertainties below this are raised to it before weighting.
    pub delta_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { delta_floor: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    /// Coefficient covariance; rows and columns of clipped terms are zero.
    pub covariance: [[f64; 3]; 3],
}

impl FitResult {
    pub fn predict(&self, nx: f64) -> f64 {
        let u = 1.0 / nx;
        self.a0 - self.a1 * u - self.a2 * u * u
    }

    /// Prediction with the epoch count capped at `threshold`.
    pub fn predict_capped(&self, n_epochs: f64, x: f64, threshold: f64) -> f64 {
        self.predict(apply_epoch_threshold(n_epochs, threshold) * x)
    }
}

pub fn apply_epoch_threshold(n_epochs: f64, threshold: f64) -> f64 {
    n_epochs.min(threshold)
}

pub fn fit_quadratic(points: &[FitPoint], opts: FitOptions) -> Result<FitResult, StatsError> {
    for p in points {
        for v in [p.inv_nx, p.f1, p.delta] {
            if !v.is_finite() {
                return Err(StatsError::NonFinite(v));
            }
        }
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.inv_nx).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(StatsError::Underdetermined(distinct.len()));
    }

    let mut active = vec![0usize, 1, 2];
    loop {
        let (coef, cov) = solve(points, &active, opts)?;
        let worst = coef
            .iter()
            .enumerate()
            .filter(|(_, c)| **c < 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        if let Some(i) = worst {
            active.remove(i);
            if active.is_empty() {
                return Ok(assemble(points, &[], &[], &[], opts));
            }
            continue;
        }
        return Ok(assemble(points, &active, &coef, &cov, opts));
    }
}

fn column(term: usize, u: f64) -> f64 {
    match term {
        0 => 1.0,
        1 => -u,
        _ => -u * u,
    }
}

fn weight(p: &FitPoint, opts: FitOptions) -> f64 {
    1.0 / p.delta.abs().max(opts.delta_floor)
}

type Solution = (Vec<f64>, Vec<Vec<f64>>);

fn solve(points: &[FitPoint], active: &[usize], opts: FitOptions) -> Result<Solution, StatsError> {
    let m = points.len();
    let k = active.len();
    let a = DMatrix::from_fn(m, k, |r, c| column(active[c], points[r].inv_nx) * weight(&points[r], opts));
    let b = DVector::from_fn(m, |r, _| points[r].f1 * weight(&points[r], opts));
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    if r.diagonal().iter().any(|d| d.abs() <= scale * 1e-13) {
        return Err(StatsError::RankDeficient);
    }
    let qtb = qr.q().transpose() * &b;
    let x = r.solve_upper_triangular(&qtb).ok_or(StatsError::RankDeficient)?;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(StatsError::RankDeficient)?;
    let cov = &rinv * rinv.transpose();
    let cov_rows = (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect();
    Ok((x.iter().copied().collect(), cov_rows))
}

fn assemble(
    points: &[FitPoint],
    active: &[usize],
    coef: &[f64],
    cov: &[Vec<f64>],
    opts: FitOptions,
) -> FitResult {
    let mut full = [0.0; 3];
    let mut covariance = [[0.0; 3]; 3];
    for (i, &ti) in active.iter().enumerate() {
        full[ti] = coef[i];
        for (j, &tj) in active.iter().enumerate() {
            covariance[ti][tj] = cov[i][j];
        }
    }
    let mut fit = FitResult {
        a0: full[0],
        a1: full[1],
        a2: full[2],
        residual: 0.0,
        covariance,
    };
    fit.residual = points
        .iter()
        .map(|p| ((p.f1 - fit.predict(1.0 / p.inv_nx)) * weight(p, opts)).powi(2))
        .sum();
    fit
}
