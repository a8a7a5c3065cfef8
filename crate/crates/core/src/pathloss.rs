//! Log-distance path-loss model fitting per serving cell.
//!
//! The channel model is `P(d) = P0 - 10*beta*log10(d)` in dBm with the
//! reference distance fixed at 1 m: `P0` is the received power at 1 m and
//! `beta` the path-loss exponent (about 2 in free space, up to 6 in dense
//! urban clutter). Fitting minimizes the (optionally shadowing-weighted)
//! sum of squared residuals subject to box bounds on both parameters.
//!
//! The problem is a 2-variable convex quadratic over a box, so the solver
//! is exact rather than iterative: closed-form interior solution, then the
//! four edges (1-D quadratic clamped to the edge interval) and the four
//! corners when the interior optimum is infeasible. [`grid_oracle`]
//! cross-checks it by exhaustive lattice search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selection::CellGroup;

/// Which objective produced a fit: plain least squares (uniform shadowing
/// across the group) or shadowing-variance-weighted least squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKind {
    Mse,
    Mle,
}

impl std::fmt::Display for FitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitKind::Mse => "mse",
            FitKind::Mle => "mle",
        })
    }
}

/// Box bounds on the fit variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBounds {
    pub p0_low: f64,
    pub p0_high: f64,
    pub beta_low: f64,
    pub beta_high: f64,
}

impl Default for FitBounds {
    /// `P0` spans plausible 1 m powers for an LTE antenna; `beta` spans
    /// free-space through dense-urban exponents.
    fn default() -> Self {
        Self {
            p0_low: -90.0,
            p0_high: -10.0,
            beta_low: 1.5,
            beta_high: 6.5,
        }
    }
}

impl FitBounds {
    pub fn validate(&self) -> Result<(), PathLossError> {
        let finite = [self.p0_low, self.p0_high, self.beta_low, self.beta_high]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.p0_low >= self.p0_high || self.beta_low >= self.beta_high {
            return Err(PathLossError::InvalidBounds);
        }
        Ok(())
    }

    fn contains(&self, p0: f64, beta: f64) -> bool {
        self.p0_low <= p0 && p0 <= self.p0_high && self.beta_low <= beta && beta <= self.beta_high
    }
}

/// Per-measurement shadowing standard deviations used as MLE weights.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseWeights {
    /// One sigma for the whole group.
    Uniform(f64),
    /// One sigma per point, in group point order.
    PerPoint(Vec<f64>),
}

impl NoiseWeights {
    /// Inverse-variance weights for a group of `n` points.
    fn to_weights(&self, n: usize) -> Result<Vec<f64>, PathLossError> {
        match self {
            NoiseWeights::Uniform(s) => {
                if !s.is_finite() || *s <= 0.0 {
                    return Err(PathLossError::InvalidWeights);
                }
                Ok(vec![1.0 / (s * s); n])
            }
            NoiseWeights::PerPoint(sigmas) => {
                if sigmas.len() != n {
                    return Err(PathLossError::WeightLengthMismatch {
                        expected: n,
                        found: sigmas.len(),
                    });
                }
                if sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
                    return Err(PathLossError::InvalidWeights);
                }
                Ok(sigmas.iter().map(|s| 1.0 / (s * s)).collect())
            }
        }
    }
}

/// A fitted path-loss model for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    /// Received power at the 1 m reference distance, dBm.
    pub p0_dbm: f64,
    /// Path-loss exponent.
    pub beta: f64,
    pub fit_kind: FitKind,
    /// Weighted sum of squared residuals at the returned parameters.
    pub residual_rss: f64,
    /// Set when `beta` was not identifiable (all points equidistant from
    /// the cell); `beta` is then the bounds midpoint and only `P0` was fit.
    pub degenerate: bool,
}

#[derive(Debug, Error)]
pub enum PathLossError {
    #[error("group has {0} points; at least 2 are required")]
    TooFewPoints(usize),
    #[error("weight vector length {found} does not match group size {expected}")]
    WeightLengthMismatch { expected: usize, found: usize },
    #[error("noise weights must be positive and finite")]
    InvalidWeights,
    #[error("all regressors equal: beta is not identifiable from equidistant points")]
    SingularNormalMatrix,
    #[error("distance {0} m is below the 1 m reference distance")]
    DistanceBelowReference(f64),
    #[error("fit bounds must satisfy low < high")]
    InvalidBounds,
}

/// Evaluates the fitted model at a distance (meters, at least the 1 m
/// reference distance).
pub fn predict_rsrp(params: &PathLossParams, distance_m: f64) -> Result<f64, PathLossError> {
    if distance_m.is_nan() || distance_m < 1.0 {
        return Err(PathLossError::DistanceBelowReference(distance_m));
    }
    Ok(params.p0_dbm - 10.0 * params.beta * distance_m.log10())
}

/// Regressor spread below which the normal matrix is treated as singular.
const SINGULAR_SPREAD: f64 = 1e-9;

/// Weighted objective `sum_i w_i * (P_i - p0 + beta * g_i)^2` where
/// `g_i = 10*log10(d_i)`.
fn objective(targets: &[f64], regressors: &[f64], weights: &[f64], p0: f64, beta: f64) -> f64 {
    targets
        .iter()
        .zip(regressors)
        .zip(weights)
        .map(|((&p, &g), &w)| {
            let r = p - p0 + beta * g;
            w * r * r
        })
        .sum()
}

/// Exact box-constrained weighted least squares for the two-parameter
/// model `P_i = p0 - beta * g_i + noise`.
///
/// Solves the 2x2 normal equations in closed form; when the unconstrained
/// minimizer violates the box, the constrained optimum lies on the
/// boundary, so the 1-D minimizer on each of the four edges (clamped to
/// the edge interval) and the four corners are evaluated and the feasible
/// candidate with the lowest objective wins.
pub fn solve_box_ls(
    targets: &[f64],
    regressors: &[f64],
    weights: &[f64],
    bounds: &FitBounds,
) -> Result<(f64, f64), PathLossError> {
    let n = targets.len();
    if n < 2 {
        return Err(PathLossError::TooFewPoints(n));
    }
    if regressors.len() != n || weights.len() != n {
        return Err(PathLossError::WeightLengthMismatch {
            expected: n,
            found: regressors.len().min(weights.len()),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(PathLossError::InvalidWeights);
    }
    bounds.validate()?;

    let spread = regressors.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - regressors.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < SINGULAR_SPREAD {
        return Err(PathLossError::SingularNormalMatrix);
    }

    let mut s_w = 0.0;
    let mut s_g = 0.0;
    let mut s_gg = 0.0;
    let mut s_p = 0.0;
    let mut s_gp = 0.0;
    for ((&p, &g), &w) in targets.iter().zip(regressors).zip(weights) {
        s_w += w;
        s_g += w * g;
        s_gg += w * g * g;
        s_p += w * p;
        s_gp += w * g * p;
    }

    // Stationarity: dF/dp0 = 0 => p0*S_w - beta*S_g = S_p
    //               dF/dbeta = 0 => p0*S_g - beta*S_gg = S_gp
    let det = s_w * s_gg - s_g * s_g;
    let beta_hat = (s_g * s_p - s_w * s_gp) / det;
    let p0_hat = (s_p + beta_hat * s_g) / s_w;

    if bounds.contains(p0_hat, beta_hat) {
        return Ok((p0_hat, beta_hat));
    }

    // Best p0 for a fixed beta, and best beta for a fixed p0.
    let p0_for = |beta: f64| ((s_p + beta * s_g) / s_w).clamp(bounds.p0_low, bounds.p0_high);
    let beta_for = |p0: f64| ((p0 * s_g - s_gp) / s_gg).clamp(bounds.beta_low, bounds.beta_high);

    let candidates = [
        (bounds.p0_low, beta_for(bounds.p0_low)),
        (bounds.p0_high, beta_for(bounds.p0_high)),
        (p0_for(bounds.beta_low), bounds.beta_low),
        (p0_for(bounds.beta_high), bounds.beta_high),
        (bounds.p0_low, bounds.beta_low),
        (bounds.p0_low, bounds.beta_high),
        (bounds.p0_high, bounds.beta_low),
        (bounds.p0_high, bounds.beta_high),
    ];

    let mut best = candidates[0];
    let mut best_obj = objective(targets, regressors, weights, best.0, best.1);
    for &(p0, beta) in &candidates[1..] {
        let obj = objective(targets, regressors, weights, p0, beta);
        if obj < best_obj {
            best = (p0, beta);
            best_obj = obj;
        }
    }
    Ok(best)
}

fn assemble(group: &CellGroup) -> (Vec<f64>, Vec<f64>) {
    let targets = group
        .points
        .iter()
        .map(|(m, _)| m.rsrp_dbm.expect("group points carry RSRP"))
        .collect();
    let regressors = group.points.iter().map(|(_, d)| 10.0 * d.log10()).collect();
    (targets, regressors)
}

fn fit_with_weights(
    group: &CellGroup,
    weights: Vec<f64>,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<PathLossParams, PathLossError> {
    let n = group.len();
    if n < 2 {
        return Err(PathLossError::TooFewPoints(n));
    }
    bounds.validate()?;
    let (targets, regressors) = assemble(group);

    match solve_box_ls(&targets, &regressors, &weights, bounds) {
        Ok((p0, beta)) => Ok(PathLossParams {
            p0_dbm: p0,
            beta,
            fit_kind,
            residual_rss: objective(&targets, &regressors, &weights, p0, beta),
            degenerate: false,
        }),
        Err(PathLossError::SingularNormalMatrix) => {
            // All points equidistant: beta carries no information. Pin it
            // to the bounds midpoint and fit P0 alone as the weighted mean
            // of P_i + 10*beta*log10(d_i), clamped to its box.
            let beta = 0.5 * (bounds.beta_low + bounds.beta_high);
            let s_w: f64 = weights.iter().sum();
            let mean: f64 = targets
                .iter()
                .zip(&regressors)
                .zip(&weights)
                .map(|((&p, &g), &w)| w * (p + beta * g))
                .sum::<f64>()
                / s_w;
            let p0 = mean.clamp(bounds.p0_low, bounds.p0_high);
            Ok(PathLossParams {
                p0_dbm: p0,
                beta,
                fit_kind,
                residual_rss: objective(&targets, &regressors, &weights, p0, beta),
                degenerate: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Least-squares fit assuming uniform shadowing noise across the group.
pub fn fit_mse(group: &CellGroup, bounds: &FitBounds) -> Result<PathLossParams, PathLossError> {
    fit_with_weights(group, vec![1.0; group.len()], bounds, FitKind::Mse)
}

/// Shadowing-variance-weighted fit: residuals are scaled by `1/sigma_i^2`,
/// so with uniform sigmas the minimizer coincides with [`fit_mse`].
pub fn fit_mle(
    group: &CellGroup,
    weights: &NoiseWeights,
    bounds: &FitBounds,
) -> Result<PathLossParams, PathLossError> {
    let n = group.len();
    if n < 2 {
        return Err(PathLossError::TooFewPoints(n));
    }
    let w = weights.to_weights(n)?;
    fit_with_weights(group, w, bounds, FitKind::Mle)
}

/// Exhaustive lattice search over the bounds box with the unweighted
/// objective. Intentionally independent of [`solve_box_ls`]: it evaluates
/// every lattice point directly. Ties break toward the lowest `p0`, then
/// the lowest `beta`.
pub fn grid_oracle(group: &CellGroup, bounds: &FitBounds, step: f64) -> (f64, f64) {
    assert!(step > 0.0, "grid step must be positive");
    let (targets, regressors) = assemble(group);
    let weights = vec![1.0; targets.len()];

    let n_p0 = ((bounds.p0_high - bounds.p0_low) / step + 1e-9).floor() as usize;
    let n_beta = ((bounds.beta_high - bounds.beta_low) / step + 1e-9).floor() as usize;

    let mut best = (bounds.p0_low, bounds.beta_low);
    let mut best_obj = f64::INFINITY;
    for i in 0..=n_p0 {
        let p0 = bounds.p0_low + i as f64 * step;
        for j in 0..=n_beta {
            let beta = bounds.beta_low + j as f64 * step;
            let obj = objective(&targets, &regressors, &weights, p0, beta);
            if obj < best_obj {
                best = (p0, beta);
                best_obj = obj;
            }
        }
    }
    best
}

/// Unweighted objective of a group at given parameters. Convenience for
/// comparing solver output against [`grid_oracle`] output.
pub fn mse_objective(group: &CellGroup, p0: f64, beta: f64) -> f64 {
    let (targets, regressors) = assemble(group);
    let weights = vec![1.0; targets.len()];
    objective(&targets, &regressors, &weights, p0, beta)
}
