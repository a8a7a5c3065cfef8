//! Blind estimation of the shadowing-noise standard deviation.
//!
//! Two temporally adjacent measurements on the same serving cell, taken a
//! few meters apart, see almost the same path loss: their distances to the
//! (unknown) cell differ negligibly when the displacement is small relative
//! to the cell distance. Differencing their received powers therefore
//! cancels `P0` and `beta` and leaves the difference of two independent
//! shadowing draws — a zero-mean Gaussian with standard deviation
//! `sqrt(2)*sigma`. No cell positions are needed.
//!
//! The point estimate is the known-zero-mean variance estimator of the
//! differences divided by `sqrt(2)`; the confidence interval is the usual
//! chi-square interval for a Gaussian variance, with `n-1` degrees of
//! freedom and the same factor 2 folded in.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::data::{DriveTestDataset, MeasurementId};
use crate::geo::great_circle_distance;

/// How adjacent pairs are formed from the measurement stream.
///
/// Overlapping pairs `(1,2),(2,3),...` follow the construction that shares
/// endpoints between samples; since shared endpoints correlate the samples,
/// the chi-square interval's independence assumption is only approximate.
/// Disjoint pairs `(1,2),(3,4),...` trade half the samples for clean
/// independence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingMode {
    #[default]
    Overlapping,
    Disjoint,
}

/// One difference of consecutive received powers on a shared serving cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSample {
    /// `P_{i+1} - P_i` in dB.
    pub value_db: f64,
    /// Ids of the two measurements, earlier first.
    pub pair: (MeasurementId, MeasurementId),
    /// Great-circle displacement between the pair in meters.
    pub displacement_m: f64,
}

/// Blind shadowing estimate with its chi-square confidence interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ShadowingEstimate {
    pub sigma_db: f64,
    pub n_pairs: usize,
    pub ci_low_db: f64,
    pub ci_high_db: f64,
    /// Confidence level `1 - alpha`.
    pub confidence: f64,
}

#[derive(Debug, Error)]
pub enum ShadowingError {
    #[error("no difference samples available")]
    EmptyDiffs,
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("at least 2 difference samples are required for a confidence interval, got {0}")]
    TooFewSamples(usize),
}

/// Extracts power differences of temporally adjacent measurement pairs.
///
/// A pair `(i, i+1)` qualifies when both measurements carry RSRP, share the
/// serving cell, and their displacement is both inside the pairing circle
/// (`< radius_m`) and within the small-displacement cap (`<= l_max_m`) that
/// keeps the equal-distance approximation valid. Any non-qualifying sample
/// between two others breaks adjacency; no pair is formed across it.
pub fn consecutive_differences(
    dataset: &DriveTestDataset,
    radius_m: f64,
    l_max_m: f64,
    mode: PairingMode,
) -> Vec<DiffSample> {
    let ms = &dataset.measurements;
    let mut diffs = Vec::new();
    let mut i = 0;
    while i + 1 < ms.len() {
        let (a, b) = (&ms[i], &ms[i + 1]);
        let qualifies =
            a.rsrp_dbm.is_some() && b.rsrp_dbm.is_some() && a.serving_cell == b.serving_cell;
        if qualifies {
            let disp = great_circle_distance(a.pos, b.pos);
            if disp < radius_m && disp <= l_max_m {
                diffs.push(DiffSample {
                    value_db: b.rsrp_dbm.unwrap() - a.rsrp_dbm.unwrap(),
                    pair: (a.id, b.id),
                    displacement_m: disp,
                });
                if mode == PairingMode::Disjoint {
                    i += 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    diffs
}

/// Zero-mean standard deviation of the difference samples:
/// `sqrt(mean(value^2))`.
pub fn sigma_pd(diffs: &[DiffSample]) -> Result<f64, ShadowingError> {
    if diffs.is_empty() {
        return Err(ShadowingError::EmptyDiffs);
    }
    let ss: f64 = diffs.iter().map(|d| d.value_db * d.value_db).sum();
    Ok((ss / diffs.len() as f64).sqrt())
}

/// Shadowing standard deviation from difference samples:
/// `sqrt(sum(value^2) / (2*n))`, i.e. [`sigma_pd`] divided by `sqrt(2)`.
pub fn estimate_sigma(diffs: &[DiffSample]) -> Result<f64, ShadowingError> {
    Ok(sigma_pd(diffs)? / std::f64::consts::SQRT_2)
}

/// `100*(1-alpha)%` confidence interval for the shadowing standard
/// deviation, from the zero-mean std of the differences and the pair count.
///
/// With `b` and `a` the upper and lower `alpha/2` chi-square quantiles at
/// `n-1` degrees of freedom, the interval is
/// `( sqrt((n-1)*sigma_pd^2 / (2b)), sqrt((n-1)*sigma_pd^2 / (2a)) )`.
pub fn sigma_confidence_interval(
    sigma_pd: f64,
    n: usize,
    alpha: f64,
) -> Result<(f64, f64), ShadowingError> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(ShadowingError::InvalidAlpha(alpha));
    }
    if n < 2 {
        return Err(ShadowingError::TooFewSamples(n));
    }
    let df = (n - 1) as f64;
    let chi2 = ChiSquared::new(df).expect("positive degrees of freedom");
    let a = chi2.inverse_cdf(alpha / 2.0);
    let b = chi2.inverse_cdf(1.0 - alpha / 2.0);
    let num = df * sigma_pd * sigma_pd;
    Ok(((num / (2.0 * b)).sqrt(), (num / (2.0 * a)).sqrt()))
}

/// Point estimate plus confidence interval in one record.
pub fn estimate_shadowing(
    diffs: &[DiffSample],
    alpha: f64,
) -> Result<ShadowingEstimate, ShadowingError> {
    let spd = sigma_pd(diffs)?;
    let (lo, hi) = sigma_confidence_interval(spd, diffs.len(), alpha)?;
    Ok(ShadowingEstimate {
        sigma_db: spd / std::f64::consts::SQRT_2,
        n_pairs: diffs.len(),
        ci_low_db: lo,
        ci_high_db: hi,
        confidence: 1.0 - alpha,
    })
}
