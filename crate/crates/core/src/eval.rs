//! Leave-one-out evaluation, parameter sweeps, and error statistics.
//!
//! Every measured point is held out by id and re-predicted from the rest
//! using its actual serving cell — the only comparison that is well posed
//! when several cells serve the disc. Points whose serving cell does not
//! survive the filters produce no record and are reported through the
//! coverage fraction instead of being imputed.
//!
//! Errors are signed `predicted - actual`; box statistics are computed on
//! both the signed and the absolute distribution. Quantiles use linear
//! interpolation between order statistics so output files are
//! bit-reproducible.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{CellId, DriveTestDataset, MeasurementId, SiteDb};
use crate::geo::great_circle_distance;
use crate::pathloss::{FitBounds, FitKind};
use crate::predict::predict_for_cell_excluding;
use crate::selection::{SelectionConfig, SelectionError};
use crate::shadowing::{consecutive_differences, estimate_sigma, DiffSample, PairingMode};

/// One held-out point's score.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub point_id: MeasurementId,
    pub actual_rsrp_dbm: f64,
    pub predicted_rsrp_dbm: f64,
    /// Signed error, `predicted - actual`.
    pub error_db: f64,
    pub cell_id: CellId,
    /// Shadowing estimate from the diffs inside this point's disc, when
    /// attached via [`attach_local_sigma`].
    pub local_sigma_db: Option<f64>,
}

/// Five-number summary plus mean of an error sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

/// One grid combination of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub radius_m: f64,
    pub min_points: usize,
    pub min_dist_m: f64,
    pub n_records: usize,
    pub n_measured: usize,
    /// Predictable fraction: records / measured points.
    pub coverage: f64,
    /// Stats of `|error_db|`; `None` when no record was produced.
    pub abs_stats: Option<BoxStats>,
    /// Stats of the signed `error_db`.
    pub signed_stats: Option<BoxStats>,
}

/// Full sweep output in radius-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub radius_values: Vec<f64>,
    pub min_points_values: Vec<usize>,
    pub min_dist_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

/// Error-versus-shadowing scatter with its Pearson correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSigmaScatter {
    /// `(local_sigma_db, abs_error_db)` per record, in record order.
    pub pairs: Vec<(MeasurementId, f64, f64)>,
    /// Pearson correlation of sigma vs. absolute error; 0 when degenerate.
    pub correlation: f64,
    /// Set when either variable had zero variance and the correlation is
    /// reported as 0 by convention.
    pub degenerate: bool,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 3 sigma/error pairs, got {0}")]
    TooFewPoints(usize),
}

/// Scores every measured point by excluding it and re-predicting it on its
/// own serving cell. Points that cannot be predicted yield no record.
pub fn leave_one_out(
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<Vec<EvalRecord>, SelectionError> {
    let measured: Vec<_> = dataset
        .measurements
        .iter()
        .filter(|m| m.rsrp_dbm.is_some())
        .collect();

    let records: Result<Vec<Option<EvalRecord>>, SelectionError> = measured
        .par_iter()
        .map(|m| {
            let actual = m.rsrp_dbm.expect("filtered to measured points");
            let pred = predict_for_cell_excluding(
                m.pos,
                &m.serving_cell,
                dataset,
                sites,
                config,
                bounds,
                fit_kind,
                Some(m.id),
            )?;
            Ok(pred.map(|p| EvalRecord {
                point_id: m.id,
                actual_rsrp_dbm: actual,
                predicted_rsrp_dbm: p.predicted_rsrp_dbm,
                error_db: p.predicted_rsrp_dbm - actual,
                cell_id: m.serving_cell.clone(),
                local_sigma_db: None,
            }))
        })
        .collect();

    Ok(records?.into_iter().flatten().collect())
}

/// Fills each record's `local_sigma_db` from the difference samples whose
/// pair endpoints both lie strictly inside the disc around the record's
/// point. Records whose disc holds no difference sample keep `None`.
pub fn attach_local_sigma(
    records: &mut [EvalRecord],
    dataset: &DriveTestDataset,
    radius_m: f64,
    l_max_m: f64,
    mode: PairingMode,
) {
    let diffs = consecutive_differences(dataset, radius_m, l_max_m, mode);
    let by_id: std::collections::HashMap<MeasurementId, crate::geo::GeoPoint> =
        dataset.measurements.iter().map(|m| (m.id, m.pos)).collect();
    let pos_of = |id: MeasurementId| by_id[&id];
    let endpoints: Vec<_> = diffs
        .iter()
        .map(|d| (pos_of(d.pair.0), pos_of(d.pair.1)))
        .collect();

    for r in records.iter_mut() {
        let center = pos_of(r.point_id);
        let local: Vec<DiffSample> = diffs
            .iter()
            .zip(&endpoints)
            .filter(|(_, (a, b))| {
                great_circle_distance(*a, center) < radius_m
                    && great_circle_distance(*b, center) < radius_m
            })
            .map(|(d, _)| d.clone())
            .collect();
        r.local_sigma_db = estimate_sigma(&local).ok();
    }
}

/// Quantile by linear interpolation between order statistics on sorted
/// data (`h = (n-1)p`, interpolate between `x[floor(h)]` and the next).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Box statistics of a non-empty sample; order of the input is irrelevant.
pub fn box_stats(values: &[f64]) -> Result<BoxStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.50),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        n: sorted.len(),
    })
}

fn sweep_cell(
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<SweepCell, SelectionError> {
    let records = leave_one_out(dataset, sites, config, bounds, fit_kind)?;
    let n_measured = dataset.measured_count();
    let abs: Vec<f64> = records.iter().map(|r| r.error_db.abs()).collect();
    let signed: Vec<f64> = records.iter().map(|r| r.error_db).collect();
    Ok(SweepCell {
        radius_m: config.radius_m,
        min_points: config.min_points_per_cell,
        min_dist_m: config.min_dist_to_cell_m,
        n_records: records.len(),
        n_measured,
        coverage: if n_measured == 0 {
            0.0
        } else {
            records.len() as f64 / n_measured as f64
        },
        abs_stats: box_stats(&abs).ok(),
        signed_stats: box_stats(&signed).ok(),
    })
}

/// Leave-one-out over the full Cartesian product of the three parameter
/// axes. Output cells are in radius-major order (radius, then min points,
/// then min distance), independent of execution order.
pub fn sweep(
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    radius_values: &[f64],
    min_points_values: &[usize],
    min_dist_values: &[f64],
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<SweepResult, SelectionError> {
    let mut cells =
        Vec::with_capacity(radius_values.len() * min_points_values.len() * min_dist_values.len());
    for &radius_m in radius_values {
        for &min_points in min_points_values {
            for &min_dist_m in min_dist_values {
                let config = SelectionConfig {
                    radius_m,
                    min_points_per_cell: min_points,
                    min_dist_to_cell_m: min_dist_m,
                };
                cells.push(sweep_cell(dataset, sites, &config, bounds, fit_kind)?);
            }
        }
    }
    Ok(SweepResult {
        radius_values: radius_values.to_vec(),
        min_points_values: min_points_values.to_vec(),
        min_dist_values: min_dist_values.to_vec(),
        cells,
    })
}

/// Builds the sigma-vs-|error| scatter and its Pearson correlation from
/// records that carry a local sigma. Zero variance in either variable
/// makes the correlation undefined; it is reported as 0 with the
/// `degenerate` flag set.
pub fn error_vs_sigma(records: &[EvalRecord]) -> Result<ErrorSigmaScatter, EvalError> {
    let pairs: Vec<(MeasurementId, f64, f64)> = records
        .iter()
        .filter_map(|r| r.local_sigma_db.map(|s| (r.point_id, s, r.error_db.abs())))
        .collect();
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPoints(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean_s: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_e: f64 = pairs.iter().map(|p| p.2).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_s = 0.0;
    let mut var_e = 0.0;
    for &(_, s, e) in &pairs {
        cov += (s - mean_s) * (e - mean_e);
        var_s += (s - mean_s) * (s - mean_s);
        var_e += (e - mean_e) * (e - mean_e);
    }
    let degenerate = var_s == 0.0 || var_e == 0.0;
    let correlation = if degenerate {
        0.0
    } else {
        cov / (var_s.sqrt() * var_e.sqrt())
    };
    Ok(ErrorSigmaScatter {
        pairs,
        correlation,
        degenerate,
    })
}

fn fmt_opt(stats: Option<&BoxStats>, f: impl Fn(&BoxStats) -> f64) -> String {
    stats.map(|s| f(s).to_string()).unwrap_or_default()
}

/// Writes the sweep CSV:
/// `radius_m,min_points,min_dist_m,n_records,coverage,mean_abs_err_db,min,q1,median,q3,max`.
/// Stats columns are of the absolute error and stay empty for grid cells
/// that produced no record.
pub fn write_sweep_csv<W: Write>(
    mut w: W,
    result: &SweepResult,
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "radius_m,min_points,min_dist_m,n_records,coverage,mean_abs_err_db,min,q1,median,q3,max"
    )?;
    for c in &result.cells {
        let s = c.abs_stats.as_ref();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.radius_m,
            c.min_points,
            c.min_dist_m,
            c.n_records,
            c.coverage,
            fmt_opt(s, |s| s.mean),
            fmt_opt(s, |s| s.min),
            fmt_opt(s, |s| s.q1),
            fmt_opt(s, |s| s.median),
            fmt_opt(s, |s| s.q3),
            fmt_opt(s, |s| s.max),
        )?;
    }
    Ok(())
}

/// Writes the scatter CSV: `point_id,sigma_db,abs_error_db`.
pub fn write_scatter_csv<W: Write>(
    mut w: W,
    scatter: &ErrorSigmaScatter,
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "point_id,sigma_db,abs_error_db")?;
    for &(id, s, e) in &scatter.pairs {
        writeln!(w, "{id},{s},{e}")?;
    }
    Ok(())
}

/// Writes per-point evaluation records:
/// `point_id,cell_id,actual_rsrp_dbm,predicted_rsrp_dbm,error_db,local_sigma_db`.
pub fn write_records_csv<W: Write>(
    mut w: W,
    records: &[EvalRecord],
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "point_id,cell_id,actual_rsrp_dbm,predicted_rsrp_dbm,error_db,local_sigma_db"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.point_id,
            r.cell_id,
            r.actual_rsrp_dbm,
            r.predicted_rsrp_dbm,
            r.error_db,
            r.local_sigma_db.map(|s| s.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DriveTestDataset;
    use crate::geo::GeoPoint;
    use crate::synth::{generate, ChannelField, SynthCell, SynthConfig};

    fn one_cell_scene(sigma: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            cells: vec![SynthCell {
                cell_id: CellId::from("C1"),
                pos: GeoPoint {
                    lat_deg: 35.7040,
                    lon_deg: 51.3980,
                },
                p0_dbm: -40.0,
                beta: 3.5,
            }],
            route: vec![
                GeoPoint {
                    lat_deg: 35.7000,
                    lon_deg: 51.4000,
                },
                GeoPoint {
                    lat_deg: 35.7000,
                    lon_deg: 51.4150,
                },
            ],
            speed_kmh: 30.0,
            sample_interval_s: 1.0,
            channel: ChannelField::Uniform { sigma_db: sigma },
            seed,
        }
    }

    fn scene() -> (DriveTestDataset, SiteDb) {
        let (ds, sites, _) = generate(&one_cell_scene(0.0, 1)).unwrap();
        (ds, SiteDb::new(sites).unwrap())
    }

    #[test]
    fn single_point_dataset_has_no_records() {
        let records = vec![(
            0i64,
            GeoPoint {
                lat_deg: 35.7,
                lon_deg: 51.4,
            },
            Some(-80.0),
            CellId::from("C1"),
        )];
        let ds = DriveTestDataset::from_records(records, "t");
        let sites = SiteDb::new(vec![crate::data::CellSite {
            cell_id: CellId::from("C1"),
            pos: GeoPoint {
                lat_deg: 35.71,
                lon_deg: 51.4,
            },
        }])
        .unwrap();
        let out = leave_one_out(
            &ds,
            &sites,
            &SelectionConfig::default(),
            &FitBounds::default(),
            FitKind::Mse,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn noiseless_scene_is_recovered_exactly() {
        let (ds, sites) = scene();
        let records = leave_one_out(
            &ds,
            &sites,
            &SelectionConfig::default(),
            &FitBounds::default(),
            FitKind::Mse,
        )
        .unwrap();
        assert!(!records.is_empty());
        for r in &records {
            assert!(
                r.error_db.abs() < 1e-6,
                "point {} error {}",
                r.point_id,
                r.error_db
            );
        }
    }

    #[test]
    fn coverage_identity_holds() {
        let (ds, sites) = scene();
        let cfg = SelectionConfig::default();
        let records =
            leave_one_out(&ds, &sites, &cfg, &FitBounds::default(), FitKind::Mse).unwrap();
        let unpredictable = ds.measured_count() - records.len();
        assert_eq!(records.len() + unpredictable, ds.measured_count());
    }

    #[test]
    fn raising_min_points_never_raises_coverage() {
        let (ds, sites) = scene();
        let mut last = f64::INFINITY;
        for mp in [4usize, 8, 12, 16, 24] {
            let cfg = SelectionConfig {
                min_points_per_cell: mp,
                ..Default::default()
            };
            let records =
                leave_one_out(&ds, &sites, &cfg, &FitBounds::default(), FitKind::Mse).unwrap();
            let coverage = records.len() as f64 / ds.measured_count() as f64;
            assert!(
                coverage <= last + 1e-12,
                "coverage rose from {last} to {coverage} at {mp}"
            );
            last = coverage;
        }
    }

    #[test]
    fn box_stats_examples() {
        let one = box_stats(&[1.0]).unwrap();
        assert_eq!(
            (one.min, one.q1, one.median, one.q3, one.max),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(one.n, 1);

        let s = box_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q3, 3.25);

        let perm = box_stats(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s, perm);

        assert!(matches!(box_stats(&[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn single_combination_sweep_equals_direct_loo() {
        let (ds, sites) = scene();
        let cfg = SelectionConfig::default();
        let bounds = FitBounds::default();
        let records = leave_one_out(&ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        let sw = sweep(
            &ds,
            &sites,
            &[cfg.radius_m],
            &[cfg.min_points_per_cell],
            &[cfg.min_dist_to_cell_m],
            &bounds,
            FitKind::Mse,
        )
        .unwrap();
        assert_eq!(sw.cells.len(), 1);
        assert_eq!(sw.cells[0].n_records, records.len());
        let abs: Vec<f64> = records.iter().map(|r| r.error_db.abs()).collect();
        assert_eq!(sw.cells[0].abs_stats, box_stats(&abs).ok());
    }

    #[test]
    fn full_grid_is_populated_in_radius_major_order() {
        let (ds, sites_db) = {
            // Dense sampling (4.2 m) so a 50 m disc holds well over the
            // largest min-points value in the grid.
            let mut scene = one_cell_scene(4.0, 2);
            scene.sample_interval_s = 0.5;
            let (ds, sites, _) = generate(&scene).unwrap();
            (ds, SiteDb::new(sites).unwrap())
        };
        let radii = [50.0, 100.0];
        let mps = [8usize, 10, 12, 14];
        let mds = [10.0, 15.0, 20.0, 25.0];
        let sw = sweep(
            &ds,
            &sites_db,
            &radii,
            &mps,
            &mds,
            &FitBounds::default(),
            FitKind::Mse,
        )
        .unwrap();
        assert_eq!(sw.cells.len(), 32);
        // 16 combinations per radius, radius-major.
        let mut k = 0;
        for &r in &radii {
            for &mp in &mps {
                for &md in &mds {
                    assert_eq!(sw.cells[k].radius_m, r);
                    assert_eq!(sw.cells[k].min_points, mp);
                    assert_eq!(sw.cells[k].min_dist_m, md);
                    k += 1;
                }
            }
        }
        assert!(
            sw.cells.iter().all(|c| c.n_records > 0),
            "every grid cell populated"
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let (ds, sites) = {
            let (ds, sites, _) = generate(&one_cell_scene(4.0, 3)).unwrap();
            (ds, SiteDb::new(sites).unwrap())
        };
        let run = || {
            sweep(
                &ds,
                &sites,
                &[50.0, 100.0],
                &[8],
                &[10.0],
                &FitBounds::default(),
                FitKind::Mse,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let mut fa = Vec::new();
        let mut fb = Vec::new();
        write_sweep_csv(&mut fa, &a, Some("x")).unwrap();
        write_sweep_csv(&mut fb, &b, Some("x")).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn local_sigma_attaches_inside_the_disc() {
        let (ds, sites) = {
            let (ds, sites, _) = generate(&one_cell_scene(4.0, 4)).unwrap();
            (ds, SiteDb::new(sites).unwrap())
        };
        let cfg = SelectionConfig::default();
        let mut records =
            leave_one_out(&ds, &sites, &cfg, &FitBounds::default(), FitKind::Mse).unwrap();
        attach_local_sigma(
            &mut records,
            &ds,
            cfg.radius_m,
            15.0,
            PairingMode::Overlapping,
        );
        let with_sigma = records
            .iter()
            .filter(|r| r.local_sigma_db.is_some())
            .count();
        assert!(
            with_sigma > records.len() / 2,
            "{with_sigma}/{}",
            records.len()
        );
        for r in records.iter().filter(|r| r.local_sigma_db.is_some()) {
            assert!(r.local_sigma_db.unwrap() >= 0.0);
        }
    }

    #[test]
    fn correlation_handles_degenerate_inputs() {
        let rec = |id: u64, sigma: f64, err: f64| EvalRecord {
            point_id: id,
            actual_rsrp_dbm: -80.0,
            predicted_rsrp_dbm: -80.0 + err,
            error_db: err,
            cell_id: CellId::from("C"),
            local_sigma_db: Some(sigma),
        };
        // Constant sigma: zero variance, flagged, correlation 0.
        let constant = vec![rec(0, 3.0, 1.0), rec(1, 3.0, -2.0), rec(2, 3.0, 0.5)];
        let s = error_vs_sigma(&constant).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.correlation, 0.0);

        // All-zero errors: |error| has zero variance too.
        let zeros = vec![rec(0, 1.0, 0.0), rec(1, 2.0, 0.0), rec(2, 3.0, 0.0)];
        let s = error_vs_sigma(&zeros).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.correlation, 0.0);

        // Fewer than 3 usable pairs errors out.
        assert!(matches!(
            error_vs_sigma(&constant[..2]),
            Err(EvalError::TooFewPoints(2))
        ));

        // A clean positive relationship.
        let up = vec![
            rec(0, 1.0, 0.5),
            rec(1, 2.0, 1.0),
            rec(2, 3.0, 2.0),
            rec(3, 4.0, 2.5),
        ];
        let s = error_vs_sigma(&up).unwrap();
        assert!(!s.degenerate);
        assert!(s.correlation > 0.9);
        assert!(s.correlation <= 1.0);
    }
}
