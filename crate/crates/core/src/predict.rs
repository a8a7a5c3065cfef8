//! End-to-end RSRP prediction at a target point.
//!
//! The pipeline selects the measured points inside the disc, partitions
//! them by serving cell, filters the groups, fits each surviving group,
//! and evaluates the fitted model at the target's distance to each cell
//! site. The headline value is the strongest per-cell prediction — the
//! cell a device at the target would camp on — while all per-cell values
//! are kept so evaluation can score the held-out point's actual serving
//! cell instead.

use serde::Serialize;

use crate::data::{CellId, DriveTestDataset, MeasurementId, SiteDb};
use crate::geo::{great_circle_distance, GeoPoint};
use crate::pathloss::{
    fit_mle, fit_mse, predict_rsrp, FitBounds, FitKind, NoiseWeights, PathLossParams,
};
use crate::selection::{
    apply_filters, group_by_cell, select_neighborhood_excluding, CellGroup, SelectionConfig,
    SelectionError,
};

/// One cell's fitted model and its prediction at the target.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPrediction {
    pub cell_id: CellId,
    pub params: PathLossParams,
    pub predicted_rsrp_dbm: f64,
    /// Points that survived the filters and entered the fit.
    pub n_points: usize,
    /// Set when the target sat closer than the 1 m reference distance to
    /// the site and the distance was clamped up to 1 m.
    pub dist_clamped: bool,
}

/// Prediction at one target point. `headline_*` are present exactly when
/// at least one cell group survived the filters.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub target: GeoPoint,
    pub per_cell: Vec<CellPrediction>,
    pub headline_cell: Option<CellId>,
    pub headline_rsrp_dbm: Option<f64>,
}

#[derive(Serialize)]
struct TargetJson {
    lat: f64,
    lon: f64,
}

#[derive(Serialize)]
struct CellJson<'a> {
    cell_id: &'a str,
    p0_dbm: f64,
    beta: f64,
    degenerate: bool,
    n_points: usize,
    predicted_rsrp_dbm: f64,
}

#[derive(Serialize)]
struct ResultJson<'a> {
    target: TargetJson,
    headline_cell: Option<&'a str>,
    headline_rsrp_dbm: Option<f64>,
    cells: Vec<CellJson<'a>>,
}

impl PredictionResult {
    /// Serializes to the one-line JSON record schema:
    /// `{target:{lat,lon}, headline_cell, headline_rsrp_dbm, cells:[...]}`.
    pub fn to_json_line(&self) -> String {
        let json = ResultJson {
            target: TargetJson {
                lat: self.target.lat_deg,
                lon: self.target.lon_deg,
            },
            headline_cell: self.headline_cell.as_ref().map(|c| c.0.as_str()),
            headline_rsrp_dbm: self.headline_rsrp_dbm,
            cells: self
                .per_cell
                .iter()
                .map(|c| CellJson {
                    cell_id: c.cell_id.0.as_str(),
                    p0_dbm: c.params.p0_dbm,
                    beta: c.params.beta,
                    degenerate: c.params.degenerate,
                    n_points: c.n_points,
                    predicted_rsrp_dbm: c.predicted_rsrp_dbm,
                })
                .collect(),
        };
        serde_json::to_string(&json).expect("prediction fields are finite")
    }
}

/// The fitted model only holds from the 1 m reference distance outward, so
/// the pipeline never feeds the fitter points inside it, whatever the
/// configured minimum distance.
fn pipeline_config(config: &SelectionConfig) -> SelectionConfig {
    SelectionConfig {
        min_dist_to_cell_m: config.min_dist_to_cell_m.max(1.0),
        ..*config
    }
}

fn fit_group(group: &CellGroup, bounds: &FitBounds, fit_kind: FitKind) -> PathLossParams {
    match fit_kind {
        FitKind::Mse => fit_mse(group, bounds),
        // Without per-point sigma estimates the weights are uniform, which
        // shares its minimizer with the MSE objective.
        FitKind::Mle => fit_mle(group, &NoiseWeights::Uniform(1.0), bounds),
    }
    .expect("filtered groups have at least min_points_per_cell >= 2 points")
}

fn predict_group(
    group: &CellGroup,
    target: GeoPoint,
    sites: &SiteDb,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> CellPrediction {
    let params = fit_group(group, bounds, fit_kind);
    let site = sites
        .get(&group.cell_id)
        .expect("groups come from known cells");
    let raw_dist = great_circle_distance(target, site.pos);
    let dist_clamped = raw_dist < 1.0;
    let dist = raw_dist.max(1.0);
    let predicted = predict_rsrp(&params, dist).expect("distance clamped to reference");
    CellPrediction {
        cell_id: group.cell_id.clone(),
        params,
        predicted_rsrp_dbm: predicted,
        n_points: group.len(),
        dist_clamped,
    }
}

/// Predicts RSRP at `target` from the surrounding measurements, one value
/// per surviving cell plus the strongest as headline. Returns an empty
/// result (no headline) when no cell group survives the filters.
pub fn predict_at(
    target: GeoPoint,
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<PredictionResult, SelectionError> {
    predict_at_excluding(target, dataset, sites, config, bounds, fit_kind, None)
}

/// [`predict_at`] with one measurement excluded by id (leave-one-out).
pub fn predict_at_excluding(
    target: GeoPoint,
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
    exclude: Option<MeasurementId>,
) -> Result<PredictionResult, SelectionError> {
    config.validate()?;
    let nbhd = select_neighborhood_excluding(target, dataset, config.radius_m, exclude);
    let groups = group_by_cell(&nbhd, sites)?;
    let surviving = apply_filters(&groups, &pipeline_config(config));

    let per_cell: Vec<CellPrediction> = surviving
        .iter()
        .map(|g| predict_group(g, target, sites, bounds, fit_kind))
        .collect();

    let headline = per_cell
        .iter()
        .fold(None::<&CellPrediction>, |best, c| match best {
            None => Some(c),
            Some(b) => {
                if c.predicted_rsrp_dbm > b.predicted_rsrp_dbm
                    || (c.predicted_rsrp_dbm == b.predicted_rsrp_dbm && c.cell_id < b.cell_id)
                {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        });

    Ok(PredictionResult {
        target,
        headline_cell: headline.map(|c| c.cell_id.clone()),
        headline_rsrp_dbm: headline.map(|c| c.predicted_rsrp_dbm),
        per_cell,
    })
}

/// Runs the same pipeline restricted to one cell's group. `None` when that
/// group does not survive the filters. Errors when `cell_id` has no site.
pub fn predict_for_cell(
    target: GeoPoint,
    cell_id: &CellId,
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
) -> Result<Option<CellPrediction>, SelectionError> {
    predict_for_cell_excluding(
        target, cell_id, dataset, sites, config, bounds, fit_kind, None,
    )
}

/// [`predict_for_cell`] with one measurement excluded by id.
#[allow(clippy::too_many_arguments)]
pub fn predict_for_cell_excluding(
    target: GeoPoint,
    cell_id: &CellId,
    dataset: &DriveTestDataset,
    sites: &SiteDb,
    config: &SelectionConfig,
    bounds: &FitBounds,
    fit_kind: FitKind,
    exclude: Option<MeasurementId>,
) -> Result<Option<CellPrediction>, SelectionError> {
    config.validate()?;
    if sites.get(cell_id).is_none() {
        return Err(SelectionError::UnknownCell(cell_id.clone()));
    }
    let mut nbhd = select_neighborhood_excluding(target, dataset, config.radius_m, exclude);
    nbhd.members.retain(|m| &m.serving_cell == cell_id);
    let groups = group_by_cell(&nbhd, sites)?;
    let surviving = apply_filters(&groups, &pipeline_config(config));
    Ok(surviving
        .first()
        .map(|g| predict_group(g, target, sites, bounds, fit_kind)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, ChannelField, SynthCell, SynthConfig};

    fn two_cell_scene(seed: u64) -> SynthConfig {
        SynthConfig {
            cells: vec![
                SynthCell {
                    cell_id: CellId::from("WEST"),
                    pos: GeoPoint {
                        lat_deg: 35.7060,
                        lon_deg: 51.4000,
                    },
                    p0_dbm: -38.0,
                    beta: 3.0,
                },
                SynthCell {
                    cell_id: CellId::from("EAST"),
                    pos: GeoPoint {
                        lat_deg: 35.7060,
                        lon_deg: 51.4180,
                    },
                    p0_dbm: -45.0,
                    beta: 2.6,
                },
            ],
            route: vec![
                GeoPoint {
                    lat_deg: 35.7000,
                    lon_deg: 51.3950,
                },
                GeoPoint {
                    lat_deg: 35.7000,
                    lon_deg: 51.4230,
                },
            ],
            speed_kmh: 30.0,
            sample_interval_s: 1.0,
            channel: ChannelField::Uniform { sigma_db: 0.0 },
            seed,
        }
    }

    fn defaults() -> (SelectionConfig, FitBounds) {
        (SelectionConfig::default(), FitBounds::default())
    }

    #[test]
    fn empty_region_gives_empty_result() {
        let (ds, sites, _) = generate(&two_cell_scene(1)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        let far = GeoPoint {
            lat_deg: 36.5,
            lon_deg: 52.5,
        };
        let r = predict_at(far, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        assert!(r.per_cell.is_empty());
        assert!(r.headline_cell.is_none());
        assert!(r.headline_rsrp_dbm.is_none());
    }

    #[test]
    fn noiseless_predictions_match_ground_truth() {
        let scene = two_cell_scene(2);
        let (ds, sites, _) = generate(&scene).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();

        // A target on the route, well inside the western segment.
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.4005,
        };
        let r = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        assert!(!r.per_cell.is_empty());
        for c in &r.per_cell {
            let cell = scene.cells.iter().find(|s| s.cell_id == c.cell_id).unwrap();
            let d = great_circle_distance(target, cell.pos).max(1.0);
            let truth = cell.p0_dbm - 10.0 * cell.beta * d.log10();
            assert!(
                (c.predicted_rsrp_dbm - truth).abs() < 1e-6,
                "{}: {} vs {}",
                c.cell_id,
                c.predicted_rsrp_dbm,
                truth
            );
            assert!(!c.params.degenerate);
        }

        // Headline is the truly stronger cell at the target.
        let strongest = scene
            .cells
            .iter()
            .map(|cell| {
                let d = great_circle_distance(target, cell.pos).max(1.0);
                (
                    cell.cell_id.clone(),
                    cell.p0_dbm - 10.0 * cell.beta * d.log10(),
                )
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if r.per_cell.len() == 2 {
            assert_eq!(r.headline_cell.as_ref(), Some(&strongest.0));
        }
    }

    #[test]
    fn single_surviving_cell_is_the_headline() {
        let (ds, sites, _) = generate(&two_cell_scene(3)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        // Near the west end of the route only WEST has points.
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.3960,
        };
        let r = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        assert_eq!(r.per_cell.len(), 1);
        assert_eq!(r.headline_cell, Some(r.per_cell[0].cell_id.clone()));
        assert_eq!(r.headline_rsrp_dbm, Some(r.per_cell[0].predicted_rsrp_dbm));
    }

    #[test]
    fn headline_is_the_max_over_cells() {
        let (ds, sites, _) = generate(&two_cell_scene(4)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        // Mid-route target where both cells can survive.
        for lon in [51.4060, 51.4090, 51.4120] {
            let target = GeoPoint {
                lat_deg: 35.7000,
                lon_deg: lon,
            };
            let r = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
            if let Some(h) = r.headline_rsrp_dbm {
                let max = r
                    .per_cell
                    .iter()
                    .map(|c| c.predicted_rsrp_dbm)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(h, max);
            }
        }
    }

    #[test]
    fn per_cell_and_single_cell_paths_agree_bit_for_bit() {
        let (ds, sites, _) = generate(&two_cell_scene(5)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.4080,
        };
        let r = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        for c in &r.per_cell {
            let single =
                predict_for_cell(target, &c.cell_id, &ds, &sites, &cfg, &bounds, FitKind::Mse)
                    .unwrap()
                    .expect("cell survived in predict_at");
            assert_eq!(&single, c);
        }
    }

    #[test]
    fn unknown_cell_is_an_error() {
        let (ds, sites, _) = generate(&two_cell_scene(6)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.4080,
        };
        assert!(matches!(
            predict_for_cell(
                target,
                &CellId::from("NOPE"),
                &ds,
                &sites,
                &cfg,
                &bounds,
                FitKind::Mse
            ),
            Err(SelectionError::UnknownCell(_))
        ));
    }

    #[test]
    fn filtered_out_cell_gives_none() {
        let (ds, sites, _) = generate(&two_cell_scene(7)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let bounds = FitBounds::default();
        // EAST has no points near the west end of the route.
        let cfg = SelectionConfig::default();
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.3960,
        };
        let r = predict_for_cell(
            target,
            &CellId::from("EAST"),
            &ds,
            &sites,
            &cfg,
            &bounds,
            FitKind::Mse,
        )
        .unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn target_at_a_site_clamps_the_distance() {
        let scene = two_cell_scene(8);
        let (ds, sites, _) = generate(&scene).unwrap();
        let site_pos = sites[0].pos;
        let sites = SiteDb::new(sites).unwrap();
        // Huge radius so the disc still sees the route from the site.
        let cfg = SelectionConfig {
            radius_m: 2000.0,
            ..Default::default()
        };
        let bounds = FitBounds::default();
        let r = predict_at(site_pos, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        let west = r
            .per_cell
            .iter()
            .find(|c| c.cell_id == CellId::from("WEST"))
            .unwrap();
        assert!(west.dist_clamped);
        // At 1 m, prediction equals fitted P0.
        assert_eq!(west.predicted_rsrp_dbm, west.params.p0_dbm);
    }

    #[test]
    fn mle_mode_matches_mse_mode_with_uniform_weights() {
        let (ds, sites, _) = generate(&two_cell_scene(9)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.4010,
        };
        let a = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        let b = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mle).unwrap();
        assert_eq!(a.per_cell.len(), b.per_cell.len());
        for (x, y) in a.per_cell.iter().zip(&b.per_cell) {
            assert!((x.predicted_rsrp_dbm - y.predicted_rsrp_dbm).abs() < 1e-9);
        }
    }

    #[test]
    fn json_line_matches_the_record_schema() {
        let (ds, sites, _) = generate(&two_cell_scene(10)).unwrap();
        let sites = SiteDb::new(sites).unwrap();
        let (cfg, bounds) = defaults();
        let target = GeoPoint {
            lat_deg: 35.7000,
            lon_deg: 51.4005,
        };
        let r = predict_at(target, &ds, &sites, &cfg, &bounds, FitKind::Mse).unwrap();
        let line = r.to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert!(v["target"]["lat"].is_f64());
        assert!(v["target"]["lon"].is_f64());
        assert!(v["cells"].is_array());
        let c = &v["cells"][0];
        for key in [
            "cell_id",
            "p0_dbm",
            "beta",
            "degenerate",
            "n_points",
            "predicted_rsrp_dbm",
        ] {
            assert!(!c[key].is_null(), "missing key {key} in {c}");
        }
    }
}
