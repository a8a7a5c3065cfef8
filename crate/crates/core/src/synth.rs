//! Deterministic synthetic drive-test generator with known ground truth.
//!
//! Samples are placed along a polyline route at constant speed, each one
//! served by the cell with the strongest true mean RSRP and corrupted by
//! i.i.d. Gaussian shadowing noise. The noise stream comes from a seeded
//! ChaCha12 PRNG through the Box-Muller transform (one `(u1, u2)` pair per
//! sample, `z = sqrt(-2 ln u1) * cos(2 pi u2)`), so a given seed always
//! reproduces the same dataset byte for byte. An optional longitude split
//! varies the channel by zone: per-zone noise sigma and per-zone offsets on
//! `(P0, beta)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::data::{CellId, CellSite, DriveTestDataset, MeasurementId};
use crate::geo::{great_circle_distance, GeoPoint};

/// A transmitter with its true channel parameters.
#[derive(Debug, Clone)]
pub struct SynthCell {
    pub cell_id: CellId,
    pub pos: GeoPoint,
    pub p0_dbm: f64,
    pub beta: f64,
}

/// Per-zone channel modifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneParams {
    /// Shadowing standard deviation in this zone, dB.
    pub sigma_db: f64,
    /// Added to every cell's `P0` for receivers in this zone.
    pub p0_offset_db: f64,
    /// Added to every cell's `beta` for receivers in this zone.
    pub beta_offset: f64,
}

impl ZoneParams {
    pub fn uniform(sigma_db: f64) -> Self {
        Self {
            sigma_db,
            p0_offset_db: 0.0,
            beta_offset: 0.0,
        }
    }
}

/// Spatial channel structure: a single environment, or two half-planes
/// split at a longitude with their own noise and parameter offsets.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelField {
    Uniform {
        sigma_db: f64,
    },
    SplitLon {
        boundary_lon_deg: f64,
        west: ZoneParams,
        east: ZoneParams,
    },
}

impl ChannelField {
    fn zone_at(&self, pos: GeoPoint) -> ZoneParams {
        match *self {
            ChannelField::Uniform { sigma_db } => ZoneParams::uniform(sigma_db),
            ChannelField::SplitLon {
                boundary_lon_deg,
                west,
                east,
            } => {
                if pos.lon_deg < boundary_lon_deg {
                    west
                } else {
                    east
                }
            }
        }
    }
}

/// Generator configuration.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub cells: Vec<SynthCell>,
    /// Polyline the virtual vehicle drives, at least two points.
    pub route: Vec<GeoPoint>,
    /// Constant speed, km/h, at most 40 (drive tests are slow drives).
    pub speed_kmh: f64,
    /// Sampling interval in seconds.
    pub sample_interval_s: f64,
    pub channel: ChannelField,
    pub seed: u64,
}

/// Per-sample ground truth retained by the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub point_id: MeasurementId,
    pub true_mean_dbm: f64,
    pub noise_db: f64,
    /// Distance to the serving cell, clamped to the 1 m reference distance.
    pub true_dist_m: f64,
    pub serving_cell: CellId,
}

/// Ground truth for a generated dataset, index-aligned with it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("route yields {0} samples; at least 2 are required")]
    RouteTooShort(usize),
    #[error("invalid synth config: {0}")]
    InvalidConfig(&'static str),
}

fn validate(config: &SynthConfig) -> Result<(), SynthError> {
    if config.cells.is_empty() {
        return Err(SynthError::InvalidConfig("at least one cell is required"));
    }
    if config.route.len() < 2 {
        return Err(SynthError::InvalidConfig("route needs at least two points"));
    }
    if config.speed_kmh.is_nan() || config.speed_kmh <= 0.0 || config.speed_kmh > 40.0 {
        return Err(SynthError::InvalidConfig("speed_kmh must be in (0, 40]"));
    }
    if config.sample_interval_s.is_nan() || config.sample_interval_s <= 0.0 {
        return Err(SynthError::InvalidConfig("sample_interval_s must be > 0"));
    }
    for c in &config.cells {
        if !c.p0_dbm.is_finite() || !c.beta.is_finite() || !c.pos.is_valid() {
            return Err(SynthError::InvalidConfig(
                "cell parameters must be finite and valid",
            ));
        }
    }
    let sigma_ok = |z: &ZoneParams| z.sigma_db >= 0.0 && z.sigma_db.is_finite();
    let ok = match &config.channel {
        ChannelField::Uniform { sigma_db } => *sigma_db >= 0.0 && sigma_db.is_finite(),
        ChannelField::SplitLon { west, east, .. } => sigma_ok(west) && sigma_ok(east),
    };
    if !ok {
        return Err(SynthError::InvalidConfig(
            "sigma_db must be finite and >= 0",
        ));
    }
    Ok(())
}

/// Positions along the polyline at `step_m` spacing, starting at its first
/// vertex. Interpolation is linear in degrees within a segment, which stays
/// within 0.1% of great-circle spacing at drive-test scales.
fn walk_route(route: &[GeoPoint], step_m: f64) -> Vec<GeoPoint> {
    let seg_len: Vec<f64> = route
        .windows(2)
        .map(|w| great_circle_distance(w[0], w[1]))
        .collect();
    let total: f64 = seg_len.iter().sum();

    let n_samples = (total / step_m).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut s = k as f64 * step_m;
        let mut seg = 0;
        while seg < seg_len.len() - 1 && s > seg_len[seg] {
            s -= seg_len[seg];
            seg += 1;
        }
        let t = if seg_len[seg] > 0.0 {
            (s / seg_len[seg]).min(1.0)
        } else {
            0.0
        };
        let (a, b) = (route[seg], route[seg + 1]);
        out.push(GeoPoint {
            lat_deg: a.lat_deg + t * (b.lat_deg - a.lat_deg),
            lon_deg: a.lon_deg + t * (b.lon_deg - a.lon_deg),
        });
    }
    out
}

/// Box-Muller standard normal draw; `u1` is mapped into `(0, 1]` so the log
/// never sees zero.
fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates the dataset, the matching cell-site list, and per-sample
/// ground truth. Fully deterministic for a given config.
pub fn generate(
    config: &SynthConfig,
) -> Result<(DriveTestDataset, Vec<CellSite>, GroundTruth), SynthError> {
    validate(config)?;

    let step_m = config.speed_kmh / 3.6 * config.sample_interval_s;
    let positions = walk_route(&config.route, step_m);
    if positions.len() < 2 {
        return Err(SynthError::RouteTooShort(positions.len()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(positions.len());
    let mut truth = Vec::with_capacity(positions.len());

    for (i, &pos) in positions.iter().enumerate() {
        let zone = config.channel.zone_at(pos);

        // Serving cell: strongest true mean RSRP, first cell wins ties.
        let mut best: Option<(usize, f64, f64)> = None;
        for (ci, cell) in config.cells.iter().enumerate() {
            let d = great_circle_distance(pos, cell.pos).max(1.0);
            let mean = (cell.p0_dbm + zone.p0_offset_db)
                - 10.0 * (cell.beta + zone.beta_offset) * d.log10();
            if best.is_none_or(|(_, m, _)| mean > m) {
                best = Some((ci, mean, d));
            }
        }
        let (ci, mean, dist) = best.expect("at least one cell");
        let noise = standard_normal(&mut rng) * zone.sigma_db;
        let rsrp = mean + noise;

        let timestamp_ms = (i as f64 * config.sample_interval_s * 1000.0).round() as i64;
        records.push((
            timestamp_ms,
            pos,
            Some(rsrp),
            config.cells[ci].cell_id.clone(),
        ));
        truth.push(TruthRecord {
            point_id: i as MeasurementId,
            true_mean_dbm: mean,
            noise_db: noise,
            true_dist_m: dist,
            serving_cell: config.cells[ci].cell_id.clone(),
        });
    }

    let dataset = DriveTestDataset::from_records(records, format!("synth:seed={}", config.seed));
    let sites = config
        .cells
        .iter()
        .map(|c| CellSite {
            cell_id: c.cell_id.clone(),
            pos: c.pos,
        })
        .collect();
    Ok((dataset, sites, GroundTruth { records: truth }))
}

/// Writes the ground-truth sidecar CSV:
/// `point_id,true_mean_dbm,noise_db,true_dist_m,serving_cell`.
pub fn write_ground_truth<W: Write>(
    mut w: W,
    truth: &GroundTruth,
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "point_id,true_mean_dbm,noise_db,true_dist_m,serving_cell"
    )?;
    for t in &truth.records {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.point_id, t.true_mean_dbm, t.noise_db, t.true_dist_m, t.serving_cell
        )?;
    }
    Ok(())
}
