//! Neighborhood selection and per-cell grouping.
//!
//! A prediction at a target point uses only the measured points strictly
//! inside a disc of radius `R` around it. Those points are partitioned by
//! serving cell, each point tagged with its great-circle distance to the
//! cell site, and two admission filters run: drop points closer to the
//! antenna than a minimum distance (points inside the far-field boundary
//! are not modeled well), then drop whole groups that are left with too few
//! points to fit.

use thiserror::Error;

use crate::data::{CellId, DriveTestDataset, Measurement, MeasurementId, SiteDb};
use crate::geo::{great_circle_distance, GeoPoint};

/// Parameters of the point-selection stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Disc radius `R` in meters (membership is strict: `d < R`).
    pub radius_m: f64,
    /// Minimum surviving points for a cell group to be kept.
    pub min_points_per_cell: usize,
    /// Minimum measurement-to-antenna distance in meters.
    pub min_dist_to_cell_m: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            radius_m: 50.0,
            min_points_per_cell: 8,
            min_dist_to_cell_m: 10.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.radius_m.is_nan() || self.radius_m <= 0.0 {
            return Err(SelectionError::InvalidConfig("radius_m must be > 0"));
        }
        if self.min_points_per_cell < 2 {
            return Err(SelectionError::InvalidConfig(
                "min_points_per_cell must be >= 2",
            ));
        }
        if self.min_dist_to_cell_m.is_nan() || self.min_dist_to_cell_m < 0.0 {
            return Err(SelectionError::InvalidConfig(
                "min_dist_to_cell_m must be >= 0",
            ));
        }
        Ok(())
    }
}

/// The measured points strictly inside the disc around `target`.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub target: GeoPoint,
    pub radius_m: f64,
    pub members: Vec<Measurement>,
}

/// One cell's share of a neighborhood: the member measurements served by
/// `cell_id`, each with its distance to that cell's site.
#[derive(Debug, Clone)]
pub struct CellGroup {
    pub cell_id: CellId,
    pub points: Vec<(Measurement, f64)>,
}

impl CellGroup {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("serving cell `{0}` has no site record")]
    UnknownCell(CellId),
    #[error("invalid selection config: {0}")]
    InvalidConfig(&'static str),
}

/// Collects the measurements with an RSRP value strictly inside the disc.
/// Points without RSRP never qualify.
pub fn select_neighborhood(
    target: GeoPoint,
    dataset: &DriveTestDataset,
    radius_m: f64,
) -> Neighborhood {
    select_neighborhood_excluding(target, dataset, radius_m, None)
}

/// [`select_neighborhood`] with one measurement excluded by id — used by
/// leave-one-out so the held-out point never predicts itself. Exclusion is
/// by id, not coordinates: co-located duplicate samples stay in.
pub fn select_neighborhood_excluding(
    target: GeoPoint,
    dataset: &DriveTestDataset,
    radius_m: f64,
    exclude: Option<MeasurementId>,
) -> Neighborhood {
    let members = dataset
        .measurements
        .iter()
        .filter(|m| m.rsrp_dbm.is_some())
        .filter(|m| Some(m.id) != exclude)
        .filter(|m| great_circle_distance(m.pos, target) < radius_m)
        .cloned()
        .collect();
    Neighborhood {
        target,
        radius_m,
        members,
    }
}

/// Partitions the neighborhood by serving cell. Groups appear in order of
/// first appearance in `nbhd.members`, and each point carries its distance
/// to the serving cell's site.
pub fn group_by_cell(
    nbhd: &Neighborhood,
    sites: &SiteDb,
) -> Result<Vec<CellGroup>, SelectionError> {
    let mut groups: Vec<CellGroup> = Vec::new();
    let mut index: std::collections::HashMap<CellId, usize> = std::collections::HashMap::new();

    for m in &nbhd.members {
        let site = sites
            .get(&m.serving_cell)
            .ok_or_else(|| SelectionError::UnknownCell(m.serving_cell.clone()))?;
        let dist = great_circle_distance(m.pos, site.pos);
        let slot = *index.entry(m.serving_cell.clone()).or_insert_with(|| {
            groups.push(CellGroup {
                cell_id: m.serving_cell.clone(),
                points: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].points.push((m.clone(), dist));
    }
    Ok(groups)
}

/// Applies the two admission filters, distance first: points closer to the
/// antenna than `min_dist_to_cell_m` are removed, then groups with fewer
/// than `min_points_per_cell` surviving points are dropped entirely.
pub fn apply_filters(groups: &[CellGroup], config: &SelectionConfig) -> Vec<CellGroup> {
    groups
        .iter()
        .filter_map(|g| {
            let points: Vec<_> = g
                .points
                .iter()
                .filter(|(_, d)| *d >= config.min_dist_to_cell_m)
                .cloned()
                .collect();
            (points.len() >= config.min_points_per_cell).then(|| CellGroup {
                cell_id: g.cell_id.clone(),
                points,
            })
        })
        .collect()
}
