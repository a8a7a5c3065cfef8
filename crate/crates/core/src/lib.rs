//! RSRP prediction from LTE drive-test measurements.
//!
//! Given a set of geolocated RSRP samples and the positions of the serving
//! cells, this crate predicts the received power at unmeasured locations by
//! fitting a log-distance path-loss model per serving cell over the points
//! inside a disc around the target. It also estimates the shadowing-noise
//! standard deviation blindly (without cell positions) from differences of
//! consecutive measurements, and evaluates prediction accuracy through
//! leave-one-out parameter sweeps.
//!
//! Pipeline: [`selection`] builds the disc and per-cell groups, [`pathloss`]
//! fits `(P0, beta)` per cell by box-constrained least squares, [`predict`]
//! composes the two into point predictions, [`eval`] scores them, and
//! [`synth`] generates ground-truth scenes for testing.

pub mod data;
pub mod eval;
pub mod geo;
pub mod pathloss;
pub mod predict;
pub mod selection;
pub mod shadowing;
pub mod synth;

pub use data::{CellId, CellSite, DriveTestDataset, Measurement, SiteDb};
pub use geo::GeoPoint;
pub use pathloss::{FitBounds, FitKind, PathLossParams};
pub use selection::SelectionConfig;
