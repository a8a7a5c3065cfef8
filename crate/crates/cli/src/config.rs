//! Flat `key = value` config files and the effective run configuration.
//!
//! A run is reproducible from its config alone, so every output file is
//! stamped with `# rsrp-oracle <version> config-hash=<hex>` where the hash
//! covers the effective configuration (defaults, then config file, then
//! command-line flags — flags win).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rsrp_core::pathloss::{FitBounds, FitKind};
use rsrp_core::selection::SelectionConfig;
use rsrp_core::shadowing::PairingMode;
use sha2::{Digest, Sha256};

/// Parsed `key = value` file: repeated keys accumulate in order. Blank
/// lines and `#` comments are ignored.
#[derive(Debug, Default)]
pub struct KvFile {
    pub entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("config line {}: expected `key = value`, got `{raw}`", i + 1)
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text)
    }

    /// Last value for a key, or `None`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All values for a repeatable key, in file order.
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }
}

fn parse_as<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| anyhow!("config key `{key}`: cannot parse `{value}`"))
}

pub fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    let out: Result<Vec<T>> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_as::<T>(s, key))
        .collect();
    let out = out?;
    if out.is_empty() {
        bail!("config key `{key}`: empty list");
    }
    Ok(out)
}

pub fn parse_fit(value: &str) -> Result<FitKind> {
    match value {
        "mse" => Ok(FitKind::Mse),
        "mle" => Ok(FitKind::Mle),
        other => bail!("fit must be `mse` or `mle`, got `{other}`"),
    }
}

/// Effective configuration of a batch run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub drive_test: Option<PathBuf>,
    pub cells: Option<PathBuf>,
    pub out: PathBuf,
    pub radius_m: f64,
    pub min_points: usize,
    pub min_dist_m: f64,
    pub fit: FitKind,
    pub p0_low: f64,
    pub p0_high: f64,
    pub beta_low: f64,
    pub beta_high: f64,
    pub alpha: f64,
    pub l_max_m: f64,
    pub non_overlapping_pairs: bool,
    pub radius_list: Vec<f64>,
    pub min_points_list: Vec<usize>,
    pub min_dist_list: Vec<f64>,
    pub seed: u64,
    pub target_lat: Option<f64>,
    pub target_lon: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            drive_test: None,
            cells: None,
            out: PathBuf::from("out"),
            radius_m: 50.0,
            min_points: 8,
            min_dist_m: 10.0,
            fit: FitKind::Mse,
            p0_low: -90.0,
            p0_high: -10.0,
            beta_low: 1.5,
            beta_high: 6.5,
            alpha: 0.05,
            l_max_m: 15.0,
            non_overlapping_pairs: false,
            radius_list: vec![50.0, 100.0, 200.0, 400.0],
            min_points_list: vec![8, 10, 12, 14],
            min_dist_list: vec![10.0, 15.0, 20.0, 25.0],
            seed: 0,
            target_lat: None,
            target_lon: None,
        }
    }
}

const RUN_KEYS: &[&str] = &[
    "drive_test",
    "cells",
    "out",
    "radius_m",
    "min_points",
    "min_dist_m",
    "fit",
    "p0_low",
    "p0_high",
    "beta_low",
    "beta_high",
    "alpha",
    "l_max_m",
    "non_overlapping_pairs",
    "radius_list",
    "min_points_list",
    "min_dist_list",
    "seed",
    "target_lat",
    "target_lon",
];

impl RunConfig {
    /// Applies a config file on top of the current values. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn apply_file(&mut self, file: &KvFile) -> Result<()> {
        for (key, value) in &file.entries {
            if !RUN_KEYS.contains(&key.as_str()) {
                bail!("unknown config key `{key}`");
            }
            match key.as_str() {
                "drive_test" => self.drive_test = Some(PathBuf::from(value)),
                "cells" => self.cells = Some(PathBuf::from(value)),
                "out" => self.out = PathBuf::from(value),
                "radius_m" => self.radius_m = parse_as(value, key)?,
                "min_points" => self.min_points = parse_as(value, key)?,
                "min_dist_m" => self.min_dist_m = parse_as(value, key)?,
                "fit" => self.fit = parse_fit(value)?,
                "p0_low" => self.p0_low = parse_as(value, key)?,
                "p0_high" => self.p0_high = parse_as(value, key)?,
                "beta_low" => self.beta_low = parse_as(value, key)?,
                "beta_high" => self.beta_high = parse_as(value, key)?,
                "alpha" => self.alpha = parse_as(value, key)?,
                "l_max_m" => self.l_max_m = parse_as(value, key)?,
                "non_overlapping_pairs" => self.non_overlapping_pairs = parse_as(value, key)?,
                "radius_list" => self.radius_list = parse_list(value, key)?,
                "min_points_list" => self.min_points_list = parse_list(value, key)?,
                "min_dist_list" => self.min_dist_list = parse_list(value, key)?,
                "seed" => self.seed = parse_as(value, key)?,
                "target_lat" => self.target_lat = Some(parse_as(value, key)?),
                "target_lon" => self.target_lon = Some(parse_as(value, key)?),
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            radius_m: self.radius_m,
            min_points_per_cell: self.min_points,
            min_dist_to_cell_m: self.min_dist_m,
        }
    }

    pub fn bounds(&self) -> FitBounds {
        FitBounds {
            p0_low: self.p0_low,
            p0_high: self.p0_high,
            beta_low: self.beta_low,
            beta_high: self.beta_high,
        }
    }

    pub fn pairing_mode(&self) -> PairingMode {
        if self.non_overlapping_pairs {
            PairingMode::Disjoint
        } else {
            PairingMode::Overlapping
        }
    }

    /// Canonical one-key-per-line rendering used for the config hash.
    pub fn canonical(&self) -> String {
        fn join<T: std::fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let opt_f64 = |v: &Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "beta_high={}", self.beta_high);
        let _ = writeln!(s, "beta_low={}", self.beta_low);
        let _ = writeln!(s, "cells={}", opt_path(&self.cells));
        let _ = writeln!(s, "drive_test={}", opt_path(&self.drive_test));
        let _ = writeln!(s, "fit={}", self.fit);
        let _ = writeln!(s, "l_max_m={}", self.l_max_m);
        let _ = writeln!(s, "min_dist_list={}", join(&self.min_dist_list));
        let _ = writeln!(s, "min_dist_m={}", self.min_dist_m);
        let _ = writeln!(s, "min_points={}", self.min_points);
        let _ = writeln!(s, "min_points_list={}", join(&self.min_points_list));
        let _ = writeln!(s, "non_overlapping_pairs={}", self.non_overlapping_pairs);
        let _ = writeln!(s, "p0_high={}", self.p0_high);
        let _ = writeln!(s, "p0_low={}", self.p0_low);
        let _ = writeln!(s, "radius_list={}", join(&self.radius_list));
        let _ = writeln!(s, "radius_m={}", self.radius_m);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "target_lat={}", opt_f64(&self.target_lat));
        let _ = writeln!(s, "target_lon={}", opt_f64(&self.target_lon));
        s
    }

    /// Provenance line stamped on every output file.
    pub fn provenance(&self) -> String {
        provenance_line(&self.canonical())
    }
}

/// `rsrp-oracle <version> config-hash=<hex>` over arbitrary canonical text.
pub fn provenance_line(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!(
        "rsrp-oracle {} config-hash={hex}",
        env!("CARGO_PKG_VERSION")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides_in_order() {
        let file = KvFile::parse(
            "# comment\nradius_m = 75\nfit = mle\nradius_m = 80\nmin_points_list = 8, 10\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&file).unwrap();
        assert_eq!(cfg.radius_m, 80.0);
        assert_eq!(cfg.fit, FitKind::Mle);
        assert_eq!(cfg.min_points_list, vec![8, 10]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let file = KvFile::parse("radiusm = 75\n").unwrap();
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_file(&file).is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(KvFile::parse("radius_m 75\n").is_err());
        assert!(KvFile::parse("fit = nonsense\n")
            .map(|f| RunConfig::default().apply_file(&f))
            .unwrap()
            .is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.provenance(), b.provenance());
        b.radius_m = 51.0;
        assert_ne!(a.provenance(), b.provenance());
    }

    #[test]
    fn repeated_keys_accumulate() {
        let file = KvFile::parse("cell = a\ncell = b\n").unwrap();
        assert_eq!(file.get_all("cell"), vec!["a", "b"]);
        assert_eq!(file.get("cell"), Some("b"));
    }
}
