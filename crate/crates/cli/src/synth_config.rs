//! Synthetic-scene config files for the `simulate` command.
//!
//! Flat `key = value` format. `cell` is repeatable with the value
//! `id,lat_deg,lon_deg,p0_dbm,beta`; `route` is a whitespace-separated
//! polyline of `lat:lon` pairs. The channel is uniform (`sigma_db`) unless
//! `zone_boundary_lon_deg` is set, in which case the `west_*`/`east_*`
//! keys give per-zone sigma and `(P0, beta)` offsets.
//!
//! ```text
//! seed = 42
//! speed_kmh = 30
//! sample_interval_s = 1
//! sigma_db = 4
//! cell = C1,35.7050,51.4000,-40,3.5
//! route = 35.7000:51.4000 35.7000:51.4200
//! ```

use anyhow::{anyhow, bail, Result};
use rsrp_core::data::CellId;
use rsrp_core::geo::GeoPoint;
use rsrp_core::synth::{ChannelField, SynthCell, SynthConfig, ZoneParams};

use crate::config::KvFile;

const SYNTH_KEYS: &[&str] = &[
    "seed",
    "speed_kmh",
    "sample_interval_s",
    "sigma_db",
    "cell",
    "route",
    "zone_boundary_lon_deg",
    "west_sigma_db",
    "east_sigma_db",
    "west_p0_offset_db",
    "east_p0_offset_db",
    "west_beta_offset",
    "east_beta_offset",
];

fn parse_f64(v: &str, key: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| anyhow!("synth key `{key}`: cannot parse `{v}`"))
}

fn parse_cell(value: &str) -> Result<SynthCell> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        bail!("cell must be `id,lat_deg,lon_deg,p0_dbm,beta`, got `{value}`");
    }
    let lat = parse_f64(parts[1], "cell.lat")?;
    let lon = parse_f64(parts[2], "cell.lon")?;
    let pos =
        GeoPoint::new(lat, lon).ok_or_else(|| anyhow!("cell position out of range: {value}"))?;
    Ok(SynthCell {
        cell_id: CellId::from(parts[0]),
        pos,
        p0_dbm: parse_f64(parts[3], "cell.p0_dbm")?,
        beta: parse_f64(parts[4], "cell.beta")?,
    })
}

fn parse_route(value: &str) -> Result<Vec<GeoPoint>> {
    value
        .split_whitespace()
        .map(|pair| {
            let (lat, lon) = pair
                .split_once(':')
                .ok_or_else(|| anyhow!("route point must be `lat:lon`, got `{pair}`"))?;
            GeoPoint::new(parse_f64(lat, "route.lat")?, parse_f64(lon, "route.lon")?)
                .ok_or_else(|| anyhow!("route point out of range: `{pair}`"))
        })
        .collect()
}

/// Builds a generator config from a parsed key-value file.
pub fn synth_config_from(file: &KvFile) -> Result<SynthConfig> {
    for (key, _) in &file.entries {
        if !SYNTH_KEYS.contains(&key.as_str()) {
            bail!("unknown synth config key `{key}`");
        }
    }

    let cells: Result<Vec<SynthCell>> = file.get_all("cell").into_iter().map(parse_cell).collect();
    let cells = cells?;
    if cells.is_empty() {
        bail!("synth config needs at least one `cell`");
    }
    let route = parse_route(
        file.get("route")
            .ok_or_else(|| anyhow!("synth config needs `route`"))?,
    )?;

    let channel = if let Some(boundary) = file.get("zone_boundary_lon_deg") {
        let zone = |prefix: &str| -> Result<ZoneParams> {
            let get = |suffix: &str, default: f64| -> Result<f64> {
                file.get(&format!("{prefix}_{suffix}"))
                    .map(|v| parse_f64(v, suffix))
                    .unwrap_or(Ok(default))
            };
            Ok(ZoneParams {
                sigma_db: get("sigma_db", 0.0)?,
                p0_offset_db: get("p0_offset_db", 0.0)?,
                beta_offset: get("beta_offset", 0.0)?,
            })
        };
        ChannelField::SplitLon {
            boundary_lon_deg: parse_f64(boundary, "zone_boundary_lon_deg")?,
            west: zone("west")?,
            east: zone("east")?,
        }
    } else {
        ChannelField::Uniform {
            sigma_db: file
                .get("sigma_db")
                .map(|v| parse_f64(v, "sigma_db"))
                .unwrap_or(Ok(0.0))?,
        }
    };

    Ok(SynthConfig {
        cells,
        route,
        speed_kmh: file
            .get("speed_kmh")
            .map(|v| parse_f64(v, "speed_kmh"))
            .unwrap_or(Ok(30.0))?,
        sample_interval_s: file
            .get("sample_interval_s")
            .map(|v| parse_f64(v, "sample_interval_s"))
            .unwrap_or(Ok(1.0))?,
        channel,
        seed: file
            .get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| anyhow!("synth key `seed`: cannot parse `{v}`"))
            })
            .unwrap_or(Ok(0))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_uniform_scene() {
        let file = KvFile::parse(
            "seed = 7\nspeed_kmh = 25\nsample_interval_s = 0.5\nsigma_db = 4\n\
             cell = C1,35.705,51.400,-40,3.5\ncell = C2,35.705,51.420,-45,2.8\n\
             route = 35.700:51.400 35.700:51.420\n",
        )
        .unwrap();
        let cfg = synth_config_from(&file).unwrap();
        assert_eq!(cfg.cells.len(), 2);
        assert_eq!(cfg.route.len(), 2);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.channel, ChannelField::Uniform { sigma_db: 4.0 });
    }

    #[test]
    fn parses_a_zoned_scene() {
        let file = KvFile::parse(
            "cell = C1,35.705,51.400,-40,3.5\nroute = 35.700:51.400 35.700:51.420\n\
             zone_boundary_lon_deg = 51.410\nwest_sigma_db = 2\neast_sigma_db = 8\n\
             east_p0_offset_db = -12\n",
        )
        .unwrap();
        let cfg = synth_config_from(&file).unwrap();
        match cfg.channel {
            ChannelField::SplitLon {
                boundary_lon_deg,
                west,
                east,
            } => {
                assert_eq!(boundary_lon_deg, 51.410);
                assert_eq!(west.sigma_db, 2.0);
                assert_eq!(east.sigma_db, 8.0);
                assert_eq!(east.p0_offset_db, -12.0);
                assert_eq!(west.p0_offset_db, 0.0);
            }
            other => panic!("expected SplitLon, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        let no_cell = KvFile::parse("route = 35.7:51.4 35.7:51.42\n").unwrap();
        assert!(synth_config_from(&no_cell).is_err());

        let bad_cell =
            KvFile::parse("cell = C1,35.705,51.400\nroute = 35.7:51.4 35.7:51.42\n").unwrap();
        assert!(synth_config_from(&bad_cell).is_err());

        let bad_key =
            KvFile::parse("cell = C1,35.705,51.400,-40,3\nroute = 1:2 3:4\nspeed = 1\n").unwrap();
        assert!(synth_config_from(&bad_key).is_err());
    }
}
