//! `rsrp-oracle`: predict LTE RSRP at unmeasured locations from drive-test
//! data, estimate shadowing noise blindly, and evaluate accuracy through
//! leave-one-out parameter sweeps.

mod commands;
mod config;
mod synth_config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{cmd_evaluate, cmd_predict, cmd_sigma, cmd_simulate, cmd_sweep, EXIT_INPUT};
use config::{parse_fit, parse_list, KvFile, RunConfig};

#[derive(Parser)]
#[command(
    name = "rsrp-oracle",
    version,
    about = "RSRP prediction and shadowing analysis for LTE drive tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the batch commands; every flag overrides the matching
/// config-file key.
#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// Drive-test CSV (`timestamp_ms,lat_deg,lon_deg,rsrp_dbm,cell_id`)
    #[arg(long, value_name = "PATH")]
    drive_test: Option<PathBuf>,
    /// Cell-site CSV (`cell_id,lat_deg,lon_deg`)
    #[arg(long, value_name = "PATH")]
    cells: Option<PathBuf>,
    /// Flat `key = value` config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Disc radius R in meters
    #[arg(long)]
    radius_m: Option<f64>,
    /// Minimum points per cell group
    #[arg(long)]
    min_points: Option<usize>,
    /// Minimum measurement-to-antenna distance in meters
    #[arg(long)]
    min_dist_m: Option<f64>,
    /// Fit objective: mse | mle
    #[arg(long)]
    fit: Option<String>,
    /// Confidence-interval alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Displacement cap for shadowing pairs, meters
    #[arg(long)]
    l_max_m: Option<f64>,
    /// Use disjoint (1,2),(3,4),... pairs instead of overlapping ones
    #[arg(long)]
    non_overlapping_pairs: bool,
    /// Run seed (recorded in the provenance hash)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Predict RSRP at one target point, one value per surviving cell
    Predict {
        #[command(flatten)]
        common: CommonOpts,
        /// Target latitude in degrees
        #[arg(long)]
        target_lat: Option<f64>,
        /// Target longitude in degrees
        #[arg(long)]
        target_lon: Option<f64>,
    },
    /// Leave-one-out evaluation with per-point records and summary stats
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Leave-one-out over the full radius x min-points x min-dist grid
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Radius axis, comma separated meters
        #[arg(long, value_name = "LIST")]
        radius_list: Option<String>,
        /// Min-points axis, comma separated
        #[arg(long, value_name = "LIST")]
        min_points_list: Option<String>,
        /// Min-distance axis, comma separated meters
        #[arg(long, value_name = "LIST")]
        min_dist_list: Option<String>,
    },
    /// Blind shadowing-noise estimate with confidence interval
    Sigma {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Generate a synthetic drive test with ground truth
    Simulate {
        /// Synthetic-scene config file
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
        /// Override the config file's seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Defaults, then config file, then flags.
fn effective_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(&KvFile::load(path)?)?;
    }
    if let Some(v) = &common.drive_test {
        cfg.drive_test = Some(v.clone());
    }
    if let Some(v) = &common.cells {
        cfg.cells = Some(v.clone());
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.radius_m {
        cfg.radius_m = v;
    }
    if let Some(v) = common.min_points {
        cfg.min_points = v;
    }
    if let Some(v) = common.min_dist_m {
        cfg.min_dist_m = v;
    }
    if let Some(v) = &common.fit {
        cfg.fit = parse_fit(v)?;
    }
    if let Some(v) = common.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = common.l_max_m {
        cfg.l_max_m = v;
    }
    if common.non_overlapping_pairs {
        cfg.non_overlapping_pairs = true;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Predict {
            common,
            target_lat,
            target_lon,
        } => {
            let mut cfg = effective_config(&common)?;
            if target_lat.is_some() {
                cfg.target_lat = target_lat;
            }
            if target_lon.is_some() {
                cfg.target_lon = target_lon;
            }
            cmd_predict(&cfg)
        }
        Command::Evaluate { common } => cmd_evaluate(&effective_config(&common)?),
        Command::Sweep {
            common,
            radius_list,
            min_points_list,
            min_dist_list,
        } => {
            let mut cfg = effective_config(&common)?;
            if let Some(v) = &radius_list {
                cfg.radius_list = parse_list(v, "radius_list")?;
            }
            if let Some(v) = &min_points_list {
                cfg.min_points_list = parse_list(v, "min_points_list")?;
            }
            if let Some(v) = &min_dist_list {
                cfg.min_dist_list = parse_list(v, "min_dist_list")?;
            }
            cmd_sweep(&cfg)
        }
        Command::Sigma { common } => cmd_sigma(&effective_config(&common)?),
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
