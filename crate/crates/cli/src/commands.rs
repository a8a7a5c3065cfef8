//! Implementations of the CLI subcommands.
//!
//! Exit codes: 0 on success, 2 on input error (missing/invalid files,
//! bad parameters), 3 when the run itself succeeds but produces an empty
//! or insufficient result.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rsrp_core::data::{
    load_cell_sites, load_drive_test, write_cell_sites, write_drive_test, DriveTestDataset, SiteDb,
};
use rsrp_core::eval::{
    attach_local_sigma, box_stats, error_vs_sigma, leave_one_out, sweep, write_records_csv,
    write_scatter_csv, write_sweep_csv, BoxStats,
};
use rsrp_core::geo::GeoPoint;
use rsrp_core::predict::predict_at;
use rsrp_core::shadowing::{consecutive_differences, estimate_shadowing};
use rsrp_core::synth::{generate, write_ground_truth};

use crate::config::{provenance_line, KvFile, RunConfig};
use crate::synth_config::synth_config_from;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

fn load_inputs(cfg: &RunConfig) -> Result<(DriveTestDataset, SiteDb)> {
    let dt_path = cfg
        .drive_test
        .as_ref()
        .ok_or_else(|| anyhow!("missing drive-test CSV (use --drive-test)"))?;
    let cell_path = cfg
        .cells
        .as_ref()
        .ok_or_else(|| anyhow!("missing cell-site CSV (use --cells)"))?;
    let dataset = load_drive_test(dt_path)?;
    let sites = SiteDb::new(load_cell_sites(cell_path)?)?;
    Ok((dataset, sites))
}

fn load_dataset_only(cfg: &RunConfig) -> Result<DriveTestDataset> {
    let dt_path = cfg
        .drive_test
        .as_ref()
        .ok_or_else(|| anyhow!("missing drive-test CSV (use --drive-test)"))?;
    Ok(load_drive_test(dt_path)?)
}

fn create_out(path: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output dir {}", path.display()))?;
    let file = path.join(name);
    Ok(BufWriter::new(File::create(&file).with_context(|| {
        format!("cannot create {}", file.display())
    })?))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<i32> {
    let (dataset, sites) = load_inputs(cfg)?;
    let (lat, lon) = match (cfg.target_lat, cfg.target_lon) {
        (Some(lat), Some(lon)) => (lat, lon),
        _ => bail!("missing target coordinates (use --target-lat/--target-lon)"),
    };
    let target =
        GeoPoint::new(lat, lon).ok_or_else(|| anyhow!("target ({lat}, {lon}) out of range"))?;

    let result = predict_at(
        target,
        &dataset,
        &sites,
        &cfg.selection(),
        &cfg.bounds(),
        cfg.fit,
    )?;

    let mut w = create_out(&cfg.out, "prediction.json")?;
    writeln!(w, "# {}", cfg.provenance())?;
    writeln!(w, "{}", result.to_json_line())?;
    w.flush()?;
    println!("wrote {}", cfg.out.join("prediction.json").display());

    if result.headline_cell.is_none() {
        eprintln!("no cell group survived the filters around the target");
        return Ok(EXIT_EMPTY);
    }
    Ok(EXIT_OK)
}

fn summary_row(stats: Option<&BoxStats>) -> String {
    match stats {
        Some(s) => format!(
            "{},{},{},{},{},{}",
            s.mean, s.min, s.q1, s.median, s.q3, s.max
        ),
        None => ",,,,,".to_string(),
    }
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<i32> {
    let (dataset, sites) = load_inputs(cfg)?;
    if dataset.measured_count() < 2 {
        bail!(
            "dataset has {} measured points; leave-one-out needs at least 2",
            dataset.measured_count()
        );
    }

    let mut records = leave_one_out(&dataset, &sites, &cfg.selection(), &cfg.bounds(), cfg.fit)?;
    attach_local_sigma(
        &mut records,
        &dataset,
        cfg.radius_m,
        cfg.l_max_m,
        cfg.pairing_mode(),
    );

    let provenance = cfg.provenance();
    let mut w = create_out(&cfg.out, "eval_records.csv")?;
    write_records_csv(&mut w, &records, Some(&provenance))?;
    w.flush()?;

    let abs: Vec<f64> = records.iter().map(|r| r.error_db.abs()).collect();
    let signed: Vec<f64> = records.iter().map(|r| r.error_db).collect();
    let n_measured = dataset.measured_count();
    let coverage = records.len() as f64 / n_measured as f64;

    let mut w = create_out(&cfg.out, "eval_summary.csv")?;
    writeln!(w, "# {provenance}")?;
    writeln!(
        w,
        "metric,n_records,n_measured,coverage,mean,min,q1,median,q3,max"
    )?;
    writeln!(
        w,
        "abs_error_db,{},{},{},{}",
        records.len(),
        n_measured,
        coverage,
        summary_row(box_stats(&abs).ok().as_ref())
    )?;
    writeln!(
        w,
        "error_db,{},{},{},{}",
        records.len(),
        n_measured,
        coverage,
        summary_row(box_stats(&signed).ok().as_ref())
    )?;
    w.flush()?;

    if let Ok(scatter) = error_vs_sigma(&records) {
        let mut w = create_out(&cfg.out, "eval_scatter.csv")?;
        write_scatter_csv(&mut w, &scatter, Some(&provenance))?;
        w.flush()?;
        println!(
            "sigma/|error| correlation: {:.3}{}",
            scatter.correlation,
            if scatter.degenerate {
                " (degenerate)"
            } else {
                ""
            }
        );
    }

    println!(
        "evaluated {} of {} measured points (coverage {:.3}) -> {}",
        records.len(),
        n_measured,
        coverage,
        cfg.out.join("eval_records.csv").display()
    );

    if records.is_empty() {
        eprintln!("no point was predictable under this configuration");
        return Ok(EXIT_EMPTY);
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let (dataset, sites) = load_inputs(cfg)?;
    if dataset.measured_count() < 2 {
        bail!(
            "dataset has {} measured points; leave-one-out needs at least 2",
            dataset.measured_count()
        );
    }

    let result = sweep(
        &dataset,
        &sites,
        &cfg.radius_list,
        &cfg.min_points_list,
        &cfg.min_dist_list,
        &cfg.bounds(),
        cfg.fit,
    )?;

    let mut w = create_out(&cfg.out, "sweep.csv")?;
    write_sweep_csv(&mut w, &result, Some(&cfg.provenance()))?;
    w.flush()?;
    println!(
        "swept {} combinations -> {}",
        result.cells.len(),
        cfg.out.join("sweep.csv").display()
    );

    if result.cells.iter().all(|c| c.n_records == 0) {
        eprintln!("no grid combination produced a single record");
        return Ok(EXIT_EMPTY);
    }
    Ok(EXIT_OK)
}

pub fn cmd_sigma(cfg: &RunConfig) -> Result<i32> {
    let dataset = load_dataset_only(cfg)?;
    let diffs = consecutive_differences(&dataset, cfg.radius_m, cfg.l_max_m, cfg.pairing_mode());
    if diffs.len() < 2 {
        eprintln!("only {} qualifying pair(s); need at least 2", diffs.len());
        return Ok(EXIT_EMPTY);
    }
    let estimate = estimate_shadowing(&diffs, cfg.alpha)?;

    let mut w = create_out(&cfg.out, "sigma.json")?;
    writeln!(w, "# {}", cfg.provenance())?;
    writeln!(w, "{}", serde_json::to_string(&estimate)?)?;
    w.flush()?;
    println!(
        "sigma = {:.3} dB, {:.0}% CI [{:.3}, {:.3}] from {} pairs -> {}",
        estimate.sigma_db,
        estimate.confidence * 100.0,
        estimate.ci_low_db,
        estimate.ci_high_db,
        estimate.n_pairs,
        cfg.out.join("sigma.json").display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_simulate(config_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<i32> {
    let file = KvFile::load(config_path)?;
    let mut synth = synth_config_from(&file)?;
    if let Some(seed) = seed_override {
        synth.seed = seed;
    }
    let (dataset, sites, truth) = generate(&synth)?;

    let mut canonical: Vec<String> = file
        .entries
        .iter()
        .filter(|(k, _)| k != "seed")
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    canonical.sort();
    canonical.push(format!("seed={}", synth.seed));
    let provenance = provenance_line(&canonical.join("\n"));

    let mut w = create_out(out, "drive_test.csv")?;
    write_drive_test(&mut w, &dataset, Some(&provenance))?;
    w.flush()?;
    let mut w = create_out(out, "cells.csv")?;
    write_cell_sites(&mut w, &sites, Some(&provenance))?;
    w.flush()?;
    let mut w = create_out(out, "ground_truth.csv")?;
    write_ground_truth(&mut w, &truth, Some(&provenance))?;
    w.flush()?;

    println!(
        "simulated {} samples over {} cells -> {}",
        dataset.measurements.len(),
        sites.len(),
        out.display()
    );
    Ok(EXIT_OK)
}
