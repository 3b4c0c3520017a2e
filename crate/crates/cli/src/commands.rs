use std::io::Write;
use std::path::Path;

use manifold_spc::pipelines::{
    run_monitor, MfMonitor, MlMonitor, MonitorRun, Procedure, StudyCell,
};
use manifold_spc::processes::{
    format_value, generate_sphere_process, inject_mean_shift, load_series_csv, write_rows_csv,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot;

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// `out` with its extension replaced by `json`.
pub fn sidecar(out: &Path) -> std::path::PathBuf {
    out.with_extension("json")
}

fn column_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

pub fn generate(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut sphere = RunConfig::require(&cfg.sphere, "sphere")?.clone();
    if let Some(s) = seed.or(cfg.seed) {
        sphere.seed = s;
    }
    sphere.validate()?;
    let mut series = generate_sphere_process(&sphere)?;
    if let Some(shift) = &cfg.shift {
        if shift.delta.len() != sphere.ambient_dim {
            return Err(CliError::Validation(format!(
                "shift.delta has {} entries, expected ambient_dim = {}",
                shift.delta.len(),
                sphere.ambient_dim
            )));
        }
        series = inject_mean_shift(series, shift.tau, &shift.delta)?;
    }
    let mut w = create(out)?;
    write_rows_csv(&mut w, Some(&column_header(sphere.ambient_dim)), &series.observations)?;
    w.flush().map_err(|e| CliError::io(out, e))?;
    write_json(
        &sidecar(out),
        &json!({
            "seed": sphere.seed,
            "n": series.len(),
            "dim": series.dim(),
            "tau": series.change_point,
            "delta": series.shift,
            "sphere": sphere,
        }),
    )
}

pub struct MonitorArgs<'a> {
    pub phase1: &'a Path,
    pub phase2: &'a Path,
    pub out: &'a Path,
    pub method: Option<Procedure>,
    pub seed: Option<u64>,
}

fn write_trace(path: &Path, run: &MonitorRun) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(["n", "statistic", "limit", "alarm"]).map_err(err)?;
    for s in &run.trace {
        w.write_record([
            s.n.to_string(),
            format_value(s.statistic),
            format_value(s.limit),
            s.alarm.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn monitor(cfg: &RunConfig, args: MonitorArgs<'_>) -> Result<MonitorRun, CliError> {
    let load = |p: &Path| load_series_csv(p).map_err(|e| match e {
        manifold_spc::Error::Io(io) => CliError::io(p, io),
        other => CliError::from(other),
    });
    let phase1 = load(args.phase1)?.observations;
    let phase2 = load(args.phase2)?.observations;
    if phase2.is_empty() {
        return Err(CliError::Validation("phase2 has no observations".into()));
    }
    let method = args.method.or(cfg.method).unwrap_or(Procedure::Mf);
    let split = cfg.split.unwrap_or_default();
    split.validate(phase1.len())?;
    let horizon = cfg.horizon.unwrap_or(phase2.len());
    let seed = args.seed.or(cfg.seed);

    let (run, details) = match method.embedding() {
        None => {
            let mut mf = cfg.mf.clone();
            if let Some(s) = seed {
                mf.chart.seed = s;
            }
            let monitor = MfMonitor::fit(&phase1, &split, &mf)?;
            let run = run_monitor(&mut monitor.session(), &phase2, horizon)?;
            let details = json!({
                "sigma_hat": monitor.manifold().sigma_hat(),
                "ar_order": monitor.ar_model().map(|m| m.order()),
                "settings": mf,
            });
            (run, details)
        }
        Some(m) => {
            let mut ml = cfg.ml.clone();
            ml.method = m;
            if let Some(s) = seed {
                ml.chart.seed = s;
            }
            let monitor = MlMonitor::fit(&phase1, &split, &ml)?;
            let run = run_monitor(&mut monitor.session(), &phase2, horizon)?;
            (run, json!({ "settings": ml }))
        }
    };
    write_trace(args.out, &run)?;
    write_json(
        &sidecar(args.out),
        &json!({
            "method": method,
            "run_length": run.run_length,
            "censored": run.censored,
            "horizon": horizon,
            "phase1_len": phase1.len(),
            "phase2_len": phase2.len(),
            "split": split,
            "details": details,
            "config": cfg,
        }),
    )?;
    Ok(run)
}

pub struct ArlArgs<'a> {
    pub out: &'a Path,
    pub method: Option<Procedure>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

fn write_table(path: &Path, procedures: &[Procedure], cells: &[StudyCell]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    let mut header = vec!["coordinate".to_string(), "delta".to_string()];
    for p in procedures {
        header.extend([format!("{p}_arl"), format!("{p}_sdrl"), format!("{p}_censored")]);
    }
    w.write_record(&header).map_err(err)?;
    let n_scen = cells.len() / procedures.len().max(1);
    for s in 0..n_scen {
        let first = &cells[s].scenario;
        let mut row = vec![first.coordinate.to_string(), first.delta.to_string()];
        for p in 0..procedures.len() {
            let c = &cells[p * n_scen + s].summary;
            row.extend([format!("{:.4}", c.arl), format!("{:.4}", c.sdrl), c.censored.to_string()]);
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn arl(cfg: &RunConfig, args: ArlArgs<'_>) -> Result<Vec<StudyCell>, CliError> {
    let mut study = RunConfig::require(&cfg.study, "study")?.clone();
    if let Some(m) = args.method {
        study.procedures = vec![m];
    }
    let replications = args
        .replications
        .or(cfg.replications)
        .ok_or_else(|| CliError::Validation("replications not set in config or on the command line".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let cells = study.run(replications, seed)?;
    write_table(args.out, &study.procedures, &cells)?;
    write_json(
        &sidecar(args.out),
        &json!({
            "replications": replications,
            "seed": seed,
            "cells": cells,
            "study": study,
        }),
    )?;
    Ok(cells)
}

pub fn plot(trace: &Path, out: &Path) -> Result<usize, CliError> {
    let file = std::fs::File::open(trace).map_err(|e| CliError::io(trace, e))?;
    let points = plot::read_trace(file)?;
    std::fs::write(out, plot::render_svg(&points)).map_err(|e| CliError::io(out, e))?;
    Ok(points.iter().filter(|p| p.alarm).count())
}

