//! Dispatch of a resolved configuration to the estimators and oracle.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use mvsao_core::estimators::{rigidity_covariance, smooth_trace_moment, whitenoise_trace_moment, CovarianceMethod};
use mvsao_core::oracle::{ensemble_member, oracle_moment, write_spectrum};
use mvsao_core::rng::derive_seed;
use mvsao_core::{Execution, ExperimentSpec, MomentEstimate};

use crate::config::{CovarianceConfig, Kind, NoiseConfig, Resolved, Run};
use crate::error::{io_at, CliError, Result};
use crate::output::{append, archive_config, render, sha256_hex, ResultRecord};

/// Options that do not enter the configuration hash.
#[derive(Clone, Debug, Default)]
pub struct RunOptions<'a> {
    /// Record wall-clock time per row. Off by default so repeated runs are
    /// byte-identical.
    pub timing: bool,
    /// Noise fields and spectra of every oracle draw.
    pub archive: Option<&'a Path>,
}

fn trace_like(cfg: &Resolved, spec: &ExperimentSpec, exec: Execution) -> Result<MomentEstimate> {
    Ok(match cfg.noise {
        NoiseConfig::White => whitenoise_trace_moment(spec, exec)?,
        NoiseConfig::Smooth { .. } => smooth_trace_moment(spec, exec)?,
    })
}

fn estimates(run: &Run, opts: &RunOptions) -> Result<Vec<(Vec<f64>, MomentEstimate, Option<f64>)>> {
    let cfg = &run.config;
    let exec = |seed| Execution::new(seed).with_workers(run.workers);
    let all: Vec<usize> = (0..cfg.t.len()).collect();
    let timed = |f: &mut dyn FnMut() -> Result<MomentEstimate>| -> Result<(MomentEstimate, Option<f64>)> {
        let start = Instant::now();
        let est = f()?;
        Ok((est, opts.timing.then(|| start.elapsed().as_secs_f64())))
    };
    let mut rows = Vec::new();
    match cfg.kind {
        Kind::Trace => {
            // factor k > 0 runs on a seed derived from the run seed
            for k in 0..cfg.t.len() {
                let spec = cfg.spec(&[k])?;
                let seed = if k == 0 { cfg.seed } else { derive_seed(cfg.seed, k as u64) };
                let (est, wall) = timed(&mut || trace_like(cfg, &spec, exec(seed)))?;
                rows.push((spec.times.clone(), est, wall));
            }
        }
        Kind::Moment => {
            let spec = cfg.spec(&all)?;
            let (est, wall) = timed(&mut || trace_like(cfg, &spec, exec(cfg.seed)))?;
            rows.push((spec.times.clone(), est, wall));
        }
        Kind::Covariance => {
            if cfg.t.len() != 2 {
                return Err(CliError::Config("covariance needs exactly two times".into()));
            }
            if cfg.noise != NoiseConfig::White {
                return Err(CliError::Config("covariance uses the white-noise estimator".into()));
            }
            let method = match cfg.covariance.unwrap_or_default() {
                CovarianceConfig::Coupled => CovarianceMethod::Coupled,
                CovarianceConfig::Independent => CovarianceMethod::Independent,
            };
            let spec = cfg.spec(&all)?;
            let (est, wall) = timed(&mut || Ok(rigidity_covariance(&spec, method, exec(cfg.seed))?))?;
            rows.push((spec.times.clone(), est, wall));
        }
        Kind::Oracle => {
            let o = cfg.oracle.as_ref().ok_or_else(|| CliError::Config("missing `oracle`".into()))?;
            let spec = cfg.spec(&all)?;
            let (est, wall) = timed(&mut || Ok(oracle_moment(&spec, o.grid, o.draws, exec(cfg.seed))?))?;
            if let Some(path) = opts.archive {
                let file = File::create(path).map_err(io_at(path))?;
                let mut w = BufWriter::new(file);
                for d in 0..o.draws as u64 {
                    let (field, eig) = ensemble_member(&spec, o.grid, cfg.seed, d)?;
                    field.write_to(&mut w)?;
                    write_spectrum(&mut w, d, &eig)?;
                }
                std::io::Write::flush(&mut w).map_err(io_at(path))?;
            }
            rows.push((spec.times.clone(), est, wall));
        }
    }
    Ok(rows)
}

/// Runs the experiment and returns its records.
pub fn execute(run: &Run, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    let cfg = &run.config;
    let canonical = cfg.canonical();
    let hash = sha256_hex(&canonical);
    let id = cfg.id.clone().unwrap_or_else(|| format!("run-{}", &hash[..12]));
    let records = estimates(run, opts)?
        .into_iter()
        .map(|(t, est, wall)| ResultRecord {
            experiment_id: id.clone(),
            kind: cfg.kind.name().into(),
            t,
            estimate: est.value,
            stderr: est.stderr,
            n_paths: est.n_paths,
            n_discarded: est.n_discarded,
            discard_rate: est.discard_rate(),
            max_weight_share: est.max_weight_share,
            seed: cfg.seed,
            config_hash: hash.clone(),
            wall_time: wall,
            warnings: est.warnings,
        })
        .collect();
    Ok(records)
}

/// Runs and writes the records to the configured destination (standard
/// output when there is none).
pub fn run_and_write(run: &Run, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    let records = execute(run, opts)?;
    for r in &records {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    match &run.out {
        Some(path) => {
            append(path, &records, run.format)?;
            let canonical = run.config.canonical();
            archive_config(path, &canonical, &sha256_hex(&canonical))?;
        }
        None => print!("{}", render(&records, run.format, true)),
    }
    Ok(records)
}
