//! Experiment orchestration for the CLI subcommands.

use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use topochaos::coupling::{
    reference_registry, run_trials, solve_reference, CoupledParams, ReferenceModel, ReferenceSpec, TrialResult,
    TrialSetup,
};
use topochaos::kinetic::{io as kio, CollisionOperator, GridDensity, KineticSolver, MassLog};
use topochaos::particle::{sample_initial, simulate, write_events_csv, write_snapshots_csv, ProcessParams};
use topochaos::rng::derive_seed;
use topochaos::stats::{mean_stderr, pairwise_sum};

use crate::cache::{cache_key, CacheStatus, KineticCache};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::fit::{fit_rate, RateFit};
use crate::tables::{
    trial_file_name, write_atomic, write_table, AggregateRow, TrialRow, AGGREGATE_FILE, AGGREGATE_SCHEMA, TRIAL_SCHEMA,
};

/// Builds the configured reference model, reusing a cached kinetic solution when one exists.
pub fn build_reference(
    cfg: &ExperimentConfig,
    cache: Option<&KineticCache>,
) -> Result<(Arc<dyn ReferenceModel>, Option<CacheStatus>)> {
    let mut spec = ReferenceSpec {
        form: cfg.reference.clone(),
        kernel: cfg.kernel()?,
        law: cfg.law()?,
        dim: cfg.dimension,
        horizon: cfg.horizon,
        grid: cfg.kinetic.grid()?,
        dt: cfg.kinetic.dt,
        solution: None,
    };
    let mut status = None;
    if cfg.reference == "kinetic" {
        let solution = match cache {
            Some(cache) => {
                let (sol, s) = cache.get_or_solve(&cache_key(cfg), || Ok(solve_reference(&spec)?))?;
                status = Some(s);
                sol
            }
            None => solve_reference(&spec)?,
        };
        spec.solution = Some(Arc::new(solution));
    }
    Ok((reference_registry().build(&spec)?, status))
}

pub fn trial_setup(cfg: &ExperimentConfig, n: usize) -> Result<TrialSetup> {
    let mut params = CoupledParams::new(cfg.kernel()?, cfg.horizon);
    params.record_times = cfg.record_times();
    params.histogram = cfg.histogram()?;
    params.diagnostic_stride = cfg.diagnostic_stride;
    Ok(TrialSetup {
        law: cfg.law()?,
        dim: cfg.dimension,
        n,
        params,
    })
}

pub fn trial_rows(results: &[TrialResult]) -> Vec<TrialRow> {
    results
        .iter()
        .flat_map(|r| {
            r.records.iter().map(move |rec| TrialRow {
                trial: r.trial,
                t: rec.t,
                d_n: rec.d_n,
                tv_estimate: rec.tv_estimate,
                joint_count: rec.joint,
                z_only_count: rec.z_only,
                sigma_only_count: rec.sigma_only,
                lln_diag: rec.lln_diag,
                rescale_mag: rec.rescale_mag,
            })
        })
        .collect()
}

/// Mean and standard error over trials at every record time; trial order fixes the summation order.
pub fn aggregate(n: usize, gronwall: f64, results: &[TrialResult]) -> Vec<AggregateRow> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    (0..first.records.len())
        .map(|k| {
            let t = first.records[k].t;
            let dn: Vec<f64> = results.iter().map(|r| r.records[k].d_n).collect();
            let (mean_dn, stderr) = mean_stderr(&dn);
            let tv: Option<Vec<f64>> = results.iter().map(|r| r.records[k].tv_estimate).collect();
            AggregateRow {
                n,
                t,
                mean_dn,
                stderr,
                bound: (gronwall * t).exp() / ((n - 1) as f64).sqrt(),
                mean_tv: tv.map(|v| pairwise_sum(&v) / v.len() as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct NStudy {
    pub n: usize,
    pub rows: Vec<TrialRow>,
}

#[derive(Debug, Clone)]
pub struct Convergence {
    pub studies: Vec<NStudy>,
    pub aggregate: Vec<AggregateRow>,
    /// `Err` carries the reason the fit was skipped.
    pub fit: std::result::Result<RateFit, String>,
}

impl Convergence {
    pub fn final_rows(&self) -> impl Iterator<Item = &AggregateRow> {
        let t = self.aggregate.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
        self.aggregate.iter().filter(move |r| r.t == t)
    }
}

/// Runs every `N` of the study against one shared reference model.
/// `on_study` is called after each `N` finishes.
pub fn run_convergence(
    cfg: &ExperimentConfig,
    model: &dyn ReferenceModel,
    mut on_study: impl FnMut(&NStudy, &[AggregateRow]),
) -> Result<Convergence> {
    cfg.validate()?;
    let gronwall = cfg.kernel()?.gronwall_constant();
    let mut studies = Vec::new();
    let mut agg = Vec::new();
    for &n in &cfg.n_list {
        let setup = trial_setup(cfg, n)?;
        let results = run_trials(&setup, model, cfg.trials, derive_seed(cfg.seed, n as u64))?;
        let rows = aggregate(n, gronwall, &results);
        let study = NStudy {
            n,
            rows: trial_rows(&results),
        };
        on_study(&study, &rows);
        studies.push(study);
        agg.extend(rows);
    }
    let fit = fit_rate(&agg, cfg.horizon).map_err(|e| e.to_string());
    Ok(Convergence {
        studies,
        aggregate: agg,
        fit,
    })
}

pub const FIT_FILE: &str = "fit.json";

pub fn write_convergence(result: &Convergence, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for study in &result.studies {
        let path = dir.join(trial_file_name(study.n));
        write_table(&path, TRIAL_SCHEMA, &study.rows)?;
        written.push(path);
    }
    let path = dir.join(AGGREGATE_FILE);
    write_table(&path, AGGREGATE_SCHEMA, &result.aggregate)?;
    written.push(path);
    if let Ok(fit) = &result.fit {
        let path = dir.join(FIT_FILE);
        write_atomic(&path, format!("{}\n", serde_json::to_string_pretty(fit)?).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// One coupled trajectory at `cfg.single_n()`, written in the per-trial schema.
pub fn run_couple(cfg: &ExperimentConfig, model: &dyn ReferenceModel, dir: &Path) -> Result<(Vec<TrialRow>, PathBuf)> {
    cfg.validate()?;
    let n = cfg.single_n();
    let setup = trial_setup(cfg, n)?;
    let results = run_trials(&setup, model, 1, derive_seed(cfg.seed, n as u64))?;
    let rows = trial_rows(&results);
    let path = dir.join(format!("couple_N{n}.csv"));
    write_table(&path, TRIAL_SCHEMA, &rows)?;
    Ok((rows, path))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub n: usize,
    pub events: usize,
    pub snapshots: PathBuf,
    pub event_log: PathBuf,
}

/// One trajectory of the particle system with snapshots at the record times.
pub fn run_simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<SimulateSummary> {
    cfg.validate()?;
    let n = cfg.single_n();
    let mut params = ProcessParams::new(cfg.kernel()?, n, cfg.horizon, derive_seed(cfg.seed, 0x5157));
    params.dim = cfg.dimension;
    params.snapshot_times = cfg.record_times().into_iter().filter(|&t| t < cfg.horizon).collect();
    let initial = sample_initial(&cfg.law()?, n, cfg.dimension, derive_seed(cfg.seed, 0x1417))?;
    let traj = simulate(&params, &initial)?;

    std::fs::create_dir_all(dir)?;
    let snapshots = dir.join(format!("snapshots_N{n}.csv"));
    let event_log = dir.join(format!("events_N{n}.csv"));
    let mut buf = Vec::new();
    write_snapshots_csv(&traj, &mut buf)?;
    write_atomic(&snapshots, &buf)?;
    buf.clear();
    write_events_csv(&traj, &mut buf)?;
    write_atomic(&event_log, &buf)?;
    Ok(SimulateSummary {
        n,
        events: traj.events.len(),
        snapshots,
        event_log,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KineticSummary {
    pub snapshots: Vec<PathBuf>,
    pub steps: usize,
    pub max_step_drift: f64,
    pub cumulative_drift: f64,
}

/// Solves the kinetic equation and writes one CSV per record time.
pub fn run_kinetic(cfg: &ExperimentConfig, dir: &Path) -> Result<KineticSummary> {
    cfg.validate()?;
    let f0 = GridDensity::from_law(&cfg.law()?, cfg.kinetic.grid()?)?;
    let solver = KineticSolver::new(CollisionOperator::new(cfg.kernel()?), cfg.kinetic.dt)?;
    let sol = solver.solve_logged(&f0, cfg.horizon, &cfg.record_times())?;
    std::fs::create_dir_all(dir)?;
    let mut snapshots = Vec::new();
    for frame in &sol.frames {
        let path = dir.join(kio::snapshot_file_name(frame.t));
        let mut buf = BufWriter::new(Vec::new());
        kio::write_csv(frame, &mut buf)?;
        write_atomic(&path, &buf.into_inner().map_err(|e| e.into_error())?)?;
        snapshots.push(path);
    }
    let MassLog {
        steps,
        max_step_drift,
        cumulative_drift,
    } = sol.log;
    Ok(KineticSummary {
        snapshots,
        steps,
        max_step_drift,
        cumulative_drift,
    })
}
