//! Declarative experiments: architecture sweeps, target studies, density
//! studies, trajectory simulation and order-of-accuracy studies.
//!
//! Each runner writes plot-ready CSV files into `cfg.output_dir`, each with a
//! `<stem>.meta.json` sidecar holding the resolved config. Output depends only
//! on the config, so reruns are byte-identical regardless of thread count.
//!
//! CSV schemas:
//!
//! | file | columns |
//! |---|---|
//! | `arch_sweep.csv` | `layers,neurons,runs,failed,mean_max_linf,mean_l2` |
//! | `arch_sweep_runs.csv` | `layers,neurons,seed,status,max_linf,mean_l2,iteration,pair` |
//! | `target_study.csv` | `scheme,iteration,net_error,target_error` |
//! | `target_study_summary.csv` | `scheme,status,target_error,final_net_error,ratio` |
//! | `density_study.csv` | `pairs,iterations,iteration,updates,mean_l2` |
//! | `density_study_summary.csv` | `pairs,iterations,updates,status,max_linf,mean_l2` |
//! | `trajectory_reference.csv`, `trajectory_resnet_<scheme>.csv` | `k,t,x_0..x_{n-1}` |
//! | `trajectory_summary.csv` | `scheme,status,final_state_error,max_deviation` |
//! | `order_study.csv` | `scheme,dt,target_error` |
//! | `order_study_slopes.csv` | `scheme,slope` |
//!
//! Empty fields mark values that do not exist, e.g. the error of a diverged run.

mod config;
mod output;

use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;

pub use config::{density_iterations, ArchSpec, ExperimentConfig, ExperimentKind};
use output::{opt, opt_usize, OutputDir};

use crate::dataset::{generate_pairs, generate_reference_pairs_with, LearningSet, TargetKind};
use crate::error::{invalid, Error, Result};
use crate::integrators::StepScheme;
use crate::metrics::{self, ErrorReport};
use crate::network::NetParams;
use crate::rollout::{simulate_reference, simulate_resnet_scaled, Trajectory};
use crate::system::{self, autonomize, scale_system, OdeSystem, ToggleParams, TOGGLE_SCALE};
use crate::training::{self, MultiSeedSummary, RunOutcome, TrainConfig};

/// How a single training or rollout cell ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Completed,
    Diverged { iteration: usize, pair: usize },
    BlowUp { step: usize },
}

impl CellStatus {
    fn from_error(e: Error) -> Result<CellStatus> {
        match e {
            Error::Diverged { iteration, pair } => Ok(CellStatus::Diverged { iteration, pair }),
            Error::TrajectoryBlowUp { step } => Ok(CellStatus::BlowUp { step }),
            other => Err(other),
        }
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellStatus::Completed => f.write_str("completed"),
            CellStatus::Diverged { iteration, pair } => write!(f, "diverged at iteration {iteration} pair {pair}"),
            CellStatus::BlowUp { step } => write!(f, "blow-up at step {step}"),
        }
    }
}

/// The system an experiment trains on: toggle η applied, non-autonomous
/// systems autonomized. Scaled systems stay in scaled coordinates.
pub fn resolve_system(cfg: &ExperimentConfig) -> Result<OdeSystem> {
    let base = match (cfg.toggle_eta, cfg.system.as_str()) {
        (None, id) => system::by_id(id)?,
        (Some(eta), "toggle") => system::toggle_switch(ToggleParams { eta, ..ToggleParams::default() }),
        (Some(eta), "toggle_scaled") => {
            let toggle = system::toggle_switch(ToggleParams { eta, ..ToggleParams::default() });
            scale_system(&toggle, TOGGLE_SCALE)?.with_id("toggle_scaled")
        }
        (Some(_), id) => return Err(invalid(format!("toggle_eta does not apply to `{id}`"))),
    };
    if base.is_autonomous() {
        Ok(base)
    } else {
        autonomize(&base)
    }
}

/// Resolved time lag: the configured one or the system's default.
pub fn resolve_dt(cfg: &ExperimentConfig, system: &OdeSystem) -> f64 {
    cfg.dt.unwrap_or_else(|| system.default_dt())
}

fn target_set(system: &OdeSystem, target: TargetKind, dt: f64, count: usize, seed: u64, substeps: usize) -> Result<LearningSet> {
    match target {
        TargetKind::Scheme(s) => generate_pairs(system, s, dt, count, seed),
        TargetKind::Reference => generate_reference_pairs_with(system, dt, count, seed, substeps),
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

struct Setup {
    system: OdeSystem,
    dt: f64,
}

impl Setup {
    fn new(cfg: &ExperimentConfig, expected: ExperimentKind) -> Result<Setup> {
        if cfg.experiment != expected {
            return Err(invalid(format!("config is for {}, not {expected}", cfg.experiment)));
        }
        cfg.validate()?;
        let system = resolve_system(cfg)?;
        let dt = resolve_dt(cfg, &system);
        Ok(Setup { system, dt })
    }

    fn out<'a>(&'a self, cfg: &'a ExperimentConfig) -> OutputDir<'a> {
        OutputDir { dir: &cfg.output_dir, cfg, system_id: self.system.id(), dt: self.dt }
    }

    fn reference(&self, cfg: &ExperimentConfig, pairs: usize) -> Result<LearningSet> {
        generate_reference_pairs_with(&self.system, self.dt, pairs, cfg.seed, cfg.substeps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSweepRow {
    pub arch: ArchSpec,
    pub summary: MultiSeedSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSweepReport {
    pub rows: Vec<ArchSweepRow>,
    pub files: Vec<PathBuf>,
}

/// Trains every grid cell on reference targets, `cfg.runs` seeds each.
pub fn run_arch_sweep(cfg: &ExperimentConfig) -> Result<ArchSweepReport> {
    let setup = Setup::new(cfg, ExperimentKind::ArchSweep)?;
    let tc = cfg.train_config();
    let rows = in_pool(cfg.jobs, || {
        let reference = setup.reference(cfg, cfg.pairs)?;
        cfg.archs
            .par_iter()
            .map(|a| {
                let arch = a.architecture(setup.system.dim())?;
                let summary = training::train_multi_seed(arch, &reference, &reference, &tc, cfg.runs)?;
                Ok(ArchSweepRow { arch: *a, summary })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.arch.layers.to_string(),
                r.arch.neurons.to_string(),
                r.summary.runs.len().to_string(),
                r.summary.failed.to_string(),
                opt(r.summary.mean_max_linf),
                opt(r.summary.mean_l2),
            ]
        })
        .collect();
    let mut runs = Vec::new();
    for r in &rows {
        for run in &r.summary.runs {
            let (status, rep, it, pair) = match run.outcome {
                RunOutcome::Completed(rep) => ("completed", Some(rep), None, None),
                RunOutcome::Diverged { iteration, pair } => ("diverged", None, Some(iteration), Some(pair)),
            };
            runs.push(vec![
                r.arch.layers.to_string(),
                r.arch.neurons.to_string(),
                run.seed.to_string(),
                status.to_string(),
                opt(rep.map(|x| x.max_linf)),
                opt(rep.map(|x| x.mean_l2)),
                opt_usize(it),
                opt_usize(pair),
            ]);
        }
    }
    let out = setup.out(cfg);
    let files = vec![
        out.write_csv("arch_sweep.csv", &["layers", "neurons", "runs", "failed", "mean_max_linf", "mean_l2"], &table)?,
        out.write_csv(
            "arch_sweep_runs.csv",
            &["layers", "neurons", "seed", "status", "max_linf", "mean_l2", "iteration", "pair"],
            &runs,
        )?,
    ];
    Ok(ArchSweepReport { rows, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetStudyRow {
    pub target: TargetKind,
    /// Mean L2 distance between these targets and the reference targets.
    pub target_error: f64,
    /// `(iteration, mean L2 vs reference)`; empty when training diverged.
    pub trace: Vec<(usize, f64)>,
    pub status: CellStatus,
}

impl TargetStudyRow {
    pub fn final_net_error(&self) -> Option<f64> {
        self.trace.last().map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetStudyReport {
    pub rows: Vec<TargetStudyRow>,
    pub files: Vec<PathBuf>,
}

/// Trains one network per target scheme and records its error trace against
/// the constant target error.
pub fn run_target_study(cfg: &ExperimentConfig) -> Result<TargetStudyReport> {
    let setup = Setup::new(cfg, ExperimentKind::TargetStudy)?;
    let arch = cfg.single_arch()?.architecture(setup.system.dim())?;
    let tc = cfg.train_config();
    let rows = in_pool(cfg.jobs, || {
        let reference = setup.reference(cfg, cfg.pairs)?;
        cfg.schemes
            .par_iter()
            .map(|&target| {
                let learning = target_set(&setup.system, target, setup.dt, cfg.pairs, cfg.seed, cfg.substeps)?;
                let target_error = metrics::target_mean_l2_error(&learning, &reference)?;
                let (trace, status) = match training::train(arch, &learning, &reference, &tc) {
                    Ok(rec) => (rec.iteration_indices.into_iter().zip(rec.mean_l2_vs_reference).collect(), CellStatus::Completed),
                    Err(e) => (Vec::new(), CellStatus::from_error(e)?),
                };
                Ok(TargetStudyRow { target, target_error, trace, status })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut traces = Vec::new();
    let mut summary = Vec::new();
    for r in &rows {
        for (it, e) in &r.trace {
            traces.push(vec![r.target.to_string(), it.to_string(), e.to_string(), r.target_error.to_string()]);
        }
        let fin = r.final_net_error();
        let ratio = fin.filter(|_| r.target_error > 0.0).map(|f| f / r.target_error);
        summary.push(vec![r.target.to_string(), r.status.to_string(), r.target_error.to_string(), opt(fin), opt(ratio)]);
    }
    let out = setup.out(cfg);
    let files = vec![
        out.write_csv("target_study.csv", &["scheme", "iteration", "net_error", "target_error"], &traces)?,
        out.write_csv(
            "target_study_summary.csv",
            &["scheme", "status", "target_error", "final_net_error", "ratio"],
            &summary,
        )?,
    ];
    Ok(TargetStudyReport { rows, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub pairs: usize,
    pub iterations: usize,
    pub trace: Vec<(usize, f64)>,
    pub final_report: Option<ErrorReport>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
    pub files: Vec<PathBuf>,
}

/// Trains on reference targets for each `J`, running `round(budget / J)`
/// iterations so every cell performs about the same number of updates.
pub fn run_density_study(cfg: &ExperimentConfig) -> Result<DensityReport> {
    let setup = Setup::new(cfg, ExperimentKind::DensityStudy)?;
    let arch = cfg.single_arch()?.architecture(setup.system.dim())?;
    let rows = in_pool(cfg.jobs, || {
        cfg.densities
            .par_iter()
            .map(|&pairs| {
                let iterations = density_iterations(cfg.update_budget, pairs);
                let reference = setup.reference(cfg, pairs)?;
                let tc = TrainConfig { iterations, ..cfg.train_config() };
                Ok(match training::train(arch, &reference, &reference, &tc) {
                    Ok(rec) => DensityRow {
                        pairs,
                        iterations,
                        trace: rec.iteration_indices.into_iter().zip(rec.mean_l2_vs_reference).collect(),
                        final_report: Some(rec.final_report),
                        status: CellStatus::Completed,
                    },
                    Err(e) => DensityRow { pairs, iterations, trace: Vec::new(), final_report: None, status: CellStatus::from_error(e)? },
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut traces = Vec::new();
    let mut summary = Vec::new();
    for r in &rows {
        for (it, e) in &r.trace {
            traces.push(vec![r.pairs.to_string(), r.iterations.to_string(), it.to_string(), (it * r.pairs).to_string(), e.to_string()]);
        }
        summary.push(vec![
            r.pairs.to_string(),
            r.iterations.to_string(),
            (r.iterations * r.pairs).to_string(),
            r.status.to_string(),
            opt(r.final_report.map(|x| x.max_linf)),
            opt(r.final_report.map(|x| x.mean_l2)),
        ]);
    }
    let out = setup.out(cfg);
    let files = vec![
        out.write_csv("density_study.csv", &["pairs", "iterations", "iteration", "updates", "mean_l2"], &traces)?,
        out.write_csv(
            "density_study_summary.csv",
            &["pairs", "iterations", "updates", "status", "max_linf", "mean_l2"],
            &summary,
        )?,
    ];
    Ok(DensityReport { rows, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetTrajectory {
    pub target: TargetKind,
    pub params: Option<NetParams>,
    pub trajectory: Option<Trajectory>,
    pub status: CellStatus,
    /// L2 distance to the reference at the last grid point.
    pub final_state_error: Option<f64>,
    /// Max over grid points of the L2 distance to the reference.
    pub max_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    /// Reference trajectory in original coordinates.
    pub reference: Trajectory,
    pub nets: Vec<NetTrajectory>,
    pub files: Vec<PathBuf>,
}

/// Initial state (in original coordinates, time appended for autonomized
/// systems), start time and number of steps.
fn trajectory_setup(cfg: &ExperimentConfig, system: &OdeSystem, dt: f64) -> Result<(Vec<f64>, f64, usize)> {
    let own = system.trajectory();
    let t0 = cfg.t0.or(own.map(|s| s.t0)).unwrap_or(0.0);
    let t_final = cfg
        .t_final
        .or(own.map(|s| s.t_final))
        .ok_or_else(|| invalid(format!("`{}` has no default horizon; set t_final", system.id())))?;
    let mut x0 = cfg
        .x0
        .clone()
        .or(own.map(|s| s.x0.clone()))
        .ok_or_else(|| invalid(format!("`{}` has no default initial state; set x0", system.id())))?;
    if system.time_coordinate().is_some() && x0.len() + 1 == system.dim() {
        x0.push(t0);
    }
    if x0.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: x0.len() });
    }
    if t_final.is_nan() || t_final <= t0 {
        return Err(invalid("t_final must exceed t0"));
    }
    let steps = ((t_final - t0) / dt).round() as usize;
    if steps == 0 {
        return Err(invalid("horizon is shorter than one time lag"));
    }
    Ok((x0, t0, steps))
}

fn params_file(target: TargetKind) -> String {
    format!("params_{target}.json")
}

/// Simulates the reference solution and one ResNet per target scheme from
/// the same initial state.
pub fn run_trajectory(cfg: &ExperimentConfig) -> Result<TrajectoryReport> {
    let setup = Setup::new(cfg, ExperimentKind::Trajectory)?;
    let system = &setup.system;
    let scale = system.scale();
    let arch = cfg.single_arch()?.architecture(system.dim())?;
    let tc = cfg.train_config();
    let (x0, t0, steps) = trajectory_setup(cfg, system, setup.dt)?;
    let u0: Vec<f64> = x0.iter().map(|v| v / scale).collect();

    let (reference, nets) = in_pool(cfg.jobs, || {
        let reference = simulate_reference(system, &u0, t0, setup.dt, steps, cfg.substeps)?.scaled(scale);
        let needs_training = cfg.params_dir.is_none() && !cfg.schemes.is_empty();
        let ref_pairs = if needs_training { Some(setup.reference(cfg, cfg.pairs)?) } else { None };
        let nets = cfg
            .schemes
            .par_iter()
            .map(|&target| {
                let trained = match &cfg.params_dir {
                    Some(dir) => {
                        let p = NetParams::from_json(&std::fs::read_to_string(dir.join(params_file(target)))?)?;
                        if p.architecture().input_dim != system.dim() {
                            return Err(Error::DimensionMismatch { expected: system.dim(), found: p.architecture().input_dim });
                        }
                        Ok(p)
                    }
                    None => {
                        let learning = target_set(system, target, setup.dt, cfg.pairs, cfg.seed, cfg.substeps)?;
                        let reference = ref_pairs.as_ref().expect("reference pairs built for training");
                        training::train(arch, &learning, reference, &tc).map(|r| r.final_params)
                    }
                };
                let params = match trained {
                    Ok(p) => p,
                    Err(e) => {
                        let status = CellStatus::from_error(e)?;
                        return Ok(NetTrajectory { target, params: None, trajectory: None, status, final_state_error: None, max_deviation: None });
                    }
                };
                match simulate_resnet_scaled(&params, scale, &x0, t0, setup.dt, steps) {
                    Ok(tr) => {
                        let fin = metrics::l2_distance(tr.last_state(), reference.last_state());
                        let dev = tr.max_deviation(&reference)?;
                        Ok(NetTrajectory {
                            target,
                            params: Some(params),
                            trajectory: Some(tr),
                            status: CellStatus::Completed,
                            final_state_error: Some(fin),
                            max_deviation: Some(dev),
                        })
                    }
                    Err(e) => Ok(NetTrajectory {
                        target,
                        params: Some(params),
                        trajectory: None,
                        status: CellStatus::from_error(e)?,
                        final_state_error: None,
                        max_deviation: None,
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((reference, nets))
    })?;

    let out = setup.out(cfg);
    let mut files = Vec::new();
    let mut buf = Vec::new();
    reference.write_csv(&mut buf, cfg.thin)?;
    files.push(out.write("trajectory_reference.csv", &buf)?);
    let mut summary = Vec::new();
    for n in &nets {
        if let Some(p) = &n.params {
            if cfg.params_dir.is_none() {
                files.push(out.write(&params_file(n.target), format!("{}\n", p.to_json()?).as_bytes())?);
            }
        }
        if let Some(tr) = &n.trajectory {
            let mut buf = Vec::new();
            tr.write_csv(&mut buf, cfg.thin)?;
            files.push(out.write(&format!("trajectory_resnet_{}.csv", n.target), &buf)?);
        }
        summary.push(vec![n.target.to_string(), n.status.to_string(), opt(n.final_state_error), opt(n.max_deviation)]);
    }
    files.push(out.write_csv("trajectory_summary.csv", &["scheme", "status", "final_state_error", "max_deviation"], &summary)?);
    Ok(TrajectoryReport { reference, nets, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub scheme: StepScheme,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudyReport {
    pub rows: Vec<OrderRow>,
    pub files: Vec<PathBuf>,
}

/// Target error of each scheme over the configured time lags and its fitted
/// log-log slope. Reference entries in `schemes` are skipped.
pub fn run_order_study(cfg: &ExperimentConfig) -> Result<OrderStudyReport> {
    let setup = Setup::new(cfg, ExperimentKind::OrderStudy)?;
    let system = &setup.system;
    let schemes: Vec<StepScheme> = cfg
        .schemes
        .iter()
        .filter_map(|t| match t {
            TargetKind::Scheme(s) => Some(*s),
            TargetKind::Reference => None,
        })
        .collect();
    let rows = in_pool(cfg.jobs, || {
        let references = cfg
            .order_dts
            .par_iter()
            .map(|&dt| generate_reference_pairs_with(system, dt, cfg.pairs, cfg.seed, cfg.substeps))
            .collect::<Result<Vec<_>>>()?;
        schemes
            .par_iter()
            .map(|&scheme| {
                let errors = cfg
                    .order_dts
                    .iter()
                    .zip(&references)
                    .map(|(&dt, reference)| {
                        let learning = generate_pairs(system, scheme, dt, cfg.pairs, cfg.seed)?;
                        metrics::target_mean_l2_error(&learning, reference)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let slope = metrics::fit_order(&cfg.order_dts, &errors)?;
                Ok(OrderRow { scheme, dts: cfg.order_dts.clone(), errors, slope })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = Vec::new();
    let mut slopes = Vec::new();
    for r in &rows {
        for (dt, e) in r.dts.iter().zip(&r.errors) {
            table.push(vec![r.scheme.to_string(), dt.to_string(), e.to_string()]);
        }
        slopes.push(vec![r.scheme.to_string(), r.slope.to_string()]);
    }
    let out = setup.out(cfg);
    let files = vec![
        out.write_csv("order_study.csv", &["scheme", "dt", "target_error"], &table)?,
        out.write_csv("order_study_slopes.csv", &["scheme", "slope"], &slopes)?,
    ];
    Ok(OrderStudyReport { rows, files })
}

/// Runs whichever experiment `cfg` names and returns the data files written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    Ok(match cfg.experiment {
        ExperimentKind::ArchSweep => run_arch_sweep(cfg)?.files,
        ExperimentKind::TargetStudy => run_target_study(cfg)?.files,
        ExperimentKind::DensityStudy => run_density_study(cfg)?.files,
        ExperimentKind::Trajectory => run_trajectory(cfg)?.files,
        ExperimentKind::OrderStudy => run_order_study(cfg)?.files,
    })
}
