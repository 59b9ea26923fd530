//! Per-sample SGD training of the residual solver.
//!
//! One iteration is a full pass over the learning set, one update per pair.
//! After every traced iteration the network is evaluated against reference
//! targets on the same inputs.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LearningSet;
use crate::error::{invalid, Error, Result};
use crate::metrics::{self, ErrorReport};
use crate::network::{init_params, Architecture, NetParams, SampleStepper};

/// ChaCha stream for the visit order, next to [`crate::network::INIT_STREAM`].
pub const SHUFFLE_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of full passes `K`.
    pub iterations: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after every iteration.
    pub lr_decay: f64,
    pub shuffle_each_iteration: bool,
    pub seed: u64,
    /// Iterations between error-trace samples; the last iteration is always traced.
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 500,
            learning_rate: 1e-2,
            lr_decay: 0.999,
            shuffle_each_iteration: true,
            seed: 0,
            trace_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(invalid(format!("lr decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if self.trace_every == 0 {
            return Err(invalid("trace_every must be at least 1"));
        }
        Ok(())
    }

    fn traced(&self, iteration: usize) -> bool {
        iteration.is_multiple_of(self.trace_every) || iteration == self.iterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// 1-based iteration numbers at which the trace was sampled.
    pub iteration_indices: Vec<usize>,
    pub mean_l2_vs_reference: Vec<f64>,
    pub final_params: NetParams,
    pub updates_performed: usize,
    /// Evaluation of the final parameters against the reference set.
    pub final_report: ErrorReport,
}

impl TrainRecord {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iteration", "mean_l2"])?;
        for (i, e) in self.iteration_indices.iter().zip(&self.mean_l2_vs_reference) {
            wtr.write_record([i.to_string(), e.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Parses an `iteration,mean_l2` trace.
pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["iteration", "mean_l2"] {
        return Err(Error::Parse("trace header must be `iteration,mean_l2`".into()));
    }
    let mut out: Vec<(usize, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse("trace rows have two fields".into()));
        }
        let it: usize = rec[0].parse().map_err(|_| Error::Parse(format!("bad iteration `{}`", &rec[0])))?;
        let e = crate::dataset::parse_finite(&rec[1])?;
        if e < 0.0 {
            return Err(Error::Parse(format!("negative error {e}")));
        }
        if out.last().is_some_and(|(prev, _)| *prev >= it) {
            return Err(Error::Parse("trace iterations must be strictly increasing".into()));
        }
        out.push((it, e));
    }
    Ok(out)
}

/// Evaluates `x + N(x)` on every reference input against its reference target.
pub fn evaluate(params: &NetParams, reference: &LearningSet) -> Result<ErrorReport> {
    let arch = params.architecture();
    if reference.dim() != arch.input_dim {
        return Err(Error::DimensionMismatch { expected: arch.input_dim, found: reference.dim() });
    }
    let mut stepper = SampleStepper::new(arch);
    let mut outputs = vec![vec![0.0; arch.input_dim]; reference.len()];
    for (p, out) in reference.pairs.iter().zip(outputs.iter_mut()) {
        stepper.predict(params, &p.y1, out);
    }
    let refs: Vec<&[f64]> = reference.targets().collect();
    metrics::error_report(&outputs, &refs)
}

/// Initializes parameters from `cfg.seed` and trains.
pub fn train(arch: Architecture, learning: &LearningSet, reference: &LearningSet, cfg: &TrainConfig) -> Result<TrainRecord> {
    let params = init_params(arch, cfg.seed)?;
    train_from(params, learning, reference, cfg)
}

/// Trains starting from the given parameters.
pub fn train_from(
    mut params: NetParams,
    learning: &LearningSet,
    reference: &LearningSet,
    cfg: &TrainConfig,
) -> Result<TrainRecord> {
    cfg.validate()?;
    if learning.is_empty() {
        return Err(invalid("learning set is empty"));
    }
    if !learning.shares_inputs(reference) {
        return Err(invalid("learning and reference sets must share their inputs"));
    }
    let arch = *params.architecture();
    if learning.dim() != arch.input_dim {
        return Err(Error::DimensionMismatch { expected: arch.input_dim, found: learning.dim() });
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..learning.len()).collect();
    let mut stepper = SampleStepper::new(&arch);
    let mut lr = cfg.learning_rate;
    let mut iteration_indices = Vec::new();
    let mut trace = Vec::new();
    let mut updates = 0usize;
    let mut last_report = None;

    for iteration in 1..=cfg.iterations {
        if cfg.shuffle_each_iteration {
            order.shuffle(&mut shuffle_rng);
        }
        for &j in &order {
            let pair = &learning.pairs[j];
            let loss = stepper.step(&mut params, &pair.y1, &pair.y2, lr).map_err(|e| match e {
                Error::NonFiniteGradient => Error::Diverged { iteration, pair: j },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { iteration, pair: j });
            }
            updates += 1;
        }
        lr *= cfg.lr_decay;
        if cfg.traced(iteration) {
            let report = evaluate(&params, reference)?;
            iteration_indices.push(iteration);
            trace.push(report.mean_l2);
            last_report = Some(report);
        }
    }

    Ok(TrainRecord {
        iteration_indices,
        mean_l2_vs_reference: trace,
        final_params: params,
        updates_performed: updates,
        final_report: last_report.expect("last iteration is always traced"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(ErrorReport),
    Diverged { iteration: usize, pair: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub outcome: RunOutcome,
}

/// Averages over independently initialized runs; diverged runs are excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedSummary {
    pub runs: Vec<RunResult>,
    pub mean_max_linf: Option<f64>,
    pub mean_l2: Option<f64>,
    pub failed: usize,
}

impl MultiSeedSummary {
    pub fn completed(&self) -> impl Iterator<Item = &ErrorReport> {
        self.runs.iter().filter_map(|r| match &r.outcome {
            RunOutcome::Completed(rep) => Some(rep),
            RunOutcome::Diverged { .. } => None,
        })
    }
}

/// Trains `runs` networks with seeds `cfg.seed + r` and averages their final
/// errors. Runs execute in parallel; results are kept in seed order.
pub fn train_multi_seed(
    arch: Architecture,
    learning: &LearningSet,
    reference: &LearningSet,
    cfg: &TrainConfig,
    runs: usize,
) -> Result<MultiSeedSummary> {
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    cfg.validate()?;
    let results: Vec<Result<RunResult>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let run_cfg = TrainConfig { seed, trace_every: cfg.iterations, ..*cfg };
            match train(arch, learning, reference, &run_cfg) {
                Ok(rec) => Ok(RunResult { seed, outcome: RunOutcome::Completed(rec.final_report) }),
                Err(Error::Diverged { iteration, pair }) => Ok(RunResult { seed, outcome: RunOutcome::Diverged { iteration, pair } }),
                Err(e) => Err(e),
            }
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let ok: Vec<ErrorReport> = runs
        .iter()
        .filter_map(|r| match r.outcome {
            RunOutcome::Completed(rep) => Some(rep),
            RunOutcome::Diverged { .. } => None,
        })
        .collect();
    let failed = runs.len() - ok.len();
    let mean = |f: fn(&ErrorReport) -> f64| {
        (!ok.is_empty()).then(|| ok.iter().map(f).sum::<f64>() / ok.len() as f64)
    };
    Ok(MultiSeedSummary {
        mean_max_linf: mean(|r| r.max_linf),
        mean_l2: mean(|r| r.mean_l2),
        runs,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_pairs, generate_reference_pairs_with};
    use crate::integrators::StepScheme;
    use crate::network::Gradients;
    use crate::system::by_id;

    fn small_sets(id: &str, j: usize) -> (LearningSet, LearningSet) {
        let s = by_id(id).unwrap();
        let dt = s.default_dt();
        (
            generate_pairs(&s, StepScheme::Rk4, dt, j, 1).unwrap(),
            generate_reference_pairs_with(&s, dt, j, 1, 100).unwrap(),
        )
    }

    #[test]
    fn identity_network_without_learning_reports_raw_displacement() {
        let (learn, refs) = small_sets("saddle", 1);
        let arch = Architecture::new(2, 1, 3).unwrap();
        let mut p = init_params(arch, 0).unwrap();
        p.zero_output_layer();
        let cfg = TrainConfig { iterations: 1, learning_rate: 0.0, ..Default::default() };
        let rec = train_from(p, &learn, &refs, &cfg).unwrap();
        let z = &refs.pairs[0];
        let expected = metrics::l2_distance(&z.y2, &z.y1);
        assert_eq!(rec.mean_l2_vs_reference, vec![expected]);
        assert_eq!(rec.iteration_indices, vec![1]);
    }

    #[test]
    fn update_count_and_trace_layout() {
        let (learn, refs) = small_sets("nodal_sink", 37);
        let cfg = TrainConfig { iterations: 12, trace_every: 5, ..Default::default() };
        let rec = train(Architecture::new(2, 1, 4).unwrap(), &learn, &refs, &cfg).unwrap();
        assert_eq!(rec.updates_performed, 12 * 37);
        assert_eq!(rec.iteration_indices, vec![5, 10, 12]);
        assert_eq!(rec.mean_l2_vs_reference.len(), 3);
        assert_eq!(rec.final_report.mean_l2, *rec.mean_l2_vs_reference.last().unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let (learn, refs) = small_sets("pendulum", 50);
        let cfg = TrainConfig { iterations: 5, seed: 9, ..Default::default() };
        let arch = Architecture::new(2, 2, 8).unwrap();
        let a = train(arch, &learn, &refs, &cfg).unwrap();
        let b = train(arch, &learn, &refs, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(arch, &learn, &refs, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.final_params, c.final_params);
    }

    #[test]
    fn divergence_is_reported() {
        let (learn, refs) = small_sets("van_der_pol", 50);
        let cfg = TrainConfig { iterations: 50, learning_rate: 10.0, ..Default::default() };
        let err = train(Architecture::new(2, 2, 16).unwrap(), &learn, &refs, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn multi_seed_excludes_diverged_runs() {
        let (learn, refs) = small_sets("van_der_pol", 30);
        let arch = Architecture::new(2, 1, 8).unwrap();
        let bad = TrainConfig { iterations: 30, learning_rate: 10.0, ..Default::default() };
        let s = train_multi_seed(arch, &learn, &refs, &bad, 3).unwrap();
        assert_eq!(s.failed, 3);
        assert_eq!(s.mean_l2, None);

        let good = TrainConfig { iterations: 3, learning_rate: 1e-3, ..Default::default() };
        let s = train_multi_seed(arch, &learn, &refs, &good, 3).unwrap();
        assert_eq!(s.failed, 0);
        let mean = s.completed().map(|r| r.mean_l2).sum::<f64>() / 3.0;
        assert_eq!(s.mean_l2, Some(mean));
        assert_eq!(s.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn single_run_summary_equals_single_training() {
        let (learn, refs) = small_sets("saddle", 40);
        let arch = Architecture::new(2, 1, 2).unwrap();
        let cfg = TrainConfig { iterations: 4, seed: 5, ..Default::default() };
        let s = train_multi_seed(arch, &learn, &refs, &cfg, 1).unwrap();
        let rec = train(arch, &learn, &refs, &cfg).unwrap();
        assert_eq!(s.mean_l2, Some(rec.final_report.mean_l2));
        assert_eq!(s.mean_max_linf, Some(rec.final_report.max_linf));
    }

    #[test]
    fn tiny_step_does_not_increase_sample_loss() {
        use rand::Rng;
        let arch = Architecture::new(2, 2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..50 {
            let p = init_params(arch, seed).unwrap();
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let loss = |p: &NetParams| {
                let out = p.resnet_forward(&x).unwrap();
                (0..2).map(|i| (out[i] - y[i]).powi(2)).sum::<f64>()
            };
            let (n, cache) = p.forward(&x).unwrap();
            let r: Vec<f64> = (0..2).map(|i| 2.0 * (x[i] + n[i] - y[i])).collect();
            let g: Gradients = p.backward(&cache, &r).unwrap();
            let q = crate::network::sgd_update(&p, &g, 1e-6).unwrap();
            assert!(loss(&q) <= loss(&p) + 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_sets_and_bad_config() {
        let s = by_id("saddle").unwrap();
        let a = generate_pairs(&s, StepScheme::Euler, 0.1, 10, 1).unwrap();
        let b = generate_reference_pairs_with(&s, 0.1, 10, 2, 10).unwrap();
        let arch = Architecture::new(2, 1, 2).unwrap();
        assert!(train(arch, &a, &b, &TrainConfig::default()).is_err());
        let c = generate_reference_pairs_with(&s, 0.1, 10, 1, 10).unwrap();
        assert!(train(arch, &a, &c, &TrainConfig { iterations: 0, ..Default::default() }).is_err());
        assert!(train(Architecture::new(3, 1, 2).unwrap(), &a, &c, &TrainConfig::default()).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let (learn, refs) = small_sets("star_point", 20);
        let cfg = TrainConfig { iterations: 6, trace_every: 2, ..Default::default() };
        let rec = train(Architecture::new(2, 1, 3).unwrap(), &learn, &refs, &cfg).unwrap();
        let mut buf = Vec::new();
        rec.write_trace_csv(&mut buf).unwrap();
        let back = read_trace_csv(&buf[..]).unwrap();
        let expected: Vec<(usize, f64)> =
            rec.iteration_indices.iter().copied().zip(rec.mean_l2_vs_reference.iter().copied()).collect();
        assert_eq!(back, expected);
        assert!(read_trace_csv("iteration,mean_l2\n2,0.1\n1,0.2\n".as_bytes()).is_err());
        assert!(read_trace_csv("iteration,err\n".as_bytes()).is_err());
    }
}
