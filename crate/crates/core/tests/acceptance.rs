//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p resflow --test acceptance -- --nocapture --test-threads=1`
//! to see them in order.
//!
//! Expected values come from oracles written here, independent of the
//! library: closed-form flows of the linear systems, hand-rolled one-step
//! schemes, a separate fine-step classic RK4 integrator, and a separate
//! forward pass for finite differences.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use resflow::dataset::{generate_pairs, generate_reference_pairs, TargetKind};
use resflow::experiment::{self, ArchSpec, ExperimentConfig, ExperimentKind};
use resflow::network::{init_params, Architecture, NetParams};
use resflow::system::by_id;
use resflow::StepScheme;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// Oracles

/// `N(x)` computed directly from the weight and bias arrays.
fn oracle_forward(p: &NetParams, x: &[f64]) -> (Vec<f64>, f64) {
    let mut a = x.to_vec();
    let mut min_abs_pre = f64::INFINITY;
    let last = p.weights.len() - 1;
    for (i, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
        let mut z = b.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            for (c, ac) in a.iter().enumerate() {
                *zr += w.data[r * w.cols + c] * ac;
            }
        }
        if i < last {
            min_abs_pre = z.iter().fold(min_abs_pre, |m, v| m.min(v.abs()));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        } else {
            a = z;
        }
    }
    (a, min_abs_pre)
}

fn oracle_loss(p: &NetParams, x: &[f64], y: &[f64]) -> f64 {
    let (n, _) = oracle_forward(p, x);
    x.iter().zip(&n).zip(y).map(|((xi, ni), yi)| (xi + ni - yi).powi(2)).sum()
}

/// Nodal sink `ẋ = Ax + b`, `A = [[-2,1],[1,-2]]`, `b = (-2,1)`: equilibrium
/// `(-1,0)`, eigenvalues -1 on `(1,1)` and -3 on `(1,-1)`.
fn nodal_sink_rhs(x: &[f64]) -> [f64; 2] {
    [-2.0 * x[0] + x[1] - 2.0, x[0] - 2.0 * x[1] + 1.0]
}

fn nodal_sink_exact(x: &[f64], t: f64) -> [f64; 2] {
    let (e1, e3) = ((-t).exp(), (-3.0 * t).exp());
    let d = [x[0] + 1.0, x[1]];
    let p = 0.5 * (e1 + e3);
    let m = 0.5 * (e1 - e3);
    [-1.0 + p * d[0] + m * d[1], m * d[0] + p * d[1]]
}

fn axpy(x: &[f64], a: f64, k: &[f64; 2]) -> [f64; 2] {
    [x[0] + a * k[0], x[1] + a * k[1]]
}

fn oracle_scheme(scheme: StepScheme, x: &[f64], h: f64) -> [f64; 2] {
    let f = nodal_sink_rhs;
    match scheme {
        StepScheme::Euler => axpy(x, h, &f(x)),
        StepScheme::Rk2 => {
            let k1 = f(x);
            let k2 = f(&axpy(x, h, &k1));
            [x[0] + 0.5 * h * (k1[0] + k2[0]), x[1] + 0.5 * h * (k1[1] + k2[1])]
        }
        StepScheme::Rk4 => {
            let k1 = f(x);
            let k2 = f(&axpy(x, h / 3.0, &k1));
            let k3 = f(&[x[0] - h / 3.0 * k1[0] + h * k2[0], x[1] - h / 3.0 * k1[1] + h * k2[1]]);
            let k4 = f(&[x[0] + h * (k1[0] - k2[0] + k3[0]), x[1] + h * (k1[1] - k2[1] + k3[1])]);
            let c = |i: usize| k1[i] + 3.0 * k2[i] + 3.0 * k3[i] + k4[i];
            [x[0] + h / 8.0 * c(0), x[1] + h / 8.0 * c(1)]
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Damped pendulum state at time `t` by classic RK4 with a fine fixed step.
fn pendulum_oracle(x0: [f64; 2], t: f64, steps: usize) -> [f64; 2] {
    let f = |x: [f64; 2]| [x[1], -0.2 * x[1] - 8.91 * x[0].sin()];
    let h = t / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

fn config(kind: ExperimentKind, system: &str, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, system);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_backprop_matches_finite_differences() {
    const H: f64 = 1e-6;
    // Entries smaller than this are compared absolutely (FD roundoff floor).
    const FLOOR: f64 = 1e-3;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shift = Normal::new(0.0, 0.5).unwrap();
    for (input, layers, width) in [(2, 1, 4), (2, 2, 8), (3, 2, 16)] {
        let arch = Architecture::new(input, layers, width).unwrap();
        let mut cases = 0;
        while cases < 50 {
            let mut p = init_params(arch, rng.random()).unwrap();
            p.biases.iter_mut().flatten().for_each(|b| *b += shift.sample(&mut rng));
            let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let y: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..=1.0)).collect();
            // A pre-activation within reach of the kink makes the central
            // difference straddle it; such draws do not test backprop.
            if oracle_forward(&p, &x).1 < 1e-3 {
                continue;
            }
            cases += 1;

            let (n, cache) = p.forward(&x).unwrap();
            let residual: Vec<f64> = x.iter().zip(&n).zip(&y).map(|((a, b), c)| 2.0 * (a + b - c)).collect();
            let g = p.resnet_backward(&cache, &residual).unwrap();

            let mut check = |analytic: f64, fd: f64| {
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FLOOR);
                worst = worst.max(rel);
            };
            for l in 0..p.weights.len() {
                for k in 0..p.weights[l].data.len() {
                    let mut q = p.clone();
                    q.weights[l].data[k] += H;
                    let up = oracle_loss(&q, &x, &y);
                    q.weights[l].data[k] -= 2.0 * H;
                    let down = oracle_loss(&q, &x, &y);
                    check(g.weights[l].data[k], (up - down) / (2.0 * H));
                }
                for k in 0..p.biases[l].len() {
                    let mut q = p.clone();
                    q.biases[l][k] += H;
                    let up = oracle_loss(&q, &x, &y);
                    q.biases[l][k] -= 2.0 * H;
                    let down = oracle_loss(&q, &x, &y);
                    check(g.biases[l][k], (up - down) / (2.0 * H));
                }
            }
            for k in 0..input {
                let mut xp = x.clone();
                xp[k] += H;
                let up = oracle_loss(&p, &xp, &y);
                xp[k] -= 2.0 * H;
                let down = oracle_loss(&p, &xp, &y);
                check(g.input[k], (up - down) / (2.0 * H));
            }
        }
    }
    verdict(1, "gradient_oracle", worst <= 1e-5, format!("max relative error {worst:.2e} over 150 cases (tolerance 1e-5)"));
}

fn order_study_rows() -> BTreeMap<String, (Vec<f64>, Vec<f64>, f64)> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(ExperimentKind::OrderStudy, "nodal_sink", dir.path());
    let report = experiment::run_order_study(&cfg).unwrap();
    report.rows.into_iter().map(|r| (r.scheme.to_string(), (r.dts, r.errors, r.slope))).collect()
}

/// Target mean-L2 error of `scheme` over the same inputs the pipeline uses.
fn oracle_target_error(scheme: StepScheme, dt: f64) -> f64 {
    let s = by_id("nodal_sink").unwrap();
    let set = generate_pairs(&s, scheme, dt, 500, 0).unwrap();
    let total: f64 = set.inputs().map(|x| dist(&oracle_scheme(scheme, x, dt), &nodal_sink_exact(x, dt))).sum();
    total / set.len() as f64
}

#[test]
fn criterion_2_target_error_orders() {
    let rows = order_study_rows();
    let mut pass = true;
    let mut detail = Vec::new();
    for (scheme, order, tol) in [(StepScheme::Euler, 2.0, 0.3), (StepScheme::Rk2, 3.0, 0.3), (StepScheme::Rk4, 5.0, 0.5)] {
        let (dts, errors, slope) = &rows[scheme.as_str()];
        let oracle: Vec<f64> = dts.iter().map(|&dt| oracle_target_error(scheme, dt)).collect();
        let agrees = errors.iter().zip(&oracle).all(|(e, o)| (e - o).abs() <= 1e-6 * o);
        let oracle_slope = ls_slope(dts, &oracle);
        pass &= agrees && (slope - order).abs() <= tol && (oracle_slope - slope).abs() <= 1e-4;
        detail.push(format!("{scheme} {slope:.3} (oracle {oracle_slope:.3}, want {order}±{tol})"));
    }
    verdict(2, "target_orders", pass, detail.join(", "));
}

#[test]
fn criterion_3_target_error_magnitudes() {
    let rows = order_study_rows();
    let mut pass = true;
    let mut detail = Vec::new();
    for (scheme, lo, hi) in [(StepScheme::Euler, 3e-3, 3e-2), (StepScheme::Rk2, 3e-4, 3e-3), (StepScheme::Rk4, 3e-6, 3e-5)] {
        let (dts, errors, _) = &rows[scheme.as_str()];
        let i = dts.iter().position(|&d| d == 0.1).unwrap();
        let oracle = oracle_target_error(scheme, 0.1);
        pass &= (errors[i] - oracle).abs() <= 1e-6 * oracle && (lo..=hi).contains(&errors[i]);
        detail.push(format!("{scheme} {:.3e} in [{lo:e}, {hi:e}]", errors[i]));
    }
    verdict(3, "target_magnitudes", pass, detail.join(", "));
}

#[test]
fn criterion_4_network_error_reaches_target_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::TargetStudy, "nodal_sink", dir.path());
    cfg.archs = vec![ArchSpec { layers: 1, neurons: 6 }];
    cfg.trace_every = 10;
    let report = experiment::run_target_study(&cfg).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &report.rows {
        let TargetKind::Scheme(scheme) = row.target else { unreachable!() };
        let oracle = oracle_target_error(scheme, 0.1);
        let fin = row.final_net_error().unwrap_or(f64::INFINITY);
        let ratio = fin / row.target_error;
        pass &= (row.target_error - oracle).abs() <= 1e-6 * oracle && (1.0 / 3.0..=3.0).contains(&ratio);
        detail.push(format!("{scheme} net {fin:.3e} / target {:.3e} = {ratio:.2}", row.target_error));
    }
    verdict(4, "convergence_to_target", pass, format!("{} (want ratio in [1/3, 3])", detail.join(", ")));
}

#[test]
fn criterion_5_star_point_reference_is_exact() {
    let s = by_id("star_point").unwrap();
    let set = generate_reference_pairs(&s, 0.1, 500, 0).unwrap();
    let decay = (-0.1f64).exp();
    let worst = set
        .pairs
        .iter()
        .flat_map(|p| p.y1.iter().zip(&p.y2).map(|(a, b)| (decay * a - b).abs()))
        .fold(0.0, f64::max);
    verdict(5, "linear_reference_exactness", worst <= 1e-10, format!("max deviation {worst:.2e} over {} pairs (tolerance 1e-10)", set.len()));
}

#[test]
fn criterion_6_zero_output_layer_gives_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut total = 0;
    for (input, layers, width) in [(2, 1, 6), (2, 2, 40), (4, 3, 16)] {
        let mut p = init_params(Architecture::new(input, layers, width).unwrap(), rng.random()).unwrap();
        p.zero_output_layer();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..input).map(|_| rng.random_range(-5.0..=5.0)).collect();
            total += 1;
            if p.resnet_forward(&x).unwrap() != x {
                mismatches += 1;
            }
        }
    }
    verdict(6, "resnet_identity", mismatches == 0, format!("{mismatches} of {total} inputs not mapped to themselves"));
}

#[test]
fn criterion_7_rk4_net_tracks_nodal_sink_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Trajectory, "nodal_sink", dir.path());
    cfg.schemes = vec![TargetKind::Scheme(StepScheme::Rk4)];
    cfg.archs = vec![ArchSpec { layers: 1, neurons: 6 }];
    cfg.trace_every = cfg.iterations;
    let report = experiment::run_trajectory(&cfg).unwrap();
    let exact: Vec<[f64; 2]> = report.reference.times.iter().map(|&t| nodal_sink_exact(&[0.0, -0.5], t)).collect();
    let ref_err = report.reference.states.iter().zip(&exact).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
    let net = report.nets[0].trajectory.as_ref().expect("rk4 net trajectory");
    let dev = net.states.iter().zip(&exact).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
    let pass = net.len() == 21 && ref_err <= 1e-10 && dev <= 1e-2;
    verdict(7, "trajectory_fidelity", pass, format!("max deviation {dev:.3e} over 20 steps (tolerance 1e-2), reference error {ref_err:.1e}"));
}

#[test]
fn criterion_8_euler_net_degrades_on_pendulum() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Trajectory, "pendulum", dir.path());
    cfg.schemes = vec![TargetKind::Scheme(StepScheme::Euler), TargetKind::Scheme(StepScheme::Rk4)];
    cfg.archs = vec![ArchSpec { layers: 2, neurons: 40 }];
    cfg.pairs = 2000;
    cfg.trace_every = cfg.iterations;
    let report = experiment::run_trajectory(&cfg).unwrap();
    let exact = pendulum_oracle([2.0, 0.0], 10.0, 200_000);
    let ref_err = dist(report.reference.last_state(), &exact);
    let final_err = |i: usize| {
        report.nets[i].trajectory.as_ref().map_or(f64::INFINITY, |t| dist(t.last_state(), &exact))
    };
    let (euler, rk4) = (final_err(0), final_err(1));
    let pass = ref_err <= 1e-8 && euler >= 10.0 * rk4;
    verdict(
        8,
        "euler_net_degradation",
        pass,
        format!("final-state error euler {euler:.3e}, rk4 {rk4:.3e}, ratio {:.1} (want >= 10)", euler / rk4),
    );
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_9_reruns_are_byte_identical() {
    let mut failures = Vec::new();
    let mut compared = 0;
    for kind in ExperimentKind::ALL {
        let system = match kind {
            ExperimentKind::Trajectory => "van_der_pol",
            _ => "pendulum",
        };
        let runs: Vec<_> = [Some(1), Some(3), Some(3)]
            .into_iter()
            .map(|jobs| {
                let dir = tempfile::tempdir().unwrap();
                let mut cfg = config(kind, system, dir.path());
                cfg.seed = 17;
                cfg.pairs = 60;
                cfg.iterations = 6;
                cfg.runs = 3;
                cfg.substeps = 50;
                cfg.jobs = jobs;
                cfg.densities = vec![20, 60];
                cfg.update_budget = 600;
                cfg.t_final = Some(1.0);
                if kind == ExperimentKind::ArchSweep {
                    cfg.archs = vec![ArchSpec { layers: 1, neurons: 4 }, ArchSpec { layers: 2, neurons: 8 }];
                }
                experiment::run(&cfg).unwrap();
                csv_files(dir.path())
            })
            .collect();
        for (name, bytes) in &runs[0] {
            compared += 1;
            if runs[1].get(name) != Some(bytes) || runs[2].get(name) != Some(bytes) {
                failures.push(format!("{kind}/{name}"));
            }
        }
    }
    verdict(9, "determinism", failures.is_empty() && compared > 0, format!("{compared} files compared, differing: {failures:?}"));
}
