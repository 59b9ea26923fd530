//! Trajectories from repeated one-step application.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::integrators::{self, StepScheme};
use crate::network::{NetParams, SampleStepper};
use crate::system::OdeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    Resnet,
    Reference,
    Scheme(StepScheme),
}

impl fmt::Display for TrajectorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectorySource::Resnet => f.write_str("resnet"),
            TrajectorySource::Reference => f.write_str("reference"),
            TrajectorySource::Scheme(s) => write!(f, "scheme_{s}"),
        }
    }
}

/// States on the uniform grid `t0 + kΔ`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub source: TrajectorySource,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Same trajectory with every state multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Trajectory {
        for s in &mut self.states {
            s.iter_mut().for_each(|v| *v *= factor);
        }
        self
    }

    /// Max over grid points of the L2 distance to `other`.
    pub fn max_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(invalid("trajectories have different lengths"));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| crate::metrics::l2_distance(a, b))
            .fold(0.0, f64::max))
    }

    /// Writes `k,t,x_0..x_{n-1}`, keeping every `thin`-th row (and the last).
    pub fn write_csv<W: Write>(&self, w: W, thin: usize) -> Result<()> {
        let thin = thin.max(1);
        let dim = self.states.first().map_or(0, Vec::len);
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string(), "t".to_string()];
        header.extend((0..dim).map(|i| format!("x_{i}")));
        wtr.write_record(&header)?;
        let last = self.len().saturating_sub(1);
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            if k % thin != 0 && k != last {
                continue;
            }
            let mut row = vec![k.to_string(), t.to_string()];
            row.extend(s.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the CSV written by [`write_csv`](Trajectory::write_csv) with no thinning.
    pub fn read_csv<R: Read>(r: R, source: TrajectorySource) -> Result<Trajectory> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "k" || header[1] != "t" {
            return Err(Error::Parse(format!("unexpected trajectory header {header:?}")));
        }
        let dim = header.len() - 2;
        if header[2..].iter().enumerate().any(|(i, h)| *h != format!("x_{i}")) {
            return Err(Error::Parse(format!("unexpected trajectory header {header:?}")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 2 {
                return Err(Error::Parse(format!("row {row}: wrong field count")));
            }
            let k: usize = rec[0].parse().map_err(|_| Error::Parse(format!("row {row}: bad step index")))?;
            if k != row {
                return Err(Error::Parse(format!("row {row}: step index {k} out of order")));
            }
            times.push(crate::dataset::parse_finite(&rec[1])?);
            states.push(rec.iter().skip(2).map(crate::dataset::parse_finite).collect::<Result<Vec<_>>>()?);
        }
        if states.is_empty() {
            return Err(Error::Parse("trajectory has no rows".into()));
        }
        Ok(Trajectory { times, states, source })
    }
}

fn check(dt: f64, steps: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time lag must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    Ok(())
}

fn grid(t0: f64, dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t0 + k as f64 * dt).collect()
}

/// `p^{k+1} = p^k + N(p^k)` from `p^0 = x0`.
pub fn simulate_resnet(params: &NetParams, x0: &[f64], t0: f64, dt: f64, steps: usize) -> Result<Trajectory> {
    simulate_resnet_scaled(params, 1.0, x0, t0, dt, steps)
}

/// Rollout of a network trained in coordinates `u = x / scale`. `x0` and the
/// returned states are in original coordinates.
pub fn simulate_resnet_scaled(
    params: &NetParams,
    scale: f64,
    x0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    check(dt, steps)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {scale}")));
    }
    let arch = params.architecture();
    if x0.len() != arch.input_dim {
        return Err(Error::DimensionMismatch { expected: arch.input_dim, found: x0.len() });
    }
    let mut stepper = SampleStepper::new(arch);
    let mut u: Vec<f64> = x0.iter().map(|v| v / scale).collect();
    let mut next = vec![0.0; u.len()];
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for k in 1..=steps {
        stepper.predict(params, &u, &mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::TrajectoryBlowUp { step: k });
        }
        std::mem::swap(&mut u, &mut next);
        states.push(u.iter().map(|v| v * scale).collect());
    }
    Ok(Trajectory { times: grid(t0, dt, steps), states, source: TrajectorySource::Resnet })
}

fn simulate_with<F>(system: &OdeSystem, x0: &[f64], t0: f64, dt: f64, steps: usize, source: TrajectorySource, mut advance: F) -> Result<Trajectory>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    check(dt, steps)?;
    if x0.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: x0.len() });
    }
    let times = grid(t0, dt, steps);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for k in 1..=steps {
        let prev = &states[k - 1];
        let next = advance(prev, times[k - 1]).map_err(|e| match e {
            Error::NonFiniteState(_) => Error::TrajectoryBlowUp { step: k },
            other => other,
        })?;
        states.push(next);
    }
    Ok(Trajectory { times, states, source })
}

/// Reference trajectory: each Δ step is `substeps` refined RK4 steps.
pub fn simulate_reference(
    system: &OdeSystem,
    x0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory> {
    simulate_with(system, x0, t0, dt, steps, TrajectorySource::Reference, |x, t| {
        integrators::reference_step(system, x, t, dt, substeps)
    })
}

/// Trajectory of the finite-difference scheme itself at step `dt`.
pub fn simulate_scheme(system: &OdeSystem, scheme: StepScheme, x0: &[f64], t0: f64, dt: f64, steps: usize) -> Result<Trajectory> {
    simulate_with(system, x0, t0, dt, steps, TrajectorySource::Scheme(scheme), |x, t| {
        integrators::step(system, scheme, x, t, dt)
    })
}
