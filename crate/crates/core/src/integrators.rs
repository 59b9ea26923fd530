//! One-step explicit schemes used to build training targets.
//!
//! [`StepScheme::Rk4`] is the 3/8-rule variant with nodes `0, Δ/3, 2Δ/3, Δ`
//! and weights `(1, 3, 3, 1)/8`, not the classical RK4. The reference
//! stepper composes the same scheme on a mesh refined by `substeps`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::system::OdeSystem;

/// Substeps per Δ used for reference targets and trajectories.
pub const DEFAULT_SUBSTEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScheme {
    Euler,
    Rk2,
    #[serde(alias = "rk4_38")]
    Rk4,
}

impl StepScheme {
    pub const ALL: [StepScheme; 3] = [StepScheme::Euler, StepScheme::Rk2, StepScheme::Rk4];

    pub fn formal_order(self) -> u32 {
        match self {
            StepScheme::Euler => 1,
            StepScheme::Rk2 => 2,
            StepScheme::Rk4 => 4,
        }
    }

    /// Order of the one-step target error `‖y2 - x(t0 + Δ)‖`.
    pub fn target_error_order(self) -> u32 {
        self.formal_order() + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepScheme::Euler => "euler",
            StepScheme::Rk2 => "rk2",
            StepScheme::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for StepScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(StepScheme::Euler),
            "rk2" => Ok(StepScheme::Rk2),
            "rk4" | "rk4_38" => Ok(StepScheme::Rk4),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// Stage storage reused across steps.
struct Stages {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn check_args(system: &OdeSystem, x: &[f64], dt: f64) -> Result<()> {
    if x.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: x.len() });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("step size must be positive and finite, got {dt}")));
    }
    Ok(())
}

fn finite(x: Vec<f64>, what: &'static str) -> Result<Vec<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::NonFiniteState(what))
    }
}

fn euler_in_place(system: &OdeSystem, x: &mut [f64], t: f64, dt: f64, s: &mut Stages) {
    system.eval_into(x, t, &mut s.k1);
    for (xi, k) in x.iter_mut().zip(&s.k1) {
        *xi += dt * k;
    }
}

#[allow(clippy::needless_range_loop)]
fn rk2_in_place(system: &OdeSystem, x: &mut [f64], t: f64, dt: f64, s: &mut Stages) {
    system.eval_into(x, t, &mut s.k1);
    for i in 0..x.len() {
        s.tmp[i] = x[i] + dt * s.k1[i];
    }
    system.eval_into(&s.tmp, t + dt, &mut s.k2);
    for i in 0..x.len() {
        x[i] += dt * (0.5 * s.k1[i] + 0.5 * s.k2[i]);
    }
}

#[allow(clippy::needless_range_loop)]
fn rk4_38_in_place(system: &OdeSystem, x: &mut [f64], t: f64, dt: f64, s: &mut Stages) {
    let n = x.len();
    let third = dt / 3.0;
    system.eval_into(x, t, &mut s.k1);
    for i in 0..n {
        s.tmp[i] = x[i] + third * s.k1[i];
    }
    system.eval_into(&s.tmp, t + third, &mut s.k2);
    for i in 0..n {
        s.tmp[i] = x[i] - third * s.k1[i] + dt * s.k2[i];
    }
    system.eval_into(&s.tmp, t + 2.0 * third, &mut s.k3);
    for i in 0..n {
        s.tmp[i] = x[i] + dt * s.k1[i] - dt * s.k2[i] + dt * s.k3[i];
    }
    system.eval_into(&s.tmp, t + dt, &mut s.k4);
    let w = dt / 8.0;
    for i in 0..n {
        x[i] += w * (s.k1[i] + 3.0 * s.k2[i] + 3.0 * s.k3[i] + s.k4[i]);
    }
}

/// `x + dt · F(x, t)`.
pub fn euler_step(system: &OdeSystem, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    step(system, StepScheme::Euler, x, t, dt)
}

/// Heun's method: trapezoid of `F(x, t)` and `F(x + dt·k1, t + dt)`.
pub fn rk2_step(system: &OdeSystem, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    step(system, StepScheme::Rk2, x, t, dt)
}

/// One step of the 3/8-rule fourth-order Runge–Kutta method.
pub fn rk4_38_step(system: &OdeSystem, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    step(system, StepScheme::Rk4, x, t, dt)
}

pub fn step(system: &OdeSystem, scheme: StepScheme, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    check_args(system, x, dt)?;
    let mut stages = Stages::new(x.len());
    let mut out = x.to_vec();
    match scheme {
        StepScheme::Euler => euler_in_place(system, &mut out, t, dt, &mut stages),
        StepScheme::Rk2 => rk2_in_place(system, &mut out, t, dt, &mut stages),
        StepScheme::Rk4 => rk4_38_in_place(system, &mut out, t, dt, &mut stages),
    }
    finite(out, scheme.as_str())
}

/// `substeps` compositions of [`rk4_38_step`] with inner step `dt / substeps`.
pub fn reference_step(system: &OdeSystem, x: &[f64], t: f64, dt: f64, substeps: usize) -> Result<Vec<f64>> {
    check_args(system, x, dt)?;
    if substeps == 0 {
        return Err(invalid("reference stepper needs at least one substep"));
    }
    let h = dt / substeps as f64;
    let mut stages = Stages::new(x.len());
    let mut out = x.to_vec();
    for i in 0..substeps {
        rk4_38_in_place(system, &mut out, t + i as f64 * h, h, &mut stages);
    }
    finite(out, "reference")
}
