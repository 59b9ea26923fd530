//! Benchmark dynamical systems.
//!
//! Every system is exposed as an explicit first-order ODE `ẋ = F(x, t)` on a
//! domain of interest, together with the time lag used to build its learning
//! pairs. Non-autonomous systems are turned into autonomous ones with
//! [`autonomize`]; systems with large state magnitudes are rewritten in scaled
//! coordinates with [`scale_system`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Right-hand side `F(x, t)`, written into the output slice.
pub type RhsFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Product of closed intervals, one per coordinate.
    Box { bounds: Vec<(f64, f64)> },
    /// Closed planar disk `|x - center|² ≤ radius²`.
    Disk { center: [f64; 2], radius: f64 },
}

impl Domain {
    pub fn boxed(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("box domain needs at least one interval"));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(invalid(format!("interval {i} is not a valid [lo, hi]: [{lo}, {hi}]")));
            }
        }
        Ok(Domain::Box { bounds })
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(invalid(format!("invalid disk: center {center:?}, radius {radius}")));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { bounds } => bounds.len(),
            Domain::Disk { .. } => 2,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Box { bounds } => x
                .iter()
                .zip(bounds)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi),
            Domain::Disk { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Domain::Box { bounds } => bounds.clone(),
            Domain::Disk { center, radius } => vec![
                (center[0] - radius, center[0] + radius),
                (center[1] - radius, center[1] + radius),
            ],
        }
    }

    /// The image of the domain under `x ↦ x / factor`.
    pub fn scaled(&self, factor: f64) -> Domain {
        match self {
            Domain::Box { bounds } => Domain::Box {
                bounds: bounds.iter().map(|&(lo, hi)| (lo / factor, hi / factor)).collect(),
            },
            Domain::Disk { center, radius } => Domain::Disk {
                center: [center[0] / factor, center[1] / factor],
                radius: radius / factor,
            },
        }
    }

    /// Appends one more interval. Only box domains can be extended.
    pub fn extended(&self, interval: (f64, f64)) -> Result<Domain> {
        match self {
            Domain::Box { bounds } => {
                let mut bounds = bounds.clone();
                bounds.push(interval);
                Domain::boxed(bounds)
            }
            Domain::Disk { .. } => Err(invalid("cannot extend a disk domain with a time interval")),
        }
    }
}

/// Initial condition and horizon used for trajectory plots, in original
/// (unscaled) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySetup {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t_final: f64,
}

/// A named dynamical system `ẋ = F(x, t)` with its domain of interest and
/// default time lag. Immutable after construction; cheap to clone.
#[derive(Clone)]
pub struct OdeSystem {
    id: String,
    dim: usize,
    rhs: Arc<RhsFn>,
    domain: Domain,
    default_dt: f64,
    is_autonomous: bool,
    time_interval: Option<(f64, f64)>,
    time_coordinate: Option<usize>,
    scale: f64,
    trajectory: Option<TrajectorySetup>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("default_dt", &self.default_dt)
            .field("is_autonomous", &self.is_autonomous)
            .field("time_interval", &self.time_interval)
            .field("time_coordinate", &self.time_coordinate)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl OdeSystem {
    /// An autonomous system; `rhs` must ignore its time argument.
    pub fn autonomous<F>(id: impl Into<String>, domain: Domain, default_dt: f64, rhs: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        Self::build(id.into(), domain, default_dt, true, None, Arc::new(rhs))
    }

    /// A system whose right-hand side depends on `t`. `time_interval` is the
    /// time window of interest, used when the system is autonomized.
    pub fn non_autonomous<F>(
        id: impl Into<String>,
        domain: Domain,
        time_interval: (f64, f64),
        default_dt: f64,
        rhs: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        let (lo, hi) = time_interval;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("invalid time interval [{lo}, {hi}]")));
        }
        Self::build(id.into(), domain, default_dt, false, Some(time_interval), Arc::new(rhs))
    }

    fn build(
        id: String,
        domain: Domain,
        default_dt: f64,
        is_autonomous: bool,
        time_interval: Option<(f64, f64)>,
        rhs: Arc<RhsFn>,
    ) -> Result<Self> {
        if !(default_dt > 0.0 && default_dt.is_finite()) {
            return Err(invalid(format!("default time lag must be positive, got {default_dt}")));
        }
        Ok(OdeSystem {
            id,
            dim: domain.dim(),
            rhs,
            domain,
            default_dt,
            is_autonomous,
            time_interval,
            time_coordinate: None,
            scale: 1.0,
            trajectory: None,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_trajectory(mut self, x0: Vec<f64>, t0: f64, t_final: f64) -> Self {
        self.trajectory = Some(TrajectorySetup { x0, t0, t_final });
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn default_dt(&self) -> f64 {
        self.default_dt
    }

    pub fn is_autonomous(&self) -> bool {
        self.is_autonomous
    }

    pub fn time_interval(&self) -> Option<(f64, f64)> {
        self.time_interval
    }

    /// Index of the state coordinate that carries time, for autonomized systems.
    pub fn time_coordinate(&self) -> Option<usize> {
        self.time_coordinate
    }

    /// Factor between original and internal coordinates: `x = scale · u`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn trajectory(&self) -> Option<&TrajectorySetup> {
        self.trajectory.as_ref()
    }

    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.rhs)(x, t, out)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut out = vec![0.0; self.dim];
        (self.rhs)(x, t, &mut out);
        Ok(out)
    }
}

/// Appends time as a state coordinate with unit derivative.
pub fn autonomize(system: &OdeSystem) -> Result<OdeSystem> {
    if system.is_autonomous {
        return Err(invalid(format!("system `{}` is already autonomous", system.id)));
    }
    let interval = system
        .time_interval
        .ok_or_else(|| invalid("non-autonomous system has no time interval"))?;
    let n = system.dim;
    let inner = Arc::clone(&system.rhs);
    let rhs = move |x: &[f64], _t: f64, out: &mut [f64]| {
        inner(&x[..n], x[n], &mut out[..n]);
        out[n] = 1.0;
    };
    let domain = system.domain.extended(interval)?;
    let mut auto = OdeSystem::build(
        format!("{}_autonomized", system.id),
        domain,
        system.default_dt,
        true,
        None,
        Arc::new(rhs),
    )?;
    auto.time_coordinate = Some(n);
    auto.scale = system.scale;
    auto.trajectory = system.trajectory.as_ref().map(|s| {
        let mut x0 = s.x0.clone();
        x0.push(s.t0);
        TrajectorySetup { x0, t0: s.t0, t_final: s.t_final }
    });
    Ok(auto)
}

/// Rewrites the system in coordinates `u = x / factor`:
/// `u̇ = F(factor · u, t) / factor`.
pub fn scale_system(system: &OdeSystem, factor: f64) -> Result<OdeSystem> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(invalid(format!("scale factor must be positive, got {factor}")));
    }
    let inner = Arc::clone(&system.rhs);
    let n = system.dim;
    let rhs = move |u: &[f64], t: f64, out: &mut [f64]| {
        let x: Vec<f64> = u.iter().map(|v| factor * v).collect();
        inner(&x, t, out);
        for o in out.iter_mut().take(n) {
            *o /= factor;
        }
    };
    let mut scaled = OdeSystem::build(
        format!("{}_scaled", system.id),
        system.domain.scaled(factor),
        system.default_dt,
        system.is_autonomous,
        system.time_interval,
        Arc::new(rhs),
    )?;
    scaled.time_coordinate = system.time_coordinate;
    scaled.scale = system.scale * factor;
    scaled.trajectory = system.trajectory.clone();
    Ok(scaled)
}

fn linear(
    id: &str,
    a: [[f64; 2]; 2],
    b: [f64; 2],
    domain: Domain,
    trajectory: Option<[f64; 2]>,
) -> OdeSystem {
    let sys = OdeSystem::autonomous(id, domain, 0.1, move |x, _t, out| {
        out[0] = a[0][0] * x[0] + a[0][1] * x[1] + b[0];
        out[1] = a[1][0] * x[0] + a[1][1] * x[1] + b[1];
    })
    .expect("static linear system definition");
    match trajectory {
        Some(x0) => sys.with_trajectory(x0.to_vec(), 0.0, 2.0),
        None => sys,
    }
}

/// Coefficients `(A, b)` of the six planar linear systems `ẋ = Ax + b`.
pub fn linear_coefficients(id: &str) -> Option<([[f64; 2]; 2], [f64; 2])> {
    Some(match id {
        "saddle" => ([[1.0, 1.0], [1.0, -1.0]], [-2.0, 0.0]),
        "nodal_sink" => ([[-2.0, 1.0], [1.0, -2.0]], [-2.0, 1.0]),
        "improper_node" => ([[1.0, -4.0], [4.0, -7.0]], [0.0, 0.0]),
        "star_point" => ([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]),
        "center_point" => ([[1.0, 2.0], [-5.0, -1.0]], [0.0, 0.0]),
        "spiral_point" => ([[-1.0, -1.0], [2.0, -1.0]], [-1.0, 5.0]),
        _ => return None,
    })
}

fn unit_square_box(lo: f64, hi: f64) -> Domain {
    Domain::boxed(vec![(lo, hi), (lo, hi)]).expect("static box")
}

/// Damped pendulum `ẋ1 = x2, ẋ2 = -γ x2 - ω² sin x1`.
pub const PENDULUM_OMEGA_SQ: f64 = 8.91;
pub const PENDULUM_GAMMA: f64 = 0.2;

pub const VAN_DER_POL_MU: f64 = 0.2;

pub const FITZHUGH_NAGUMO_K: f64 = 0.5;

/// Parameters of the genetic toggle switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToggleParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
    pub iptg: f64,
    /// Exponent on `(1 + [IPTG]/K)` in the algebraic relation for `z`.
    pub eta: f64,
}

impl Default for ToggleParams {
    fn default() -> Self {
        ToggleParams {
            alpha1: 156.25,
            alpha2: 15.6,
            beta: 2.5,
            gamma: 1.0,
            k: 2.9618e-5,
            iptg: 1e-5,
            eta: 2.0,
        }
    }
}

pub const TOGGLE_SCALE: f64 = 20.0;

/// Toggle switch with the algebraic variable `z = x1 / (1 + [IPTG]/K)^η`
/// substituted into the second equation.
pub fn toggle_switch(p: ToggleParams) -> OdeSystem {
    let inducer = (1.0 + p.iptg / p.k).powf(p.eta);
    OdeSystem::autonomous("toggle", unit_square_box(0.0, 20.0), 0.05, move |x, _t, out| {
        let z = x[0] / inducer;
        out[0] = p.alpha1 / (1.0 + x[1].powf(p.beta)) - x[0];
        out[1] = p.alpha2 / (1.0 + z.powf(p.gamma)) - x[1];
    })
    .expect("static toggle definition")
    .with_trajectory(vec![19.0, 17.0], 0.0, 5.0)
}

/// Parameters of the nonlinear electric network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricParams {
    pub c: f64,
    pub l: f64,
    pub u0: f64,
    pub g0: f64,
    pub g_inf: f64,
}

impl Default for ElectricParams {
    fn default() -> Self {
        ElectricParams { c: 1e-2, l: 1.0, u0: 1.0, g0: -0.1, g_inf: 0.25 }
    }
}

/// Branch currents `(v1, v2)` solving the two algebraic constraints at `x`.
pub fn electric_branch_currents(p: &ElectricParams, x: &[f64]) -> (f64, f64) {
    let v1 = (p.g0 - p.g_inf) * p.u0 * (x[0] / p.u0).tanh() + p.g_inf * x[0];
    let v2 = -x[1] - v1;
    (v1, v2)
}

/// Electric network with both algebraic equations eliminated in closed form.
pub fn electric_network(p: ElectricParams) -> OdeSystem {
    let domain = Domain::boxed(vec![(-2.0, 2.0), (-0.2, 0.2)]).expect("static box");
    OdeSystem::autonomous("electric_network", domain, 0.05, move |x, _t, out| {
        let (_, v2) = electric_branch_currents(&p, x);
        out[0] = v2 / p.c;
        out[1] = x[0] / p.l;
    })
    .expect("static electric network definition")
    .with_trajectory(vec![1.0, 0.15], 0.0, 0.5)
}

fn non_autonomous_3d() -> OdeSystem {
    let domain = Domain::boxed(vec![(-5.0, 5.0), (-10.0, 0.0), (-6.0, 4.0)]).expect("static box");
    OdeSystem::non_autonomous("nonautonomous", domain, (1.0, 2.0), 0.05, |x, t, out| {
        let decay = (-t).exp();
        out[0] = x[0] + x[2] - t + decay;
        out[1] = x[0] + x[1] + 5.0;
        out[2] = -2.0 * x[0] - x[2] - 2.0 * t - decay;
    })
    .expect("static non-autonomous definition")
    .with_trajectory(vec![2.0, -9.0, 0.0], 1.1, 2.0)
}

/// All benchmark systems, in a fixed order.
pub fn catalog() -> Vec<OdeSystem> {
    let mut systems = Vec::new();

    let linear_specs: [(&str, Domain, Option<[f64; 2]>); 6] = [
        ("saddle", unit_square_box(0.0, 2.0), Some([1.5, 0.0])),
        (
            "nodal_sink",
            Domain::boxed(vec![(-2.0, 0.0), (-1.0, 1.0)]).expect("static box"),
            Some([0.0, -0.5]),
        ),
        ("improper_node", unit_square_box(-1.0, 1.0), None),
        ("star_point", unit_square_box(-1.0, 1.0), None),
        ("center_point", unit_square_box(-1.0, 1.0), None),
        ("spiral_point", Domain::disk([-2.0, 1.0], 1.0).expect("static disk"), None),
    ];
    for (id, domain, x0) in linear_specs {
        let (a, b) = linear_coefficients(id).expect("listed linear system");
        systems.push(linear(id, a, b, domain, x0));
    }

    let pi = std::f64::consts::PI;
    systems.push(
        OdeSystem::autonomous(
            "pendulum",
            Domain::boxed(vec![(-pi, pi), (-2.0 * pi, 2.0 * pi)]).expect("static box"),
            0.1,
            |x, _t, out| {
                out[0] = x[1];
                out[1] = -PENDULUM_GAMMA * x[1] - PENDULUM_OMEGA_SQ * x[0].sin();
            },
        )
        .expect("static pendulum")
        .with_trajectory(vec![2.0, 0.0], 0.0, 10.0),
    );

    systems.push(
        OdeSystem::autonomous(
            "four_critical",
            Domain::boxed(vec![(-4.0, 4.0), (-3.0, 3.0)]).expect("static box"),
            0.05,
            |x, _t, out| {
                out[0] = -(x[0] - x[1]) * (1.0 - x[0] - x[1]);
                out[1] = x[0] * (2.0 + x[1]);
            },
        )
        .expect("static four-critical-point system")
        .with_trajectory(vec![2.0, 1.0], 0.0, 4.0),
    );

    systems.push(
        OdeSystem::autonomous("cubic_barrier", unit_square_box(-2.0, 2.0), 0.1, |x, _t, out| {
            let r = x[0] * x[0] + x[1] * x[1] - 1.0;
            out[0] = x[1] - x[0] * r;
            out[1] = -x[0] - x[1] * r;
        })
        .expect("static cubic system")
        .with_trajectory(vec![2.0, 0.0], 0.0, 7.0),
    );

    systems.push(
        OdeSystem::autonomous("lotka_volterra", unit_square_box(0.0, 5.0), 0.1, |x, _t, out| {
            out[0] = x[0] * (1.0 - 0.2 * x[0] - 2.0 * x[1] / (x[0] + 6.0));
            out[1] = x[1] * (-0.25 + x[0] / (x[0] + 6.0));
        })
        .expect("static Lotka-Volterra")
        .with_trajectory(vec![3.0, 3.0], 0.0, 20.0),
    );

    let nonauto = non_autonomous_3d();
    let nonauto_4d = autonomize(&nonauto)
        .expect("non-autonomous system autonomizes")
        .with_id("nonautonomous_4d");
    systems.push(nonauto);
    systems.push(nonauto_4d);

    systems.push(
        OdeSystem::autonomous(
            "van_der_pol",
            Domain::boxed(vec![(-3.0, 3.0), (-20.0, 20.0)]).expect("static box"),
            0.05,
            |x, _t, out| {
                out[0] = x[1];
                out[1] = -x[0] + VAN_DER_POL_MU * (1.0 - x[0] * x[0]) * x[1];
            },
        )
        .expect("static Van der Pol")
        .with_trajectory(vec![-3.0, 2.0], 0.0, 10.0),
    );

    systems.push(
        OdeSystem::autonomous("fitzhugh_nagumo", unit_square_box(-5.0, 5.0), 0.05, |x, _t, out| {
            out[0] = 3.0 * (x[0] + x[1] - x[0].powi(3) / 3.0 - FITZHUGH_NAGUMO_K);
            out[1] = -(x[0] + 0.8 * x[1] - 0.7) / 3.0;
        })
        .expect("static FitzHugh-Nagumo")
        .with_trajectory(vec![-1.0, 2.0], 0.0, 1.0),
    );

    let toggle = toggle_switch(ToggleParams::default());
    let toggle_scaled = scale_system(&toggle, TOGGLE_SCALE)
        .expect("positive scale")
        .with_id("toggle_scaled");
    systems.push(toggle);
    systems.push(toggle_scaled);

    systems.push(electric_network(ElectricParams::default()));

    systems
}

/// Stable identifiers of every cataloged system.
pub fn system_ids() -> Vec<String> {
    catalog().into_iter().map(|s| s.id).collect()
}

/// Looks up a cataloged system by identifier.
pub fn by_id(id: &str) -> Result<OdeSystem> {
    catalog()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownSystem(id.to_string()))
}
