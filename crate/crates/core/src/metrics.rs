//! Error functionals and log-log order fitting.

use serde::{Deserialize, Serialize};

use crate::dataset::LearningSet;
use crate::error::{invalid, Error, Result};

/// Worst-case and average errors over `count` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub max_linf: f64,
    pub mean_l2: f64,
    pub count: usize,
}

fn check_lists<A: AsRef<[f64]>, B: AsRef<[f64]>>(outputs: &[A], references: &[B]) -> Result<()> {
    if outputs.is_empty() {
        return Err(invalid("error functionals need at least one pair"));
    }
    if outputs.len() != references.len() {
        return Err(invalid(format!(
            "{} outputs but {} references",
            outputs.len(),
            references.len()
        )));
    }
    for (o, r) in outputs.iter().zip(references) {
        if o.as_ref().len() != r.as_ref().len() {
            return Err(Error::DimensionMismatch { expected: r.as_ref().len(), found: o.as_ref().len() });
        }
    }
    Ok(())
}

/// `max_i ‖out_i - ref_i‖_∞`.
pub fn max_linf_error<A: AsRef<[f64]>, B: AsRef<[f64]>>(outputs: &[A], references: &[B]) -> Result<f64> {
    check_lists(outputs, references)?;
    Ok(outputs
        .iter()
        .zip(references)
        .flat_map(|(o, r)| o.as_ref().iter().zip(r.as_ref()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max))
}

/// `(1/J) Σ_i ‖out_i - ref_i‖_2`, a mean of norms rather than an RMS.
pub fn mean_l2_error<A: AsRef<[f64]>, B: AsRef<[f64]>>(outputs: &[A], references: &[B]) -> Result<f64> {
    check_lists(outputs, references)?;
    let total: f64 = outputs.iter().zip(references).map(|(o, r)| l2_distance(o.as_ref(), r.as_ref())).sum();
    Ok(total / outputs.len() as f64)
}

pub fn error_report<A: AsRef<[f64]>, B: AsRef<[f64]>>(outputs: &[A], references: &[B]) -> Result<ErrorReport> {
    Ok(ErrorReport {
        max_linf: max_linf_error(outputs, references)?,
        mean_l2: mean_l2_error(outputs, references)?,
        count: outputs.len(),
    })
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean L2 distance between scheme targets and reference targets on the
/// same inputs.
pub fn target_mean_l2_error(targets: &LearningSet, reference: &LearningSet) -> Result<f64> {
    if !targets.shares_inputs(reference) {
        return Err(invalid("target and reference sets do not share inputs"));
    }
    let t: Vec<&[f64]> = targets.targets().collect();
    let r: Vec<&[f64]> = reference.targets().collect();
    mean_l2_error(&t, &r)
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> Result<f64> {
    if dts.len() != errors.len() {
        return Err(invalid("dts and errors differ in length"));
    }
    if dts.len() < 3 {
        return Err(invalid(format!("order fit needs at least 3 points, got {}", dts.len())));
    }
    if dts.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("order fit needs positive finite inputs"));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("step sizes must be strictly decreasing"));
    }
    let xs: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
