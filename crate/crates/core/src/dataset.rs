//! Learning sets of `(y1, y2)` pairs.
//!
//! Initial states are drawn uniformly from the domain of interest; targets
//! come from one step of a finite-difference scheme, or from the refined
//! reference stepper. Pair `k` draws its coordinates from its own ChaCha
//! stream, so a set is reproducible from `(system, target, dt, count, seed)`
//! and independent of evaluation order.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrators::{self, StepScheme, DEFAULT_SUBSTEPS};
use crate::system::{Domain, OdeSystem};

/// Where the `y2` values of a learning set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    Scheme(StepScheme),
    Reference,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Scheme(s) => s.as_str(),
            TargetKind::Reference => "reference",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reference" {
            Ok(TargetKind::Reference)
        } else {
            s.parse().map(TargetKind::Scheme)
        }
    }
}

impl Serialize for TargetKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TargetKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPair {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Start time of the pair; the sampled time coordinate for autonomized
    /// systems, zero otherwise.
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningSet {
    pub pairs: Vec<DataPair>,
    pub system_id: String,
    pub target: TargetKind,
    pub dt: f64,
    pub seed: u64,
}

/// Sidecar metadata written next to a learning-set CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSetMeta {
    pub system_id: String,
    pub scheme: TargetKind,
    pub dt: f64,
    pub seed: u64,
    #[serde(rename = "J")]
    pub pairs: usize,
    pub dim: usize,
}

impl LearningSetMeta {
    pub fn from_json(s: &str) -> Result<Self> {
        let meta: LearningSetMeta = serde_json::from_str(s)?;
        if !(meta.dt > 0.0 && meta.dt.is_finite()) {
            return Err(Error::Parse(format!("non-positive dt {}", meta.dt)));
        }
        if meta.pairs == 0 || meta.dim == 0 {
            return Err(Error::Parse("learning set must have J ≥ 1 and dim ≥ 1".into()));
        }
        Ok(meta)
    }
}

fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bounds = domain.bounding_box();
    loop {
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        if domain.contains(&x) {
            return x;
        }
    }
}

/// `count` i.i.d. uniform points of `domain`. Disks use rejection sampling
/// from the bounding box.
pub fn sample_domain(domain: &Domain, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|k| draw_point(domain, &mut pair_rng(seed, k)))
        .collect())
}

fn pair_start_time(system: &OdeSystem, y1: &[f64]) -> f64 {
    system.time_coordinate().map_or(0.0, |i| y1[i])
}

fn generate(
    system: &OdeSystem,
    target: TargetKind,
    dt: f64,
    count: usize,
    seed: u64,
    substeps: usize,
) -> Result<LearningSet> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time lag must be positive, got {dt}")));
    }
    let inputs = sample_domain(system.domain(), count, seed)?;
    let results: Vec<Result<DataPair>> = inputs
        .into_par_iter()
        .map(|y1| {
            let t0 = pair_start_time(system, &y1);
            let y2 = match target {
                TargetKind::Scheme(s) => integrators::step(system, s, &y1, t0, dt)?,
                TargetKind::Reference => integrators::reference_step(system, &y1, t0, dt, substeps)?,
            };
            Ok(DataPair { y1, y2, t0 })
        })
        .collect();

    let mut pairs = Vec::with_capacity(count);
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => pairs.push(p),
            Err(Error::NonFiniteState(_)) => return Err(Error::NonFiniteTarget { pair: j }),
            Err(e) => return Err(e),
        }
    }
    Ok(LearningSet {
        pairs,
        system_id: system.id().to_string(),
        target,
        dt,
        seed,
    })
}

/// Pairs whose targets are one `scheme` step of size `dt`.
pub fn generate_pairs(system: &OdeSystem, scheme: StepScheme, dt: f64, count: usize, seed: u64) -> Result<LearningSet> {
    generate(system, TargetKind::Scheme(scheme), dt, count, seed, 1)
}

/// Pairs whose targets come from the refined reference stepper.
pub fn generate_reference_pairs(system: &OdeSystem, dt: f64, count: usize, seed: u64) -> Result<LearningSet> {
    generate_reference_pairs_with(system, dt, count, seed, DEFAULT_SUBSTEPS)
}

pub fn generate_reference_pairs_with(
    system: &OdeSystem,
    dt: f64,
    count: usize,
    seed: u64,
    substeps: usize,
) -> Result<LearningSet> {
    if substeps == 0 {
        return Err(invalid("reference targets need at least one substep"));
    }
    generate(system, TargetKind::Reference, dt, count, seed, substeps)
}

impl LearningSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.y1.len())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().map(|p| p.y1.as_slice())
    }

    pub fn targets(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().map(|p| p.y2.as_slice())
    }

    /// True when both sets hold the same `y1` values in the same order.
    pub fn shares_inputs(&self, other: &LearningSet) -> bool {
        self.len() == other.len() && self.pairs.iter().zip(&other.pairs).all(|(a, b)| a.y1 == b.y1)
    }

    pub fn meta(&self) -> LearningSetMeta {
        LearningSetMeta {
            system_id: self.system_id.clone(),
            scheme: self.target,
            dt: self.dt,
            seed: self.seed,
            pairs: self.len(),
            dim: self.dim(),
        }
    }

    fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["j".to_string()];
        h.extend((0..dim).map(|i| format!("y1_{i}")));
        h.extend((0..dim).map(|i| format!("y2_{i}")));
        h.push("t0".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.dim();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::header(dim))?;
        for (j, p) in self.pairs.iter().enumerate() {
            let mut row = Vec::with_capacity(2 * dim + 2);
            row.push(j.to_string());
            row.extend(p.y1.iter().chain(&p.y2).map(f64::to_string));
            row.push(p.t0.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the CSV body of a learning set; `meta` supplies the fields not
    /// stored in the CSV and the expected shape.
    pub fn read_csv<R: Read>(r: R, meta: &LearningSetMeta) -> Result<LearningSet> {
        let dim = meta.dim;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != Self::header(dim) {
            return Err(Error::Parse(format!("unexpected learning-set header {header:?}")));
        }
        let mut pairs = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 * dim + 2 {
                return Err(Error::Parse(format!("row {row}: expected {} fields", 2 * dim + 2)));
            }
            let j: usize = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad pair index `{}`", &rec[0])))?;
            if j != row {
                return Err(Error::Parse(format!("row {row}: pair index {j} out of order")));
            }
            let vals = rec
                .iter()
                .skip(1)
                .map(parse_finite)
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            pairs.push(DataPair {
                y1: vals[..dim].to_vec(),
                y2: vals[dim..2 * dim].to_vec(),
                t0: vals[2 * dim],
            });
        }
        if pairs.len() != meta.pairs {
            return Err(Error::Parse(format!("metadata says J = {}, CSV has {} rows", meta.pairs, pairs.len())));
        }
        Ok(LearningSet {
            pairs,
            system_id: meta.system_id.clone(),
            target: meta.scheme,
            dt: meta.dt,
            seed: meta.seed,
        })
    }

    /// Writes `path` (CSV) and its JSON sidecar at `path` with extension `json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf)?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        fs::write(path.with_extension("json"), meta + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LearningSet> {
        let meta = LearningSetMeta::from_json(&fs::read_to_string(path.with_extension("json"))?)?;
        LearningSet::read_csv(fs::File::open(path)?, &meta)
    }
}

pub(crate) fn parse_finite(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: `{s}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse(format!("non-finite value `{s}`")))
    }
}
