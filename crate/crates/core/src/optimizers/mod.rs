//! Batch optimizers over discrete spaces that tolerate the space shrinking
//! between batches. Both maximize.

mod pso;
mod sa;

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::space::{Point, SearchSpace};

pub use pso::{Pso, PsoParams};
pub use sa::{metropolis_accept, Sa, SaParams};

pub const DEFAULT_BATCH_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Pso,
    Sa,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Pso => "pso",
            OptimizerKind::Sa => "sa",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(OptimizerKind::Pso),
            "sa" => Ok(OptimizerKind::Sa),
            _ => Err(Error::InvalidConfig(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub seed: u64,
    pub batch_size: usize,
    pub pso: PsoParams,
    pub sa: SaParams,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, seed: u64, batch_size: usize) -> Self {
        Self {
            kind,
            seed,
            batch_size,
            pso: PsoParams::default(),
            sa: SaParams::default(),
        }
    }
}

/// Outcome of one evaluation; `None` marks a failed job.
pub type Observation = (Point, Option<f64>);

#[derive(Debug, Clone)]
pub enum OptimizerState {
    Pso(Pso),
    Sa(Sa),
}

impl OptimizerState {
    pub fn init(space: &SearchSpace, cfg: &OptimizerConfig) -> Result<Self> {
        if cfg.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if cfg.batch_size as u64 > space.size() {
            return Err(Error::InvalidConfig(format!(
                "batch size {} exceeds the {} points of the space",
                cfg.batch_size,
                space.size()
            )));
        }
        Ok(match cfg.kind {
            OptimizerKind::Pso => OptimizerState::Pso(Pso::new(space, cfg)?),
            OptimizerKind::Sa => OptimizerState::Sa(Sa::new(space, cfg)?),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::Pso(_) => OptimizerKind::Pso,
            OptimizerState::Sa(_) => OptimizerKind::Sa,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        match self {
            OptimizerState::Pso(o) => o.space(),
            OptimizerState::Sa(o) => o.space(),
        }
    }

    pub fn best(&self) -> Option<(&Point, f64)> {
        match self {
            OptimizerState::Pso(o) => o.best(),
            OptimizerState::Sa(o) => o.best(),
        }
    }

    pub fn propose_batch(&mut self) -> Vec<Point> {
        match self {
            OptimizerState::Pso(o) => o.propose_batch(),
            OptimizerState::Sa(o) => o.propose_batch(),
        }
    }

    /// Non-finite values are treated as failures.
    pub fn observe(&mut self, results: &[Observation]) {
        match self {
            OptimizerState::Pso(o) => o.observe(results),
            OptimizerState::Sa(o) => o.observe(results),
        }
    }

    pub fn apply_space_update(&mut self, space: SearchSpace) -> Result<()> {
        if !space.is_subset_of(self.space()) {
            return Err(Error::NotASubset);
        }
        match self {
            OptimizerState::Pso(o) => o.apply_space_update(space),
            OptimizerState::Sa(o) => o.apply_space_update(space),
        }
        Ok(())
    }

    /// Re-seeds the search from fresh random points, keeping the best.
    pub fn restart(&mut self) {
        match self {
            OptimizerState::Pso(o) => o.restart(),
            OptimizerState::Sa(o) => o.restart(),
        }
    }
}

fn finite(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

/// Running maximum; earlier points win ties.
#[derive(Debug, Clone, Default)]
struct Best(Option<(Point, f64)>);

impl Best {
    fn offer(&mut self, p: &Point, v: f64) -> bool {
        match &self.0 {
            Some((_, b)) if *b >= v => false,
            _ => {
                self.0 = Some((p.clone(), v));
                true
            }
        }
    }

    fn get(&self) -> Option<(&Point, f64)> {
        self.0.as_ref().map(|(p, v)| (p, *v))
    }
}

const SAMPLE_ATTEMPTS: usize = 1000;

/// Uniform point over the surviving values, preferring feasible ones.
fn random_point(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Point {
    let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        space
            .active_sets()
            .iter()
            .map(|a| a[rng.gen_range(0..a.len())])
            .collect()
    };
    for _ in 0..SAMPLE_ATTEMPTS {
        let c = draw(rng);
        if space.is_feasible(&c) {
            return Point::new(c);
        }
    }
    let feasible: Vec<Point> = space.enumerate().collect();
    if feasible.is_empty() {
        Point::new(draw(rng))
    } else {
        feasible[rng.gen_range(0..feasible.len())].clone()
    }
}

/// `n` distinct uniform points when the space allows it.
fn distinct_points(space: &SearchSpace, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.saturating_mul(50).max(SAMPLE_ATTEMPTS) {
        if out.len() == n {
            return out;
        }
        let p = random_point(space, rng);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    let mut rest: Vec<Point> = space.enumerate().filter(|p| !seen.contains(p)).collect();
    while out.len() < n {
        if rest.is_empty() {
            let p = out[rng.gen_range(0..out.len())].clone();
            out.push(p);
        } else {
            out.push(rest.swap_remove(rng.gen_range(0..rest.len())));
        }
    }
    out
}
