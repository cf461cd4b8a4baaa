//! Removal of parameter values that scored poorly in a similar prior
//! experiment.

use crate::error::{Error, Result};
use crate::matcher::DEFAULT_THRESHOLD;
use crate::scalar::Scalar;
use crate::space::{ExperimentRecord, Level, SearchSpace};

pub const DEFAULT_CAP: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggressiveness {
    Fixed(f64),
    /// Derived from the matched prior's variogram.
    Auto,
}

impl std::fmt::Display for Aggressiveness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Aggressiveness::Fixed(p) => write!(f, "{p}"),
            Aggressiveness::Auto => f.write_str("auto"),
        }
    }
}

impl std::str::FromStr for Aggressiveness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Aggressiveness::Auto);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("aggressiveness `{s}` is not auto or a number")))?;
        Ok(Aggressiveness::Fixed(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    pub aggressiveness: Aggressiveness,
    /// Upper limit applied to automatic suggestions.
    pub cap: f64,
    pub corr_threshold: f64,
    /// Prior jobs required at a value before it can be removed.
    pub min_evidence: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            aggressiveness: Aggressiveness::Auto,
            cap: DEFAULT_CAP,
            corr_threshold: DEFAULT_THRESHOLD,
            min_evidence: 1,
        }
    }
}

impl PruneConfig {
    pub fn fixed(p_aggr: f64) -> Self {
        Self {
            aggressiveness: Aggressiveness::Fixed(p_aggr),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if let Aggressiveness::Fixed(p) = self.aggressiveness {
            if !unit(p) {
                return Err(Error::InvalidConfig(format!("aggressiveness {p} outside [0, 1]")));
            }
        }
        if !unit(self.cap) {
            return Err(Error::InvalidConfig(format!("cap {} outside [0, 1]", self.cap)));
        }
        if !(-1.0..=1.0).contains(&self.corr_threshold) {
            return Err(Error::InvalidConfig(format!(
                "correlation threshold {} outside [-1, 1]",
                self.corr_threshold
            )));
        }
        if self.min_evidence == 0 {
            return Err(Error::InvalidConfig("min_evidence must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub new_space: SearchSpace,
    /// Original-domain indices removed in this call, per parameter.
    pub removed: Vec<Vec<usize>>,
    /// Fraction of the original (unpruned) space no longer reachable.
    pub reduction: f64,
}

impl PruneOutcome {
    pub fn removed_values(&self) -> Vec<Vec<&Level>> {
        self.removed
            .iter()
            .enumerate()
            .map(|(d, idx)| {
                let values = self.new_space.domain(d).values();
                idx.iter().map(|&i| &values[i]).collect()
            })
            .collect()
    }

    pub fn removed_count(&self) -> usize {
        self.removed.iter().map(Vec::len).sum()
    }
}

pub fn prune<T: Scalar>(
    prior: &ExperimentRecord<T>,
    current: &SearchSpace,
    p_aggr: T,
) -> Result<PruneOutcome> {
    prune_with_evidence(prior, current, p_aggr, 1)
}

/// As [`prune`], removing a value only when at least `min_evidence` prior
/// jobs used it.
pub fn prune_with_evidence<T: Scalar>(
    prior: &ExperimentRecord<T>,
    current: &SearchSpace,
    p_aggr: T,
    min_evidence: usize,
) -> Result<PruneOutcome> {
    if !prior.space().same_structure(current) {
        return Err(Error::StructuralMismatch {
            record: prior.id().to_owned(),
        });
    }
    ValueEvidence::new(prior)?.prune(current, p_aggr, min_evidence)
}

/// What a prior says about each parameter value: how many of its jobs used
/// it and the best (shifted) output among them. Reusable across prunes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEvidence<T = f64> {
    counts: Vec<Vec<usize>>,
    best: Vec<Vec<T>>,
    /// Shifted maximum; the cut is `p_aggr` times this.
    top: T,
}

impl<T: Scalar> ValueEvidence<T> {
    pub fn new(prior: &ExperimentRecord<T>) -> Result<Self> {
        let jobs = prior.jobs();
        if jobs.is_empty() {
            return Err(Error::NoTrainingData);
        }
        let (lo, hi) = jobs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), j| {
            (lo.min(j.output), hi.max(j.output))
        });
        // a non-positive maximum would invert the cut; rank on shifted outputs
        let shift = if hi <= T::zero() { -lo } else { T::zero() };
        let space = prior.space();
        let mut counts = Vec::with_capacity(space.dims());
        let mut best = Vec::with_capacity(space.dims());
        for d in 0..space.dims() {
            let card = space.domain(d).len();
            let mut c = vec![0usize; card];
            let mut b = vec![T::neg_infinity(); card];
            for job in jobs {
                let v = job.point[d];
                c[v] += 1;
                b[v] = b[v].max(job.output + shift);
            }
            counts.push(c);
            best.push(b);
        }
        Ok(Self {
            counts,
            best,
            top: hi + shift,
        })
    }

    /// One pruning step of `current`, which must share the prior's structure.
    pub fn prune(&self, current: &SearchSpace, p_aggr: T, min_evidence: usize) -> Result<PruneOutcome> {
        if !(p_aggr >= T::zero() && p_aggr <= T::one()) {
            return Err(Error::InvalidConfig(format!("aggressiveness {p_aggr} outside [0, 1]")));
        }
        if current.dims() != self.counts.len()
            || (0..current.dims()).any(|d| current.domain(d).len() != self.counts[d].len())
        {
            return Err(Error::InvalidSpace("space does not match the pruning evidence".into()));
        }
        let cut = p_aggr * self.top;
        let min_evidence = min_evidence.max(1);
        let mut kept_sets = Vec::with_capacity(current.dims());
        let mut removed = Vec::with_capacity(current.dims());
        for d in 0..current.dims() {
            let (count, best) = (&self.counts[d], &self.best[d]);
            let (gone, kept): (Vec<usize>, Vec<usize>) = current
                .active(d)
                .iter()
                .partition(|&&v| count[v] >= min_evidence && best[v] < cut);
            if kept.is_empty() {
                let keep = gone
                    .iter()
                    .copied()
                    .reduce(|a, b| if best[b] > best[a] { b } else { a })
                    .expect("active sets are non-empty");
                kept_sets.push(vec![keep]);
                removed.push(gone.into_iter().filter(|&v| v != keep).collect());
            } else {
                kept_sets.push(kept);
                removed.push(gone);
            }
        }
        let new_space = if removed.iter().all(Vec::is_empty) {
            current.clone()
        } else {
            current.restrict(kept_sets)?
        };
        let reduction = 1.0 - new_space.size() as f64 / new_space.base_size() as f64;
        Ok(PruneOutcome {
            new_space,
            removed,
            reduction,
        })
    }
}

/// `1 - |after| / |before|` over the Cartesian products.
pub fn reduction_fraction(before: &SearchSpace, after: &SearchSpace) -> Result<f64> {
    if !after.is_subset_of(before) {
        return Err(Error::NotASubset);
    }
    Ok(1.0 - after.size() as f64 / before.size() as f64)
}
