//! Similarity between experiments by normalized cross-correlation of their
//! surrogates over a common sample of points.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{ExperimentRecord, Point, SearchSpace};
use crate::surrogate::{KnnSurrogate, SamplePredictor, Surrogate};

/// Spaces up to this many points are compared on their full enumeration.
pub const FULL_ENUMERATION_LIMIT: usize = 20_000;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub const DEFAULT_SAMPLE_SEED: u64 = 0x5eed_0f_c0ffee;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T = f64> {
    pub prior_id: String,
    pub n_corr: T,
    pub sample_size: usize,
}

fn mean_and_sd<T: Scalar>(xs: &[T]) -> (T, T) {
    let s = T::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<T>() / s;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / s;
    (mean, var.sqrt())
}

fn is_degenerate<T: Scalar>(xs: &[T], sd: T) -> bool {
    let scale = xs.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    !sd.is_finite() || sd <= T::of(16.0) * T::epsilon() * scale || sd == T::zero()
}

/// Normalized cross-correlation with population standard deviations,
/// clamped to `[-1, 1]`.
pub fn n_corr<T: Scalar>(f: &[T], p: &[T]) -> Result<T> {
    if f.len() != p.len() {
        return Err(Error::LengthMismatch {
            left: f.len(),
            right: p.len(),
        });
    }
    if f.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: f.len(),
        });
    }
    let (fm, fs) = mean_and_sd(f);
    let (pm, ps) = mean_and_sd(p);
    if is_degenerate(f, fs) || is_degenerate(p, ps) {
        return Err(Error::DegenerateSurrogate("zero variance in sample".into()));
    }
    let s = T::of_usize(f.len());
    let sum: T = f
        .iter()
        .zip(p)
        .map(|(&a, &b)| (a - fm) * (b - pm) / (fs * ps))
        .sum();
    Ok((sum / s).max(-T::one()).min(T::one()))
}

/// Standardized sample vector `(x - mean) / sd`; correlating two profiles
/// is a dot product divided by the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile<T = f64> {
    z: Vec<T>,
}

impl<T: Scalar> CorrelationProfile<T> {
    pub fn new(values: &[T]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: values.len(),
            });
        }
        let (m, sd) = mean_and_sd(values);
        if is_degenerate(values, sd) {
            return Err(Error::DegenerateSurrogate("zero variance in sample".into()));
        }
        Ok(Self {
            z: values.iter().map(|&x| (x - m) / sd).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn correlate(&self, other: &Self) -> Result<T> {
        if self.z.len() != other.z.len() {
            return Err(Error::LengthMismatch {
                left: self.z.len(),
                right: other.z.len(),
            });
        }
        Ok((dot(&self.z, &other.z) / T::of_usize(self.z.len())).max(-T::one()).min(T::one()))
    }
}

/// Four independent partial sums, combined pairwise; the order is fixed so
/// results are reproducible.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The points both surrogates are evaluated on: the full enumeration of
/// the original space when it has at most [`FULL_ENUMERATION_LIMIT`]
/// points, otherwise a seeded uniform sample of that many feasible points.
pub fn common_sample(space: &SearchSpace, seed: u64) -> Vec<Point> {
    let full = space.full();
    if full.size() <= FULL_ENUMERATION_LIMIT as u64 {
        return full.enumerate().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards = full.cardinalities();
    let mut out = Vec::with_capacity(FULL_ENUMERATION_LIMIT);
    let mut attempts = 0usize;
    while out.len() < FULL_ENUMERATION_LIMIT && attempts < FULL_ENUMERATION_LIMIT * 1000 {
        attempts += 1;
        let coords: Vec<usize> = cards.iter().map(|&n| rng.gen_range(0..n)).collect();
        if full.is_feasible(&coords) {
            out.push(Point::new(coords));
        }
    }
    out
}

/// A prior experiment prepared for repeated matching.
#[derive(Debug, Clone)]
pub struct PriorProfile<T = f64> {
    pub id: String,
    /// `None` when the prior's surrogate is constant on the sample.
    pub profile: Option<CorrelationProfile<T>>,
}

impl<T: Scalar> PriorProfile<T> {
    pub fn compute(record: &ExperimentRecord<T>, sample: &[Point]) -> Result<Self> {
        let surrogate = record.fit_surrogate()?;
        let cards = surrogate.space().cardinalities();
        if let Some(p) = sample
            .iter()
            .find(|p| p.len() != cards.len() || p.coords().iter().zip(&cards).any(|(&c, &n)| c >= n))
        {
            return Err(Error::InvalidPoint {
                param: record.id().to_owned(),
                reason: format!("sample point {p} outside the space"),
            });
        }
        // column-wise accumulation; agrees exactly with `sample_on`
        let mut predictor = SamplePredictor::new(sample, surrogate.k(), Arc::clone(surrogate.table()))?;
        for (p, v) in surrogate.training() {
            predictor.add(p, *v);
        }
        let values = predictor.predictions().ok_or(Error::NoTrainingData)?;
        Ok(Self {
            id: record.id().to_owned(),
            profile: CorrelationProfile::new(&values).ok(),
        })
    }
}

/// Index and score of the best prior whose correlation exceeds `threshold`;
/// ties go to the smaller id.
pub fn best_match<'a, T: Scalar>(
    priors: impl IntoIterator<Item = &'a PriorProfile<T>>,
    current: &CorrelationProfile<T>,
    threshold: T,
) -> Result<Option<(usize, MatchResult<T>)>> {
    let mut best: Option<(usize, &'a str, T)> = None;
    for (i, prior) in priors.into_iter().enumerate() {
        let Some(profile) = &prior.profile else { continue };
        let c = current.correlate(profile)?;
        let better = match best {
            None => true,
            Some((_, id, b)) => c > b || (c == b && prior.id.as_str() < id),
        };
        if better {
            best = Some((i, prior.id.as_str(), c));
        }
    }
    Ok(best.filter(|&(_, _, c)| c > threshold).map(|(i, id, c)| {
        (
            i,
            MatchResult {
                prior_id: id.to_owned(),
                n_corr: c,
                sample_size: current.len(),
            },
        )
    }))
}

/// Picks the prior most correlated with `current` over the common sample,
/// provided the correlation exceeds `threshold`.
pub fn select_previous<T: Scalar>(
    kb: &[ExperimentRecord<T>],
    current: &KnnSurrogate<T>,
    threshold: T,
) -> Result<Option<MatchResult<T>>> {
    let sample = common_sample(current.space(), DEFAULT_SAMPLE_SEED);
    select_previous_on(kb, current, threshold, &sample)
}

pub fn select_previous_on<T: Scalar>(
    kb: &[ExperimentRecord<T>],
    current: &KnnSurrogate<T>,
    threshold: T,
    sample: &[Point],
) -> Result<Option<MatchResult<T>>> {
    for record in kb {
        if !record.space().same_structure(current.space()) {
            return Err(Error::StructuralMismatch {
                record: record.id().to_owned(),
            });
        }
    }
    let Ok(current) = CorrelationProfile::new(&current.sample_on(sample)?) else {
        return Ok(None);
    };
    let priors = kb
        .iter()
        .map(|r| PriorProfile::compute(r, sample))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_match(&priors, &current, threshold)?.map(|(_, m)| m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCorrelations<T = f64> {
    /// Per experiment, its highest correlation against any other.
    pub best: Vec<T>,
    pub mean: T,
}

/// Best-correlation summary over pre-computed full-space vectors.
pub fn best_correlations<T: Scalar>(vectors: &[Vec<T>]) -> Result<PairwiseCorrelations<T>> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: vectors.len(),
        });
    }
    let profiles = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            CorrelationProfile::new(v)
                .map_err(|e| Error::DegenerateSurrogate(format!("experiment #{i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = profiles.len();
    let mut best = vec![T::neg_infinity(); m];
    for i in 0..m {
        for j in (i + 1)..m {
            let c = profiles[i].correlate(&profiles[j])?;
            best[i] = best[i].max(c);
            best[j] = best[j].max(c);
        }
    }
    let mean = best.iter().copied().sum::<T>() / T::of_usize(m);
    Ok(PairwiseCorrelations { best, mean })
}

/// For each experiment, its best correlation against all others over the
/// full enumerated space, plus the mean of those maxima. Raw job outputs
/// are used where available and surrogate predictions elsewhere.
pub fn pairwise_best_correlations<T: Scalar>(
    experiments: &[ExperimentRecord<T>],
) -> Result<PairwiseCorrelations<T>> {
    let Some(first) = experiments.first() else {
        return Err(Error::InsufficientSamples { needed: 2, got: 0 });
    };
    for e in experiments {
        if !e.space().same_structure(first.space()) {
            return Err(Error::StructuralMismatch {
                record: e.id().to_owned(),
            });
        }
    }
    let full = first.space().full();
    let points: Vec<Point> = full.enumerate().collect();
    let vectors = experiments
        .iter()
        .map(|e| full_space_vector(e, &full, &points))
        .collect::<Result<Vec<_>>>()?;
    best_correlations(&vectors)
}

fn full_space_vector<T: Scalar>(
    record: &ExperimentRecord<T>,
    full: &SearchSpace,
    points: &[Point],
) -> Result<Vec<T>> {
    let mut raw: Vec<Option<T>> = vec![None; full.base_size() as usize];
    for job in record.jobs() {
        raw[full.linear_index(&job.point)] = Some(job.output);
    }
    let mut surrogate = None;
    points
        .iter()
        .map(|p| match raw[full.linear_index(p)] {
            Some(v) => Ok(v),
            None => {
                if surrogate.is_none() {
                    surrogate = Some(record.fit_surrogate()?);
                }
                surrogate.as_ref().map_or(Err(Error::NoTrainingData), |s| s.predict(p))
            }
        })
        .collect()
}
