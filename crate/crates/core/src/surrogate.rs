//! k-nearest-neighbour surrogates over index space.
//!
//! Distance between two points is the sum of per-parameter contributions:
//! `|i - j| / (cardinality - 1)` for ordinal parameters and `0`/`1` for
//! categorical ones. Predictions average the outputs of the `k` closest
//! training points; equidistant neighbours are ordered by their index
//! vectors, smaller first.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{stable_mean, Scalar};
use crate::space::{DomainKind, Job, JobStatus, Point, SearchSpace};

pub const DEFAULT_K: usize = 3;

/// Distance definitions. Only the normalized index metric exists today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    NormalizedIndex,
}

impl Metric {
    pub fn id(self) -> &'static str {
        match self {
            Metric::NormalizedIndex => "normalized-index",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        (id == "normalized-index").then_some(Metric::NormalizedIndex)
    }
}

/// Persistable surrogate parameters; the training set is the experiment's jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateSpec {
    pub k: usize,
    pub metric: Metric,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            metric: Metric::NormalizedIndex,
        }
    }
}

/// Precomputed per-dimension contribution tables for the metric.
#[derive(Debug, Clone)]
pub struct DistanceTable<T> {
    cards: Vec<usize>,
    tables: Vec<Vec<T>>,
}

impl<T: Scalar> DistanceTable<T> {
    pub fn new(space: &SearchSpace) -> Self {
        let mut cards = Vec::with_capacity(space.dims());
        let mut tables = Vec::with_capacity(space.dims());
        for d in space.domains() {
            let n = d.len();
            let mut t = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    t[i * n + j] = match d.kind() {
                        DomainKind::Ordinal if n > 1 => {
                            T::of_usize(i.abs_diff(j)) / T::of_usize(n - 1)
                        }
                        DomainKind::Ordinal => T::zero(),
                        DomainKind::Categorical if i == j => T::zero(),
                        DomainKind::Categorical => T::one(),
                    };
                }
            }
            cards.push(n);
            tables.push(t);
        }
        Self { cards, tables }
    }

    /// Contributions of dimension `dim` between index `i` and every index.
    #[inline]
    pub fn row(&self, dim: usize, i: usize) -> &[T] {
        let n = self.cards[dim];
        &self.tables[dim][i * n..(i + 1) * n]
    }

    #[inline]
    pub fn distance(&self, a: &[usize], b: &[usize]) -> T {
        let mut acc = T::zero();
        for (dim, (&x, &y)) in a.iter().zip(b).enumerate() {
            acc = acc + self.tables[dim][x * self.cards[dim] + y];
        }
        acc
    }

    /// Largest possible distance in the space.
    pub fn diameter(&self) -> T {
        self.tables
            .iter()
            .map(|t| t.iter().copied().fold(T::zero(), T::max))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Predictor from points of a search space to objective estimates.
///
/// k-NN is the only implementation; other regressors plug in here.
pub trait Surrogate<T: Scalar> {
    fn space(&self) -> &SearchSpace;

    fn predict(&self, point: &Point) -> Result<T>;

    /// Element-wise [`predict`](Self::predict), order preserved.
    fn sample_on(&self, sample: &[Point]) -> Result<Vec<T>> {
        sample.iter().map(|p| self.predict(p)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct KnnSurrogate<T: Scalar = f64> {
    space: SearchSpace,
    training: Vec<(Point, T)>,
    k: usize,
    table: Arc<DistanceTable<T>>,
}

fn check_range(space: &SearchSpace, point: &Point) -> Result<()> {
    if point.len() != space.dims() {
        return Err(Error::LengthMismatch {
            left: point.len(),
            right: space.dims(),
        });
    }
    for (d, &c) in space.domains().iter().zip(point.coords()) {
        if c >= d.len() {
            return Err(Error::InvalidPoint {
                param: d.name().to_owned(),
                reason: format!("index {c} out of range 0..{}", d.len()),
            });
        }
    }
    Ok(())
}

impl<T: Scalar> KnnSurrogate<T> {
    /// Fits on the done jobs. The surrogate covers the original (unpruned)
    /// space of `space`.
    pub fn fit(jobs: &[Job<T>], space: &SearchSpace, k: usize) -> Result<Self> {
        Self::fit_with_table(jobs, space, k, Arc::new(DistanceTable::new(space)))
    }

    pub fn fit_with_table(
        jobs: &[Job<T>],
        space: &SearchSpace,
        k: usize,
        table: Arc<DistanceTable<T>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let full = space.full();
        let mut training = Vec::with_capacity(jobs.len());
        for job in jobs {
            if job.status != JobStatus::Done || !job.output.is_finite() {
                continue;
            }
            check_range(&full, &job.point)?;
            training.push((job.point.clone(), job.output));
        }
        if training.is_empty() {
            return Err(Error::NoTrainingData);
        }
        training.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = training.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidExperiment {
                id: "surrogate training set".into(),
                reason: format!("duplicate job at {}", w[0].0),
            });
        }
        Ok(Self {
            space: full,
            training,
            k,
            table,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `min(k, training size)`.
    pub fn effective_k(&self) -> usize {
        self.k.min(self.training.len())
    }

    pub fn training(&self) -> &[(Point, T)] {
        &self.training
    }

    pub fn table(&self) -> &Arc<DistanceTable<T>> {
        &self.table
    }

    /// Refits on a new job list, replacing the training set.
    pub fn refit(&self, jobs: &[Job<T>]) -> Result<Self> {
        Self::fit_with_table(jobs, &self.space, self.k, Arc::clone(&self.table))
    }
}

impl<T: Scalar> Surrogate<T> for KnnSurrogate<T> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn predict(&self, point: &Point) -> Result<T> {
        check_range(&self.space, point)?;
        let k = self.effective_k();
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        for (idx, (p, _)) in self.training.iter().enumerate() {
            let d = self.table.distance(point.coords(), p.coords());
            // training is sorted by point, so index order breaks distance ties
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, bi)| bd < d || (bd == d && bi < idx));
            best.insert(pos, (d, idx));
            best.truncate(k);
        }
        Ok(stable_mean(best.iter().map(|&(_, i)| self.training[i].1)).unwrap_or_else(T::nan))
    }
}

/// k-NN predictions over a fixed sample, updated incrementally as training
/// points arrive. Agrees exactly with refitting a [`KnnSurrogate`] on all
/// points added so far and calling [`Surrogate::sample_on`].
#[derive(Debug, Clone)]
pub struct SamplePredictor<T: Scalar = f64> {
    k: usize,
    table: Arc<DistanceTable<T>>,
    columns: Vec<Vec<u32>>,
    sample_len: usize,
    // row-major rank; orders like the points themselves
    train_ranks: Vec<u64>,
    train_values: Vec<T>,
    seen: HashSet<Point>,
    // `k` slots per sample point, sorted by (distance, training point)
    neighbours: Vec<(T, u32)>,
    filled: Vec<u32>,
    // distance of the k-th slot once full; farther points never enter
    worst: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> SamplePredictor<T> {
    pub fn new(sample: &[Point], k: usize, table: Arc<DistanceTable<T>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let dims = sample.first().map_or(0, Point::len);
        let mut columns = vec![Vec::with_capacity(sample.len()); dims];
        for p in sample {
            if p.len() != dims {
                return Err(Error::LengthMismatch {
                    left: p.len(),
                    right: dims,
                });
            }
            for (col, &c) in columns.iter_mut().zip(p.coords()) {
                col.push(c as u32);
            }
        }
        Ok(Self {
            k,
            table,
            columns,
            sample_len: sample.len(),
            train_ranks: Vec::new(),
            train_values: Vec::new(),
            seen: HashSet::new(),
            neighbours: vec![(T::zero(), 0); sample.len() * k],
            filled: vec![0; sample.len()],
            worst: vec![T::infinity(); sample.len()],
            scratch: vec![T::zero(); sample.len()],
        })
    }

    pub fn training_len(&self) -> usize {
        self.train_ranks.len()
    }

    /// Adds one training point; duplicates are ignored and return `false`.
    pub fn add(&mut self, point: &Point, value: T) -> bool {
        if !value.is_finite() || !self.seen.insert(point.clone()) {
            return false;
        }
        let ti = self.train_ranks.len() as u32;
        let rank = point
            .coords()
            .iter()
            .zip(&self.table.cards)
            .fold(0u64, |acc, (&c, &n)| acc * n as u64 + c as u64);
        self.train_ranks.push(rank);
        self.train_values.push(value);

        let dist = &mut self.scratch;
        // distances are non-negative, so assigning the first dimension
        // equals adding it to zero
        for (dim, col) in self.columns.iter().enumerate() {
            let row = self.table.row(dim, point[dim]);
            if dim == 0 {
                for (d, &c) in dist.iter_mut().zip(col) {
                    *d = row[c as usize];
                }
            } else {
                for (d, &c) in dist.iter_mut().zip(col) {
                    *d = *d + row[c as usize];
                }
            }
        }

        let k = self.k;
        let ranks = &self.train_ranks;
        for (s, (&d, worst)) in dist.iter().zip(self.worst.iter_mut()).enumerate() {
            if d > *worst {
                continue;
            }
            let slots = &mut self.neighbours[s * k..(s + 1) * k];
            let len = self.filled[s] as usize;
            let precedes = |(bd, bi): (T, u32)| bd < d || (bd == d && ranks[bi as usize] < rank);
            if len == k && precedes(slots[k - 1]) {
                continue;
            }
            let pos = slots[..len].iter().take_while(|&&slot| precedes(slot)).count();
            let end = len.min(k - 1);
            for j in (pos..end).rev() {
                slots[j + 1] = slots[j];
            }
            slots[pos] = (d, ti);
            if len < k {
                self.filled[s] += 1;
            }
            if len + 1 >= k {
                *worst = slots[k - 1].0;
            }
        }
        true
    }

    /// Current predictions on the sample, or `None` before any training.
    pub fn predictions(&self) -> Option<Vec<T>> {
        if self.train_ranks.is_empty() {
            return None;
        }
        let k = self.k;
        Some(
            (0..self.sample_len)
                .map(|s| {
                    let len = self.filled[s] as usize;
                    let slots = &self.neighbours[s * k..s * k + len];
                    stable_mean(slots.iter().map(|&(_, i)| self.train_values[i as usize]))
                        .unwrap_or_else(T::nan)
                })
                .collect(),
        )
    }
}
