//! Experimental variograms of prior outputs and the aggressiveness they
//! suggest.
//!
//! `s_aggr = 1 - nugget / sill`: a smooth prior (small nugget) tolerates
//! aggressive pruning, a noisy one does not.

use crate::error::{Error, Result};
use crate::pruner::PruneConfig;
use crate::scalar::{stable_mean, Scalar};
use crate::space::ExperimentRecord;
use crate::surrogate::DistanceTable;

pub const DEFAULT_BINS: usize = 15;
pub const MIN_JOBS: usize = 8;
pub const FALLBACK: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct Variogram<T = f64> {
    /// Centers of the non-empty lag bins, ascending.
    pub lags: Vec<T>,
    pub semivariances: Vec<T>,
    pub pair_counts: Vec<usize>,
    pub bin_width: T,
    pub nugget: T,
    /// Population variance of the outputs.
    pub sill: T,
}

fn pair_distances<T: Scalar>(
    prior: &ExperimentRecord<T>,
    table: &DistanceTable<T>,
    mut visit: impl FnMut(T, T),
) {
    let jobs = prior.jobs();
    let dims = prior.space().dims();
    let columns: Vec<Vec<u32>> = (0..dims)
        .map(|d| jobs.iter().map(|j| j.point[d] as u32).collect())
        .collect();
    let outputs: Vec<T> = jobs.iter().map(|j| j.output).collect();
    // summed dimension by dimension from zero, as in `DistanceTable::distance`
    let mut dist = vec![T::zero(); jobs.len()];
    for (i, a) in jobs.iter().enumerate() {
        let rest = &mut dist[i + 1..];
        rest.iter_mut().for_each(|d| *d = T::zero());
        for (dim, col) in columns.iter().enumerate() {
            let row = table.row(dim, a.point[dim]);
            for (d, &c) in rest.iter_mut().zip(&col[i + 1..]) {
                *d = *d + row[c as usize];
            }
        }
        for (&d, &b) in rest.iter().zip(&outputs[i + 1..]) {
            let dz = a.output - b;
            visit(d, dz * dz);
        }
    }
}

fn check_jobs<T: Scalar>(prior: &ExperimentRecord<T>, needed: usize) -> Result<()> {
    let got = prior.jobs().len();
    if got < needed {
        return Err(Error::TooFewJobs { needed, got });
    }
    Ok(())
}

/// Largest pairwise distance divided by [`DEFAULT_BINS`].
pub fn default_bin_width<T: Scalar>(prior: &ExperimentRecord<T>) -> Result<T> {
    check_jobs(prior, 2)?;
    let table = DistanceTable::new(prior.space());
    let mut max = T::zero();
    pair_distances(prior, &table, |d, _| max = max.max(d));
    Ok(max / T::of_usize(DEFAULT_BINS))
}

pub fn empirical_variogram<T: Scalar>(
    prior: &ExperimentRecord<T>,
    bin_width: T,
) -> Result<Variogram<T>> {
    check_jobs(prior, 2)?;
    if !(bin_width > T::zero() && bin_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
    }
    let table = DistanceTable::new(prior.space());
    let mut max = T::zero();
    pair_distances(prior, &table, |d, _| max = max.max(d));
    // the last bin is closed, so the farthest pair lands in bin `bins - 1`
    let bins = bin_count(max, bin_width);
    let mut sums = vec![T::zero(); bins];
    let mut counts = vec![0usize; bins];
    pair_distances(prior, &table, |d, sq| {
        let b = bin_of(d, bin_width).min(bins - 1);
        sums[b] = sums[b] + sq;
        counts[b] += 1;
    });

    let half = T::of(0.5);
    let mut lags = Vec::new();
    let mut semivariances = Vec::new();
    let mut pair_counts = Vec::new();
    for (b, (&s, &n)) in sums.iter().zip(&counts).enumerate() {
        if n > 0 {
            lags.push((T::of_usize(b) + half) * bin_width);
            semivariances.push(s / (T::of(2.0) * T::of_usize(n)));
            pair_counts.push(n);
        }
    }
    let nugget = extrapolate_nugget(&lags, &semivariances, &pair_counts);
    let outputs: Vec<T> = prior.outputs().collect();
    let sill = moments(&outputs).m2;
    Ok(Variogram {
        lags,
        semivariances,
        pair_counts,
        bin_width,
        nugget,
        sill,
    })
}

/// `ceil(max / width)`, at least one, treating ratios within rounding of an
/// integer as that integer.
fn bin_count<T: Scalar>(max: T, width: T) -> usize {
    let r = max / width;
    let near = r.round();
    let bins = if (r - near).abs() <= T::epsilon() * T::of(64.0) * near.max(T::one()) {
        near
    } else {
        r.ceil()
    };
    bins.to_usize().unwrap_or(1).max(1)
}

/// Lag bin of `d`; distances within rounding of an edge go to the upper bin.
fn bin_of<T: Scalar>(d: T, width: T) -> usize {
    (d / width + T::epsilon() * T::of(64.0)).floor().to_usize().unwrap_or(0)
}

/// Weighted least-squares line through the first two bins, read at lag 0.
fn extrapolate_nugget<T: Scalar>(lags: &[T], v: &[T], n: &[usize]) -> T {
    if lags.len() < 2 {
        return v.first().copied().unwrap_or(T::zero()).max(T::zero());
    }
    let w: Vec<T> = n[..2].iter().map(|&c| T::of_usize(c)).collect();
    let sw = w[0] + w[1];
    let mh = (w[0] * lags[0] + w[1] * lags[1]) / sw;
    let mv = (w[0] * v[0] + w[1] * v[1]) / sw;
    let sxy = w[0] * (lags[0] - mh) * (v[0] - mv) + w[1] * (lags[1] - mh) * (v[1] - mv);
    let sxx = w[0] * (lags[0] - mh) * (lags[0] - mh) + w[1] * (lags[1] - mh) * (lags[1] - mh);
    let slope = sxy / sxx;
    (mv - slope * mh).max(T::zero())
}

struct Moments<T> {
    mean: T,
    m2: T,
    m3: T,
    m4: T,
}

fn moments<T: Scalar>(xs: &[T]) -> Moments<T> {
    let n = T::of_usize(xs.len());
    // clamped to the data range, so constant data has exactly zero moments
    let mean = stable_mean(xs.iter().copied()).unwrap_or(T::zero());
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    Moments {
        mean,
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
    }
}

/// Limits for the normality and stationarity screens.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckThresholds {
    pub max_abs_skewness: f64,
    pub max_abs_excess_kurtosis: f64,
    /// Block means must lie within this many global standard deviations.
    pub block_mean_sds: f64,
    /// Block variances must lie within this factor of the global variance.
    pub block_variance_ratio: f64,
    /// Leading dimensions halved to form the blocks.
    pub block_dims: usize,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self {
            max_abs_skewness: 1.0,
            max_abs_excess_kurtosis: 2.0,
            block_mean_sds: 1.0,
            block_variance_ratio: 4.0,
            block_dims: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normality {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationarity {
    pub blocks_checked: usize,
    /// Largest `|block mean - mean| / sd` over checked blocks.
    pub worst_mean_shift: f64,
    /// Largest `max(v_b / v, v / v_b)` over checked blocks.
    pub worst_variance_ratio: f64,
    pub passed: bool,
}

pub fn normality<T: Scalar>(outputs: &[T], th: &CheckThresholds) -> Normality {
    let m = moments(outputs);
    let m2 = m.m2.as_f64();
    if outputs.len() < 2 {
        return Normality {
            skewness: 0.0,
            excess_kurtosis: 0.0,
            passed: false,
        };
    }
    // constant data: a point mass, nothing skewed or heavy-tailed about it
    if m2 <= 0.0 {
        return Normality {
            skewness: 0.0,
            excess_kurtosis: 0.0,
            passed: true,
        };
    }
    let skewness = m.m3.as_f64() / m2.powf(1.5);
    let excess_kurtosis = m.m4.as_f64() / (m2 * m2) - 3.0;
    Normality {
        skewness,
        excess_kurtosis,
        passed: skewness.abs() <= th.max_abs_skewness
            && excess_kurtosis.abs() <= th.max_abs_excess_kurtosis,
    }
}

/// Splits each of the leading dimensions at the middle of its original
/// index range and compares per-block mean and variance with the global
/// ones. Blocks with fewer than two jobs are skipped.
pub fn stationarity<T: Scalar>(prior: &ExperimentRecord<T>, th: &CheckThresholds) -> Stationarity {
    let space = prior.space();
    let dims = space.dims().min(th.block_dims);
    let cards = space.cardinalities();
    let mut blocks: Vec<Vec<f64>> = vec![Vec::new(); 1 << dims];
    for job in prior.jobs() {
        let b = (0..dims).fold(0usize, |b, d| b | (usize::from(job.point[d] * 2 >= cards[d]) << d));
        blocks[b].push(job.output.as_f64());
    }
    let all: Vec<f64> = prior.outputs().map(|x| x.as_f64()).collect();
    let g = moments(&all);
    let (mean, var) = (g.mean, g.m2);
    let sd = var.sqrt();
    let mut out = Stationarity {
        blocks_checked: 0,
        worst_mean_shift: 0.0,
        worst_variance_ratio: 1.0,
        passed: true,
    };
    // constant data: every block equals the whole
    if var <= 0.0 {
        return out;
    }
    for block in blocks.iter().filter(|b| b.len() >= 2) {
        let m = moments(block);
        let shift = (m.mean - mean).abs() / sd;
        let ratio = if m.m2 > 0.0 {
            (m.m2 / var).max(var / m.m2)
        } else {
            f64::INFINITY
        };
        out.blocks_checked += 1;
        out.worst_mean_shift = out.worst_mean_shift.max(shift);
        out.worst_variance_ratio = out.worst_variance_ratio.max(ratio);
    }
    out.passed = out.worst_mean_shift <= th.block_mean_sds
        && out.worst_variance_ratio <= th.block_variance_ratio;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion<T = f64> {
    pub value: T,
    pub variogram: Variogram<T>,
    pub normality: Normality,
    pub stationarity: Stationarity,
    /// The checks failed; `value` is the fixed fallback.
    pub fallback: bool,
}

pub fn suggest_aggressiveness<T: Scalar>(
    prior: &ExperimentRecord<T>,
    cfg: &PruneConfig,
) -> Result<Suggestion<T>> {
    suggest_with(prior, cfg.cap, &CheckThresholds::default())
}

pub fn suggest_with<T: Scalar>(
    prior: &ExperimentRecord<T>,
    cap: f64,
    th: &CheckThresholds,
) -> Result<Suggestion<T>> {
    check_jobs(prior, MIN_JOBS)?;
    if !(0.0..=1.0).contains(&cap) {
        return Err(Error::InvalidConfig(format!("cap {cap} outside [0, 1]")));
    }
    let width = default_bin_width(prior)?;
    let variogram = empirical_variogram(prior, width)?;
    let outputs: Vec<T> = prior.outputs().collect();
    let normality = normality(&outputs, th);
    let stationarity = stationarity(prior, th);
    let fallback = !normality.passed || !stationarity.passed;
    let value = if fallback {
        T::of(FALLBACK.min(cap))
    } else if variogram.sill <= T::zero() {
        // constant data has no nugget at all
        T::of(cap.min(1.0))
    } else {
        (T::one() - variogram.nugget / variogram.sill)
            .max(T::zero())
            .min(T::of(cap))
    };
    Ok(Suggestion {
        value,
        variogram,
        normality,
        stationarity,
        fallback,
    })
}
