//! Independent reference implementations and seeded instance generators
//! shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use jobpruner::space::{DomainKind, ExperimentRecord, Job, ParamDomain, Point, SearchSpace};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn space_of(shape: &[(DomainKind, usize)]) -> SearchSpace {
    let domains = shape
        .iter()
        .enumerate()
        .map(|(i, &(kind, n))| match kind {
            DomainKind::Ordinal => ParamDomain::ordinal_range(format!("o{i}"), n).unwrap(),
            DomainKind::Categorical => {
                ParamDomain::categorical(format!("c{i}"), (0..n).map(|j| format!("l{j}"))).unwrap()
            }
        })
        .collect();
    SearchSpace::new(domains).unwrap()
}

/// Random shape with at most `max_points` points.
pub fn random_shape(rng: &mut ChaCha8Rng, max_dims: usize, max_card: usize, max_points: usize) -> Vec<(DomainKind, usize)> {
    loop {
        let dims = rng.gen_range(1..=max_dims);
        let shape: Vec<_> = (0..dims)
            .map(|_| {
                let kind = if rng.gen_bool(0.3) { DomainKind::Categorical } else { DomainKind::Ordinal };
                (kind, rng.gen_range(1..=max_card))
            })
            .collect();
        let size: usize = shape.iter().map(|s| s.1).product();
        if size <= max_points {
            return shape;
        }
    }
}

/// Output styles: positive, mixed sign, all non-positive, heavy ties.
pub fn random_output(rng: &mut ChaCha8Rng, style: u8) -> f64 {
    match style {
        0 => rng.gen_range(0.0..10.0),
        1 => rng.gen_range(-5.0..5.0),
        2 => -rng.gen_range(0.0..10.0),
        _ => f64::from(rng.gen_range(0..4u8)),
    }
}

/// A prior evaluated on a random subset of the full space. Half the priors
/// score points by per-value effects summed over dimensions, so whole values
/// fall below a cut; the rest draw outputs independently.
pub fn random_prior(rng: &mut ChaCha8Rng, space: &SearchSpace, id: &str) -> ExperimentRecord<f64> {
    let n = space.size() as usize;
    let amount = rng.gen_range(1..=n);
    let style = rng.gen_range(0..4u8);
    let effects: Option<Vec<Vec<f64>>> = rng.gen_bool(0.5).then(|| {
        space
            .cardinalities()
            .iter()
            .map(|&c| (0..c).map(|_| random_output(rng, style)).collect())
            .collect()
    });
    let jobs = sample(rng, n, amount)
        .into_iter()
        .map(|i| {
            let p = space.point_at(i);
            let y = match &effects {
                Some(e) => p.coords().iter().enumerate().map(|(d, &v)| e[d][v]).sum::<f64>() / e.len() as f64,
                None => random_output(rng, style),
            };
            Job::done(p, y)
        })
        .collect();
    ExperimentRecord::new(id, space.clone(), jobs, None).unwrap()
}

/// Non-empty random subset per dimension.
pub fn random_active(rng: &mut ChaCha8Rng, space: &SearchSpace) -> Vec<Vec<usize>> {
    space
        .cardinalities()
        .iter()
        .map(|&n| {
            let keep = rng.gen_range(1..=n);
            let mut idx = sample(rng, n, keep).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Reference pruning, written directly from the rule: a live value goes
/// when the prior ran it at least once and every such run scored below
/// `p_aggr * max`; outputs are shifted by `-min` when the maximum is not
/// positive; a dimension that would empty keeps its best-scoring value.
pub fn oracle_prune(prior: &ExperimentRecord<f64>, active: &[Vec<usize>], p_aggr: f64) -> Vec<Vec<usize>> {
    let outputs: Vec<f64> = prior.jobs().iter().map(|j| j.output).collect();
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &y in &outputs {
        if y > max {
            max = y;
        }
        if y < min {
            min = y;
        }
    }
    let shift = if max <= 0.0 { -min } else { 0.0 };
    let cut = p_aggr * (max + shift);
    let mut kept_all = Vec::new();
    for (d, values) in active.iter().enumerate() {
        let mut kept = Vec::new();
        let mut candidates = Vec::new();
        for &v in values {
            let mut ran = false;
            let mut all_below = true;
            let mut best = f64::NEG_INFINITY;
            for job in prior.jobs() {
                if job.point[d] == v {
                    ran = true;
                    let y = job.output + shift;
                    if y >= cut {
                        all_below = false;
                    }
                    if y > best {
                        best = y;
                    }
                }
            }
            if ran && all_below {
                candidates.push((v, best));
            } else {
                kept.push(v);
            }
        }
        if kept.is_empty() {
            let mut choice = candidates[0];
            for &c in &candidates[1..] {
                if c.1 > choice.1 {
                    choice = c;
                }
            }
            kept.push(choice.0);
        }
        kept_all.push(kept);
    }
    kept_all
}

/// Normalized cross-correlation straight from its definition.
pub fn oracle_ncorr(f: &[f64], p: &[f64]) -> f64 {
    let n = f.len() as f64;
    let fm = f.iter().sum::<f64>() / n;
    let pm = p.iter().sum::<f64>() / n;
    let fs = (f.iter().map(|x| (x - fm) * (x - fm)).sum::<f64>() / n).sqrt();
    let ps = (p.iter().map(|x| (x - pm) * (x - pm)).sum::<f64>() / n).sqrt();
    let mut acc = 0.0;
    for i in 0..f.len() {
        acc += (f[i] - fm) * (p[i] - pm);
    }
    acc / (n * fs * ps)
}

/// Distance between two points from their domains: ordinal index gap over
/// `n - 1`, categorical mismatch counts one.
pub fn oracle_distance(space: &SearchSpace, a: &Point, b: &Point) -> f64 {
    let mut d = 0.0;
    for (i, dom) in space.domains().iter().enumerate() {
        let (x, y) = (a[i], b[i]);
        d += match dom.kind() {
            DomainKind::Ordinal if dom.len() > 1 => (x as f64 - y as f64).abs() / (dom.len() - 1) as f64,
            DomainKind::Ordinal => 0.0,
            DomainKind::Categorical => f64::from(u8::from(x != y)),
        };
    }
    d
}

/// Bin index -> (half mean squared difference, pair count), over every
/// unordered pair. Bins follow `floor(d / width)` with distances within
/// rounding of an edge sent up, and the last occupied bin absorbs the
/// maximum distance.
pub fn oracle_variogram(prior: &ExperimentRecord<f64>, width: f64) -> BTreeMap<usize, (f64, usize)> {
    let jobs = prior.jobs();
    let mut pairs = Vec::new();
    for i in 0..jobs.len() {
        for j in (i + 1)..jobs.len() {
            let d = oracle_distance(prior.space(), &jobs[i].point, &jobs[j].point);
            let dz = jobs[i].output - jobs[j].output;
            pairs.push((d, dz * dz));
        }
    }
    let max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let last = ((max / width) - 1e-9).ceil().max(1.0) as usize - 1;
    let mut bins: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (d, sq) in pairs {
        let b = ((d / width) + 1e-9).floor() as usize;
        let e = bins.entry(b.min(last)).or_insert((0.0, 0));
        e.0 += sq;
        e.1 += 1;
    }
    for v in bins.values_mut() {
        v.0 /= 2.0 * v.1 as f64;
    }
    bins
}
