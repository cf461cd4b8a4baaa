//! Finite discrete search spaces, points, jobs and experiments.
//!
//! Points are index vectors into the *original* domain value lists. A
//! pruned space keeps the original domains and records which indices
//! survive per dimension, so points stay comparable across prunes.

mod domain;
mod expr;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

pub use domain::{DomainKind, Level, ParamDomain};
pub use expr::Feasibility;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surrogate::{KnnSurrogate, SurrogateSpec};

/// Per-parameter index vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(Vec<usize>);

impl Point {
    pub fn new(coords: Vec<usize>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_coords(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for Point {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[usize; N]> for Point {
    fn from(v: [usize; N]) -> Self {
        Self(v.to_vec())
    }
}

impl std::ops::Index<usize> for Point {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Cartesian product of parameter domains, optionally restricted to a
/// per-dimension subset of surviving indices and a feasibility predicate.
#[derive(Clone, Debug)]
pub struct SearchSpace {
    domains: Arc<Vec<ParamDomain>>,
    active: Vec<Vec<usize>>,
    feasibility: Option<Arc<Feasibility>>,
}

impl PartialEq for SearchSpace {
    fn eq(&self, other: &Self) -> bool {
        self.same_structure(other)
            && self.active == other.active
            && self.feasibility == other.feasibility
    }
}

impl SearchSpace {
    pub fn new(domains: Vec<ParamDomain>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::InvalidSpace("at least one parameter is required".into()));
        }
        let mut names = HashSet::new();
        for d in &domains {
            if !names.insert(d.name().to_owned()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter name `{}`",
                    d.name()
                )));
            }
        }
        let active = domains.iter().map(|d| (0..d.len()).collect()).collect();
        Ok(Self {
            domains: Arc::new(domains),
            active,
            feasibility: None,
        })
    }

    /// Attaches a feasibility predicate written in the expression language.
    pub fn with_feasibility(mut self, source: &str) -> Result<Self> {
        let f = Feasibility::parse(source, &self.domains)?;
        self.feasibility = Some(Arc::new(f));
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[ParamDomain] {
        &self.domains
    }

    pub fn domain(&self, i: usize) -> &ParamDomain {
        &self.domains[i]
    }

    /// Surviving original indices of dimension `i`, ascending.
    pub fn active(&self, i: usize) -> &[usize] {
        &self.active[i]
    }

    pub fn active_sets(&self) -> &[Vec<usize>] {
        &self.active
    }

    pub fn feasibility(&self) -> Option<&Feasibility> {
        self.feasibility.as_deref()
    }

    /// Product of the current per-dimension cardinalities (saturating).
    pub fn size(&self) -> u64 {
        self.active
            .iter()
            .fold(1u64, |acc, a| acc.saturating_mul(a.len() as u64))
    }

    /// Product of the original cardinalities (saturating).
    pub fn base_size(&self) -> u64 {
        self.domains
            .iter()
            .fold(1u64, |acc, d| acc.saturating_mul(d.len() as u64))
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.domains.iter().map(ParamDomain::len).collect()
    }

    /// Number of feasible points in the current space. Equals
    /// [`size`](Self::size) without a feasibility predicate.
    pub fn feasible_size(&self) -> u64 {
        match self.feasibility {
            None => self.size(),
            Some(_) => self.enumerate().count() as u64,
        }
    }

    /// The unrestricted space over the same domains and predicate.
    pub fn full(&self) -> Self {
        Self {
            domains: Arc::clone(&self.domains),
            active: self.domains.iter().map(|d| (0..d.len()).collect()).collect(),
            feasibility: self.feasibility.clone(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.active
            .iter()
            .zip(self.domains.iter())
            .all(|(a, d)| a.len() == d.len())
    }

    /// Same parameter names, kinds and value lists.
    pub fn same_structure(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.domains, &other.domains) || self.domains == other.domains
    }

    /// Same structure and every surviving index set contained in `other`'s.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_structure(other)
            && self
                .active
                .iter()
                .zip(&other.active)
                .all(|(mine, theirs)| mine.iter().all(|i| theirs.binary_search(i).is_ok()))
    }

    /// Restricts the space to the given surviving index sets, which must be
    /// non-empty subsets of the current ones.
    pub fn restrict(&self, active: Vec<Vec<usize>>) -> Result<Self> {
        if active.len() != self.dims() {
            return Err(Error::LengthMismatch {
                left: active.len(),
                right: self.dims(),
            });
        }
        let mut sorted = Vec::with_capacity(active.len());
        for (i, mut set) in active.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidSpace(format!(
                    "domain `{}` would be empty",
                    self.domains[i].name()
                )));
            }
            if set.iter().any(|j| self.active[i].binary_search(j).is_err()) {
                return Err(Error::NotASubset);
            }
            sorted.push(set);
        }
        Ok(Self {
            domains: Arc::clone(&self.domains),
            active: sorted,
            feasibility: self.feasibility.clone(),
        })
    }

    pub fn is_feasible(&self, coords: &[usize]) -> bool {
        self.feasibility
            .as_ref()
            .is_none_or(|f| f.accepts(&self.domains, coords))
    }

    /// `Ok` iff every index is inside the current domain and the
    /// feasibility predicate accepts the point.
    pub fn validate_point(&self, point: &Point) -> Result<()> {
        if point.len() != self.dims() {
            return Err(Error::LengthMismatch {
                left: point.len(),
                right: self.dims(),
            });
        }
        for (i, &c) in point.coords().iter().enumerate() {
            let d = &self.domains[i];
            if c >= d.len() {
                return Err(Error::InvalidPoint {
                    param: d.name().to_owned(),
                    reason: format!("index {c} out of range 0..{}", d.len()),
                });
            }
            if self.active[i].binary_search(&c).is_err() {
                return Err(Error::InvalidPoint {
                    param: d.name().to_owned(),
                    reason: format!("value `{}` was pruned", d.values()[c]),
                });
            }
        }
        if !self.is_feasible(point.coords()) {
            let src = self.feasibility.as_ref().map(|f| f.source()).unwrap_or("");
            return Err(Error::InvalidPoint {
                param: self.domains[0].name().to_owned(),
                reason: format!("point {point} violates feasibility `{src}`"),
            });
        }
        Ok(())
    }

    pub fn contains(&self, point: &Point) -> bool {
        point.len() == self.dims()
            && point
                .coords()
                .iter()
                .zip(&self.active)
                .all(|(c, a)| a.binary_search(c).is_ok())
            && self.is_feasible(point.coords())
    }

    /// Every feasible point of the current space, once each, in
    /// lexicographic index order.
    pub fn enumerate(&self) -> Points<'_> {
        Points {
            space: self,
            cursor: Some(vec![0; self.dims()]),
        }
    }

    /// Row-major index of a point within the original (unpruned) product.
    pub fn linear_index(&self, point: &Point) -> usize {
        point
            .coords()
            .iter()
            .zip(self.domains.iter())
            .fold(0usize, |acc, (&c, d)| acc * d.len() + c)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn point_at(&self, mut linear: usize) -> Point {
        let mut coords = vec![0; self.dims()];
        for (i, d) in self.domains.iter().enumerate().rev() {
            coords[i] = linear % d.len();
            linear /= d.len();
        }
        Point(coords)
    }

    /// Raw parameter values of a point.
    pub fn resolve(&self, point: &Point) -> Vec<&Level> {
        point
            .coords()
            .iter()
            .zip(self.domains.iter())
            .map(|(&c, d)| &d.values()[c])
            .collect()
    }

    /// Nearest surviving index to a continuous index-space coordinate;
    /// ties go to the smaller index.
    pub fn nearest_active(&self, dim: usize, x: f64) -> usize {
        let set = &self.active[dim];
        let pos = set.partition_point(|&i| (i as f64) < x);
        match (pos.checked_sub(1).map(|p| set[p]), set.get(pos).copied()) {
            (Some(lo), Some(hi)) => {
                if x - lo as f64 <= hi as f64 - x {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("active sets are never empty"),
        }
    }
}

/// Lexicographic iterator over the feasible points of a space.
pub struct Points<'a> {
    space: &'a SearchSpace,
    cursor: Option<Vec<usize>>,
}

impl Iterator for Points<'_> {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        loop {
            let pos = self.cursor.as_mut()?;
            let coords: Vec<usize> = pos
                .iter()
                .zip(&self.space.active)
                .map(|(&p, a)| a[p])
                .collect();
            // advance
            let mut d = pos.len();
            loop {
                if d == 0 {
                    self.cursor = None;
                    break;
                }
                d -= 1;
                pos[d] += 1;
                if pos[d] < self.space.active[d].len() {
                    break;
                }
                pos[d] = 0;
            }
            if self.space.is_feasible(&coords) {
                return Some(Point(coords));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JobStatus {
    Pending,
    Done,
    Failed,
}

/// One application execution at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Job<T = f64> {
    pub point: Point,
    pub output: T,
    pub status: JobStatus,
}

impl<T: Scalar> Job<T> {
    pub fn done(point: impl Into<Point>, output: T) -> Self {
        Self {
            point: point.into(),
            output,
            status: JobStatus::Done,
        }
    }
}

/// A subject's evaluated jobs over its search space, plus the parameters
/// of the surrogate fit to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord<T: Scalar = f64> {
    id: String,
    space: SearchSpace,
    jobs: Vec<Job<T>>,
    surrogate: Option<SurrogateSpec>,
}

impl<T: Scalar> ExperimentRecord<T> {
    pub fn new(
        id: impl Into<String>,
        space: SearchSpace,
        jobs: Vec<Job<T>>,
        surrogate: Option<SurrogateSpec>,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidExperiment {
            id: id.clone(),
            reason,
        };
        if id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        let mut seen = HashSet::with_capacity(jobs.len());
        for job in &jobs {
            if job.status != JobStatus::Done {
                return Err(invalid(format!("job at {} is not done", job.point)));
            }
            if !job.output.is_finite() {
                return Err(invalid(format!("job at {} has non-finite output", job.point)));
            }
            space
                .validate_point(&job.point)
                .map_err(|e| invalid(e.to_string()))?;
            if !seen.insert(&job.point) {
                return Err(invalid(format!("duplicate job at {}", job.point)));
            }
        }
        Ok(Self {
            id,
            space,
            jobs,
            surrogate,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn jobs(&self) -> &[Job<T>] {
        &self.jobs
    }

    pub fn outputs(&self) -> impl Iterator<Item = T> + '_ {
        self.jobs.iter().map(|j| j.output)
    }

    pub fn surrogate_spec(&self) -> Option<SurrogateSpec> {
        self.surrogate
    }

    /// Fits the record's surrogate (default parameters when none is stored).
    pub fn fit_surrogate(&self) -> Result<KnnSurrogate<T>> {
        let spec = self.surrogate.unwrap_or_default();
        KnnSurrogate::fit(&self.jobs, &self.space, spec.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(sizes: &[usize]) -> SearchSpace {
        SearchSpace::new(
            sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| ParamDomain::ordinal_range(format!("p{i}"), n).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn size_is_product_of_cardinalities() {
        assert_eq!(grid(&[4; 5]).size(), 1024);
        assert_eq!(grid(&[1]).size(), 1);
        assert_eq!(grid(&[2, 3]).size(), 6);
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let pts: Vec<_> = grid(&[2, 2]).enumerate().collect();
        let want: Vec<Point> = vec![[0, 0].into(), [0, 1].into(), [1, 0].into(), [1, 1].into()];
        assert_eq!(pts, want);
        assert_eq!(grid(&[1]).enumerate().collect::<Vec<_>>(), vec![Point::from([0])]);
        assert_eq!(grid(&[3, 2]).enumerate().count(), 6);
    }

    #[test]
    fn validate_point_names_offending_domain() {
        let s = grid(&[2, 4]);
        assert!(s.validate_point(&[0, 0].into()).is_ok());
        match s.validate_point(&[0, 5].into()) {
            Err(Error::InvalidPoint { param, .. }) => assert_eq!(param, "p1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(s.validate_point(&[0].into()).is_err());
    }

    #[test]
    fn feasibility_rejects_coordinate_sum_above_three() {
        // levels equal indices, so (2,2) sums to 4
        let s = grid(&[3, 3]).with_feasibility("p0 + p1 <= 3").unwrap();
        assert!(s.validate_point(&[1, 2].into()).is_ok());
        assert!(matches!(
            s.validate_point(&[2, 2].into()),
            Err(Error::InvalidPoint { .. })
        ));
        assert_eq!(s.enumerate().count(), 8);
        assert_eq!(s.feasible_size(), 8);
        assert_eq!(s.size(), 9);
    }

    #[test]
    fn restrict_and_subset() {
        let s = grid(&[4, 4]);
        let r = s.restrict(vec![vec![0, 2, 3], vec![1, 2, 3]]).unwrap();
        assert_eq!(r.size(), 9);
        assert!(r.is_subset_of(&s));
        assert!(!s.is_subset_of(&r));
        assert!(matches!(r.restrict(vec![vec![1], vec![1]]), Err(Error::NotASubset)));
        assert!(r.restrict(vec![vec![], vec![1]]).is_err());
        assert!(!r.contains(&[1, 1].into()));
        assert!(r.validate_point(&[1, 1].into()).is_err());
        assert_eq!(r.enumerate().next().unwrap(), Point::from([0, 1]));
    }

    #[test]
    fn nearest_active_index() {
        let s = grid(&[5]).restrict(vec![vec![0, 1]]).unwrap();
        assert_eq!(s.nearest_active(0, 3.0), 1);
        let t = grid(&[6]).restrict(vec![vec![1, 3, 5]]).unwrap();
        assert_eq!(t.nearest_active(0, 2.0), 1);
        assert_eq!(t.nearest_active(0, 2.01), 3);
        assert_eq!(t.nearest_active(0, -4.0), 1);
        assert_eq!(grid(&[4]).nearest_active(0, 2.6), 3);
    }

    #[test]
    fn linear_index_round_trip() {
        let s = grid(&[3, 4, 2]);
        for (i, p) in s.enumerate().enumerate() {
            assert_eq!(s.linear_index(&p), i);
            assert_eq!(s.point_at(i), p);
        }
    }

    #[test]
    fn experiment_rejects_duplicates_and_invalid_jobs() {
        let s = grid(&[2, 2]);
        let dup = vec![Job::done([0, 0], 1.0), Job::done([0, 0], 2.0)];
        assert!(ExperimentRecord::new("e", s.clone(), dup, None).is_err());
        let oob = vec![Job::done([0, 2], 1.0)];
        assert!(ExperimentRecord::new("e", s.clone(), oob, None).is_err());
        let nan = vec![Job::done([0, 1], f64::NAN)];
        assert!(ExperimentRecord::new("e", s.clone(), nan, None).is_err());
        let ok = vec![Job::done([0, 1], 1.0f32), Job::done([1, 1], 0.5)];
        assert_eq!(ExperimentRecord::new("e", s, ok, None).unwrap().jobs().len(), 2);
    }
}
