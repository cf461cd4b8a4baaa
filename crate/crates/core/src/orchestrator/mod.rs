//! The optimization loop: propose a batch, run it, match the knowledge
//! base, prune, repeat.

mod app;
mod knowledge;
mod report;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

pub use app::{evaluate_all, AppCommand, Evaluator, FnEvaluator, Objective};
pub use knowledge::{KnowledgeBase, Prior};
pub use report::{BatchRecord, RunReport, TraceBatch, CSV_HEADER};

use crate::error::{Error, Result};
use crate::matcher::{best_match, common_sample, CorrelationProfile, DEFAULT_SAMPLE_SEED};
use crate::optimizers::{Observation, OptimizerConfig, OptimizerState};
use crate::pruner::{Aggressiveness, PruneConfig};
use crate::space::{Point, SearchSpace};
use crate::surrogate::{DistanceTable, SamplePredictor, DEFAULT_K};

pub const DEFAULT_BUDGET_FRACTION: f64 = 0.1;
pub const DEFAULT_STALL_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Absolute(usize),
    /// Fraction of the feasible space size, in `(0, 1]`.
    Fraction(f64),
}

/// `floor(fraction * size)` with a minimum of one; absolute budgets pass
/// through.
pub fn resolve_budget(budget: Budget, space_size: u64) -> Result<usize> {
    match budget {
        Budget::Absolute(n) => Ok(n),
        Budget::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("budget fraction {f} outside (0, 1]")));
            }
            Ok(((f * space_size as f64).floor() as usize).max(1))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub optimizer: OptimizerConfig,
    pub budget: Budget,
    pub prune: PruneConfig,
    /// Consecutive batches without a new execution before the optimizer is
    /// restarted from fresh points.
    pub stall_limit: usize,
    /// Hard cap on batches; `None` derives one from the budget.
    pub max_batches: Option<usize>,
    /// Record proposals, executions and the live space per batch.
    pub trace: bool,
}

impl RunConfig {
    pub fn new(optimizer: OptimizerConfig, budget: Budget, prune: PruneConfig) -> Self {
        Self {
            optimizer,
            budget,
            prune,
            stall_limit: DEFAULT_STALL_LIMIT,
            max_batches: None,
            trace: false,
        }
    }
}

/// Results of every point executed in a run; failures are cached too.
#[derive(Debug, Clone, Default)]
pub struct ResultCache {
    values: HashMap<Point, Option<f64>>,
    executed: usize,
}

impl ResultCache {
    pub fn get(&self, p: &Point) -> Option<Option<f64>> {
        self.values.get(p).copied()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.values.contains_key(p)
    }

    /// Distinct points executed so far.
    pub fn executed(&self) -> usize {
        self.executed
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, Option<f64>)> {
        self.values.iter().map(|(p, v)| (p, *v))
    }
}

/// One evaluated point of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub point: Point,
    pub outcome: Result<f64, String>,
    /// `false` when served from the cache.
    pub executed: bool,
}

/// Runs the uncached points of `points` (each once) and serves the rest
/// from `cache`. Results follow input order.
pub fn execute_batch(
    points: &[Point],
    app: &dyn Evaluator,
    space: &SearchSpace,
    cache: &mut ResultCache,
) -> Vec<BatchResult> {
    let mut fresh = Vec::new();
    let mut queued = HashSet::new();
    for p in points {
        if !cache.contains(p) && queued.insert(p) {
            fresh.push(p.clone());
        }
    }
    let outcomes = evaluate_all(app, space, &fresh, cache.executed);
    let mut errors = HashMap::new();
    for (p, r) in fresh.iter().zip(outcomes) {
        cache.executed += 1;
        cache.values.insert(p.clone(), r.as_ref().ok().copied());
        if let Err(e) = r {
            errors.insert(p.clone(), e);
        }
    }
    let mut first = HashSet::new();
    points
        .iter()
        .map(|p| {
            let executed = queued.contains(p) && first.insert(p);
            let outcome = match (cache.get(p).flatten(), errors.get(p)) {
                (Some(v), _) => Ok(v),
                (None, Some(e)) => Err(e.clone()),
                (None, None) => Err("failed earlier in this run".to_owned()),
            };
            BatchResult {
                point: p.clone(),
                outcome,
                executed,
            }
        })
        .collect()
}

struct Matching {
    predictor: SamplePredictor<f64>,
}

impl Matching {
    fn new(space: &SearchSpace) -> Result<Self> {
        let sample = common_sample(space, DEFAULT_SAMPLE_SEED);
        let table = Arc::new(DistanceTable::new(space));
        Ok(Self {
            predictor: SamplePredictor::new(&sample, DEFAULT_K, table)?,
        })
    }
}

/// Runs one experiment over `space`.
///
/// With an empty knowledge base, or while no prior correlates above the
/// threshold, this is exactly the bare optimizer on the same seed.
pub fn run(
    space: &SearchSpace,
    app: &dyn Evaluator,
    kb: &KnowledgeBase,
    cfg: &RunConfig,
) -> Result<RunReport> {
    let started = Instant::now();
    cfg.prune.validate()?;
    for prior in kb.priors() {
        if !prior.record().space().same_structure(space) {
            return Err(Error::StructuralMismatch {
                record: prior.id().to_owned(),
            });
        }
    }
    let feasible = space.feasible_size();
    if feasible == 0 {
        return Err(Error::InvalidSpace("no feasible points".into()));
    }
    let budget = resolve_budget(cfg.budget, feasible)?;
    let mut opt_cfg = cfg.optimizer.clone();
    opt_cfg.batch_size = opt_cfg.batch_size.clamp(1, feasible.min(usize::MAX as u64) as usize);
    let mut opt = OptimizerState::init(space, &opt_cfg)?;
    let mut matching = if kb.is_empty() { None } else { Some(Matching::new(space)?) };
    let max_batches = cfg
        .max_batches
        .unwrap_or_else(|| budget.saturating_mul(20).saturating_add(100));

    let mut current = space.clone();
    let mut current_feasible = feasible;
    let mut seen_in_current = 0u64;
    let mut cache = ResultCache::default();
    let mut best: Option<(Point, f64)> = None;
    let mut history = Vec::new();
    let mut evaluated = Vec::new();
    let mut failures = Vec::new();
    let mut trace = Vec::new();
    let mut stall = 0usize;
    // the surrogate changed since the last match
    let mut stale = false;
    let mut last_match: Option<(String, f64, f64)> = None;

    for batch_index in 0..max_batches {
        let used = cache.executed();
        if used >= budget || seen_in_current >= current_feasible {
            break;
        }
        let proposals = opt.propose_batch();
        let mut admitted = Vec::new();
        let mut queued = HashSet::new();
        for p in &proposals {
            if admitted.len() + used >= budget {
                break;
            }
            if current.contains(p) && !cache.contains(p) && queued.insert(p.clone()) {
                admitted.push(p.clone());
            }
        }
        let results = execute_batch(&admitted, app, &current, &mut cache);
        let mut executed = Vec::with_capacity(results.len());
        for r in results {
            match r.outcome {
                Ok(v) => {
                    if best.as_ref().is_none_or(|(_, b)| v > *b) {
                        best = Some((r.point.clone(), v));
                    }
                    if let Some(m) = matching.as_mut() {
                        stale |= m.predictor.add(&r.point, v);
                    }
                    evaluated.push((r.point.clone(), v));
                }
                Err(e) => failures.push((r.point.clone(), e)),
            }
            executed.push(r.point);
        }
        seen_in_current += executed.len() as u64;

        let observations: Vec<Observation> = proposals
            .iter()
            .filter_map(|p| match cache.get(p) {
                Some(v) => Some((p.clone(), v)),
                None if !current.contains(p) => Some((p.clone(), None)),
                None => None,
            })
            .collect();
        opt.observe(&observations);
        if executed.is_empty() {
            stall += 1;
            if stall >= cfg.stall_limit.max(1) {
                opt.restart();
                stall = 0;
            }
        } else {
            stall = 0;
        }
        if cfg.trace {
            trace.push(TraceBatch {
                space: current.clone(),
                proposals,
                executed,
            });
        }

        let mut record = BatchRecord {
            batch_index,
            evals_used: cache.executed(),
            best_value: best.as_ref().map(|(_, v)| *v),
            space_size: current.size(),
            matched_prior: None,
            n_corr: None,
            p_aggr: None,
        };
        if let Some(m) = matching.as_ref() {
            if stale {
                // pruning is idempotent, so an unchanged surrogate needs no new step
                stale = false;
                last_match = None;
                let profile = m
                    .predictor
                    .predictions()
                    .and_then(|p| CorrelationProfile::new(&p).ok());
                let found = match &profile {
                    Some(profile) => {
                        let candidates: Vec<_> = kb.priors().iter().filter_map(|p| p.profile()).collect();
                        best_match(candidates.iter().copied(), profile, cfg.prune.corr_threshold)?
                            .map(|(i, m)| (candidates[i].id.clone(), m.n_corr))
                    }
                    None => None,
                };
                if let Some((id, n_corr)) = found {
                    let prior = kb
                        .priors()
                        .iter()
                        .find(|p| p.id() == id)
                        .expect("matched prior is in the knowledge base");
                    let p_aggr = match cfg.prune.aggressiveness {
                        Aggressiveness::Fixed(p) => p,
                        Aggressiveness::Auto => prior.suggested_aggressiveness(cfg.prune.cap).0,
                    };
                    let outcome = prior.prune(&current, p_aggr, cfg.prune.min_evidence)?;
                    if outcome.removed_count() > 0 {
                        current = outcome.new_space;
                        opt.apply_space_update(current.clone())?;
                        current_feasible = current.feasible_size();
                        seen_in_current = cache.iter().filter(|(p, _)| current.contains(p)).count() as u64;
                    }
                    last_match = Some((id, n_corr, p_aggr));
                }
            }
            if let Some((id, n_corr, p_aggr)) = &last_match {
                record.space_size = current.size();
                record.matched_prior = Some(id.clone());
                record.n_corr = Some(*n_corr);
                record.p_aggr = Some(*p_aggr);
            }
        }
        history.push(record);
    }

    Ok(RunReport {
        best,
        evals_used: cache.executed(),
        budget,
        history,
        evaluated,
        failures,
        final_space: current,
        trace,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::OptimizerKind;
    use crate::space::{ExperimentRecord, Job, ParamDomain};

    fn grid(cards: &[usize]) -> SearchSpace {
        SearchSpace::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &n)| ParamDomain::ordinal_range(format!("p{i}"), n).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn bump(p: &Point) -> f64 {
        let (x, y) = (p[0] as f64, p[1] as f64);
        (-((x - 7.0).powi(2) + (y - 2.0).powi(2)) / 8.0).exp()
    }

    fn full_record(id: &str, s: &SearchSpace, f: impl Fn(&Point) -> f64) -> ExperimentRecord<f64> {
        let jobs = s.enumerate().map(|p| {
            let v = f(&p);
            Job::done(p, v)
        });
        ExperimentRecord::new(id, s.clone(), jobs.collect(), None).unwrap()
    }

    fn cfg(kind: OptimizerKind, budget: Budget, p: Aggressiveness) -> RunConfig {
        let prune = PruneConfig {
            aggressiveness: p,
            ..PruneConfig::default()
        };
        RunConfig::new(OptimizerConfig::new(kind, 17, 4), budget, prune)
    }

    #[test]
    fn budget_resolution() {
        assert_eq!(resolve_budget(Budget::Fraction(0.1), 1024).unwrap(), 102);
        assert_eq!(resolve_budget(Budget::Fraction(0.1), 5).unwrap(), 1);
        assert_eq!(resolve_budget(Budget::Absolute(50), 5).unwrap(), 50);
        assert!(resolve_budget(Budget::Fraction(0.0), 5).is_err());
        assert!(resolve_budget(Budget::Fraction(1.5), 5).is_err());
    }

    #[test]
    fn cached_points_spawn_nothing() {
        let s = grid(&[3]);
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let app = FnEvaluator(|p: &Point| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if p[0] == 2 { Err("boom".into()) } else { Ok(p[0] as f64) }
        });
        let mut cache = ResultCache::default();
        let pts = vec![Point::from([0]), Point::from([2]), Point::from([0])];
        let r = execute_batch(&pts, &app, &s, &mut cache);
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        assert_eq!(r[0].outcome, Ok(0.0));
        assert!(r[1].outcome.is_err());
        assert!(r[0].executed && !r[2].executed);
        let again = execute_batch(&pts, &app, &s, &mut cache);
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        assert!(again.iter().all(|b| !b.executed));
        assert_eq!(cache.executed(), 2);
    }

    #[test]
    fn budget_of_one_runs_one_job() {
        let s = grid(&[10, 5]);
        let app = FnEvaluator(|p: &Point| Ok(bump(p)));
        for kind in [OptimizerKind::Pso, OptimizerKind::Sa] {
            let r = run(&s, &app, &KnowledgeBase::default(), &cfg(kind, Budget::Absolute(1), Aggressiveness::Fixed(0.6)))
                .unwrap();
            assert_eq!(r.evals_used, 1);
            assert_eq!(r.history.len(), 1);
            let (p, v) = r.best.clone().unwrap();
            assert_eq!(v, bump(&p));
        }
    }

    #[test]
    fn matching_prior_prunes_after_first_batch() {
        let s = grid(&[10, 5]);
        let ramp = |p: &Point| (p[0] + 2 * p[1]) as f64 / 17.0;
        let app = FnEvaluator(|p: &Point| Ok(ramp(p)));
        let kb = KnowledgeBase::new([full_record("same", &s, ramp)]);
        let mut c = cfg(OptimizerKind::Pso, Budget::Fraction(0.5), Aggressiveness::Fixed(0.6));
        c.optimizer.batch_size = 8;
        let r = run(&s, &app, &kb, &c).unwrap();
        let first = &r.history[0];
        assert_eq!(first.matched_prior.as_deref(), Some("same"));
        assert!(first.space_size < s.size());
        assert!(r.history.windows(2).all(|w| w[1].space_size <= w[0].space_size));
        assert!(r.evals_used <= r.budget);
    }

    #[test]
    fn empty_kb_equals_unmatched_kb() {
        let s = grid(&[10, 5]);
        let app = FnEvaluator(|p: &Point| Ok(bump(p)));
        // anti-correlated prior never passes the threshold
        let kb = KnowledgeBase::new([full_record("anti", &s, |p| -bump(p))]);
        for kind in [OptimizerKind::Pso, OptimizerKind::Sa] {
            let c = cfg(kind, Budget::Fraction(0.3), Aggressiveness::Fixed(0.6));
            let bare = run(&s, &app, &KnowledgeBase::default(), &c).unwrap();
            let with = run(&s, &app, &kb, &c).unwrap();
            assert_eq!(bare.to_csv(), with.to_csv());
            assert!(with.history.iter().all(|h| h.matched_prior.is_none()));
        }
    }

    #[test]
    fn structural_mismatch_aborts() {
        let s = grid(&[10, 5]);
        let other = grid(&[10, 4]);
        let kb = KnowledgeBase::new([full_record("odd", &other, |_| 1.0)]);
        let app = FnEvaluator(|p: &Point| Ok(bump(p)));
        let err = run(&s, &app, &kb, &cfg(OptimizerKind::Sa, Budget::Absolute(5), Aggressiveness::Auto))
            .unwrap_err();
        assert!(matches!(err, Error::StructuralMismatch { record } if record == "odd"));
    }

    #[test]
    fn failures_consume_budget() {
        let s = grid(&[6, 6]);
        let app = FnEvaluator(|p: &Point| if p[0] % 2 == 0 { Err("crash".into()) } else { Ok(1.0) });
        let r = run(&s, &app, &KnowledgeBase::default(), &cfg(OptimizerKind::Pso, Budget::Absolute(10), Aggressiveness::Fixed(0.0)))
            .unwrap();
        assert_eq!(r.evals_used, 10);
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn full_budget_evaluates_everything() {
        let s = grid(&[4, 3]);
        let app = FnEvaluator(|p: &Point| Ok(bump(p)));
        for kind in [OptimizerKind::Pso, OptimizerKind::Sa] {
            let r = run(&s, &app, &KnowledgeBase::default(), &cfg(kind, Budget::Fraction(1.0), Aggressiveness::Fixed(0.0)))
                .unwrap();
            assert_eq!(r.evals_used, 12, "{kind}");
            let opt = s.enumerate().map(|p| bump(&p)).fold(f64::MIN, f64::max);
            assert_eq!(r.best_value(), Some(opt));
        }
    }
}
