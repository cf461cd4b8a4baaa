use std::sync::{Arc, OnceLock};

use crate::matcher::{common_sample, PriorProfile, DEFAULT_SAMPLE_SEED};
use crate::error::{Error, Result};
use crate::pruner::{PruneOutcome, ValueEvidence};
use crate::space::{ExperimentRecord, SearchSpace};
use crate::variogram::{suggest_with, CheckThresholds, FALLBACK};

/// A stored experiment plus analytics computed on first use. Shareable
/// between knowledge bases.
#[derive(Debug)]
pub struct Prior {
    record: ExperimentRecord<f64>,
    profile: OnceLock<Option<PriorProfile<f64>>>,
    /// Uncapped automatic aggressiveness; `None` when it fell back.
    suggestion: OnceLock<Option<f64>>,
    evidence: OnceLock<Option<ValueEvidence<f64>>>,
}

impl Prior {
    pub fn new(record: ExperimentRecord<f64>) -> Self {
        Self {
            record,
            profile: OnceLock::new(),
            suggestion: OnceLock::new(),
            evidence: OnceLock::new(),
        }
    }

    pub fn record(&self) -> &ExperimentRecord<f64> {
        &self.record
    }

    pub fn id(&self) -> &str {
        self.record.id()
    }

    /// Standardized surrogate predictions over the common sample of the
    /// prior's space, or `None` if the surrogate cannot be fit or is flat.
    pub fn profile(&self) -> Option<&PriorProfile<f64>> {
        self.profile
            .get_or_init(|| {
                let sample = common_sample(self.record.space(), DEFAULT_SAMPLE_SEED);
                PriorProfile::compute(&self.record, &sample).ok()
            })
            .as_ref()
    }

    /// One pruning step of `current` driven by this prior.
    pub fn prune(&self, current: &SearchSpace, p_aggr: f64, min_evidence: usize) -> Result<PruneOutcome> {
        if !self.record.space().same_structure(current) {
            return Err(Error::StructuralMismatch {
                record: self.id().to_owned(),
            });
        }
        self.evidence
            .get_or_init(|| ValueEvidence::new(&self.record).ok())
            .as_ref()
            .ok_or(Error::NoTrainingData)?
            .prune(current, p_aggr, min_evidence)
    }

    /// Automatic aggressiveness under `cap`, and whether it is the fallback.
    pub fn suggested_aggressiveness(&self, cap: f64) -> (f64, bool) {
        let uncapped = self.suggestion.get_or_init(|| {
            suggest_with(&self.record, 1.0, &CheckThresholds::default())
                .ok()
                .filter(|s| !s.fallback)
                .map(|s| s.value)
        });
        match uncapped {
            Some(v) => (v.min(cap), false),
            None => (FALLBACK.min(cap), true),
        }
    }
}

/// Previous experiments available for matching.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    priors: Vec<Arc<Prior>>,
}

impl KnowledgeBase {
    pub fn new(records: impl IntoIterator<Item = ExperimentRecord<f64>>) -> Self {
        Self {
            priors: records.into_iter().map(|r| Arc::new(Prior::new(r))).collect(),
        }
    }

    pub fn from_priors(priors: impl IntoIterator<Item = Arc<Prior>>) -> Self {
        Self {
            priors: priors.into_iter().collect(),
        }
    }

    pub fn priors(&self) -> &[Arc<Prior>] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }
}
