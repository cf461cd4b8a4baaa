use std::fmt::Write as _;
use std::time::Duration;

use crate::space::{Point, SearchSpace};

pub const CSV_HEADER: &str = "batch_index,evals_used,best_value,space_size,matched_prior,n_corr,p_aggr";

/// State after one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub batch_index: usize,
    pub evals_used: usize,
    pub best_value: Option<f64>,
    /// Points in the space after this batch's pruning.
    pub space_size: u64,
    pub matched_prior: Option<String>,
    pub n_corr: Option<f64>,
    pub p_aggr: Option<f64>,
}

/// What a batch proposed and ran, with the space it was proposed in.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBatch {
    pub space: SearchSpace,
    pub proposals: Vec<Point>,
    pub executed: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub best: Option<(Point, f64)>,
    pub evals_used: usize,
    pub budget: usize,
    pub history: Vec<BatchRecord>,
    /// Successful jobs in execution order.
    pub evaluated: Vec<(Point, f64)>,
    pub failures: Vec<(Point, String)>,
    pub final_space: SearchSpace,
    /// Filled when tracing is enabled.
    pub trace: Vec<TraceBatch>,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn best_value(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, v)| *v)
    }

    /// History as CSV. Wall time is left out so that identical runs give
    /// identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.history.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.batch_index,
                r.evals_used,
                opt(r.best_value),
                r.space_size,
                r.matched_prior.as_deref().map(csv_field).unwrap_or_default(),
                opt(r.n_corr),
                opt(r.p_aggr),
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
