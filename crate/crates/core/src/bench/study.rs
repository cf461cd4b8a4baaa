//! Leave-one-out studies over a landscape family.
//!
//! Every configuration sees the same optimizer seed for a given repetition
//! and subject, and knowledge bases of different sizes are nested prefixes
//! of one seeded permutation, so configurations differ only in what they
//! vary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::landscape::{derive_seed, Landscape, LandscapeFamily};
use super::stats::{ci95, percent_diff, Summary};
use crate::error::{Error, Result};
use crate::optimizers::{OptimizerConfig, OptimizerKind, DEFAULT_BATCH_SIZE};
use crate::orchestrator::{run, Budget, KnowledgeBase, Prior, RunConfig, DEFAULT_BUDGET_FRACTION};
use crate::pruner::{Aggressiveness, PruneConfig};

pub const DEFAULT_REPS: usize = 200;
pub const FAST_REPS: usize = 30;
pub const P_GRID: [Aggressiveness; 5] = [
    Aggressiveness::Fixed(0.0),
    Aggressiveness::Fixed(0.6),
    Aggressiveness::Fixed(0.9),
    Aggressiveness::Fixed(0.99),
    Aggressiveness::Auto,
];
pub const KB_SIZES: [usize; 5] = [0, 5, 10, 15, 20];

const KB_STREAM: u64 = 0x6b62;

/// A family whose subjects are also available, fully evaluated, as priors.
#[derive(Debug, Clone)]
pub struct BenchFamily {
    family: LandscapeFamily,
    priors: Vec<Arc<Prior>>,
}

impl BenchFamily {
    pub fn new(family: LandscapeFamily) -> Result<Self> {
        let priors = (0..family.subjects().len())
            .map(|i| Ok(Arc::new(Prior::new(family.subject(i).full_record(family.subject_id(i))?))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, priors })
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        Self::new(LandscapeFamily::preset(name, seed)?)
    }

    pub fn family(&self) -> &LandscapeFamily {
        &self.family
    }

    pub fn subjects(&self) -> usize {
        self.priors.len()
    }

    pub fn prior(&self, subject: usize) -> &Arc<Prior> {
        &self.priors[subject]
    }

    /// At most `size` other subjects, chosen by a seeded permutation; smaller
    /// sizes are prefixes of larger ones for the same seed.
    pub fn knowledge_base(&self, subject: usize, size: usize, seed: u64) -> KnowledgeBase {
        let mut others: Vec<usize> = (0..self.subjects()).filter(|&i| i != subject).collect();
        others.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let take = size.min(others.len());
        KnowledgeBase::from_priors(others[..take].iter().map(|&i| self.priors[i].clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub optimizer: OptimizerKind,
    pub aggressiveness: Aggressiveness,
    /// Requested size; capped at the number of other subjects.
    pub kb_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub seed: u64,
    pub reps: usize,
    pub budget_fraction: f64,
    pub batch_size: usize,
    pub cap: f64,
}

impl StudyConfig {
    pub fn new(seed: u64, reps: usize) -> Self {
        Self {
            seed,
            reps,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            batch_size: DEFAULT_BATCH_SIZE,
            cap: PruneConfig::default().cap,
        }
    }

    pub fn optimizer_seed(&self, rep: usize, subject: usize) -> u64 {
        derive_seed(&[self.seed, rep as u64, subject as u64])
    }

    pub fn kb_seed(&self, rep: usize, subject: usize) -> u64 {
        derive_seed(&[self.seed, rep as u64, subject as u64, KB_STREAM])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub rep: usize,
    pub subject: usize,
    pub percent_diff: f64,
    /// Percentage of the full space pruned by the end of the run.
    pub reduction: f64,
    pub evals_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub reps: usize,
    /// Ordered by repetition, then subject.
    pub trials: Vec<Trial>,
    /// Over per-repetition means across subjects.
    pub quality: Summary,
    pub reduction: Summary,
}

impl CellResult {
    /// Mean reduction of each subject over repetitions.
    pub fn subject_reductions(&self, subjects: usize) -> Vec<f64> {
        let mut sums = vec![0.0; subjects];
        for t in &self.trials {
            sums[t.subject] += t.reduction;
        }
        sums.iter().map(|s| s / self.reps as f64).collect()
    }

    pub fn max_reduction(&self) -> f64 {
        self.trials.iter().map(|t| t.reduction).fold(0.0, f64::max)
    }
}

pub fn run_trial(
    bench: &BenchFamily,
    cell: &Cell,
    cfg: &StudyConfig,
    rep: usize,
    subject: usize,
) -> Result<Trial> {
    let landscape = bench.family.subject(subject);
    let kb = bench.knowledge_base(subject, cell.kb_size, cfg.kb_seed(rep, subject));
    let optimizer = OptimizerConfig::new(cell.optimizer, cfg.optimizer_seed(rep, subject), cfg.batch_size);
    let prune = PruneConfig {
        aggressiveness: cell.aggressiveness,
        cap: cfg.cap,
        ..PruneConfig::default()
    };
    let run_cfg = RunConfig::new(optimizer, Budget::Fraction(cfg.budget_fraction), prune);
    let report = run(landscape.space(), landscape, &kb, &run_cfg)?;
    let best = report
        .best_value()
        .ok_or_else(|| Error::OracleViolation("run finished without a result".into()))?;
    let base = landscape.space().base_size() as f64;
    Ok(Trial {
        rep,
        subject,
        percent_diff: percent_diff(best, landscape.optimum())?,
        reduction: 100.0 * (1.0 - report.final_space.size() as f64 / base),
        evals_used: report.evals_used,
    })
}

pub fn run_cell(bench: &BenchFamily, cell: &Cell, cfg: &StudyConfig) -> Result<CellResult> {
    if cfg.reps < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: cfg.reps,
        });
    }
    let subjects = bench.subjects();
    let trials = (0..cfg.reps * subjects)
        .into_par_iter()
        .map(|i| run_trial(bench, cell, cfg, i / subjects, i % subjects))
        .collect::<Result<Vec<_>>>()?;
    let per_rep = |f: fn(&Trial) -> f64| -> Vec<f64> {
        trials
            .chunks(subjects)
            .map(|c| c.iter().map(f).sum::<f64>() / subjects as f64)
            .collect()
    };
    Ok(CellResult {
        cell: *cell,
        reps: cfg.reps,
        quality: ci95(&per_rep(|t| t.percent_diff))?,
        reduction: ci95(&per_rep(|t| t.reduction))?,
        trials,
    })
}

/// The aggressiveness grid at the largest knowledge base, then the size
/// sweep with automatic aggressiveness, without duplicates.
pub fn study_cells(
    optimizers: &[OptimizerKind],
    p_grid: &[Aggressiveness],
    kb_sizes: &[usize],
    full_kb: usize,
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &optimizer in optimizers {
        let grid = p_grid.iter().map(|&aggressiveness| Cell {
            optimizer,
            aggressiveness,
            kb_size: full_kb,
        });
        let sweep = kb_sizes.iter().map(|&kb_size| Cell {
            optimizer,
            aggressiveness: Aggressiveness::Auto,
            kb_size: kb_size.min(full_kb),
        });
        for c in grid.chain(sweep) {
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub family: String,
    pub family_seed: u64,
    pub rho: f64,
    pub config: StudyConfig,
    pub subjects: usize,
    pub cells: Vec<CellResult>,
}

impl StudyResult {
    pub fn cell(&self, optimizer: OptimizerKind, p: Aggressiveness, kb_size: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.cell.optimizer == optimizer && c.cell.aggressiveness == p && c.cell.kb_size == kb_size
        })
    }
}

pub fn run_study(bench: &BenchFamily, cells: &[Cell], cfg: &StudyConfig) -> Result<StudyResult> {
    let results = cells
        .iter()
        .map(|c| run_cell(bench, c, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult {
        family: bench.family.preset.name.to_owned(),
        family_seed: bench.family.seed,
        rho: bench.family.rho,
        config: cfg.clone(),
        subjects: bench.subjects(),
        cells: results,
    })
}

/// Best of `budget` distinct points drawn uniformly, repeats redrawn.
pub fn random_search(landscape: &Landscape, budget: usize, seed: u64) -> f64 {
    let table = landscape.table();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = vec![false; table.len()];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..budget.min(table.len()) {
        let i = loop {
            let i = rng.gen_range(0..table.len());
            if !seen[i] {
                break i;
            }
        };
        seen[i] = true;
        best = best.max(table[i]);
    }
    best
}

fn kb_label(cell: &Cell, subjects: usize) -> usize {
    cell.kb_size.min(subjects.saturating_sub(1))
}

pub const STUDY_HEADER: &str = "family,optimizer,p_aggr,kb_size,reps,mean_pct_diff,pct_diff_lo,pct_diff_hi,mean_reduction_pct,reduction_lo,reduction_hi";
pub const REDUCTIONS_HEADER: &str = "family,optimizer,p_aggr,kb_size,subject,mean_reduction_pct,max_reduction_pct";
pub const FIGURE_HEADER: &str = "series,x,y,err";

pub fn study_csv(study: &StudyResult) -> String {
    let mut out = format!("{STUDY_HEADER}\n");
    for c in &study.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            study.family,
            c.cell.optimizer,
            c.cell.aggressiveness,
            kb_label(&c.cell, study.subjects),
            c.reps,
            c.quality.mean,
            c.quality.lo,
            c.quality.hi,
            c.reduction.mean,
            c.reduction.lo,
            c.reduction.hi
        );
    }
    out
}

pub fn reductions_csv(study: &StudyResult) -> String {
    let mut out = format!("{REDUCTIONS_HEADER}\n");
    for c in &study.cells {
        let means = c.subject_reductions(study.subjects);
        for (s, mean) in means.iter().enumerate() {
            let max = c
                .trials
                .iter()
                .filter(|t| t.subject == s)
                .map(|t| t.reduction)
                .fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "{},{},{},{},{s},{mean},{max}",
                study.family,
                c.cell.optimizer,
                c.cell.aggressiveness,
                kb_label(&c.cell, study.subjects)
            );
        }
    }
    out
}

fn figure(study: &StudyResult, by_kb: bool, metric: fn(&CellResult) -> &Summary) -> String {
    let full_kb = study.subjects.saturating_sub(1);
    let mut out = format!("{FIGURE_HEADER}\n");
    for c in &study.cells {
        let kb = kb_label(&c.cell, study.subjects);
        let x = if by_kb {
            if c.cell.aggressiveness != Aggressiveness::Auto {
                continue;
            }
            kb.to_string()
        } else {
            if kb != full_kb {
                continue;
            }
            c.cell.aggressiveness.to_string()
        };
        let s = metric(c);
        let _ = writeln!(out, "{},{x},{},{}", c.cell.optimizer, s.mean, s.half_width());
    }
    out
}

/// Writes `study.csv`, `reductions.csv` and the four figure files.
pub fn write_outputs(study: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("study.csv", study_csv(study)),
        ("reductions.csv", reductions_csv(study)),
        ("fig_reduction_vs_paggr.csv", figure(study, false, |c| &c.reduction)),
        ("fig_quality_vs_paggr.csv", figure(study, false, |c| &c.quality)),
        ("fig_reduction_vs_kb.csv", figure(study, true, |c| &c.reduction)),
        ("fig_quality_vs_kb.csv", figure(study, true, |c| &c.quality)),
    ];
    let mut paths = Vec::with_capacity(files.len());
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text)?;
        paths.push(p);
    }
    Ok(paths)
}
