//! Synthetic landscape families and the repeated-trial study harness.

mod landscape;
mod stats;
mod study;

pub use landscape::{
    preset, shaped_space, FamilyPreset, Landscape, LandscapeFamily, FAMILY_NAMES, RHO_TOLERANCE,
};
pub use stats::{ci95, confidence_interval, percent_diff, Summary};
pub use study::{
    random_search, reductions_csv, run_cell, run_study, run_trial, study_cells, study_csv,
    write_outputs, BenchFamily, Cell, CellResult, StudyConfig, StudyResult, Trial, DEFAULT_REPS,
    FAST_REPS, FIGURE_HEADER, KB_SIZES, P_GRID, REDUCTIONS_HEADER, STUDY_HEADER,
};
