//! Search-space pruning for discrete parameter-exploration experiments.
//!
//! A finished experiment is kept in a knowledge base. While a new
//! experiment runs, its k-NN surrogate is compared with each stored
//! surrogate by normalized cross-correlation. When the closest prior is
//! similar enough, parameter values that scored poorly everywhere in that
//! prior are removed from the live search space.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); file and
//! CLI boundaries use `f64`.

pub mod bench;
pub mod error;
pub mod kb;
pub mod matcher;
pub mod optimizers;
pub mod orchestrator;
pub mod pruner;
pub mod scalar;
pub mod space;
pub mod spec_file;
pub mod surrogate;
pub mod variogram;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use space::{DomainKind, Feasibility, Job, JobStatus, Level, ParamDomain, Point, SearchSpace};

pub type Experiment = space::ExperimentRecord<f64>;
pub type Experiment32 = space::ExperimentRecord<f32>;
pub type Knn = surrogate::KnnSurrogate<f64>;
pub type Knn32 = surrogate::KnnSurrogate<f32>;
