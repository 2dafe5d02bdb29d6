//! Histogram least-squares density estimation with V-fold cross-validation
//! and V-fold penalties: criteria, fast computation, closed-form variances,
//! the selection heuristic and simulation studies.

pub mod criteria;
pub mod densities;
pub mod error;
pub mod experiments;
pub mod fastvf;
pub mod heuristic;
pub mod models;
pub mod projection;
pub mod quadrature;
pub mod sample;
pub mod seeding;
pub mod stats;
pub mod variance;

pub use criteria::{CriterionKind, CriterionSpec, FoldCount, FoldPartition, FoldScheme};
pub use densities::{Measure, Setting, TrueDensity};
pub use error::{Error, Result};
pub use models::{HistogramModel, ModelCollection};
pub use projection::{BinnedSample, ProjectionStats};
pub use sample::Sample;
