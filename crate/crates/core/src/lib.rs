//! Incomplete U-statistics: designs, estimators, kernel sensitivity
//! coefficients, Bernstein-type confidence bounds and Monte Carlo checks.

pub mod bounds;
pub mod design;
pub mod distribution;
pub mod error;
pub mod experiments;
pub mod estimator;
pub mod kernel;
pub mod numeric;
pub mod rng;
pub mod sensitivity;

pub use bounds::{BoundGrid, BoundInput, BoundKind, BoundReport, CompleteB};
pub use design::{Design, DesignOrigin, DesignScalars, DesignStats};
pub use distribution::{Dataset, Distribution};
pub use error::{Error, Result};
pub use estimator::Estimate;
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentOutput, ExperimentRow};
pub use kernel::{Kernel, SamplePoint};
pub use sensitivity::{Method, McConfig, SensitivityProfile};
