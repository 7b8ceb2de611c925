//! Regime test for the largest population covariance eigenvalue
//! (Tracy-Widom versus Gaussian fluctuations) and a parametric bootstrap
//! for leading sample eigenvalues in the subcritical regime.

pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mp;
pub mod quest;
pub mod rng;
pub mod sim;
pub mod spectra;
pub mod stats;
pub mod tw;

pub use bootstrap::{BootstrapRun, Functional};
pub use error::{Error, Result};
pub use estimators::{Normalizers, TruncatedSpectrum};
pub use inference::{TestOptions, TestReport};
pub use mp::{SpectralModel, XiSolution};
pub use quest::{QuestOptions, SpectrumEstimate, SpectrumEstimator};
pub use sim::{DataLaw, Scenario, SpectrumKind};
pub use spectra::{DataMatrix, EigenReport};
pub use tw::{TWTable, TwConfig};
