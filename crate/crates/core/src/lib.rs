//! Quantum-kernel classification toolkit: a state-vector simulator, a data re-uploading
//! ansatz, fidelity kernels, an SMO support-vector machine, variational kernel training,
//! quantum feature extraction, Nyström approximation, ROC metrics and an end-to-end pipeline.

pub mod ansatz;
pub mod classical;
pub mod error;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod nystrom;
pub mod pipeline;
pub mod qfe;
pub mod rng;
pub mod sim;
pub mod svm;
pub mod variational;

pub use error::{Error, Result};
