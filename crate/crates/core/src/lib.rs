//! Covariance kernels, positive-definiteness analysis, exact Gaussian path
//! sampling and property checks for weighted fractional Brownian motion,
//! sub- and negative sub-fractional Brownian motion, the odd-part kernel
//! `(s+t)^{h−2} − |s−t|^{h−2}` and the log-kernel process η.

pub mod exec;
pub mod kernels;
pub mod pd_analysis;
pub mod properties;
pub mod sampling;
pub mod specfun;

pub use kernels::{cov, FamilySpec, IncrementQuadruple, KernelError};
pub use pd_analysis::{classify, gram, psd_certificate, GramMatrix, TimeGrid, ValidityVerdict};
pub use properties::VerificationReport;
pub use sampling::{sample, PathEnsemble, SamplingMethod};
