//! Differentially private synthetic measures on `[0, 1]^d` with computable
//! utility certificates over sparse Lipschitz queries.
//!
//! The release pipeline discretizes a dataset, answers all `s`-way marginals,
//! adds Haar-correlated Laplace noise, fits a probability measure to the noisy
//! answers by linear programming, and reports a high-probability upper bound
//! on the utility loss of the result.

pub mod error;
pub mod eval;
pub mod flat;
pub mod flow;
pub mod grid;
pub mod haar;
pub mod loss;
pub mod lowdim;
pub mod lp;
pub mod mechanism;
pub mod query;
pub mod rng;
pub mod sanitize;

pub use error::{Error, Result};
pub use grid::{Dataset, GridHistogram, GridSpec, SnakeOrder};
pub use loss::ProxyLossKind;
pub use mechanism::PrivacyBudget;
pub use query::MarginalBlockVector;
pub use rng::Streams;
pub use sanitize::{Certificate, Mode, NoisyRelease, ReleaseBundle, ReleaseConfig};
