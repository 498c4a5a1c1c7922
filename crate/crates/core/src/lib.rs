//! Learning product Bernoulli distributions with mean-vector advice.

pub mod approx_l1;
pub mod error;
pub mod instances;
pub mod lasso;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod tester;
pub mod verify;
mod util;

pub use error::{Error, Result};
pub use sampling::{MeanVector, SampleBatch};
pub use seed::Seed;
