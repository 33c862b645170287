// `!(x > 0.0)` is how NaN gets rejected; Butcher tableaux keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::should_implement_trait)]

pub mod ermakov;
pub mod config;
pub mod error;
pub mod kernel;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod system;
pub mod timefn;
pub mod verify;

pub use error::{Error, Result};
pub use timefn::TimeFunction;
