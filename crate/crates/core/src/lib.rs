//! Non-asymptotic bounds on the information a Gaussian decode-and-forward
//! line network can carry at finite block length, with the numerical and
//! Monte Carlo machinery needed to check them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bound;
pub mod cone;
pub mod error;
pub mod geometry;
pub mod matrix;
pub mod rng;
pub mod sim;
pub mod special;
pub mod verify;

pub use bound::{BoundQuery, BoundReport, FactorMethod};
pub use cone::{ConeQuery, McEstimate};
pub use error::{Error, Result};
pub use geometry::WedgeCells2D;
pub use matrix::{ConvexSplit, MessageDist, TransitionMatrix};
pub use sim::{CascadeConfig, CascadeReport, CodeKind, DecoderKind, SphereCode};
pub use verify::{CheckResult, Suite};
