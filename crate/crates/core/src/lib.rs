//! Exact-arithmetic martingale selection on finite scenario trees.

pub mod linalg;
pub mod lp;
pub mod scalar;

pub use scalar::Scalar;
pub mod geometry;
pub mod scenario;
pub mod msp;
pub mod io;
pub mod markets;
pub mod oracle;
