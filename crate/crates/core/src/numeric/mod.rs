//! Shared numerical building blocks: seeded random streams, the Adam kernel,
//! forward-mode dual numbers and a few dense linear-algebra helpers.

pub mod adam;
pub mod dual;
pub mod linalg;
pub mod rng;

pub use adam::{adam_step, AdamState};
pub use dual::{Dual, Real, TANGENTS};
pub use rng::{sample_standard_normal, Rng};
