//! Robust single rotation averaging on SO(3).
//!
//! The estimator in [`average`] minimises a truncated sum of geodesic
//! distances: it initialises at the input rotation with the lowest truncated
//! chordal cost, keeps the inputs inside the chordal threshold and refines
//! their geodesic L1 median with the Weiszfeld iteration. [`synth`] and
//! [`registration`] generate the synthetic and point-cloud workloads used to
//! evaluate it.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature (implies `std`)
//! evaluates independent blocks on the rayon pool; results are identical to
//! serial evaluation.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod average;
pub mod error;
mod par;
pub mod registration;
pub mod so3;
pub mod synth;

pub use average::{
    chordal_l2_mean, geodesic_l1_mean, proxy_initialize, robust_average, select_inliers,
    tlud_cost_chordal, tlud_cost_geodesic, weiszfeld_geodesic_l1, AveragingResult, IndexSet,
    TludConfig,
};
pub use error::{Error, Result};
pub use so3::{
    chordal_distance, exp_map, geodesic_distance, hat, log_map, project_to_so3, vee, Mat3,
    Rotation, RotationVector, Vec3,
};
