//! Gravity-aligned minimal solvers for two-view relative pose over a
//! ground plane, with unknown focal lengths.
//!
//! A camera rig with a reliable gravity direction (IMU attitude per view)
//! moving over a dominant horizontal plane admits a *restricted* homography
//! with five parameters and a single rotational degree of freedom (yaw).
//! That structure yields unusually small minimal problems:
//!
//! - [`solvers::calibrated::solve_calibrated_2pt`] — both focals known,
//!   2 points;
//! - [`solvers::fhf::solve_fhf_2_5pt`] — one shared unknown focal,
//!   2.5 points;
//! - [`solvers::hf::solve_hf_2_5pt`] — view 1 calibrated, view-2 focal
//!   unknown, 2.5 points;
//! - [`solvers::f1hf2::solve_f1hf2_3pt`] — both focals unknown, 3 points.
//!
//! Around the solvers the crate provides the supporting toolchain: the
//! rectified-frame geometry ([`geom`]), dense-polynomial and small
//! eigenvalue routines ([`poly`]), a synthetic scene generator ([`synth`]),
//! a RANSAC estimator with the 2.5-point consistency check ([`robust`]),
//! evaluation metrics and benchmark harnesses ([`metrics`]), and
//! frame-sequence ingestion plus trajectory chaining ([`sequence`]).

pub mod csvio;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod poly;
pub mod robust;
pub mod sequence;
pub mod solvers;
pub mod synth;
mod util;

pub use error::{Error, Result};
