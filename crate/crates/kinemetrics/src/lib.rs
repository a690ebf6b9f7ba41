//! Kinemetrics turns raw two-camera 6-DOF instrument pose streams from
//! bimanual surgical-simulation sessions into calibrated global tip
//! trajectories, objective motion/time/coordination metrics, and
//! group-comparison statistics, with a synthetic-trial simulator as the
//! ground-truth oracle.
//!
//! Module map:
//! - [`pose`]: SE(3) geometry, timestamps, pose tracks, resampling
//! - [`calib`]: pivot and reference calibration solvers
//! - [`graph`]: transform-chain resolution into the global frame
//! - [`intervals`] and [`sync`]: interval algebra, annotations, temporal
//!   synchronization
//! - [`metrics`]: motion, time, and bimanual metric computation
//! - [`stats`]: ANOVA and Tukey-Kramer group comparison
//! - [`io`]: file formats and the binary wire protocol
//! - [`sim`]: deterministic synthetic-trial generation
//! - [`analysis`]: the end-to-end per-trial pipeline and cohort comparison

pub mod analysis;
pub mod calib;
pub mod graph;
pub mod intervals;
pub mod io;
pub mod metrics;
pub mod pose;
pub mod sim;
pub mod stats;
pub mod sync;

pub use analysis::{analyze_manifest, AnalysisOptions, TrialAnalysis};
pub use pose::{PoseSample, PoseTrack, RigidTransform, Timestamp, Trajectory};
