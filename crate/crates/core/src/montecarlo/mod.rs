//! Trajectory estimators: exact chain simulation, Euler–Maruyama for
//! one-dimensional diffusions, and hitting-time statistics.

pub mod ctmc;
pub mod diffusion;
pub mod stats;

pub use ctmc::{mc_hitting, mc_tail, simulate_ctmc, JumpRates, Path, TailEstimate};
pub use diffusion::{em_diffusion_hitting, DiffusionHitEstimate, MAX_DRIFT_STEP};
pub use stats::{ExpMomentEstimate, HitEstimate, RngConfig, Welford, CENSOR_LIMIT};
