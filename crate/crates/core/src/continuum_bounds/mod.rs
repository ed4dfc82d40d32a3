//! Integral-based rate bounds for one-dimensional diffusions, radial
//! comparison on manifolds, stable-driven SDEs and time-changed stable
//! processes.

pub mod diffusion;
mod exp_integral;
pub mod gautschi;
pub mod radial;
pub mod stable;
pub mod time_changed;

pub use diffusion::{
    diff_c, diff_delta, diff_delta_at, diff_entrance, diff_mr, diff_ramp_rayleigh, diff_rate_bounds, diff_step_upper,
    scale_head, speed_head, speed_tail, DiffusionDelta, DiffusionEntrance,
};
pub use gautschi::{gautschi_bound, gautschi_constant, quartic_estimate, QuarticEstimate};
pub use radial::radial_entrance_bound;
pub use stable::{
    stable_constants, stable_delta_r, stable_g, stable_gtilde, stable_rate_bounds, stable_summary, DriftEnvelope,
    StableSummary,
};
pub use time_changed::{
    tc_green, tc_hit_moment, tc_integral, tc_lyapunov_diagnostic, tc_omega, tc_rate_bound, LyapunovDiagnostic,
};
