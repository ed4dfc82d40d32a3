//! Finite-state ground truth: truncated generators, eigenvalues, hitting
//! moments and total-variation decay by uniformization.

mod generator;
mod hitting;
mod main_lemma;
mod spectral;
mod uniformization;

pub use generator::{
    discretize_diffusion, discretize_diffusion_interval, discretize_radial, random_chain, random_reversible, truncate_birth_death,
    truncate_generator, truncate_single_death, truncate_tree, Boundary, GeneratorMatrix,
};
pub use hitting::{hitting_moment_orders, hitting_moments};
pub use main_lemma::{check_main_lemma, LemmaCheck, MainLemmaReport, MAX_ALLOWANCE};
pub use spectral::{dirichlet_gap, spectral_gap, spectral_gap_report, GapMethod, GapReport};
pub use uniformization::{
    kappa_empirical, survival, transient_distributions, tv_decay, tv_decay_with, DecayCurve, KappaEstimate,
    POISSON_TOL,
};
