//! Nonlinearity, energy functional and its derivatives, and sampled checks
//! of the structural inequalities on `F`.

mod assumptions;
mod field;
mod functional;
mod potential;

pub use assumptions::{beta_surrogate, check_assumptions, AssumptionEntry, AssumptionReport};
pub use field::Field;
pub use functional::{
    d2_energy, d_energy, energy, energy_diff, energy_gradient, free_gradient, gradient_dual_norm,
    hess_apply, nonlinear_grad, potential_integral,
};
pub use potential::{f_grad, f_hess, f_value, Potential, PotentialKind};

/// Default seed for sampled assumption checks.
pub const DEFAULT_SAMPLE_SEED: u64 = 0x5eed_f00d;
