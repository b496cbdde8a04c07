//! Ground-truth trajectory generators and Lyapunov-exponent estimation.

mod ks;
mod lorenz;
mod lyapunov;

pub use ks::{ks_generate, ks_rhs_spectral, seeded_profile, KsParams, KsSolver};
pub use lorenz::{lorenz_derivative, lorenz_generate, lorenz_rk4_step, LorenzParams};
pub use lyapunov::{
    benettin, estimate_lyapunov, BenettinOptions, LyapunovEstimate, LyapunovMethod, SystemParams,
};

/// Any state entry above this magnitude is treated as numerical blow-up.
pub const BLOWUP_GUARD: f64 = 1e6;

/// A discrete-time flow map advancing a state by one fixed step.
pub trait Flow {
    fn dim(&self) -> usize;

    /// Seconds advanced by one call to [`Flow::step`].
    fn dt(&self) -> f64;

    fn step(&self, state: &mut [f64]);
}

pub(crate) fn exceeds_guard(state: &[f64]) -> Option<f64> {
    let m = state.iter().fold(0.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
    (m > BLOWUP_GUARD).then_some(m)
}
