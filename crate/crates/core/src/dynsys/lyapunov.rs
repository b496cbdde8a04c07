use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{seeded_profile, Flow, KsParams, KsSolver, LorenzParams};
use crate::error::{Error, Result};

/// Minimum number of renormalizations for an estimate to be accepted.
const MIN_RENORMALIZATIONS: usize = 50;
/// Lorenz spin-up before measuring, in time units.
const LORENZ_SPINUP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    BenettinTwinTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Largest exponent, 1/seconds.
    pub lambda_max: f64,
    /// `1 / lambda_max`, seconds.
    pub lyapunov_time: f64,
    pub method: LyapunovMethod,
    pub n_renormalizations: usize,
}

impl LyapunovEstimate {
    pub fn from_lambda(lambda_max: f64, n_renormalizations: usize) -> Self {
        Self {
            lambda_max,
            lyapunov_time: 1.0 / lambda_max,
            method: LyapunovMethod::BenettinTwinTrajectory,
            n_renormalizations,
        }
    }
}

/// One of the two generator systems, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemParams {
    Lorenz(LorenzParams),
    Ks(KsParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenettinOptions {
    /// Separation the twin trajectory is reset to after each interval.
    pub delta0: f64,
    /// Time between renormalizations, seconds.
    pub interval: f64,
}

impl Default for BenettinOptions {
    fn default() -> Self {
        Self {
            delta0: 1e-8,
            interval: 1.0,
        }
    }
}

/// Largest Lyapunov exponent of `flow` by twin-trajectory renormalization,
/// starting from `initial` (assumed already on the attractor).
pub fn benettin<F: Flow + ?Sized>(
    flow: &F,
    initial: &[f64],
    horizon: f64,
    opts: BenettinOptions,
    seed: u64,
) -> Result<LyapunovEstimate> {
    let n = flow.dim();
    if initial.len() != n {
        return Err(Error::mismatch(format!(
            "initial state has dimension {}, flow has {n}",
            initial.len()
        )));
    }
    let steps_per_interval = ((opts.interval / flow.dt()).round() as usize).max(1);
    let interval = steps_per_interval as f64 * flow.dt();
    let n_renorm = (horizon / interval).floor() as usize;
    if n_renorm < MIN_RENORMALIZATIONS {
        return Err(Error::config(format!(
            "horizon {horizon} allows only {n_renorm} renormalizations, need {MIN_RENORMALIZATIONS}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v *= opts.delta0 / norm);

    let mut reference = initial.to_vec();
    let mut twin: Vec<f64> = reference.iter().zip(&direction).map(|(a, d)| a + d).collect();
    let checkpoint = (3 * n_renorm) / 4;
    let mut log_sum = 0.0;
    let mut at_checkpoint = 0.0;
    for r in 1..=n_renorm {
        for _ in 0..steps_per_interval {
            flow.step(&mut reference);
            flow.step(&mut twin);
        }
        let dist = reference
            .iter()
            .zip(&twin)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        if !(dist > 0.0) || !dist.is_finite() {
            return Err(Error::NonConvergence { drift: f64::INFINITY });
        }
        log_sum += (dist / opts.delta0).ln();
        let scale = opts.delta0 / dist;
        for (t, a) in twin.iter_mut().zip(&reference) {
            *t = a + (*t - a) * scale;
        }
        if r == checkpoint {
            at_checkpoint = log_sum / (r as f64 * interval);
        }
    }
    let lambda = log_sum / (n_renorm as f64 * interval);
    let drift = ((lambda - at_checkpoint) / lambda).abs();
    if !(drift <= 0.1) {
        return Err(Error::NonConvergence { drift });
    }
    Ok(LyapunovEstimate::from_lambda(lambda, n_renorm))
}

/// Estimates the largest exponent of one of the generator systems.
///
/// The seed picks the starting point (Lorenz: a jitter of the configured
/// initial state; KS: the seeded profile unless one is configured) and the
/// perturbation direction. Both systems are spun up onto the attractor
/// first (Lorenz: 20 time units, KS: `transient_steps`).
pub fn estimate_lyapunov(system: &SystemParams, horizon: f64, seed: u64) -> Result<LyapunovEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbation_seed = rng.random::<u64>();
    match system {
        SystemParams::Lorenz(p) => {
            p.validate()?;
            let mut state: Vec<f64> = p
                .initial_state
                .iter()
                .map(|v| v + rng.random_range(-1.0..1.0))
                .collect();
            let spinup = (LORENZ_SPINUP / p.dt).round() as usize;
            for _ in 0..spinup {
                p.step(&mut state);
            }
            benettin(p, &state, horizon, BenettinOptions::default(), perturbation_seed)
        }
        SystemParams::Ks(p) => {
            let solver = KsSolver::new(p)?;
            let mut state = p
                .initial_profile
                .clone()
                .unwrap_or_else(|| seeded_profile(p, rng.random::<u64>()));
            for _ in 0..p.transient_steps {
                solver.step(&mut state);
            }
            benettin(&solver, &state, horizon, BenettinOptions::default(), perturbation_seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x' = -rate * x, stepped exactly.
    struct Damped {
        rate: f64,
        dt: f64,
    }

    impl Flow for Damped {
        fn dim(&self) -> usize {
            2
        }
        fn dt(&self) -> f64 {
            self.dt
        }
        fn step(&self, state: &mut [f64]) {
            let f = (-self.rate * self.dt).exp();
            state.iter_mut().for_each(|v| *v *= f);
        }
    }

    #[test]
    fn damped_linear_system_has_negative_exponent() {
        let flow = Damped { rate: 0.5, dt: 0.1 };
        let est = benettin(&flow, &[1.0, -2.0], 100.0, BenettinOptions::default(), 1).unwrap();
        assert!(est.lambda_max < 0.0);
        assert!((est.lambda_max + 0.5).abs() < 1e-9);
        assert_eq!(est.lyapunov_time, 1.0 / est.lambda_max);
        assert_eq!(est.n_renormalizations, 100);
    }

    #[test]
    fn short_horizon_is_rejected() {
        let flow = Damped { rate: 0.5, dt: 0.1 };
        assert!(benettin(&flow, &[1.0, 1.0], 10.0, BenettinOptions::default(), 1).is_err());
    }

    #[test]
    fn ks_exponent_is_positive() {
        let p = KsParams::new(22.0, 64);
        let est = estimate_lyapunov(&SystemParams::Ks(p), 500.0, 3).unwrap();
        assert!(est.lambda_max > 0.0, "{est:?}");
    }
}
