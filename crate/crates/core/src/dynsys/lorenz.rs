use serde::{Deserialize, Serialize};

use super::{exceeds_guard, Flow};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Lorenz system parameters. `rho` is the Rayleigh-number parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub initial_state: [f64; 3],
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
            initial_state: [1.0, 1.0, 1.0],
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!("Lorenz dt must be positive, got {}", self.dt)));
        }
        let all = [self.sigma, self.rho, self.beta];
        if all.iter().chain(self.initial_state.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("Lorenz parameters and initial state must be finite"));
        }
        Ok(())
    }
}

pub fn lorenz_derivative(state: &[f64; 3], p: &LorenzParams) -> [f64; 3] {
    let [x, y, z] = *state;
    [p.sigma * (y - x), p.rho * x - y - x * z, x * y - p.beta * z]
}

/// One classical fourth-order Runge-Kutta step of size `p.dt`.
pub fn lorenz_rk4_step(state: &[f64; 3], p: &LorenzParams) -> [f64; 3] {
    let h = p.dt;
    let axpy = |a: &[f64; 3], s: f64, b: &[f64; 3]| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = lorenz_derivative(state, p);
    let k2 = lorenz_derivative(&axpy(state, h / 2.0, &k1), p);
    let k3 = lorenz_derivative(&axpy(state, h / 2.0, &k2), p);
    let k4 = lorenz_derivative(&axpy(state, h, &k3), p);
    let mut out = *state;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `n_steps` RK4 steps; column 0 is the initial state.
pub fn lorenz_generate(p: &LorenzParams, n_steps: usize) -> Result<TimeSeries> {
    p.validate()?;
    if n_steps == 0 {
        return Err(Error::config("n_steps must be at least 1"));
    }
    let mut data = Vec::with_capacity(3 * (n_steps + 1));
    let mut state = p.initial_state;
    data.extend_from_slice(&state);
    for step in 1..=n_steps {
        state = lorenz_rk4_step(&state, p);
        if let Some(magnitude) = exceeds_guard(&state) {
            return Err(Error::BlowUp { step, magnitude });
        }
        data.extend_from_slice(&state);
    }
    Ok(TimeSeries::from_parts_unchecked(3, p.dt, 0.0, data))
}

impl Flow for LorenzParams {
    fn dim(&self) -> usize {
        3
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, state: &mut [f64]) {
        let s = [state[0], state[1], state[2]];
        state.copy_from_slice(&lorenz_rk4_step(&s, self));
    }
}
