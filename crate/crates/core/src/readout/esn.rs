//! Leaky echo state network:
//! `S(t+1) = (1 - gamma) S(t) + gamma tanh(S(t) A + W_in u(t) + b)`.
//!
//! States are row vectors, so node `j` receives `sum_i S_i A_ij`; `A` is
//! stored by source row `i`.

use std::ops::Range;

use faer::{Mat, MatMut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{fit_model, ModelKind, Normalizer, ReadoutModel, TrainConfig, TrainSummary};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Largest reservoir whose spectral radius is taken from a dense eigenvalue
/// decomposition; above it, power iteration.
pub const DENSE_RADIUS_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsnConfig {
    pub n_nodes: usize,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scale: f64,
    pub bias_scale: f64,
    /// Mean nonzeros per row of `A`.
    pub connectivity_degree: f64,
    pub activation: Activation,
    #[serde(with = "crate::bench::seed::wide")]
    pub seed: u64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            n_nodes: 100,
            leak_rate: 1.0,
            spectral_radius: 0.9,
            input_scale: 0.1,
            bias_scale: 0.1,
            connectivity_degree: 3.0,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl EsnConfig {
    pub fn with_nodes(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.n_nodes == 0 {
            return bad("reservoir needs at least one node".into());
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return bad(format!("leak rate must lie in (0, 1], got {}", self.leak_rate));
        }
        if !(self.spectral_radius > 0.0) || !self.spectral_radius.is_finite() {
            return bad(format!("spectral radius must be positive, got {}", self.spectral_radius));
        }
        for (name, v) in [("input_scale", self.input_scale), ("bias_scale", self.bias_scale)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.connectivity_degree > 0.0 && self.connectivity_degree <= self.n_nodes as f64) {
            return bad(format!(
                "connectivity degree must lie in (0, {}], got {}",
                self.n_nodes, self.connectivity_degree
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("esn config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnState {
    pub s: Vec<f64>,
}

impl EsnState {
    pub fn zeros(n_nodes: usize) -> Self {
        Self { s: vec![0.0; n_nodes] }
    }
}

/// Fixed reservoir weights.
#[derive(Debug, Clone)]
pub struct Reservoir {
    config: EsnConfig,
    input_dim: usize,
    /// `adjacency[i]` lists `(j, A_ij)`.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// `N x Q`, row-major by node.
    w_in: Vec<f64>,
    bias: Vec<f64>,
    /// Built from explicit weights rather than from the config's seed.
    custom: bool,
}

impl Reservoir {
    /// Draws `A`, `W_in` and `b` from `config.seed` and rescales `A` to the
    /// configured spectral radius.
    pub fn new(config: &EsnConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::config("reservoir input needs at least one dimension"));
        }
        let n = config.n_nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let w_in = (0..n * input_dim)
            .map(|_| config.input_scale * rng.random_range(-1.0..=1.0))
            .collect();
        let bias = (0..n)
            .map(|_| config.bias_scale * rng.random_range(-1.0..=1.0))
            .collect();
        let p = config.connectivity_degree / n as f64;
        for _ in 0..100 {
            let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for row in adjacency.iter_mut() {
                for j in 0..n {
                    if rng.random::<f64>() < p {
                        row.push((j, rng.random_range(-1.0..=1.0)));
                    }
                }
            }
            let radius = spectral_radius(&adjacency, &mut rng);
            if radius > 1e-12 {
                let scale = config.spectral_radius / radius;
                for row in adjacency.iter_mut() {
                    row.iter_mut().for_each(|(_, v)| *v *= scale);
                }
                return Ok(Self {
                    config: config.clone(),
                    input_dim,
                    adjacency,
                    w_in,
                    bias,
                    custom: false,
                });
            }
        }
        Err(Error::config(format!(
            "could not draw a reservoir with nonzero spectral radius (N = {n}, degree = {})",
            config.connectivity_degree
        )))
    }

    /// Reservoir from explicit dense weights: `a` is `N x N` row-major,
    /// `w_in` is `N x Q` row-major. `A` is used as given.
    pub fn from_parts(config: &EsnConfig, a: &[f64], w_in: &[f64], bias: &[f64]) -> Result<Self> {
        let n = config.n_nodes;
        if n == 0 || a.len() != n * n || bias.len() != n || w_in.is_empty() || w_in.len() % n != 0 {
            return Err(Error::mismatch("reservoir parts do not match the node count"));
        }
        if !(0.0..=1.0).contains(&config.leak_rate) {
            return Err(Error::config(format!("leak rate must lie in [0, 1], got {}", config.leak_rate)));
        }
        let adjacency = a
            .chunks_exact(n)
            .map(|row| row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        Ok(Self {
            config: config.clone(),
            input_dim: w_in.len() / n,
            adjacency,
            w_in: w_in.to_vec(),
            bias: bias.to_vec(),
            custom: true,
        })
    }

    pub fn config(&self) -> &EsnConfig {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.config.n_nodes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_custom(&self) -> bool {
        self.custom
    }

    pub fn nonzeros(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Spectral radius of the stored `A`.
    pub fn radius(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed);
        spectral_radius(&self.adjacency, &mut rng)
    }

    /// One update in place; `scratch` must hold `N` values.
    pub fn advance(&self, state: &mut [f64], input: &[f64], scratch: &mut [f64]) {
        let q = self.input_dim;
        for (j, pre) in scratch.iter_mut().enumerate() {
            let w = &self.w_in[j * q..(j + 1) * q];
            *pre = self.bias[j] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
        }
        for (i, row) in self.adjacency.iter().enumerate() {
            let si = state[i];
            if si == 0.0 {
                continue;
            }
            for &(j, v) in row {
                scratch[j] += si * v;
            }
        }
        let g = self.config.leak_rate;
        for (s, pre) in state.iter_mut().zip(scratch.iter()) {
            *s = (1.0 - g) * *s + g * pre.tanh();
        }
    }
}

fn spectral_radius(adjacency: &[Vec<(usize, f64)>], rng: &mut ChaCha8Rng) -> f64 {
    let n = adjacency.len();
    if n <= DENSE_RADIUS_LIMIT {
        let mut dense = Mat::<f64>::zeros(n, n);
        for (i, row) in adjacency.iter().enumerate() {
            for &(j, v) in row {
                dense[(i, j)] = v;
            }
        }
        match dense.eigenvalues() {
            Ok(ev) => return ev.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max),
            Err(_) => return power_radius(adjacency, rng),
        }
    }
    power_radius(adjacency, rng)
}

/// Mean logarithmic growth rate of `x A` over many normalized iterations.
fn power_radius(adjacency: &[Vec<(usize, f64)>], rng: &mut ChaCha8Rng) -> f64 {
    const BURN_IN: usize = 500;
    const MEASURE: usize = 20_000;
    let n = adjacency.len();
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut y = vec![0.0; n];
    let mut log_growth = 0.0;
    for it in 0..BURN_IN + MEASURE {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in adjacency.iter().enumerate() {
            for &(j, v) in row {
                y[j] += x[i] * v;
            }
        }
        let grown = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(grown > 0.0) {
            return 0.0;
        }
        if it >= BURN_IN {
            log_growth += grown.ln();
        }
        std::mem::swap(&mut x, &mut y);
    }
    (log_growth / MEASURE as f64).exp()
}

/// One reservoir update.
pub fn esn_step(state: &EsnState, input: &[f64], reservoir: &Reservoir) -> Result<EsnState> {
    if state.s.len() != reservoir.n_nodes() || input.len() != reservoir.input_dim() {
        return Err(Error::mismatch(format!(
            "state/input are {}/{}, reservoir expects {}/{}",
            state.s.len(),
            input.len(),
            reservoir.n_nodes(),
            reservoir.input_dim()
        )));
    }
    let mut next = state.clone();
    let mut scratch = vec![0.0; reservoir.n_nodes()];
    reservoir.advance(&mut next.s, input, &mut scratch);
    Ok(next)
}

/// Drives a fresh reservoir over `series`, discards the first `washout`
/// states and fits the readout on the rest.
pub fn esn_train(
    series: &TimeSeries,
    config: &EsnConfig,
    cfg: &TrainConfig,
    washout: usize,
) -> Result<(ReadoutModel, TrainSummary)> {
    let reservoir = Reservoir::new(config, series.dim())?;
    esn_train_with(series, reservoir, cfg, washout)
}

pub fn esn_train_with(
    series: &TimeSeries,
    reservoir: Reservoir,
    cfg: &TrainConfig,
    washout: usize,
) -> Result<(ReadoutModel, TrainSummary)> {
    if series.dim() != reservoir.input_dim() {
        return Err(Error::mismatch(format!(
            "series has dimension {}, reservoir expects {}",
            series.dim(),
            reservoir.input_dim()
        )));
    }
    if series.len() < washout + 2 {
        return Err(Error::SeriesTooShort {
            needed: washout + 2,
            available: series.len(),
        });
    }
    let normalizer = cfg.normalize.then(|| Normalizer::fit(series));
    let work = match &normalizer {
        Some(n) => n.apply(series),
        None => series.clone(),
    };
    let n_nodes = reservoir.n_nodes();
    let (w_out, summary) = {
    let res = &reservoir;
    fit_model(&work, washout, n_nodes, cfg, |s| {
        let mut state = vec![0.0; n_nodes];
        let mut scratch = vec![0.0; n_nodes];
        let mut fed = 0;
        Box::new(move |range: Range<usize>, mut out: MatMut<'_, f64>| {
            for (c, sample) in range.enumerate() {
                let t = washout + sample;
                while fed <= t {
                    res.advance(&mut state, s.column(fed), &mut scratch);
                    fed += 1;
                }
                for (dst, v) in out.as_mut().col_mut(c).iter_mut().zip(&state) {
                    *dst = *v;
                }
            }
            Ok(())
        })
    })?
    };
    let model = ReadoutModel {
        w_out,
        lambda: cfg.lambda,
        kind: ModelKind::Esn {
            reservoir: Box::new(reservoir),
            washout,
        },
        target_mode: cfg.target_mode,
        normalizer,
    };
    Ok((model, summary))
}

/// Closed-loop continuation of an ESN model; the reservoir is synchronized
/// on all of `warmup` first.
pub fn esn_predict(model: &ReadoutModel, warmup: &TimeSeries, n_steps: usize) -> Result<super::Forecast> {
    if !matches!(model.kind, ModelKind::Esn { .. }) {
        return Err(Error::config("model is not an echo state network"));
    }
    super::predict_closed_loop(model, warmup, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{lorenz_generate, LorenzParams};
    use crate::readout::TargetMode;

    fn tiny(n: usize, leak: f64) -> EsnConfig {
        EsnConfig {
            n_nodes: n,
            leak_rate: leak,
            ..Default::default()
        }
    }

    #[test]
    fn zero_leak_keeps_state() {
        let r = Reservoir::from_parts(&tiny(2, 0.0), &[0.3, 0.1, -0.2, 0.4], &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        let s = EsnState { s: vec![0.25, -0.75] };
        assert_eq!(esn_step(&s, &[2.0], &r).unwrap(), s);
    }

    #[test]
    fn zero_in_zero_out() {
        let r = Reservoir::from_parts(&tiny(2, 1.0), &[0.3, 0.1, -0.2, 0.4], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(esn_step(&EsnState::zeros(2), &[0.0], &r).unwrap().s, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_input_gives_tanh() {
        let n = 3;
        let mut w_in = vec![0.0; 9];
        for i in 0..3 {
            w_in[i * 3 + i] = 1.0;
        }
        let r = Reservoir::from_parts(&tiny(n, 1.0), &[0.0; 9], &w_in, &[0.0; 3]).unwrap();
        let s = esn_step(&EsnState::zeros(3), &[0.5, 0.5, 0.5], &r).unwrap();
        assert_eq!(s.s, vec![0.5f64.tanh(); 3]);
    }

    #[test]
    fn row_vector_orientation() {
        // A_01 = 0.7: node 0 feeds node 1, not the reverse.
        let r = Reservoir::from_parts(&tiny(2, 1.0), &[0.0, 0.7, 0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let s = esn_step(&EsnState { s: vec![1.0, 0.0] }, &[0.0], &r).unwrap();
        assert_eq!(s.s, vec![0.0, 0.7f64.tanh()]);
        let s = esn_step(&EsnState { s: vec![0.0, 1.0] }, &[0.0], &r).unwrap();
        assert_eq!(s.s, vec![0.0, 0.0]);
    }

    #[test]
    fn rescaled_to_target_radius() {
        for (n, seed) in [(28, 1), (200, 2)] {
            let cfg = EsnConfig {
                n_nodes: n,
                seed,
                ..Default::default()
            };
            let r = Reservoir::new(&cfg, 3).unwrap();
            assert!((r.radius() - 0.9).abs() < 1e-6, "{}", r.radius());
        }
    }

    #[test]
    fn power_iteration_tracks_dense_radius() {
        let cfg = EsnConfig {
            n_nodes: 300,
            seed: 5,
            ..Default::default()
        };
        let r = Reservoir::new(&cfg, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let est = power_radius(&r.adjacency, &mut rng);
        assert!((est - 0.9).abs() < 0.02, "{est}");
    }

    #[test]
    fn bounded_and_deterministic() {
        let cfg = EsnConfig {
            n_nodes: 50,
            input_scale: 5.0,
            seed: 3,
            ..Default::default()
        };
        let a = Reservoir::new(&cfg, 3).unwrap();
        let b = Reservoir::new(&cfg, 3).unwrap();
        let mut s = EsnState::zeros(50);
        let mut t = EsnState::zeros(50);
        for k in 0..200 {
            let u = [(k as f64).sin() * 10.0, 3.0, -7.0];
            s = esn_step(&s, &u, &a).unwrap();
            t = esn_step(&t, &u, &b).unwrap();
            assert!(s.s.iter().all(|v| v.abs() <= 1.0));
        }
        assert_eq!(s, t);
    }

    #[test]
    fn washout_forgets_initial_state() {
        let r = Reservoir::new(&EsnConfig::with_nodes(100), 3).unwrap();
        let series = lorenz_generate(&LorenzParams::default(), 400).unwrap();
        let mut a = vec![0.0; 100];
        let mut b: Vec<f64> = (0..100).map(|i| ((i * 7) as f64).sin()).collect();
        let mut scratch = vec![0.0; 100];
        for t in 0..300 {
            let u: Vec<f64> = series.column(t).iter().map(|v| v / 10.0).collect();
            r.advance(&mut a, &u, &mut scratch);
            r.advance(&mut b, &u, &mut scratch);
        }
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "{gap}");
    }

    #[test]
    fn small_reservoir_trains_on_lorenz() {
        let series = lorenz_generate(&LorenzParams::default(), 1500).unwrap();
        let cfg = EsnConfig::with_nodes(28);
        let (model, summary) = esn_train(&series, &cfg, &TrainConfig::new(1e-6, TargetMode::NextState), 100).unwrap();
        assert_eq!(summary.n_samples, 1501 - 1 - 100);
        assert_eq!(model.states(), 28);
        let f = esn_predict(&model, &series, 200).unwrap();
        assert!(f.series.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(Reservoir::new(&tiny(10, 0.0), 1).is_err());
        assert!(Reservoir::new(&EsnConfig { spectral_radius: -1.0, ..Default::default() }, 1).is_err());
        assert!(Reservoir::new(&EsnConfig::default(), 0).is_err());
    }
}
