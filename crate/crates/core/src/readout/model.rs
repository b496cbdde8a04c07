use std::ops::Range;
use std::time::{Duration, Instant};

use faer::{Mat, MatMut};
use serde::{Deserialize, Serialize};

use super::esn::Reservoir;
use super::ridge::GramAccumulator;
use crate::dynsys::BLOWUP_GUARD;
use crate::error::{Error, Result};
use crate::features::build::{write_features, DelayWindow};
use crate::features::{featurize_range, FeatureFamily, FeatureMap};
use crate::series::TimeSeries;

/// What the readout regresses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// `Y(t) = u(t+1)`
    #[default]
    NextState,
    /// `Y(t) = u(t+1) - u(t)`
    Delta,
}

impl TargetMode {
    pub fn code(self) -> u8 {
        match self {
            TargetMode::NextState => 0,
            TargetMode::Delta => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(TargetMode::NextState),
            1 => Ok(TargetMode::Delta),
            _ => Err(Error::format(format!("unknown target mode code {code}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetMode::NextState => "next_state",
            TargetMode::Delta => "delta",
        }
    }
}

/// Per-dimension z-score learned on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Normalizer {
    /// Dimensions with zero spread keep a unit scale.
    pub fn fit(series: &TimeSeries) -> Self {
        let q = series.dim();
        let n = series.len() as f64;
        let mut means = vec![0.0; q];
        for col in series.columns() {
            for (m, v) in means.iter_mut().zip(col) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; q];
        for col in series.columns() {
            for ((s, v), m) in vars.iter_mut().zip(col).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn forward(&self, state: &mut [f64]) {
        for ((v, m), s) in state.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }

    pub fn inverse(&self, state: &mut [f64]) {
        for ((v, m), s) in state.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = *v * s + m;
        }
    }

    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let mut data = series.as_slice().to_vec();
        for col in data.chunks_exact_mut(series.dim()) {
            self.forward(col);
        }
        TimeSeries::from_parts_unchecked(series.dim(), series.dt(), series.origin_time(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub target_mode: TargetMode,
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            target_mode: TargetMode::NextState,
            normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn new(lambda: f64, target_mode: TargetMode) -> Self {
        Self {
            lambda,
            target_mode,
            normalize: false,
        }
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }
}

/// The feature source a readout is bound to.
#[derive(Debug, Clone)]
pub enum ModelKind {
    Features(FeatureMap),
    Esn { reservoir: Box<Reservoir>, washout: usize },
}

/// A trained linear readout. Immutable once built.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    /// `Q_out x F`
    pub w_out: Mat<f64>,
    pub lambda: f64,
    pub kind: ModelKind,
    pub target_mode: TargetMode,
    pub normalizer: Option<Normalizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub n_samples: usize,
    /// Root-mean-square next-state residual over the training samples,
    /// relative to the root-mean-square target (in model coordinates).
    pub fit_rmse: f64,
    pub normal_eq_residual: f64,
    /// Gram accumulation and solve, seconds.
    pub wall_clock_train: f64,
    /// Feature assembly (or reservoir driving), seconds.
    pub wall_clock_featurize: f64,
    pub warnings: Vec<String>,
}

/// Closed-loop output. `blow_up_step` is set when the guard stopped the run
/// early; `series` then holds only the states before it.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub series: TimeSeries,
    pub blow_up_step: Option<usize>,
}

impl ReadoutModel {
    pub fn input_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Features(map) => map.config.q,
            ModelKind::Esn { reservoir, .. } => reservoir.input_dim(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Features(map) => map.total_dim,
            ModelKind::Esn { reservoir, .. } => reservoir.n_nodes(),
        }
    }

    /// Number of states the model's feature vector is built from
    /// (reservoir node count for ESN models).
    pub fn states(&self) -> usize {
        self.feature_dim()
    }

    /// Minimum warmup length for closed-loop prediction.
    pub fn warmup_needed(&self) -> usize {
        match &self.kind {
            ModelKind::Features(map) => map.history_depth() + 1,
            ModelKind::Esn { washout, .. } => washout + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_out.nrows() != self.input_dim() || self.w_out.ncols() != self.feature_dim() {
            return Err(Error::mismatch(format!(
                "readout is {}x{}, expected {}x{}",
                self.w_out.nrows(),
                self.w_out.ncols(),
                self.input_dim(),
                self.feature_dim()
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::config(format!("ridge parameter must be >= 0, got {}", self.lambda)));
        }
        for j in 0..self.w_out.ncols() {
            if self.w_out.col(j).iter().any(|v| !v.is_finite()) {
                return Err(Error::config("readout weights are not finite"));
            }
        }
        if let Some(norm) = &self.normalizer {
            if norm.dim() != self.input_dim() || norm.stds.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::config("normalizer does not match the model"));
            }
        }
        Ok(())
    }

    fn apply(&self, features: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, f) in features.iter().enumerate() {
            if *f == 0.0 {
                continue;
            }
            let col = self.w_out.col(j);
            for (o, w) in out.iter_mut().zip(col.iter()) {
                *o += w * f;
            }
        }
    }
}

/// Columns per block during streaming accumulation.
fn chunk_columns(n_features: usize) -> usize {
    ((1usize << 22) / n_features.max(1)).clamp(64, 4096)
}

/// Training samples: sample `c` uses the state at step `first + c` and
/// predicts step `first + c + 1`.
struct Samples<'a> {
    series: &'a TimeSeries,
    first: usize,
    n: usize,
    mode: TargetMode,
}

impl Samples<'_> {
    fn targets(&self, range: Range<usize>) -> Mat<f64> {
        let first = self.first;
        Mat::from_fn(self.series.dim(), range.len(), |i, c| {
            let t = first + range.start + c;
            let next = self.series.get(i, t + 1);
            match self.mode {
                TargetMode::NextState => next,
                TargetMode::Delta => next - self.series.get(i, t),
            }
        })
    }
}

type Fill<'a> = dyn FnMut(Range<usize>, MatMut<'_, f64>) -> Result<()> + 'a;

fn accumulate(samples: &Samples<'_>, n_features: usize, fill: &mut Fill<'_>) -> Result<(GramAccumulator, Duration, Duration)> {
    let chunk = chunk_columns(n_features);
    let mut acc = GramAccumulator::new(n_features, samples.series.dim());
    let mut block = Mat::<f64>::zeros(n_features, chunk.min(samples.n));
    let (mut t_feat, mut t_acc) = (Duration::ZERO, Duration::ZERO);
    let mut start = 0;
    while start < samples.n {
        let end = (start + chunk).min(samples.n);
        let m = end - start;
        let clock = Instant::now();
        fill(start..end, block.as_mut().subcols_mut(0, m))?;
        t_feat += clock.elapsed();
        let targets = samples.targets(start..end);
        let clock = Instant::now();
        acc.add(block.as_ref().subcols(0, m), targets.as_ref())?;
        t_acc += clock.elapsed();
        start = end;
    }
    Ok((acc, t_feat, t_acc))
}

/// Relative next-state residual of `w` over all samples.
fn fit_rmse(samples: &Samples<'_>, w: &Mat<f64>, fill: &mut Fill<'_>) -> Result<f64> {
    let n_features = w.ncols();
    let q = samples.series.dim();
    let chunk = chunk_columns(n_features);
    let mut block = Mat::<f64>::zeros(n_features, chunk.min(samples.n));
    let (mut num, mut den) = (0.0, 0.0);
    let mut start = 0;
    let mut pred = vec![0.0; q];
    while start < samples.n {
        let end = (start + chunk).min(samples.n);
        fill(start..end, block.as_mut().subcols_mut(0, end - start))?;
        for c in 0..end - start {
            let t = samples.first + start + c;
            pred.iter_mut().for_each(|v| *v = 0.0);
            for (j, f) in block.col(c).iter().enumerate() {
                for (p, wv) in pred.iter_mut().zip(w.col(j).iter()) {
                    *p += wv * f;
                }
            }
            for (i, p) in pred.iter().enumerate() {
                let next = samples.series.get(i, t + 1);
                let guess = match samples.mode {
                    TargetMode::NextState => *p,
                    TargetMode::Delta => p + samples.series.get(i, t),
                };
                num += (guess - next) * (guess - next);
                den += next * next;
            }
        }
        start = end;
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

fn sample_warnings(n: usize, n_features: usize) -> Vec<String> {
    if n * 10 < n_features {
        vec![format!(
            "only {n} training samples for {n_features} features (fewer than one per ten)"
        )]
    } else {
        Vec::new()
    }
}

pub(crate) fn fit_model<'a>(
    series: &'a TimeSeries,
    first: usize,
    n_features: usize,
    cfg: &TrainConfig,
    mut make_fill: impl FnMut(&'a TimeSeries) -> Box<Fill<'a>>,
) -> Result<(Mat<f64>, TrainSummary)> {
    let samples = Samples {
        series,
        first,
        n: series.len() - 1 - first,
        mode: cfg.target_mode,
    };
    let (acc, t_feat, t_acc) = accumulate(&samples, n_features, &mut *make_fill(series))?;
    let clock = Instant::now();
    let solution = acc.finish(cfg.lambda)?;
    let t_solve = clock.elapsed();
    let rmse = fit_rmse(&samples, &solution.w, &mut *make_fill(series))?;
    Ok((
        solution.w,
        TrainSummary {
            n_samples: samples.n,
            fit_rmse: rmse,
            normal_eq_residual: solution.residual,
            wall_clock_train: (t_acc + t_solve).as_secs_f64(),
            wall_clock_featurize: t_feat.as_secs_f64(),
            warnings: sample_warnings(samples.n, n_features),
        },
    ))
}

/// Fits a readout on delay-window features of `series`.
pub fn train(series: &TimeSeries, map: &FeatureMap, cfg: &TrainConfig) -> Result<(ReadoutModel, TrainSummary)> {
    if map.config.family == FeatureFamily::EsnState {
        return Err(Error::config("esn_state features are trained with esn_train"));
    }
    if series.dim() != map.config.q {
        return Err(Error::mismatch(format!(
            "series has dimension {}, feature map expects {}",
            series.dim(),
            map.config.q
        )));
    }
    let depth = map.history_depth();
    if series.len() < depth + 2 {
        return Err(Error::SeriesTooShort {
            needed: depth + 2,
            available: series.len(),
        });
    }
    let normalizer = cfg.normalize.then(|| Normalizer::fit(series));
    let work = match &normalizer {
        Some(n) => n.apply(series),
        None => series.clone(),
    };
    let (w_out, summary) = fit_model(&work, depth, map.total_dim, cfg, |s| {
        Box::new(move |range: Range<usize>, out: MatMut<'_, f64>| {
            featurize_range(s, map, range.start + depth..range.end + depth, out)
        })
    })?;
    let model = ReadoutModel {
        w_out,
        lambda: cfg.lambda,
        kind: ModelKind::Features(map.clone()),
        target_mode: cfg.target_mode,
        normalizer,
    };
    Ok((model, summary))
}

/// Runs the model autonomously for `n_steps`, starting from the end of `warmup`.
pub fn predict_closed_loop(model: &ReadoutModel, warmup: &TimeSeries, n_steps: usize) -> Result<Forecast> {
    if warmup.dim() != model.input_dim() {
        return Err(Error::mismatch(format!(
            "warmup has dimension {}, model expects {}",
            warmup.dim(),
            model.input_dim()
        )));
    }
    if warmup.len() < model.warmup_needed() {
        return Err(Error::InsufficientHistory {
            needed: model.warmup_needed(),
            available: warmup.len(),
        });
    }
    if n_steps == 0 {
        return Err(Error::config("prediction needs at least one step"));
    }
    let q = warmup.dim();
    let to_model = |col: &[f64]| {
        let mut v = col.to_vec();
        if let Some(n) = &model.normalizer {
            n.forward(&mut v);
        }
        v
    };
    let mut out = Vec::with_capacity(q * n_steps);
    let mut blow_up = None;
    let mut next = vec![0.0; q];
    match &model.kind {
        ModelKind::Features(map) => {
            let depth = map.history_depth();
            // newest first
            let mut history: Vec<Vec<f64>> = (0..=depth).map(|d| to_model(warmup.column(warmup.len() - 1 - d))).collect();
            let mut features = vec![0.0; map.total_dim];
            for step in 0..n_steps {
                {
                    let window = DelayWindow::new(history.iter().map(|c| c.as_slice()).collect())?;
                    write_features(&window, map, &mut features);
                }
                model.apply(&features, &mut next);
                if model.target_mode == TargetMode::Delta {
                    for (n, u) in next.iter_mut().zip(&history[0]) {
                        *n += u;
                    }
                }
                if guard_tripped(&next) {
                    blow_up = Some(step);
                    break;
                }
                let mut oldest = history.pop().expect("history is never empty");
                oldest.copy_from_slice(&next);
                history.insert(0, oldest);
                emit(model, &next, &mut out);
            }
        }
        ModelKind::Esn { reservoir, .. } => {
            let mut state = vec![0.0; reservoir.n_nodes()];
            let mut scratch = vec![0.0; reservoir.n_nodes()];
            let mut input = Vec::new();
            for col in warmup.columns() {
                input = to_model(col);
                reservoir.advance(&mut state, &input, &mut scratch);
            }
            for step in 0..n_steps {
                model.apply(&state, &mut next);
                if model.target_mode == TargetMode::Delta {
                    for (n, u) in next.iter_mut().zip(&input) {
                        *n += u;
                    }
                }
                if guard_tripped(&next) {
                    blow_up = Some(step);
                    break;
                }
                input.copy_from_slice(&next);
                emit(model, &next, &mut out);
                reservoir.advance(&mut state, &input, &mut scratch);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::BlowUp {
            step: 0,
            magnitude: next.iter().fold(0.0_f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) }),
        });
    }
    let origin = warmup.time(warmup.len() - 1) + warmup.dt();
    Ok(Forecast {
        series: TimeSeries::from_parts_unchecked(q, warmup.dt(), origin, out),
        blow_up_step: blow_up,
    })
}

fn guard_tripped(state: &[f64]) -> bool {
    state.iter().any(|v| !(v.abs() <= BLOWUP_GUARD))
}

fn emit(model: &ReadoutModel, state: &[f64], out: &mut Vec<f64>) {
    let start = out.len();
    out.extend_from_slice(state);
    if let Some(n) = &model.normalizer {
        n.inverse(&mut out[start..]);
    }
}
