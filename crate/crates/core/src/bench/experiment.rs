use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::seed::derive_seed;
use crate::dynsys::{estimate_lyapunov, ks_generate, lorenz_generate, KsParams, LorenzParams, LyapunovEstimate, SystemParams};
use crate::error::{Error, Result};
use crate::features::{plan_features, FeatureConfig, FeatureFamily};
use crate::metrics::{first_crossing, normalized_error_padded, DEFAULT_THETA, THETA_SWEEP};
use crate::readout::{esn_train, predict_closed_loop, train, EsnConfig, ReadoutModel, TrainConfig, TrainSummary};
use crate::series::TimeSeries;

/// Ground-truth data source for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Lorenz {
        #[serde(default)]
        params: LorenzParams,
        /// Each trial starts from `initial_state` plus a uniform offset in
        /// `[-jitter, jitter]` per coordinate.
        #[serde(default = "default_jitter")]
        jitter: f64,
        /// Steps discarded before the training segment.
        #[serde(default = "default_lorenz_transient")]
        transient_steps: usize,
    },
    Ks {
        #[serde(default)]
        params: KsParams,
    },
    /// `u(t) = value` at every step.
    Constant { value: Vec<f64>, dt: f64 },
}

fn default_jitter() -> f64 {
    10.0
}

fn default_lorenz_transient() -> usize {
    1000
}

impl SystemSpec {
    pub fn lorenz() -> Self {
        SystemSpec::Lorenz {
            params: LorenzParams::default(),
            jitter: default_jitter(),
            transient_steps: default_lorenz_transient(),
        }
    }

    pub fn ks(domain_length: f64, grid_points: usize) -> Self {
        SystemSpec::Ks {
            params: KsParams::new(domain_length, grid_points),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Lorenz { .. } => 3,
            SystemSpec::Ks { params } => params.grid_points,
            SystemSpec::Constant { value, .. } => value.len(),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            SystemSpec::Lorenz { params, .. } => params.dt,
            SystemSpec::Ks { params } => params.dt,
            SystemSpec::Constant { dt, .. } => *dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::Lorenz { params, jitter, .. } => {
                params.validate()?;
                if !(*jitter >= 0.0) || !jitter.is_finite() {
                    return Err(Error::config(format!("jitter must be >= 0, got {jitter}")));
                }
                Ok(())
            }
            SystemSpec::Ks { params } => params.validate(),
            SystemSpec::Constant { value, dt } => {
                if value.is_empty() || value.iter().any(|v| !v.is_finite()) || !(*dt > 0.0) {
                    return Err(Error::config("constant system needs finite values and dt > 0"));
                }
                Ok(())
            }
        }
    }

    /// `n_steps + 1` consecutive states for one trial.
    pub fn generate(&self, n_steps: usize, seed: u64) -> Result<TimeSeries> {
        match self {
            SystemSpec::Lorenz {
                params,
                jitter,
                transient_steps,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut p = *params;
                for v in p.initial_state.iter_mut() {
                    *v += jitter * rng.random_range(-1.0..=1.0);
                }
                let full = lorenz_generate(&p, transient_steps + n_steps)?;
                full.slice(*transient_steps, full.len())
            }
            SystemSpec::Ks { params } => ks_generate(params, n_steps, seed),
            SystemSpec::Constant { value, dt } => {
                let cols = vec![value.clone(); n_steps + 1];
                TimeSeries::from_columns(&cols, *dt, 0.0)
            }
        }
    }

    fn dynamics(&self) -> Option<SystemParams> {
        match self {
            SystemSpec::Lorenz { params, .. } => Some(SystemParams::Lorenz(*params)),
            SystemSpec::Ks { params } => Some(SystemParams::Ks(params.clone())),
            SystemSpec::Constant { .. } => None,
        }
    }

    /// Default Benettin horizon, seconds.
    fn lyapunov_horizon(&self) -> f64 {
        match self {
            SystemSpec::Lorenz { .. } => 500.0,
            SystemSpec::Ks { .. } => 10_000.0,
            SystemSpec::Constant { .. } => 0.0,
        }
    }
}

/// The model trained in every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Features {
        features: FeatureConfig,
    },
    Esn {
        esn: EsnConfig,
        #[serde(default = "default_washout")]
        washout: usize,
    },
}

fn default_washout() -> usize {
    100
}

impl ModelSpec {
    pub fn features(config: FeatureConfig) -> Self {
        ModelSpec::Features { features: config }
    }

    pub fn esn(config: EsnConfig) -> Self {
        ModelSpec::Esn {
            esn: config,
            washout: default_washout(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::Features { features } => match features.family {
                FeatureFamily::HengRc => "heng_rc",
                FeatureFamily::NgRc => "ng_rc",
                FeatureFamily::EsnState => "esn_state",
            },
            ModelSpec::Esn { .. } => "esn",
        }
    }

    /// Feature count (or reservoir size).
    pub fn states(&self) -> Result<usize> {
        match self {
            ModelSpec::Features { features } => Ok(plan_features(features)?.total_dim),
            ModelSpec::Esn { esn, .. } => Ok(esn.n_nodes),
        }
    }

    pub fn warmup_needed(&self) -> Result<usize> {
        match self {
            ModelSpec::Features { features } => Ok(features.history_depth() + 1),
            ModelSpec::Esn { washout, .. } => Ok(washout + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: SystemSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    /// Transitions in the training segment (it holds one more state).
    pub training_steps: usize,
    /// States at the end of the training segment handed to the predictor;
    /// the whole segment when absent.
    #[serde(default)]
    pub warmup_steps: Option<usize>,
    pub prediction_steps: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_sweep")]
    pub theta_sweep: Vec<f64>,
    pub n_trials: usize,
    #[serde(with = "crate::bench::seed::wide")]
    pub seed: u64,
    /// Largest Lyapunov exponent; estimated from the system when absent.
    #[serde(default)]
    pub lyapunov_exponent: Option<f64>,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_sweep() -> Vec<f64> {
    THETA_SWEEP.to_vec()
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, system: SystemSpec, model: ModelSpec, train: TrainConfig) -> Self {
        Self {
            name: name.into(),
            system,
            model,
            train,
            training_steps: 400,
            warmup_steps: None,
            prediction_steps: 2000,
            theta: DEFAULT_THETA,
            theta_sweep: THETA_SWEEP.to_vec(),
            n_trials: 10,
            seed: 0,
            lyapunov_exponent: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.prediction_steps == 0 {
            return Err(Error::config("prediction_steps must be at least 1"));
        }
        for t in std::iter::once(&self.theta).chain(&self.theta_sweep) {
            if !(*t > 0.0) || !t.is_finite() {
                return Err(Error::config(format!("thresholds must be positive, got {t}")));
            }
        }
        match &self.model {
            ModelSpec::Features { features } => {
                features.validate()?;
                if features.family == FeatureFamily::EsnState {
                    return Err(Error::config("use the esn model kind for reservoir models"));
                }
                if features.q != self.system.dim() {
                    return Err(Error::config(format!(
                        "feature map expects dimension {}, system has {}",
                        features.q,
                        self.system.dim()
                    )));
                }
            }
            ModelSpec::Esn { esn, .. } => esn.validate()?,
        }
        let needed = self.model.warmup_needed()?;
        if self.training_steps + 1 < needed + 1 {
            return Err(Error::SeriesTooShort {
                needed,
                available: self.training_steps + 1,
            });
        }
        if let Some(w) = self.warmup_steps {
            if w < needed || w > self.training_steps + 1 {
                return Err(Error::config(format!(
                    "warmup_steps must lie in [{needed}, {}], got {w}",
                    self.training_steps + 1
                )));
            }
        }
        if let Some(l) = self.lyapunov_exponent {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::config(format!("Lyapunov exponent must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// All thresholds reported, primary first, without repeats.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = vec![self.theta];
        for t in &self.theta_sweep {
            if !out.contains(t) {
                out.push(*t);
            }
        }
        out
    }

    /// Seed of the trajectory used by trial `trial`.
    pub fn data_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, "data", trial as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    BlowUp,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub valid_steps: usize,
    pub valid_seconds: f64,
    pub valid_lyapunov_times: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub data_seed: u64,
    pub status: TrialStatus,
    pub message: Option<String>,
    pub blow_up_step: Option<usize>,
    pub train: Option<TrainSummary>,
    pub predict_seconds: f64,
    /// One entry per threshold, primary first.
    pub valid: Vec<ThresholdResult>,
    /// Normalized error at each predicted step (infinite past a blow-up).
    #[serde(skip)]
    pub error_curve: Vec<f64>,
}

impl TrialReport {
    pub fn valid_steps(&self, theta: f64) -> Option<usize> {
        self.valid.iter().find(|v| v.threshold == theta).map(|v| v.valid_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub median_steps: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    pub median_seconds: f64,
    pub median_lyapunov_times: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub family: String,
    /// Feature count or reservoir size.
    pub states: usize,
    pub lyapunov: Option<LyapunovEstimate>,
    /// Median over trials of featurization plus solve, seconds.
    pub time_cost_train: f64,
    pub time_cost_featurize: f64,
    pub time_cost_solve: f64,
    /// Median over trials of training plus closed-loop prediction, seconds.
    pub time_cost_total: f64,
    pub n_failed: usize,
    pub n_blown_up: usize,
    pub summary: Vec<ThresholdSummary>,
    pub trials: Vec<TrialReport>,
}

impl ExperimentReport {
    pub fn summary_for(&self, theta: f64) -> Option<&ThresholdSummary> {
        self.summary.iter().find(|s| s.threshold == theta)
    }

    /// Median valid steps at the primary threshold.
    pub fn median_steps(&self) -> f64 {
        self.summary[0].median_steps
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest Lyapunov exponent for the spec's system, from the override or a
/// Benettin estimate seeded by the spec.
pub fn experiment_lyapunov(spec: &ExperimentSpec) -> Result<Option<LyapunovEstimate>> {
    if let Some(l) = spec.lyapunov_exponent {
        return Ok(Some(LyapunovEstimate::from_lambda(l, 0)));
    }
    match spec.system.dynamics() {
        Some(sys) => Ok(Some(estimate_lyapunov(
            &sys,
            spec.system.lyapunov_horizon(),
            derive_seed(spec.seed, "lyapunov", 0),
        )?)),
        None => Ok(None),
    }
}

fn fit(spec: &ExperimentSpec, trial: usize, train_series: &TimeSeries) -> Result<(ReadoutModel, TrainSummary)> {
    match &spec.model {
        ModelSpec::Features { features } => train(train_series, &plan_features(features)?, &spec.train),
        ModelSpec::Esn { esn, washout } => {
            let mut cfg = esn.clone();
            cfg.seed = derive_seed(esn.seed, "reservoir", trial as u64);
            esn_train(train_series, &cfg, &spec.train, *washout)
        }
    }
}

fn run_trial(spec: &ExperimentSpec, trial: usize, lyap: Option<&LyapunovEstimate>) -> TrialReport {
    let data_seed = spec.data_seed(trial);
    let thresholds = spec.thresholds();
    let mut report = TrialReport {
        trial,
        data_seed,
        status: TrialStatus::Failed,
        message: None,
        blow_up_step: None,
        train: None,
        predict_seconds: 0.0,
        valid: Vec::new(),
        error_curve: Vec::new(),
    };
    let outcome = (|| -> Result<()> {
        let data = spec.system.generate(spec.training_steps + spec.prediction_steps, data_seed)?;
        let train_series = data.slice(0, spec.training_steps + 1)?;
        let truth = data.slice(spec.training_steps + 1, data.len())?;
        let (model, summary) = fit(spec, trial, &train_series)?;
        report.train = Some(summary);
        let warmup = match spec.warmup_steps {
            Some(w) => train_series.slice(train_series.len() - w, train_series.len())?,
            None => train_series,
        };
        let clock = Instant::now();
        let forecast = predict_closed_loop(&model, &warmup, spec.prediction_steps);
        report.predict_seconds = clock.elapsed().as_secs_f64();
        let curve = match forecast {
            Ok(f) => {
                report.blow_up_step = f.blow_up_step;
                normalized_error_padded(&truth, &f.series)?
            }
            Err(Error::BlowUp { .. }) => {
                report.blow_up_step = Some(0);
                vec![f64::INFINITY; truth.len()]
            }
            Err(e) => return Err(e),
        };
        report.status = if report.blow_up_step.is_some() {
            TrialStatus::BlowUp
        } else {
            TrialStatus::Ok
        };
        report.error_curve = curve;
        Ok(())
    })();
    if let Err(e) = outcome {
        report.status = TrialStatus::Failed;
        report.message = Some(e.to_string());
    }
    let dt = spec.system.dt();
    report.valid = thresholds
        .iter()
        .map(|&theta| {
            let steps = first_crossing(&report.error_curve, theta);
            let seconds = steps as f64 * dt;
            ThresholdResult {
                threshold: theta,
                valid_steps: steps,
                valid_seconds: seconds,
                valid_lyapunov_times: lyap.map(|l| seconds * l.lambda_max),
            }
        })
        .collect();
    report
}

/// Runs every trial of `spec` in index order. Trials that fail or blow up
/// are recorded, not propagated; failed trials score zero valid steps.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let lyap = experiment_lyapunov(spec)?;
    run_experiment_with(spec, lyap)
}

/// As [`run_experiment`] with a precomputed Lyapunov estimate.
pub fn run_experiment_with(spec: &ExperimentSpec, lyap: Option<LyapunovEstimate>) -> Result<ExperimentReport> {
    spec.validate()?;
    let states = spec.model.states()?;
    let trials: Vec<TrialReport> = (0..spec.n_trials).map(|t| run_trial(spec, t, lyap.as_ref())).collect();

    let timed: Vec<&TrainSummary> = trials.iter().filter_map(|t| t.train.as_ref()).collect();
    let med = |f: &dyn Fn(&TrialReport) -> Option<f64>| median(&trials.iter().filter_map(f).collect::<Vec<_>>());
    let time_cost_featurize = median(&timed.iter().map(|s| s.wall_clock_featurize).collect::<Vec<_>>());
    let time_cost_solve = median(&timed.iter().map(|s| s.wall_clock_train).collect::<Vec<_>>());
    let time_cost_train = med(&|t| t.train.as_ref().map(|s| s.wall_clock_featurize + s.wall_clock_train));
    let time_cost_total =
        med(&|t| t.train.as_ref().map(|s| s.wall_clock_featurize + s.wall_clock_train + t.predict_seconds));

    let summary = spec
        .thresholds()
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let steps: Vec<usize> = trials.iter().map(|t| t.valid[k].valid_steps).collect();
            let as_f: Vec<f64> = steps.iter().map(|s| *s as f64).collect();
            let median_steps = median(&as_f);
            let median_seconds = median_steps * spec.system.dt();
            ThresholdSummary {
                threshold: theta,
                median_steps,
                min_steps: steps.iter().copied().min().unwrap_or(0),
                max_steps: steps.iter().copied().max().unwrap_or(0),
                median_seconds,
                median_lyapunov_times: lyap.map(|l| median_seconds * l.lambda_max),
            }
        })
        .collect();

    Ok(ExperimentReport {
        family: spec.model.family_name().to_string(),
        states,
        lyapunov: lyap,
        time_cost_train,
        time_cost_featurize,
        time_cost_solve,
        time_cost_total,
        n_failed: trials.iter().filter(|t| t.status == TrialStatus::Failed).count(),
        n_blown_up: trials.iter().filter(|t| t.status == TrialStatus::BlowUp).count(),
        summary,
        trials,
        spec: spec.clone(),
    })
}
