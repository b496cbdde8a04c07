//! Run configuration file. Every section is optional; command-line flags
//! override whatever the file sets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hengrc::bench::{ExperimentSpec, ModelSpec, Suite};
use hengrc::dynsys::{KsParams, LorenzParams};
use hengrc::features::FeatureConfig;
use hengrc::io::SeriesFormat;
use hengrc::readout::TrainConfig;
use hengrc::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: OutputConfig,
    pub generate: GenerateSection,
    pub train: TrainSection,
    pub predict: PredictSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<SeriesFormat>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub lorenz: LorenzSection,
    pub ks: KsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorenzSection {
    pub steps: usize,
    #[serde(with = "hengrc::bench::seed::wide")]
    pub seed: u64,
    pub params: LorenzParams,
    /// Half-width of the uniform perturbation added to the initial state.
    pub jitter: f64,
    pub transient_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for LorenzSection {
    fn default() -> Self {
        Self {
            steps: 10_000,
            seed: 0,
            params: LorenzParams::default(),
            jitter: 10.0,
            transient_steps: 1000,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsSection {
    pub steps: usize,
    #[serde(with = "hengrc::bench::seed::wide")]
    pub seed: u64,
    pub params: KsParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for KsSection {
    fn default() -> Self {
        Self {
            steps: 10_000,
            seed: 0,
            params: KsParams::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: ModelSpec,
    pub readout: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            input: None,
            out: None,
            model: ModelSpec::features(FeatureConfig::default()),
            readout: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<PathBuf>,
    /// Use only the last this-many warmup states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<usize>,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    pub theta: f64,
    pub theta_sweep: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            model: None,
            warmup: None,
            warmup_steps: None,
            steps: 1000,
            truth: None,
            theta: hengrc::metrics::DEFAULT_THETA,
            theta_sweep: hengrc::metrics::THETA_SWEEP.to_vec(),
            lyapunov_exponent: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(with = "hengrc::bench::seed::wide")]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Name used for output files of a custom run.
    pub name: String,
    /// Custom experiments, compared when there are two or more.
    pub experiments: Vec<ExperimentSpec>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            suite: None,
            seed: hengrc::bench::DEFAULT_SUITE_SEED,
            trials: None,
            name: "experiment".into(),
            experiments: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot encode config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.generate.lorenz.steps, 10_000);
        assert_eq!(c.predict.theta, 0.3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[train]\nlamda = 1.0\n").is_err());
        assert!(RunConfig::parse("[generate.ks.params]\nL = 22\n").is_err());
        assert!(RunConfig::parse("[colour]\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::parse(
            "[train.model]\nkind = \"esn\"\n[train.model.esn]\nn_nodes = 28\n[train.readout]\nlambda = 1e-4\n",
        )
        .unwrap();
        c.bench.suite = Some(Suite::Table2);
        let back = RunConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back.train.model, c.train.model);
        assert_eq!(back.train.readout, c.train.readout);
        assert_eq!(back.bench.suite, Some(Suite::Table2));
    }
}
