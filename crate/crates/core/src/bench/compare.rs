use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, SystemSpec};
use crate::error::{Error, Result};

/// One model's line in a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub family: String,
    pub states: usize,
    pub lambda: f64,
    pub time_cost_train: f64,
    pub time_cost_featurize: f64,
    pub time_cost_solve: f64,
    pub time_cost_total: f64,
    pub n_failed: usize,
    pub n_blown_up: usize,
    /// Median valid steps per threshold, in [`Comparison::thresholds`] order.
    pub median_steps: Vec<f64>,
    pub median_lyapunov_times: Vec<Option<f64>>,
}

/// Row `numerator` measured against row `denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub numerator: String,
    pub denominator: String,
    pub train_time_ratio: f64,
    /// Median valid-step ratio per threshold.
    pub valid_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub system: SystemSpec,
    pub seed: u64,
    pub training_steps: usize,
    pub prediction_steps: usize,
    pub n_trials: usize,
    pub thresholds: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
    /// Every ordered pair `i < j` as row i over row j.
    pub ratios: Vec<PairRatio>,
}

impl Comparison {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn ratio(&self, numerator: &str, denominator: &str) -> Option<&PairRatio> {
        self.ratios
            .iter()
            .find(|r| r.numerator == numerator && r.denominator == denominator)
    }

    /// Rows as CSV, one median column per threshold.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,family,states,lambda,time_train_s,time_featurize_s,time_solve_s,time_total_s,failed,blown_up");
        for t in &self.thresholds {
            out.push_str(&format!(",median_steps_theta_{t},median_lyapunov_theta_{t}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:e},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.name,
                r.family,
                r.states,
                r.lambda,
                r.time_cost_train,
                r.time_cost_featurize,
                r.time_cost_solve,
                r.time_cost_total,
                r.n_failed,
                r.n_blown_up
            ));
            for (s, l) in r.median_steps.iter().zip(&r.median_lyapunov_times) {
                out.push_str(&format!(",{s},{}", l.map(|v| format!("{v:.4}")).unwrap_or_default()));
            }
            out.push('\n');
        }
        out
    }
}

/// Tabulates reports that ran on the same data: same system, root seed,
/// split and trial count. Names must be distinct.
pub fn compare_suite(reports: &[ExperimentReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::IncompatibleSpecs(format!(
            "a comparison needs at least two reports, got {}",
            reports.len()
        )));
    }
    let base = &reports[0].spec;
    let thresholds = base.thresholds();
    for r in &reports[1..] {
        let s = &r.spec;
        let why = if s.system != base.system {
            Some("systems differ")
        } else if s.seed != base.seed {
            Some("root seeds differ")
        } else if s.training_steps != base.training_steps || s.prediction_steps != base.prediction_steps {
            Some("train/test splits differ")
        } else if s.n_trials != base.n_trials {
            Some("trial counts differ")
        } else if s.thresholds() != thresholds {
            Some("thresholds differ")
        } else {
            None
        };
        if let Some(why) = why {
            return Err(Error::IncompatibleSpecs(format!("'{}' vs '{}': {why}", base.name, s.name)));
        }
    }
    for (i, r) in reports.iter().enumerate() {
        if reports[..i].iter().any(|o| o.spec.name == r.spec.name) {
            return Err(Error::IncompatibleSpecs(format!("duplicate name '{}'", r.spec.name)));
        }
    }

    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            name: r.spec.name.clone(),
            family: r.family.clone(),
            states: r.states,
            lambda: r.spec.train.lambda,
            time_cost_train: r.time_cost_train,
            time_cost_featurize: r.time_cost_featurize,
            time_cost_solve: r.time_cost_solve,
            time_cost_total: r.time_cost_total,
            n_failed: r.n_failed,
            n_blown_up: r.n_blown_up,
            median_steps: r.summary.iter().map(|s| s.median_steps).collect(),
            median_lyapunov_times: r.summary.iter().map(|s| s.median_lyapunov_times).collect(),
        })
        .collect();

    let mut ratios = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i], &rows[j]);
            ratios.push(PairRatio {
                numerator: a.name.clone(),
                denominator: b.name.clone(),
                train_time_ratio: a.time_cost_train / b.time_cost_train,
                valid_ratio: a.median_steps.iter().zip(&b.median_steps).map(|(x, y)| x / y).collect(),
            });
        }
    }

    Ok(Comparison {
        system: base.system.clone(),
        seed: base.seed,
        training_steps: base.training_steps,
        prediction_steps: base.prediction_steps,
        n_trials: base.n_trials,
        thresholds,
        rows,
        ratios,
    })
}
