//! Reproduction suites. Hyperparameters below were picked on a separate
//! validation seed (1000) by the same grid procedure for every model family
//! and then frozen; the reporting seed never fed back into them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::compare::{compare_suite, Comparison};
use super::experiment::{experiment_lyapunov, run_experiment_with, ExperimentReport, ExperimentSpec, ModelSpec, SystemSpec};
use crate::dynsys::LyapunovEstimate;
use crate::error::{Error, Result};
use crate::features::{plan_features, FeatureConfig, HengVariant};
use crate::readout::{EsnConfig, TargetMode, TrainConfig};

pub const DEFAULT_SUITE_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// 12-state HENG-RC against a 28-node ESN at three training lengths.
    Table1,
    /// HENG-RC against NG-RC on Lorenz at 400 and 800 training steps.
    Fig23,
    /// Kuramoto-Sivashinsky forecasts at L = 22 and L = 200.
    Ks,
    /// State counts and training cost on KS.
    Table2,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Table1, Suite::Fig23, Suite::Ks, Suite::Table2];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Table1 => "table1",
            Suite::Fig23 => "fig23",
            Suite::Ks => "ks",
            Suite::Table2 => "table2",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config(format!("unknown suite '{s}' (expected table1, fig23, ks or table2)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Replaces every experiment's trial count.
    pub trials: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SUITE_SEED,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub passed: bool,
    /// Ungated checks are reported but never fail the suite.
    pub gated: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &str, description: &str, passed: bool, gated: bool, detail: String) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            passed,
            gated,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub name: String,
    pub q: usize,
    pub k: usize,
    pub linear: usize,
    pub nonlinear: usize,
    pub total: usize,
    /// Total printed in the published table, when there is one.
    pub published_total: Option<usize>,
}

impl CountRow {
    pub fn gap(&self) -> Option<i64> {
        self.published_total.map(|p| p as i64 - self.total as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub experiments: Vec<ExperimentReport>,
    pub comparisons: Vec<Comparison>,
    pub counts: Vec<CountRow>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    /// True when every gated check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.gated)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.spec.name == name)
    }
}

/// Reservoir used as the traditional RC baseline.
pub fn baseline_esn(n_nodes: usize) -> EsnConfig {
    EsnConfig {
        leak_rate: 0.6,
        spectral_radius: 0.2,
        input_scale: 0.1,
        bias_scale: 1.0,
        ..EsnConfig::with_nodes(n_nodes)
    }
}

/// HENG-RC map used for KS at any domain size.
pub fn ks_heng(q: usize) -> FeatureConfig {
    FeatureConfig::heng_rc(q, 2).with_offset(0)
}

fn spec(
    name: &str,
    system: SystemSpec,
    model: ModelSpec,
    train: TrainConfig,
    training_steps: usize,
    prediction_steps: usize,
    n_trials: usize,
    opts: &SuiteOptions,
) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(name, system, model, train);
    s.training_steps = training_steps;
    s.prediction_steps = prediction_steps;
    s.n_trials = opts.trials.unwrap_or(n_trials);
    s.seed = opts.seed;
    s
}

fn delta(lambda: f64) -> TrainConfig {
    TrainConfig::new(lambda, TargetMode::Delta)
}

fn next(lambda: f64) -> TrainConfig {
    TrainConfig::new(lambda, TargetMode::NextState)
}

const LORENZ_HORIZON: usize = 3000;

/// Experiment specs of a suite, grouped so that each group shares data.
pub fn suite_specs(suite: Suite, opts: &SuiteOptions) -> Vec<Vec<ExperimentSpec>> {
    let lorenz = SystemSpec::lorenz;
    match suite {
        Suite::Fig23 => [(400, 1e-5, 1e-2), (800, 3e-5, 3e-4)]
            .into_iter()
            .map(|(steps, heng_lambda, ng_lambda)| {
                vec![
                    spec(
                        &format!("heng_rc_{steps}"),
                        lorenz(),
                        ModelSpec::features(FeatureConfig::heng_rc(3, 1).with_offset(0)),
                        delta(heng_lambda),
                        steps,
                        LORENZ_HORIZON,
                        10,
                        opts,
                    ),
                    spec(
                        &format!("ng_rc_{steps}"),
                        lorenz(),
                        ModelSpec::features(FeatureConfig::ng_rc(3, 1)),
                        delta(ng_lambda),
                        steps,
                        LORENZ_HORIZON,
                        10,
                        opts,
                    ),
                ]
            })
            .collect(),
        Suite::Table1 => {
            let heng12 = FeatureConfig::heng_rc(3, 1)
                .with_offset(0)
                .with_variant(HengVariant::FirstDimOnly);
            [
                (200, next(5e-3), next(1e-11)),
                (400, next(5e-3), delta(1e-12)),
                (800, delta(5e-4), delta(1e-11)),
            ]
            .into_iter()
            .map(|(steps, heng_train, esn_train)| {
                vec![
                    spec(
                        &format!("heng_rc12_{steps}"),
                        lorenz(),
                        ModelSpec::features(heng12),
                        heng_train,
                        steps,
                        LORENZ_HORIZON,
                        10,
                        opts,
                    ),
                    spec(
                        &format!("esn28_{steps}"),
                        lorenz(),
                        ModelSpec::esn(baseline_esn(28)),
                        esn_train.normalized(true),
                        steps,
                        LORENZ_HORIZON,
                        10,
                        opts,
                    ),
                ]
            })
            .collect()
        }
        Suite::Ks => vec![
            vec![spec(
                "heng_rc_l22",
                SystemSpec::ks(22.0, 64),
                ModelSpec::features(ks_heng(64)),
                next(1e-3),
                20_000,
                1000,
                5,
                opts,
            )],
            vec![spec(
                "heng_rc_l200",
                SystemSpec::ks(200.0, 256),
                ModelSpec::features(ks_heng(256)),
                next(1e-3),
                20_000,
                600,
                3,
                opts,
            )],
        ],
        Suite::Table2 => {
            let timing = |name: &str, system: SystemSpec, model: ModelSpec, train: TrainConfig| {
                spec(name, system, model, train, TABLE2_TRAINING_STEPS, 200, 1, opts)
            };
            vec![
                vec![
                    timing(
                        "ng_rc_l22",
                        SystemSpec::ks(22.0, 64),
                        ModelSpec::features(FeatureConfig::ng_rc(64, 1)),
                        next(1e-3),
                    ),
                    timing("heng_rc_l22", SystemSpec::ks(22.0, 64), ModelSpec::features(ks_heng(64)), next(1e-3)),
                    timing(
                        "esn3968_l22",
                        SystemSpec::ks(22.0, 64),
                        ModelSpec::esn(baseline_esn(3968)),
                        next(1e-6).normalized(true),
                    ),
                ],
                vec![timing(
                    "heng_rc_l200",
                    SystemSpec::ks(200.0, 256),
                    ModelSpec::features(ks_heng(256)),
                    next(1e-3),
                )],
                vec![timing(
                    "heng_rc_l400",
                    SystemSpec::ks(400.0, 512),
                    ModelSpec::features(ks_heng(512)),
                    next(1e-3),
                )],
            ]
        }
    }
}

/// Training length of the Table 2 timing runs.
pub const TABLE2_TRAINING_STEPS: usize = 10_000;

/// Exact feature counts next to the published totals.
pub fn state_counts() -> Result<Vec<CountRow>> {
    let row = |name: &str, cfg: FeatureConfig, published: Option<usize>| -> Result<CountRow> {
        let m = plan_features(&cfg)?;
        Ok(CountRow {
            name: name.into(),
            q: cfg.q,
            k: cfg.k,
            linear: m.dim_linear,
            nonlinear: m.dim_nonlinear,
            total: m.total_dim,
            published_total: published,
        })
    };
    Ok(vec![
        row("ng_rc_l22", FeatureConfig::ng_rc(64, 1), Some(8384))?,
        row("heng_rc_l22", ks_heng(64), Some(904))?,
        row("heng_rc_l200", ks_heng(256), Some(3592))?,
        row("heng_rc_l400", ks_heng(512), Some(7176))?,
    ])
}

/// Runs a suite. The Lyapunov exponent is estimated once per distinct system.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    let groups = suite_specs(suite, opts);
    let mut cache: Vec<(SystemSpec, Option<LyapunovEstimate>)> = Vec::new();
    let mut experiments = Vec::new();
    let mut comparisons = Vec::new();
    for group in &groups {
        let mut reports = Vec::new();
        for s in group {
            let lyap = match cache.iter().find(|(sys, _)| *sys == s.system) {
                Some((_, l)) => *l,
                None => {
                    let l = experiment_lyapunov(s)?;
                    cache.push((s.system.clone(), l));
                    l
                }
            };
            reports.push(run_experiment_with(s, lyap)?);
        }
        if reports.len() >= 2 {
            comparisons.push(compare_suite(&reports)?);
        }
        experiments.extend(reports);
    }
    let mut report = SuiteReport {
        suite,
        seed: opts.seed,
        experiments,
        comparisons,
        counts: Vec::new(),
        checks: Vec::new(),
        notes: Vec::new(),
    };
    match suite {
        Suite::Fig23 => fig23_checks(&mut report),
        Suite::Table1 => table1_checks(&mut report),
        Suite::Ks => ks_checks(&mut report),
        Suite::Table2 => table2_checks(&mut report)?,
    }
    Ok(report)
}

fn median_of(report: &SuiteReport, name: &str) -> f64 {
    report.experiment(name).map(|e| e.median_steps()).unwrap_or(f64::NAN)
}

fn fig23_checks(r: &mut SuiteReport) {
    let h4 = median_of(r, "heng_rc_400");
    let n4 = median_of(r, "ng_rc_400");
    let h8 = median_of(r, "heng_rc_800");
    let n8 = median_of(r, "ng_rc_800");
    let checks = vec![
        Check::new(
            "fig23.ratio_400",
            "HENG-RC median >= 0.9 x NG-RC median at 400 training steps",
            h4 >= 0.9 * n4,
            true,
            format!("HENG-RC {h4}, NG-RC {n4}, ratio {:.3}", h4 / n4),
        ),
        Check::new(
            "fig23.heng_500",
            "HENG-RC median >= 500 steps at 400 training steps",
            h4 >= 500.0,
            true,
            format!("{h4}"),
        ),
        Check::new(
            "fig23.heng_grows",
            "HENG-RC median increases from 400 to 800 training steps",
            h8 > h4,
            true,
            format!("{h4} -> {h8}"),
        ),
        Check::new(
            "fig23.ng_grows",
            "NG-RC median increases from 400 to 800 training steps",
            n8 > n4,
            true,
            format!("{n4} -> {n8}"),
        ),
    ];
    r.checks.extend(checks);
}

fn table1_checks(r: &mut SuiteReport) {
    for steps in [200, 400, 800] {
        let (h, e) = match (r.experiment(&format!("heng_rc12_{steps}")), r.experiment(&format!("esn28_{steps}"))) {
            (Some(h), Some(e)) => (h, e),
            _ => continue,
        };
        let mut wins = 0;
        let mut detail = Vec::new();
        for (hs, es) in h.summary.iter().zip(&e.summary) {
            if hs.median_steps >= es.median_steps {
                wins += 1;
            }
            detail.push(format!("theta {}: {} vs {}", hs.threshold, hs.median_steps, es.median_steps));
        }
        let check = Check::new(
            &format!("table1.order_{steps}"),
            "12-state HENG-RC median >= ESN(28) median at >= 2 of 3 thresholds",
            wins >= 2,
            true,
            detail.join("; "),
        );
        r.checks.push(check);
    }
}

fn ks_checks(r: &mut SuiteReport) {
    let lt = |r: &SuiteReport, name: &str| {
        r.experiment(name)
            .and_then(|e| e.summary[0].median_lyapunov_times)
            .unwrap_or(f64::NAN)
    };
    let l22 = lt(r, "heng_rc_l22");
    let l200 = lt(r, "heng_rc_l200");
    r.checks.push(Check::new(
        "ks.l22_four",
        "L=22 HENG-RC median valid time >= 4 Lyapunov times",
        l22 >= 4.0,
        true,
        format!("{l22:.3} Lyapunov times"),
    ));
    r.checks.push(Check::new(
        "ks.l200_one",
        "L=200 (Q=256) HENG-RC trains and is valid for >= 1 Lyapunov time",
        l200 >= 1.0,
        true,
        format!("{l200:.3} Lyapunov times"),
    ));
    r.checks.push(Check::new(
        "ks.l200_four",
        "L=200 stretch target of 4 Lyapunov times (reported, not gated)",
        l200 >= 4.0,
        false,
        format!("{l200:.3} Lyapunov times"),
    ));
}

fn table2_checks(r: &mut SuiteReport) -> Result<()> {
    r.counts = state_counts()?;
    let ng = &r.counts[0];
    r.checks.push(Check::new(
        "table2.ng_rc_count",
        "NG-RC Q=64 k=1 has 8384 features",
        ng.total == 8384,
        true,
        format!("{} linear + {} quadratic = {}", ng.linear, ng.nonlinear, ng.total),
    ));
    let heng_ok = r.counts[1..].iter().all(|c| c.nonlinear == 6 * c.q * c.k);
    let detail: Vec<String> = r.counts[1..]
        .iter()
        .map(|c| format!("Q={} nonlinear {} (6Qk = {})", c.q, c.nonlinear, 6 * c.q * c.k))
        .collect();
    r.checks.push(Check::new(
        "table2.heng_counts",
        "HENG-RC nonlinear counts equal 6Qk",
        heng_ok,
        true,
        detail.join("; "),
    ));
    for c in &r.counts[1..] {
        if let Some(gap) = c.gap().filter(|g| *g != 0) {
            r.notes.push(format!(
                "{}: our total is {} ({} nonlinear + {} linear) against a published {} (gap {gap:+}); \
                 no choice of delays or constant term accounts for the difference",
                c.name,
                c.total,
                c.nonlinear,
                c.linear,
                c.published_total.unwrap_or_default()
            ));
        }
    }
    r.notes.push(
        "Parallel RC (L=200, Q=512, 320000 states) is a cited external baseline and is not run".into(),
    );
    let ng_t = r.experiment("ng_rc_l22").map(|e| e.time_cost_train).unwrap_or(f64::NAN);
    let he_t = r.experiment("heng_rc_l22").map(|e| e.time_cost_train).unwrap_or(f64::NAN);
    r.checks.push(Check::new(
        "table2.efficiency",
        "on identical L=22 data HENG-RC training takes <= 1/5 of NG-RC's",
        he_t * 5.0 <= ng_t,
        true,
        format!("NG-RC {ng_t:.3}s, HENG-RC {he_t:.3}s, ratio {:.1}x", ng_t / he_t),
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("table3".parse::<Suite>().is_err());
    }

    #[test]
    fn specs_are_valid_and_paired() {
        let opts = SuiteOptions::default();
        for s in Suite::ALL {
            for group in suite_specs(s, &opts) {
                for spec in &group {
                    spec.validate().unwrap();
                    assert_eq!(spec.seed, opts.seed);
                    assert_eq!(spec.system, group[0].system);
                    assert_eq!(spec.training_steps, group[0].training_steps);
                }
            }
        }
    }

    #[test]
    fn trial_override_applies() {
        let opts = SuiteOptions { seed: 5, trials: Some(2) };
        assert!(suite_specs(Suite::Fig23, &opts).iter().flatten().all(|s| s.n_trials == 2 && s.seed == 5));
    }

    #[test]
    fn counts_match_count_laws() {
        let rows = state_counts().unwrap();
        assert_eq!(rows[0].total, 8384);
        let nl: Vec<usize> = rows[1..].iter().map(|r| r.nonlinear).collect();
        assert_eq!(nl, vec![768, 3072, 6144]);
        assert!(rows[1..].iter().all(|r| r.gap().unwrap() != 0));
    }
}
