use std::fmt::Write as _;

use super::experiment::{ExperimentReport, SystemSpec};
use super::suites::SuiteReport;
use crate::error::{Error, Result};

fn system_label(s: &SystemSpec) -> String {
    match s {
        SystemSpec::Lorenz { .. } => "lorenz".into(),
        SystemSpec::Ks { params } => format!("ks_l{}_q{}", params.domain_length, params.grid_points),
        SystemSpec::Constant { .. } => "constant".into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One row per trial and threshold, then one `summary` row per experiment
/// and threshold.
pub fn trials_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(
        "experiment,row,trial,data_seed,status,threshold,valid_steps,valid_seconds,valid_lyapunov_times,\
         min_steps,max_steps,time_featurize_s,time_solve_s,time_predict_s,fit_rmse,blow_up_step\n",
    );
    for r in reports {
        for t in &r.trials {
            let status = serde_json::to_value(t.status).ok().and_then(|v| v.as_str().map(String::from));
            for v in &t.valid {
                let _ = writeln!(
                    out,
                    "{},trial,{},{},{},{},{},{},{},,,{},{},{},{},{}",
                    r.spec.name,
                    t.trial,
                    t.data_seed,
                    status.as_deref().unwrap_or(""),
                    v.threshold,
                    v.valid_steps,
                    v.valid_seconds,
                    opt(v.valid_lyapunov_times),
                    opt(t.train.as_ref().map(|s| s.wall_clock_featurize)),
                    opt(t.train.as_ref().map(|s| s.wall_clock_train)),
                    t.predict_seconds,
                    opt(t.train.as_ref().map(|s| s.fit_rmse)),
                    t.blow_up_step.map(|s| s.to_string()).unwrap_or_default()
                );
            }
        }
        for s in &r.summary {
            let _ = writeln!(
                out,
                "{},summary,,,,{},{},{},{},{},{},{},{},,,",
                r.spec.name,
                s.threshold,
                s.median_steps,
                s.median_seconds,
                opt(s.median_lyapunov_times),
                s.min_steps,
                s.max_steps,
                r.time_cost_featurize,
                r.time_cost_solve
            );
        }
    }
    out
}

/// Suite table: one row per experiment with states, costs and the primary
/// median, plus the published state total where the suite has one.
pub fn suite_table_csv(report: &SuiteReport) -> String {
    let mut out = String::from(
        "experiment,family,system,states,published_states,lambda,training_steps,n_trials,time_train_s,\
         time_total_s,median_steps,median_lyapunov_times,failed,blown_up\n",
    );
    for e in &report.experiments {
        let published = report
            .counts
            .iter()
            .find(|c| c.name == e.spec.name)
            .and_then(|c| c.published_total);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{},{},{:.6},{:.6},{},{},{},{}",
            e.spec.name,
            e.family,
            system_label(&e.spec.system),
            e.states,
            published.map(|p| p.to_string()).unwrap_or_default(),
            e.spec.train.lambda,
            e.spec.training_steps,
            e.spec.n_trials,
            e.time_cost_train,
            e.time_cost_total,
            e.summary[0].median_steps,
            opt(e.summary[0].median_lyapunov_times),
            e.n_failed,
            e.n_blown_up
        );
    }
    out
}

/// Normalized error per predicted step: `experiment,trial,step,error`.
/// Steps past a blow-up are written as `inf`.
pub fn curves_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("experiment,trial,step,error\n");
    for r in reports {
        for t in &r.trials {
            for (step, e) in t.error_curve.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", r.spec.name, t.trial, step, e);
            }
        }
    }
    out
}

pub fn report_json(report: &SuiteReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::format(format!("cannot encode report: {e}")))
}

pub fn experiment_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::format(format!("cannot encode report: {e}")))
}
