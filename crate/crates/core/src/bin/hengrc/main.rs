mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hengrc::bench::{
    compare_suite, curves_csv, derive_seed, experiment_json, experiment_lyapunov, report_json, run_experiment_with,
    run_suite, suite_table_csv, trials_csv, Comparison, ExperimentReport, ModelSpec, Suite, SuiteOptions, SystemSpec,
};
use hengrc::dynsys::LyapunovEstimate;
use hengrc::features::{plan_features, FeatureConfig, FeatureFamily, HengVariant, NeighborWrap};
use hengrc::io::{load_series, write_ccts, write_csv, write_curve_csv, SeriesFormat};
use hengrc::metrics::{difference_field, normalized_error_padded, valid_time_from_curve};
use hengrc::readout::{
    esn_train, inspect, load_model, predict_closed_loop, train, write_model, EsnConfig, TargetMode,
};
use hengrc::{Error, Result, TimeSeries};

use config::RunConfig;
use output::{record_input, FileRecord, Staged};

#[derive(Parser)]
#[command(name = "hengrc", version, about = "Reservoir-computing forecasts of chaotic systems")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory that receives every output file.
    #[arg(long, global = true, env = "HENGRC_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a test system and write its trajectory.
    Generate {
        #[command(subcommand)]
        system: GenerateCmd,
    },
    /// Fit a readout on a trajectory and write a model snapshot.
    Train(TrainArgs),
    /// Run a model closed-loop from a warmup trajectory.
    Predict(PredictArgs),
    /// Run a reproduction suite or the experiments in the config file.
    Bench(BenchArgs),
    /// Work with saved models.
    Model {
        #[command(subcommand)]
        action: ModelCmd,
    },
}

#[derive(Subcommand)]
enum GenerateCmd {
    /// Lorenz system, RK4 at fixed step.
    Lorenz(LorenzArgs),
    /// Kuramoto-Sivashinsky equation on a periodic grid.
    Ks(KsArgs),
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Print a summary of a model snapshot.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct SeriesOut {
    /// Output file, relative to the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File format; taken from the output extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Ccts,
    Csv,
}

impl From<FormatArg> for SeriesFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ccts => SeriesFormat::Ccts,
            FormatArg::Csv => SeriesFormat::Csv,
        }
    }
}

#[derive(Args)]
struct LorenzArgs {
    /// Steps after the transient; the file holds one more state.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Half-width of the seeded perturbation of the initial state.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    transient: Option<usize>,
    #[command(flatten)]
    out: SeriesOut,
}

#[derive(Args)]
struct KsArgs {
    /// Domain length.
    #[arg(long = "L")]
    domain_length: Option<f64>,
    /// Grid points.
    #[arg(long = "Q")]
    grid_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    transient: Option<usize>,
    #[command(flatten)]
    out: SeriesOut,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    HengRc,
    NgRc,
    Esn,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    NextState,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    FirstDimOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum WrapArg {
    Periodic,
    Clamped,
}

#[derive(Args)]
struct TrainArgs {
    /// Training trajectory (.ccts or .csv).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Snapshot file, relative to the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Delay blocks.
    #[arg(long)]
    k: Option<usize>,
    /// Delay of the first neighbour-product block.
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    wrap: Option<WrapArg>,
    /// Add a constant feature.
    #[arg(long)]
    constant: Option<bool>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    spectral_radius: Option<f64>,
    #[arg(long)]
    leak_rate: Option<f64>,
    #[arg(long)]
    input_scale: Option<f64>,
    #[arg(long)]
    bias_scale: Option<f64>,
    #[arg(long)]
    degree: Option<f64>,
    #[arg(long)]
    washout: Option<usize>,
    /// Reservoir root seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// z-score inputs with statistics of the training data.
    #[arg(long)]
    normalize: Option<bool>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Trajectory ending where the forecast starts.
    #[arg(long)]
    warmup: Option<PathBuf>,
    /// Use only the last this-many warmup states.
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// True continuation to score against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    /// Largest Lyapunov exponent, for valid times in Lyapunov units.
    #[arg(long)]
    lyapunov: Option<f64>,
    #[command(flatten)]
    out: SeriesOut,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Table1,
    Fig23,
    Ks,
    Table2,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Table1 => Suite::Table1,
            SuiteArg::Fig23 => Suite::Fig23,
            SuiteArg::Ks => Suite::Ks,
            SuiteArg::Table2 => Suite::Table2,
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    /// The merged configuration; feeding it back with `--config` reruns the command.
    config_toml: String,
    seeds: serde_json::Value,
    inputs: Vec<FileRecord>,
    artifacts: Vec<FileRecord>,
}

struct Ctx {
    cfg: RunConfig,
    out_dir: PathBuf,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    /// Stages the manifest next to `primary` and writes everything.
    fn finish(&self, command: &str, mut staged: Staged, primary: &Path, seeds: serde_json::Value, inputs: Vec<FileRecord>) -> Result<()> {
        let stem = primary.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let manifest_path = primary.with_file_name(format!("{stem}.manifest.json"));
        let manifest = Manifest {
            tool: "hengrc",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_toml: self.cfg.to_toml()?,
            seeds,
            inputs,
            artifacts: staged.records(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        staged.add(manifest_path, text.into_bytes());
        let written: Vec<String> = staged.paths().map(|p| p.display().to_string()).collect();
        staged.commit()?;
        for p in written {
            println!("wrote {p}");
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Model {
        action: ModelCmd::Inspect { path },
    } = &cli.command
    {
        print!("{}", inspect(&load_model(path)?));
        return Ok(true);
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut cfg = cfg;
    cfg.output.dir = Some(out_dir.clone());
    let mut ctx = Ctx { cfg, out_dir };
    match cli.command {
        Command::Generate { system } => generate(&mut ctx, system).map(|_| true),
        Command::Train(a) => train_cmd(&mut ctx, a).map(|_| true),
        Command::Predict(a) => predict_cmd(&mut ctx, a).map(|_| true),
        Command::Bench(a) => bench_cmd(&mut ctx, a),
        Command::Model { .. } => unreachable!(),
    }
}

fn series_format(ctx: &Ctx, out: &SeriesOut, path: Option<&Path>) -> SeriesFormat {
    out.format
        .map(SeriesFormat::from)
        .or_else(|| path.filter(|p| p.extension().is_some()).map(SeriesFormat::from_path))
        .or(ctx.cfg.output.format)
        .unwrap_or(SeriesFormat::Ccts)
}

fn extension(format: SeriesFormat) -> &'static str {
    match format {
        SeriesFormat::Ccts => "ccts",
        SeriesFormat::Csv => "csv",
    }
}

fn encode_series(series: &TimeSeries, format: SeriesFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        SeriesFormat::Ccts => write_ccts(series, &mut buf)?,
        SeriesFormat::Csv => write_csv(series, &mut buf)?,
    }
    Ok(buf)
}

fn required(v: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    v.ok_or_else(|| Error::InvalidConfig(format!("{what} is required")))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    load_series(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn generate(ctx: &mut Ctx, cmd: GenerateCmd) -> Result<()> {
    let (name, system, steps, seed, out_args) = match cmd {
        GenerateCmd::Lorenz(a) => {
            let s = &mut ctx.cfg.generate.lorenz;
            set(&mut s.steps, a.steps);
            set(&mut s.seed, a.seed);
            set(&mut s.params.dt, a.dt);
            set(&mut s.params.sigma, a.sigma);
            set(&mut s.params.rho, a.rho);
            set(&mut s.params.beta, a.beta);
            set(&mut s.jitter, a.jitter);
            set(&mut s.transient_steps, a.transient);
            if a.out.out.is_some() {
                s.out = a.out.out.clone();
            }
            let system = SystemSpec::Lorenz {
                params: s.params,
                jitter: s.jitter,
                transient_steps: s.transient_steps,
            };
            ("lorenz", system, s.steps, s.seed, a.out)
        }
        GenerateCmd::Ks(a) => {
            let s = &mut ctx.cfg.generate.ks;
            set(&mut s.steps, a.steps);
            set(&mut s.seed, a.seed);
            set(&mut s.params.domain_length, a.domain_length);
            set(&mut s.params.grid_points, a.grid_points);
            set(&mut s.params.dt, a.dt);
            set(&mut s.params.transient_steps, a.transient);
            if a.out.out.is_some() {
                s.out = a.out.out.clone();
            }
            let system = SystemSpec::Ks { params: s.params.clone() };
            ("ks", system, s.steps, s.seed, a.out)
        }
    };
    system.validate()?;
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let configured = match name {
        "lorenz" => ctx.cfg.generate.lorenz.out.clone(),
        _ => ctx.cfg.generate.ks.out.clone(),
    };
    let format = series_format(ctx, &out_args, configured.as_deref());
    let rel = configured.unwrap_or_else(|| PathBuf::from(format!("{name}.{}", extension(format))));
    let data_seed = derive_seed(seed, "data", 0);
    let series = system.generate(steps, data_seed)?;
    let path = ctx.path(&rel);
    let mut staged = Staged::default();
    staged.add(path.clone(), encode_series(&series, format)?);
    eprintln!("{name}: {} x {} states, dt {}", series.dim(), series.len(), series.dt());
    ctx.finish(
        &format!("generate {name}"),
        staged,
        &path,
        json!({ "root": seed, "data": data_seed }),
        Vec::new(),
    )
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn merge_model(model: &mut ModelSpec, a: &TrainArgs) -> Result<()> {
    if let Some(f) = a.family {
        let same = match (&*model, f) {
            (ModelSpec::Esn { .. }, FamilyArg::Esn) => true,
            (ModelSpec::Features { features }, FamilyArg::HengRc) => features.family == FeatureFamily::HengRc,
            (ModelSpec::Features { features }, FamilyArg::NgRc) => features.family == FeatureFamily::NgRc,
            _ => false,
        };
        if !same {
            *model = match f {
                FamilyArg::HengRc => ModelSpec::features(FeatureConfig::heng_rc(1, 1)),
                FamilyArg::NgRc => ModelSpec::features(FeatureConfig::ng_rc(1, 1)),
                FamilyArg::Esn => ModelSpec::esn(EsnConfig::default()),
            };
        }
    }
    match model {
        ModelSpec::Features { features } => {
            let esn_flag = [
                a.nodes.map(|_| "--nodes"),
                a.spectral_radius.map(|_| "--spectral-radius"),
                a.leak_rate.map(|_| "--leak-rate"),
                a.input_scale.map(|_| "--input-scale"),
                a.bias_scale.map(|_| "--bias-scale"),
                a.degree.map(|_| "--degree"),
                a.washout.map(|_| "--washout"),
                a.seed.map(|_| "--seed"),
            ]
            .into_iter()
            .flatten()
            .next();
            if let Some(flag) = esn_flag {
                return Err(Error::InvalidConfig(format!("{flag} applies to esn models only")));
            }
            set(&mut features.k, a.k);
            set(&mut features.delay_offset, a.offset);
            set(&mut features.include_constant, a.constant);
            if let Some(v) = a.variant {
                features.heng_variant = match v {
                    VariantArg::Full => HengVariant::Full,
                    VariantArg::FirstDimOnly => HengVariant::FirstDimOnly,
                };
            }
            if let Some(w) = a.wrap {
                features.neighbor_wrap = match w {
                    WrapArg::Periodic => NeighborWrap::Periodic,
                    WrapArg::Clamped => NeighborWrap::Clamped,
                };
            }
        }
        ModelSpec::Esn { esn, washout } => {
            let feature_flag = [
                a.k.map(|_| "--k"),
                a.offset.map(|_| "--offset"),
                a.variant.map(|_| "--variant"),
                a.wrap.map(|_| "--wrap"),
                a.constant.map(|_| "--constant"),
            ]
            .into_iter()
            .flatten()
            .next();
            if let Some(flag) = feature_flag {
                return Err(Error::InvalidConfig(format!("{flag} applies to feature models only")));
            }
            set(&mut esn.n_nodes, a.nodes);
            set(&mut esn.spectral_radius, a.spectral_radius);
            set(&mut esn.leak_rate, a.leak_rate);
            set(&mut esn.input_scale, a.input_scale);
            set(&mut esn.bias_scale, a.bias_scale);
            set(&mut esn.connectivity_degree, a.degree);
            set(&mut esn.seed, a.seed);
            set(washout, a.washout);
        }
    }
    Ok(())
}

fn train_cmd(ctx: &mut Ctx, a: TrainArgs) -> Result<()> {
    let sec = &mut ctx.cfg.train;
    merge_model(&mut sec.model, &a)?;
    set(&mut sec.readout.lambda, a.lambda);
    set(&mut sec.readout.normalize, a.normalize);
    if let Some(t) = a.target {
        sec.readout.target_mode = match t {
            TargetArg::NextState => TargetMode::NextState,
            TargetArg::Delta => TargetMode::Delta,
        };
    }
    if a.input.is_some() {
        sec.input = a.input;
    }
    if a.out.is_some() {
        sec.out = a.out;
    }
    let input = required(sec.input.clone(), "--input")?;
    let series = read_series(&input)?;
    let (model, summary, seeds) = match &mut sec.model {
        ModelSpec::Features { features } => {
            // The map always follows the input dimension.
            features.q = series.dim();
            let map = plan_features(features)?;
            let (m, s) = train(&series, &map, &sec.readout)?;
            (m, s, json!({}))
        }
        ModelSpec::Esn { esn, washout } => {
            let mut c = esn.clone();
            c.seed = derive_seed(esn.seed, "reservoir", 0);
            let (m, s) = esn_train(&series, &c, &sec.readout, *washout)?;
            (m, s, json!({ "root": esn.seed, "reservoir": c.seed }))
        }
    };
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "trained on {} samples: {} states, fit rmse {:.3e}, normal-equation residual {:.1e}, {:.3}s",
        summary.n_samples,
        model.states(),
        summary.fit_rmse,
        summary.normal_eq_residual,
        summary.wall_clock_featurize + summary.wall_clock_train
    );
    let rel = sec.out.clone().unwrap_or_else(|| PathBuf::from("model.ccmd"));
    let path = ctx.path(&rel);
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes)?;
    let mut staged = Staged::default();
    staged.add(path.clone(), bytes);
    let inputs = vec![record_input(&input)?];
    ctx.finish("train", staged, &path, seeds, inputs)
}

#[derive(Serialize)]
struct ValidRow {
    threshold: f64,
    valid_steps: usize,
    valid_seconds: f64,
    valid_lyapunov_times: Option<f64>,
}

fn predict_cmd(ctx: &mut Ctx, a: PredictArgs) -> Result<()> {
    let sec = &mut ctx.cfg.predict;
    for (slot, v) in [(&mut sec.model, a.model), (&mut sec.warmup, a.warmup), (&mut sec.truth, a.truth)] {
        if v.is_some() {
            *slot = v;
        }
    }
    if a.out.out.is_some() {
        sec.out = a.out.out.clone();
    }
    if a.warmup_steps.is_some() {
        sec.warmup_steps = a.warmup_steps;
    }
    if a.lyapunov.is_some() {
        sec.lyapunov_exponent = a.lyapunov;
    }
    set(&mut sec.steps, a.steps);
    set(&mut sec.theta, a.theta);
    let sec = sec.clone();

    let model_path = required(sec.model.clone(), "--model")?;
    let warmup_path = required(sec.warmup.clone(), "--warmup")?;
    let model = load_model(&model_path)?;
    let mut warmup = read_series(&warmup_path)?;
    if let Some(n) = sec.warmup_steps {
        if n > warmup.len() {
            return Err(Error::SeriesTooShort {
                needed: n,
                available: warmup.len(),
            });
        }
        warmup = warmup.slice(warmup.len() - n, warmup.len())?;
    }
    let truth = sec.truth.as_deref().map(read_series).transpose()?;
    let mut inputs = vec![record_input(&model_path)?, record_input(&warmup_path)?];
    if let Some(p) = &sec.truth {
        inputs.push(record_input(p)?);
    }

    let forecast = predict_closed_loop(&model, &warmup, sec.steps)?;
    if let Some(step) = forecast.blow_up_step {
        eprintln!("warning: forecast blew up at step {step}; {} states kept", forecast.series.len());
    }
    let format = series_format(ctx, &a.out, sec.out.as_deref());
    let rel = sec
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("prediction.{}", extension(format))));
    let path = ctx.path(&rel);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("prediction").to_string();
    let mut staged = Staged::default();
    staged.add(path.clone(), encode_series(&forecast.series, format)?);

    if let Some(truth) = truth {
        if truth.len() < sec.steps {
            return Err(Error::SeriesTooShort {
                needed: sec.steps,
                available: truth.len(),
            });
        }
        let span = truth.slice(0, sec.steps)?;
        let curve = normalized_error_padded(&span, &forecast.series)?;
        let lyap = sec.lyapunov_exponent.map(|l| LyapunovEstimate::from_lambda(l, 0));
        let mut thresholds = vec![sec.theta];
        thresholds.extend(sec.theta_sweep.iter().filter(|t| **t != sec.theta));
        let mut rows = Vec::new();
        for theta in thresholds {
            let r = valid_time_from_curve(curve.clone(), span.dt(), theta, lyap.as_ref())?;
            eprintln!("theta {theta}: valid for {} steps ({} s)", r.valid_steps, r.valid_seconds);
            rows.push(ValidRow {
                threshold: theta,
                valid_steps: r.valid_steps,
                valid_seconds: r.valid_seconds,
                valid_lyapunov_times: r.valid_lyapunov_times,
            });
        }
        let mut curve_bytes = Vec::new();
        write_curve_csv("error", span.dt(), &curve, &mut curve_bytes)?;
        staged.add(path.with_file_name(format!("{stem}.error.csv")), curve_bytes);
        if !forecast.series.is_empty() {
            let diff = difference_field(&span.slice(0, forecast.series.len())?, &forecast.series)?;
            staged.add(
                path.with_file_name(format!("{stem}.diff.{}", extension(format))),
                encode_series(&diff, format)?,
            );
        }
        let text = serde_json::to_string_pretty(&json!({
            "blow_up_step": forecast.blow_up_step,
            "valid": rows,
        }))
        .map_err(|e| Error::Format(e.to_string()))?;
        staged.add(path.with_file_name(format!("{stem}.valid.json")), text.into_bytes());
    }
    ctx.finish("predict", staged, &path, json!({}), inputs)
}

#[derive(Serialize)]
struct CustomReport<'a> {
    experiments: &'a [ExperimentReport],
    comparison: Option<&'a Comparison>,
}

fn bench_cmd(ctx: &mut Ctx, a: BenchArgs) -> Result<bool> {
    let sec = &mut ctx.cfg.bench;
    if let Some(s) = a.suite {
        sec.suite = Some(s.into());
    }
    set(&mut sec.seed, a.seed);
    if a.trials.is_some() {
        sec.trials = a.trials;
    }
    let sec = sec.clone();
    let mut staged = Staged::default();
    let dir = ctx.out_dir.clone();

    if let Some(suite) = sec.suite {
        if !sec.experiments.is_empty() {
            return Err(Error::InvalidConfig("give either a suite or custom experiments, not both".into()));
        }
        let opts = SuiteOptions {
            seed: sec.seed,
            trials: sec.trials,
        };
        let report = run_suite(suite, &opts)?;
        let p = suite.name();
        let table = dir.join(format!("{p}_table.csv"));
        staged.add(table.clone(), suite_table_csv(&report).into_bytes());
        staged.add(dir.join(format!("{p}_trials.csv")), trials_csv(&report.experiments).into_bytes());
        staged.add(dir.join(format!("{p}_curves.csv")), curves_csv(&report.experiments).into_bytes());
        if !report.comparisons.is_empty() {
            let csv: String = report.comparisons.iter().map(|c| c.to_csv()).collect::<Vec<_>>().join("\n");
            staged.add(dir.join(format!("{p}_comparison.csv")), csv.into_bytes());
        }
        staged.add(dir.join(format!("{p}_report.json")), report_json(&report)?.into_bytes());
        for c in &report.checks {
            let tag = match (c.passed, c.gated) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "MISS",
            };
            println!("{tag} {}: {} ({})", c.id, c.description, c.detail);
        }
        for n in &report.notes {
            println!("note: {n}");
        }
        ctx.finish(
            &format!("bench --suite {p}"),
            staged,
            &table,
            json!({ "root": sec.seed }),
            Vec::new(),
        )?;
        return Ok(report.passed());
    }

    if sec.experiments.is_empty() {
        return Err(Error::InvalidConfig(
            "bench needs --suite or [[bench.experiments]] in the config".into(),
        ));
    }
    let mut specs = sec.experiments.clone();
    for s in &mut specs {
        if a.seed.is_some() {
            s.seed = sec.seed;
        }
        if let Some(t) = sec.trials {
            s.n_trials = t;
        }
    }
    let mut cache: Vec<(SystemSpec, Option<LyapunovEstimate>)> = Vec::new();
    let mut reports = Vec::new();
    for s in &specs {
        let lyap = match cache.iter().find(|(sys, _)| *sys == s.system) {
            Some((_, l)) => *l,
            None => {
                let l = experiment_lyapunov(s)?;
                cache.push((s.system.clone(), l));
                l
            }
        };
        let r = run_experiment_with(s, lyap)?;
        println!(
            "{}: {} states, median {} steps at theta {}, {} failed, {} blown up",
            s.name, r.states, r.median_steps(), s.theta, r.n_failed, r.n_blown_up
        );
        reports.push(r);
    }
    let comparison = if reports.len() >= 2 { Some(compare_suite(&reports)?) } else { None };
    let p = &sec.name;
    let trials = dir.join(format!("{p}_trials.csv"));
    staged.add(trials.clone(), trials_csv(&reports).into_bytes());
    staged.add(dir.join(format!("{p}_curves.csv")), curves_csv(&reports).into_bytes());
    if let Some(c) = &comparison {
        staged.add(dir.join(format!("{p}_comparison.csv")), c.to_csv().into_bytes());
    }
    let json = if reports.len() == 1 && comparison.is_none() {
        experiment_json(&reports[0])?
    } else {
        serde_json::to_string_pretty(&CustomReport {
            experiments: &reports,
            comparison: comparison.as_ref(),
        })
        .map_err(|e| Error::Format(e.to_string()))?
    };
    staged.add(dir.join(format!("{p}_report.json")), json.into_bytes());
    let seeds: Vec<u64> = specs.iter().map(|s| s.seed).collect();
    ctx.finish("bench", staged, &trials, json!({ "roots": seeds }), Vec::new())?;
    Ok(true)
}
