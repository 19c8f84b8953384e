//! `tweezer`: simulate and analyze fluorescence state readout.

mod config;
mod output;
mod plot;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tweezer_core::{
    error_budget, run_pair, sweep_depths, threshold_scan, AnalysisError, BudgetRow, ConfigError,
    DiscriminationReport, ExperimentConfig, LossSummary, PreparedState, ReadoutModel, SweepError,
};

use output::{Format, Manifest, OutDir};
use plot::{Chart, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("insufficient data: {0}")]
    NoData(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Input(_) => 2,
            CliError::NoData(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(config::describe(&e))
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::NoData(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        fn innermost(e: &SweepError) -> &SweepError {
            match e {
                SweepError::Point { source, .. } => innermost(source),
                other => other,
            }
        }
        let msg = match (&e, innermost(&e)) {
            (SweepError::Point { index, .. }, SweepError::Config(c)) => {
                format!("sweep point {index}: {}", config::describe(c))
            }
            _ => e.to_string(),
        };
        match innermost(&e) {
            SweepError::Analysis(_) => CliError::NoData(msg),
            _ => CliError::Input(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "tweezer", version, about = "Monte Carlo and threshold analysis of single-atom fluorescence readout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults to the calibrated reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override `experiment.trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Override `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate both prepared states and analyze the histograms.
    Run(ConfigArgs),
    /// Classification error versus threshold for a histogram CSV.
    ScanThreshold {
        /// Histogram CSV as written by `run`.
        histogram: PathBuf,
    },
    /// Simulate a series of trap depths.
    Sweep(ConfigArgs),
    /// Analytic error budget of the configured setting.
    Budget(ConfigArgs),
}

struct Loaded {
    file: config::ConfigFile,
    experiment: ExperimentConfig,
}

impl ConfigArgs {
    fn load(&self) -> Result<Loaded, CliError> {
        let file = config::load(self.config.as_deref())?;
        let mut experiment = file.experiment();
        if let Some(t) = self.trials {
            experiment.trials = t;
        }
        if let Some(s) = self.seed {
            experiment.seed = s;
        }
        Ok(Loaded { file, experiment })
    }
}

#[derive(Serialize)]
struct LossReport {
    dark: LossSummary,
    bright: LossSummary,
}

#[derive(Serialize)]
struct RunReport<'a> {
    #[serde(flatten)]
    report: &'a DiscriminationReport,
    losses: LossReport,
    manifest: &'a Manifest,
}

fn cmd_run(args: &ConfigArgs, cli: &Cli, out: &mut OutDir) -> Result<Manifest, CliError> {
    let Loaded { experiment: cfg, .. } = args.load()?;
    cfg.validate()?;
    let manifest = Manifest::new("run", Some(&cfg));
    let run = run_pair(&cfg)?;
    let model = ReadoutModel::from_configs(&cfg.constants, &cfg.probe, &cfg.detector);
    let report = DiscriminationReport::from_histograms(&run.dark.histogram, &run.bright.histogram)?;
    let budget = error_budget(&model, &cfg.noise, model.optimal().threshold);
    let report = report.with_budget(&budget);

    let hist_name = format!("histogram.{}", cli.format.extension());
    out.write(
        &hist_name,
        &output::histogram(&run.dark.histogram, &run.bright.histogram, cli.format),
    )?;
    out.write(
        "report.json",
        &output::to_json(&RunReport {
            report: &report,
            losses: LossReport {
                dark: run.dark.losses,
                bright: run.bright.losses,
            },
            manifest: &manifest,
        }),
    )?;
    if cli.plot {
        let series = |label, h: &tweezer_core::CountHistogram| Series {
            label,
            points: (0..=h.max_count().unwrap_or(0) + 1)
                .map(|n| (n as f64, h.frequency(n) as f64 / h.kept_trials().max(1) as f64))
                .collect(),
        };
        let svg = Chart {
            title: "Photon count histograms",
            x_label: "detected photons n",
            y_label: "probability",
            log_y: false,
            steps: true,
        }
        .render(&[
            series("dark", &run.dark.histogram),
            series("bright", &run.bright.histogram),
        ]);
        out.write_plot("histogram.svg", &svg);
    }
    println!(
        "F = {:.4} +/- {:.4} at n_c = {}  (<n_D> = {:.3}, <n_B> = {:.3}, kept {}/{} dark, {}/{} bright)",
        report.fidelity,
        report.confidence,
        report.threshold,
        report.mean_dark,
        report.mean_bright,
        report.kept_dark,
        cfg.trials,
        report.kept_bright,
        cfg.trials
    );
    Ok(manifest)
}

fn cmd_scan(path: &PathBuf, cli: &Cli, out: &mut OutDir) -> Result<Manifest, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let (dark, bright) = output::read_histogram_csv(&src)?;
    if dark.is_empty() {
        return Err(AnalysisError::NoData(PreparedState::Dark.as_str()).into());
    }
    if bright.is_empty() {
        return Err(AnalysisError::NoData(PreparedState::Bright.as_str()).into());
    }
    let scan = threshold_scan(&dark, &bright)?;
    let manifest = Manifest::new("scan-threshold", None);
    out.write(
        &format!("scan.{}", cli.format.extension()),
        &output::scan(&scan, cli.format, &manifest),
    )?;
    if cli.plot {
        let pick = |f: fn(&tweezer_core::ClassificationErrors) -> f64| {
            scan.points.iter().map(|p| (p.threshold as f64, f(p))).collect()
        };
        let svg = Chart {
            title: "Readout error versus threshold",
            x_label: "threshold n_c",
            y_label: "error",
            log_y: true,
            steps: false,
        }
        .render(&[
            Series { label: "epsilon", points: pick(|p| p.epsilon()) },
            Series { label: "epsilon_B", points: pick(|p| p.epsilon_bright) },
            Series { label: "epsilon_D", points: pick(|p| p.epsilon_dark) },
        ]);
        out.write_plot("scan.svg", &svg);
    }
    let best = scan.optimal();
    println!(
        "optimal n_c = {}: epsilon = {:.5} (epsilon_B = {:.5}, epsilon_D = {:.5})",
        best.threshold,
        best.epsilon(),
        best.epsilon_bright,
        best.epsilon_dark
    );
    Ok(manifest)
}

fn cmd_sweep(args: &ConfigArgs, cli: &Cli, out: &mut OutDir) -> Result<Manifest, CliError> {
    let Loaded { file, experiment: cfg } = args.load()?;
    let spec = file.sweep_spec(&cfg)?;
    cfg.validate()?;
    let manifest = Manifest::new("sweep", Some(&cfg));
    let rows = sweep_depths(&spec, &cfg)?;
    out.write(
        &format!("sweep.{}", cli.format.extension()),
        &output::sweep(&rows, cli.format, &manifest),
    )?;
    if cli.plot {
        let pts = |f: fn(&tweezer_core::SweepRow) -> f64| rows.iter().map(|r| (r.depth * 1e3, f(r))).collect();
        let fid = Chart {
            title: "Readout fidelity versus trap depth",
            x_label: "trap depth (mK)",
            y_label: "fidelity",
            log_y: false,
            steps: false,
        }
        .render(&[Series { label: "F", points: pts(|r| r.fidelity) }]);
        out.write_plot("sweep_fidelity.svg", &fid);
        let nb = Chart {
            title: "Bright-state mean versus trap depth",
            x_label: "trap depth (mK)",
            y_label: "mean detected photons",
            log_y: false,
            steps: false,
        }
        .render(&[Series { label: "<n_B>", points: pts(|r| r.mean_bright) }]);
        out.write_plot("sweep_mean_bright.svg", &nb);
    }
    for r in &rows {
        println!(
            "U = {:.3} mK  dt = {:.3} ms  s = {:.4}  F = {:.4}  n_c = {}  <n_B> = {:.3}",
            r.depth * 1e3,
            r.probe.duration * 1e3,
            r.probe.saturation,
            r.fidelity,
            r.threshold,
            r.mean_bright
        );
    }
    Ok(manifest)
}

#[derive(Serialize)]
struct BudgetReport<'a> {
    rows: &'a [BudgetRow],
    total: f64,
    threshold: u32,
    model_fidelity: f64,
    mean_dark: f64,
    mean_bright: f64,
    method: &'static str,
    manifest: &'a Manifest,
}

fn cmd_budget(args: &ConfigArgs, out: &mut OutDir) -> Result<Manifest, CliError> {
    let Loaded { experiment: cfg, .. } = args.load()?;
    cfg.validate()?;
    let manifest = Manifest::new("budget", Some(&cfg));
    let model = ReadoutModel::from_configs(&cfg.constants, &cfg.probe, &cfg.detector);
    let best = model.optimal();
    let budget = error_budget(&model, &cfg.noise, best.threshold);
    out.write(
        "budget.json",
        &output::to_json(&BudgetReport {
            rows: &budget.rows,
            total: budget.total,
            threshold: best.threshold,
            model_fidelity: best.fidelity(),
            mean_dark: model.mean(PreparedState::Dark),
            mean_bright: model.mean(PreparedState::Bright),
            method: tweezer_core::discrimination::ATTRIBUTION_METHOD,
            manifest: &manifest,
        }),
    )?;
    let width = budget.rows.iter().map(|r| r.source.name().len()).max().unwrap_or(5);
    let mut text = String::new();
    for r in &budget.rows {
        let _ = writeln!(text, "{:<width$}  {:>8.4} %", r.source.name(), 100.0 * r.contribution);
    }
    let _ = writeln!(text, "{:<width$}  {:>8.4} %", "total", 100.0 * budget.total);
    print!("{text}");
    Ok(manifest)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Utc::now();
    let mut out = OutDir::create(&cli.out)?;
    let manifest = match &cli.command {
        Command::Run(args) => cmd_run(args, cli, &mut out)?,
        Command::ScanThreshold { histogram } => cmd_scan(histogram, cli, &mut out)?,
        Command::Sweep(args) => cmd_sweep(args, cli, &mut out)?,
        Command::Budget(args) => cmd_budget(args, &mut out)?,
    };
    let stamp = |t: chrono::DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
    let outputs = out.written.clone();
    let full = output::FullManifest {
        manifest: &manifest,
        command_line: std::env::args().collect(),
        started: stamp(started),
        finished: stamp(Utc::now()),
        outputs: &outputs,
    };
    out.write("manifest.json", &output::to_json(&full))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    if let Err(e) = pool {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::from(1);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
