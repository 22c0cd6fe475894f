use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use geogate::experiments::figures::{run_fig1, run_fig2b, run_fig2c, Fig1Setup, Fig1Variant};
use geogate::experiments::gate::run_gate;
use geogate::experiments::sweep::run_sweep;
use geogate::experiments::verify::run_verify;
use geogate::experiments::{ExperimentConfig, Format, OutputFile, RunOutput};

const FIG1A: &str = include_str!("../../../configs/fig1a.toml");
const FIG1B: &str = include_str!("../../../configs/fig1b.toml");
const FIG2B: &str = include_str!("../../../configs/fig2b.toml");
const FIG2C: &str = include_str!("../../../configs/fig2c.toml");
const VERIFY: &str = include_str!("../../../configs/verify.toml");
const SWEEP: &str = include_str!("../../../configs/sweep.toml");
const GATE: &str = include_str!("../../../configs/gate.toml");

/// Nonadiabatic geometric gates: figure data, invariant checks and gate synthesis.
#[derive(Parser, Debug)]
#[command(name = "geogate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; the built-in config of the subcommand is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Initial propagation steps per period.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Propagation tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Conditional phases versus operation time, omega1 = 0.8 J.
    Fig1a,
    /// Conditional phases versus operation time, omega1 = J - omega.
    Fig1b,
    /// Charge-qubit fictitious field over one period.
    Fig2b,
    /// Charge-qubit geometric phase versus operation time.
    Fig2c,
    /// Run the invariant suite.
    Verify,
    /// Control fidelity versus spin detuning.
    Sweep,
    /// Two-period gate synthesis.
    Gate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fig1a => "fig1a",
            Command::Fig1b => "fig1b",
            Command::Fig2b => "fig2b",
            Command::Fig2c => "fig2c",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Gate => "gate",
        }
    }

    fn builtin_config(self) -> &'static str {
        match self {
            Command::Fig1a => FIG1A,
            Command::Fig1b => FIG1B,
            Command::Fig2b => FIG2B,
            Command::Fig2c => FIG2C,
            Command::Verify => VERIFY,
            Command::Sweep => SWEEP,
            Command::Gate => GATE,
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn missing(section: &str) -> Failure {
    Failure::Config(anyhow::anyhow!("config has no [{section}] section"))
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Config)?,
        None => cli.command.builtin_config().to_string(),
    };
    ExperimentConfig::from_toml(&text)
        .and_then(|c| c.with_overrides(cli.steps, cli.tol))
        .map_err(|e| Failure::Config(e.into()))
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<RunOutput, Failure> {
    let format = Format::from(cli.format);
    let n = &cfg.numerics;
    let run = match cli.command {
        Command::Fig1a => run_fig1(
            Fig1Variant::A,
            &Fig1Setup::from(cfg.fig1a.ok_or_else(|| missing("fig1a"))?),
            n,
            format,
        ),
        Command::Fig1b => run_fig1(
            Fig1Variant::B,
            &Fig1Setup::from(cfg.fig1b.ok_or_else(|| missing("fig1b"))?),
            n,
            format,
        ),
        Command::Fig2b => run_fig2b(cfg.fig2b.as_ref().ok_or_else(|| missing("fig2b"))?, format),
        Command::Fig2c => run_fig2c(cfg.fig2c.as_ref().ok_or_else(|| missing("fig2c"))?, n, format, "fig2c"),
        Command::Verify => run_verify(cfg.verify.as_ref().ok_or_else(|| missing("verify"))?, n).map(|r| RunOutput {
            files: vec![],
            report: Some(r),
        }),
        Command::Sweep => run_sweep(cfg.sweep.as_ref().ok_or_else(|| missing("sweep"))?, n, format),
        Command::Gate => run_gate(cfg.gate.as_ref().ok_or_else(|| missing("gate"))?, n, format),
    };
    run.map_err(|e| match e {
        geogate::Error::Config(_) => Failure::Config(e.into()),
        other => Failure::Run(other.into()),
    })
}

fn write_outputs(dir: &Path, name: &str, out: &RunOutput, format: Format) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = out
        .report
        .as_ref()
        .map(|r| OutputFile::new(format!("{name}_report.{}", format.extension()), r.render(format)));
    for f in out.files.iter().chain(report.iter()) {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(Failure::Config(e) | Failure::Run(e)) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let out = match execute(&cli, &cfg) {
        Ok(o) => o,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = write_outputs(&dir, cli.command.name(), &out, cli.format.into()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if let Some(r) = &out.report {
        print!("{}", r.summary());
    }
    if out.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
