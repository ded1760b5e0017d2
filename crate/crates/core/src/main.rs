use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use umwe::io::{self as uio, check_writable, OutputError, RunConfig};
use umwe::scenario::{detect_phases, run_scenario, PresetName, ScenarioError};
use umwe::{risk_report, Params};

const EXIT_INVALID: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "umwe",
    version,
    about = "Simulate and analyse credit-cycle interest-rate dynamics"
)]
struct Cli {
    /// Significant digits for CSV numbers (overrides the config)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(6..=17))]
    precision: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory CSV and chart
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV path (stdout when neither this nor the config sets one)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// SVG chart path
        #[arg(long)]
        chart: Option<PathBuf>,
        /// Skip the chart even if the config names a path
        #[arg(long)]
        no_chart: bool,
    },
    /// Print the regime and every risk measure for one state as JSON
    Analyze {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        nu: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        #[arg(long, allow_hyphen_values = true)]
        l: f64,
        /// Interest rate to evaluate at
        #[arg(long, allow_hyphen_values = true)]
        i0: f64,
    },
    /// Evaluate the config's sweep grid and write one CSV row per value
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a complete, editable config for a named scenario
    Preset {
        /// stable, bubble, full_cycle or alpha_only_crash
        name: String,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load(path: &Path, precision: Option<u64>) -> Result<RunConfig, Failure> {
    let text = fs::read(path)
        .map_err(|e| Failure::Io(format!("cannot read `{}`: {e}", path.display())))?;
    let mut cfg = uio::parse_config(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    if let Some(p) = precision {
        cfg.output.precision = p as usize;
    }
    Ok(cfg)
}

fn to_stdout(f: impl FnOnce(io::StdoutLock) -> io::Result<()>) -> Result<(), Failure> {
    f(io::stdout().lock()).map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| OutputError::new(path, e).into()),
        None => to_stdout(|mut w| w.write_all(text.as_bytes())),
    }
}

fn simulate(
    config: &Path,
    csv: Option<PathBuf>,
    chart: Option<PathBuf>,
    no_chart: bool,
    precision: Option<u64>,
) -> Result<bool, Failure> {
    let cfg = load(config, precision)?;
    let csv = csv.or(cfg.output.csv.clone());
    let chart = chart
        .or(cfg.output.chart.clone())
        .filter(|_| cfg.output.chart_enabled && !no_chart);
    for path in csv.iter().chain(chart.iter()) {
        check_writable(path)?;
    }

    let tr = run_scenario(&cfg.scenario).map_err(|e| match e {
        ScenarioError::Invalid(vs) => Failure::Invalid(
            vs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        ScenarioError::Model(e) => Failure::Invalid(e.to_string()),
    })?;

    let digits = cfg.output.precision;
    let every = cfg.scenario.sample_every;
    match &csv {
        Some(path) => uio::emit_csv(&tr, path, digits, every)?,
        None => {
            to_stdout(|w| uio::write_trajectory_csv(&tr, io::BufWriter::new(w), digits, every))?
        }
    }
    if let Some(path) = &chart {
        uio::emit_chart(&tr, path)?;
    }

    for phase in detect_phases(&tr) {
        eprintln!(
            "{:<24} t = {}..={}",
            phase.label.as_str(),
            phase.start_t,
            phase.end_t
        );
    }
    match &tr.abort {
        Some(abort) => {
            eprintln!("diverged at t = {}: {}", abort.at_t, abort.error);
            Ok(false)
        }
        None => Ok(true),
    }
}

fn analyze(values: [f64; 7]) -> Result<(), Failure> {
    let [alpha, beta, mu, nu, k, l, i0] = values;
    let p = Params::new(alpha, beta, mu, nu, k, l).map_err(|e| Failure::Invalid(e.to_string()))?;
    if !(i0.is_finite() && i0 > 0.0) {
        return Err(Failure::Invalid(format!(
            "i0 must be finite and strictly positive, got {i0}"
        )));
    }
    let json = serde_json::to_string_pretty(&risk_report(&p, i0)).expect("report serializes");
    write_text(None, &format!("{json}\n"))
}

fn sweep(config: &Path, out: Option<PathBuf>, precision: Option<u64>) -> Result<(), Failure> {
    let cfg = load(config, precision)?;
    let spec = cfg
        .sweep
        .ok_or_else(|| Failure::Invalid(format!("{}: no `sweep` section", config.display())))?;
    if let Some(path) = &out {
        check_writable(path)?;
    }
    let rows = uio::run_sweep(&spec);
    let digits = cfg.output.precision;
    match &out {
        Some(path) => uio::emit_sweep(&rows, path, digits)?,
        None => to_stdout(|w| uio::write_sweep_csv(&rows, io::BufWriter::new(w), digits))?,
    }
    Ok(())
}

fn preset(name: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let name: PresetName = name
        .parse()
        .map_err(|e: umwe::scenario::UnknownPreset| Failure::Invalid(e.to_string()))?;
    if let Some(path) = &out {
        check_writable(path)?;
    }
    write_text(out.as_deref(), &uio::config::preset_config_json(name))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            csv,
            chart,
            no_chart,
        } => simulate(&config, csv, chart, no_chart, cli.precision),
        Command::Analyze {
            alpha,
            beta,
            mu,
            nu,
            k,
            l,
            i0,
        } => analyze([alpha, beta, mu, nu, k, l, i0]).map(|()| true),
        Command::Sweep { config, out } => sweep(&config, out, cli.precision).map(|()| true),
        Command::Preset { name, out } => preset(&name, out).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_DIVERGED),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
