//! `fic`: run scenarios, sweeps, calibrations, the energy-drift experiment and
//! phase portraits from JSON configs.

mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fic::config::{self, format_value, ConfigError, OutputFormat, OutputSpec, RunMeta};
use fic::energy::{cubic_reference_ic_work, energy_drift};
use fic::harness::{calibrate_sweep, compute_metrics, phase_portrait, run_scenario, run_sweep, EpisodeRecord};
use fic::{FicError, StiffnessParams};
use serde::Serialize;

use output::{csv_table, json_text, opt_cell, write_sidecar, CommandMeta, Target};

#[derive(Debug, Parser)]
#[command(name = "fic", version, about = "Fractal impedance controller simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its record.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every scenario of a sweep file; `--out` names a directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the seed of every scenario.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Largest stable saturation force per boundary.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sampled impedance work against the exact FIC work on x(t) = t³ + t² + t.
    EnergyDrift {
        #[arg(long, value_delimiter = ',', default_values_t = [20.0, 100.0, 1000.0, 10000.0])]
        rates: Vec<f64>,
        /// Damping gain of the linear impedance.
        #[arg(long, default_value_t = 1.0)]
        k_d: f64,
        /// Stiffness gain of the linear impedance.
        #[arg(long, default_value_t = 1.0)]
        k_p: f64,
        #[command(flatten)]
        spring: SpringArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Free undamped excursions of a 1-DoF point mass, one per energy level.
    PhasePortrait {
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
        energies: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        inertia: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[command(flatten)]
        spring: SpringArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file (directory for `sweep`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutputArgs {
    fn target(&self, spec: &OutputSpec) -> Target {
        Target::resolve(self.out.clone(), self.format.map(Into::into), spec)
    }
}

#[derive(Debug, Args, Serialize)]
struct SpringArgs {
    #[arg(long, default_value_t = 0.0)]
    k_const: f64,
    #[arg(long, default_value_t = 30.0)]
    w_max: f64,
    #[arg(long, default_value_t = 0.05)]
    x_b: f64,
}

impl SpringArgs {
    fn params(&self) -> Result<StiffnessParams, CliError> {
        StiffnessParams::new(self.k_const, self.w_max, self.x_b).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Bad arguments or config: exit code 1.
    Config(String),
    /// Blow-up, singularity or I/O failure while running: exit code 2.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("writing output: {e}"))
    }
}

fn record_bytes(record: &EpisodeRecord, format: OutputFormat) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => config::emit_csv(record, &mut buf)?,
        OutputFormat::Json => {
            config::emit_json(record, &mut buf)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

fn failure_error(name: &str, record: &EpisodeRecord) -> Option<CliError> {
    record.failure.as_ref().map(|f| {
        let label = if name.is_empty() { "scenario" } else { name };
        CliError::Runtime(format!("{label} stopped at t = {}: {}", f.t, f.message))
    })
}

fn cmd_run(path: PathBuf, seed: Option<u64>, out: OutputArgs) -> Result<(), CliError> {
    let parsed = config::parse_config(&path)?;
    let mut scenario = parsed.body;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let target = out.target(&parsed.output);
    let record = run_scenario(&scenario).map_err(|e| CliError::Config(e.to_string()))?;
    target.write(&record_bytes(&record, target.format)?)?;
    let meta = RunMeta::new(&scenario, &record);
    target.write_meta(&meta, &meta.config_hash)?;
    log::info!("{} rows, passivity margin {:.3e} J", record.rows.len(), record.ledger.passivity_margin);
    failure_error(&scenario.name, &record).map_or(Ok(()), Err)
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    index: usize,
    name: String,
    config_hash: String,
    status: String,
    e_in: f64,
    e_rel: f64,
    passivity_margin: f64,
    max_lyapunov_increase: f64,
    mean_recovery_time: Option<f64>,
}

fn cmd_sweep(path: PathBuf, seed: Option<u64>, out: OutputArgs) -> Result<(), CliError> {
    let parsed = config::parse_sweep(&path)?;
    let mut scenarios = parsed.body.scenarios;
    if let Some(s) = seed {
        scenarios.iter_mut().for_each(|sc| sc.seed = s);
    }
    let target = out.target(&parsed.output);
    let ext = match target.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    if let Some(dir) = &target.path {
        fs::create_dir_all(dir)?;
    }

    // Results come back in scenario order, so the files are deterministic.
    let mut summary = Vec::new();
    let mut first_failure = None;
    for (i, (scenario, result)) in scenarios.iter().zip(run_sweep(&scenarios)).enumerate() {
        let record = result.map_err(|e| CliError::Config(format!("/scenarios/{i}: {e}")))?;
        if let Some(dir) = &target.path {
            let file = dir.join(format!("{i:03}.{ext}"));
            fs::write(&file, record_bytes(&record, target.format)?)?;
            write_sidecar(&file, &RunMeta::new(scenario, &record))?;
        }
        if first_failure.is_none() {
            first_failure = failure_error(&format!("/scenarios/{i}"), &record);
        }
        summary.push(SweepSummary {
            index: i,
            name: scenario.name.clone(),
            config_hash: config::config_hash(scenario),
            status: record.failure.as_ref().map_or("ok".to_string(), |f| f.kind.clone()),
            e_in: record.ledger.e_in,
            e_rel: record.ledger.e_rel,
            passivity_margin: record.ledger.passivity_margin,
            max_lyapunov_increase: record.lyapunov.max_increase,
            mean_recovery_time: compute_metrics(&record).mean_recovery_time,
        });
    }

    let text = match target.format {
        OutputFormat::Json => json_text(&summary)?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|s| {
                    vec![
                        s.index.to_string(),
                        s.name.clone(),
                        s.config_hash.clone(),
                        s.status.clone(),
                        format_value(s.e_in),
                        format_value(s.e_rel),
                        format_value(s.passivity_margin),
                        format_value(s.max_lyapunov_increase),
                        opt_cell(s.mean_recovery_time),
                    ]
                })
                .collect();
            csv_table(
                &["index", "name", "config_hash", "status", "E_in", "E_rel", "passivity_margin", "max_lyapunov_increase", "mean_recovery_time"],
                &rows,
            )
        }
    };
    let summary_target = Target { path: target.path.as_ref().map(|d| d.join(format!("summary.{ext}"))), format: target.format };
    summary_target.write(text.as_bytes())?;
    let meta = CommandMeta::new("sweep", &scenarios);
    summary_target.write_meta(&meta, &meta.config_hash)?;
    first_failure.map_or(Ok(()), Err)
}

fn cmd_calibrate(path: PathBuf, seed: Option<u64>, out: OutputArgs) -> Result<(), CliError> {
    let parsed = config::parse_calibration(&path)?;
    let mut cal = parsed.body;
    if let Some(s) = seed {
        cal.base.seed = s;
    }
    let target = out.target(&parsed.output);
    let table = calibrate_sweep(&cal.base, cal.dof, &cal.x_b, &cal.w_max_candidates);
    for r in table.ranges() {
        log::info!("x_b in [{}, {}]: w_max {:?}", r.x_b_min, r.x_b_max, r.w_max);
    }
    let text = match target.format {
        OutputFormat::Json => json_text(&serde_json::json!({ "rows": table.rows, "ranges": table.ranges() }))?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = table.rows.iter().map(|r| vec![format_value(r.x_b), opt_cell(r.w_max)]).collect();
            csv_table(&["x_b", "w_max"], &rows)
        }
    };
    target.write(text.as_bytes())?;
    let meta = CommandMeta::new("calibrate", &cal);
    target.write_meta(&meta, &meta.config_hash)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DriftInputs<'a> {
    rates: &'a [f64],
    k_d: f64,
    k_p: f64,
    spring: &'a SpringArgs,
}

fn cmd_energy_drift(rates: Vec<f64>, k_d: f64, k_p: f64, spring: SpringArgs, out: OutputArgs) -> Result<(), CliError> {
    if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Config("--rates must be positive".into()));
    }
    let params = spring.params()?;
    let target = out.target(&OutputSpec::default());
    let rows = energy_drift(&rates, k_d, k_p, &params);
    log::info!("exact impedance work {:.6} J", cubic_reference_ic_work(k_d, k_p));
    let text = match target.format {
        OutputFormat::Json => json_text(&rows)?,
        OutputFormat::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| [r.rate_hz, r.ic_work, r.ic_error, r.fic_work, r.fic_work_summed].map(format_value).to_vec())
                .collect();
            csv_table(&["rate_hz", "ic_work", "ic_error", "fic_work", "fic_work_summed"], &cells)
        }
    };
    target.write(text.as_bytes())?;
    let inputs = DriftInputs { rates: &rates, k_d, k_p, spring: &spring };
    let meta = CommandMeta::new("energy-drift", &inputs);
    target.write_meta(&meta, &meta.config_hash)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PortraitInputs<'a> {
    energies: &'a [f64],
    inertia: f64,
    dt: f64,
    spring: &'a SpringArgs,
}

fn cmd_phase_portrait(energies: Vec<f64>, inertia: f64, dt: f64, spring: SpringArgs, out: OutputArgs) -> Result<(), CliError> {
    if !(inertia > 0.0) || !(dt > 0.0) {
        return Err(CliError::Config("--inertia and --dt must be positive".into()));
    }
    let params = spring.params()?;
    let target = out.target(&OutputSpec::default());
    let curves = phase_portrait(params, inertia, &energies, dt).map_err(|e| match e {
        FicError::Precondition(_) | FicError::InvalidStiffness(_) | FicError::Domain(_) => CliError::Config(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    })?;
    let text = match target.format {
        OutputFormat::Json => json_text(&curves)?,
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for c in &curves {
                for k in 0..c.t.len() {
                    rows.push(vec![
                        format_value(c.energy),
                        c.branch.to_string(),
                        format_value(c.t[k]),
                        format_value(c.x_err[k]),
                        format_value(c.x_err_rate[k]),
                    ]);
                }
            }
            csv_table(&["energy", "branch", "t", "x_err", "x_err_rate"], &rows)
        }
    };
    target.write(text.as_bytes())?;
    let inputs = PortraitInputs { energies: &energies, inertia, dt, spring: &spring };
    let meta = CommandMeta::new("phase-portrait", &inputs);
    target.write_meta(&meta, &meta.config_hash)?;
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, seed, output } => cmd_run(config, seed, output),
        Command::Sweep { config, seed, output } => cmd_sweep(config, seed, output),
        Command::Calibrate { config, seed, output } => cmd_calibrate(config, seed, output),
        Command::EnergyDrift { rates, k_d, k_p, spring, output } => cmd_energy_drift(rates, k_d, k_p, spring, output),
        Command::PhasePortrait { energies, inertia, dt, spring, output } => {
            cmd_phase_portrait(energies, inertia, dt, spring, output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FIC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fic: {e}");
            ExitCode::from(e.code())
        }
    }
}
