//! Command-line front end. Every subcommand reads one TOML config and writes
//! CSV, either to stdout or to a file under `--out`. Summary lines start
//! with `# `.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile};
use crate::equilibrium::{solve, verify};
use crate::error::ModelError;
use crate::evolution::{
    convert_price, convert_price_back, decision_scenarios, project, sensitivity, Family, Projection,
};
use crate::sweep::{run_partition_sweep, run_sweep, write_rasters_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "aptp",
    version,
    about = "AP/TP market equilibrium solver and price projections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the price grid step.
    #[arg(long)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Competitive equilibrium of one system, with its certificate.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also certify that no lower price is feasible (default).
        #[arg(long, overrides_with = "no_competitive")]
        competitive: bool,
        /// Certify only feasibility and load maximality.
        #[arg(long)]
        no_competitive: bool,
    },
    /// Equilibrium prices along a sweep axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis name, overriding `[sweep].axis`.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Choice rasters of a fixed menu over the (beta, v) plane.
    Partition {
        #[command(flatten)]
        common: Common,
    },
    /// Year-by-year CDN and transit prices.
    Project {
        #[command(flatten)]
        common: Common,
    },
    /// Projections over values of one scenario knob.
    Sensitivity {
        #[command(flatten)]
        common: Common,
    },
    /// Projections under capacity-growth or capacity-ratio plans.
    Decide {
        #[command(flatten)]
        common: Common,
    },
    /// Convert a price between $/Mbps-month and $/terabit.
    Convert {
        value: f64,
        #[arg(long, value_enum, default_value = "mbps-month")]
        from: Unit,
        #[arg(long, value_enum, default_value = "terabit")]
        to: Unit,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    MbpsMonth,
    Terabit,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

type CliResult = Result<i32, CliError>;

/// Where CSV goes: a named file under `--out`, or the shared stdout stream.
fn emit<F>(
    out_dir: Option<&Path>,
    name: &str,
    stdout: &mut dyn Write,
    write: F,
) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            let mut f = io::BufWriter::new(fs::File::create(&path)?);
            write(&mut f)?;
            f.flush()?;
            writeln!(stdout, "# wrote {}", path.display())?;
            Ok(())
        }
        None => write(stdout),
    }
}

fn load(common: &Common) -> Result<(ConfigFile, Option<PathBuf>), CliError> {
    let cfg = ConfigFile::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.clone().map(PathBuf::from));
    Ok((cfg, out))
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6}")
    }
}

fn cmd_solve(common: &Common, competitive: Option<bool>, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let setup = cfg.solve_setup(common.grid_step)?;
    let competitive = competitive.or(cfg.run.competitive).unwrap_or(true);
    let (market, population, grid) = (&setup.market, &setup.population, &setup.grid);
    if market.real_segments().is_empty() {
        writeln!(
            stdout,
            "# market has only the dummy TP: every AP stays unserved"
        )?;
        return Ok(EXIT_OK);
    }
    let r = solve(market, population, grid)?;
    let cert = verify(&r.prices, market, population, grid, competitive)?;
    emit(out.as_deref(), "solve.csv", stdout, |w| {
        let mut csv = crate::evolution::csv_writer(w);
        csv.write_record([
            "segment",
            "label",
            "quality",
            "price_floor",
            "capacity",
            "price",
            "load",
            "ap_types",
        ])?;
        for (i, s) in market.segments().iter().enumerate() {
            csv.write_record([
                i.to_string(),
                s.label.clone(),
                fmt_num(s.quality),
                fmt_num(s.price_floor),
                fmt_num(s.effective_capacity()),
                fmt_num(r.prices[i]),
                fmt_num(r.loads[i]),
                r.assignment.shares[i].len().to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    writeln!(stdout, "# grid step: {}", grid.step)?;
    writeln!(stdout, "# passes: {}", r.iterations)?;
    writeln!(stdout, "# feasible: {}", r.feasible)?;
    writeln!(stdout, "# competitive: {}", r.competitive)?;
    if cert.passed() {
        writeln!(stdout, "# certificate: pass")?;
        Ok(EXIT_OK)
    } else {
        writeln!(
            stdout,
            "# certificate: FAIL ({} violations)",
            cert.violations.len()
        )?;
        for v in &cert.violations {
            writeln!(
                stdout,
                "#   segment {} at price {}: {:?}",
                v.segment, v.price, v.kind
            )?;
        }
        Ok(EXIT_CERTIFICATE)
    }
}

fn cmd_sweep(common: &Common, axis: Option<&str>, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let mut spec = cfg.sweep_spec(axis)?;
    if let Some(step) = common.grid_step {
        spec.base.grid_step = step;
    }
    let table = run_sweep(&spec)?;
    emit(out.as_deref(), "sweep.csv", stdout, |w| {
        Ok(table.write_csv(w)?)
    })?;
    let failed = table.rows.iter().filter(|r| r.prices.is_err()).count();
    if failed > 0 {
        writeln!(stdout, "# failed points: {failed}")?;
    }
    Ok(EXIT_OK)
}

fn cmd_partition(common: &Common, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let spec = cfg.partition_spec()?;
    let rasters = run_partition_sweep(&spec)?;
    emit(out.as_deref(), "partition.csv", stdout, |w| {
        Ok(write_rasters_csv(&rasters, w)?)
    })?;
    Ok(EXIT_OK)
}

fn summary(
    p: &Projection,
    s: &crate::evolution::Scenario,
    stdout: &mut dyn Write,
) -> io::Result<()> {
    if let Some(st) = p.state(s.anchor_year) {
        for (i, name) in ["A (CDN)", "B (transit)"].iter().enumerate() {
            writeln!(
                stdout,
                "# {} price {}: {:.2} $/Mbps-month = {:.4} $/terabit",
                s.anchor_year,
                name,
                st.prices[i],
                convert_price(st.prices[i])
            )?;
        }
    }
    let show = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.1}%"));
    writeln!(
        stdout,
        "# mean annual drop {}-{} against the {} level: A {}, B {}",
        s.start_year,
        s.anchor_year,
        s.start_year,
        show(p.mean_annual_drop(0, s.start_year, s.anchor_year)),
        show(p.mean_annual_drop(1, s.start_year, s.anchor_year))
    )?;
    writeln!(
        stdout,
        "# mean year-over-year drop {}-{}: A {}, B {}",
        s.start_year,
        s.anchor_year,
        show(p.mean_yoy_drop(0, s.start_year, s.anchor_year)),
        show(p.mean_yoy_drop(1, s.start_year, s.anchor_year))
    )
}

fn scenario(cfg: &ConfigFile, common: &Common) -> Result<crate::evolution::Scenario, CliError> {
    let mut s = cfg.scenario()?;
    if let Some(step) = common.grid_step {
        if !(step.is_finite() && step > 0.0) {
            return Err(ConfigError::Invalid {
                field: "--grid-step".into(),
                message: format!("must be finite and > 0, got {step}"),
            }
            .into());
        }
        s.price_step = step;
    }
    Ok(s)
}

fn cmd_project(common: &Common, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let s = scenario(&cfg, common)?;
    let p = project(&s)?;
    emit(out.as_deref(), "projection.csv", stdout, |w| {
        Ok(p.write_csv(w)?)
    })?;
    summary(&p, &s, stdout)?;
    Ok(EXIT_OK)
}

fn family_summary(f: &Family, stdout: &mut dyn Write) -> io::Result<()> {
    for (v, p) in &f.members {
        let floor_year = p
            .states
            .iter()
            .find(|st| st.prices[1] <= 0.0 + 1e-12)
            .map_or_else(|| "never".to_string(), |st| st.year.to_string());
        let last = p.states.last().expect("non-empty projection");
        writeln!(
            stdout,
            "# {}={}: transit at zero price from {}; {} prices A {:.2}, B {:.2}",
            f.parameter, v, floor_year, last.year, last.prices[0], last.prices[1]
        )?;
    }
    Ok(())
}

fn cmd_sensitivity(common: &Common, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let s = scenario(&cfg, common)?;
    let (knob, values) = cfg.knob()?;
    let f = sensitivity(&s, knob, &values)?;
    emit(out.as_deref(), "sensitivity.csv", stdout, |w| {
        Ok(f.write_csv(w)?)
    })?;
    family_summary(&f, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_decide(common: &Common, stdout: &mut dyn Write) -> CliResult {
    let (cfg, out) = load(common)?;
    let s = scenario(&cfg, common)?;
    let d = cfg.decision()?;
    let f = decision_scenarios(&s, &d)?;
    emit(
        out.as_deref(),
        "decide.csv",
        stdout,
        |w| Ok(f.write_csv(w)?),
    )?;
    family_summary(&f, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_convert(value: f64, from: Unit, to: Unit, stdout: &mut dyn Write) -> CliResult {
    if !(value.is_finite() && value >= 0.0) {
        return Err(ConfigError::Invalid {
            field: "value".into(),
            message: format!("must be finite and >= 0, got {value}"),
        }
        .into());
    }
    let out = match (from, to) {
        (Unit::MbpsMonth, Unit::Terabit) => convert_price(value),
        (Unit::Terabit, Unit::MbpsMonth) => convert_price_back(value),
        _ => value,
    };
    writeln!(stdout, "{out:.4}")?;
    Ok(EXIT_OK)
}

/// Runs a parsed command, writing CSV and summaries to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Solve {
            common,
            competitive,
            no_competitive,
        } => {
            let flag = match (competitive, no_competitive) {
                (_, true) => Some(false),
                (true, false) => Some(true),
                _ => None,
            };
            cmd_solve(common, flag, stdout)
        }
        Command::Sweep { common, axis } => cmd_sweep(common, axis.as_deref(), stdout),
        Command::Partition { common } => cmd_partition(common, stdout),
        Command::Project { common } => cmd_project(common, stdout),
        Command::Sensitivity { common } => cmd_sensitivity(common, stdout),
        Command::Decide { common } => cmd_decide(common, stdout),
        Command::Convert { value, from, to } => cmd_convert(*value, *from, *to, stdout),
    }
}

/// Parses process arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    run_args(args, &mut lock)
}

/// As [`main_with_args`] with standard output redirected to `stdout`.
/// Errors still go to standard error.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = run(&cli, stdout);
    let _ = stdout.flush();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
