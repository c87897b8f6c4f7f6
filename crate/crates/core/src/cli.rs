//! Command-line front end: `validate`, `simulate`, `circularity`, `compare`
//! and `optimize` over scenario files.
//!
//! Failures print a single `error[Code]: message` line to stderr and exit
//! with status 1.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::circularity::{CircularityError, CircularityReport, Horizon};
use crate::mechanics::{Trajectory, TrajectorySample};
use crate::optimize::{argmax_circularity, enumerate_scenarios, OptimizeError, Scenario};
use crate::scenario_file::{ScenarioFile, ScenarioFileError};
use crate::simulate::{milestone_times, SimulateError};

#[derive(Debug, Parser)]
#[command(
    name = "tmn",
    version,
    about = "Material network simulator and circularity optimizer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and print the network summary.
    Validate { file: PathBuf },
    /// Run the material journey and print milestone times.
    Simulate {
        file: PathBuf,
        /// Write one `arc_<id>.csv` trajectory per arc into this directory.
        #[arg(long)]
        traj_dir: Option<PathBuf>,
    },
    /// Print the circularity report of a scenario.
    Circularity {
        file: PathBuf,
        /// Horizon in seconds; overrides the file's setting.
        #[arg(long)]
        phi: Option<f64>,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Tabulate the circularity of several scenarios at a shared horizon.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Rank the scenarios generated by the file's strategy menu.
    Optimize {
        file: PathBuf,
        #[arg(long)]
        phi: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] ScenarioFileError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Circularity(#[from] CircularityError),
    #[error("scenarios use different delta values ({0} s vs {1} s); compare needs one delta")]
    MixedDelta(f64, f64),
    #[error("scenarios use different horizons ({0} vs {1}); pass --phi to compare at one horizon")]
    MixedHorizon(Horizon, Horizon),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::File(e) => e.code(),
            CliError::Optimize(e) => e.code(),
            CliError::Simulate(e) => e.code(),
            CliError::Circularity(e) => e.code(),
            CliError::MixedDelta(..) => "MixedDelta",
            CliError::MixedHorizon(..) => "MixedHorizon",
            CliError::Io(_) => "IoError",
            CliError::Csv(_) => "CsvError",
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return status;
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {}", e.code(), one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { file } => validate(file, out),
        Command::Simulate { file, traj_dir } => simulate(file, traj_dir.as_deref(), out),
        Command::Circularity { file, phi, json } => report(file, *phi, *json, out),
        Command::Compare { files, phi } => compare(files, *phi, out),
        Command::Optimize { file, phi } => optimize(file, *phi, out),
    }
}

fn horizon_override(phi: Option<f64>, fallback: Horizon) -> Result<Horizon, CliError> {
    match phi {
        Some(phi) => Ok(Horizon::bounded(phi)?),
        None => Ok(fallback),
    }
}

fn validate(file: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let f = ScenarioFile::load(file)?;
    let s = &f.scenario;
    let net = &s.network;
    writeln!(out, "ok: {}", file.display())?;
    writeln!(out, "scenario: {}", s.label)?;
    writeln!(out, "material: {}", net.material())?;
    writeln!(out, "n_v = {}", net.n_v())?;
    writeln!(out, "n_a = {}", net.n_a())?;
    writeln!(out, "n_c = {}", net.n_c())?;
    let route: Vec<String> = s.route.ids.iter().map(|c| c.to_string()).collect();
    writeln!(out, "route: {}", route.join(" -> "))?;
    let slots: usize = f.menu.iter().map(|slot| slot.len() + 1).product();
    writeln!(
        out,
        "strategy menu: {} slot(s), {} scenario(s)",
        f.menu.len(),
        slots
    )?;
    Ok(())
}

fn simulate(file: &Path, traj_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let f = ScenarioFile::load(file)?;
    let s = &f.scenario;
    let log = s.simulate(&s.settings.integrator())?;

    writeln!(out, "scenario: {}", s.label)?;
    writeln!(out, "{:<6} {:>16}", "label", "time_s")?;
    for (label, t) in milestone_times(&log)? {
        writeln!(out, "{label:<6} {:>16}", Sci(*t))?;
    }
    writeln!(out)?;
    writeln!(
        out,
        "{:<6} {:>14} {:>14} {:>14} {:>14}",
        "arc", "length_m", "depart_s", "duration_s", "exit_v_m_s"
    )?;
    for (arc, tr) in &log.trajectories {
        let length = s
            .network
            .get(*arc)
            .and_then(|c| c.dynamics)
            .map_or(f64::NAN, |d| d.geometry.length);
        writeln!(
            out,
            "{:<6} {:>14} {:>14} {:>14} {:>14}",
            arc.to_string(),
            Sci(length),
            Sci(tr.start_time()),
            Sci(tr.duration()),
            Sci(tr.exit_velocity)
        )?;
    }
    writeln!(out, "journey duration: {:} s", Sci(log.end_time()))?;

    if let Some(dir) = traj_dir {
        std::fs::create_dir_all(dir)?;
        for (arc, tr) in &log.trajectories {
            let path = dir.join(format!("arc_{}.csv", arc.0));
            write_trajectory_csv(BufWriter::new(File::create(&path)?), tr)?;
            writeln!(out, "wrote {}", path.display())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    scenario: &'a str,
    mass_kg: f64,
    #[serde(flatten)]
    report: &'a CircularityReport,
}

fn report(file: &Path, phi: Option<f64>, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let f = ScenarioFile::load(file)?;
    let s = &f.scenario;
    let horizon = horizon_override(phi, s.settings.horizon)?;
    let (_, report) = s.evaluate(horizon, s.settings.delta, &s.settings.integrator())?;
    if json {
        let doc = JsonReport {
            scenario: &s.label,
            mass_kg: s.element.mass,
            report: &report,
        };
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(io::Error::other)?;
        writeln!(out)?;
        return Ok(());
    }
    write_report(out, s, &report)
}

fn write_report(out: &mut dyn Write, s: &Scenario, r: &CircularityReport) -> Result<(), CliError> {
    writeln!(out, "scenario: {}", s.label)?;
    writeln!(out, "horizon: {}", r.horizon)?;
    writeln!(out, "delta: {} s", Sci(r.delta))?;
    writeln!(
        out,
        "{:>16} {:<12} {:<28} {:>14}",
        "time_s", "compartment", "kind", "mass_kg"
    )?;
    for c in &r.batch_contributions {
        writeln!(
            out,
            "{:>16} {:<12} {:<28} {:>14}",
            Sci(c.event.time),
            c.event.compartment.to_string(),
            c.event.kind.as_str(),
            Sci(c.mass)
        )?;
    }
    writeln!(out, "batch mass: {:} kg", Sci(r.batch_mass()))?;
    writeln!(
        out,
        "continuous: {:} kg/s x {} s = {:} kg",
        Sci(r.continuous_flow),
        Sci(r.delta),
        Sci(r.continuous_contribution)
    )?;
    writeln!(
        out,
        "lambda = {:} * m_kg  (m_kg = {:}, lambda = {:} kg)",
        Sci(r.lambda / s.element.mass),
        Sci(s.element.mass),
        Sci(r.lambda)
    )?;
    Ok(())
}

fn compare(files: &[PathBuf], phi: Option<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    let scenarios = files
        .iter()
        .map(ScenarioFile::load)
        .collect::<Result<Vec<_>, _>>()?;
    let first = &scenarios[0].scenario.settings;
    for f in &scenarios[1..] {
        let st = &f.scenario.settings;
        if st.delta != first.delta {
            return Err(CliError::MixedDelta(first.delta, st.delta));
        }
        if phi.is_none() && st.horizon != first.horizon {
            return Err(CliError::MixedHorizon(first.horizon, st.horizon));
        }
    }
    let horizon = horizon_override(phi, first.horizon)?;

    writeln!(out, "horizon: {horizon}")?;
    writeln!(out, "delta: {} s", Sci(first.delta))?;
    writeln!(
        out,
        "{:<28} {:<20} {:>14} {:>14}",
        "file", "label", "lambda_kg", "lambda_per_m"
    )?;
    for (path, f) in files.iter().zip(&scenarios) {
        let s = &f.scenario;
        let (_, r) = s.evaluate(horizon, first.delta, &s.settings.integrator())?;
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        writeln!(
            out,
            "{:<28} {:<20} {:>14} {:>14}",
            name,
            s.label,
            Sci(r.lambda),
            Sci(r.lambda / s.element.mass)
        )?;
    }
    Ok(())
}

fn optimize(file: &Path, phi: Option<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    let f = ScenarioFile::load(file)?;
    let base = &f.scenario;
    let horizon = horizon_override(phi, base.settings.horizon)?;
    let scenarios = enumerate_scenarios(base, &f.menu)?;
    let ranked = argmax_circularity(
        &scenarios,
        horizon,
        base.settings.delta,
        &base.settings.integrator(),
    )?;

    writeln!(out, "horizon: {horizon}")?;
    writeln!(out, "delta: {} s", Sci(base.settings.delta))?;
    writeln!(
        out,
        "{:<4} {:<3} {:<40} {:>14} {:<16} strategies",
        "rank", "", "label", "lambda_kg", "horizon"
    )?;
    for (i, r) in ranked.iter().enumerate() {
        let strategies: Vec<String> = r.scenario.applied.iter().map(|s| s.label()).collect();
        writeln!(
            out,
            "{:<4} {:<3} {:<40} {:>14} {:<16} {}",
            i + 1,
            if i == 0 { "N*" } else { "" },
            r.scenario.label,
            Sci(r.report.lambda),
            horizon.to_string(),
            if strategies.is_empty() {
                "-".to_string()
            } else {
                strategies.join(", ")
            }
        )?;
    }
    Ok(())
}

/// Scientific notation with six decimals and a signed two-digit exponent,
/// e.g. `-2.000000e+00`. Honors width and alignment.
pub struct Sci(pub f64);

impl fmt::Display for Sci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = format!("{:.6e}", self.0);
        let text = match raw.split_once('e') {
            Some((mantissa, exp)) => {
                let exp: i32 = exp.parse().unwrap_or(0);
                let sign = if exp < 0 { '-' } else { '+' };
                format!("{mantissa}e{sign}{:02}", exp.abs())
            }
            None => raw,
        };
        f.pad(&text)
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 7] = ["t", "s", "s_dot", "s_ddot", "x", "y", "z"];

/// Writes a trajectory as CSV with columns `t,s,s_dot,s_ddot,x,y,z`.
pub fn write_trajectory_csv<W: Write>(
    writer: W,
    trajectory: &Trajectory,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_COLUMNS)?;
    for p in &trajectory.samples {
        let row = [p.t, p.s, p.s_dot, p.s_ddot, p.x, p.y, p.z];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_trajectory_csv`].
pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectorySample>, csv::Error> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(TRAJECTORY_COLUMNS) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unexpected trajectory header {header:?}"),
        )
        .into());
    }
    r.deserialize::<(f64, f64, f64, f64, f64, f64, f64)>()
        .map(|row| {
            row.map(|(t, s, s_dot, s_ddot, x, y, z)| TrajectorySample {
                t,
                s,
                s_dot,
                s_ddot,
                x,
                y,
                z,
            })
        })
        .collect()
}
