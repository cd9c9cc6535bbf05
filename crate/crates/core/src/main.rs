use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use miwg::config::{OutputFormat, ScenarioFile};
use miwg::sweep::{self, SweepResult};
use miwg::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// Magnetic-induction waveguide simulator for battery-free NFC sensor arrays.
#[derive(Parser)]
#[command(name = "miwg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single reader-sensor link voltage, uplink ratio and range over distance.
    SingleRange(Common),
    /// Deepest-sensor voltage against the interval scale factor.
    IntervalSweep(Common),
    /// Minimal transmit power to reach a target depth, per Q.
    PowerRequirement(Common),
    /// Uplink ratio of each array sensor against the same sensor alone.
    UplinkCompare(Common),
    /// Search quality factor, transmit power and coil radius for a deployment.
    Design(Common),
    /// Print the calibrated defaults.
    Defaults(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 when the design search finds no feasible point.
    #[arg(long)]
    require_feasible: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Report {
    Table(SweepResult),
    Design(miwg::optimizer::SearchOutcome),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
    }
}

fn run(cli: Cli) -> miwg::Result<ExitCode> {
    let (name, common) = match &cli.command {
        Command::SingleRange(c) => ("single-range", c),
        Command::IntervalSweep(c) => ("interval-sweep", c),
        Command::PowerRequirement(c) => ("power-requirement", c),
        Command::UplinkCompare(c) => ("uplink-compare", c),
        Command::Design(c) => ("design", c),
        Command::Defaults(c) => ("defaults", c),
    };
    let file = match &common.config {
        Some(path) => ScenarioFile::load(path)?,
        None if name == "defaults" => ScenarioFile::parse("{}")?,
        None => return Err(Error::Config(format!("{name} needs --config <file>"))),
    };
    let report = match &cli.command {
        Command::SingleRange(_) => Report::Table(sweep::single_range(&file)?),
        Command::IntervalSweep(_) => Report::Table(sweep::interval_sweep(&file)?),
        Command::PowerRequirement(_) => Report::Table(sweep::power_requirement(&file)?),
        Command::UplinkCompare(_) => Report::Table(sweep::uplink_compare(&file)?),
        Command::Design(_) => Report::Design(sweep::design(&file)?),
        Command::Defaults(_) => Report::Table(sweep::defaults()),
    };

    let format = match (common.format, file.output.format) {
        (Some(Format::Csv), _) | (None, Some(OutputFormat::Csv)) => OutputFormat::Csv,
        (Some(Format::Json), _) | (None, Some(OutputFormat::Json)) => OutputFormat::Json,
        (None, None) if matches!(report, Report::Design(_)) => OutputFormat::Json,
        (None, None) => OutputFormat::Csv,
    };
    let out_path = common.out.clone().or_else(|| file.output.path.clone());
    let mut out: Box<dyn Write> = match &out_path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    write_report(&report, format, &mut out)?;
    out.flush().map_err(|e| Error::Config(format!("cannot write output: {e}")))?;

    if let Report::Design(outcome) = &report {
        if !outcome.feasible {
            log::warn!(
                "no feasible design after {} evaluations; reporting the best minimum voltage",
                outcome.iterations
            );
            if common.require_feasible {
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_report(report: &Report, format: OutputFormat, out: &mut dyn Write) -> miwg::Result<()> {
    let io_err = |e: io::Error| Error::Config(format!("cannot write output: {e}"));
    match (report, format) {
        (Report::Table(t), OutputFormat::Csv) => t.write_csv(out),
        (Report::Design(o), OutputFormat::Csv) => sweep::design_table(o).write_csv(out),
        (Report::Table(t), OutputFormat::Json) => write_json(&t.to_json(), out).map_err(io_err),
        (Report::Design(o), OutputFormat::Json) => write_json(&sweep::design_json(o), out).map_err(io_err),
    }
}

fn write_json(value: &serde_json::Value, out: &mut dyn Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}
