use clap::{Args, Parser, Subcommand};
use conelab::Error;
use conelab_cli::commands;
use conelab_cli::settings::{FileSettings, Format, Overrides, Settings};
use conelab_cli::suites;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "conelab",
    version,
    about = "Holonomy and null-plane verification for pseudo-Riemannian charts"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Rank tolerance of spans
    #[arg(long, global = true, env = "CONELAB_TOL")]
    tol: Option<f64>,
    /// Highest curvature derivative order used by holonomy spans
    #[arg(long, global = true, env = "CONELAB_JET_ORDER")]
    jet_order: Option<usize>,
    /// Number of sample points per chart
    #[arg(long, global = true, env = "CONELAB_GRID")]
    grid: Option<usize>,
    #[arg(long, global = true, env = "CONELAB_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, env = "CONELAB_FORMAT")]
    format: Option<Format>,
    /// Directory receiving report.json and report.csv
    #[arg(long, global = true, env = "CONELAB_OUT")]
    out: Option<PathBuf>,
    /// Record wall-clock time in the report
    #[arg(long, global = true, env = "CONELAB_TIMING")]
    timing: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite, or `all`
    Verify {
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Holonomy span of a chart at a point
    Holonomy {
        /// Catalog name with optional cone:/doubled:/exp: prefixes, or a chart TOML path
        #[arg(long)]
        chart: String,
        /// Comma-separated coordinates
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        /// Curvature derivative order; defaults to --jet-order
        #[arg(long)]
        order: Option<usize>,
    },
    /// Build and check the metric of a null-plane configuration
    BuildNullPlane {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Global {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            jet_order: self.jet_order,
            grid: self.grid,
            seed: self.seed,
            format: self.format,
            out: self.out.clone(),
            timing: self.timing,
        }
    }
}

struct Output {
    json: String,
    csv: String,
    pass: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn emit(out: &Output, settings: &Settings) -> Result<(), Error> {
    if let Some(dir) = &settings.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (name, body) in [("report.json", &out.json), ("report.csv", &out.csv)] {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    match settings.format {
        Format::Json => print!("{}", out.json),
        Format::Csv => print!("{}", out.csv),
    }
    Ok(())
}

fn elapsed(start: Instant, settings: &Settings) -> Option<u64> {
    settings.timing.then(|| start.elapsed().as_millis() as u64)
}

fn run(cli: Cli) -> Result<Output, Error> {
    let over = cli.global.overrides();
    let start = Instant::now();
    match cli.command {
        Command::Verify { suite, config } => {
            let file = config
                .as_deref()
                .map(FileSettings::load)
                .transpose()?
                .unwrap_or_default();
            let settings = Settings::resolve(&over, &file)?;
            let mut report = suites::run(&suite, &settings)?;
            report.timing_ms = elapsed(start, &settings);
            eprintln!("{}", report.summary());
            let out = Output {
                json: report.to_json(),
                csv: report.to_csv(),
                pass: report.pass,
            };
            emit(&out, &settings)?;
            Ok(out)
        }
        Command::Holonomy {
            chart,
            point,
            order,
        } => {
            let settings = Settings::resolve(&over, &FileSettings::default())?;
            let order = order.unwrap_or(settings.jet_order);
            let mut report = commands::holonomy(&chart, &point, order, &settings)?;
            report.timing_ms = elapsed(start, &settings);
            let out = Output {
                json: report.to_json(),
                csv: report.to_csv(),
                pass: true,
            };
            emit(&out, &settings)?;
            Ok(out)
        }
        Command::BuildNullPlane { config } => {
            let settings = Settings::resolve(&over, &FileSettings::default())?;
            let text = read(&config)?;
            let mut report = commands::build_null_plane(&text, &settings)?;
            report.timing_ms = elapsed(start, &settings);
            eprintln!("{}", report.summary());
            let out = Output {
                json: report.to_json(),
                csv: report.to_csv(),
                pass: report.pass,
            };
            emit(&out, &settings)?;
            Ok(out)
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) if out.pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
