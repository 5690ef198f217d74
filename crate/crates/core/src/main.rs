//! `virann` command line: build modules, represent annuli, run the suites.
//!
//! Exit codes: 0 success (for `verify`: every check passed), 1 schema or
//! input errors (including unknown suites), 2 non-inward elements, 3 at least
//! one failed check.

use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use virann::annulus::{ElementDoc, FramingOptions};
use virann::error::{Error, Result};
use virann::evolve::OdeOptions;
use virann::field::{qei_bound, DEFAULT_GRID, DEFAULT_GRIDTOL, DEFAULT_INWARD_TOL};
use virann::linalg::op_norm;
use virann::rep::{hn_norm, represent, run_config, SuiteConfig, SuiteModule, SuiteName, ALL_SUITES};
use virann::virmod::{ModuleData, ModuleParams, DEFAULT_NULLTOL};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "virann", version, about = "Annulus semigroup representations on truncated Virasoro modules")]
struct Cli {
    /// Central charge.
    #[arg(long = "c", global = true, env = "VIRANN_C", default_value_t = 2.0)]
    c: f64,
    /// Lowest weight.
    #[arg(long = "h", global = true, env = "VIRANN_H", default_value_t = 0.5)]
    h: f64,
    /// Level cutoff.
    #[arg(long = "N", global = true, env = "VIRANN_N", default_value_t = 12)]
    n: usize,
    /// ODE tolerance.
    #[arg(long, global = true, env = "VIRANN_TOL", default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, global = true, env = "VIRANN_SEED", default_value_t = 1)]
    seed: u64,
    /// Comma-separated suite names, or "all".
    #[arg(long, global = true, env = "VIRANN_SUITE", default_value = "all")]
    suite: String,
    #[arg(long, global = true, env = "VIRANN_FORMAT", value_enum, default_value = "json")]
    format: Format,
    /// Output directory; stdout when absent.
    #[arg(long, global = true, env = "VIRANN_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the truncated module (c, h, N) and write module.json.
    Build,
    /// Represent an element on a module file; writes the matrix and its bounds.
    Represent {
        #[arg(long)]
        module: PathBuf,
        #[arg(long)]
        element: PathBuf,
    },
    /// Run verification suites; the config file, when given, replaces the flags.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotInward { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Build => {
            let module = ModuleData::build(ModuleParams::new(cli.c, cli.h, cli.n), DEFAULT_NULLTOL)?;
            emit(cli.out.as_deref(), "module.json", &module.to_json())?;
            eprintln!("dims {:?} (total {})", module.dims, module.dim());
            Ok(ExitCode::SUCCESS)
        }
        Command::Represent { module, element } => {
            let module = ModuleData::from_json(&fs::read_to_string(module)?)?;
            let doc = ElementDoc::from_json(&fs::read_to_string(element)?)?;
            let e = doc.into_element(&FramingOptions::default())?;
            let rep = represent(&e, &module, &OdeOptions::with_tol(cli.tol))?;
            let mut mu = 0.0f64;
            for x in e.path.fields() {
                mu = mu.max(qei_bound(x, module.params.c, DEFAULT_GRID, DEFAULT_GRIDTOL, DEFAULT_INWARD_TOL)?);
            }
            let hn: Vec<serde_json::Value> = [0.0, 1.0, 2.0]
                .iter()
                .map(|&n| {
                    let b = hn_norm(&rep, &e, &module, n);
                    serde_json::json!({"order": b.order, "norm": b.norm, "field_norm": b.field_norm})
                })
                .collect();
            let bounds = serde_json::json!({
                "op_norm": op_norm(&(&rep.u / e.z)),
                "growth_bound": mu.exp(),
                "max_mu": mu,
                "hn_norms": hn,
            });
            match cli.format {
                Format::Json => {
                    let mut doc = rep.to_json();
                    doc["bounds"] = bounds;
                    emit(cli.out.as_deref(), "represent.json", &serde_json::to_string_pretty(&doc)?)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["i", "j", "re", "im"])?;
                    for i in 0..rep.u.nrows() {
                        for j in 0..rep.u.ncols() {
                            let z = rep.u[(i, j)];
                            w.write_record([i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])?;
                        }
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    emit(cli.out.as_deref(), "represent.csv", &String::from_utf8_lossy(&bytes))?;
                    emit(cli.out.as_deref(), "bounds.json", &serde_json::to_string_pretty(&bounds)?)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config } => {
            let cfg = match config {
                Some(path) => SuiteConfig::from_json(&fs::read_to_string(path)?)?,
                None => SuiteConfig {
                    module: SuiteModule { c: cli.c, h: cli.h, n: cli.n },
                    tol: cli.tol,
                    suites: parse_suites(&cli.suite)?,
                    seed: cli.seed,
                },
            };
            let report = run_config(&cfg)?;
            match cli.format {
                Format::Json => emit(cli.out.as_deref(), "report.json", &report.to_json())?,
                Format::Csv => emit(cli.out.as_deref(), "report.csv", &report.to_csv()?)?,
            }
            let failed: Vec<_> = report.failures().collect();
            for c in &failed {
                eprintln!("FAIL {}: residual {:e} vs bound {:e} ({})", c.id, c.residual, c.bound, c.anchor);
            }
            eprintln!("{} checks, {} failed", report.checks.len(), failed.len());
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn parse_suites(s: &str) -> Result<Vec<SuiteName>> {
    if s.trim() == "all" {
        return Ok(ALL_SUITES.to_vec());
    }
    s.split(',').map(|x| x.trim().parse()).collect()
}

fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(name), text)?;
        }
        None => {
            // a closed pipe (e.g. `| head`) is not an error
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}
