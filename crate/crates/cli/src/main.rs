use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lambdasym::commands::{self, CheckArgs, FindArgs, LimitArgs, ReduceArgs};
use lambdasym::expr::sample::{DEFAULT_SAMPLES, DEFAULT_SEED};
use lambdasym::fixtures;
use lambdasym::report::RunReport;
use lambdasym::scheme::Scheme;
use lambdasym::scheme_file::parse_scheme;

const EXIT_FAIL: u8 = 2;
const EXIT_USAGE: u8 = 1;

/// λ-symmetries of ordinary difference equations: check, search, reduce.
#[derive(Parser, Debug)]
#[command(name = "lambdasym", version)]
struct Cli {
    /// Worker threads for sampling (default: all cores).
    #[arg(long, global = true, env = "LAMBDASYM_THREADS")]
    threads: Option<usize>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Emit::Text)]
    emit: Emit,

    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Numeric value of the spacing h.
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether (ξ, φ̃, χ) is a λ-symmetry of a scheme.
    Check {
        /// Scheme file, or the name of a built-in fixture.
        scheme: String,
        #[arg(long, default_value = "0")]
        xi: String,
        #[arg(long, default_value = "1")]
        phi: String,
        #[arg(long, conflicts_with = "lambda", required_unless_present = "lambda")]
        chi: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Search for polynomial multipliers χ up to a degree.
    Find {
        scheme: String,
        #[arg(long, default_value_t = 1)]
        chi_degree: usize,
        /// Also search over polynomial φ̃.
        #[arg(long)]
        with_phi: bool,
        #[arg(long, default_value_t = 0, requires = "with_phi")]
        phi_degree: usize,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Reduce a three-point scheme by the invariant of χ and verify it.
    Reduce {
        scheme: String,
        #[arg(long, conflicts_with = "lambda", required_unless_present = "lambda")]
        chi: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value_t = 20)]
        verify_trials: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Dump a trajectory as CSV with columns n, u_n, v_n.
    Evolve {
        scheme: String,
        /// Initial values, comma separated, one per stencil point below the top.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        init: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// Multiplier whose invariant fills the v_n column.
        #[arg(long)]
        chi: Option<String>,
    },
    /// Convergence of the discrete prolongation to the continuous one.
    Limit {
        #[arg(long, default_value = "0")]
        xi: String,
        #[arg(long, default_value = "1")]
        phi: String,
        /// λ(x, u, u1).
        #[arg(long, default_value = "u")]
        lambda: String,
        /// Discrete multiplier to compare with exp(h*λ).
        #[arg(long)]
        chi: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        h_start: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn load_scheme(spec: &str) -> anyhow::Result<Scheme> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        return parse_scheme(&text).with_context(|| format!("in {spec}"));
    }
    if fixtures::scheme_text(spec).is_some() {
        return Ok(fixtures::scheme(spec)?);
    }
    let names: Vec<&str> = fixtures::SCHEME_FILES.iter().map(|(n, _)| *n).collect();
    bail!(
        "`{spec}` is neither a file nor a fixture (fixtures: {})",
        names.join(", ")
    )
}

fn emit(cli: &Cli, body: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn run_report(cli: &Cli) -> anyhow::Result<Option<RunReport>> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Check {
            scheme,
            xi,
            phi,
            chi,
            lambda,
            sampling: s,
        } => commands::check(
            &load_scheme(scheme)?,
            &CheckArgs {
                xi: xi.clone(),
                phi: phi.clone(),
                chi: chi.clone(),
                lambda: lambda.clone(),
                h: s.h,
                tol: s.tol,
                samples: s.samples,
                seed: s.seed,
            },
        )?,
        Command::Find {
            scheme,
            chi_degree,
            with_phi,
            phi_degree,
            sampling: s,
        } => commands::find(
            &load_scheme(scheme)?,
            &FindArgs {
                degree: *chi_degree,
                with_phi: *with_phi,
                phi_degree: *phi_degree,
                h: s.h,
                tol: s.tol,
                samples: s.samples,
                seed: s.seed,
            },
        )?,
        Command::Reduce {
            scheme,
            chi,
            lambda,
            verify_trials,
            steps,
            h,
            tol,
            seed,
        } => commands::reduce(
            &load_scheme(scheme)?,
            &ReduceArgs {
                chi: chi.clone(),
                lambda: lambda.clone(),
                h: *h,
                trials: *verify_trials,
                steps: *steps,
                tol: *tol,
                seed: *seed,
            },
        )?,
        Command::Limit {
            xi,
            phi,
            lambda,
            chi,
            h_start,
            levels,
            samples,
            seed,
        } => commands::limit(&LimitArgs {
            xi: xi.clone(),
            phi: phi.clone(),
            lambda: lambda.clone(),
            chi: chi.clone(),
            h_start: *h_start,
            levels: *levels,
            samples: *samples,
            seed: *seed,
        })?,
        Command::Evolve {
            scheme,
            init,
            steps,
            h,
            chi,
        } => {
            let rows = commands::evolve(&load_scheme(scheme)?, init, *steps, *h, chi.as_deref())?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["n", "u_n", "v_n"])?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    r.u.to_string(),
                    r.v.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            emit(cli, std::str::from_utf8(&w.into_inner()?)?)?;
            return Ok(None);
        }
    };
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Some(report))
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let Some(report) = run_report(cli)? else {
        return Ok(true);
    };
    let body = match cli.emit {
        Emit::Json => report.to_json() + "\n",
        Emit::Text => report.to_text(),
    };
    emit(cli, &body)?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
