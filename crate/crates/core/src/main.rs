use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hma_core::app::{
    emit_plotdata, fmt_f64, run_diagnose, run_gauduchon, run_solve, run_verify_pointwise, CliError,
};

#[derive(Parser)]
#[command(name = "hma", version, about = "Complex Monge-Ampere solver and estimate diagnostics on Hermitian tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write phi.hmaf, summary.toml, iterations.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the residual sup-norm target.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run estimate checks on a solution directory.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Report directory; defaults to the solution directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated check names.
        #[arg(long)]
        checks: Option<String>,
    },
    /// Compute the Gauduchon factor and metric classification.
    Gauduchon {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Emit CSV for plotting: moser, residual, or slice:x2=0,x3=0.
    Plotdata {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the pointwise torsion inequality.
    VerifyPointwise {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out, tol } => {
            let s = run_solve(&config, &out, tol)?;
            println!(
                "solved {}: b = {}, residual = {}, newton iterations = {}",
                s.name,
                fmt_f64(s.b),
                fmt_f64(s.final_residual),
                s.newton_iters
            );
            if let Some(e) = s.manufactured_error {
                println!("manufactured error = {}", fmt_f64(e));
            }
        }
        Command::Diagnose {
            config,
            solution,
            out,
            checks,
        } => {
            let r = run_diagnose(&config, &solution, out.as_deref(), checks.as_deref())?;
            for c in &r.checks {
                println!("{:<16} {}", c.name, if c.pass { "pass" } else { "FAIL" });
            }
        }
        Command::Gauduchon { config, out, tol } => {
            let s = run_gauduchon(&config, &out, tol)?;
            println!(
                "gauduchon {}: residual = {}, sup|u| = {}, kahler = {}, balanced = {}, gauduchon = {}",
                s.name,
                fmt_f64(s.residual),
                fmt_f64(s.u_sup_norm),
                s.classification.kahler,
                s.classification.balanced,
                s.classification.gauduchon
            );
        }
        Command::Plotdata { solution, kind, out } => {
            let path = emit_plotdata(&solution, &kind, out.as_deref())?;
            println!("{}", path.display());
        }
        Command::VerifyPointwise {
            n,
            trials,
            epsilon,
            seed,
            out,
        } => {
            let s = run_verify_pointwise(n, trials, epsilon, seed, out.as_deref())?;
            for ((row, v), ratio) in s.calibration.rows.iter().zip(&s.validation).zip(&s.scaling_ratio) {
                println!(
                    "k = {}: C = {}, validation worst = {}, violations = {}, torsion x2 ratio = {}",
                    row.k,
                    fmt_f64(row.c),
                    fmt_f64(v.worst),
                    v.violations,
                    fmt_f64(*ratio)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("error[config]: {}", e.to_string().lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}
