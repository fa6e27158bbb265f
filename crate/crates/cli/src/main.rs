//! `jdsvd` command-line front end: solve, mimic and verify runs on MatrixMarket input.
//!
//! Exit codes: 0 success, 1 parse, I/O or refused input, 2 non-convergence or a
//! failed check, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jdsvd::diagnostics::{verify_run, write_verify_csv};
use jdsvd::driver::{solve, InnerMode, Solution, SolveStatus, SolverConfig, Variant};
use jdsvd::history::{write_history_csv, write_results_csv, write_vectors};
use jdsvd::study::mimic;
use jdsvd::{load_matrix_market, JdsvdError, SparseMatrix};

#[derive(Parser)]
#[command(name = "jdsvd", version, about = "Interior singular triplets by inexact harmonic Jacobi-Davidson SVD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the triplets closest to the target.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Write the computed singular vectors.
        #[arg(long)]
        vectors_out: Option<PathBuf>,
    },
    /// Compare loose inner tolerances with iterative exact inner solves.
    Mimic {
        #[command(flatten)]
        run: RunArgs,
        /// Run the three modes on separate threads.
        #[arg(long)]
        concurrent: bool,
    },
    /// Instrumented run checking the accuracy theory against a dense oracle.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        verify_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    H,
    Rh,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Inexact,
    IterExact,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    num: usize,
    #[arg(long, value_enum, default_value = "h")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1e-3)]
    eps_tilde: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 20)]
    max_dim: usize,
    #[arg(long, default_value_t = 3)]
    restart_keep: usize,
    #[arg(long, value_enum, default_value = "inexact")]
    inner_mode: InnerArg,
    /// Defaults to 2 (M + N).
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long, default_value_t = 3000)]
    max_outer: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    history_out: Option<PathBuf>,
    #[arg(long)]
    result_out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            num: self.num,
            variant: match self.variant {
                VariantArg::H => Variant::Harmonic,
                VariantArg::Rh => Variant::RefinedHarmonic,
            },
            eps_tilde: self.eps_tilde,
            tol: self.tol,
            max_dim: self.max_dim,
            restart_keep: self.restart_keep,
            inner_mode: match self.inner_mode {
                InnerArg::Inexact => InnerMode::Inexact,
                InnerArg::IterExact => InnerMode::IterExact,
            },
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            seed: self.seed,
        }
    }

    fn load(&self) -> Result<(SparseMatrix, SolverConfig), Failure> {
        let config = self.config();
        config.validate()?;
        Ok((load_matrix_market(&self.matrix)?, config))
    }
}

/// A message and the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<JdsvdError> for Failure {
    fn from(e: JdsvdError) -> Self {
        let code = match e {
            JdsvdError::Io { .. }
            | JdsvdError::Parse { .. }
            | JdsvdError::UnsupportedField(_)
            | JdsvdError::IndexOutOfBounds { .. }
            | JdsvdError::DimensionMismatch { .. }
            | JdsvdError::InvalidConfig(_)
            | JdsvdError::Precondition(_)
            | JdsvdError::TooLarge { .. } => 1,
            _ => 3,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn print_solution(sol: &Solution, secs: f64) {
    for (i, t) in sol.triplets.iter().enumerate() {
        println!("triplet {i}: theta = {:.16e}  ||r|| = {:.3e}", t.theta, t.resnorm);
    }
    println!(
        "I_out = {}  I_in = {}  secs = {:.3}  status = {:?}",
        sol.outer_iterations(),
        sol.inner_iterations(),
        secs,
        sol.status
    );
}

fn write_outputs(sol: &Solution, run: &RunArgs) -> Result<(), Failure> {
    if let Some(p) = &run.history_out {
        write_history_csv(&sol.history, p)?;
    }
    if let Some(p) = &run.result_out {
        write_results_csv(&sol.triplets, p)?;
    }
    Ok(())
}

fn not_converged(sol: &Solution, num: usize) -> Result<(), Failure> {
    if sol.status == SolveStatus::Converged {
        return Ok(());
    }
    Err(Failure {
        code: 2,
        msg: format!(
            "not converged: {} of {num} triplets after {} outer iterations",
            sol.triplets.len(),
            sol.outer_iterations()
        ),
    })
}

fn cmd_solve(run: &RunArgs, vectors_out: Option<&Path>) -> Result<(), Failure> {
    let (a, config) = run.load()?;
    let t = Instant::now();
    let sol = solve(&a, &config)?;
    print_solution(&sol, t.elapsed().as_secs_f64());
    write_outputs(&sol, run)?;
    if let Some(p) = vectors_out {
        write_vectors(&sol.triplets, p)?;
    }
    not_converged(&sol, config.num)
}

fn cmd_mimic(run: &RunArgs, concurrent: bool) -> Result<(), Failure> {
    let (a, config) = run.load()?;
    let report = mimic(&a, &config, concurrent)?;
    print!("{}", report.table());
    for (r, (ratio, agree)) in report
        .inexact()
        .iter()
        .zip(report.inner_ratios().into_iter().zip(report.outer_agreement()))
    {
        println!("{}: I_in ratio = {ratio:.3}  I_out within tolerance = {agree}", r.label);
    }
    Ok(())
}

fn cmd_verify(run: &RunArgs, verify_out: Option<&Path>) -> Result<(), Failure> {
    let (a, config) = run.load()?;
    let t = Instant::now();
    let out = verify_run(&a, &config)?;
    print_solution(&out.solution, t.elapsed().as_secs_f64());
    write_outputs(&out.solution, run)?;
    if let Some(p) = verify_out {
        write_verify_csv(&out.verifier.rows, p)?;
    }
    let v = &out.verifier;
    let checked = v.rows.iter().filter(|r| r.hypothesis_met).count();
    let failed = v.failures().count();
    println!(
        "checks: {} rows, {checked} with hypotheses met, {failed} failed, {} iterations skipped",
        v.rows.len(),
        v.skipped.len()
    );
    if let Some(r) = v.failures().next() {
        return Err(Failure {
            code: 2,
            msg: format!(
                "check {} failed at outer iteration {} (triplet {}): {:e} > {:e}",
                r.name, r.outer, r.triplet, r.lhs, r.rhs
            ),
        });
    }
    not_converged(&out.solution, config.num)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve { run, vectors_out } => cmd_solve(run, vectors_out.as_deref()),
        Command::Mimic { run, concurrent } => cmd_mimic(run, *concurrent),
        Command::Verify { run, verify_out } => cmd_verify(run, verify_out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
