use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rk_ocp::oracle::{check_gradient, seeded_controls};
use rk_ocp::problem::load_problem;
use rk_ocp::ilqr::write_log_csv;
use rk_ocp::study::{discrete_reference, order_study, solve_problem, tableau_report, Target};
use rk_ocp::{ButcherTableau, Result};

const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "rk-ocp", version, about = "Runge-Kutta discretized optimal control: solves, order studies, tableau reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the trajectory CSV.
    Solve(SolveArgs),
    /// Measure control errors over a list of step sizes and fit the order.
    OrderStudy(OrderStudyArgs),
    /// Print a tableau, its symplectic partner and predicted stage orders.
    Tableau(TableauArgs),
    /// Compare the exact gradient of the discrete cost with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct Common {
    /// Builtin problem (example31, spring, pendulum) or problem file.
    #[arg(long)]
    problem: String,
    /// Builtin tableau name or tableau file.
    #[arg(long)]
    method: String,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    steps: usize,
    /// Trajectory CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration log CSV path (nonlinear problems).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct OrderStudyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    h_grid: Vec<f64>,
    /// `node` or `stage:<i>`.
    #[arg(long, default_value = "node")]
    target: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableauArgs {
    #[arg(long)]
    method: String,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(common: &Common) -> Result<(rk_ocp::problem::NamedProblem, ButcherTableau)> {
    Ok((load_problem(&common.problem)?, ButcherTableau::resolve(&common.method)?))
}

fn run_solve(args: &SolveArgs) -> Result<()> {
    let (named, tab) = load(&args.common)?;
    let out = solve_problem(&named.problem, &tab, args.steps)?;
    out.trajectory.write_csv(output(args.out.as_ref())?)?;
    if let (Some(path), Some(log)) = (&args.log, &out.log) {
        write_log_csv(log, BufWriter::new(File::create(path)?))?;
    }
    eprintln!("Jd = {:.5e}", out.cost);
    eprintln!("iterations = {}", out.iterations());
    Ok(())
}

fn run_order_study(args: &OrderStudyArgs) -> Result<()> {
    let (named, tab) = load(&args.common)?;
    let target: Target = args.target.parse()?;
    let reference = match named.reference {
        Some(_) => None,
        None => Some(discrete_reference(&named.problem, &args.h_grid)?),
    };
    let study = order_study(&named, &tab, &args.h_grid, target, reference.as_ref())?;
    study.write_csv(output(args.out.as_ref())?)?;
    eprintln!("{study}");
    Ok(())
}

fn run_gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let (named, tab) = load(&args.common)?;
    let prob = named.problem.as_nonlinear();
    let len = args.steps * tab.stages() * prob.control_dim();
    let u = seeded_controls(args.seed, len);
    let check = check_gradient(&prob, &tab, args.steps, &u)?;
    let pass = check.max_rel_error < GRADCHECK_TOL;
    println!("{check}");
    println!("{} (tolerance {GRADCHECK_TOL:e})", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args).map(|_| true),
        Command::OrderStudy(args) => run_order_study(args).map(|_| true),
        Command::Tableau(args) => ButcherTableau::resolve(&args.method).map(|tab| {
            print!("{}", tableau_report(&tab));
            true
        }),
        Command::Gradcheck(args) => run_gradcheck(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
