use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deltabose::oracles::LocalTimeEstimator;
use deltabose::Error;
use deltabose_cli::job::{Suite, SweepParam, SweepSpec};
use deltabose_cli::output::write_atomic;
use deltabose_cli::{run, Command, Estimator, Format, JobSpec};

const THREADS_VAR: &str = "DELTABOSE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "deltabose", version, about = "Propagator of the one-dimensional delta-Bose gas")]
struct Cli {
    /// Read the whole job from a JSON file instead of flags.
    #[arg(long, global = true, value_name = "PATH")]
    job: Option<PathBuf>,
    /// Output format: json, csv or dat (sweeps only).
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Write to this file (atomically) instead of standard output.
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Evaluate one method at one query.
    Eval {
        #[command(flatten)]
        query: QueryArgs,
        /// Method: tw, eigen, thm1, thm2, partition, zero-point, mc or pde.
        #[arg(long)]
        method: Option<Estimator>,
        /// Use the x = y = 0 determinant formula.
        #[arg(long)]
        zero_point: bool,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Evaluate several methods at one query and tabulate their differences.
    Compare {
        #[command(flatten)]
        query: QueryArgs,
        /// Comma-separated methods; defaults to every exact method for the sign of kappa.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Estimator>,
        /// Relative tolerance between exact methods.
        #[arg(long)]
        compare_tol: Option<f64>,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Evaluate over a list of times or couplings.
    Sweep {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Estimator>,
        /// Swept parameter: t or kappa.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values of the swept parameter.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Run a verification suite: identities, poles, completeness or decay.
    Verify {
        suite: Suite,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the large-time decay rate of P(0, 0, t).
    Decay {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        method: Option<Estimator>,
        /// Comma-separated times; defaults to 4,5,6,7,8.
        #[arg(long, value_delimiter = ',')]
        t_grid: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated ordered positions; defaults to the origin.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Option<Vec<f64>>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Target quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Include wall-clock timings in records.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_paths: Option<u64>,
    #[arg(long)]
    mc_steps: Option<usize>,
    #[arg(long)]
    mc_antithetic: bool,
    /// Local-time estimator: bridge or kernel.
    #[arg(long, value_parser = parse_estimator)]
    mc_estimator: Option<LocalTimeEstimator>,
    #[arg(long)]
    mc_bandwidth: Option<f64>,
    #[arg(long)]
    pde_du: Option<f64>,
    #[arg(long)]
    pde_dtau: Option<f64>,
    #[arg(long)]
    pde_half_width: Option<f64>,
}

fn parse_estimator(s: &str) -> Result<LocalTimeEstimator, String> {
    match s {
        "bridge" => Ok(LocalTimeEstimator::Bridge),
        "kernel" => Ok(LocalTimeEstimator::Kernel),
        _ => Err(format!("expected bridge or kernel, got {s:?}")),
    }
}

impl QueryArgs {
    fn apply(self, job: &mut JobSpec) {
        job.n = self.n;
        job.x = self.x;
        job.y = self.y;
        job.t = self.t;
        job.kappa = self.kappa;
        job.tol = self.tol;
        job.timing = self.timing;
    }
}

impl OracleArgs {
    fn apply(self, job: &mut JobSpec) {
        job.seed = self.seed;
        job.mc_paths = self.mc_paths;
        job.mc_steps = self.mc_steps;
        job.mc_antithetic = self.mc_antithetic.then_some(true);
        job.mc_estimator = self.mc_estimator;
        job.mc_bandwidth = self.mc_bandwidth;
        job.pde_du = self.pde_du;
        job.pde_dtau = self.pde_dtau;
        job.pde_half_width = self.pde_half_width;
    }
}

fn job_from_flags(cmd: Cmd) -> JobSpec {
    let mut job = JobSpec::default();
    match cmd {
        Cmd::Eval { query, method, zero_point, oracle } => {
            job.command = Some(Command::Eval);
            query.apply(&mut job);
            oracle.apply(&mut job);
            job.methods = method.into_iter().collect();
            job.zero_point = zero_point;
        }
        Cmd::Compare { query, methods, compare_tol, oracle } => {
            job.command = Some(Command::Compare);
            query.apply(&mut job);
            oracle.apply(&mut job);
            job.methods = methods;
            job.compare_tol = compare_tol;
        }
        Cmd::Sweep { query, methods, param, values, oracle } => {
            job.command = Some(Command::Sweep);
            query.apply(&mut job);
            oracle.apply(&mut job);
            job.methods = methods;
            job.sweep = Some(SweepSpec { param, values });
        }
        Cmd::Verify { suite, seed } => {
            job.command = Some(Command::Verify);
            job.suite = Some(suite);
            job.seed = seed;
        }
        Cmd::Decay { n, kappa, method, t_grid, tol } => {
            job.command = Some(Command::Decay);
            job.n = Some(n);
            job.kappa = Some(kappa);
            job.methods = method.into_iter().collect();
            job.t_grid = (!t_grid.is_empty()).then_some(t_grid);
            job.tol = tol;
        }
    }
    job
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::resource(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// `Ok(false)` when a verification report contains failures.
fn execute(cli: Cli) -> Result<bool, Error> {
    configure_threads()?;
    let mut job = match (cli.job, cli.command) {
        (Some(_), Some(_)) => return Err(Error::invalid("give either --job or a subcommand, not both")),
        (Some(path), None) => JobSpec::load(&path)?,
        (None, Some(cmd)) => job_from_flags(cmd),
        (None, None) => return Err(Error::invalid("missing subcommand; see --help")),
    };
    if let Some(f) = cli.format {
        job.format = f;
    }
    if let Some(o) = cli.output {
        job.output = Some(o);
    }
    let report = run(&job)?;
    let text = report.render(job.format)?;
    match &job.output {
        Some(path) => write_atomic(path, &text)
            .map_err(|e| Error::resource(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(report.passed())
}
