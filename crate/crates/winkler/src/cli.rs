//! `winkler` command line.
//!
//! Exit codes: 0 on success, 1 on a usage or input error, 2 when a linear
//! solve breaks down (after the partial outputs have been written).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use winkler_core::eki::{EkiConfig, FailurePolicy, SigmaMode, StopReason};
use winkler_core::harness::{self, ExperimentSpec, Mode, TestCase, TruthSpec};
use winkler_core::plate::PlateModel;

use crate::error::Error;
use crate::format;
use crate::manifest::Manifest;
use crate::run::{self, ForwardJob, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "winkler",
    version,
    about = "Clamped plate on a Winkler foundation: forward solves and ensemble Kalman inversion of the subgrade coefficient"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the plate for one coefficient field.
    #[command(allow_negative_numbers = true)]
    Forward(ForwardArgs),
    /// Generate synthetic (possibly noisy) deflection data.
    #[command(allow_negative_numbers = true)]
    Observe(ObserveArgs),
    /// Reconstruct k (or denoise w with --mode direct) by EKI.
    #[command(allow_negative_numbers = true)]
    Invert(InvertArgs),
    /// Run the experiment set of a reproduction target.
    #[command(allow_negative_numbers = true)]
    Reproduce(ReproduceArgs),
    /// Summarize an experiment directory.
    #[command(allow_negative_numbers = true)]
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory [default: a name derived from the inputs, under <out-root>]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "WINKLER_OUT", default_value = "winkler-out")]
    pub out_root: PathBuf,
}

impl OutputArgs {
    fn dir(&self, default_name: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.out_root.join(default_name))
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlateArgs {
    /// Flexural rigidity.
    #[arg(long = "D", default_value_t = 1.0, value_parser = positive)]
    pub rigidity: f64,
    /// Total load.
    #[arg(long = "f", default_value_t = 1.0, value_parser = positive)]
    pub force: f64,
    /// Precision of the Gaussian approximating the point load.
    #[arg(long = "s", default_value_t = 1e5, value_parser = positive)]
    pub precision: f64,
    /// Load point `x,y`.
    #[arg(long = "P0", default_value = "0.5,0.5", value_parser = point)]
    pub point: (f64, f64),
}

impl PlateArgs {
    fn model(&self) -> PlateModel {
        PlateModel {
            rigidity: self.rigidity,
            force: self.force,
            precision: self.precision,
            point: self.point,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Recipe supplying the truth and default gamma/beta: exp or piecewise.
    #[arg(long, default_value = "exp")]
    pub test_case: TestCase,
    /// Override the truth: exp, piecewise[:fill] or constant:<value>.
    #[arg(long)]
    pub truth: Option<TruthSpec>,
    /// Grid parameter; the interior has (n-1)^2 nodes.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Noise variance [default: the test case's noisy level].
    #[arg(long, value_parser = non_negative)]
    pub gamma: Option<f64>,
    /// Same as --gamma 0.
    #[arg(long, conflicts_with = "gamma")]
    pub noise_free: bool,
    /// Prior covariance scale [default: the test case's value for gamma].
    #[arg(long, value_parser = positive)]
    pub beta: Option<f64>,
    /// Diagonal shift added to the operator inside the prior covariance.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub shift: f64,
    /// Constant prior mean.
    #[arg(long, default_value_t = 0.0)]
    pub prior_mean: f64,
    /// Ensemble size.
    #[arg(long = "J", default_value_t = 100)]
    pub ensemble_size: usize,
    /// Maximum number of EKI updates.
    #[arg(long = "N", default_value_t = 2000)]
    pub max_iter: usize,
    /// Pseudo-time step.
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Covariance of the data perturbations: zero or gamma.
    #[arg(long, default_value = "gamma")]
    pub sigma_mode: SigmaMode,
    /// Gain regularization used in place of gamma for exact data.
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub gamma_reg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clip candidate coefficients from below.
    #[arg(long)]
    pub k_floor: Option<f64>,
    /// Abort on the first failed member solve instead of freezing it.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub plate: PlateArgs,
}

impl ExperimentArgs {
    pub fn spec(&self, mode: Mode) -> ExperimentSpec {
        let gamma = if self.noise_free {
            0.0
        } else {
            self.gamma.unwrap_or(self.test_case.default_gamma())
        };
        let mut spec =
            ExperimentSpec::test_case(self.test_case, mode, gamma, self.ensemble_size, self.seed);
        if let Some(t) = &self.truth {
            spec.truth = t.clone();
        }
        spec.n = self.n;
        spec.beta = self.beta.unwrap_or(spec.beta);
        spec.shift = self.shift;
        spec.prior_mean = self.prior_mean;
        spec.plate = self.plate.model();
        spec.eki = EkiConfig {
            ensemble_size: self.ensemble_size,
            dt: self.dt,
            max_iter: self.max_iter,
            sigma_mode: self.sigma_mode,
            gamma_reg: self.gamma_reg,
            seed: self.seed,
            k_floor: self.k_floor,
            failure_policy: if self.strict {
                FailurePolicy::Abort
            } else {
                FailurePolicy::Freeze
            },
        };
        spec
    }

    fn default_dir_name(&self, prefix: &str, gamma: f64) -> String {
        format!(
            "{prefix}_{}_gamma{gamma:e}_seed{}",
            self.test_case.as_str(),
            self.seed
        )
    }
}

#[derive(Debug, Clone, Args)]
pub struct ForwardArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Coefficient field: exp, piecewise[:fill] or constant:<value>.
    #[arg(long, default_value = "exp")]
    pub k: TruthSpec,
    /// Also write the scaled operator as `matrix.csv` triplets.
    #[arg(long)]
    pub dump_matrix: bool,
    #[command(flatten)]
    pub plate: PlateArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ObserveArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// inverse reconstructs k from w; direct denoises w itself.
    #[arg(long, default_value = "inverse")]
    pub mode: Mode,
    /// Rerun the experiment recorded in this manifest; other experiment flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Worker threads for member evaluation [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write the prior ensemble to `<out>/prior/`.
    #[arg(long)]
    pub dump_prior: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["figure", "all"]))]
pub struct ReproduceArgs {
    /// Figure number, 3 to 8.
    #[arg(long, value_parser = clap::value_parser!(u32).range(3..=8))]
    pub figure: Option<u32>,
    /// Every figure; jobs run concurrently.
    #[arg(long)]
    pub all: bool,
    /// Use J=1000 where a target calls for it instead of J=100.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads per job.
    #[arg(long)]
    pub threads: Option<usize>,
    /// List the jobs and their output directories without running them.
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Experiment directory.
    pub dir: PathBuf,
    /// Print every report row.
    #[arg(long)]
    pub rows: bool,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn non_negative(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err("must be >= 0".into())
        }
    })
}

fn positive(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err("must be > 0".into())
        }
    })
}

fn point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok((parse_f64(x)?, parse_f64(y)?))
}

/// Flag that sets the parameter a core validation error names.
fn flag_for(name: &str) -> String {
    match name {
        "mean" => "--prior-mean".into(),
        "domain" => "--n".into(),
        other => format!("--{}", other.replace('_', "-")),
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::Core(winkler_core::Error::InvalidParameter { name, reason }) => {
            format!("{}: {reason}", flag_for(name))
        }
        Error::Core(winkler_core::Error::GridTooSmall { .. }) => format!("--n: {e}"),
        other => other.to_string(),
    }
}

fn failure_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn print_summary(s: &Summary) {
    let last = s.rows.last();
    println!(
        "{}: stop_reason={} iterations={} theta={} eta_norm={} resid_mean={}",
        s.dir.display(),
        s.stop_reason,
        s.iterations(),
        last.map_or(f64::NAN, |r| r.theta),
        s.eta_norm,
        last.and_then(|r| r.resid_mean)
            .map_or_else(|| "-".to_owned(), |v| v.to_string()),
    );
    if s.frozen > 0 {
        println!("  {} member updates were rejected and frozen", s.frozen);
    }
}

fn summary_code(s: &Summary) -> i32 {
    if s.stop_reason == StopReason::SolverFailure {
        eprintln!(
            "error: {}",
            s.failure.as_deref().unwrap_or("solver failure")
        );
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    }
}

fn forward(args: &ForwardArgs) -> Result<i32, Error> {
    let dir = args.output.dir("forward");
    let job = ForwardJob {
        n: args.n,
        k: args.k.clone(),
        plate: args.plate.model(),
        dump_matrix: args.dump_matrix,
    };
    let w = run::run_forward(&job, &dir)?;
    let max = w.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{}: max deflection {max}", dir.display());
    Ok(EXIT_OK)
}

fn observe(args: &ObserveArgs) -> Result<i32, Error> {
    let spec = args.experiment.spec(Mode::Inverse);
    let dir = args
        .output
        .dir(&args.experiment.default_dir_name("observe", spec.gamma));
    let eta = run::run_observe(&spec, &dir)?;
    println!("{}: eta_norm={eta}", dir.display());
    Ok(EXIT_OK)
}

fn invert(args: &InvertArgs) -> Result<i32, Error> {
    let summary = match &args.manifest {
        Some(path) => {
            let dir = args.output.dir("rerun");
            run::rerun(path, &dir, args.threads)?
        }
        None => {
            let spec = args.experiment.spec(args.mode);
            let dir = args.output.dir(
                &args
                    .experiment
                    .default_dir_name(args.mode.as_str(), spec.gamma),
            );
            if args.dump_prior {
                run::dump_prior_ensemble(&spec, &dir.join("prior"))?;
            }
            run::run_experiment(&spec, &dir, args.threads, &[])?
        }
    };
    print_summary(&summary);
    Ok(summary_code(&summary))
}

fn reproduce(args: &ReproduceArgs) -> Result<i32, Error> {
    let root = args.output.dir("reproduce");
    let jobs = match args.figure {
        Some(fig) => harness::figure_jobs(fig, args.full_scale, args.seed)?,
        None => harness::all_jobs(args.full_scale, args.seed)?,
    };
    if args.dry_run {
        for job in &jobs {
            let s = &job.spec;
            println!(
                "{} mode={} truth={} gamma={:?} beta={:?} J={} -> {}",
                job.name,
                s.mode.as_str(),
                s.truth,
                s.gamma,
                s.beta,
                s.eki.ensemble_size,
                root.join(&job.name).display()
            );
        }
        return Ok(EXIT_OK);
    }
    let run_job = |job: &harness::FigureJob| {
        let mut extra = vec![("figure", job.figure.to_string())];
        if let Some(note) = job.note {
            extra.push(("note", note.to_owned()));
        }
        run::run_experiment(&job.spec, &root.join(&job.name), args.threads, &extra)
    };
    let results: Vec<_> = if args.all {
        jobs.par_iter().map(run_job).collect()
    } else {
        jobs.iter().map(run_job).collect()
    };
    let mut code = EXIT_OK;
    for r in results {
        let s = r?;
        print_summary(&s);
        code = code.max(summary_code(&s));
    }
    Ok(code)
}

fn report(args: &ReportArgs) -> Result<i32, Error> {
    let m = Manifest::read(&args.dir.join(run::MANIFEST))?;
    for key in [
        "mode",
        "truth",
        "n",
        "gamma",
        "beta",
        "J",
        "seed",
        "stop_reason",
        "iterations",
        "eta_norm",
        "frozen",
        "failure",
        "figure",
        "note",
    ] {
        if let Some(v) = m.get(key) {
            println!("{key:>12}  {v}");
        }
    }
    let rows = format::read_report(&args.dir.join(run::REPORT))?;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        println!("{:>12}  {} -> {}", "theta", first.theta, last.theta);
        if let (Some(a), Some(b)) = (first.resid_mean, last.resid_mean) {
            println!(
                "{:>12}  {a} -> {b} ({:+.2}%)",
                "resid_mean",
                100.0 * (b - a) / a
            );
        }
    }
    if args.rows {
        println!("{}", format::REPORT_HEADER.join(","));
        for r in &rows {
            let resid = r.resid_mean.map(|v| v.to_string()).unwrap_or_default();
            println!(
                "{},{},{},{},{},{}",
                r.iter, r.theta, resid, r.dev_mean, r.theta_min, r.theta_max
            );
        }
    }
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Forward(a) => forward(a),
        Command::Observe(a) => observe(a),
        Command::Invert(a) => invert(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Report(a) => report(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {}", describe(&e));
        failure_code(&e)
    })
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            code
        }
    }
}
