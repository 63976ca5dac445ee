//! Experiment execution and the output directory layout.
//!
//! An experiment directory holds:
//!
//! - `manifest`: inputs, then the output keys `eta_norm`, `stop_reason`,
//!   `iterations`, `frozen` (and `failure` when a solve broke down)
//! - `truth.csv`: the true coefficient `k†`
//! - `obs.csv`: the observed data `y`
//! - `prior_member0.csv`: the first prior draw
//! - `recon.csv`, `recon_snake.csv`: the final ensemble mean
//! - `truth_snake.csv`: the reconstruction target in snake order
//! - `report.csv`: one row per iteration
//! - `w_true.csv`: direct mode only, the clean deflection
//!
//! Inverse runs reconstruct `k`; direct runs reconstruct `w`.

use std::path::{Path, PathBuf};

use winkler_core::eki::{ReportRow, RunReport, StopReason};
use winkler_core::harness::{
    make_observation, run_direct_experiment, run_inverse_experiment, truth_field, ExperimentSpec,
    Mode, TruthSpec,
};
use winkler_core::plate::{PlateModel, PlateSystem};
use winkler_core::prior::PriorSampler;
use winkler_core::{Grid, ScalarField};

use crate::error::{Error, Result};
use crate::format;
use crate::manifest::{self, Manifest};
use crate::parallel::{pool, Parallel};

pub const MANIFEST: &str = "manifest";
pub const TRUTH: &str = "truth.csv";
pub const OBS: &str = "obs.csv";
pub const PRIOR_MEMBER0: &str = "prior_member0.csv";
pub const RECON: &str = "recon.csv";
pub const RECON_SNAKE: &str = "recon_snake.csv";
pub const TRUTH_SNAKE: &str = "truth_snake.csv";
pub const REPORT: &str = "report.csv";
pub const W_TRUE: &str = "w_true.csv";

/// Files written by a successful experiment, in addition to `manifest`.
pub fn output_files(mode: Mode) -> Vec<&'static str> {
    let mut files = vec![
        TRUTH,
        OBS,
        PRIOR_MEMBER0,
        RECON,
        RECON_SNAKE,
        TRUTH_SNAKE,
        REPORT,
    ];
    if mode == Mode::Direct {
        files.push(W_TRUE);
    }
    files
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub dir: PathBuf,
    pub stop_reason: StopReason,
    pub eta_norm: f64,
    pub rows: Vec<ReportRow>,
    pub frozen: usize,
    pub failure: Option<String>,
}

impl Summary {
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }
}

struct Outcome {
    k_truth: ScalarField,
    w_true: Option<ScalarField>,
    y: ScalarField,
    prior_sample: ScalarField,
    target: ScalarField,
    recon: ScalarField,
    report: RunReport,
}

fn execute(spec: &ExperimentSpec, system: &PlateSystem) -> winkler_core::Result<Outcome> {
    let grid = *system.grid();
    match spec.mode {
        Mode::Inverse => {
            let o = run_inverse_experiment(spec, system, &Parallel)?;
            Ok(Outcome {
                y: ScalarField::new(grid, o.observation.y().to_vec())?,
                target: o.k_truth.clone(),
                k_truth: o.k_truth,
                w_true: None,
                prior_sample: o.prior_sample,
                recon: o.k_reconstructed,
                report: o.report,
            })
        }
        Mode::Direct => {
            let o = run_direct_experiment(spec, system, &Parallel)?;
            Ok(Outcome {
                y: ScalarField::new(grid, o.observation.y().to_vec())?,
                target: o.w_true.clone(),
                k_truth: o.k_truth,
                w_true: Some(o.w_true),
                prior_sample: o.prior_sample,
                recon: o.w_reconstructed,
                report: o.report,
            })
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Run `spec` on `threads` workers and write the experiment directory.
///
/// A numerical breakdown is not an `Err`: the files produced so far are
/// written, the manifest records `stop_reason=solver_failure`, and the
/// summary carries the failure message.
pub fn run_experiment(
    spec: &ExperimentSpec,
    dir: &Path,
    threads: Option<usize>,
    extra: &[(&str, String)],
) -> Result<Summary> {
    let mut m = manifest::from_spec(spec)?;
    for (k, v) in extra {
        m.set(k, v);
    }
    let system = spec.system()?;
    create_dir(dir)?;
    let outcome = pool(threads)?.install(|| execute(spec, &system));
    let o = match outcome {
        Ok(o) => o,
        Err(e) if e.is_numerical() => {
            let msg = e.to_string();
            m.set("eta_norm", "nan")
                .set("stop_reason", StopReason::SolverFailure)
                .set("iterations", 0)
                .set("frozen", 0)
                .set("failure", &msg);
            format::write_report(&dir.join(REPORT), &[])?;
            m.write(&dir.join(MANIFEST))?;
            return Ok(Summary {
                dir: dir.to_owned(),
                stop_reason: StopReason::SolverFailure,
                eta_norm: f64::NAN,
                rows: Vec::new(),
                frozen: 0,
                failure: Some(msg),
            });
        }
        Err(e) => return Err(e.into()),
    };

    format::write_field(&dir.join(TRUTH), &o.k_truth)?;
    format::write_field(&dir.join(OBS), &o.y)?;
    format::write_field(&dir.join(PRIOR_MEMBER0), &o.prior_sample)?;
    format::write_field(&dir.join(RECON), &o.recon)?;
    format::write_series(&dir.join(RECON_SNAKE), &o.recon.snake_flatten())?;
    format::write_series(&dir.join(TRUTH_SNAKE), &o.target.snake_flatten())?;
    format::write_report(&dir.join(REPORT), &o.report.rows)?;
    if let Some(w) = &o.w_true {
        format::write_field(&dir.join(W_TRUE), w)?;
    }

    let r = &o.report;
    let failure = r.failure.as_ref().map(|e| e.to_string());
    m.set("eta_norm", format!("{:?}", r.eta_norm))
        .set("stop_reason", r.stop_reason)
        .set("iterations", r.iterations())
        .set("frozen", r.frozen.len());
    if let Some(msg) = &failure {
        m.set("failure", msg);
    }
    m.write(&dir.join(MANIFEST))?;
    Ok(Summary {
        dir: dir.to_owned(),
        stop_reason: r.stop_reason,
        eta_norm: r.eta_norm,
        rows: r.rows.clone(),
        frozen: r.frozen.len(),
        failure,
    })
}

/// Keys carried over from an old manifest when rerunning it.
const CARRIED_KEYS: [&str; 2] = ["figure", "note"];

/// Rerun the experiment recorded in `manifest_path` into `dir`.
pub fn rerun(manifest_path: &Path, dir: &Path, threads: Option<usize>) -> Result<Summary> {
    let m = Manifest::read(manifest_path)?;
    let spec = manifest::to_spec(&m)?;
    let extra: Vec<(&str, String)> = CARRIED_KEYS
        .iter()
        .filter_map(|&k| m.get(k).map(|v| (k, v.to_owned())))
        .collect();
    run_experiment(&spec, dir, threads, &extra)
}

/// Write prior draws as `member_<j>.csv` plus a `manifest` with the prior
/// hyperparameters.
pub fn dump_prior_ensemble(spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    let system = spec.system()?;
    let prior = spec.prior();
    let sampler = PriorSampler::new(prior, system.biharmonic())?;
    create_dir(dir)?;
    let grid = *system.grid();
    for j in 0..spec.eki.ensemble_size {
        let member = ScalarField::new(grid, sampler.sample_member(j))?;
        format::write_field(&dir.join(format!("member_{j}.csv")), &member)?;
    }
    let mut m = Manifest::new();
    m.set("seed", prior.seed)
        .set("beta", format!("{:?}", prior.beta))
        .set("shift", format!("{:?}", prior.shift))
        .set("J", spec.eki.ensemble_size);
    m.write(&dir.join(MANIFEST))
}

/// Inputs of a single forward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardJob {
    pub n: usize,
    pub k: TruthSpec,
    pub plate: PlateModel,
    pub dump_matrix: bool,
}

/// Solve the plate once; writes `manifest`, `k.csv`, `load.csv`, `w.csv`
/// and, on request, the scaled operator `D·B` as `matrix.csv`.
pub fn run_forward(job: &ForwardJob, dir: &Path) -> Result<ScalarField> {
    let grid = Grid::unit(job.n)?;
    let system = PlateSystem::new(grid, job.plate)?;
    let k = truth_field(&job.k, &grid)?;
    let w = system.forward_map(&k)?;
    create_dir(dir)?;
    format::write_field(&dir.join("k.csv"), &k)?;
    format::write_field(&dir.join("load.csv"), system.load())?;
    format::write_field(&dir.join("w.csv"), &w)?;
    if job.dump_matrix {
        let d = job.plate.rigidity;
        let triplets: Vec<_> = system
            .biharmonic()
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, d * v))
            .collect();
        format::write_triplets(&dir.join("matrix.csv"), &triplets)?;
    }
    let mut m = Manifest::new();
    m.set("mode", "forward").set("k", &job.k).set("n", job.n);
    plate_keys(&mut m, &job.plate);
    m.write(&dir.join(MANIFEST))?;
    Ok(w)
}

fn plate_keys(m: &mut Manifest, plate: &PlateModel) {
    m.set("D", format!("{:?}", plate.rigidity))
        .set("f", format!("{:?}", plate.force))
        .set("s", format!("{:?}", plate.precision))
        .set("p0x", format!("{:?}", plate.point.0))
        .set("p0y", format!("{:?}", plate.point.1));
}

/// Generate synthetic data only: `truth.csv`, `w_true.csv`, `obs.csv` and a
/// manifest recording the realized `eta_norm`.
pub fn run_observe(spec: &ExperimentSpec, dir: &Path) -> Result<f64> {
    let system = spec.system()?;
    let data = make_observation(spec, &system)?;
    create_dir(dir)?;
    format::write_field(&dir.join(TRUTH), &data.truth)?;
    format::write_field(&dir.join(W_TRUE), &data.clean)?;
    format::write_field(
        &dir.join(OBS),
        &ScalarField::new(*system.grid(), data.observation.y().to_vec())?,
    )?;
    let mut m = manifest::from_spec(spec)?;
    m.set("eta_norm", format!("{:?}", data.observation.eta_norm()));
    m.write(&dir.join(MANIFEST))?;
    Ok(data.observation.eta_norm())
}
