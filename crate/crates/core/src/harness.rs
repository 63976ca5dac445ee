//! Ground-truth coefficients and end-to-end experiment recipes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::eki::{self, EkiConfig, Evaluator, IdentityForward, Observation, RunReport, SigmaMode};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::plate::{PlateModel, PlateSystem};
use crate::prior::{PriorSampler, PriorSpec};
use crate::rng::{self, Purpose};

type Interval = (f64, f64, bool);

/// Piecewise-constant coefficient bands: `(value, x interval, y interval)`.
/// Intervals are `(lo, hi, lo_closed)`; every upper end is open.
const PIECEWISE_BANDS: [(f64, Interval, Interval); 5] = [
    (0.13, (0.1, 1.0, false), (0.0, 0.1, false)),
    (0.07, (0.5, 1.0, false), (0.1, 0.3, true)),
    (0.05, (0.0, 0.9, false), (0.3, 0.5, true)),
    (0.15, (0.0, 0.6, false), (0.5, 0.7, true)),
    (0.10, (0.0, 1.0, false), (0.7, 1.0, true)),
];

fn in_interval(v: f64, (lo, hi, lo_closed): Interval) -> bool {
    (if lo_closed { v >= lo } else { v > lo }) && v < hi
}

/// Piecewise coefficient at `(x, y)`; `fill` where no band applies.
pub fn piecewise_value(x: f64, y: f64, fill: f64) -> f64 {
    PIECEWISE_BANDS
        .iter()
        .find(|(_, xi, yi)| in_interval(x, *xi) && in_interval(y, *yi))
        .map_or(fill, |b| b.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    /// `k = e^{x+y}`
    Exponential,
    /// Five horizontal bands with values in `[0, 0.15]`; uncovered nodes
    /// get `fill` (0 by default).
    Piecewise {
        fill: f64,
    },
    Constant(f64),
    /// One value per interior node, row-major.
    Table(Vec<f64>),
}

impl TruthSpec {
    pub fn piecewise() -> Self {
        TruthSpec::Piecewise { fill: 0.0 }
    }
}

impl fmt::Display for TruthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthSpec::Exponential => f.write_str("exp"),
            TruthSpec::Piecewise { fill } if *fill == 0.0 => f.write_str("piecewise"),
            TruthSpec::Piecewise { fill } => write!(f, "piecewise:{fill:?}"),
            TruthSpec::Constant(v) => write!(f, "constant:{v:?}"),
            TruthSpec::Table(_) => f.write_str("table"),
        }
    }
}

impl FromStr for TruthSpec {
    type Err = Error;

    /// `exp`, `piecewise`, `piecewise:<fill>` or `constant:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(
                "truth",
                "expected exp, piecewise[:fill] or constant:<value>",
            )
        };
        let number = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(bad)
        };
        match s.split_once(':') {
            None if s == "exp" || s == "exponential" => Ok(TruthSpec::Exponential),
            None if s == "piecewise" => Ok(TruthSpec::piecewise()),
            Some(("piecewise", v)) => Ok(TruthSpec::Piecewise { fill: number(v)? }),
            Some(("constant", v)) => Ok(TruthSpec::Constant(number(v)?)),
            _ => Err(bad()),
        }
    }
}

pub fn truth_field(spec: &TruthSpec, grid: &Grid) -> Result<ScalarField> {
    match spec {
        TruthSpec::Exponential => Ok(ScalarField::from_fn(*grid, |x, y| libm::exp(x + y))),
        TruthSpec::Piecewise { fill } => Ok(ScalarField::from_fn(*grid, |x, y| {
            piecewise_value(x, y, *fill)
        })),
        TruthSpec::Constant(v) => Ok(ScalarField::constant(*grid, *v)),
        TruthSpec::Table(values) => ScalarField::new(*grid, values.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Reconstruct the deflection from its noisy copy (identity forward map).
    Direct,
    /// Reconstruct the subgrade coefficient from noisy deflections.
    Inverse,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Inverse => "inverse",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Mode::Direct),
            "inverse" => Ok(Mode::Inverse),
            _ => Err(Error::invalid("mode", "expected `direct` or `inverse`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    Exponential,
    Piecewise,
}

impl TestCase {
    pub fn truth(&self) -> TruthSpec {
        match self {
            TestCase::Exponential => TruthSpec::Exponential,
            TestCase::Piecewise => TruthSpec::piecewise(),
        }
    }

    /// Noise level of the noisy runs.
    pub fn default_gamma(&self) -> f64 {
        match self {
            TestCase::Exponential => 0.01,
            TestCase::Piecewise => 0.005,
        }
    }

    /// Prior scale used with noise level `gamma`.
    pub fn default_beta(&self, gamma: f64) -> f64 {
        match self {
            TestCase::Exponential => 1e6,
            TestCase::Piecewise if gamma == 0.0 => 1000.0,
            TestCase::Piecewise if gamma < 1e-3 => 3000.0,
            TestCase::Piecewise => 6000.0,
        }
    }

    /// The three noise levels of the reproduction runs, noisiest first.
    pub fn noise_levels(&self) -> [f64; 3] {
        match self {
            TestCase::Exponential => [0.01, 1e-8, 0.0],
            TestCase::Piecewise => [0.005, 1e-7, 0.0],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TestCase::Exponential => "exp",
            TestCase::Piecewise => "piecewise",
        }
    }
}

impl FromStr for TestCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" | "1" => Ok(TestCase::Exponential),
            "piecewise" | "pw" | "2" => Ok(TestCase::Piecewise),
            _ => Err(Error::invalid("test-case", "expected `exp` or `piecewise`")),
        }
    }
}

/// Everything needed to rerun an experiment bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub truth: TruthSpec,
    pub n: usize,
    pub gamma: f64,
    pub beta: f64,
    /// Diagonal shift inside the prior covariance.
    pub shift: f64,
    pub prior_mean: f64,
    pub plate: PlateModel,
    /// Ensemble size, step, iteration cap, `Σ`, seed and the remaining knobs.
    pub eki: EkiConfig,
}

impl ExperimentSpec {
    /// Test-case recipe at noise level `gamma`, ensemble size `members`.
    pub fn test_case(case: TestCase, mode: Mode, gamma: f64, members: usize, seed: u64) -> Self {
        ExperimentSpec {
            mode,
            truth: case.truth(),
            n: 10,
            gamma,
            beta: case.default_beta(gamma),
            shift: 0.0,
            prior_mean: 0.0,
            plate: PlateModel::default(),
            eki: EkiConfig {
                ensemble_size: members,
                seed,
                sigma_mode: SigmaMode::Gamma,
                ..EkiConfig::default()
            },
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::unit(self.n)
    }

    pub fn prior(&self) -> PriorSpec {
        PriorSpec {
            beta: self.beta,
            shift: self.shift,
            mean: self.prior_mean,
            seed: self.eki.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.n < crate::plate::MIN_STENCIL_N {
            return Err(Error::GridTooSmall {
                n: self.n,
                min: crate::plate::MIN_STENCIL_N,
            });
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "noise level must be >= 0"));
        }
        self.prior().validate()?;
        self.plate.validate(&grid)?;
        self.eki.validate()?;
        if let TruthSpec::Table(v) = &self.truth {
            if v.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.len(),
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<PlateSystem> {
        self.validate()?;
        PlateSystem::new(self.grid()?, self.plate)
    }
}

/// Ground truth, its clean deflection and the noisy observation of it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub truth: ScalarField,
    pub clean: ScalarField,
    pub observation: Observation,
}

/// `y = G(k†) + η`, `η ~ N(0, γ I)` from the observation stream of `seed`.
pub fn make_observation(spec: &ExperimentSpec, system: &PlateSystem) -> Result<SyntheticData> {
    let truth = truth_field(&spec.truth, system.grid())?;
    let clean = system.forward_map(&truth)?;
    let observation = add_noise(clean.values(), spec.gamma, spec.eki.seed)?;
    Ok(SyntheticData {
        truth,
        clean,
        observation,
    })
}

fn add_noise(clean: &[f64], gamma: f64, seed: u64) -> Result<Observation> {
    if gamma == 0.0 {
        return Ok(Observation::exact(clean.to_vec()));
    }
    let mut z = vec![0.0; clean.len()];
    rng::fill_standard_normal(&mut rng::stream(seed, Purpose::Observation, 0, 0), &mut z);
    let sd = libm::sqrt(gamma);
    let y = clean.iter().zip(&z).map(|(c, z)| c + sd * z).collect();
    // ‖η‖_Γ = ‖η‖₂ / √γ = ‖z‖₂
    Observation::new(y, gamma, crate::linalg::norm(&z))
}

#[derive(Debug, Clone)]
pub struct DirectOutcome {
    pub k_truth: ScalarField,
    pub w_true: ScalarField,
    pub observation: Observation,
    pub prior_sample: ScalarField,
    pub w_reconstructed: ScalarField,
    pub report: RunReport,
}

/// Solve for `w`, perturb it, and denoise it with EKI under the identity map.
pub fn run_direct_experiment<E: Evaluator>(
    spec: &ExperimentSpec,
    system: &PlateSystem,
    evaluator: &E,
) -> Result<DirectOutcome> {
    if spec.mode != Mode::Direct {
        return Err(Error::invalid(
            "mode",
            "direct experiment needs mode = direct",
        ));
    }
    let data = make_observation(spec, system)?;
    let grid = *system.grid();
    let model = IdentityForward { dim: grid.len() };
    let (members, prior_sample) = initial_members(spec, system)?;
    let report = eki::run_from_members(
        members,
        &data.observation,
        &spec.eki,
        &model,
        evaluator,
        Some(data.clean.values()),
    )?;
    Ok(DirectOutcome {
        k_truth: data.truth,
        w_reconstructed: ScalarField::new(grid, report.final_mean.clone())?,
        w_true: data.clean,
        observation: data.observation,
        prior_sample,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct InverseOutcome {
    pub k_truth: ScalarField,
    pub w_true: ScalarField,
    pub observation: Observation,
    pub prior_sample: ScalarField,
    pub k_reconstructed: ScalarField,
    pub report: RunReport,
}

impl InverseOutcome {
    pub fn truth_snake(&self) -> Vec<f64> {
        self.k_truth.snake_flatten()
    }

    pub fn reconstruction_snake(&self) -> Vec<f64> {
        self.k_reconstructed.snake_flatten()
    }
}

/// Observe `G(k†) + η` and reconstruct `k` with the plate forward map.
pub fn run_inverse_experiment<E: Evaluator>(
    spec: &ExperimentSpec,
    system: &PlateSystem,
    evaluator: &E,
) -> Result<InverseOutcome> {
    if spec.mode != Mode::Inverse {
        return Err(Error::invalid(
            "mode",
            "inverse experiment needs mode = inverse",
        ));
    }
    let data = make_observation(spec, system)?;
    let (members, prior_sample) = initial_members(spec, system)?;
    let report = eki::run_from_members(
        members,
        &data.observation,
        &spec.eki,
        system,
        evaluator,
        Some(data.truth.values()),
    )?;
    Ok(InverseOutcome {
        k_reconstructed: ScalarField::new(*system.grid(), report.final_mean.clone())?,
        k_truth: data.truth,
        w_true: data.clean,
        observation: data.observation,
        prior_sample,
        report,
    })
}

fn initial_members(
    spec: &ExperimentSpec,
    system: &PlateSystem,
) -> Result<(Vec<Vec<f64>>, ScalarField)> {
    spec.eki.validate()?;
    let sampler = PriorSampler::new(spec.prior(), system.biharmonic())?;
    let mut members = sampler.sample(spec.eki.ensemble_size);
    if let Some(floor) = spec.eki.k_floor {
        members.iter_mut().flatten().for_each(|v| *v = v.max(floor));
    }
    let first = ScalarField::new(*system.grid(), members[0].clone())?;
    Ok((members, first))
}

/// A named experiment belonging to a reproduction target.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureJob {
    pub name: String,
    pub figure: u32,
    pub spec: ExperimentSpec,
    pub note: Option<&'static str>,
}

pub const FIGURES: [u32; 6] = [3, 4, 5, 6, 7, 8];

/// Experiments of reproduction target `figure`. Desk scale caps the
/// ensemble at 100 members; `full_scale` uses 1000 where a target calls for it.
pub fn figure_jobs(figure: u32, full_scale: bool, seed: u64) -> Result<Vec<FigureJob>> {
    let big = if full_scale { 1000 } else { 100 };
    let job =
        |case: TestCase, mode: Mode, gamma: f64, members: usize, note: Option<&'static str>| {
            let spec = ExperimentSpec::test_case(case, mode, gamma, members, seed);
            let level = if gamma == 0.0 {
                String::from("noisefree")
            } else {
                alloc::format!("gamma{gamma:e}")
            };
            FigureJob {
                name: alloc::format!("fig{figure}_{}_{}_{level}", case.as_str(), mode.as_str()),
                figure,
                spec,
                note,
            }
        };
    let grid = |case: TestCase, members: usize, note| {
        case.noise_levels()
            .iter()
            .map(|&g| job(case, Mode::Inverse, g, members, note))
            .collect::<Vec<_>>()
    };
    match figure {
        3 => Ok(vec![job(
            TestCase::Exponential,
            Mode::Direct,
            0.01,
            big,
            None,
        )]),
        4 => Ok(grid(TestCase::Exponential, big, None)),
        5 => Ok(grid(
            TestCase::Exponential,
            big,
            Some("ensemble-size comparison (J=80 vs 1000, J=25 vs 1000) run at a single J"),
        )),
        6 => Ok(vec![job(
            TestCase::Piecewise,
            Mode::Direct,
            0.005,
            big,
            None,
        )]),
        7 => Ok(grid(TestCase::Piecewise, 100, None)),
        8 => Ok(grid(
            TestCase::Piecewise,
            100,
            Some("ensemble-size comparison (J=25 vs 100, J=25 vs 1000) run at a single J"),
        )),
        _ => Err(Error::invalid("figure", "reproducible figures are 3 to 8")),
    }
}

/// Deduplicated union of all figure jobs (figures 4/5 and 7/8 share runs).
pub fn all_jobs(full_scale: bool, seed: u64) -> Result<Vec<FigureJob>> {
    let mut out: Vec<FigureJob> = Vec::new();
    for fig in [3, 4, 6, 7] {
        out.extend(figure_jobs(fig, full_scale, seed)?);
    }
    Ok(out)
}
