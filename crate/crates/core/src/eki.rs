//! Iterative ensemble Kalman inversion.
//!
//! Each iteration moves every member by the shared gain
//! `K = C^kw (C^ww + dt⁻¹ Γ)⁻¹` applied to its innovation
//! `y + ξ_j − G(k_j)`, with empirical covariances divided by `J`. A run
//! stops when the mean-prediction misfit `‖y − Ḡ‖_Γ` falls to the noise
//! level `‖η‖_Γ`, or after `N` iterations.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result, SolveContext};
use crate::linalg::{self, DenseCholesky};
use crate::plate::BiharmonicMatrix;
use crate::prior::{PriorSampler, PriorSpec};
use crate::rng::{self, Purpose};

/// Parameter-to-observation map `G`.
pub trait ForwardModel {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>>;
}

impl<M: ForwardModel + ?Sized> ForwardModel for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        (**self).evaluate(params)
    }
}

/// `G(x) = x`; turns the inversion into denoising of the data itself.
#[derive(Debug, Clone, Copy)]
pub struct IdentityForward {
    pub dim: usize,
}

impl ForwardModel for IdentityForward {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, params.len())?;
        Ok(params.to_vec())
    }
}

/// `G(x) = A·x` with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForward {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
}

impl LinearForward {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, a.len())?;
        Ok(LinearForward { rows, cols, a })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }
}

impl ForwardModel for LinearForward {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, params.len())?;
        Ok(self
            .a
            .chunks_exact(self.cols)
            .map(|row| linalg::dot(row, params))
            .collect())
    }
}

/// Observes only a subset of the inner model's outputs.
#[derive(Debug, Clone)]
pub struct MaskedForward<M> {
    inner: M,
    observed: Vec<usize>,
}

impl<M: ForwardModel> MaskedForward<M> {
    pub fn new(inner: M, observed: Vec<usize>) -> Result<Self> {
        if observed.iter().any(|&i| i >= inner.output_dim()) {
            return Err(Error::invalid("mask", "observed index out of range"));
        }
        Ok(MaskedForward { inner, observed })
    }
}

impl<M: ForwardModel> ForwardModel for MaskedForward<M> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.observed.len()
    }
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        let full = self.inner.evaluate(params)?;
        Ok(self.observed.iter().map(|&i| full[i]).collect())
    }
}

/// Evaluates the forward model on a batch of members.
///
/// Implementations may run members concurrently but must return results in
/// member order.
pub trait Evaluator {
    fn evaluate_all<M: ForwardModel + Sync + ?Sized>(
        &self,
        model: &M,
        members: &[Vec<f64>],
    ) -> Vec<Result<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Evaluator for Sequential {
    fn evaluate_all<M: ForwardModel + Sync + ?Sized>(
        &self,
        model: &M,
        members: &[Vec<f64>],
    ) -> Vec<Result<Vec<f64>>> {
        members.iter().map(|m| model.evaluate(m)).collect()
    }
}

/// Covariance `Σ` of the per-iteration data perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaMode {
    /// Data kept unperturbed.
    Zero,
    /// `Σ = Γ`.
    #[default]
    Gamma,
}

impl SigmaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SigmaMode::Zero => "zero",
            SigmaMode::Gamma => "gamma",
        }
    }
}

impl FromStr for SigmaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SigmaMode::Zero),
            "gamma" => Ok(SigmaMode::Gamma),
            _ => Err(Error::invalid("sigma_mode", "expected `zero` or `gamma`")),
        }
    }
}

/// What to do when a member's forward solve fails mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Keep the member's previous value and prediction for this iteration.
    #[default]
    Freeze,
    /// Stop the run with [`StopReason::SolverFailure`].
    Abort,
}

impl FailurePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailurePolicy::Freeze => "freeze",
            FailurePolicy::Abort => "abort",
        }
    }
}

impl FromStr for FailurePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freeze" => Ok(FailurePolicy::Freeze),
            "abort" => Ok(FailurePolicy::Abort),
            _ => Err(Error::invalid("policy", "expected `freeze` or `abort`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkiConfig {
    /// `J`
    pub ensemble_size: usize,
    pub dt: f64,
    /// `N`
    pub max_iter: usize,
    pub sigma_mode: SigmaMode,
    /// Stands in for `γ` in the gain and the misfit weight when `γ = 0`.
    pub gamma_reg: f64,
    pub seed: u64,
    /// Optional lower clamp on updated members; off by default.
    pub k_floor: Option<f64>,
    pub failure_policy: FailurePolicy,
}

impl Default for EkiConfig {
    fn default() -> Self {
        EkiConfig {
            ensemble_size: 100,
            dt: 1.0,
            max_iter: 2000,
            sigma_mode: SigmaMode::Gamma,
            gamma_reg: 1e-8,
            seed: 0,
            k_floor: None,
            failure_policy: FailurePolicy::Freeze,
        }
    }
}

impl EkiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::invalid("J", "ensemble needs at least 2 members"));
        }
        if !(self.dt >= 1.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "pseudo-time step must be >= 1"));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("N", "need at least one iteration"));
        }
        if !(self.gamma_reg > 0.0 && self.gamma_reg.is_finite()) {
            return Err(Error::invalid("gamma_reg", "must be positive"));
        }
        if let Some(f) = self.k_floor {
            if !f.is_finite() {
                return Err(Error::invalid("k_floor", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Data `y`, noise level `γ` (`Γ = γ·Id`) and the Γ-norm of the realized noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    y: Vec<f64>,
    gamma: f64,
    eta_norm: f64,
}

impl Observation {
    pub fn new(y: Vec<f64>, gamma: f64, eta_norm: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", "noise level must be >= 0"));
        }
        if !(eta_norm >= 0.0 && eta_norm.is_finite()) {
            return Err(Error::invalid("eta_norm", "must be >= 0"));
        }
        if gamma == 0.0 && eta_norm != 0.0 {
            return Err(Error::invalid("eta_norm", "must be 0 for noise-free data"));
        }
        Ok(Observation { y, gamma, eta_norm })
    }

    /// Noise-free data.
    pub fn exact(y: Vec<f64>) -> Self {
        Observation {
            y,
            gamma: 0.0,
            eta_norm: 0.0,
        }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta_norm
    }

    /// `γ` if positive, otherwise the regularization floor.
    pub fn effective_gamma(&self, gamma_reg: f64) -> f64 {
        if self.gamma > 0.0 {
            self.gamma
        } else {
            gamma_reg
        }
    }
}

/// Members `k_j` with their cached predictions `G(k_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Vec<f64>>,
    evaluations: Vec<Vec<f64>>,
    iteration: usize,
}

impl Ensemble {
    /// Evaluate the model on initial members; any failure is an error.
    pub fn initialize<M, E>(members: Vec<Vec<f64>>, model: &M, evaluator: &E) -> Result<Self>
    where
        M: ForwardModel + Sync + ?Sized,
        E: Evaluator,
    {
        let evaluations = evaluator
            .evaluate_all(model, &members)
            .into_iter()
            .enumerate()
            .map(|(j, r)| r.map_err(|e| e.at(Some(0), Some(j))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(members, evaluations, 0)
    }

    pub fn from_parts(
        members: Vec<Vec<f64>>,
        evaluations: Vec<Vec<f64>>,
        iteration: usize,
    ) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::EmptyEnsemble);
        };
        check_len(members.len(), evaluations.len())?;
        let (p, q) = (first.len(), evaluations[0].len());
        for (m, g) in members.iter().zip(&evaluations) {
            check_len(p, m.len())?;
            check_len(q, g.len())?;
        }
        Ok(Ensemble {
            members,
            evaluations,
            iteration,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn evaluations(&self) -> &[Vec<f64>] {
        &self.evaluations
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn param_dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn data_dim(&self) -> usize {
        self.evaluations[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.members)
    }

    pub fn mean_prediction(&self) -> Vec<f64> {
        mean_of(&self.evaluations)
    }
}

fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        linalg::axpy(1.0, r, &mut m);
    }
    let inv = 1.0 / rows.len() as f64;
    m.iter_mut().for_each(|v| *v *= inv);
    m
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// Empirical means and (divisor `J`) cross/auto covariances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean_k: Vec<f64>,
    pub mean_g: Vec<f64>,
    /// `p x q`
    pub c_kw: Vec<f64>,
    /// `q x q`
    pub c_ww: Vec<f64>,
}

impl EnsembleStats {
    pub fn param_dim(&self) -> usize {
        self.mean_k.len()
    }

    pub fn data_dim(&self) -> usize {
        self.mean_g.len()
    }
}

pub fn empirical_stats(ens: &Ensemble) -> Result<EnsembleStats> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (p, q) = (ens.param_dim(), ens.data_dim());
    let mean_k = ens.mean();
    let mean_g = ens.mean_prediction();
    let mut c_kw = vec![0.0; p * q];
    let mut c_ww = vec![0.0; q * q];
    let mut dk = vec![0.0; p];
    let mut dg = vec![0.0; q];
    for (k, g) in ens.members.iter().zip(&ens.evaluations) {
        for ((d, x), m) in dk.iter_mut().zip(k).zip(&mean_k) {
            *d = x - m;
        }
        for ((d, x), m) in dg.iter_mut().zip(g).zip(&mean_g) {
            *d = x - m;
        }
        for (a, &da) in dk.iter().enumerate() {
            linalg::axpy(da, &dg, &mut c_kw[a * q..(a + 1) * q]);
        }
        // Lower triangle only; mirrored below.
        for (a, &da) in dg.iter().enumerate() {
            linalg::axpy(da, &dg[..=a], &mut c_ww[a * q..a * q + a + 1]);
        }
    }
    let inv = 1.0 / ens.len() as f64;
    c_kw.iter_mut().for_each(|v| *v *= inv);
    for a in 0..q {
        for b in 0..=a {
            let v = c_ww[a * q + b] * inv;
            c_ww[a * q + b] = v;
            c_ww[b * q + a] = v;
        }
    }
    Ok(EnsembleStats {
        mean_k,
        mean_g,
        c_kw,
        c_ww,
    })
}

/// `K = C^kw (C^ww + dt⁻¹ γ I)⁻¹`, held as `C^kw` and a Cholesky factor of
/// the regularized covariance; never formed as an explicit inverse.
#[derive(Debug, Clone)]
pub struct KalmanGain {
    p: usize,
    q: usize,
    c_kw: Vec<f64>,
    factor: DenseCholesky,
}

pub fn kalman_gain(stats: &EnsembleStats, gamma_eff: f64, dt: f64) -> Result<KalmanGain> {
    let (p, q) = (stats.param_dim(), stats.data_dim());
    let mut s = stats.c_ww.clone();
    let ridge = gamma_eff / dt;
    for a in 0..q {
        s[a * q + a] += ridge;
    }
    let factor = DenseCholesky::new(q, &s).map_err(|e| Error::GainBreakdown {
        pivot: e.pivot,
        context: SolveContext::default(),
    })?;
    Ok(KalmanGain {
        p,
        q,
        c_kw: stats.c_kw.clone(),
        factor,
    })
}

impl KalmanGain {
    /// `K·v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut z = v.to_vec();
        self.factor.solve_in_place(&mut z);
        self.c_kw
            .chunks_exact(self.q)
            .map(|row| linalg::dot(row, &z))
            .collect()
    }

    /// Dense `p x q` gain, row-major; for inspection and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        // Kᵀ = S⁻¹ (C^kw)ᵀ, one solve per parameter row.
        let mut out = vec![0.0; self.p * self.q];
        for (a, row) in self.c_kw.chunks_exact(self.q).enumerate() {
            let mut z = row.to_vec();
            self.factor.solve_in_place(&mut z);
            out[a * self.q..(a + 1) * self.q].copy_from_slice(&z);
        }
        out
    }
}

/// `y_j = y + ξ_j`, `ξ_j ~ N(0, Σ)`, drawn from the stream keyed by
/// `(seed, iteration, j)`.
pub fn perturb_observations(
    obs: &Observation,
    mode: SigmaMode,
    seed: u64,
    iteration: usize,
    members: usize,
) -> Vec<Vec<f64>> {
    let sd = libm::sqrt(obs.gamma);
    (0..members)
        .map(|j| {
            let mut y = obs.y.clone();
            if mode == SigmaMode::Gamma && sd > 0.0 {
                let mut xi = vec![0.0; y.len()];
                let mut r = rng::stream(seed, Purpose::Perturb, iteration as u64, j as u64);
                rng::fill_standard_normal(&mut r, &mut xi);
                linalg::axpy(sd, &xi, &mut y);
            }
            y
        })
        .collect()
}

/// Result of one update.
#[derive(Debug, Clone)]
pub struct Step {
    pub ensemble: Ensemble,
    /// Members whose candidate failed to evaluate and were kept as they were.
    pub frozen: Vec<usize>,
}

/// One EKI update of every member with the gain of the current ensemble.
pub fn eki_step<M, E>(
    ens: &Ensemble,
    obs: &Observation,
    cfg: &EkiConfig,
    model: &M,
    evaluator: &E,
) -> Result<Step>
where
    M: ForwardModel + Sync + ?Sized,
    E: Evaluator,
{
    let n = ens.iteration;
    check_len(ens.data_dim(), obs.y.len())?;
    let stats = empirical_stats(ens)?;
    let gain = kalman_gain(&stats, obs.effective_gamma(cfg.gamma_reg), cfg.dt)
        .map_err(|e| e.at(Some(n), None))?;
    let targets = perturb_observations(obs, cfg.sigma_mode, cfg.seed, n, ens.len());

    let candidates: Vec<Vec<f64>> = ens
        .members
        .iter()
        .zip(&ens.evaluations)
        .zip(&targets)
        .map(|((k, g), y)| {
            let innovation: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - b).collect();
            let mut next = k.clone();
            linalg::axpy(1.0, &gain.apply(&innovation), &mut next);
            if let Some(floor) = cfg.k_floor {
                next.iter_mut().for_each(|v| *v = v.max(floor));
            }
            next
        })
        .collect();

    let results = evaluator.evaluate_all(model, &candidates);
    let mut members = Vec::with_capacity(ens.len());
    let mut evaluations = Vec::with_capacity(ens.len());
    let mut frozen = Vec::new();
    for (j, (cand, res)) in candidates.into_iter().zip(results).enumerate() {
        match res {
            Ok(g) => {
                members.push(cand);
                evaluations.push(g);
            }
            Err(e) if e.is_numerical() && cfg.failure_policy == FailurePolicy::Freeze => {
                frozen.push(j);
                members.push(ens.members[j].clone());
                evaluations.push(ens.evaluations[j].clone());
            }
            Err(e) => return Err(e.at(Some(n), Some(j))),
        }
    }
    Ok(Step {
        ensemble: Ensemble {
            members,
            evaluations,
            iteration: n + 1,
        },
        frozen,
    })
}

/// Per-member deviation/residual and the misfit of the mean prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `‖k_j − k̄‖ / ‖k̄‖`
    pub deviation: Vec<f64>,
    /// `‖k_j − k†‖ / ‖k†‖`, when the truth is known.
    pub residual: Option<Vec<f64>>,
    /// `‖y − Ḡ‖_Γ`
    pub theta: f64,
    /// `‖y − G(k_j)‖_Γ`
    pub member_theta: Vec<f64>,
}

fn mean_f(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl Metrics {
    pub fn deviation_mean(&self) -> f64 {
        mean_f(&self.deviation)
    }

    pub fn residual_mean(&self) -> Option<f64> {
        self.residual.as_deref().map(mean_f)
    }

    pub fn theta_min(&self) -> f64 {
        self.member_theta
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.member_theta
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Misfits are weighted by `γ^{-1/2}`, or by `gamma_reg^{-1/2}` for exact data.
pub fn metrics(
    ens: &Ensemble,
    obs: &Observation,
    truth: Option<&[f64]>,
    gamma_reg: f64,
) -> Result<Metrics> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    check_len(ens.data_dim(), obs.y.len())?;
    let mean = ens.mean();
    let mean_norm = linalg::norm(&mean);
    if mean_norm == 0.0 {
        return Err(Error::ZeroNorm("ensemble mean"));
    }
    let deviation = ens
        .members
        .iter()
        .map(|k| linalg::dist(k, &mean) / mean_norm)
        .collect();
    let residual = match truth {
        Some(t) => {
            check_len(ens.param_dim(), t.len())?;
            let tn = linalg::norm(t);
            if tn == 0.0 {
                return Err(Error::ZeroNorm("truth"));
            }
            Some(
                ens.members
                    .iter()
                    .map(|k| linalg::dist(k, t) / tn)
                    .collect(),
            )
        }
        None => None,
    };
    let w = 1.0 / libm::sqrt(obs.effective_gamma(gamma_reg));
    let theta = w * linalg::dist(&obs.y, &ens.mean_prediction());
    let member_theta = ens
        .evaluations
        .iter()
        .map(|g| w * linalg::dist(&obs.y, g))
        .collect();
    Ok(Metrics {
        deviation,
        residual,
        theta,
        member_theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIterations,
    SolverFailure,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::MaxIterations => "max_iterations",
            StopReason::SolverFailure => "solver_failure",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StopReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrepancy" => Ok(StopReason::Discrepancy),
            "max_iterations" => Ok(StopReason::MaxIterations),
            "solver_failure" => Ok(StopReason::SolverFailure),
            _ => Err(Error::invalid("stop_reason", "unknown value")),
        }
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    pub theta: f64,
    pub resid_mean: Option<f64>,
    pub dev_mean: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl ReportRow {
    fn new(iter: usize, m: &Metrics) -> Self {
        ReportRow {
            iter,
            theta: m.theta,
            resid_mean: m.residual_mean(),
            dev_mean: m.deviation_mean(),
            theta_min: m.theta_min(),
            theta_max: m.theta_max(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Row `n` describes the ensemble after `n` updates; row 0 is the prior.
    pub rows: Vec<ReportRow>,
    pub stop_reason: StopReason,
    pub eta_norm: f64,
    pub final_mean: Vec<f64>,
    pub final_ensemble: Option<Ensemble>,
    /// `(iteration, member)` pairs rejected under [`FailurePolicy::Freeze`].
    pub frozen: Vec<(usize, usize)>,
    pub failure: Option<Error>,
}

impl RunReport {
    pub fn last(&self) -> Option<&ReportRow> {
        self.rows.last()
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }
}

/// Sample the prior, then iterate from it. See [`run_from_members`].
#[allow(clippy::too_many_arguments)]
pub fn run_inversion<M, E>(
    obs: &Observation,
    cfg: &EkiConfig,
    prior: &PriorSpec,
    bih: &BiharmonicMatrix,
    model: &M,
    evaluator: &E,
    truth: Option<&[f64]>,
) -> Result<RunReport>
where
    M: ForwardModel + Sync + ?Sized,
    E: Evaluator,
{
    cfg.validate()?;
    let members = PriorSampler::new(*prior, bih)?.sample(cfg.ensemble_size);
    run_from_members(members, obs, cfg, model, evaluator, truth)
}

/// Iterate until the discrepancy principle fires, `N` updates are done, or a
/// solve fails.
///
/// Numerical failures end the run with [`StopReason::SolverFailure`] and
/// are returned inside the report; invalid input is an `Err`.
pub fn run_from_members<M, E>(
    members: Vec<Vec<f64>>,
    obs: &Observation,
    cfg: &EkiConfig,
    model: &M,
    evaluator: &E,
    truth: Option<&[f64]>,
) -> Result<RunReport>
where
    M: ForwardModel + Sync + ?Sized,
    E: Evaluator,
{
    cfg.validate()?;
    check_len(cfg.ensemble_size, members.len())?;
    check_len(model.output_dim(), obs.y.len())?;
    let mut report = RunReport {
        rows: Vec::new(),
        stop_reason: StopReason::MaxIterations,
        eta_norm: obs.eta_norm,
        final_mean: mean_of(&members),
        final_ensemble: None,
        frozen: Vec::new(),
        failure: None,
    };
    let mut ens = match Ensemble::initialize(members, model, evaluator) {
        Ok(e) => e,
        Err(e) if e.is_numerical() => {
            report.stop_reason = StopReason::SolverFailure;
            report.failure = Some(e);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    loop {
        let m = metrics(&ens, obs, truth, cfg.gamma_reg)?;
        report.rows.push(ReportRow::new(ens.iteration, &m));
        if obs.eta_norm > 0.0 && m.theta <= obs.eta_norm {
            report.stop_reason = StopReason::Discrepancy;
            break;
        }
        if ens.iteration >= cfg.max_iter {
            report.stop_reason = StopReason::MaxIterations;
            break;
        }
        match eki_step(&ens, obs, cfg, model, evaluator) {
            Ok(step) => {
                let n = ens.iteration;
                report.frozen.extend(step.frozen.iter().map(|&j| (n, j)));
                ens = step.ensemble;
            }
            Err(e) if e.is_numerical() => {
                report.stop_reason = StopReason::SolverFailure;
                report.failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    report.final_mean = ens.mean();
    report.final_ensemble = Some(ens);
    Ok(report)
}
