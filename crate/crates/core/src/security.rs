//! Security SDPs: adversarial loss and error bounds, qubit baselines, dual
//! certificates for parallel repetition, and memory-limited card lifetimes.
//!
//! The adversary always has ideal devices. Detector efficiency enters only
//! through the honest loss budget `f_h = exp(−μ η_d η_m(t))`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{kron, kron_all, max_eigenvalue, min_eigenvalue, partial_trace, permute_subsystems, trace_product_re};
use crate::linalg::{ComplexMatrix, LinalgError, SubsystemDims};
use crate::operators::{build_n_state_ops, build_ops, AnswerBasis, OperatorError, OperatorSet, Scenario};
use crate::sdp::{self, SdpError, SdpOptions, SdpProblem, SdpSolution, SolveStatus};
use crate::states::{build_states, qubit_state, StateError};

#[derive(Debug, Error)]
pub enum SecurityError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver finished with status {status}: {detail}")]
    Solver { status: SolveStatus, detail: String },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Quantum-memory retrieval efficiency `η_m(t) = η_m(0)·exp(−t²/τ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub eta_m0: f64,
    /// Dephasing time in μs.
    pub tau: f64,
}

impl MemoryModel {
    pub fn efficiency(&self, t: f64) -> f64 {
        self.eta_m0 * (-(t / self.tau).powi(2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub phase_randomized: bool,
    pub mu: f64,
    pub eta_d: f64,
    pub error_target: f64,
    pub n: usize,
    pub memory: Option<MemoryModel>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, phase_randomized: bool, mu: f64) -> Self {
        Self { scenario, phase_randomized, mu, eta_d: 1.0, error_target: 0.0, n: 1, memory: None }
    }

    pub fn with_eta_d(mut self, eta_d: f64) -> Self {
        self.eta_d = eta_d;
        self
    }

    pub fn with_error(mut self, e: f64) -> Self {
        self.error_target = e;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_memory(mut self, memory: MemoryModel) -> Self {
        self.memory = Some(memory);
        self
    }

    pub fn validate(&self) -> Result<(), SecurityError> {
        let bad = |field: &str, v: f64| Err(SecurityError::Config(format!("{field} = {v} is out of range")));
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad("mu", self.mu);
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return bad("eta_d", self.eta_d);
        }
        if !(0.0..=0.5).contains(&self.error_target) {
            return bad("e", self.error_target);
        }
        if self.n == 0 {
            return Err(SecurityError::Config("n must be >= 1".into()));
        }
        if let Some(m) = &self.memory {
            if !(m.eta_m0 > 0.0 && m.eta_m0 <= 1.0) {
                return bad("eta_m0", m.eta_m0);
            }
            if !(m.tau.is_finite() && m.tau > 0.0) {
                return bad("tau", m.tau);
            }
        }
        Ok(())
    }

    /// Honest loss at storage time zero.
    pub fn honest_loss(&self) -> f64 {
        honest_loss(self.mu, self.eta_d, 0.0, self.memory.as_ref()).expect("t = 0 needs no memory")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub sdp: SdpOptions,
    pub size_budget: usize,
    /// Solves that stall before meeting the solver tolerances (problems
    /// without interior points, such as `e = 0`) are still accepted when
    /// gap and residuals are below this.
    pub stall_tolerance: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { sdp: SdpOptions::default(), size_budget: crate::operators::DEFAULT_SIZE_BUDGET, stall_tolerance: 1e-5 }
    }
}

/// Results of the two security SDPs at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub f_h: f64,
    pub f_d: Option<f64>,
    pub e_star: Option<f64>,
    pub secure: Option<bool>,
    pub gap: f64,
    pub iterations: usize,
    pub dual_conditions: Option<DualConditions>,
}

/// `exp(−μ η_d η_m(t))`, with `η_m ≡ 1` when no memory is modeled.
pub fn honest_loss(mu: f64, eta_d: f64, t: f64, memory: Option<&MemoryModel>) -> Result<f64, SecurityError> {
    if t < 0.0 || t.is_nan() {
        return Err(SecurityError::Config(format!("storage time {t} is negative")));
    }
    let eta_m = match memory {
        Some(m) => m.efficiency(t),
        None if t == 0.0 => 1.0,
        None => return Err(SecurityError::Config("storage time > 0 needs a memory model".into())),
    };
    Ok((-mu * eta_d * eta_m).exp())
}

/// Operators for the configured scenario, family and repetition count.
pub fn operators_for(config: &ScenarioConfig, budget: usize) -> Result<OperatorSet, SecurityError> {
    config.validate()?;
    let family = build_states(config.mu, config.phase_randomized)?;
    Ok(if config.n == 1 {
        build_ops(&family, config.scenario)
    } else {
        build_n_state_ops(&family, config.n, config.scenario, budget)?
    })
}

/// `min Tr(L1 J)` over channels with card-1 error `e`, card 1 at least as
/// bad as card 2 in both error and loss.
pub fn min_loss_problem(ops: &OperatorSet, e: f64) -> SdpProblem {
    SdpProblem::minimize(ops.l1.clone())
        .trace_preserving(ops.out_dim(), ops.in_dim())
        .equality(ops.e1.clone(), e)
        .less_equal(&ops.e2 - &ops.e1, 0.0)
        .less_equal(&ops.l2 - &ops.l1, 0.0)
}

/// `min Tr(E1 J)` with both cards' losses capped at `budget`.
pub fn min_error_problem(ops: &OperatorSet, budget: f64) -> SdpProblem {
    SdpProblem::minimize(ops.e1.clone())
        .trace_preserving(ops.out_dim(), ops.in_dim())
        .less_equal(&ops.e2 - &ops.e1, 0.0)
        .less_equal(ops.l1.clone(), budget)
        .less_equal(ops.l2.clone(), budget)
}

/// Card-symmetric equality form of the loss problem, whose duals carry the
/// parallel-repetition certificate.
pub fn certificate_problem(ops: &OperatorSet, e: f64) -> SdpProblem {
    SdpProblem::minimize(ops.l1.clone())
        .trace_preserving(ops.out_dim(), ops.in_dim())
        .equality(ops.e1.clone(), e)
        .equality(ops.e2.clone(), e)
        .equality(&ops.l1 - &ops.l2, 0.0)
}

fn require_optimal(sol: SdpSolution, what: &str, stall_tolerance: f64) -> Result<SdpSolution, SecurityError> {
    let stalled_close = matches!(sol.status, SolveStatus::MaxIterations | SolveStatus::NumericalFailure)
        && sol.gap <= stall_tolerance
        && sol.primal_infeasibility <= stall_tolerance
        && sol.dual_infeasibility <= stall_tolerance;
    if stalled_close {
        log::warn!("{what}: accepting {} iterate with gap {:.2e}", sol.status, sol.gap);
    }
    if sol.is_optimal() || stalled_close {
        Ok(sol)
    } else {
        Err(SecurityError::Solver {
            status: sol.status,
            detail: format!(
                "{what}: value {:.6e}, gap {:.2e}, pinf {:.2e}, dinf {:.2e} after {} iterations",
                sol.primal_value, sol.gap, sol.primal_infeasibility, sol.dual_infeasibility, sol.iterations
            ),
        })
    }
}

/// The `e = 0` loss problem restricted to `J = V Y V†`, where `V` is an
/// isometry onto the common kernel of `E1` and `E2`. Zero error forces `J`
/// onto that face, and the restricted problem in `Y` has interior points.
pub fn zero_error_problem(ops: &OperatorSet) -> Result<(SdpProblem, ComplexMatrix), SecurityError> {
    let (vals, u) = (&ops.e1 + &ops.e2).eigen()?;
    let top = vals.last().copied().unwrap_or(0.0).abs().max(1.0);
    let r = vals.iter().take_while(|v| **v <= 1e-12 * top).count();
    if r == 0 {
        return Err(SecurityError::Config("error operators have no common kernel".into()));
    }
    let v = ComplexMatrix::from_fn(u.rows(), r, |i, j| u[(i, j)]);
    let vh = v.adjoint();
    let restrict = |m: &ComplexMatrix| {
        let mut out = &vh * &(m * &v);
        out.symmetrize_in_place();
        out
    };
    let mut p = SdpProblem::minimize(restrict(&ops.l1));
    let dims = SubsystemDims::new(vec![ops.out_dim(), ops.in_dim()])?;
    for (a, rhs) in sdp::vectorize_constraints(&dims) {
        p = p.equality(restrict(&a), rhs);
    }
    p = p.less_equal(restrict(&(&ops.l2 - &ops.l1)), 0.0);
    Ok((p, v))
}

/// Minimizes the loss at error `e`. A zero-error solve that does not reach
/// the solver tolerances is redone on the face of [`zero_error_problem`].
pub fn solve_min_loss(ops: &OperatorSet, e: f64, opts: &AnalysisOptions) -> Result<SdpSolution, SecurityError> {
    let direct = sdp::solve(&min_loss_problem(ops, e), &opts.sdp)?;
    if e == 0.0 && !direct.is_optimal() {
        let (p, v) = zero_error_problem(ops)?;
        let mut sol = require_optimal(sdp::solve(&p, &opts.sdp)?, "zero-error loss minimization", opts.stall_tolerance)?;
        sol.x = &v * &(&sol.x * &v.adjoint());
        sol.x.symmetrize_in_place();
        sol.z = ComplexMatrix::zeros(0, 0);
        sol.partial_trace_dual = None;
        sol.dual_equality.clear();
        return Ok(sol);
    }
    require_optimal(direct, "loss minimization", opts.stall_tolerance)
}

pub fn solve_min_error(ops: &OperatorSet, budget: f64, opts: &AnalysisOptions) -> Result<SdpSolution, SecurityError> {
    require_optimal(sdp::solve(&min_error_problem(ops, budget), &opts.sdp)?, "error minimization", opts.stall_tolerance)
}

/// Minimal adversarial loss `f_d` at error `e`.
pub fn min_loss_sdp(config: &ScenarioConfig, opts: &AnalysisOptions) -> Result<SecurityReport, SecurityError> {
    let ops = operators_for(config, opts.size_budget)?;
    let sol = solve_min_loss(&ops, config.error_target, opts)?;
    let f_h = config.honest_loss();
    let f_d = sol.primal_value.clamp(0.0, 1.0);
    Ok(SecurityReport {
        f_h,
        f_d: Some(f_d),
        e_star: None,
        secure: Some(f_d > f_h),
        gap: sol.gap,
        iterations: sol.iterations,
        dual_conditions: None,
    })
}

/// Minimal adversarial error `e*` when both cards may lose at most `f_h`.
pub fn min_error_sdp(config: &ScenarioConfig, opts: &AnalysisOptions) -> Result<SecurityReport, SecurityError> {
    let ops = operators_for(config, opts.size_budget)?;
    let f_h = config.honest_loss();
    let sol = solve_min_error(&ops, f_h, opts)?;
    Ok(SecurityReport {
        f_h,
        f_d: None,
        e_star: Some(sol.primal_value.clamp(0.0, 1.0)),
        secure: None,
        gap: sol.gap,
        iterations: sol.iterations,
        dual_conditions: None,
    })
}

/// Joint-failure operator of the loss-free qubit attack on `out ⊗ in`.
pub fn qubit_error_operator(scenario: Scenario) -> (ComplexMatrix, usize, usize) {
    let id2 = ComplexMatrix::identity(2);
    let id4 = ComplexMatrix::identity(4);
    let betas: Vec<ComplexMatrix> = (0..4).map(|k| qubit_state(k, 2)).collect();
    match scenario {
        Scenario::Trusted => {
            let mut e = ComplexMatrix::zeros(8, 8);
            for b in &betas {
                let both = ComplexMatrix::projector(&kron(b, b));
                e.axpy(0.25, &kron(&(&id4 - &both), &ComplexMatrix::projector(b).conj()));
            }
            (e, 4, 2)
        }
        Scenario::Untrusted => {
            let ab = AnswerBasis::new();
            let accept = |i: usize, k: usize| match AnswerBasis::correct_answer(i, k) {
                Some(a) => ComplexMatrix::projector(&ComplexMatrix::basis_vector(2, a)),
                None => id2.clone(),
            };
            let mut e = ComplexMatrix::zeros(32, 32);
            for i in 0..2 {
                for j in 0..2 {
                    for (k, b) in betas.iter().enumerate() {
                        let pass = kron(&accept(i, k), &accept(j, k));
                        let input = kron_all(&[
                            &ComplexMatrix::projector(ab.challenge(i)),
                            &ComplexMatrix::projector(ab.challenge(j)),
                            &ComplexMatrix::projector(b).conj(),
                        ]);
                        e.axpy(1.0 / 16.0, &kron(&(&id4 - &pass), &input));
                    }
                }
            }
            (e, 4, 8)
        }
    }
}

/// Minimal probability that at least one of two forged qubit cards fails.
pub fn qubit_baseline(scenario: Scenario, opts: &SdpOptions) -> Result<f64, SecurityError> {
    let (e, dout, din) = qubit_error_operator(scenario);
    let p = SdpProblem::minimize(e).trace_preserving(dout, din);
    Ok(require_optimal(sdp::solve(&p, opts)?, "qubit baseline", 0.0)?.primal_value)
}

/// Success probabilities of the measure-and-guess forging strategy against
/// an untrusted terminal with qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyValue {
    pub equal_challenges: f64,
    pub unequal_challenges: f64,
    pub total: f64,
}

/// Case analysis of the strategy: equal challenges are answered honestly and
/// the outcome duplicated; unequal challenges get a measurement in a random
/// basis `g`, whose outcome answers challenge `g` while the other challenge
/// gets a random bit.
pub fn strategy_untrusted_qubit() -> StrategyValue {
    let states: Vec<ComplexMatrix> = (0..4).map(|k| qubit_state(k, 2)).collect();
    // challenge c checks the answer only when it matches the state's basis
    let accepted = |c: usize, k: usize, bit: usize| AnswerBasis::correct_answer(c, k).is_none_or(|a| a == bit);
    let outcome_prob = |g: usize, o: usize, k: usize| crate::linalg::inner(&states[g + 2 * o], &states[k]).norm_sqr();

    let (mut equal, mut unequal) = (0.0, 0.0);
    for k in 0..4 {
        for c in 0..2 {
            for o in 0..2 {
                let p = outcome_prob(c, o, k);
                if accepted(c, k, o) {
                    equal += 0.25 * 0.5 * p;
                }
            }
        }
        for (ci, cj) in [(0usize, 1usize), (1, 0)] {
            for g in 0..2 {
                let other = if g == ci { cj } else { ci };
                for o in 0..2 {
                    for r in 0..2 {
                        let p = 0.5 * outcome_prob(g, o, k) * 0.5;
                        if accepted(g, k, o) && accepted(other, k, r) {
                            unequal += 0.25 * 0.5 * p;
                        }
                    }
                }
            }
        }
    }
    StrategyValue { equal_challenges: equal, unequal_challenges: unequal, total: 0.5 * equal + 0.5 * unequal }
}

/// Dual variables of the card-symmetric loss problem and the checks made on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConditions {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d_diagonal: Vec<f64>,
    pub max_offdiagonal: f64,
    pub trace_d: f64,
    /// `|Tr(D) − (s_p − (d1+d2)e)|`.
    pub trace_identity_residual: f64,
    /// Largest eigenvalue of `d1 E1 + d2 E2 + d3 (L1−L2) + 1⊗D − L1`.
    pub lmi_max_eigenvalue: f64,
    pub primal_value: f64,
    pub gap: f64,
    pub valid: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateTolerances {
    pub d3: f64,
    pub offdiagonal: f64,
    pub trace_identity: f64,
    pub lmi: f64,
    pub gap: f64,
}

impl Default for CertificateTolerances {
    fn default() -> Self {
        Self { d3: 1e-3, offdiagonal: 1e-6, trace_identity: 1e-4, lmi: 1e-8, gap: 1e-6 }
    }
}

/// Checks a dual point `(d1, d2, d3, D)` against the conditions that make it
/// a certificate for every repetition count.
#[allow(clippy::too_many_arguments)]
pub fn check_certificate(
    ops: &OperatorSet,
    e: f64,
    primal_value: f64,
    gap: f64,
    d: [f64; 3],
    dmat: &ComplexMatrix,
    tol: &CertificateTolerances,
) -> Result<DualConditions, SecurityError> {
    let [d1, d2, d3] = d;
    let mut lmi = kron(&ComplexMatrix::identity(ops.out_dim()), dmat);
    lmi.axpy(d1, &ops.e1);
    lmi.axpy(d2, &ops.e2);
    lmi.axpy(d3, &(&ops.l1 - &ops.l2));
    lmi.axpy(-1.0, &ops.l1);
    lmi.symmetrize_in_place();
    let lmi_max = max_eigenvalue(&lmi)?;
    let n = dmat.rows();
    let mut offdiag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                offdiag = offdiag.max(dmat[(i, j)].norm());
            }
        }
    }
    let trace_d = dmat.trace().re;
    let residual = (trace_d - (primal_value - (d1 + d2) * e)).abs();

    let mut failures = Vec::new();
    if d1 >= 0.0 {
        failures.push(format!("d1 = {d1:.3e} is not negative"));
    }
    if d2 >= 0.0 {
        failures.push(format!("d2 = {d2:.3e} is not negative"));
    }
    if (d3 - 0.5).abs() > tol.d3 {
        failures.push(format!("d3 = {d3:.6} differs from 1/2"));
    }
    if offdiag > tol.offdiagonal {
        failures.push(format!("D has off-diagonal entry {offdiag:.3e}"));
    }
    if residual > tol.trace_identity {
        failures.push(format!("trace identity residual {residual:.3e}"));
    }
    if lmi_max > tol.lmi {
        failures.push(format!("LMI eigenvalue {lmi_max:.3e} is positive"));
    }
    if gap > tol.gap {
        failures.push(format!("duality gap {gap:.3e}"));
    }
    Ok(DualConditions {
        d1,
        d2,
        d3,
        d_diagonal: (0..n).map(|i| dmat[(i, i)].re).collect(),
        max_offdiagonal: offdiag,
        trace_d,
        trace_identity_residual: residual,
        lmi_max_eigenvalue: lmi_max,
        primal_value,
        gap,
        valid: failures.is_empty(),
        failures,
    })
}

/// Solves the card-symmetric loss problem and extracts its dual certificate.
pub fn dual_certificate(
    config: &ScenarioConfig,
    opts: &AnalysisOptions,
    tol: &CertificateTolerances,
) -> Result<DualConditions, SecurityError> {
    let ops = operators_for(config, opts.size_budget)?;
    let sol = sdp::solve(&certificate_problem(&ops, config.error_target), &opts.sdp)?;
    if matches!(sol.status, SolveStatus::Infeasible | SolveStatus::NumericalFailure) {
        return Err(SecurityError::Solver { status: sol.status, detail: "certificate problem".into() });
    }
    certificate_from_solution(&ops, config.error_target, &sol, tol)
}

/// Reads `(d1, d2, d3, D)` off a solution of [`certificate_problem`].
pub fn certificate_from_solution(
    ops: &OperatorSet,
    e: f64,
    sol: &SdpSolution,
    tol: &CertificateTolerances,
) -> Result<DualConditions, SecurityError> {
    let y = &sol.dual_equality;
    if y.len() != 3 {
        return Err(SecurityError::Config("solution does not come from the certificate problem".into()));
    }
    let dmat = sol
        .partial_trace_dual
        .as_ref()
        .ok_or_else(|| SecurityError::Config("solution has no partial-trace dual".into()))?;
    let abs_gap = (sol.primal_value - sol.dual_value).abs();
    let mut out = check_certificate(ops, e, sol.primal_value, abs_gap, [y[0], y[1], y[2]], dmat, tol)?;
    if !sol.is_optimal() {
        out.valid = false;
        out.failures.push(format!("solver status {}", sol.status));
    }
    Ok(out)
}

/// Evidence that correlating two positions does not help the adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCheck {
    pub f_d_single: f64,
    pub tensor_objective: f64,
    pub trace_preservation_residual: f64,
    pub error_residual: f64,
    /// Positive parts of `Tr((E2−E1)J)` and `Tr((L2−L1)J)`.
    pub ordering_violation: f64,
    pub min_eigenvalue: f64,
    pub full_optimum: Option<f64>,
}

impl ParallelCheck {
    pub fn max_residual(&self) -> f64 {
        self.trace_preservation_residual
            .max(self.error_residual)
            .max(self.ordering_violation)
            .max((-self.min_eigenvalue).max(0.0))
    }
}

/// Builds `J ⊗ J` from the single-position optimum, evaluates it in the
/// two-position problem, and optionally solves that problem outright.
pub fn tensor_parallel_check(
    config: &ScenarioConfig,
    opts: &AnalysisOptions,
    full_solve: bool,
) -> Result<ParallelCheck, SecurityError> {
    if config.n != 2 {
        return Err(SecurityError::Config(format!("parallel check needs n = 2, got {}", config.n)));
    }
    let single_cfg = ScenarioConfig { n: 1, ..config.clone() };
    let ops1 = operators_for(&single_cfg, opts.size_budget)?;
    let ops2 = operators_for(config, opts.size_budget)?;
    let e = config.error_target;
    let sol = solve_min_loss(&ops1, e, opts)?;
    let j1 = &sol.x;

    // (c1, c2, in, c1', c2', in') → (c1, c1', c2, c2', in, in')
    let f = ops1.dims.factors();
    let (a, b, c) = (f[0], f[1], ops1.in_dim());
    let jj = kron(j1, j1);
    let dims6 = SubsystemDims::new(vec![a, b, c, a, b, c])?;
    let j2 = permute_subsystems(&jj, &dims6, &[0, 3, 1, 4, 2, 5])?;

    let reduced = partial_trace(&j2, &SubsystemDims::new(vec![ops2.out_dim(), ops2.in_dim()])?, &[1])?;
    let tp = (&reduced - &ComplexMatrix::identity(ops2.in_dim())).max_abs();
    let e1 = trace_product_re(&ops2.e1, &j2);
    let e2 = trace_product_re(&ops2.e2, &j2);
    let l1 = trace_product_re(&ops2.l1, &j2);
    let l2 = trace_product_re(&ops2.l2, &j2);
    let full_optimum = if full_solve { Some(solve_min_loss(&ops2, e, opts)?.primal_value) } else { None };
    Ok(ParallelCheck {
        f_d_single: sol.primal_value,
        tensor_objective: l1,
        trace_preservation_residual: tp,
        error_residual: (e1 - e).abs(),
        ordering_violation: (e2 - e1).max(l2 - l1).max(0.0),
        min_eigenvalue: min_eigenvalue(&j2)?,
        full_optimum,
    })
}

/// Largest storage time `t` (μs) with `f_h(t) < f_d`, to 1e-3 μs. Zero when
/// the card is insecure from the start.
pub fn secure_lifetime(mu: f64, eta_d: f64, memory: &MemoryModel, f_d: f64) -> Result<f64, SecurityError> {
    let fh = |t: f64| honest_loss(mu, eta_d, t, Some(memory));
    if fh(0.0)? >= f_d {
        return Ok(0.0);
    }
    if f_d >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0, memory.tau);
    while fh(hi)? < f_d {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if fh(mid)? < f_d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Solves for `f_d` and converts it to a lifetime.
pub fn secure_lifetime_for(config: &ScenarioConfig, opts: &AnalysisOptions) -> Result<(f64, f64), SecurityError> {
    let memory = config
        .memory
        .ok_or_else(|| SecurityError::Config("lifetime needs a memory model".into()))?;
    let f_d = min_loss_sdp(config, opts)?.f_d.expect("loss report carries f_d");
    Ok((f_d, secure_lifetime(config.mu, config.eta_d, &memory, f_d)?))
}

/// Margins `f_d − f_h` at or below this count as insecure. Past the
/// crossing the zero-error optimum sits on `f_d = f_h` itself, so the sign of
/// the raw margin there is solver noise.
pub const MARGIN_RESOLUTION: f64 = 1e-6;

/// μ at which `f_d(μ) = f_h(μ)`: a uniform grid locates the first point
/// whose margin drops to [`MARGIN_RESOLUTION`], then bisection narrows it to
/// `tol`.
pub fn secure_crossing(
    base: &ScenarioConfig,
    mu_lo: f64,
    mu_hi: f64,
    points: usize,
    tol: f64,
    opts: &AnalysisOptions,
) -> Result<Option<f64>, SecurityError> {
    let margin = |mu: f64| -> Result<f64, SecurityError> {
        let cfg = ScenarioConfig { mu, ..base.clone() };
        let r = min_loss_sdp(&cfg, opts)?;
        Ok(r.f_d.expect("loss report carries f_d") - r.f_h)
    };
    let points = points.max(2);
    let grid: Vec<f64> = (0..points).map(|i| mu_lo + (mu_hi - mu_lo) * i as f64 / (points - 1) as f64).collect();
    let mut prev = (grid[0], margin(grid[0])?);
    for &mu in &grid[1..] {
        let cur = (mu, margin(mu)?);
        if prev.1 > MARGIN_RESOLUTION && cur.1 <= MARGIN_RESOLUTION {
            let (mut lo, mut hi) = (prev.0, cur.0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if margin(mid)? > MARGIN_RESOLUTION {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        prev = cur;
    }
    Ok(None)
}

/// One family of analyses in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub phase_randomized: bool,
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.scenario, if self.phase_randomized { "/randomized" } else { "" })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub mu: Vec<f64>,
    pub e: Vec<f64>,
    pub eta_d: Vec<f64>,
}

/// One sweep point. Missing values mark a failed solve, described in `failure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: Scenario,
    pub phase_randomized: bool,
    pub mu: f64,
    pub eta_d: f64,
    pub e: f64,
    pub f_h: f64,
    pub f_d: Option<f64>,
    pub e_star: Option<f64>,
    pub gap: Option<f64>,
    pub secure: Option<bool>,
    pub t_star: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepTasks {
    pub min_loss: bool,
    pub min_error: bool,
}

impl Default for SweepTasks {
    fn default() -> Self {
        Self { min_loss: true, min_error: true }
    }
}

/// Runs the requested SDPs at one parameter point. Failures are recorded in
/// the row instead of aborting.
pub fn analyze_point(cfg: &ScenarioConfig, tasks: SweepTasks, opts: &AnalysisOptions) -> SweepRow {
    let mut row = SweepRow {
        scenario: cfg.scenario,
        phase_randomized: cfg.phase_randomized,
        mu: cfg.mu,
        eta_d: cfg.eta_d,
        e: cfg.error_target,
        f_h: f64::NAN,
        f_d: None,
        e_star: None,
        gap: None,
        secure: None,
        t_star: None,
        failure: None,
    };
    if let Err(err) = cfg.validate() {
        row.failure = Some(err.to_string());
        return row;
    }
    row.f_h = cfg.honest_loss();
    let ops = match operators_for(cfg, opts.size_budget) {
        Ok(o) => o,
        Err(err) => {
            row.failure = Some(err.to_string());
            return row;
        }
    };
    let mut failures = Vec::new();
    let mut gap = 0.0f64;
    if tasks.min_loss {
        match solve_min_loss(&ops, cfg.error_target, opts) {
            Ok(sol) => {
                let f_d = sol.primal_value.clamp(0.0, 1.0);
                gap = gap.max(sol.gap);
                row.f_d = Some(f_d);
                row.secure = Some(f_d > row.f_h);
                if let Some(m) = &cfg.memory {
                    row.t_star = secure_lifetime(cfg.mu, cfg.eta_d, m, f_d).ok();
                }
            }
            Err(err) => failures.push(format!("f_d: {err}")),
        }
    }
    if tasks.min_error {
        match solve_min_error(&ops, row.f_h, opts) {
            Ok(sol) => {
                gap = gap.max(sol.gap);
                row.e_star = Some(sol.primal_value.clamp(0.0, 1.0));
            }
            Err(err) => failures.push(format!("e_star: {err}")),
        }
    }
    if row.f_d.is_some() || row.e_star.is_some() {
        row.gap = Some(gap);
    }
    if !failures.is_empty() {
        row.failure = Some(failures.join("; "));
    }
    row
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, SecurityError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SecurityError::Pool(e.to_string()))
}

/// Solves every grid point for every scenario. Rows come back in grid order
/// (scenario, μ, e, η_d) regardless of `workers`.
pub fn sweep(
    grid: &SweepGrid,
    scenarios: &[ScenarioSpec],
    memory: Option<MemoryModel>,
    tasks: SweepTasks,
    workers: usize,
    opts: &AnalysisOptions,
) -> Result<Vec<SweepRow>, SecurityError> {
    let mut points = Vec::new();
    for &spec in scenarios {
        for &mu in &grid.mu {
            for &e in &grid.e {
                for &eta_d in &grid.eta_d {
                    points.push((spec, mu, e, eta_d));
                }
            }
        }
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    Ok(worker_pool(workers)?.install(|| {
        points
            .par_iter()
            .map(|&(spec, mu, e, eta_d)| {
                let mut cfg =
                    ScenarioConfig::new(spec.scenario, spec.phase_randomized, mu).with_eta_d(eta_d).with_error(e);
                cfg.memory = memory;
                analyze_point(&cfg, tasks, opts)
            })
            .collect()
    }))
}

/// One row of the optimal-error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub phase_randomized: bool,
    pub eta_d: f64,
    pub mu: f64,
    pub f_h: f64,
    pub e_trusted: Option<f64>,
    pub e_untrusted: Option<f64>,
    pub failure: Option<String>,
}

/// Minimal adversarial error for both terminal models over [`table3_grid`].
pub fn table3(workers: usize, opts: &AnalysisOptions) -> Result<Vec<Table3Row>, SecurityError> {
    let tasks = SweepTasks { min_loss: false, min_error: true };
    let grid = table3_grid();
    Ok(worker_pool(workers)?.install(|| {
        grid.par_iter()
            .map(|&(randomized, eta_d, mu)| {
                let point = |scenario| {
                    let cfg = ScenarioConfig::new(scenario, randomized, mu).with_eta_d(eta_d);
                    analyze_point(&cfg, tasks, opts)
                };
                let (t, u) = (point(Scenario::Trusted), point(Scenario::Untrusted));
                let failure = match (t.failure, u.failure) {
                    (None, None) => None,
                    (a, b) => Some([a, b].into_iter().flatten().collect::<Vec<_>>().join("; ")),
                };
                Table3Row { phase_randomized: randomized, eta_d, mu, f_h: t.f_h, e_trusted: t.e_star, e_untrusted: u.e_star, failure }
            })
            .collect()
    }))
}

/// Parameter rows `(phase_randomized, η_d, μ)` of the optimal-error table.
pub fn table3_grid() -> Vec<(bool, f64, f64)> {
    let mut rows = Vec::new();
    for mu in [0.05, 0.10, 0.15, 0.25, 0.55] {
        rows.push((false, 1.0, mu));
    }
    for mu in [0.50, 0.75, 1.00, 1.25, 1.50] {
        rows.push((true, 1.0, mu));
    }
    for mu in [0.40, 0.60, 0.80, 1.00, 1.20] {
        rows.push((true, 0.8, mu));
    }
    rows
}

/// Error and photon-number grids of the certificate table.
pub fn certificate_grid() -> (Vec<f64>, Vec<f64>) {
    (vec![1e-6, 1e-3, 0.01, 0.02, 0.05, 0.10], vec![0.01, 0.05, 0.10, 0.50, 1.00, 2.00])
}

/// Accepted deviation of an observed count of `n` Bernoulli(`p`) events from
/// `p·n`: `κ·√(p(1−p)n)`.
pub fn acceptance_window(p: f64, n: usize, kappa: f64) -> f64 {
    kappa * (p * (1.0 - p) * n as f64).sqrt()
}
