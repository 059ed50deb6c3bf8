//! Dense primal-dual interior-point solver for semidefinite programs over one
//! Hermitian matrix variable.
//!
//! Problems have the form
//!
//! ```text
//! min  Tr(C X)
//! s.t. Tr_out(X) = R                  (optional, X on out ⊗ in)
//!      Tr(A_i X) = b_i
//!      Tr(G_j X) ≤ h_j  or  ≥ h_j
//!      X ⪰ 0
//! ```
//!
//! The partial-trace family is kept in structured form, so a channel
//! constraint on `d_in` inputs costs `d_in²` cheap rows instead of `d_in²`
//! dense matrices.

mod solver;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, LinalgError, SubsystemDims};

pub use solver::solve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalitySense {
    LessEqual,
    GreaterEqual,
}

#[derive(Debug, Clone)]
pub struct Inequality {
    pub g: ComplexMatrix,
    pub h: f64,
    pub sense: InequalitySense,
}

/// `Tr_out(X) = rhs` for `X` on `out ⊗ in`.
#[derive(Debug, Clone)]
pub struct PartialTraceConstraint {
    pub out_dim: usize,
    pub in_dim: usize,
    pub rhs: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub objective: ComplexMatrix,
    pub sense: Sense,
    pub partial_trace: Option<PartialTraceConstraint>,
    pub equalities: Vec<(ComplexMatrix, f64)>,
    pub inequalities: Vec<Inequality>,
    pub variable_dim: usize,
}

impl SdpProblem {
    pub fn minimize(objective: ComplexMatrix) -> Self {
        let variable_dim = objective.rows();
        Self {
            objective,
            sense: Sense::Minimize,
            partial_trace: None,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            variable_dim,
        }
    }

    pub fn maximize(objective: ComplexMatrix) -> Self {
        Self { sense: Sense::Maximize, ..Self::minimize(objective) }
    }

    /// Adds `Tr_out(X) = 1_in`, the trace-preservation condition on a Choi matrix.
    pub fn trace_preserving(self, out_dim: usize, in_dim: usize) -> Self {
        self.partial_trace(out_dim, in_dim, ComplexMatrix::identity(in_dim))
    }

    pub fn partial_trace(mut self, out_dim: usize, in_dim: usize, rhs: ComplexMatrix) -> Self {
        self.partial_trace = Some(PartialTraceConstraint { out_dim, in_dim, rhs });
        self
    }

    pub fn equality(mut self, a: ComplexMatrix, b: f64) -> Self {
        self.equalities.push((a, b));
        self
    }

    pub fn less_equal(mut self, g: ComplexMatrix, h: f64) -> Self {
        self.inequalities.push(Inequality { g, h, sense: InequalitySense::LessEqual });
        self
    }

    pub fn greater_equal(mut self, g: ComplexMatrix, h: f64) -> Self {
        self.inequalities.push(Inequality { g, h, sense: InequalitySense::GreaterEqual });
        self
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.variable_dim;
        let check = |m: &ComplexMatrix, what: &str| -> Result<(), SdpError> {
            if m.rows() != n || m.cols() != n {
                return Err(SdpError::Malformed(format!(
                    "{what} is {}x{}, variable is {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
            m.ensure_hermitian().map_err(SdpError::from)
        };
        check(&self.objective, "objective")?;
        for (i, (a, b)) in self.equalities.iter().enumerate() {
            check(a, &format!("equality {i}"))?;
            if !b.is_finite() {
                return Err(SdpError::Malformed(format!("equality {i} has rhs {b}")));
            }
        }
        for (i, ineq) in self.inequalities.iter().enumerate() {
            check(&ineq.g, &format!("inequality {i}"))?;
            if !ineq.h.is_finite() {
                return Err(SdpError::Malformed(format!("inequality {i} has rhs {}", ineq.h)));
            }
        }
        if let Some(pt) = &self.partial_trace {
            if pt.out_dim * pt.in_dim != n {
                return Err(SdpError::Malformed(format!(
                    "partial trace {}x{} does not factor dimension {n}",
                    pt.out_dim, pt.in_dim
                )));
            }
            if pt.rhs.rows() != pt.in_dim || pt.rhs.cols() != pt.in_dim {
                return Err(SdpError::Malformed("partial trace rhs has the wrong shape".into()));
            }
            pt.rhs.ensure_hermitian()?;
        }
        if self.partial_trace.is_none() && self.equalities.is_empty() && self.inequalities.is_empty() {
            return Err(SdpError::Malformed("problem has no constraints".into()));
        }
        Ok(())
    }

    /// Number of scalar constraint rows.
    pub fn constraint_count(&self) -> usize {
        let nb = self.partial_trace.as_ref().map_or(0, |p| p.in_dim * p.in_dim);
        nb + self.equalities.len() + self.inequalities.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
    pub gap_tolerance: f64,
    /// Relative primal and dual residual norms.
    pub feasibility_tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Keep per-iteration records in the solution.
    pub record_log: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-7,
            feasibility_tolerance: 1e-8,
            max_iterations: 200,
            step_fraction: 0.98,
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
}

/// Solver output. Dual variables refer to the minimization form: for a
/// maximization problem they belong to `min Tr(−C X)`.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: ComplexMatrix,
    /// Dual slack `Z = C − Σ y_i A_i − …`.
    pub z: ComplexMatrix,
    /// Dual of the partial-trace constraint as an operator `D` on the input
    /// space, so `Z = C − 1 ⊗ D − …`.
    pub partial_trace_dual: Option<ComplexMatrix>,
    pub dual_equality: Vec<f64>,
    /// Nonnegative inequality multipliers; `Z` gets `+z_j G_j` for `≤` rows
    /// and `−z_j G_j` for `≥` rows.
    pub dual_inequality: Vec<f64>,
    pub inequality_slack: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Sparse entries `(row, col, value)` of an orthonormal Hermitian basis of
/// `d×d` matrices, indexed by `(a, b)` in row-major order: `E_aa` on the
/// diagonal, `(E_ab + E_ba)/√2` for `a < b`, `i(E_ab − E_ba)/√2` for `a > b`.
pub fn hermitian_basis(d: usize) -> Vec<Vec<(usize, usize, Complex64)>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            out.push(match a.cmp(&b) {
                std::cmp::Ordering::Equal => vec![(a, a, Complex64::new(1.0, 0.0))],
                std::cmp::Ordering::Less => vec![(a, b, Complex64::new(r, 0.0)), (b, a, Complex64::new(r, 0.0))],
                std::cmp::Ordering::Greater => vec![(a, b, Complex64::new(0.0, r)), (b, a, Complex64::new(0.0, -r))],
            });
        }
    }
    out
}

/// Dense matrix of one sparse basis element.
pub fn basis_matrix(d: usize, entries: &[(usize, usize, Complex64)]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for &(r, c, v) in entries {
        m[(r, c)] += v;
    }
    m
}

/// The rows `(1_out ⊗ B_k, Tr(B_k))` expressing `Tr_out(X) = 1_in` for
/// `dims = (out factors…, in)`, the last factor being the input.
pub fn vectorize_constraints(dims: &SubsystemDims) -> Vec<(ComplexMatrix, f64)> {
    let f = dims.factors();
    let d_in = f[f.len() - 1];
    let d_out = dims.product_of(0..f.len() - 1);
    hermitian_basis(d_in)
        .iter()
        .map(|entries| {
            let b = basis_matrix(d_in, entries);
            let rhs = b.trace().re;
            (crate::linalg::kron(&ComplexMatrix::identity(d_out), &b), rhs)
        })
        .collect()
}
