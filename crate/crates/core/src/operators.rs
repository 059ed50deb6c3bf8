//! Error and loss operators, and the Choi-matrix primitives they are paired with.
//!
//! Every operator acts on `out ⊗ in`, where `out` is the pair of adversary
//! outputs (clone or answer registers, card 1 first) and `in` is the mint
//! register, preceded by the two challenge registers in the untrusted
//! scenario. For a channel Λ with unnormalized Choi matrix
//! `J = Σ_ij Λ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, `Tr((M ⊗ ρ̄) J) = Tr(M Λ(ρ))`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{inner, kron, kron_all, sandwich, ComplexMatrix, LinalgError, SubsystemDims};
use crate::states::{SquashedBasis, StateFamily};

/// Largest `out ⊗ in` dimension built by default.
pub const DEFAULT_SIZE_BUDGET: usize = 1296;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("operator dimension {dim} exceeds the size budget {budget}")]
    Capacity { dim: usize, budget: usize },
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("channel is not trace preserving (defect {defect:.3e})")]
    NotTracePreserving { defect: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Trusted,
    Untrusted,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Trusted => "trusted",
            Scenario::Untrusted => "untrusted",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "trusted" => Ok(Scenario::Trusted),
            "untrusted" => Ok(Scenario::Untrusted),
            other => Err(format!("unknown scenario '{other}' (expected trusted or untrusted)")),
        }
    }
}

/// `{E1, E2, L1, L2}` for one scenario.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub e1: ComplexMatrix,
    pub e2: ComplexMatrix,
    pub l1: ComplexMatrix,
    pub l2: ComplexMatrix,
    /// `(card-1 output, card-2 output, input)`.
    pub dims: SubsystemDims,
    pub scenario: Scenario,
    pub n: usize,
}

impl OperatorSet {
    /// Dimension of the two output registers together.
    pub fn out_dim(&self) -> usize {
        self.dims.product_of(0..2)
    }

    /// Dimension of the channel input.
    pub fn in_dim(&self) -> usize {
        self.dims.product_of(2..self.dims.len())
    }

    pub fn dim(&self) -> usize {
        self.dims.total()
    }
}

/// Answer and challenge vectors of the untrusted terminal.
#[derive(Debug, Clone)]
pub struct AnswerBasis {
    answers: [ComplexMatrix; 3],
    challenges: [ComplexMatrix; 2],
}

impl AnswerBasis {
    pub const DIM: usize = 3;
    pub const CHALLENGE_DIM: usize = 2;

    pub fn new() -> Self {
        Self {
            answers: [0, 1, 2].map(|i| ComplexMatrix::basis_vector(Self::DIM, i)),
            challenges: [0, 1].map(|i| ComplexMatrix::basis_vector(Self::CHALLENGE_DIM, i)),
        }
    }

    /// `a0`, `a1`, or `∅` for index 0, 1, 2.
    pub fn answer(&self, a: usize) -> &ComplexMatrix {
        &self.answers[a]
    }

    pub fn challenge(&self, i: usize) -> &ComplexMatrix {
        &self.challenges[i]
    }

    /// Index of the correct answer to challenge `i` for state `k`, or `None`
    /// when the challenge does not match the state's basis. States 0 and 1
    /// answer `a0`, states 2 and 3 answer `a1`.
    pub fn correct_answer(i: usize, k: usize) -> Option<usize> {
        (k % 2 == i % 2).then_some(k / 2 % 2)
    }

    /// The wrong answer `a_ik^⊥`, always in `{a0, a1}`.
    pub fn wrong_answer(i: usize, k: usize) -> Option<usize> {
        Self::correct_answer(i, k).map(|a| 1 - a)
    }
}

impl Default for AnswerBasis {
    fn default() -> Self {
        Self::new()
    }
}

/// One term of a single-position operator: the channel input it is paired
/// with, its probability weight, and the error elements for each card.
struct Term {
    weight: f64,
    input: ComplexMatrix,
    err1: ComplexMatrix,
    err2: ComplexMatrix,
}

fn single_position_terms(f: &StateFamily, scenario: Scenario) -> Vec<Term> {
    match scenario {
        Scenario::Trusted => {
            let sq = SquashedBasis::new();
            (0..4)
                .map(|k| {
                    let err = ComplexMatrix::projector(sq.beta_perp(k)).scale(0.5);
                    Term { weight: 0.25, input: f.conjugate(k).clone(), err1: err.clone(), err2: err }
                })
                .collect()
        }
        Scenario::Untrusted => {
            let ab = AnswerBasis::new();
            let wrong = |i: usize, k: usize| match AnswerBasis::wrong_answer(i, k) {
                Some(a) => ComplexMatrix::projector(ab.answer(a)),
                None => ComplexMatrix::zeros(AnswerBasis::DIM, AnswerBasis::DIM),
            };
            let mut terms = Vec::with_capacity(16);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..4 {
                        let input = kron_all(&[
                            &ComplexMatrix::projector(ab.challenge(i)),
                            &ComplexMatrix::projector(ab.challenge(j)),
                            f.conjugate(k),
                        ]);
                        terms.push(Term { weight: 1.0 / 16.0, input, err1: wrong(i, k), err2: wrong(j, k) });
                    }
                }
            }
            terms
        }
    }
}

fn input_factors(f: &StateFamily, scenario: Scenario) -> Vec<usize> {
    match scenario {
        Scenario::Trusted => vec![f.mint_dim],
        Scenario::Untrusted => vec![AnswerBasis::CHALLENGE_DIM, AnswerBasis::CHALLENGE_DIM, f.mint_dim],
    }
}

/// Error and loss operators of a trusted terminal.
pub fn build_trusted_ops(f: &StateFamily) -> OperatorSet {
    single_position_ops(f, Scenario::Trusted)
}

/// Error and loss operators of an untrusted terminal.
pub fn build_untrusted_ops(f: &StateFamily) -> OperatorSet {
    single_position_ops(f, Scenario::Untrusted)
}

pub fn build_ops(f: &StateFamily, scenario: Scenario) -> OperatorSet {
    single_position_ops(f, scenario)
}

fn single_position_ops(f: &StateFamily, scenario: Scenario) -> OperatorSet {
    let terms = single_position_terms(f, scenario);
    let d = SquashedBasis::DIM;
    let id = ComplexMatrix::identity(d);
    let vac = ComplexMatrix::projector(&ComplexMatrix::basis_vector(d, 2));
    let in_factors = input_factors(f, scenario);
    let in_dim: usize = in_factors.iter().product();
    let n = d * d * in_dim;
    let (mut e1, mut e2, mut l1, mut l2) =
        (ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(n, n));
    for t in &terms {
        let w = t.weight;
        e1.axpy(w, &kron_all(&[&t.err1, &id, &t.input]));
        e2.axpy(w, &kron_all(&[&id, &t.err2, &t.input]));
        l1.axpy(w, &kron_all(&[&vac, &id, &t.input]));
        l2.axpy(w, &kron_all(&[&id, &vac, &t.input]));
    }
    let mut factors = vec![d, d];
    factors.extend(&in_factors);
    OperatorSet {
        e1,
        e2,
        l1,
        l2,
        dims: SubsystemDims::new(factors).expect("positive factors"),
        scenario,
        n: 1,
    }
}

/// `Σ_s ⊗_i [s_i C_i + (1 − s_i)(1 − C_i)]` over binary strings `s` with
/// exactly `j` ones.
pub fn projector_p(n: usize, j: usize, c: &[ComplexMatrix]) -> Result<ComplexMatrix, OperatorError> {
    if n == 0 || c.len() != n {
        return Err(OperatorError::Domain(format!("need n >= 1 and n matrices, got n={n}, {}", c.len())));
    }
    if j > n {
        return Err(OperatorError::Domain(format!("j={j} exceeds n={n}")));
    }
    for m in c {
        m.ensure_hermitian()?;
    }
    let complements: Vec<ComplexMatrix> =
        c.iter().map(|m| &ComplexMatrix::identity(m.rows()) - m).collect();
    let dim: usize = c.iter().map(ComplexMatrix::rows).product();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for s in 0u64..(1u64 << n) {
        if s.count_ones() as usize != j {
            continue;
        }
        let factors: Vec<&ComplexMatrix> = (0..n)
            .map(|i| if s >> (n - 1 - i) & 1 == 1 { &c[i] } else { &complements[i] })
            .collect();
        out += &kron_all(&factors);
    }
    Ok(out)
}

/// `Σ_j (j/n) P(n, j, C)`: the expected fraction of positions flagged by `C`.
fn weighted_fraction(c: &[ComplexMatrix]) -> Result<ComplexMatrix, OperatorError> {
    let n = c.len();
    let mut acc: Option<ComplexMatrix> = None;
    for j in 1..=n {
        let p = projector_p(n, j, c)?.scale(j as f64 / n as f64);
        acc = Some(match acc {
            Some(a) => &a + &p,
            None => p,
        });
    }
    Ok(acc.expect("n >= 1"))
}

/// Operators for a card of `n` positions attacked jointly. Registers are
/// ordered `(card-1 outputs, card-2 outputs, inputs)`, each group listing
/// positions in order.
pub fn build_n_state_ops(
    f: &StateFamily,
    n: usize,
    scenario: Scenario,
    budget: usize,
) -> Result<OperatorSet, OperatorError> {
    if n == 0 {
        return Err(OperatorError::Domain("n must be >= 1".into()));
    }
    let in_factors = input_factors(f, scenario);
    let in_one: usize = in_factors.iter().product();
    let d = SquashedBasis::DIM;
    let dim = (d * d * in_one)
        .checked_pow(n as u32)
        .filter(|&v| v <= budget)
        .ok_or(OperatorError::Capacity { dim: (d * d * in_one).saturating_pow(n as u32), budget })?;

    let terms = single_position_terms(f, scenario);
    let vac = ComplexMatrix::projector(&ComplexMatrix::basis_vector(d, 2));
    let out_one = d.pow(n as u32);
    let id_out = ComplexMatrix::identity(out_one);
    let loss_clone = weighted_fraction(&vec![vac; n])?;
    let (mut e1, mut e2, mut l1, mut l2) = (
        ComplexMatrix::zeros(dim, dim),
        ComplexMatrix::zeros(dim, dim),
        ComplexMatrix::zeros(dim, dim),
        ComplexMatrix::zeros(dim, dim),
    );
    let count = terms.len();
    let mut idx = vec![0usize; n];
    for _ in 0..count.pow(n as u32) {
        let chosen: Vec<&Term> = idx.iter().map(|&i| &terms[i]).collect();
        let w: f64 = chosen.iter().map(|t| t.weight).product();
        let input = kron_all(&chosen.iter().map(|t| &t.input).collect::<Vec<_>>());
        let c1: Vec<ComplexMatrix> = chosen.iter().map(|t| t.err1.clone()).collect();
        let c2: Vec<ComplexMatrix> = chosen.iter().map(|t| t.err2.clone()).collect();
        let k1 = weighted_fraction(&c1)?;
        let k2 = weighted_fraction(&c2)?;
        e1.axpy(w, &kron_all(&[&k1, &id_out, &input]));
        e2.axpy(w, &kron_all(&[&id_out, &k2, &input]));
        l1.axpy(w, &kron_all(&[&loss_clone, &id_out, &input]));
        l2.axpy(w, &kron_all(&[&id_out, &loss_clone, &input]));
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < count {
                break;
            }
            *slot = 0;
        }
    }
    let mut factors = vec![out_one, out_one];
    factors.push(in_one.pow(n as u32));
    Ok(OperatorSet {
        e1,
        e2,
        l1,
        l2,
        dims: SubsystemDims::new(factors).expect("positive factors"),
        scenario,
        n,
    })
}

/// Input dimension of a Kraus list, after checking all operators agree.
fn kraus_dims(kraus: &[ComplexMatrix]) -> Result<(usize, usize), OperatorError> {
    let first = kraus.first().ok_or_else(|| OperatorError::Domain("empty Kraus list".into()))?;
    let (d_out, d_in) = (first.rows(), first.cols());
    if kraus.iter().any(|k| k.rows() != d_out || k.cols() != d_in) {
        return Err(OperatorError::Domain("Kraus operators differ in shape".into()));
    }
    Ok((d_out, d_in))
}

/// `max |Σ K†K − 1|`.
pub fn trace_preservation_defect(kraus: &[ComplexMatrix]) -> Result<f64, OperatorError> {
    let (_, d_in) = kraus_dims(kraus)?;
    let mut s = ComplexMatrix::identity(d_in).scale(-1.0);
    for k in kraus {
        s += &k.adjoint().matmul(k);
    }
    Ok(s.max_abs())
}

/// `Λ(ρ) = Σ K ρ K†`.
pub fn apply_channel(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let d_out = kraus[0].rows();
    let mut out = ComplexMatrix::zeros(d_out, d_out);
    for k in kraus {
        out += &k.matmul(rho).matmul(&k.adjoint());
    }
    out
}

/// Unnormalized Choi matrix on `out ⊗ in`.
pub fn choi_matrix(kraus: &[ComplexMatrix]) -> Result<ComplexMatrix, OperatorError> {
    let (d_out, d_in) = kraus_dims(kraus)?;
    let mut j = ComplexMatrix::zeros(d_out * d_in, d_out * d_in);
    for a in 0..d_in {
        for b in 0..d_in {
            let eab = ComplexMatrix::outer(
                &ComplexMatrix::basis_vector(d_in, a),
                &ComplexMatrix::basis_vector(d_in, b),
            );
            j += &kron(&apply_channel(kraus, &eab), &eab);
        }
    }
    Ok(j)
}

/// Evaluates `⟨ψ3|Λ(|ψ1⟩⟨ψ1|)|ψ3⟩` directly and as
/// `(⟨ψ3| ⊗ ⟨ψ̄1|) J (|ψ3⟩ ⊗ |ψ̄1⟩)`.
pub fn choi_identity_check(
    kraus: &[ComplexMatrix],
    psi1: &ComplexMatrix,
    psi3: &ComplexMatrix,
) -> Result<(f64, f64), OperatorError> {
    let (d_out, d_in) = kraus_dims(kraus)?;
    if psi1.rows() != d_in || psi3.rows() != d_out || psi1.cols() != 1 || psi3.cols() != 1 {
        return Err(OperatorError::Domain("vector dimensions do not match the channel".into()));
    }
    let defect = trace_preservation_defect(kraus)?;
    if defect > 1e-10 {
        return Err(OperatorError::NotTracePreserving { defect });
    }
    for v in [psi1, psi3] {
        let norm = inner(v, v).re;
        if (norm - 1.0).abs() > 1e-10 {
            return Err(OperatorError::Domain(format!("vector norm² {norm} is not 1")));
        }
    }
    let lhs = sandwich(psi3, &apply_channel(kraus, &ComplexMatrix::projector(psi1)), psi3).re;
    let v = kron(psi3, &psi1.conj());
    let rhs = sandwich(&v, &choi_matrix(kraus)?, &v).re;
    Ok((lhs, rhs))
}

fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Kraus operators of a random trace-preserving channel `d_in → d_out`,
/// obtained by splitting a random isometry. `rank` is raised to
/// `⌈d_in/d_out⌉` when smaller, since no isometry exists below that.
pub fn random_kraus(rng: &mut impl Rng, d_in: usize, d_out: usize, rank: usize) -> Vec<ComplexMatrix> {
    let rank = rank.max(d_in.div_ceil(d_out));
    let g = random_complex(rng, d_out * rank, d_in);
    let (vals, vecs) = g.adjoint().matmul(&g).eigen().expect("Gram matrix is Hermitian");
    let inv_sqrt = ComplexMatrix::from_real_diagonal(&vals.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
    let v = g.matmul(&vecs.matmul(&inv_sqrt).matmul(&vecs.adjoint()));
    (0..rank)
        .map(|r| ComplexMatrix::from_fn(d_out, d_in, |i, j| v[(r * d_out + i, j)]))
        .collect()
}

/// Random unit vector.
pub fn random_unit_vector(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let v = random_complex(rng, d, 1);
    let norm = inner(&v, &v).re.sqrt();
    v.scale(1.0 / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{permute_subsystems, trace_product_re};
    use crate::states::{build_states, StateFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn choi_identity_channel() {
        let kraus = vec![ComplexMatrix::identity(2)];
        let zero = ComplexMatrix::basis_vector(2, 0);
        let (lhs, rhs) = choi_identity_check(&kraus, &zero, &zero).unwrap();
        assert!((lhs - 1.0).abs() < 1e-15 && (rhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn choi_depolarizing_channel() {
        // Kraus form of ρ ↦ Tr(ρ)·1/2
        let kraus: Vec<ComplexMatrix> = (0..2)
            .flat_map(|a| {
                (0..2).map(move |b| {
                    ComplexMatrix::outer(&ComplexMatrix::basis_vector(2, a), &ComplexMatrix::basis_vector(2, b))
                        .scale(std::f64::consts::FRAC_1_SQRT_2)
                })
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (p1, p3) = (random_unit_vector(&mut rng, 2), random_unit_vector(&mut rng, 2));
        let (lhs, rhs) = choi_identity_check(&kraus, &p1, &p3).unwrap();
        assert!((lhs - 0.5).abs() < 1e-14 && (rhs - 0.5).abs() < 1e-14);
    }

    #[test]
    fn choi_identity_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d_in = rng.gen_range(1..=4);
            let d_out = rng.gen_range(1..=4);
            let rank = rng.gen_range(1..=3);
            let kraus = random_kraus(&mut rng, d_in, d_out, rank);
            let p1 = random_unit_vector(&mut rng, d_in);
            let p3 = random_unit_vector(&mut rng, d_out);
            let (lhs, rhs) = choi_identity_check(&kraus, &p1, &p3).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn choi_rejects_lossy_channel() {
        let kraus = vec![ComplexMatrix::identity(2).scale(0.5)];
        let v = ComplexMatrix::basis_vector(2, 0);
        assert!(matches!(choi_identity_check(&kraus, &v, &v), Err(OperatorError::NotTracePreserving { .. })));
    }

    #[test]
    fn trusted_traces_follow_projector_ranks() {
        let ops = build_trusted_ops(&StateFamily::pure(0.8).unwrap());
        assert!((ops.l1.trace().re - 3.0).abs() < 1e-12);
        assert!((ops.e1.trace().re - 1.5).abs() < 1e-12);
        assert_eq!(ops.dims.factors(), &[3, 3, 4]);
    }

    #[test]
    fn untrusted_traces_follow_projector_ranks() {
        let ops = build_untrusted_ops(&StateFamily::pure(0.8).unwrap());
        assert!((ops.l1.trace().re - 3.0).abs() < 1e-12);
        assert!((ops.e1.trace().re - 1.5).abs() < 1e-12);
        assert_eq!(ops.dims.factors(), &[3, 3, 2, 2, 4]);
        for m in [&ops.e1, &ops.e2] {
            assert!(m.eigenvalues().unwrap()[0] >= -1e-12);
        }
    }

    /// Swap of the two output registers by explicit index relabeling.
    fn swap_oracle(m: &ComplexMatrix, d: usize, rest: usize) -> ComplexMatrix {
        let idx = |a: usize, b: usize, r: usize| (a * d + b) * rest + r;
        let n = d * d * rest;
        let mut out = ComplexMatrix::zeros(n, n);
        for a in 0..d {
            for b in 0..d {
                for r in 0..rest {
                    for a2 in 0..d {
                        for b2 in 0..d {
                            for r2 in 0..rest {
                                out[(idx(b, a, r), idx(b2, a2, r2))] = m[(idx(a, b, r), idx(a2, b2, r2))];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Exchange of the two cards: output registers, and in the untrusted
    /// scenario the two challenge registers as well.
    fn card_swap(ops: &OperatorSet, m: &ComplexMatrix) -> ComplexMatrix {
        match ops.scenario {
            Scenario::Trusted => swap_oracle(m, 3, ops.in_dim()),
            Scenario::Untrusted => permute_subsystems(m, &ops.dims, &[1, 0, 3, 2, 4]).unwrap(),
        }
    }

    #[test]
    fn card_operators_are_swap_partners() {
        for randomized in [false, true] {
            let f = build_states(0.5, randomized).unwrap();
            let ops = build_trusted_ops(&f);
            let rest = ops.in_dim();
            assert!((&swap_oracle(&ops.e2, 3, rest) - &ops.e1).max_abs() < 1e-14);
            assert!((&swap_oracle(&ops.l2, 3, rest) - &ops.l1).max_abs() < 1e-14);
            let dims = SubsystemDims::new(vec![3, 3, rest]).unwrap();
            let swapped = permute_subsystems(&ops.e1, &dims, &[1, 0, 2]).unwrap();
            assert!((&swapped - &ops.e2).max_abs() < 1e-14);

            let ops = build_untrusted_ops(&f);
            assert!((&card_swap(&ops, &ops.e2) - &ops.e1).max_abs() < 1e-14);
            assert!((&card_swap(&ops, &ops.l2) - &ops.l1).max_abs() < 1e-14);
        }
    }

    #[test]
    fn all_operators_psd() {
        for randomized in [false, true] {
            let f = build_states(1.0, randomized).unwrap();
            for ops in [build_trusted_ops(&f), build_untrusted_ops(&f)] {
                for m in [&ops.e1, &ops.e2, &ops.l1, &ops.l2] {
                    assert!(m.eigenvalues().unwrap()[0] >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_clone_channel_normalization() {
        // discard the input and emit |+⟩⊗|+⟩
        let f = StateFamily::pure(0.7).unwrap();
        let ops = build_trusted_ops(&f);
        let sq = SquashedBasis::new();
        let plus2 = ComplexMatrix::projector(&kron(sq.beta(0), sq.beta(0)));
        let j = kron(&plus2, &ComplexMatrix::identity(f.mint_dim));
        assert!((trace_product_re(&ops.e1, &j) - 0.25).abs() < 1e-14);
        assert!(trace_product_re(&ops.l1, &j).abs() < 1e-14);
    }

    #[test]
    fn swap_symmetric_choi_sees_equal_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for mu in [0.1, 0.5, 1.0] {
            for randomized in [false, true] {
                let f = build_states(mu, randomized).unwrap();
                for ops in [build_trusted_ops(&f), build_untrusted_ops(&f)] {
                    let d_in = ops.in_dim();
                    let kraus = random_kraus(&mut rng, d_in, 9, 2);
                    let j = choi_matrix(&kraus).unwrap();
                    let j_sym = (&j + &card_swap(&ops, &j)).scale(0.5);
                    let (a, b) = (trace_product_re(&ops.e1, &j_sym), trace_product_re(&ops.e2, &j_sym));
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projector_p_single_element() {
        let q = ComplexMatrix::projector(&ComplexMatrix::basis_vector(3, 1));
        assert_eq!(projector_p(1, 1, std::slice::from_ref(&q)).unwrap(), q);
        assert!(matches!(projector_p(1, 2, &[q]), Err(OperatorError::Domain(_))));
    }

    #[test]
    fn projector_p_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cs: Vec<ComplexMatrix> =
            (0..3).map(|_| ComplexMatrix::projector(&random_unit_vector(&mut rng, 2))).collect();
        let mut total = ComplexMatrix::zeros(8, 8);
        for j in 0..=3 {
            total += &projector_p(3, j, &cs).unwrap();
        }
        assert!((&total - &ComplexMatrix::identity(8)).max_abs() < 1e-13);
    }

    #[test]
    fn projector_p_two_positions_match_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = ComplexMatrix::projector(&random_unit_vector(&mut rng, 3));
        let b = ComplexMatrix::projector(&random_unit_vector(&mut rng, 3));
        let id = ComplexMatrix::identity(3);
        let (na, nb) = (&id - &a, &id - &b);
        let p0 = kron(&na, &nb);
        let p1 = &kron(&a, &nb) + &kron(&na, &b);
        let p2 = kron(&a, &b);
        let cs = [a, b];
        assert!((&projector_p(2, 0, &cs).unwrap() - &p0).max_abs() < 1e-13);
        assert!((&projector_p(2, 1, &cs).unwrap() - &p1).max_abs() < 1e-13);
        assert!((&projector_p(2, 2, &cs).unwrap() - &p2).max_abs() < 1e-13);
    }

    #[test]
    fn n_state_reduces_to_single_position() {
        for randomized in [false, true] {
            let f = build_states(0.6, randomized).unwrap();
            for scenario in [Scenario::Trusted, Scenario::Untrusted] {
                let a = build_n_state_ops(&f, 1, scenario, DEFAULT_SIZE_BUDGET).unwrap();
                let b = build_ops(&f, scenario);
                for (x, y) in [(&a.e1, &b.e1), (&a.e2, &b.e2), (&a.l1, &b.l1), (&a.l2, &b.l2)] {
                    assert!((x - y).max_abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn n_state_loss_trace_matches_enumeration() {
        let f = StateFamily::pure(0.5).unwrap();
        let ops = build_n_state_ops(&f, 2, Scenario::Trusted, DEFAULT_SIZE_BUDGET).unwrap();
        // Tr(L1) = Σ_{k1,k2} (1/16) Σ_s (#ones/2)·Π_i Tr(s_i ? |∅⟩⟨∅| : 1−|∅⟩⟨∅|) · 9 · Tr(ρ̄⊗ρ̄)
        let mut want = 0.0;
        for _k in 0..16 {
            for s in 0..4u32 {
                let ones = s.count_ones() as f64;
                let tr: f64 = (0..2).map(|i| if s >> i & 1 == 1 { 1.0 } else { 2.0 }).product();
                want += ones / 2.0 * tr * 9.0 / 16.0;
            }
        }
        assert!((ops.l1.trace().re - want).abs() < 1e-12);
        assert_eq!(ops.dim(), 1296);
        assert!(ops.l1.eigenvalues().unwrap()[0] >= -1e-10);
        assert!(ops.e1.eigenvalues().unwrap()[0] >= -1e-10);
    }

    #[test]
    fn n_state_budget_is_enforced() {
        let f = StateFamily::phase_randomized(0.5).unwrap();
        let err = build_n_state_ops(&f, 2, Scenario::Trusted, DEFAULT_SIZE_BUDGET).unwrap_err();
        assert!(matches!(err, OperatorError::Capacity { dim: 3969, .. }));
    }

    #[test]
    fn answer_table() {
        assert_eq!(AnswerBasis::correct_answer(0, 0), Some(0));
        assert_eq!(AnswerBasis::correct_answer(0, 2), Some(1));
        assert_eq!(AnswerBasis::correct_answer(1, 1), Some(0));
        assert_eq!(AnswerBasis::correct_answer(1, 3), Some(1));
        assert_eq!(AnswerBasis::correct_answer(0, 1), None);
        for i in 0..2 {
            for k in 0..4 {
                if let Some(w) = AnswerBasis::wrong_answer(i, k) {
                    assert!(w < 2);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn kraus_choi_is_trace_preserving(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kraus = random_kraus(&mut rng, 3, 2, 2);
            prop_assert!(trace_preservation_defect(&kraus).unwrap() < 1e-12);
            let j = choi_matrix(&kraus).unwrap();
            let dims = SubsystemDims::new(vec![2, 3]).unwrap();
            let reduced = crate::linalg::partial_trace(&j, &dims, &[1]).unwrap();
            prop_assert!((&reduced - &ComplexMatrix::identity(3)).max_abs() < 1e-12);
        }
    }
}
