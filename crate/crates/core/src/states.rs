//! Mint signal states.
//!
//! The four two-mode pulses have the Gram matrix of the single-mode coherent
//! states `|i^k α/√2⟩` (α real, `μ = α²`). They live in a finite orthonormal
//! basis: four dimensions for the pure family, seven (`v, q0, q1, m0..m3`)
//! for the phase-randomized family.
//!
//! Complex conjugation is taken entrywise in the stored basis, which is what
//! [`crate::operators::choi_identity_check`] assumes. Build operators from
//! [`StateFamily::conjugate`], never from a re-derived basis.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("mean photon number must be finite and >= 0, got {0}")]
    Domain(f64),
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `i^k` for integer `k`.
pub fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => c(1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(-1.0, 0.0),
        _ => c(0.0, -1.0),
    }
}

/// `⟨a|b⟩` for coherent states with amplitudes `a`, `b`.
pub fn coherent_overlap(a: Complex64, b: Complex64) -> Complex64 {
    (a.conj() * b - 0.5 * a.norm_sqr() - 0.5 * b.norm_sqr()).exp()
}

/// `Σ_{m≥0} x^{4m+r}/(4m+r)!`, summed without cancellation.
fn quarter_series(x: f64, r: u32) -> f64 {
    let mut term = 1.0;
    for i in 1..=r {
        term *= x / i as f64;
    }
    let mut sum = term;
    let mut n = r;
    loop {
        for _ in 0..4 {
            n += 1;
            term *= x / n as f64;
        }
        sum += term;
        if term <= sum * 1e-17 || n > 4000 {
            return sum;
        }
    }
}

/// Expansion coefficients `C0..C3` of the mint states in the orthonormal
/// phase-symmetric basis `{φ_0..φ_3}`:
/// `|α_k⟩ = Σ_m i^{km} C_m |φ_m⟩`.
pub fn basis_coefficients(mu: f64) -> Result<[f64; 4], StateError> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(StateError::Domain(mu));
    }
    let x = mu / 2.0;
    // C_m² = e^{-x}·S_m with S_0 = (cosh x + cos x)/2, S_1 = (sinh x + sin x)/2,
    // S_2 = (cosh x − cos x)/2, S_3 = (sinh x − sin x)/2. The series form keeps
    // the differences accurate as x → 0.
    let scaled: [f64; 4] = if x < 30.0 {
        let d = (-x).exp();
        [0, 1, 2, 3].map(|r| d * quarter_series(x, r))
    } else {
        let (h, t) = ((1.0 + (-2.0 * x).exp()) / 4.0, (1.0 - (-2.0 * x).exp()) / 4.0);
        let (cs, sn) = ((-x).exp() * x.cos() / 2.0, (-x).exp() * x.sin() / 2.0);
        [h + cs, t + sn, h - cs, t - sn]
    };
    Ok(scaled.map(|v| v.max(0.0).sqrt()))
}

/// Photon-number weights `(p0, p1, pm)` of a phase-randomized pulse.
pub fn poisson_weights(mu: f64) -> (f64, f64, f64) {
    let p0 = (-mu).exp();
    let p1 = mu * p0;
    // 1 − (1+μ)e^{−μ}, accurate for small μ
    let pm = -(-mu).exp_m1() - p1;
    (p0, p1, pm.max(0.0))
}

/// Squashed-qubit reference vectors in the clone space spanned by
/// `{|0⟩, |1⟩, |∅⟩}`.
#[derive(Debug, Clone)]
pub struct SquashedBasis {
    betas: Vec<ComplexMatrix>,
    vacuum: ComplexMatrix,
}

impl SquashedBasis {
    /// Clone-space dimension.
    pub const DIM: usize = 3;

    pub fn new() -> Self {
        let betas = (0..4).map(|k| qubit_state(k, Self::DIM)).collect();
        Self { betas, vacuum: ComplexMatrix::basis_vector(Self::DIM, 2) }
    }

    /// `β_k`: `|+⟩, |+i⟩, |−⟩, |−i⟩` for k = 0..3.
    pub fn beta(&self, k: usize) -> &ComplexMatrix {
        &self.betas[k % 4]
    }

    /// The orthogonal partner `β_k^⊥ = β_{k+2}`.
    pub fn beta_perp(&self, k: usize) -> &ComplexMatrix {
        &self.betas[(k + 2) % 4]
    }

    /// The no-click flag `|∅⟩`.
    pub fn vacuum(&self) -> &ComplexMatrix {
        &self.vacuum
    }
}

impl Default for SquashedBasis {
    fn default() -> Self {
        Self::new()
    }
}

/// `(|0⟩ + i^k|1⟩)/√2` embedded in the first two coordinates of `dim`.
pub fn qubit_state(k: usize, dim: usize) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros(dim, 1);
    v[(0, 0)] = c(FRAC_1_SQRT_2, 0.0);
    v[(1, 0)] = i_pow(k) * FRAC_1_SQRT_2;
    v
}

/// The four mint states with their entrywise conjugates.
#[derive(Debug, Clone)]
pub struct StateFamily {
    pub mu: f64,
    pub phase_randomized: bool,
    pub mint_dim: usize,
    pub states: Vec<ComplexMatrix>,
    pub conjugate_states: Vec<ComplexMatrix>,
    /// State vectors, present for the pure family only.
    pub vectors: Option<Vec<ComplexMatrix>>,
}

impl StateFamily {
    pub fn pure(mu: f64) -> Result<Self, StateError> {
        let coeffs = basis_coefficients(mu)?;
        let vectors: Vec<ComplexMatrix> = (0..4)
            .map(|k| {
                let entries: Vec<Complex64> = (0..4).map(|m| i_pow(k * m) * coeffs[m]).collect();
                ComplexMatrix::column(&entries)
            })
            .collect();
        let states: Vec<ComplexMatrix> = vectors.iter().map(ComplexMatrix::projector).collect();
        Ok(Self {
            mu,
            phase_randomized: false,
            mint_dim: 4,
            conjugate_states: conjugate_family(&states),
            states,
            vectors: Some(vectors),
        })
    }

    /// `ρ_k = p0|v⟩⟨v| + p1|β_k⟩⟨β_k| + pm|m_k⟩⟨m_k|` in the basis
    /// `{v, q0, q1, m0, m1, m2, m3}`.
    pub fn phase_randomized(mu: f64) -> Result<Self, StateError> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(StateError::Domain(mu));
        }
        let (p0, p1, pm) = poisson_weights(mu);
        let states: Vec<ComplexMatrix> = (0..4)
            .map(|k| {
                let mut rho = ComplexMatrix::zeros(7, 7);
                rho[(0, 0)] = c(p0, 0.0);
                let q = qubit_state(k, 2);
                let qq = ComplexMatrix::projector(&q);
                for a in 0..2 {
                    for b in 0..2 {
                        rho[(1 + a, 1 + b)] = qq[(a, b)] * p1;
                    }
                }
                rho[(3 + k, 3 + k)] = c(pm, 0.0);
                rho
            })
            .collect();
        Ok(Self {
            mu,
            phase_randomized: true,
            mint_dim: 7,
            conjugate_states: conjugate_family(&states),
            states,
            vectors: None,
        })
    }

    pub fn state(&self, k: usize) -> &ComplexMatrix {
        &self.states[k % 4]
    }

    pub fn conjugate(&self, k: usize) -> &ComplexMatrix {
        &self.conjugate_states[k % 4]
    }
}

/// Builds the pure or phase-randomized family.
pub fn build_states(mu: f64, phase_randomized: bool) -> Result<StateFamily, StateError> {
    if phase_randomized {
        StateFamily::phase_randomized(mu)
    } else {
        StateFamily::pure(mu)
    }
}

/// Entrywise conjugates in the stored basis.
pub fn conjugate_family(states: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    states.iter().map(ComplexMatrix::conj).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, trace_product};
    use proptest::prelude::*;

    #[test]
    fn coherent_overlap_examples() {
        assert!((coherent_overlap(c(0.0, 0.0), c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        let mu: f64 = 0.8;
        let g = c((mu / 2.0).sqrt(), 0.0);
        assert!((coherent_overlap(g, -g) - c((-mu).exp(), 0.0)).norm() < 1e-15);
        let want = c(0.0, mu / 2.0).exp() * (-mu / 2.0).exp();
        assert!((coherent_overlap(g, c(0.0, 1.0) * g) - want).norm() < 1e-15);
    }

    #[test]
    fn coefficients_vacuum_and_normalization() {
        assert_eq!(basis_coefficients(0.0).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        for mu in [1e-6, 0.01, 0.3, 1.0, 2.5, 4.0, 20.0, 100.0] {
            let s: f64 = basis_coefficients(mu).unwrap().iter().map(|x| x * x).sum();
            assert!((s - 1.0).abs() < 1e-12, "mu={mu} sum={s}");
        }
        assert!(matches!(basis_coefficients(-0.1), Err(StateError::Domain(_))));
    }

    #[test]
    fn coefficients_match_closed_form() {
        for mu in [0.5f64, 1.0, 3.0] {
            let x = mu / 2.0;
            let pre = (-mu / 4.0).exp() * FRAC_1_SQRT_2;
            let want = [
                pre * (x.cosh() + x.cos()).sqrt(),
                pre * (x.sinh() + x.sin()).sqrt(),
                pre * (x.cosh() - x.cos()).sqrt(),
                pre * (x.sinh() - x.sin()).sqrt(),
            ];
            let got = basis_coefficients(mu).unwrap();
            for i in 0..4 {
                assert!((got[i] - want[i]).abs() < 1e-12);
            }
        }
    }

    fn amplitude(mu: f64, k: usize) -> Complex64 {
        i_pow(k) * (mu / 2.0).sqrt()
    }

    fn gram_error(mu: f64) -> f64 {
        let fam = StateFamily::pure(mu).unwrap();
        let v = fam.vectors.unwrap();
        let mut worst = 0.0f64;
        for j in 0..4 {
            for k in 0..4 {
                let got = inner(&v[j], &v[k]);
                let want = coherent_overlap(amplitude(mu, j), amplitude(mu, k));
                worst = worst.max((got - want).norm());
            }
        }
        worst
    }

    #[test]
    fn gram_matrix_matches_coherent_overlaps() {
        assert!(gram_error(1.0) < 1e-12);
        let fam = StateFamily::pure(1.0).unwrap();
        let v = fam.vectors.as_ref().unwrap();
        assert!((inner(&v[0], &v[2]) - c((-1.0f64).exp(), 0.0)).norm() < 1e-12);
        let want = c(0.0, 0.5).exp() * (-0.5f64).exp();
        assert!((inner(&v[0], &v[1]) - want).norm() < 1e-12);
    }

    #[test]
    fn gram_on_log_grid() {
        for i in 0..=40 {
            let mu = 1e-3 * (4.0f64 / 1e-3).powf(i as f64 / 40.0);
            assert!(gram_error(mu) < 1e-11, "mu={mu}");
        }
    }

    #[test]
    fn states_are_normalized_psd() {
        for fam in [StateFamily::pure(0.7).unwrap(), StateFamily::phase_randomized(0.7).unwrap()] {
            for rho in &fam.states {
                assert!((rho.trace().re - 1.0).abs() < 1e-12);
                assert!(rho.eigenvalues().unwrap()[0] >= -1e-12);
            }
        }
    }

    #[test]
    fn pure_states_are_rank_one() {
        let fam = StateFamily::pure(1.3).unwrap();
        for rho in &fam.states {
            let ev = rho.eigenvalues().unwrap();
            assert!(ev[..3].iter().all(|x| x.abs() < 1e-12));
            assert!((ev[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn randomized_spectrum_is_poisson() {
        let fam = StateFamily::phase_randomized(0.5).unwrap();
        let ev = fam.states[0].eigenvalues().unwrap();
        let top: Vec<f64> = ev.iter().rev().take(3).copied().collect();
        let want = [0.6065, 0.3032, 0.0902];
        for (a, b) in top.iter().zip(want) {
            assert!((a - b).abs() < 1e-4, "{top:?}");
        }
        let (p0, p1, pm) = poisson_weights(0.5);
        assert!((p0 - (-0.5f64).exp()).abs() < 1e-15);
        assert!((p1 - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((pm - (1.0 - 1.5 * (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn randomized_pair_overlaps_depend_on_index_difference() {
        let mu = 0.9;
        let fam = StateFamily::phase_randomized(mu).unwrap();
        let (p0, p1, _) = poisson_weights(mu);
        for j in 0..4 {
            for k in 0..4 {
                if j == k {
                    continue;
                }
                let got = trace_product(&fam.states[j], &fam.states[k]).re;
                let want = if (k + 4 - j) % 2 == 0 { p0 * p0 } else { p0 * p0 + p1 * p1 / 2.0 };
                assert!((got - want).abs() < 1e-12, "({j},{k}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn pure_conjugation_swaps_one_and_three() {
        let fam = StateFamily::pure(1.0).unwrap();
        assert!((&fam.conjugate_states[0] - &fam.states[0]).max_abs() < 1e-14);
        assert!((&fam.conjugate_states[2] - &fam.states[2]).max_abs() < 1e-14);
        assert!((&fam.conjugate_states[1] - &fam.states[3]).max_abs() < 1e-14);
        assert!((&fam.conjugate_states[3] - &fam.states[1]).max_abs() < 1e-14);
        let coeffs = basis_coefficients(1.0).unwrap();
        let v1 = &fam.vectors.as_ref().unwrap()[1];
        let pattern = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for m in 0..4 {
            assert!((v1[(m, 0)].conj() - pattern[m].conj() * coeffs[m]).norm() < 1e-15);
        }
    }

    #[test]
    fn randomized_conjugation_only_touches_qubit_block() {
        let fam = StateFamily::phase_randomized(0.6).unwrap();
        for k in 0..4 {
            let d = &fam.conjugate_states[k] - &fam.states[k];
            for i in 0..7 {
                for j in 0..7 {
                    let in_block = (1..3).contains(&i) && (1..3).contains(&j);
                    if !in_block {
                        assert_eq!(d[(i, j)], c(0.0, 0.0));
                    }
                }
            }
        }
        assert!((&fam.conjugate_states[0] - &fam.states[0]).max_abs() < 1e-15);
        for k in 0..4 {
            let back = fam.conjugate_states[k].conj();
            assert_eq!(back, fam.states[k]);
        }
    }

    #[test]
    fn squashed_partners_are_orthogonal_to_vacuum() {
        let sq = SquashedBasis::new();
        for k in 0..4 {
            assert!(inner(sq.beta(k), sq.beta_perp(k)).norm() < 1e-15);
            assert!(inner(sq.vacuum(), sq.beta(k)).norm() < 1e-15);
            assert!(inner(sq.vacuum(), sq.beta_perp(k)).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn poisson_weights_sum_to_one(mu in 0.0f64..20.0) {
            let (p0, p1, pm) = poisson_weights(mu);
            prop_assert!((p0 + p1 + pm - 1.0).abs() < 1e-14);
        }

        #[test]
        fn randomized_states_commute_with_blocks(mu in 0.0f64..5.0, k in 0usize..4) {
            let fam = StateFamily::phase_randomized(mu).unwrap();
            let rho = &fam.states[k];
            let blocks: [&[usize]; 3] = [&[0], &[1, 2], &[3, 4, 5, 6]];
            for blk in blocks {
                let p = ComplexMatrix::from_real_diagonal(
                    &(0..7).map(|i| if blk.contains(&i) { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
                );
                let comm = &p.matmul(rho) - &rho.matmul(&p);
                prop_assert!(comm.max_abs() < 1e-15);
            }
        }
    }
}
