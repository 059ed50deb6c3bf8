//! Infeasible-start path-following with the HKM direction and a Mehrotra
//! predictor-corrector step.

use faer::{Mat, Side};
use faer::linalg::solvers::Solve;
use num_complex::Complex64;

use super::{
    hermitian_basis, InequalitySense, IterationRecord, SdpError, SdpOptions, SdpProblem, SdpSolution, Sense,
    SolveStatus,
};
use crate::linalg::{trace_product_re, ComplexMatrix};

type Entries = Vec<(usize, usize, Complex64)>;

/// Constraint operator `X ↦ (Tr(A_r X))_r` and its adjoint.
struct Constraints {
    dout: usize,
    din: usize,
    basis: Vec<Entries>,
    dense: Vec<ComplexMatrix>,
    /// `+1` for `≤` rows, `−1` for `≥` rows; one entry per inequality, which
    /// occupy the last rows of `dense`.
    sgn: Vec<f64>,
    b: Vec<f64>,
}

impl Constraints {
    fn nb(&self) -> usize {
        self.basis.len()
    }

    fn m(&self) -> usize {
        self.basis.len() + self.dense.len()
    }

    fn ineq_offset(&self) -> usize {
        self.m() - self.sgn.len()
    }

    fn partial_trace_out(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let din = self.din;
        let mut p = ComplexMatrix::zeros(din, din);
        for o in 0..self.dout {
            for c in 0..din {
                for r in 0..din {
                    p[(r, c)] += x[(o * din + r, o * din + c)];
                }
            }
        }
        p
    }

    fn basis_coeffs(&self, p: &ComplexMatrix) -> impl Iterator<Item = f64> + '_ {
        let p = p.clone();
        self.basis
            .iter()
            .map(move |entries| entries.iter().map(|&(r, c, v)| (v * p[(c, r)]).re).sum())
    }

    /// `A(X) + S s`.
    fn apply(&self, x: &ComplexMatrix, s: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m());
        if self.nb() > 0 {
            let p = self.partial_trace_out(x);
            out.extend(self.basis_coeffs(&p));
        }
        for a in &self.dense {
            out.push(trace_product_re(a, x));
        }
        let off = self.ineq_offset();
        for (j, (&g, &sj)) in self.sgn.iter().zip(s).enumerate() {
            out[off + j] += g * sj;
        }
        out
    }

    fn dual_operator(&self, y: &[f64]) -> Option<ComplexMatrix> {
        if self.nb() == 0 {
            return None;
        }
        let mut d = ComplexMatrix::zeros(self.din, self.din);
        for (entries, &yk) in self.basis.iter().zip(y) {
            for &(r, c, v) in entries {
                d[(r, c)] += v * yk;
            }
        }
        Some(d)
    }

    /// `(Aᵀ y, Sᵀ y)`.
    fn adjoint(&self, y: &[f64]) -> (ComplexMatrix, Vec<f64>) {
        let n = self.dout * self.din;
        let mut m = ComplexMatrix::zeros(n, n);
        if let Some(d) = self.dual_operator(y) {
            let din = self.din;
            for o in 0..self.dout {
                for c in 0..din {
                    for r in 0..din {
                        m[(o * din + r, o * din + c)] = d[(r, c)];
                    }
                }
            }
        }
        let nb = self.nb();
        for (i, a) in self.dense.iter().enumerate() {
            m.axpy(y[nb + i], a);
        }
        let off = self.ineq_offset();
        let ys = self.sgn.iter().enumerate().map(|(j, g)| g * y[off + j]).collect();
        (m, ys)
    }

    /// Schur complement `M_kl = Re Tr(A_k X A_l Z⁻¹)` plus the slack block.
    fn schur(&self, x: &ComplexMatrix, zi: &ComplexMatrix, s: &[f64], z: &[f64]) -> Mat<f64> {
        let m = self.m();
        let nb = self.nb();
        let (dout, din) = (self.dout, self.din);
        let mut schur = Mat::<f64>::zeros(m, m);

        if nb > 0 {
            // T[(b,c),(d,a)] = Σ_{o,o'} X[(o,b),(o',c)] Z⁻¹[(o',d),(o,a)]
            let d2 = din * din;
            let o2 = dout * dout;
            let xr = Mat::<Complex64>::from_fn(d2, o2, |bc, oo| {
                let (b, c) = (bc / din, bc % din);
                let (o, o2_) = (oo / dout, oo % dout);
                x[(o * din + b, o2_ * din + c)]
            });
            let yr = Mat::<Complex64>::from_fn(o2, d2, |oo, da| {
                let (o, o2_) = (oo / dout, oo % dout);
                let (d, a) = (da / din, da % din);
                zi[(o2_ * din + d, o * din + a)]
            });
            let t = &xr * &yr;
            for (k, bk) in self.basis.iter().enumerate() {
                for (l, bl) in self.basis.iter().enumerate().skip(k) {
                    let mut acc = 0.0;
                    for &(a, b, v) in bk {
                        for &(c, d, w) in bl {
                            acc += (v * w * t[(b * din + c, d * din + a)]).re;
                        }
                    }
                    schur[(k, l)] = acc;
                    schur[(l, k)] = acc;
                }
            }
        }

        for (j, a) in self.dense.iter().enumerate() {
            let w = x.matmul(a).matmul(zi);
            let mut col = Vec::with_capacity(m);
            if nb > 0 {
                col.extend(self.basis_coeffs(&self.partial_trace_out(&w)));
            }
            for a2 in &self.dense {
                col.push(trace_product_re(a2, &w));
            }
            for (i, v) in col.into_iter().enumerate() {
                schur[(i, nb + j)] = v;
                schur[(nb + j, i)] = v;
            }
        }

        let off = self.ineq_offset();
        for j in 0..self.sgn.len() {
            schur[(off + j, off + j)] += s[j] / z[j];
        }
        schur
    }
}

fn solve_linear(m: &Mat<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut r = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let llt = m.llt(Side::Lower).ok();
    let lu = if llt.is_none() { Some(m.partial_piv_lu()) } else { None };
    let solve = |r: &Mat<f64>| match (&llt, &lu) {
        (Some(f), _) => f.solve(r),
        (None, Some(f)) => f.solve(r),
        (None, None) => unreachable!(),
    };
    let mut sol = solve(&r);
    // two rounds of iterative refinement
    for _ in 0..2 {
        let ms = m * &sol;
        for i in 0..n {
            r[(i, 0)] = rhs[i] - ms[(i, 0)];
        }
        sol += solve(&r);
    }
    let out: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step(x: &ComplexMatrix, dx: &ComplexMatrix) -> Option<f64> {
    let w = match x.cholesky() {
        Ok(l) => {
            let mut w = dx.clone();
            l.solve_lower_in_place(&mut w);
            let mut w = w.adjoint();
            l.solve_lower_in_place(&mut w);
            w
        }
        Err(_) => {
            // near-singular X: whiten with its clamped spectrum
            let (vals, u) = x.eigen().ok()?;
            let floor = vals.last().copied().unwrap_or(1.0).abs() * 1e-15;
            let inv_sqrt: Vec<f64> = vals.iter().map(|v| 1.0 / v.max(floor).sqrt()).collect();
            let d = ComplexMatrix::from_real_diagonal(&inv_sqrt);
            let t = &d * &(&u.adjoint() * &(dx * &u));
            &t * &d
        }
    };
    let mut w = w;
    w.symmetrize_in_place();
    let lmin = w.eigenvalues().ok()?[0];
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn max_step_vec(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Direction {
    dx: ComplexMatrix,
    dy: Vec<f64>,
    dz: ComplexMatrix,
    ds: Vec<f64>,
    dzs: Vec<f64>,
}

/// Solves a semidefinite program. Deterministic for identical inputs.
pub fn solve(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let n = problem.variable_dim;
    let flip = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let c_norm = problem.objective.max_abs();
    let scale = if c_norm > 1e3 { c_norm } else { 1.0 };
    let c = problem.objective.scale(flip / scale);

    let (dout, din, basis, mut b) = match &problem.partial_trace {
        Some(pt) => {
            let basis = hermitian_basis(pt.in_dim);
            let b: Vec<f64> = basis
                .iter()
                .map(|e| e.iter().map(|&(r, cc, v)| (v * pt.rhs[(cc, r)]).re).sum())
                .collect();
            (pt.out_dim, pt.in_dim, basis, b)
        }
        None => (n, 1, Vec::new(), Vec::new()),
    };
    let mut dense: Vec<ComplexMatrix> = Vec::new();
    for (a, rhs) in &problem.equalities {
        dense.push(a.symmetrize());
        b.push(*rhs);
    }
    let mut sgn = Vec::new();
    for ineq in &problem.inequalities {
        dense.push(ineq.g.symmetrize());
        b.push(ineq.h);
        sgn.push(match ineq.sense {
            InequalitySense::LessEqual => 1.0,
            InequalitySense::GreaterEqual => -1.0,
        });
    }
    let cons = Constraints { dout, din, basis, dense, sgn, b };
    let m = cons.m();
    let ns = cons.sgn.len();
    let off = cons.ineq_offset();

    let tau = cons.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut x = ComplexMatrix::identity(n).scale(tau);
    let mut zmat = ComplexMatrix::identity(n).scale(tau);
    let mut y = vec![0.0; m];
    let mut s = vec![tau; ns];
    let mut z = vec![tau; ns];

    let b_norm = norm(&cons.b);
    let c_fro = c.frobenius_norm();
    let mut log = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let (mut pobj, mut dobj, mut relgap, mut pinf, mut dinf);

    loop {
        let ax = cons.apply(&x, &s);
        let rp: Vec<f64> = cons.b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let (aty, atys) = cons.adjoint(&y);
        let mut rd = &(&c - &zmat) - &aty;
        rd.symmetrize_in_place();
        let rds: Vec<f64> = (0..ns).map(|j| -z[j] - atys[j]).collect();

        pobj = trace_product_re(&c, &x);
        dobj = dot(&cons.b, &y);
        let compl = trace_product_re(&x, &zmat) + dot(&s, &z);
        let mu = compl / (n + ns) as f64;
        relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        pinf = norm(&rp) / (1.0 + b_norm);
        dinf = (rd.frobenius_norm() + norm(&rds)) / (1.0 + c_fro);
        log::debug!(
            "iter {iterations:3} p={pobj:+.10e} d={dobj:+.10e} gap={relgap:.2e} pinf={pinf:.2e} dinf={dinf:.2e}"
        );
        if opts.record_log {
            log.push(IterationRecord {
                iteration: iterations,
                primal_value: flip * scale * pobj,
                dual_value: flip * scale * dobj,
                relative_gap: relgap,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                complementarity: compl,
            });
        }
        if relgap < opts.gap_tolerance && pinf < opts.feasibility_tolerance && dinf < opts.feasibility_tolerance {
            status = SolveStatus::Optimal;
            break;
        }
        if !pobj.is_finite() || !dobj.is_finite() {
            status = SolveStatus::NumericalFailure;
            break;
        }
        // A dual ray: the dual objective grows without bound while the
        // dual stays feasible, so the primal has no feasible point.
        if dobj > 1e8 * (1.0 + pobj.abs()) && dinf < 1e-3 {
            status = SolveStatus::Infeasible;
            break;
        }
        if x.max_abs() > 1e12 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let zi = match zmat.inverse_pd() {
            Ok(v) => v,
            Err(_) => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let schur = cons.schur(&x, &zi, &s, &z);
        let x_rd_zi = x.matmul(&rd).matmul(&zi);

        let direction = |sigma: f64, corr: Option<&Direction>| -> Option<Direction> {
            let mut rc = &zi.scale(sigma * mu) - &x;
            if let Some(p) = corr {
                rc -= &p.dx.matmul(&p.dz).matmul(&zi);
            }
            let rcs: Vec<f64> = (0..ns)
                .map(|j| {
                    let mut v = sigma * mu / z[j] - s[j];
                    if let Some(p) = corr {
                        v -= p.ds[j] * p.dzs[j] / z[j];
                    }
                    v
                })
                .collect();
            let inner_x = &rc - &x_rd_zi;
            let inner_s: Vec<f64> = (0..ns).map(|j| rcs[j] - s[j] * rds[j] / z[j]).collect();
            let a_inner = cons.apply(&inner_x, &inner_s);
            let rhs: Vec<f64> = rp.iter().zip(&a_inner).map(|(p, a)| p - a).collect();
            let dy = solve_linear(&schur, &rhs)?;
            let (atdy, atdys) = cons.adjoint(&dy);
            let dz = &rd - &atdy;
            let dzs: Vec<f64> = (0..ns).map(|j| rds[j] - atdys[j]).collect();
            let mut dx = &rc - &x.matmul(&dz).matmul(&zi);
            dx.symmetrize_in_place();
            let ds: Vec<f64> = (0..ns).map(|j| rcs[j] - s[j] * dzs[j] / z[j]).collect();
            Some(Direction { dx, dy, dz, ds, dzs })
        };
        let steps = |d: &Direction| -> Option<(f64, f64)> {
            let ap = max_step(&x, &d.dx)?.min(max_step_vec(&s, &d.ds));
            let ad = max_step(&zmat, &d.dz)?.min(max_step_vec(&z, &d.dzs));
            Some((ap, ad))
        };

        let Some(pred) = direction(0.0, None) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some((ap, ad)) = steps(&pred) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff = {
            let mut t = x.clone();
            t.axpy(ap, &pred.dx);
            t
        };
        let z_aff = {
            let mut t = zmat.clone();
            t.axpy(ad, &pred.dz);
            t
        };
        let s_aff: f64 = (0..ns).map(|j| (s[j] + ap * pred.ds[j]) * (z[j] + ad * pred.dzs[j])).sum();
        let mu_aff = (trace_product_re(&x_aff, &z_aff) + s_aff) / (n + ns) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let Some(dir) = direction(sigma, Some(&pred)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some((ap, ad)) = steps(&dir) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        x.axpy(ap, &dir.dx);
        x.symmetrize_in_place();
        zmat.axpy(ad, &dir.dz);
        zmat.symmetrize_in_place();
        for j in 0..ns {
            s[j] += ap * dir.ds[j];
            z[j] += ad * dir.dzs[j];
        }
        for (yi, dyi) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * dyi;
        }
    }

    let k = flip * scale;
    let nb = cons.nb();
    let partial_trace_dual = cons.dual_operator(&y).map(|d| d.scale(scale));
    let dual_equality = y[nb..off].iter().map(|v| v * scale).collect();
    let dual_inequality = z.iter().map(|v| v * scale).collect();
    Ok(SdpSolution {
        x,
        z: zmat.scale(scale),
        partial_trace_dual,
        dual_equality,
        dual_inequality,
        inequality_slack: s,
        primal_value: k * pobj,
        dual_value: k * dobj,
        gap: relgap,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        status,
        iterations,
        log,
    })
}
