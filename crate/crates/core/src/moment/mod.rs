//! Moment relaxations of polynomial programs
//!
//! ```text
//! min θ(x)  s.t.  p(x) = 0 (p ∈ Φ),  q(x) ≥ 0 (q ∈ Ψ)
//! ```
//!
//! and the hierarchy that raises the relaxation order until the optimum is
//! certified by point optimality or flat truncation.

mod extract;
mod hierarchy;

pub use extract::{atom_weights, extract_minimizers, flat_truncation, moment_matrix, numerical_rank, ExtractionOptions};
pub use hierarchy::{minimize, Certificate, HierarchyOptions, HierarchyOutcome};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{basis, basis_len, monomial_index, MomentVector, Polynomial};
use crate::sdp::{EqualityRow, PsdBlock, SdpBackend, SdpProblem, SdpSettings, SdpStatus};

#[derive(Clone, Debug)]
pub struct PolyProgram {
    pub n: usize,
    pub objective: Polynomial,
    /// Equalities `p(x) = 0`.
    pub phi: Vec<Polynomial>,
    /// Inequalities `q(x) ≥ 0`.
    pub psi: Vec<Polynomial>,
}

fn half_ceil(d: u32) -> u32 {
    d.div_ceil(2)
}

impl PolyProgram {
    pub fn new(objective: Polynomial, phi: Vec<Polynomial>, psi: Vec<Polynomial>) -> Result<Self> {
        let n = objective.nvars();
        for p in phi.iter().chain(&psi) {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.nvars() });
            }
        }
        Ok(PolyProgram { n, objective, phi, psi })
    }

    /// Smallest admissible relaxation order: `max ⌈deg/2⌉` over all polynomials.
    pub fn d0(&self) -> u32 {
        self.phi
            .iter()
            .chain(&self.psi)
            .chain(std::iter::once(&self.objective))
            .map(|p| half_ceil(p.degree()))
            .max()
            .unwrap_or(0)
            .max(1)
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let eq = self.phi.iter().map(|p| p.eval(x).abs());
        let ineq = self.psi.iter().map(|q| (-q.eval(x)).max(0.0));
        eq.chain(ineq).fold(0.0, f64::max)
    }
}

/// The symmetric matrix `L_q^{(k)}[y]` as an affine function of `y`.
#[derive(Clone, Debug, Serialize)]
pub struct LocalizingTemplate {
    pub size: usize,
    /// Row-major `size × size` list; entry `(i, j)` is `Σ coef · y_α` over
    /// `(index of α, coef)` pairs.
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl LocalizingTemplate {
    pub fn entry(&self, i: usize, j: usize) -> &[(usize, f64)] {
        &self.entries[i * self.size + j]
    }

    pub fn instantiate(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| {
            self.entry(i, j).iter().map(|&(a, c)| c * y[a]).sum()
        })
    }
}

/// Localizing matrix of `q` at order `k`; `q = 1` gives the moment matrix.
pub fn localizing_template(q: &Polynomial, k: u32, n: usize) -> Result<LocalizingTemplate> {
    if q.nvars() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.nvars() });
    }
    let dq = half_ceil(q.degree());
    if dq > k {
        return Err(Error::DegreeOverflow { degree: q.degree(), order: k });
    }
    let b = basis(n, k - dq);
    let size = b.len();
    let mut entries = vec![Vec::new(); size * size];
    for i in 0..size {
        for j in i..size {
            let aij = b.get(i).mul(b.get(j));
            let list: Vec<(usize, f64)> =
                q.terms().map(|(g, c)| (monomial_index(g.mul(&aij).exponents()), c)).collect();
            entries[j * size + i] = list.clone();
            entries[i * size + j] = list;
        }
    }
    Ok(LocalizingTemplate { size, entries })
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRelaxation {
    pub n: usize,
    pub order: u32,
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Vec<EqualityRow>,
    /// Moment matrix first, then one localizing matrix per inequality.
    pub blocks: Vec<LocalizingTemplate>,
    /// Per block, an orthonormal basis of the complement of the vectors the
    /// equalities force into its kernel; `None` when there are none.
    #[serde(skip)]
    pub faces: Vec<Option<DMatrix<f64>>>,
}

fn normalized(p: &Polynomial) -> Polynomial {
    let m = p.max_abs_coeff();
    if m > 0.0 {
        p.scale(1.0 / m)
    } else {
        p.clone()
    }
}

/// Order-`k` moment relaxation. Constraint polynomials are rescaled to unit
/// largest coefficient, which leaves the feasible set unchanged.
pub fn build_relaxation(prog: &PolyProgram, k: u32) -> Result<MomentRelaxation> {
    let d0 = prog.d0();
    if k < d0 {
        return Err(Error::OrderTooLow { k, d0 });
    }
    let n = prog.n;
    let num_vars = basis_len(n, 2 * k);
    let mut objective = vec![0.0; num_vars];
    for (m, c) in prog.objective.terms() {
        objective[monomial_index(m.exponents())] += c;
    }
    let mut equalities = vec![EqualityRow { coeffs: vec![(0, 1.0)], rhs: 1.0 }];
    for p in prog.phi.iter().filter(|p| !p.is_zero()) {
        let p = normalized(p);
        let t = k - half_ceil(p.degree());
        for beta in basis(n, 2 * t).entries() {
            let coeffs = p.terms().map(|(g, c)| (monomial_index(g.mul(beta).exponents()), c)).collect();
            equalities.push(EqualityRow { coeffs, rhs: 0.0 });
        }
    }
    let mut blocks = vec![localizing_template(&Polynomial::constant(n, 1.0), k, n)?];
    let mut faces = vec![face(&prog.phi, n, k)];
    for q in &prog.psi {
        blocks.push(localizing_template(&normalized(q), k, n)?);
        faces.push(face(&prog.phi, n, k - half_ceil(q.degree())));
    }
    Ok(MomentRelaxation { n, order: k, num_vars, objective, equalities, blocks, faces })
}

/// For `p ∈ Φ` and `deg x^δ p ≤ t`, the coefficients of `x^δ p` lie in the
/// kernel of every feasible localizing matrix indexed by `basis(n, t)`:
/// `(L_q[y] v)_α = Σ q_γ p_ε y_{α+γ+δ+ε}` is a multiple of an equality row.
/// Returns an orthonormal basis of the orthogonal complement of their span.
fn face(phi: &[Polynomial], n: usize, t: u32) -> Option<DMatrix<f64>> {
    let size = basis_len(n, t);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for p in phi.iter().filter(|p| !p.is_zero() && p.degree() <= t) {
        let p = normalized(p);
        for delta in basis(n, t - p.degree()).entries() {
            let mut v = vec![0.0; size];
            for (g, c) in p.terms() {
                v[monomial_index(g.mul(delta).exponents())] += c;
            }
            cols.push(v);
        }
    }
    if cols.is_empty() {
        return None;
    }
    let v = DMatrix::from_fn(size, cols.len(), |i, j| cols[j][i]);
    let svd = v.svd(true, false);
    let u = svd.u?;
    let smax = svd.singular_values.max();
    let range: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    let u = DMatrix::from_fn(size, range.len(), |i, j| u[(i, range[j])]);
    let proj = DMatrix::identity(size, size) - &u * u.transpose();
    let eig = nalgebra::SymmetricEigen::new((&proj + proj.transpose()) * 0.5);
    let keep: Vec<usize> = (0..size).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    // Rounding noise in Q couples otherwise unconstrained moments into the
    // block, and the solver can grow them until an infeasible block looks
    // feasible. Snap it to zero and re-orthonormalize.
    let q = DMatrix::from_fn(size, keep.len(), |i, j| {
        let v = eig.eigenvectors[(i, keep[j])];
        if v.abs() <= 1e-12 { 0.0 } else { v }
    });
    if q.ncols() == 0 {
        return Some(q);
    }
    let q = q.qr().q();
    Some(q.map(|v| if v.abs() <= 1e-14 { 0.0 } else { v }))
}

impl MomentRelaxation {
    pub fn to_sdp(&self) -> SdpProblem {
        let mut p = SdpProblem::new(self.num_vars);
        p.objective = self.objective.clone();
        p.equalities = self.equalities.clone();
        for (t, face) in self.blocks.iter().zip(&self.faces) {
            let mut blk = PsdBlock::new(t.size);
            blk.face = face.clone();
            for i in 0..t.size {
                for j in i..t.size {
                    for &(a, c) in t.entry(i, j) {
                        blk.add_linear(a, i, j, c);
                    }
                }
            }
            p.blocks.push(blk);
        }
        p
    }

    /// Blocks and rows as JSON, for debugging.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// A solve that stops without meeting the backend tolerance is still used
/// when its best iterate has primal and dual residuals and relative
/// objective gap below this. Complementarity is not required: moment
/// relaxations whose dual optimum is not attained never reach it.
/// Extracted points are validated against the program independently.
pub const REDUCED_ACCURACY_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub enum RelaxationResult {
    Infeasible,
    Optimal {
        /// Relaxation value `ϑ_k`.
        value: f64,
        y: MomentVector,
        /// Dual objective, a lower bound up to solver tolerance.
        dual_bound: f64,
        reduced_accuracy: bool,
    },
    Unbounded,
    NumericalFailure(String),
}

pub fn solve_relaxation(
    rel: &MomentRelaxation,
    backend: &dyn SdpBackend,
    settings: &SdpSettings,
) -> RelaxationResult {
    let mut sdp = rel.to_sdp();
    // Solve with a unit-scale objective and undo the scaling afterwards.
    let scale = sdp.objective.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for c in &mut sdp.objective {
        *c /= scale;
    }
    let res = backend.solve(&sdp, settings);
    let objective_gap = (res.primal_objective - res.dual_objective).abs() / res.primal_objective.abs().max(1.0);
    let usable = res.status == SdpStatus::NumericalFailure
        && res.residuals.primal.max(res.residuals.dual).max(objective_gap) <= REDUCED_ACCURACY_TOL;
    if res.status == SdpStatus::Optimal || usable {
        return match MomentVector::new(rel.n, 2 * rel.order, res.y) {
            Ok(y) => RelaxationResult::Optimal {
                value: res.primal_objective * scale,
                y,
                dual_bound: res.dual_objective * scale,
                reduced_accuracy: usable,
            },
            Err(e) => RelaxationResult::NumericalFailure(e.to_string()),
        };
    }
    match res.status {
        SdpStatus::Optimal => unreachable!(),
        SdpStatus::PrimalInfeasible => RelaxationResult::Infeasible,
        SdpStatus::Unbounded => RelaxationResult::Unbounded,
        SdpStatus::NumericalFailure => RelaxationResult::NumericalFailure(format!(
            "{} after {} iterations (primal {:.1e}, dual {:.1e}, gap {:.1e})",
            res.message, res.iterations, res.residuals.primal, res.residuals.dual, res.residuals.gap
        )),
    }
}

/// Reads `u = (y_{e_1}, …, y_{e_n})` and accepts it when it is feasible and
/// attains the relaxation value, which certifies a global minimizer.
pub fn check_point_optimality(
    y: &MomentVector,
    value: f64,
    prog: &PolyProgram,
    tol_feas: f64,
    tol_gap: f64,
) -> Option<Vec<f64>> {
    let u = y.first_order();
    let gap = (value - prog.objective.eval(&u)).abs();
    (prog.violation(&u) <= tol_feas && gap <= tol_gap * value.abs().max(1.0)).then_some(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{lift, Monomial};
    use crate::sdp::InteriorPoint;

    fn x() -> Polynomial {
        Polynomial::var(1, 0)
    }

    #[test]
    fn moment_matrix_is_hankel() {
        let t = localizing_template(&Polynomial::constant(1, 1.0), 1, 1).unwrap();
        assert_eq!(t.size, 2);
        assert_eq!(t.entry(0, 0), &[(0, 1.0)]);
        assert_eq!(t.entry(0, 1), &[(1, 1.0)]);
        assert_eq!(t.entry(1, 1), &[(2, 1.0)]);
    }

    #[test]
    fn localizing_matrix_of_interval() {
        let q = &Polynomial::constant(1, 1.0) - &(&x() * &x());
        let t = localizing_template(&q, 1, 1).unwrap();
        assert_eq!(t.size, 1);
        let y = [1.0, 0.3, 0.2];
        assert!((t.instantiate(&y)[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn instantiated_moment_matrix_at_lift() {
        let t = localizing_template(&Polynomial::constant(1, 1.0), 1, 1).unwrap();
        let m = t.instantiate(lift(&[2.0], 2).values());
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
    }

    #[test]
    fn degree_too_large_for_order() {
        let q = x().pow(3);
        assert!(matches!(localizing_template(&q, 1, 1), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn order_below_d0_is_rejected() {
        let prog = PolyProgram::new(x().pow(4), vec![], vec![]).unwrap();
        assert!(matches!(build_relaxation(&prog, 1), Err(Error::OrderTooLow { k: 1, d0: 2 })));
    }

    #[test]
    fn unconstrained_square() {
        let prog = PolyProgram::new(&x() * &x(), vec![], vec![]).unwrap();
        let rel = build_relaxation(&prog, 1).unwrap();
        match solve_relaxation(&rel, &InteriorPoint, &SdpSettings::default()) {
            RelaxationResult::Optimal { value, .. } => assert!(value.abs() < 1e-7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_on_interval() {
        let q = &Polynomial::constant(1, 1.0) - &(&x() * &x());
        let prog = PolyProgram::new(-&x(), vec![], vec![q]).unwrap();
        let rel = build_relaxation(&prog, 1).unwrap();
        match solve_relaxation(&rel, &InteriorPoint, &SdpSettings::default()) {
            RelaxationResult::Optimal { value, y, .. } => {
                assert!((value + 1.0).abs() < 1e-7);
                for (a, b) in y.values().iter().zip(lift(&[1.0], 2).values()) {
                    assert!((a - b).abs() < 1e-5);
                }
                assert_eq!(check_point_optimality(&y, value, &prog, 1e-6, 1e-6).map(|u| u.len()), Some(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_set_is_infeasible() {
        let q = &Polynomial::constant(1, -1.0) - &(&x() * &x());
        let prog = PolyProgram::new(Polynomial::zero(1), vec![], vec![q]).unwrap();
        let rel = build_relaxation(&prog, 1).unwrap();
        assert!(matches!(
            solve_relaxation(&rel, &InteriorPoint, &SdpSettings::default()),
            RelaxationResult::Infeasible
        ));
    }

    #[test]
    fn negative_constant_on_a_face_is_infeasible() {
        // x_i = 0 restricts every block to the constant monomial; the
        // moments of degree 2 then appear in no block at all
        let n = 4;
        let phi: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i).scale(-(i as f64) - 2.0)).collect();
        let mut psi = vec![Polynomial::constant(n, -3.0)];
        psi.extend((0..n).map(|i| Polynomial::var(n, i)));
        let prog = PolyProgram::new(Polynomial::affine(&[-6.0, -2.0, -9.0, -3.0], 0.0), phi, psi).unwrap();
        let rel = build_relaxation(&prog, 1).unwrap();
        assert!(rel.faces[0].as_ref().unwrap().iter().all(|v| *v == 0.0 || v.abs() == 1.0));
        assert!(matches!(
            solve_relaxation(&rel, &InteriorPoint, &SdpSettings::default()),
            RelaxationResult::Infeasible
        ));
    }

    #[test]
    fn point_optimality_rejections() {
        let q = &Polynomial::constant(1, 1.0) - &(&x() * &x());
        let prog = PolyProgram::new(-&x(), vec![], vec![q]).unwrap();
        let y = lift(&[0.5], 2);
        assert!(check_point_optimality(&y, -1.0, &prog, 1e-6, 1e-6).is_none());
        let eq = PolyProgram::new(-&x(), vec![&x() - &Polynomial::constant(1, 0.49)], vec![]).unwrap();
        assert!(check_point_optimality(&y, -0.5, &eq, 1e-6, 1e-6).is_none());
    }

    #[test]
    fn equality_rows_cover_each_distinct_entry() {
        let p = Polynomial::monomial(2, Monomial::new(vec![1, 1]), 1.0);
        let prog = PolyProgram::new(Polynomial::zero(2), vec![p], vec![]).unwrap();
        let rel = build_relaxation(&prog, 2).unwrap();
        // y_0 = 1 plus one row per monomial of degree ≤ 2 in two variables
        assert_eq!(rel.equalities.len(), 1 + 6);
        assert_eq!(rel.blocks[0].size, 6);
    }
}
