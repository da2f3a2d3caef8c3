//! Polynomial variational inequalities: find `u ∈ X` with
//! `(v − u)ᵀ F(u) ≥ 0` for all `v ∈ X`.
//!
//! Candidates minimize a generic strictly convex quadratic `θ` over the
//! LME-substituted KKT set, are verified by minimizing `(y − u)ᵀ F(u)` over
//! `X`, and rejected candidates are cut off with the verification
//! minimizers. Further solutions are found by raising a lower bound on `θ`.

pub mod degree;
mod polish;
mod solver;
mod theta;

use serde::Serialize;

pub use degree::{active_set_bounds, algebraic_degree_bound, complete_symmetric};
pub use polish::polish;
pub use solver::{
    find_candidate, find_delta, solve_all, solve_next, solve_one, solve_one_logged, verify_candidate, Candidate, NextOutcome, Phase,
    StepRecord, Verification,
};
pub use theta::{random_theta, ThetaForm};

use crate::error::{Error, Result};
use crate::lme::{build_kkt_sets, catalog_lme, verify_lme, ConstraintSystem, KktSystem, LmeKind, LmeMatrix, LmeSet};
use crate::moment::HierarchyOptions;
use crate::poly::Polynomial;

/// How the multiplier expressions are supplied.
#[derive(Clone, Debug)]
pub enum LmeSource {
    Catalog(LmeKind),
    Matrix(LmeMatrix),
    /// Trusted expressions; verification falls back to the direct formulation.
    Expressions(LmeSet),
}

#[derive(Clone, Debug)]
pub struct VipProblem {
    pub f: Vec<Polynomial>,
    pub cs: ConstraintSystem,
    pub lme: LmeSet,
    /// Present for catalog and matrix sources; used to verify candidates
    /// through their own KKT system.
    pub l: Option<LmeMatrix>,
    pub kkt: KktSystem,
}

impl VipProblem {
    pub fn new(f: Vec<Polynomial>, cs: ConstraintSystem, source: LmeSource) -> Result<Self> {
        if f.len() != cs.n {
            return Err(Error::DimensionMismatch { expected: cs.n, got: f.len() });
        }
        if let Some(p) = f.iter().find(|p| p.nvars() != cs.n) {
            return Err(Error::DimensionMismatch { expected: cs.n, got: p.nvars() });
        }
        let (l, lme) = match source {
            LmeSource::Catalog(kind) => {
                let l = catalog_lme(kind, &cs)?;
                let lme = l.apply(&f)?;
                (Some(l), lme)
            }
            LmeSource::Matrix(l) => {
                if !verify_lme(&l, &cs) {
                    return Err(Error::InvalidProblem("L(x)G(x) is not the identity".into()));
                }
                let lme = l.apply(&f)?;
                (Some(l), lme)
            }
            LmeSource::Expressions(lme) => (None, lme),
        };
        let kkt = build_kkt_sets(&f, &cs, &lme)?;
        Ok(VipProblem { f, cs, lme, l, kkt })
    }

    pub fn n(&self) -> usize {
        self.cs.n
    }

    pub fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        self.f.iter().map(|p| p.eval(x)).collect()
    }

    /// `(v − u)ᵀ F(u)`.
    pub fn gap(&self, u: &[f64], v: &[f64]) -> f64 {
        self.eval_f(u).iter().zip(v.iter().zip(u)).map(|(fi, (vi, ui))| fi * (vi - ui)).sum()
    }

    /// `(v − x)ᵀ F(x)` as a polynomial in `x`.
    pub fn cut_polynomial(&self, v: &[f64]) -> Polynomial {
        let n = self.n();
        let mut acc = Polynomial::zero(n);
        for (i, fi) in self.f.iter().enumerate() {
            let d = Polynomial::affine(&unit(n, i, -1.0), v[i]);
            acc += &(&d * fi);
        }
        acc
    }
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = v;
    e
}

/// Verification minimizers accumulated as cuts.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CutSet {
    pub points: Vec<Vec<f64>>,
}

impl CutSet {
    /// Adds `v` unless a stored point lies within `tol` (max norm).
    pub fn insert(&mut self, v: Vec<f64>, tol: f64) -> bool {
        let dup = self.points.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= tol));
        if !dup {
            self.points.push(v);
        }
        !dup
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct VipOptions {
    pub seed: u64,
    pub max_loops: usize,
    /// Radius for the bounded verification problem `‖x − u‖² ≤ R`;
    /// `‖u‖² + 100` when unset.
    pub r_fallback: Option<f64>,
    /// Acceptance threshold on `|ε|`.
    pub tol_eps: f64,
    pub delta0: f64,
    pub rho: f64,
    pub max_shrinks: usize,
    pub max_solutions: usize,
    pub cut_tol: f64,
    /// Refine candidates by Gauss-Newton on the KKT equations.
    pub polish: bool,
    pub hierarchy: HierarchyOptions,
}

impl Default for VipOptions {
    fn default() -> Self {
        VipOptions {
            seed: 0,
            max_loops: 10,
            r_fallback: None,
            tol_eps: 1e-6,
            delta0: 1.0,
            rho: 0.5,
            max_shrinks: 20,
            max_solutions: 32,
            cut_tol: 1e-8,
            polish: true,
            hierarchy: HierarchyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub point: Vec<f64>,
    pub epsilon: f64,
    pub theta: f64,
    /// Candidate loops spent on this solution.
    pub loops: usize,
    pub kkt_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub enum SolveOutcome {
    Solution(Solution),
    /// A relaxation of the candidate problem was infeasible.
    NoSolution { loop_index: usize, order: u32 },
    Inconclusive { candidate: Option<Vec<f64>>, epsilon: Option<f64>, reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveAll {
    pub solutions: Vec<Solution>,
    /// True when the search ended with an infeasibility certificate.
    pub complete: bool,
    /// Set when the very first candidate problem was infeasible.
    pub no_solution_order: Option<u32>,
    pub reason: Option<String>,
    pub trace: Vec<StepRecord>,
}
