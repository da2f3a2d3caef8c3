//! Semidefinite programs in "LMI form" and a reference interior point solver.
//!
//! An [`SdpProblem`] has free variables `y ∈ R^m`, the objective `min c·y`,
//! sparse equality rows `a_i·y = b_i`, and affine blocks
//! `F_b(y) = A_0 + Σ_j y_j A_j` that must be positive semidefinite. This is
//! exactly the shape of a moment relaxation: `y` is the truncated moment
//! vector, the rows pin `y_0 = 1` and the localizing matrices of equality
//! constraints, and the blocks are moment and localizing matrices.
//!
//! Solvers plug in through [`SdpBackend`]; [`InteriorPoint`] is the default.

mod ipm;
mod sdpa;

pub use ipm::InteriorPoint;
pub use sdpa::write_sdpa;

use serde::Serialize;

/// Upper-triangular (`i ≤ j`) coordinate entry of a symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymEntry {
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

/// Coefficient `v` of variable `var` at position `(i, j)` of a block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearEntry {
    pub var: usize,
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

/// Affine symmetric block `A_0 + Σ_j y_j A_j ⪰ 0`.
///
/// With a `face` basis `Q` (orthonormal columns) the constraint imposed is
/// `Qᵀ F(y) Q ⪰ 0`. This is equivalent to `F(y) ⪰ 0` when every feasible
/// `y` is known to give `F(y) v = 0` for `v ⟂ range(Q)`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PsdBlock {
    pub size: usize,
    pub constant: Vec<SymEntry>,
    pub linear: Vec<LinearEntry>,
    #[serde(skip)]
    pub face: Option<nalgebra::DMatrix<f64>>,
}

impl PsdBlock {
    pub fn new(size: usize) -> Self {
        PsdBlock { size, ..Default::default() }
    }

    pub fn add_constant(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.constant.push(SymEntry { i, j, v });
    }

    pub fn add_linear(&mut self, var: usize, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.linear.push(LinearEntry { var, i, j, v });
    }

    /// Order of the cone the block is constrained to.
    pub fn cone_size(&self) -> usize {
        self.face.as_ref().map_or(self.size, |q| q.ncols())
    }

    /// Dense value of the block at `y`, before any face restriction.
    pub fn evaluate(&self, y: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for e in &self.constant {
            m[(e.i, e.j)] += e.v;
            if e.i != e.j {
                m[(e.j, e.i)] += e.v;
            }
        }
        for e in &self.linear {
            let v = e.v * y[e.var];
            m[(e.i, e.j)] += v;
            if e.i != e.j {
                m[(e.j, e.i)] += v;
            }
        }
        m
    }
}

/// Sparse equality row `Σ coeffs · y = rhs`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EqualityRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Vec<EqualityRow>,
    pub blocks: Vec<PsdBlock>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        SdpProblem { num_vars, objective: vec![0.0; num_vars], ..Default::default() }
    }

    /// Checks index bounds and finiteness.
    pub fn validate(&self) -> Result<(), String> {
        if self.objective.len() != self.num_vars {
            return Err(format!(
                "objective has length {} but there are {} variables",
                self.objective.len(),
                self.num_vars
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("non-finite objective coefficient".into());
        }
        for (r, row) in self.equalities.iter().enumerate() {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|&(j, v)| j >= self.num_vars || !v.is_finite()) {
                return Err(format!("equality row {r} is malformed"));
            }
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let bad_pos = |i: usize, j: usize| i > j || j >= blk.size;
            if blk.constant.iter().any(|e| bad_pos(e.i, e.j) || !e.v.is_finite())
                || blk
                    .linear
                    .iter()
                    .any(|e| bad_pos(e.i, e.j) || e.var >= self.num_vars || !e.v.is_finite())
            {
                return Err(format!("block {b} is malformed"));
            }
            if let Some(q) = &blk.face {
                if q.nrows() != blk.size || q.ncols() > blk.size || q.iter().any(|v| !v.is_finite()) {
                    return Err(format!("face basis of block {b} is malformed"));
                }
            }
        }
        Ok(())
    }

    /// `max_i |a_i·y − b_i|`.
    pub fn equality_residual(&self, y: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|r| (r.coeffs.iter().map(|&(j, v)| v * y[j]).sum::<f64>() - r.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of each block, restricted to its face, at `y`.
    pub fn block_min_eigenvalues(&self, y: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                if b.cone_size() == 0 {
                    return f64::INFINITY;
                }
                match &b.face {
                    Some(q) => (q.transpose() * b.evaluate(y) * q).symmetric_eigenvalues().min(),
                    None => b.evaluate(y).symmetric_eigenvalues().min(),
                }
            })
            .collect()
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    /// Dual infeasible: the objective is unbounded below.
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Relative primal residual (equalities and block definitions).
    pub primal: f64,
    /// Relative dual residual.
    pub dual: f64,
    /// Duality gap `⟨S, Z⟩` of the normalized iterate.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SdpResult {
    pub status: SdpStatus,
    /// Primal variables (meaningful on `Optimal`; last iterate otherwise).
    pub y: Vec<f64>,
    pub primal_objective: f64,
    /// Dual bound; on `Optimal` this agrees with the primal value up to the gap.
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Why the solver stopped, for diagnostics.
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Steps shorter than this for several iterations count as a stall.
    pub min_step: f64,
    pub verbose: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { tol: 1e-8, max_iters: 200, min_step: 1e-8, verbose: false }
    }
}

/// Anything that can solve an [`SdpProblem`].
pub trait SdpBackend {
    fn solve(&self, problem: &SdpProblem, settings: &SdpSettings) -> SdpResult;

    fn name(&self) -> &str;
}
