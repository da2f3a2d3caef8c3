//! Flat truncation and minimizer extraction from moment matrices.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::poly::{basis, basis_len, monomial_index, MomentVector};

use super::{localizing_template, Polynomial};

#[derive(Clone, Debug)]
pub struct ExtractionOptions {
    /// Relative singular value cutoff for numerical ranks.
    pub rank_tol: f64,
    /// Bound on `‖M_t − Σ w_i [u_i][u_i]ᵀ‖_F / max(1, ‖M_t‖_F)`.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions { rank_tol: 1e-4, residual_tol: 1e-4, seed: 0x5eed }
    }
}

/// `M_t[y]`.
pub fn moment_matrix(y: &MomentVector, t: u32) -> DMatrix<f64> {
    let n = y.nvars();
    localizing_template(&Polynomial::constant(n, 1.0), t, n)
        .expect("constant polynomial fits every order")
        .instantiate(y.values())
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Returns `rank M_t[y]` when it equals `rank M_{t−d0}[y]`.
pub fn flat_truncation(y: &MomentVector, d0: u32, t: u32, tol_rank: f64) -> Option<usize> {
    if t < d0 || 2 * t > y.degree() {
        return None;
    }
    let r = numerical_rank(&moment_matrix(y, t), tol_rank);
    let r0 = numerical_rank(&moment_matrix(y, t - d0), tol_rank);
    (r == r0 && r > 0).then_some(r)
}

/// Recovers the `r` atoms of a flat moment matrix `M_t[y]` by column
/// echelon reduction of its range and simultaneous triangularization of the
/// multiplication matrices.
pub fn extract_minimizers(y: &MomentVector, t: u32, r: usize, opts: &ExtractionOptions) -> Result<Vec<Vec<f64>>> {
    match extract_once(y, t, r, opts, opts.seed) {
        Ok(pts) => Ok(pts),
        Err(_) => extract_once(y, t, r, opts, opts.seed.wrapping_add(1)),
    }
}

fn extract_once(y: &MomentVector, t: u32, r: usize, opts: &ExtractionOptions, seed: u64) -> Result<Vec<Vec<f64>>> {
    let fail = |msg: &str| Err(Error::ExtractionFailed(msg.to_string()));
    let n = y.nvars();
    if r == 0 || 2 * t > y.degree() {
        return fail("rank must be positive and t within the moment degree");
    }
    let m = moment_matrix(y, t);
    let s = m.nrows();
    if r > s {
        return fail("rank exceeds matrix size");
    }

    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::zeros(s, r);
    for (c, &k) in order.iter().take(r).enumerate() {
        let lam = eig.eigenvalues[k];
        if lam <= 0.0 {
            return fail("moment matrix has fewer positive eigenvalues than the rank");
        }
        v.set_column(c, &(eig.eigenvectors.column(k) * lam.sqrt()));
    }

    // Reduced row echelon form of vᵀ, pivoting on columns in graded order.
    let mut a = v.transpose();
    let tol = 1e-6 * a.amax().max(f64::MIN_POSITIVE);
    let mut pivots = Vec::with_capacity(r);
    let mut row = 0;
    for col in 0..s {
        if row == r {
            break;
        }
        let (p, val) = (row..r)
            .map(|i| (i, a[(i, col)].abs()))
            .fold((row, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if val <= tol {
            continue;
        }
        a.swap_rows(row, p);
        let piv = a[(row, col)];
        let scaled = a.row(row) / piv;
        a.set_row(row, &scaled);
        for i in 0..r {
            if i != row {
                let f = a[(i, col)];
                if f != 0.0 {
                    let sub = a.row(row) * f;
                    let mut ri = a.row_mut(i);
                    ri -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < r {
        return fail("column echelon reduction found too few pivots");
    }
    let u = a.transpose();

    let b = basis(n, t);
    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let mut ni = DMatrix::zeros(r, r);
        for (j, &p) in pivots.iter().enumerate() {
            let mut e = b.get(p).exponents().to_vec();
            e[i] += 1;
            let idx = monomial_index(&e);
            if idx >= s {
                return fail("shifted pivot monomial leaves the basis");
            }
            ni.set_row(j, &u.row(idx));
        }
        mult.push(ni);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = weights.iter().sum();
    let mut comb = DMatrix::zeros(r, r);
    for (ni, w) in mult.iter().zip(&weights) {
        comb += ni * (w / total);
    }
    let Some(schur) = Schur::try_new(comb, f64::EPSILON, 1000) else {
        return fail("Schur decomposition did not converge");
    };
    let (q, tri) = schur.unpack();
    let scale = tri.amax().max(1.0);
    for j in 0..r.saturating_sub(1) {
        if tri[(j + 1, j)].abs() > 1e-8 * scale {
            return fail("multiplication matrix has complex eigenvalues");
        }
    }
    let points: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            let qj = q.column(j);
            mult.iter().map(|ni| qj.dot(&(ni * qj))).collect()
        })
        .collect();

    let w = atom_weights(y, t, &points)?;
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return fail("non-positive atom weight");
    }
    let mut recon = DMatrix::zeros(s, s);
    for (p, wi) in points.iter().zip(&w) {
        let v = DVector::from_vec(b.evaluate(p));
        recon += (&v * v.transpose()) * *wi;
    }
    let resid = (&m - recon).norm() / m.norm().max(1.0);
    if resid > opts.residual_tol {
        return Err(Error::ExtractionFailed(format!("reconstruction residual {resid:.2e}")));
    }
    Ok(points)
}

/// Least-squares weights `w` with `Σ w_i lift(u_i, 2t) ≈ y`.
pub fn atom_weights(y: &MomentVector, t: u32, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = y.nvars();
    let len = basis_len(n, 2 * t);
    let b = basis(n, 2 * t);
    let mut a = DMatrix::zeros(len, points.len());
    for (j, p) in points.iter().enumerate() {
        a.set_column(j, &DVector::from_vec(b.evaluate(p)));
    }
    let rhs = DVector::from_column_slice(&y.values()[..len]);
    let w = a
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::ExtractionFailed(e.to_string()))?;
    Ok(w.as_slice().to_vec())
}
