use nalgebra::{DMatrix, DVector};

use crate::lme::{kkt_residual, KktSystem};
use crate::poly::Polynomial;

/// Gauss-Newton refinement of an approximate point of `Z(E) ∩ S(I)`.
///
/// Steps are minimum-norm least-squares solutions of the linearized
/// equations and are kept only while the KKT residual decreases. The
/// refined point is returned only if it stays within `radius` (max norm)
/// of `x0`; otherwise `x0` is returned unchanged.
pub fn polish(x0: &[f64], sys: &KktSystem, radius: f64) -> Vec<f64> {
    if sys.e.is_empty() {
        return x0.to_vec();
    }
    let n = x0.len();
    let jac: Vec<Vec<Polynomial>> = sys.e.iter().map(|p| p.gradient()).collect();
    let mut x = x0.to_vec();
    let mut res = kkt_residual(&x, sys);
    for _ in 0..30 {
        if res < 1e-15 {
            break;
        }
        let f = DVector::from_iterator(sys.e.len(), sys.e.iter().map(|p| -p.eval(&x)));
        let j = DMatrix::from_fn(sys.e.len(), n, |r, c| jac[r][c].eval(&x));
        let Ok(dx) = j.svd(true, true).solve(&f, 1e-12) else { break };
        let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
        let r = kkt_residual(&trial, sys);
        if !(r < res) {
            break;
        }
        x = trial;
        res = r;
    }
    let moved = x.iter().zip(x0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if moved <= radius {
        x
    } else {
        x0.to_vec()
    }
}
