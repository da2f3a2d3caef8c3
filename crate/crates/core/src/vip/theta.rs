use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::poly::Polynomial;

/// `θ(x) = [x]₁ᵀ RᵀR [x]₁` with `[x]₁ = (1, x_1, …, x_n)`.
#[derive(Clone, Debug)]
pub struct ThetaForm {
    pub r: DMatrix<f64>,
    /// `Θ = RᵀR`.
    pub gram: DMatrix<f64>,
    pub poly: Polynomial,
}

impl ThetaForm {
    pub fn from_r(r: DMatrix<f64>) -> Self {
        let gram = r.transpose() * &r;
        let poly = Polynomial::quadratic_form(&gram);
        ThetaForm { r, gram, poly }
    }

    pub fn n(&self) -> usize {
        self.gram.nrows() - 1
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }
}

/// Seeded `R` with standard normal entries, resampled until `RᵀR` has
/// smallest eigenvalue above `1e-8`.
pub fn random_theta(n: usize, seed: u64) -> ThetaForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let r = DMatrix::from_fn(n + 1, n + 1, |_, _| StandardNormal.sample(&mut rng));
        let gram: DMatrix<f64> = r.transpose() * &r;
        if gram.symmetric_eigenvalues().min() > 1e-8 {
            return ThetaForm::from_r(r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(random_theta(3, 7).r, random_theta(3, 7).r);
        assert_ne!(random_theta(3, 7).r, random_theta(3, 8).r);
    }

    #[test]
    fn polynomial_matches_gram_form() {
        let th = random_theta(3, 11);
        let x = [0.4, -1.3, 2.0];
        let lifted = DVector::from_vec(vec![1.0, x[0], x[1], x[2]]);
        let direct = (lifted.transpose() * &th.gram * &lifted)[(0, 0)];
        assert!((th.value(&x) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        assert!(th.value(&x) >= 0.0);
    }

    #[test]
    fn strictly_convex() {
        let th = random_theta(4, 3);
        let n = th.n();
        let hess: DMatrix<f64> = th.gram.view((1, 1), (n, n)).into_owned() * 2.0;
        assert!(hess.symmetric_eigenvalues().min() > 0.0);
    }
}
