//! Hand-written regression problems with known answers.

use crate::error::{Error, Result};
use crate::lme::{ConstraintKind, ConstraintSystem, LmeKind};
use crate::poly::Polynomial;
use crate::vip::{LmeSource, VipProblem};

/// Names accepted by [`load`].
pub const NAMES: &[&str] = &[
    "ncp4",
    "product_constraint",
    "gnep_ball",
    "ring_four",
    "ring_empty",
    "eig_linear",
    "eig_soc",
    "capital_stock",
];

pub fn load(name: &str) -> Result<VipProblem> {
    match name {
        "ncp4" => ncp4(),
        "product_constraint" => product_constraint(),
        "gnep_ball" => gnep_ball(),
        "ring_four" => ring_four(),
        "ring_empty" => ring_empty(),
        "eig_linear" => eig_linear(),
        "eig_soc" => eig_soc(),
        "capital_stock" => capital_stock(),
        _ => Err(Error::UnknownKind(name.to_string())),
    }
}

/// Catalog LME attached to a named fixture.
pub fn lme_kind(name: &str) -> Option<LmeKind> {
    Some(match name {
        "ncp4" | "capital_stock" => LmeKind::Orthant,
        "product_constraint" => LmeKind::OrthantWithProduct,
        "gnep_ball" => LmeKind::Ball,
        "ring_four" | "ring_empty" => LmeKind::Ring,
        "eig_linear" => LmeKind::QuadricWithLinear,
        "eig_soc" => LmeKind::SecondOrderCone,
        _ => return None,
    })
}

fn polys(n: usize, src: &[&str]) -> Result<Vec<Polynomial>> {
    src.iter().map(|s| Polynomial::parse(n, s)).collect()
}

fn orthant_tail(n: usize, head: Vec<Polynomial>, head_kinds: Vec<ConstraintKind>, skip: usize) -> Result<ConstraintSystem> {
    let mut g = head;
    let mut kinds = head_kinds;
    for i in skip..n {
        g.push(Polynomial::var(n, i));
        kinds.push(ConstraintKind::Ineq);
    }
    ConstraintSystem::new(n, g, kinds)
}

/// Nonlinear complementarity problem on `R^4_+` with two solutions,
/// `(√6/2, 0, 0, 1/2)` and `(1, 0, 3, 0)`.
pub fn ncp4() -> Result<VipProblem> {
    let n = 4;
    let f = polys(
        n,
        &[
            "3*x1^2 + 2*x1*x2 + 2*x2^2 + x3 + 3*x4 - 6",
            "2*x1^2 + x1 + x2^2 + 10*x3 + 2*x4 - 2",
            "3*x1^2 + x1*x2 + 2*x2^2 + 2*x3 + 9*x4 - 9",
            "x1^2 + 3*x2^2 + 2*x3 + 3*x4 - 3",
        ],
    )?;
    VipProblem::new(f, ConstraintSystem::orthant(n), LmeSource::Catalog(LmeKind::Orthant))
}

/// Nonmonotone map on `{x ≥ 0, x1x2x3x4 = 2}`; the solution set is empty.
pub fn product_constraint() -> Result<VipProblem> {
    let n = 4;
    let f = polys(
        n,
        &[
            "-x1 + 4*x1*x2 + x2^2 + x3 - x4 + 1",
            "2*x1^2 + x1 - x2^3 - 10*x3 + 2*x4",
            "3*x1^3 + x1*x2 + 2*x2^2 - 2*x3 + 9*x4",
            "x1^2 - 3*x2^2 + 2*x3 - 3*x4 - 4",
        ],
    )?;
    let cs = orthant_tail(n, polys(n, &["2 - x1*x2*x3*x4"])?, vec![ConstraintKind::Eq], 0)?;
    VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::OrthantWithProduct))
}

/// Normalized equilibria of a two-player game with a shared unit ball.
/// Unique solution `x1 = x2 = x3 ≈ −0.4934`, `x4 = x5 = x6 ≈ 0.2998`.
pub fn gnep_ball() -> Result<VipProblem> {
    let n = 6;
    let f = polys(
        n,
        &[
            "10*x4 - 1",
            "10*x5 - 1",
            "10*x6 - 1",
            "2*x1^2*x4 + 3*x1*x2*x3 - 1",
            "2*x2^2*x5 + 3*x1*x2*x3 - 1",
            "2*x3^2*x6 + 3*x1*x2*x3 - 1",
        ],
    )?;
    let cs = ConstraintSystem::new(n, polys(n, &["1 - x1^2 - x2^2 - x3^2 - x4^2 - x5^2 - x6^2"])?, vec![ConstraintKind::Ineq])?;
    VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::Ball))
}

fn ring(f: &[&str]) -> Result<VipProblem> {
    let n = 4;
    let cs = ConstraintSystem::new(
        n,
        polys(n, &["x1^2 + x2^2 + x3^2 + x4^2 - 1", "2 - x1^2 - x2^2 - x3^2 - x4^2"])?,
        vec![ConstraintKind::Ineq, ConstraintKind::Ineq],
    )?;
    VipProblem::new(polys(n, f)?, cs, LmeSource::Catalog(LmeKind::Ring))
}

/// Nonmonotone map on the ring `1 ≤ xᵀx ≤ 2`; four solutions.
pub fn ring_four() -> Result<VipProblem> {
    ring(&["x1 + x2 + x3 + x4", "x1 - x2^2 + x3 - x4", "-x3 - x1*x2", "x4 - x1*x2"])
}

/// Same ring with a map for which no solution exists.
pub fn ring_empty() -> Result<VipProblem> {
    ring(&["-x1 - x2 - x3 - x4", "x1 - x2 + x3 - x4", "x3 - x1*x2", "x4 - x1*x2"])
}

const EIG_A: [[f64; 4]; 4] = [[-8.0, -4.0, 8.0, -6.0], [-8.0, -4.0, 4.0, -9.0], [-7.0, -6.0, 1.0, 9.0], [-6.0, -5.0, -7.0, 4.0]];
const EIG_B: [[f64; 4]; 4] = [[4.0, 0.0, 3.0, -1.0], [0.0, 4.0, -1.0, -2.0], [3.0, -1.0, 4.0, 0.0], [-1.0, -2.0, 0.0, 2.0]];

/// `F(x) = Ax` for a dense matrix given by rows.
pub fn linear_map(a: &[Vec<f64>]) -> Vec<Polynomial> {
    a.iter().map(|row| Polynomial::affine(row, 0.0)).collect()
}

/// `xᵀBx − 1`.
pub fn unit_quadric(b: &nalgebra::DMatrix<f64>) -> Polynomial {
    let n = b.nrows();
    let mut q = nalgebra::DMatrix::zeros(n + 1, n + 1);
    q.view_mut((1, 1), (n, n)).copy_from(b);
    q[(0, 0)] = -1.0;
    Polynomial::quadratic_form(&q)
}

fn eig_data() -> (Vec<Polynomial>, Polynomial) {
    let a: Vec<Vec<f64>> = EIG_A.iter().map(|r| r.to_vec()).collect();
    let b = nalgebra::DMatrix::from_fn(4, 4, |i, j| EIG_B[i][j]);
    (linear_map(&a), unit_quadric(&b))
}

/// Constrained eigenvalue problem over `{x ≥ 0, x1 ≥ x2 + x3 + x4}`
/// intersected with `xᵀBx = 1`. Unique solution `(0.5534, 0.2372, 0, 0.3162)`.
pub fn eig_linear() -> Result<VipProblem> {
    let (f, g0) = eig_data();
    eig_linear_with(f, g0)
}

/// Builds the linear-cone eigenvalue VIP for any `F` and quadric `g0`.
pub fn eig_linear_with(f: Vec<Polynomial>, g0: Polynomial) -> Result<VipProblem> {
    let n = f.len();
    let mut lin = Polynomial::var(n, 0);
    for i in 1..n {
        lin = &lin - &Polynomial::var(n, i);
    }
    let cs = orthant_tail(n, vec![g0, lin], vec![ConstraintKind::Eq, ConstraintKind::Ineq], 1)?;
    VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::QuadricWithLinear))
}

/// The same eigenvalue problem over the second-order cone; needs a
/// rational multiplier expression.
pub fn eig_soc() -> Result<VipProblem> {
    let (f, g0) = eig_data();
    eig_soc_with(f, g0)
}

pub fn eig_soc_with(f: Vec<Polynomial>, g0: Polynomial) -> Result<VipProblem> {
    let n = f.len();
    let mut cone = Polynomial::var(n, n - 1).pow(2);
    for i in 0..n - 1 {
        cone = &cone - &Polynomial::var(n, i).pow(2);
    }
    let cs = ConstraintSystem::new(n, vec![g0, cone], vec![ConstraintKind::Eq, ConstraintKind::Ineq])?;
    VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::SecondOrderCone))
}

/// `(∇f(x) + (Aᵀ − ρBᵀ)y, b + (B − A)x)` on `R^{n1+n2}_+` where `f` is
/// given in the first `n1` variables.
pub fn capital_map(f: &Polynomial, a: &[Vec<f64>], b: &[Vec<f64>], rhs: &[f64], rho: f64) -> Vec<Polynomial> {
    let (n1, n2) = (f.nvars(), a.len());
    let n = n1 + n2;
    let grad: Vec<Polynomial> = f.gradient().iter().map(|p| p.embed(n, 0)).collect();
    let mut out = Vec::with_capacity(n);
    for (j, gj) in grad.iter().enumerate() {
        let mut coef = vec![0.0; n];
        for i in 0..n2 {
            coef[n1 + i] = a[i][j] - rho * b[i][j];
        }
        out.push(gj + &Polynomial::affine(&coef, 0.0));
    }
    for i in 0..n2 {
        let mut coef = vec![0.0; n];
        for j in 0..n1 {
            coef[j] = b[i][j] - a[i][j];
        }
        out.push(Polynomial::affine(&coef, rhs[i]));
    }
    out
}

/// Invariant capital stock with a quartic loss, `n1 = 4`, `n2 = 3`,
/// `ρ = 0.7`. Solution `u = (0.1861, 0.5845, 0.1715, 0.4868)`,
/// `v = (0, 0.2270, 0)`.
pub fn capital_stock() -> Result<VipProblem> {
    let n1 = 4;
    let mut src = String::new();
    for i in 1..=n1 {
        for j in i..=n1 {
            if i == j {
                src += &format!("x{i}^4 + ");
            } else {
                src += &format!("x{i}^2*x{j}^2 + ");
            }
        }
    }
    src += "2*x1^3*x2 + 2*x1*x2^3 + x3^3 + x4^3 - x1 - x2 - x3 - x4";
    let f = Polynomial::parse(n1, &src)?;
    let a = vec![vec![-3.0, 1.0, 1.0, -3.0], vec![1.0, -1.0, 3.0, 1.0], vec![1.0, 0.0, -3.0, 2.0]];
    let b = vec![vec![5.0, 4.0, 1.0, 1.0], vec![0.0, 2.0, 0.0, 5.0], vec![2.0, 5.0, 4.0, 4.0]];
    let map = capital_map(&f, &a, &b, &[1.0, -3.0, 2.0], 0.7);
    let n = map.len();
    VipProblem::new(map, ConstraintSystem::orthant(n), LmeSource::Catalog(LmeKind::Orthant))
}
