//! Seeded random problem families.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use polyvi::fixtures::{capital_map, eig_linear_with, eig_soc_with, linear_map, unit_quadric};
use polyvi::lme::{ConstraintKind, ConstraintSystem, LmeKind};
use polyvi::poly::{basis, Polynomial};
use polyvi::vip::{LmeSource, VipProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::problem_file::ProblemFile;

/// Capital family discount rate.
pub const CAPITAL_RHO: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `F = A[x]_d` on the unit ball.
    Ball,
    /// `F = Ax` on `{x ≥ 0, x1 ≥ x2 + … + xn, xᵀBx = 1}`.
    EigLinear,
    /// `F = Ax` on `{xn ≥ ‖x̄‖, xᵀBx = 1}`.
    EigSoc,
    /// Invariant capital stock with `f = ‖C[x]_1‖²` on the orthant.
    Capital,
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ball" => Ok(Family::Ball),
            "eig-linear" => Ok(Family::EigLinear),
            "eig-soc" => Ok(Family::EigSoc),
            "capital" => Ok(Family::Capital),
            _ => Err(format!("unknown family `{s}` (expected ball, eig-linear, eig-soc or capital)")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Ball => "ball",
            Family::EigLinear => "eig-linear",
            Family::EigSoc => "eig-soc",
            Family::Capital => "capital",
        })
    }
}

impl Family {
    /// Meaning of the dimension arguments.
    pub fn dims_help(&self) -> &'static str {
        match self {
            Family::Ball => "n d",
            Family::EigLinear | Family::EigSoc => "n",
            Family::Capital => "n1 n2",
        }
    }

    fn check_dims(&self, dims: &[usize]) -> Result<(), String> {
        let ok = match self {
            Family::Ball => dims.len() == 2 && dims[0] >= 1 && dims[1] >= 1,
            Family::EigLinear | Family::EigSoc => dims.len() == 1 && dims[0] >= 2,
            Family::Capital => dims.len() == 2 && dims[0] >= 1 && dims[1] >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("unsupported dimensions {dims:?} for {self} (expected {})", self.dims_help()))
        }
    }
}

fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn rand01(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random::<f64>()).collect()).collect()
}

fn gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let bh = randn(rng, n, n);
    let bh = DMatrix::from_fn(n, n, |i, j| bh[i][j]);
    bh.transpose() * bh
}

/// Builds the random problem; deterministic in `seed`.
pub fn generate_problem(family: Family, dims: &[usize], seed: u64) -> Result<(VipProblem, LmeKind), String> {
    family.check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let built = match family {
        Family::Ball => {
            let (n, d) = (dims[0], dims[1] as u32);
            let mons = basis(n, d);
            let a = randn(&mut rng, n, mons.len());
            let f: Vec<Polynomial> = a
                .iter()
                .map(|row| {
                    let mut p = Polynomial::zero(n);
                    for (m, &c) in mons.entries().iter().zip(row) {
                        p.add_term(m.clone(), c);
                    }
                    p
                })
                .collect();
            let mut g = Polynomial::constant(n, 1.0);
            for i in 0..n {
                g = &g - &Polynomial::var(n, i).pow(2);
            }
            let cs = ConstraintSystem::new(n, vec![g], vec![ConstraintKind::Ineq]).map_err(|e| e.to_string())?;
            (VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::Ball)), LmeKind::Ball)
        }
        Family::EigLinear | Family::EigSoc => {
            let n = dims[0];
            let f = linear_map(&randn(&mut rng, n, n));
            let g0 = unit_quadric(&gram(&mut rng, n));
            if family == Family::EigLinear {
                (eig_linear_with(f, g0), LmeKind::QuadricWithLinear)
            } else {
                (eig_soc_with(f, g0), LmeKind::SecondOrderCone)
            }
        }
        Family::Capital => {
            let (n1, n2) = (dims[0], dims[1]);
            let a = randn(&mut rng, n2, n1);
            let c = randn(&mut rng, n1, n1 + 1);
            let b = randn(&mut rng, n2, 1).into_iter().map(|r| r[0]).collect::<Vec<_>>();
            let bp = rand01(&mut rng, n2, n1);
            // f = ‖C[x]_1‖²
            let mut f = Polynomial::zero(n1);
            for row in &c {
                let lin = Polynomial::affine(&row[1..], row[0]);
                f += &(&lin * &lin);
            }
            let map = capital_map(&f, &a, &bp, &b, CAPITAL_RHO);
            let n = map.len();
            (VipProblem::new(map, ConstraintSystem::orthant(n), LmeSource::Catalog(LmeKind::Orthant)), LmeKind::Orthant)
        }
    };
    let (p, kind) = built;
    Ok((p.map_err(|e| e.to_string())?, kind))
}

pub fn generate(family: Family, dims: &[usize], seed: u64) -> Result<ProblemFile, String> {
    let (p, kind) = generate_problem(family, dims, seed)?;
    Ok(ProblemFile::from_problem(&p, kind))
}
