//! Lagrange multiplier expressions and the KKT sets they induce.
//!
//! For constraints `g_1, …, g_m` let `G(x)` stack the gradients
//! `[∇g_1 … ∇g_m]` on top of `diag(g_1, …, g_m)`. A polynomial matrix `L(x)`
//! with `L(x) G(x) = I_m` turns the multipliers of every KKT pair into
//! polynomials `λ(x) = L(x) (F(x), 0)`. Rational expressions are supported
//! through denominators `q_i` with `L(x) G(x) = diag(q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Eq,
    Ineq,
}

/// `X = {x : g_i(x) = 0 (i ∈ E), g_i(x) ≥ 0 (i ∈ I)}`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub n: usize,
    pub g: Vec<Polynomial>,
    pub kinds: Vec<ConstraintKind>,
}

impl ConstraintSystem {
    pub fn new(n: usize, g: Vec<Polynomial>, kinds: Vec<ConstraintKind>) -> Result<Self> {
        if g.len() != kinds.len() {
            return Err(Error::DimensionMismatch { expected: g.len(), got: kinds.len() });
        }
        if let Some(p) = g.iter().find(|p| p.nvars() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.nvars() });
        }
        Ok(ConstraintSystem { n, g, kinds })
    }

    /// The nonnegative orthant `x ≥ 0`.
    pub fn orthant(n: usize) -> Self {
        let g = (0..n).map(|i| Polynomial::var(n, i)).collect();
        ConstraintSystem { n, g, kinds: vec![ConstraintKind::Ineq; n] }
    }

    pub fn m(&self) -> usize {
        self.g.len()
    }

    pub fn eq_indices(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.kinds[i] == ConstraintKind::Eq).collect()
    }

    pub fn ineq_indices(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.kinds[i] == ConstraintKind::Ineq).collect()
    }

    /// Largest constraint violation at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.g
            .iter()
            .zip(&self.kinds)
            .map(|(g, k)| match k {
                ConstraintKind::Eq => g.eval(x).abs(),
                ConstraintKind::Ineq => (-g.eval(x)).max(0.0),
            })
            .fold(0.0, f64::max)
    }

    /// `G(x)` as an `(n + m) × m` polynomial matrix.
    pub fn g_matrix(&self) -> Vec<Vec<Polynomial>> {
        let (n, m) = (self.n, self.m());
        let mut out = vec![vec![Polynomial::zero(n); m]; n + m];
        for (j, g) in self.g.iter().enumerate() {
            for (i, d) in g.gradient().into_iter().enumerate() {
                out[i][j] = d;
            }
            out[n + j][j] = g.clone();
        }
        out
    }
}

/// `L(x)`: `m` rows of length `n + m`, with optional denominators.
#[derive(Clone, Debug, PartialEq)]
pub struct LmeMatrix {
    pub rows: Vec<Vec<Polynomial>>,
    /// `L G = diag(denoms)` when present; denominators must be positive on `X`.
    pub denoms: Option<Vec<Polynomial>>,
}

/// Multiplier expressions `λ_i = lambdas[i] / denoms[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmeSet {
    pub lambdas: Vec<Polynomial>,
    pub denoms: Option<Vec<Polynomial>>,
}

impl LmeMatrix {
    /// `λ = L(x) (F, 0)`.
    pub fn apply(&self, f: &[Polynomial]) -> Result<LmeSet> {
        let mut lambdas = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            if row.len() < f.len() {
                return Err(Error::DimensionMismatch { expected: f.len(), got: row.len() });
            }
            let mut acc = Polynomial::zero(f.first().map_or(0, |p| p.nvars()));
            for (l, fi) in row.iter().zip(f) {
                acc += &l.try_mul(fi)?;
            }
            lambdas.push(acc);
        }
        Ok(LmeSet { lambdas, denoms: self.denoms.clone() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmeKind {
    /// `x_i ≥ 0` for all `i`.
    Orthant,
    /// `c − xᵀx ≥ 0`.
    Ball,
    /// `xᵀx − r1 ≥ 0`, `r2 − xᵀx ≥ 0`.
    Ring,
    /// `xᵀBx − c = 0`, `x_1 − x_2 − … − x_n ≥ 0`, `x_i ≥ 0 (i ≥ 2)`.
    QuadricWithLinear,
    /// `c − a·x_1⋯x_n = 0`, `x_i ≥ 0`.
    OrthantWithProduct,
    /// `xᵀBx − c = 0`, `x_n² − x_1² − … − x_{n−1}² ≥ 0`; rational.
    SecondOrderCone,
}

impl std::str::FromStr for LmeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Ok(match norm.as_str() {
            "orthant" => LmeKind::Orthant,
            "ball" => LmeKind::Ball,
            "ring" => LmeKind::Ring,
            "quadricwithlinear" => LmeKind::QuadricWithLinear,
            "orthantwithproduct" => LmeKind::OrthantWithProduct,
            "secondordercone" | "soc" => LmeKind::SecondOrderCone,
            _ => return Err(Error::UnknownKind(s.to_string())),
        })
    }
}

fn mismatch(kind: LmeKind, reason: impl Into<String>) -> Error {
    Error::TemplateMismatch { kind: format!("{kind:?}"), reason: reason.into() }
}

fn sum_squares(n: usize, vars: std::ops::Range<usize>) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for i in vars {
        let mut e = vec![0; n];
        e[i] = 2;
        p.add_term(Monomial::new(e), 1.0);
    }
    p
}

fn same(a: &Polynomial, b: &Polynomial) -> bool {
    a.try_sub(b).map(|d| d.max_abs_coeff() <= 1e-12).unwrap_or(false)
}

fn expect_kinds(kind: LmeKind, cs: &ConstraintSystem, want: &[ConstraintKind]) -> Result<()> {
    if cs.kinds != want {
        return Err(mismatch(kind, format!("expected constraint kinds {want:?}, got {:?}", cs.kinds)));
    }
    Ok(())
}

fn row_with(n: usize, m: usize) -> Vec<Polynomial> {
    vec![Polynomial::zero(n); n + m]
}

fn x_over(n: usize, s: f64) -> Vec<Polynomial> {
    (0..n).map(|i| Polynomial::var(n, i).scale(s)).collect()
}

/// `e_i − d · row` on the first `n` columns, `−d · row` elsewhere.
fn unit_minus(n: usize, i: usize, d: &Polynomial, row: &[Polynomial]) -> Vec<Polynomial> {
    let mut out: Vec<Polynomial> = row.iter().map(|l| -&(d * l)).collect();
    out[i] = &out[i] + &Polynomial::constant(n, 1.0);
    out
}

/// Quadratic form matrix and constant of `xᵀBx − c`.
fn split_quadric(kind: LmeKind, g: &Polynomial) -> Result<(nalgebra::DMatrix<f64>, f64)> {
    let n = g.nvars();
    let mut b = nalgebra::DMatrix::zeros(n, n);
    let mut c = 0.0;
    for (m, v) in g.terms() {
        let e = m.exponents();
        match m.degree() {
            0 => c = -v,
            2 => {
                let idx: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, e[i] as usize)).collect();
                if idx[0] == idx[1] {
                    b[(idx[0], idx[0])] += v;
                } else {
                    b[(idx[0], idx[1])] += v / 2.0;
                    b[(idx[1], idx[0])] += v / 2.0;
                }
            }
            _ => return Err(mismatch(kind, "quadric must be a quadratic form minus a constant")),
        }
    }
    if c == 0.0 {
        return Err(mismatch(kind, "quadric constant must be nonzero"));
    }
    Ok((b, c))
}

/// Catalog `L(x)` for a recognized constraint structure. Parameters
/// (radii, `B`, `c`) are read off the constraint polynomials.
pub fn catalog_lme(kind: LmeKind, cs: &ConstraintSystem) -> Result<LmeMatrix> {
    use ConstraintKind::{Eq, Ineq};
    let n = cs.n;
    let one = Polynomial::constant(n, 1.0);
    match kind {
        LmeKind::Orthant => {
            expect_kinds(kind, cs, &vec![Ineq; n])?;
            for (i, g) in cs.g.iter().enumerate() {
                if !same(g, &Polynomial::var(n, i)) {
                    return Err(mismatch(kind, format!("constraint {i} is not x{}", i + 1)));
                }
            }
            let rows = (0..n)
                .map(|i| {
                    let mut r = row_with(n, n);
                    r[i] = one.clone();
                    r
                })
                .collect();
            Ok(LmeMatrix { rows, denoms: None })
        }
        LmeKind::Ball => {
            expect_kinds(kind, cs, &[Ineq])?;
            let c = cs.g[0].coeff(&Monomial::one(n));
            if !(c > 0.0) || !same(&cs.g[0], &(&Polynomial::constant(n, c) - &sum_squares(n, 0..n))) {
                return Err(mismatch(kind, "constraint is not c − xᵀx with c > 0"));
            }
            let mut r = x_over(n, -1.0 / (2.0 * c));
            r.push(Polynomial::constant(n, 1.0 / c));
            Ok(LmeMatrix { rows: vec![r], denoms: None })
        }
        LmeKind::Ring => {
            expect_kinds(kind, cs, &[Ineq, Ineq])?;
            let s = sum_squares(n, 0..n);
            let r1 = -cs.g[0].coeff(&Monomial::one(n));
            let r2 = cs.g[1].coeff(&Monomial::one(n));
            if !(r1 > 0.0 && r2 > r1)
                || !same(&cs.g[0], &(&s - &Polynomial::constant(n, r1)))
                || !same(&cs.g[1], &(&Polynomial::constant(n, r2) - &s))
            {
                return Err(mismatch(kind, "constraints are not xᵀx − r1 ≥ 0, r2 − xᵀx ≥ 0 with 0 < r1 < r2"));
            }
            let w = r2 - r1;
            let cst = |v: f64| Polynomial::constant(n, v);
            let xrow = |coef: &Polynomial| -> Vec<Polynomial> {
                (0..n).map(|i| &Polynomial::var(n, i) * coef).collect()
            };
            let a1 = (&cst(r2) - &s).scale(1.0 / (2.0 * r1 * w));
            let b1 = (&s - &cst(r2 - r1)).scale(1.0 / (r1 * w));
            let c1 = s.scale(1.0 / (r1 * w));
            let a2 = (&cst(r1) - &s).scale(1.0 / (2.0 * r2 * w));
            let b2 = s.scale(1.0 / (r2 * w));
            let c2 = (&s + &cst(r2 - r1)).scale(1.0 / (r2 * w));
            let mut row1 = xrow(&a1);
            row1.extend([b1, c1]);
            let mut row2 = xrow(&a2);
            row2.extend([b2, c2]);
            Ok(LmeMatrix { rows: vec![row1, row2], denoms: None })
        }
        LmeKind::QuadricWithLinear => {
            let mut want = vec![Eq];
            want.extend(vec![Ineq; n]);
            expect_kinds(kind, cs, &want)?;
            let (_, c) = split_quadric(kind, &cs.g[0])?;
            let mut lin = Polynomial::var(n, 0);
            for i in 1..n {
                lin = &lin - &Polynomial::var(n, i);
            }
            if !same(&cs.g[1], &lin) {
                return Err(mismatch(kind, "second constraint is not x1 − x2 − … − xn"));
            }
            for i in 1..n {
                if !same(&cs.g[i + 1], &Polynomial::var(n, i)) {
                    return Err(mismatch(kind, format!("constraint {} is not x{}", i + 1, i + 1)));
                }
            }
            let m = n + 1;
            let grad0 = cs.g[0].gradient();
            let mut l0 = x_over(n, 1.0 / (2.0 * c));
            l0.push(Polynomial::constant(n, -1.0 / c));
            l0.extend(std::iter::repeat_n(Polynomial::constant(n, -1.0 / (2.0 * c)), n));
            debug_assert_eq!(l0.len(), n + m);
            let l1 = unit_minus(n, 0, &grad0[0], &l0);
            let mut rows = vec![l0.clone(), l1.clone()];
            for i in 1..n {
                let li = unit_minus(n, i, &grad0[i], &l0);
                rows.push(li.iter().zip(&l1).map(|(a, b)| a + b).collect());
            }
            Ok(LmeMatrix { rows, denoms: None })
        }
        LmeKind::OrthantWithProduct => {
            let mut want = vec![Eq];
            want.extend(vec![Ineq; n]);
            expect_kinds(kind, cs, &want)?;
            let all = Monomial::new(vec![1; n]);
            let c = cs.g[0].coeff(&Monomial::one(n));
            let a = -cs.g[0].coeff(&all);
            if c == 0.0 || a == 0.0 || cs.g[0].num_terms() != 2 {
                return Err(mismatch(kind, "first constraint is not c − a·x1⋯xn with a, c ≠ 0"));
            }
            for i in 0..n {
                if !same(&cs.g[i + 1], &Polynomial::var(n, i)) {
                    return Err(mismatch(kind, format!("constraint {} is not x{}", i + 2, i + 1)));
                }
            }
            let nc = n as f64 * c;
            let mut l0 = x_over(n, -1.0 / nc);
            l0.push(Polynomial::constant(n, 1.0 / c));
            l0.extend(std::iter::repeat_n(Polynomial::constant(n, 1.0 / nc), n));
            let grad0 = cs.g[0].gradient();
            let mut rows = vec![l0.clone()];
            for (i, d) in grad0.iter().enumerate() {
                rows.push(unit_minus(n, i, d, &l0));
            }
            Ok(LmeMatrix { rows, denoms: None })
        }
        LmeKind::SecondOrderCone => {
            expect_kinds(kind, cs, &[Eq, Ineq])?;
            if n < 2 {
                return Err(mismatch(kind, "needs n ≥ 2"));
            }
            let (_, c) = split_quadric(kind, &cs.g[0])?;
            let cone = &sum_squares(n, n - 1..n) - &sum_squares(n, 0..n - 1);
            if !same(&cs.g[1], &cone) {
                return Err(mismatch(kind, "second constraint is not xn² − x1² − … − x(n−1)²"));
            }
            let mut l0 = x_over(n, 1.0 / (2.0 * c));
            l0.push(Polynomial::constant(n, -1.0 / c));
            l0.push(Polynomial::constant(n, -1.0 / c));
            let grad0 = cs.g[0].gradient();
            let l1 = unit_minus(n, n - 1, &grad0[n - 1], &l0);
            let q1 = Polynomial::var(n, n - 1).scale(2.0);
            Ok(LmeMatrix { rows: vec![l0, l1], denoms: Some(vec![one, q1]) })
        }
    }
}

/// Checks `L G = I` (or `diag(denoms)`) coefficient-wise within `1e-12`.
pub fn verify_lme(l: &LmeMatrix, cs: &ConstraintSystem) -> bool {
    let (n, m) = (cs.n, cs.m());
    if l.rows.len() != m || l.rows.iter().any(|r| r.len() != n + m) {
        return false;
    }
    if l.denoms.as_ref().is_some_and(|d| d.len() != m) {
        return false;
    }
    let g = cs.g_matrix();
    for (i, row) in l.rows.iter().enumerate() {
        for j in 0..m {
            let mut acc = Polynomial::zero(n);
            for (k, lik) in row.iter().enumerate() {
                match lik.try_mul(&g[k][j]) {
                    Ok(p) => acc += &p,
                    Err(_) => return false,
                }
            }
            let target = if i == j {
                l.denoms.as_ref().map_or_else(|| Polynomial::constant(n, 1.0), |d| d[i].clone())
            } else {
                Polynomial::zero(n)
            };
            if !same(&acc, &target) {
                return false;
            }
        }
    }
    true
}

/// `E` (equalities) and `I` (inequalities) of the LME-substituted KKT system.
#[derive(Clone, Debug, Default)]
pub struct KktSystem {
    pub n: usize,
    pub e: Vec<Polynomial>,
    pub i: Vec<Polynomial>,
}

/// Builds `E = {F − Σ λ_i ∇g_i} ∪ {λ_i g_i : i ∈ I} ∪ {g_i : i ∈ E}` and
/// `I = {λ_i : i ∈ I} ∪ {g_i : i ∈ I}`. With denominators, stationarity is
/// multiplied by their product and `λ_i` is replaced by its numerator in
/// the other sets (valid because denominators are positive on `X`).
pub fn build_kkt_sets(f: &[Polynomial], cs: &ConstraintSystem, lme: &LmeSet) -> Result<KktSystem> {
    let (n, m) = (cs.n, cs.m());
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if lme.lambdas.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: lme.lambdas.len() });
    }
    let one = Polynomial::constant(n, 1.0);
    let denoms: Vec<Polynomial> = match &lme.denoms {
        Some(d) if d.len() != m => return Err(Error::DimensionMismatch { expected: m, got: d.len() }),
        Some(d) => d.clone(),
        None => vec![one.clone(); m],
    };
    let is_one = |p: &Polynomial| same(p, &one);
    // Product of the distinct non-trivial denominators, and Q / q_i per multiplier.
    let mut q_all = one.clone();
    for (i, d) in denoms.iter().enumerate() {
        if !is_one(d) && !denoms[..i].iter().any(|e| same(e, d)) {
            q_all = q_all.try_mul(d)?;
        }
    }
    let cofactor: Vec<Polynomial> = denoms
        .iter()
        .enumerate()
        .map(|(_, d)| {
            if is_one(d) {
                return Ok(q_all.clone());
            }
            let mut c = one.clone();
            for (j, e) in denoms.iter().enumerate() {
                if !is_one(e) && !same(e, d) && !denoms[..j].iter().any(|h| same(h, e)) {
                    c = c.try_mul(e)?;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let grads: Vec<Vec<Polynomial>> = cs.g.iter().map(|g| g.gradient()).collect();
    let mut e = Vec::new();
    for k in 0..n {
        let mut s = q_all.try_mul(&f[k])?;
        for i in 0..m {
            let t = lme.lambdas[i].try_mul(&cofactor[i])?.try_mul(&grads[i][k])?;
            s = s.try_sub(&t)?;
        }
        e.push(s);
    }
    for &i in &cs.ineq_indices() {
        e.push(lme.lambdas[i].try_mul(&cs.g[i])?);
    }
    for &i in &cs.eq_indices() {
        e.push(cs.g[i].clone());
    }
    let mut ineq = Vec::new();
    for &i in &cs.ineq_indices() {
        ineq.push(lme.lambdas[i].clone());
    }
    for &i in &cs.ineq_indices() {
        ineq.push(cs.g[i].clone());
    }
    let keep = |p: &Polynomial| p.prune(1e-14).num_terms() > 0;
    Ok(KktSystem {
        n,
        e: e.into_iter().map(|p| p.prune(1e-14)).filter(keep).collect(),
        i: ineq.into_iter().map(|p| p.prune(1e-14)).filter(keep).collect(),
    })
}

/// `max(max_E |p(x)|, max_I (−q(x))₊)`.
pub fn kkt_residual(x: &[f64], sys: &KktSystem) -> f64 {
    let e = sys.e.iter().map(|p| p.eval(x).abs());
    let i = sys.i.iter().map(|q| (-q.eval(x)).max(0.0));
    e.chain(i).fold(0.0, f64::max)
}
