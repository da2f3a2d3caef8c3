//! Sparse multivariate polynomials over `f64`, monomial bases in graded
//! order, and truncated moment vectors.
//!
//! Monomials are ordered first by total degree and then, within a degree,
//! by descending exponent of `x1`, then `x2`, and so on. For two variables
//! and degree three this gives
//! `1, x1, x2, x1^2, x1*x2, x2^2, x1^3, x1^2*x2, x1*x2^2, x2^3`.
//! [`MonomialBasis`] and [`MomentVector`] are indexed in this order and
//! [`Polynomial`] iterates its terms in it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `α ∈ N^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// The monomial `x_i` (zero-based `i`).
    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials in `n` variables of total degree at most `d`.
pub fn basis_len(n: usize, d: u32) -> usize {
    binomial(n as u64 + d as u64, d as u64) as usize
}

fn count_exact(vars: usize, degree: u32) -> u64 {
    if vars == 0 {
        return u64::from(degree == 0);
    }
    binomial(degree as u64 + vars as u64 - 1, vars as u64 - 1)
}

/// Position of `exps` in the graded order (the index into any basis that
/// contains it).
pub fn monomial_index(exps: &[u32]) -> usize {
    let n = exps.len();
    let total: u32 = exps.iter().sum();
    let mut idx = if total == 0 { 0 } else { basis_len(n, total - 1) as u64 };
    let mut remaining = total;
    for (i, &a) in exps.iter().enumerate().take(n.saturating_sub(1)) {
        let rest = n - i - 1;
        for e in (a + 1)..=remaining {
            idx += count_exact(rest, remaining - e);
        }
        remaining -= a;
    }
    idx as usize
}

/// All monomials of degree at most `d`, in graded order.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n: usize,
    d: u32,
    entries: Vec<Monomial>,
}

fn push_degree(n: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if prefix.len() == n - 1 {
        prefix.push(degree);
        out.push(Monomial(prefix.clone()));
        prefix.pop();
        return;
    }
    for e in (0..=degree).rev() {
        prefix.push(e);
        push_degree(n, degree - e, prefix, out);
        prefix.pop();
    }
}

/// Enumerates `N^n_d` in graded order.
pub fn basis(n: usize, d: u32) -> MonomialBasis {
    assert!(n >= 1, "basis needs at least one variable");
    let mut entries = Vec::with_capacity(basis_len(n, d));
    let mut prefix = Vec::with_capacity(n);
    for degree in 0..=d {
        push_degree(n, degree, &mut prefix, &mut entries);
    }
    MonomialBasis { n, d, entries }
}

impl MonomialBasis {
    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.entries[i]
    }

    /// Index of `m`, if its degree fits this basis.
    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        (m.nvars() == self.n && m.degree() <= self.d).then(|| monomial_index(m.exponents()))
    }

    /// The vector `[x]_d` evaluated at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|m| m.eval(x)).collect()
    }
}

/// One serialized term: `{"coef": 3.0, "exp": [2, 0, 1]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub exp: Vec<u32>,
}

/// Sparse polynomial in `n` variables. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(n, Monomial::one(n), c)
    }

    pub fn monomial(n: usize, m: Monomial, c: f64) -> Self {
        assert_eq!(m.nvars(), n);
        let mut p = Polynomial::zero(n);
        p.add_term(m, c);
        p
    }

    /// The coordinate polynomial `x_i` (zero-based).
    pub fn var(n: usize, i: usize) -> Self {
        Self::monomial(n, Monomial::var(n, i), 1.0)
    }

    pub fn from_terms(n: usize, terms: &[Term]) -> Result<Self> {
        let mut p = Polynomial::zero(n);
        for t in terms {
            if t.exp.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: t.exp.len() });
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidProblem(format!("non-finite coefficient {}", t.coef)));
            }
            p.add_term(Monomial(t.exp.clone()), t.coef);
        }
        Ok(p)
    }

    pub fn to_terms(&self) -> Vec<Term> {
        self.terms
            .iter()
            .map(|(m, &c)| Term { coef: c, exp: m.0.clone() })
            .collect()
    }

    /// `Σ_i coeffs[i] * x_i + constant`.
    pub fn affine(coeffs: &[f64], constant: f64) -> Self {
        let n = coeffs.len();
        let mut p = Polynomial::constant(n, constant);
        for (i, &c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::var(n, i), c);
        }
        p
    }

    /// Quadratic form `v^T Q v` with `v = [x]_1 = (1, x1, …, xn)`.
    pub fn quadratic_form(q: &nalgebra::DMatrix<f64>) -> Self {
        let n = q.nrows() - 1;
        let lin = basis(n, 1);
        let mut p = Polynomial::zero(n);
        for i in 0..=n {
            for j in 0..=n {
                p.add_term(lin.get(i).mul(lin.get(j)), q[(i, j)]);
            }
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.n);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn check_dim(&self, other: &Polynomial) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out = Polynomial::zero(self.n);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect(),
        }
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn prune(&self, tol: f64) -> Polynomial {
        Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        (0..e).fold(Polynomial::constant(self.n, 1.0), |acc, _| &acc * self)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// Evaluation without the length check.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum()
    }

    /// `∂p/∂x_i` (zero-based `i`).
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (m, &c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut exps = m.0.clone();
                exps[i] -= 1;
                out.add_term(Monomial(exps), c * e as f64);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n).map(|i| self.derivative(i)).collect()
    }

    /// Re-embeds into `n_new ≥ n` variables, placing the current ones at
    /// `offset..offset+n`.
    pub fn embed(&self, n_new: usize, offset: usize) -> Polynomial {
        assert!(offset + self.n <= n_new);
        let mut out = Polynomial::zero(n_new);
        for (m, &c) in &self.terms {
            let mut e = vec![0; n_new];
            e[offset..offset + self.n].copy_from_slice(&m.0);
            out.add_term(Monomial(e), c);
        }
        out
    }

    /// Substitutes `x_i ← x_i + shift_i`.
    pub fn shift(&self, shift: &[f64]) -> Polynomial {
        let n = self.n;
        let lin: Vec<Polynomial> = (0..n)
            .map(|i| Polynomial::var(n, i).try_add(&Polynomial::constant(n, shift[i])).unwrap())
            .collect();
        let mut out = Polynomial::zero(n);
        for (m, &c) in &self.terms {
            let mut t = Polynomial::constant(n, c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = &t * &lin[i].pow(e);
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Moment pairing `⟨p, y⟩ = Σ p_α y_α`.
    pub fn pairing(&self, y: &MomentVector) -> Result<f64> {
        if self.n != y.nvars() {
            return Err(Error::DimensionMismatch { expected: y.nvars(), got: self.n });
        }
        if self.degree() > y.degree() {
            return Err(Error::DegreeOverflow { degree: self.degree(), order: y.degree() });
        }
        Ok(self
            .terms
            .iter()
            .map(|(m, &c)| c * y.values[monomial_index(&m.0)])
            .sum())
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &'a Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &'a Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &'a Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial dimension mismatch")
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl AddAssign<&Polynomial> for Polynomial {
    fn add_assign(&mut self, rhs: &Polynomial) {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        for (m, &c) in &rhs.terms {
            self.add_term(m.clone(), c);
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let a = c.abs();
            let vars: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
                .collect();
            if vars.is_empty() {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{a}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Truncated multi-sequence `y ∈ R^{N^n_{2k}}`, indexed in graded order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    n: usize,
    degree: u32,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(n: usize, degree: u32, values: Vec<f64>) -> Result<Self> {
        let len = basis_len(n, degree);
        if values.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: values.len() });
        }
        Ok(MomentVector { n, degree, values })
    }

    pub fn zeros(n: usize, degree: u32) -> Self {
        MomentVector { n, degree, values: vec![0.0; basis_len(n, degree)] }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    /// Degree of the sequence (`2k` for a relaxation of order `k`).
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, m: &Monomial) -> f64 {
        assert!(m.degree() <= self.degree);
        self.values[monomial_index(m.exponents())]
    }

    /// `(y_{e_1}, …, y_{e_n})`.
    pub fn first_order(&self) -> Vec<f64> {
        self.values[1..=self.n].to_vec()
    }

    /// Restriction to degree `d ≤ self.degree()`.
    pub fn truncate(&self, d: u32) -> MomentVector {
        assert!(d <= self.degree);
        MomentVector { n: self.n, degree: d, values: self.values[..basis_len(self.n, d)].to_vec() }
    }

    /// `Σ w_i · lift(points[i])`.
    pub fn from_atoms(points: &[Vec<f64>], weights: &[f64], degree: u32) -> MomentVector {
        let n = points[0].len();
        let mut y = MomentVector::zeros(n, degree);
        for (p, &w) in points.iter().zip(weights) {
            for (v, l) in y.values.iter_mut().zip(lift(p, degree).values) {
                *v += w * l;
            }
        }
        y
    }
}

/// `[x]_{degree}` as a moment vector (the Dirac measure at `x`).
pub fn lift(x: &[f64], degree: u32) -> MomentVector {
    let b = basis(x.len(), degree);
    MomentVector { n: x.len(), degree, values: b.evaluate(x) }
}

/// `⟨f, y⟩`.
pub fn pairing(f: &Polynomial, y: &MomentVector) -> Result<f64> {
    f.pairing(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, terms: &[(f64, &[u32])]) -> Polynomial {
        let t: Vec<Term> = terms.iter().map(|(c, e)| Term { coef: *c, exp: e.to_vec() }).collect();
        Polynomial::from_terms(n, &t).unwrap()
    }

    #[test]
    fn basis_order_two_vars_degree_three() {
        let b = basis(2, 3);
        let got: Vec<Vec<u32>> = b.entries().iter().map(|m| m.exponents().to_vec()).collect();
        let want: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
            vec![3, 0],
            vec![2, 1],
            vec![1, 2],
            vec![0, 3],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn constant_only_basis() {
        let b = basis(1, 0);
        assert_eq!(b.len(), 1);
        assert!(b.get(0).is_one());
    }

    #[test]
    fn basis_counts_match_enumeration() {
        // Brute force: every α in {0..=d}^n with |α| ≤ d.
        for n in 1..=4usize {
            for d in 0..=4u32 {
                let mut count = 0;
                let total = (d as usize + 1).pow(n as u32);
                for code in 0..total {
                    let mut c = code;
                    let mut s = 0;
                    for _ in 0..n {
                        s += c % (d as usize + 1);
                        c /= d as usize + 1;
                    }
                    if s <= d as usize {
                        count += 1;
                    }
                }
                assert_eq!(basis(n, d).len(), count, "n={n} d={d}");
            }
        }
        assert_eq!(basis(3, 2).len(), 10);
    }

    #[test]
    fn index_matches_position_and_prefix_property() {
        for n in 1..=4 {
            let small = basis(n, 3);
            let big = basis(n, 4);
            for (i, m) in big.entries().iter().enumerate() {
                assert_eq!(monomial_index(m.exponents()), i);
                if i < small.len() {
                    assert_eq!(small.get(i), m);
                }
            }
            for w in big.entries().windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn arithmetic_examples() {
        let x1p1 = p(1, &[(1.0, &[1]), (1.0, &[0])]);
        let x1m1 = p(1, &[(1.0, &[1]), (-1.0, &[0])]);
        assert_eq!(&x1p1 * &x1m1, p(1, &[(1.0, &[2]), (-1.0, &[0])]));
        assert!((&x1p1 + &(-&x1p1)).is_zero());
        let a = p(2, &[(2.0, &[1, 1])]);
        let b = p(2, &[(3.0, &[0, 1])]);
        assert_eq!(&a * &b, p(2, &[(6.0, &[1, 2])]));
        assert!(a.try_add(&x1p1).is_err());
    }

    #[test]
    fn evaluation_and_gradients() {
        let q = p(2, &[(1.0, &[2, 0]), (3.0, &[0, 2])]);
        assert_eq!(q.evaluate(&[1.0, 1.0]).unwrap(), 4.0);
        assert!(q.evaluate(&[1.0]).is_err());

        // 1 - x^T x has gradient -2x.
        let n = 3;
        let mut ball = Polynomial::constant(n, 1.0);
        for i in 0..n {
            ball.add_term(Monomial::new((0..n).map(|j| if j == i { 2 } else { 0 }).collect()), -1.0);
        }
        let g = ball.gradient();
        for (i, gi) in g.iter().enumerate() {
            assert_eq!(*gi, Polynomial::var(n, i).scale(-2.0));
        }
        assert!(Polynomial::constant(3, 5.0).gradient().iter().all(Polynomial::is_zero));
    }

    #[test]
    fn pairing_examples() {
        let f = p(1, &[(1.0, &[0]), (2.0, &[1])]);
        let y = MomentVector::new(1, 2, vec![1.0, 3.0, 0.0]).unwrap();
        assert_eq!(f.pairing(&y).unwrap(), 7.0);
        assert_eq!(Polynomial::zero(1).pairing(&y).unwrap(), 0.0);
        let cubic = p(1, &[(1.0, &[3])]);
        assert!(matches!(cubic.pairing(&y), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn lift_examples() {
        let y = lift(&[0.0, 0.0, 0.0], 4);
        assert_eq!(y.values()[0], 1.0);
        assert!(y.values()[1..].iter().all(|&v| v == 0.0));
        assert!(lift(&[1.0; 3], 4).values().iter().all(|&v| v == 1.0));
        let y = lift(&[2.0, 3.0], 4);
        assert_eq!(y.get(&Monomial::new(vec![1, 2])), 18.0);
    }

    #[test]
    fn json_round_trip() {
        let q = p(2, &[(1.5, &[2, 0]), (-3.0, &[0, 1]), (4.0, &[0, 0])]);
        let s = serde_json::to_string(&q.to_terms()).unwrap();
        let back: Vec<Term> = serde_json::from_str(&s).unwrap();
        assert_eq!(Polynomial::from_terms(2, &back).unwrap(), q);
    }

    #[test]
    fn shift_matches_evaluation() {
        let q = p(2, &[(1.5, &[2, 1]), (-3.0, &[0, 1]), (4.0, &[0, 0])]);
        let s = q.shift(&[0.5, -2.0]);
        let x = [0.3, 0.7];
        assert!((s.eval(&x) - q.eval(&[0.8, -1.3])).abs() < 1e-12);
    }
}
