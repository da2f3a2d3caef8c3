//! Upper bounds on the number of complex KKT points.

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Complete homogeneous symmetric polynomial `h_r` on the given letters,
/// i.e. the sum of `l_1^{i_1} ⋯ l_k^{i_k}` over `i_1 + … + i_k = r`.
pub fn complete_symmetric(r: u32, letters: &[u64]) -> BigUint {
    // h_r(l_1..l_k) = Σ_i l_1^i h_{r−i}(l_2..l_k), accumulated over letters.
    let mut h = vec![BigUint::from(0u32); r as usize + 1];
    h[0] = BigUint::from(1u32);
    for &l in letters {
        for s in 1..=r as usize {
            let prev = h[s - 1].clone();
            h[s] += prev * l;
        }
    }
    h[r as usize].clone()
}

/// `b_1 ⋯ b_m · S_{n−m}(max a_i, b_1, …, b_m)` for `F` of degrees `a` and
/// active constraints of degrees `b`.
pub fn algebraic_degree_bound(a: &[u32], b: &[u32]) -> Result<BigUint> {
    let (n, m) = (a.len(), b.len());
    if m > n {
        return Err(Error::InvalidProblem(format!("{m} active constraints exceed dimension {n}")));
    }
    if a.iter().chain(b).any(|&d| d == 0) {
        return Err(Error::InvalidProblem("degrees must be at least 1".into()));
    }
    let amax = *a.iter().max().unwrap_or(&1) as u64;
    let mut letters = vec![amax];
    letters.extend(b.iter().map(|&d| d as u64));
    let prod: BigUint = b.iter().map(|&d| BigUint::from(d)).product();
    Ok(prod * complete_symmetric((n - m) as u32, &letters))
}

/// One bound per active set: equalities are always active, every subset
/// of inequalities of admissible size is enumerated.
pub fn active_set_bounds(a: &[u32], eq_degrees: &[u32], ineq_degrees: &[u32]) -> Result<Vec<(Vec<usize>, BigUint)>> {
    let n = a.len();
    let m_in = ineq_degrees.len();
    if eq_degrees.len() > n {
        return Err(Error::InvalidProblem("more equalities than variables".into()));
    }
    if m_in >= usize::BITS as usize {
        return Err(Error::InvalidProblem("too many inequality constraints to enumerate".into()));
    }
    let mut out = Vec::new();
    for mask in 0usize..(1 << m_in) {
        let active: Vec<usize> = (0..m_in).filter(|&i| mask >> i & 1 == 1).collect();
        if eq_degrees.len() + active.len() > n {
            continue;
        }
        let mut b = eq_degrees.to_vec();
        b.extend(active.iter().map(|&i| ineq_degrees[i]));
        out.push((active, algebraic_degree_bound(a, &b)?));
    }
    Ok(out)
}
