use std::fmt::Write;

use nalgebra::DMatrix;

use super::{PsdBlock, SdpProblem};

/// Serializes a problem in SDPA sparse format for external solvers.
///
/// SDPA has no equality rows, so each row `a·y = b` becomes a `2×2`
/// diagonal block `diag(a·y − b, b − a·y) ⪰ 0`. Block constants move to
/// `F_0` with the sign SDPA expects (`Σ y_j F_j − F_0 ⪰ 0`). Blocks with a
/// face basis are written as their dense restriction `Qᵀ F Q`.
pub fn write_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    let neq = p.equalities.len();
    let _ = writeln!(out, "{}", p.num_vars);
    let _ = writeln!(out, "{}", p.blocks.len() + neq);
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| b.cone_size().to_string())
        .chain(std::iter::repeat_n("-2".to_string(), neq))
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let objective: Vec<String> = p.objective.iter().map(|c| format!("{c:e}")).collect();
    let _ = writeln!(out, "{}", objective.join(" "));
    for (b, blk) in p.blocks.iter().enumerate() {
        if let Some(q) = &blk.face {
            write_restricted(&mut out, b + 1, blk, q);
            continue;
        }
        for e in &blk.constant {
            let _ = writeln!(out, "0 {} {} {} {:e}", b + 1, e.i + 1, e.j + 1, -e.v);
        }
        for e in &blk.linear {
            let _ = writeln!(out, "{} {} {} {} {:e}", e.var + 1, b + 1, e.i + 1, e.j + 1, e.v);
        }
    }
    for (r, row) in p.equalities.iter().enumerate() {
        let b = p.blocks.len() + r + 1;
        let _ = writeln!(out, "0 {b} 1 1 {:e}", row.rhs);
        let _ = writeln!(out, "0 {b} 2 2 {:e}", -row.rhs);
        for &(j, v) in &row.coeffs {
            let _ = writeln!(out, "{} {b} 1 1 {v:e}", j + 1);
            let _ = writeln!(out, "{} {b} 2 2 {:e}", j + 1, -v);
        }
    }
    out
}

fn write_restricted(out: &mut String, b: usize, blk: &PsdBlock, q: &DMatrix<f64>) {
    let restrict = |entries: &mut dyn Iterator<Item = (usize, usize, f64)>| {
        let mut m = DMatrix::zeros(blk.size, blk.size);
        for (i, j, v) in entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        q.transpose() * m * q
    };
    let mut emit = |var: usize, m: &DMatrix<f64>, sign: f64| {
        for j in 0..m.ncols() {
            for i in 0..=j {
                if m[(i, j)].abs() > 1e-15 {
                    let _ = writeln!(out, "{var} {b} {} {} {:e}", i + 1, j + 1, sign * m[(i, j)]);
                }
            }
        }
    };
    emit(0, &restrict(&mut blk.constant.iter().map(|e| (e.i, e.j, e.v))), -1.0);
    let mut vars: Vec<usize> = blk.linear.iter().map(|e| e.var).collect();
    vars.sort_unstable();
    vars.dedup();
    for var in vars {
        let m = restrict(&mut blk.linear.iter().filter(|e| e.var == var).map(|e| (e.i, e.j, e.v)));
        emit(var + 1, &m, 1.0);
    }
}
