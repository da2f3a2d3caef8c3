//! Homogeneous self-dual primal-dual interior point method with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//!
//! Internally the problem is in conic form
//!
//! ```text
//! min c·x   s.t.   G x + s = h,  A x = b,  s ⪰ 0
//! ```
//!
//! with `h = A_0` and `G x = −Σ x_j A_j` per block, so `s` is the value of the
//! block at `x`. The embedding variables `τ, κ` give infeasibility
//! certificates instead of divergence.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{Residuals, SdpBackend, SdpProblem, SdpResult, SdpSettings, SdpStatus};

/// The built-in solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve(&self, problem: &SdpProblem, settings: &SdpSettings) -> SdpResult {
        if let Err(e) = problem.validate() {
            return failure(problem.num_vars, 0, format!("invalid problem: {e}"));
        }
        let started = std::time::Instant::now();
        let data = match Data::compile(problem) {
            Ok(d) => d,
            Err(Inconsistent) => {
                return SdpResult {
                    status: SdpStatus::PrimalInfeasible,
                    y: vec![0.0; problem.num_vars],
                    primal_objective: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    residuals: Residuals::default(),
                    iterations: 0,
                    message: "equality constraints are inconsistent".into(),
                }
            }
        };
        log::debug!(
            "sdp: {} vars, {} equalities, blocks {:?}, compiled in {:.2}s",
            data.m,
            data.p(),
            data.blocks.iter().map(|b| b.size).collect::<Vec<_>>(),
            started.elapsed().as_secs_f64()
        );
        if data.blocks.is_empty() {
            return solve_without_blocks(&data);
        }
        let res = Solver { d: &data, settings }.run();
        log::debug!("sdp: {:?} after {} iterations, {:.2}s", res.status, res.iterations, started.elapsed().as_secs_f64());
        res
    }

    fn name(&self) -> &str {
        "hsde-nt"
    }
}

fn failure(m: usize, iterations: usize, message: String) -> SdpResult {
    SdpResult {
        status: SdpStatus::NumericalFailure,
        y: vec![0.0; m],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY },
        iterations,
        message,
    }
}

type Mats = Vec<DMatrix<f64>>;

struct BlockData {
    /// Cone order; equals the column count of `face` when present.
    size: usize,
    /// Orthonormal basis `Q`; the cone variable is `Qᵀ (H − Σ x_j G_j) Q`.
    face: Option<DMatrix<f64>>,
    h: DMatrix<f64>,
    /// Upper-triangular entries of `G_j` for each variable `j` touching the block.
    by_var: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

struct Data {
    m: usize,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    blocks: Vec<BlockData>,
}

struct Inconsistent;

impl Data {
    fn compile(p: &SdpProblem) -> Result<Data, Inconsistent> {
        let m = p.num_vars;
        let (a, b) = reduce_equalities(p, m)?;
        let blocks = p
            .blocks
            .iter()
            .filter(|blk| blk.cone_size() > 0)
            .map(|blk| {
                let n = blk.size;
                let mut h = DMatrix::zeros(n, n);
                for e in &blk.constant {
                    h[(e.i, e.j)] += e.v;
                    if e.i != e.j {
                        h[(e.j, e.i)] += e.v;
                    }
                }
                let mut entries: Vec<(usize, usize, usize, f64)> =
                    blk.linear.iter().map(|e| (e.var, e.i, e.j, -e.v)).collect();
                entries.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
                let mut by_var: Vec<(usize, Vec<(usize, usize, f64)>)> = Vec::new();
                for (var, i, j, v) in entries {
                    match by_var.last_mut() {
                        Some((last, list)) if *last == var => match list.last_mut() {
                            Some(e) if e.0 == i && e.1 == j => e.2 += v,
                            _ => list.push((i, j, v)),
                        },
                        _ => by_var.push((var, vec![(i, j, v)])),
                    }
                }
                for (_, list) in &mut by_var {
                    list.retain(|e| e.2 != 0.0);
                }
                by_var.retain(|(_, list)| !list.is_empty());
                let face = blk.face.clone();
                let h = restrict(&face, h);
                BlockData { size: blk.cone_size(), face, h, by_var }
            })
            .collect();
        Ok(Data { m, c: DVector::from_column_slice(&p.objective), a, b, blocks })
    }

    fn p(&self) -> usize {
        self.a.nrows()
    }

    fn degree(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    fn zero_mats(&self) -> Mats {
        self.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect()
    }

    fn identity_mats(&self) -> Mats {
        self.blocks.iter().map(|b| DMatrix::identity(b.size, b.size)).collect()
    }

    fn h(&self) -> Mats {
        self.blocks.iter().map(|b| b.h.clone()).collect()
    }

    fn g_mul(&self, x: &DVector<f64>) -> Mats {
        self.blocks
            .iter()
            .map(|blk| {
                let full = blk.face.as_ref().map_or(blk.size, |q| q.nrows());
                let mut out = DMatrix::zeros(full, full);
                for (var, list) in &blk.by_var {
                    let xv = x[*var];
                    if xv == 0.0 {
                        continue;
                    }
                    for &(i, j, v) in list {
                        out[(i, j)] += xv * v;
                        if i != j {
                            out[(j, i)] += xv * v;
                        }
                    }
                }
                restrict(&blk.face, out)
            })
            .collect()
    }

    fn g_tmul(&self, z: &Mats) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, zb) in self.blocks.iter().zip(z) {
            let zb = &lift(&blk.face, zb);
            for (var, list) in &blk.by_var {
                let mut acc = 0.0;
                for &(i, j, v) in list {
                    acc += if i == j { v * zb[(i, j)] } else { 2.0 * v * zb[(i, j)] };
                }
                out[*var] += acc;
            }
        }
        out
    }
}

/// `Qᵀ m Q`, or `m` without a face.
fn restrict(face: &Option<DMatrix<f64>>, m: DMatrix<f64>) -> DMatrix<f64> {
    match face {
        Some(q) => sym(&(q.transpose() * m * q)),
        None => m,
    }
}

/// `Q m Qᵀ`, or `m` without a face.
fn lift(face: &Option<DMatrix<f64>>, m: &DMatrix<f64>) -> DMatrix<f64> {
    match face {
        Some(q) => sym(&(q * m * q.transpose())),
        None => m.clone(),
    }
}

/// Replaces the equality rows by an orthonormal basis of their span,
/// rejecting inconsistent systems.
fn reduce_equalities(p: &SdpProblem, m: usize) -> Result<(DMatrix<f64>, DVector<f64>), Inconsistent> {
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut d: Vec<f64> = Vec::new();
    for row in &p.equalities {
        let mut v = DVector::zeros(m);
        for &(j, c) in &row.coeffs {
            v[j] += c;
        }
        let scale = v.norm();
        if scale == 0.0 {
            if row.rhs.abs() > 1e-9 {
                return Err(Inconsistent);
            }
            continue;
        }
        v /= scale;
        let mut rhs = row.rhs / scale;
        for _ in 0..2 {
            for (qk, dk) in q.iter().zip(&d) {
                let t = qk.dot(&v);
                v.axpy(-t, qk, 1.0);
                rhs -= t * dk;
            }
        }
        let nv = v.norm();
        if nv <= 1e-9 {
            if rhs.abs() > 1e-7 * (1.0 + row.rhs.abs() / scale) {
                return Err(Inconsistent);
            }
            continue;
        }
        q.push(v / nv);
        d.push(rhs / nv);
    }
    let mut a = DMatrix::zeros(q.len(), m);
    for (i, qi) in q.iter().enumerate() {
        a.set_row(i, &qi.transpose());
    }
    Ok((a, DVector::from_vec(d)))
}

fn solve_without_blocks(d: &Data) -> SdpResult {
    // min c·y s.t. A y = b: bounded only when c lies in the row space of A.
    let y = d.a.transpose() * &d.b;
    let proj = d.a.transpose() * (&d.a * &d.c);
    let status = if (&d.c - proj).norm() <= 1e-9 * (1.0 + d.c.norm()) {
        SdpStatus::Optimal
    } else {
        SdpStatus::Unbounded
    };
    let obj = d.c.dot(&y);
    SdpResult {
        status,
        y: y.as_slice().to_vec(),
        primal_objective: obj,
        dual_objective: obj,
        residuals: Residuals::default(),
        iterations: 0,
        message: "no semidefinite blocks".into(),
    }
}

fn dot(a: &Mats, b: &Mats) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &Mats) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &Mats, y: &mut Mats) {
    for (xb, yb) in x.iter().zip(y.iter_mut()) {
        *yb += xb * alpha;
    }
}

fn scaled(alpha: f64, x: &Mats) -> Mats {
    x.iter().map(|b| b * alpha).collect()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Nesterov-Todd scaling: `s = r Λ rᵀ`, `z = rti Λ rtiᵀ`, `rti = r⁻ᵀ`.
struct Scaling {
    r: Mats,
    rti: Mats,
    lambda: Vec<DVector<f64>>,
}

impl Scaling {
    /// Scaling of the pair `(R s̃ Rᵀ, Rti z̃ Rtiᵀ)` given the current factors.
    fn update(r: &Mats, rti: &Mats, st: &Mats, zt: &Mats) -> Option<Scaling> {
        let mut out = Scaling { r: Vec::new(), rti: Vec::new(), lambda: Vec::new() };
        for b in 0..st.len() {
            let ls = Cholesky::new(sym(&st[b]))?.l();
            let lz = Cholesky::new(sym(&zt[b]))?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let u = svd.u?;
            let v = svd.v_t?.transpose();
            let sig = svd.singular_values;
            if sig.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return None;
            }
            let isq = DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
            out.r.push(&r[b] * ls * v * &isq);
            out.rti.push(&rti[b] * lz * u * &isq);
            out.lambda.push(sig);
        }
        Some(out)
    }

    fn s(&self) -> Mats {
        self.r
            .iter()
            .zip(&self.lambda)
            .map(|(r, l)| sym(&(r * DMatrix::from_diagonal(l) * r.transpose())))
            .collect()
    }

    fn z(&self) -> Mats {
        self.rti
            .iter()
            .zip(&self.lambda)
            .map(|(r, l)| sym(&(r * DMatrix::from_diagonal(l) * r.transpose())))
            .collect()
    }

    /// `Wᵀ u = r u rᵀ`.
    fn apply_t(&self, u: &Mats) -> Mats {
        self.r.iter().zip(u).map(|(r, u)| r * u * r.transpose()).collect()
    }

    /// `(WᵀW)⁻¹ u = P u P` with `P = rti rtiᵀ`.
    fn p_mats(&self) -> Mats {
        self.rti.iter().map(|r| sym(&(r * r.transpose()))).collect()
    }
}

const REFINE_STEPS: usize = 8;

/// Factorization of the scaled KKT matrix
/// `[0 Aᵀ Gᵀ; A 0 0; G 0 −WᵀW]` via the normal equations. The `z` part
/// of every solution is returned scaled, as `W u_z`.
struct Kkt<'a> {
    d: &'a Data,
    p: Mats,
    r: Mats,
    rti: Mats,
    h: DMatrix<f64>,
    /// Cholesky factor of `P H P + γ AᵀA` with `P = I − AᵀA`.
    hn: SpdFactor,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Dense Cholesky factor, regularized on the diagonal when needed.
struct SpdFactor(faer::linalg::solvers::Llt<f64>);

impl SpdFactor {
    /// Reads the lower triangle of `f`.
    fn new(mut f: faer::Mat<f64>) -> Option<SpdFactor> {
        let n = f.nrows();
        if let Ok(l) = f.llt(faer::Side::Lower) {
            return Some(SpdFactor(l));
        }
        let maxd = (0..n).map(|i| f[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut eps = 1e-14 * maxd;
        for _ in 0..8 {
            for i in 0..n {
                f[(i, i)] += eps;
            }
            if let Ok(l) = f.llt(faer::Side::Lower) {
                return Some(SpdFactor(l));
            }
            eps *= 100.0;
        }
        None
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = self.0.solve(&rhs);
        DVector::from_fn(b.len(), |i, _| x[i])
    }
}

impl<'a> Kkt<'a> {
    fn factor(d: &'a Data, w: &Scaling) -> Option<Kkt<'a>> {
        let t0 = std::time::Instant::now();
        let p = w.p_mats();
        let mut h = DMatrix::zeros(d.m, d.m);
        for (blk, pb) in d.blocks.iter().zip(&p) {
            add_normal_block(&mut h, blk, pb);
        }
        let t1 = t0.elapsed().as_secs_f64();
        // Equalities: with orthonormal rows A and P = I − AᵀA, the inverse of
        // K = P H P + γ AᵀA restricted to range(P) is the null-space inverse
        // of H. K = H − (U A + Aᵀ Uᵀ) with U = H Aᵀ − Aᵀ (A H Aᵀ + γ I) / 2.
        let mut k = to_faer(&h);
        if d.p() > 0 {
            let a = &d.a;
            let ha = &h * a.transpose();
            let mut c = a * &ha;
            let gamma = ((h.trace() - c.trace()) / (d.m - d.p()).max(1) as f64).max(1e-300);
            for i in 0..c.nrows() {
                c[(i, i)] += gamma;
            }
            let u = to_faer(&(ha - a.transpose() * c * 0.5));
            let af = to_faer(a);
            use faer::linalg::matmul::matmul;
            matmul(k.as_mut(), faer::Accum::Add, u.as_ref(), af.as_ref(), -1.0, faer::Par::Seq);
            matmul(k.as_mut(), faer::Accum::Add, af.transpose(), u.transpose(), -1.0, faer::Par::Seq);
        }
        let t2 = t0.elapsed().as_secs_f64();
        let hn = SpdFactor::new(k)?;
        log::trace!("kkt: assemble {t1:.3}s, project {:.3}s, factor {:.3}s", t2 - t1, t0.elapsed().as_secs_f64() - t2);
        Some(Kkt { d, p, r: w.r.clone(), rti: w.rti.clone(), h, hn })
    }

    fn solve_once(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Mats) -> (DVector<f64>, DVector<f64>, Mats) {
        let pbp: Mats = self.p.iter().zip(bz).map(|(p, z)| p * z * p).collect();
        let rhs = bx + self.d.g_tmul(&pbp);
        let (ux, uy) = if self.d.p() > 0 {
            let xp = self.d.a.transpose() * by;
            let r2 = &rhs - &self.h * &xp;
            let pr2 = &r2 - self.d.a.transpose() * (&self.d.a * &r2);
            let xi = self.hn.solve(&pr2);
            let xi = &xi - self.d.a.transpose() * (&self.d.a * &xi);
            let ux = xp + xi;
            let uy = &self.d.a * (&rhs - &self.h * &ux);
            (ux, uy)
        } else {
            (self.hn.solve(&rhs), DVector::zeros(0))
        };
        // W u_z = W⁻ᵀ (G u_x − b_z) = rtiᵀ (G u_x − b_z) rti
        let gx = self.d.g_mul(&ux);
        let wz = self
            .rti
            .iter()
            .zip(gx.iter().zip(bz))
            .map(|(r, (g, z))| sym(&(r.transpose() * (g - z) * r)))
            .collect();
        (ux, uy, wz)
    }

    fn residual(
        &self,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &Mats,
        ux: &DVector<f64>,
        uy: &DVector<f64>,
        wz: &Mats,
    ) -> (DVector<f64>, DVector<f64>, Mats) {
        let uz: Mats = self.rti.iter().zip(wz).map(|(r, z)| r * z * r.transpose()).collect();
        let ex = bx - self.d.a.transpose() * uy - self.d.g_tmul(&uz);
        let ey = by - &self.d.a * ux;
        let gx = self.d.g_mul(ux);
        let ez = bz
            .iter()
            .zip(gx.iter().zip(wz.iter().zip(&self.r)))
            .map(|(b, (g, (z, r)))| b - g + r * z * r.transpose())
            .collect();
        (ex, ey, ez)
    }

    /// Solves with iterative refinement, continued while the residual
    /// keeps shrinking.
    fn solve(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Mats) -> (DVector<f64>, DVector<f64>, Mats) {
        let (mut ux, mut uy, mut uz) = self.solve_once(bx, by, bz);
        let size = |e: &(DVector<f64>, DVector<f64>, Mats)| e.0.norm().max(e.1.norm()).max(norm(&e.2));
        let mut res = self.residual(bx, by, bz, &ux, &uy, &uz);
        let mut err = size(&res);
        for _ in 0..REFINE_STEPS {
            if err == 0.0 {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&res.0, &res.1, &res.2);
            let (nx, ny) = (&ux + cx, &uy + cy);
            let mut nz = uz.clone();
            axpy(1.0, &cz, &mut nz);
            let nres = self.residual(bx, by, bz, &nx, &ny, &nz);
            let nerr = size(&nres);
            if !(nerr < 0.5 * err) {
                if nerr < err {
                    (ux, uy, uz) = (nx, ny, nz);
                }
                break;
            }
            (ux, uy, uz, res, err) = (nx, ny, nz, nres, nerr);
        }
        (ux, uy, uz)
    }
}

/// Adds `H_ij = tr(G_i P G_j P)` for one block.
fn add_normal_block(h: &mut DMatrix<f64>, blk: &BlockData, p: &DMatrix<f64>) {
    let p = &lift(&blk.face, p);
    let n = p.nrows();
    let mut t = DMatrix::zeros(n, n);
    for (k, (vk, ek)) in blk.by_var.iter().enumerate() {
        t.fill(0.0);
        for &(a, b, v) in ek {
            t.ger(v, &p.column(a), &p.column(b), 1.0);
            if a != b {
                t.ger(v, &p.column(b), &p.column(a), 1.0);
            }
        }
        for (vl, el) in &blk.by_var[k..] {
            let mut acc = 0.0;
            for &(c, d, w) in el {
                acc += if c == d { w * t[(c, d)] } else { 2.0 * w * t[(c, d)] };
            }
            h[(*vk, *vl)] += acc;
            if vk != vl {
                h[(*vl, *vk)] += acc;
            }
        }
    }
}

/// Largest `α` with `λ + α d ⪰ 0`, or infinity.
fn max_step_scaled(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let isq = lambda.map(|x| 1.0 / x.sqrt());
    let n = d.nrows();
    let mut m = d.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= isq[i] * isq[j];
        }
    }
    let e = min_eig(&sym(&m));
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dst: Mats,
    dzt: Mats,
    dtau: f64,
    dkappa: f64,
}

struct Solver<'a> {
    d: &'a Data,
    settings: &'a SdpSettings,
}

impl Solver<'_> {
    fn run(&self) -> SdpResult {
        let d = self.d;
        let tol = self.settings.tol;
        let m = d.m;
        let deg = d.degree() as f64;

        let ident = Scaling {
            r: d.identity_mats(),
            rti: d.identity_mats(),
            lambda: d.blocks.iter().map(|b| DVector::from_element(b.size, 1.0)).collect(),
        };
        let Some(kkt0) = Kkt::factor(d, &ident) else {
            return failure(m, 0, "initial KKT factorization failed".into());
        };
        let hmat = d.h();
        let (mut x, _, uz) = kkt0.solve(&DVector::zeros(m), &d.b, &hmat);
        let mut s = scaled(-1.0, &uz);
        let (_, mut y, mut z) = kkt0.solve(&(-&d.c), &DVector::zeros(d.p()), &d.zero_mats());
        drop(kkt0);
        shift_interior(&mut s);
        shift_interior(&mut z);
        let mut tau = 1.0;
        let mut kappa = 1.0;

        let Some(mut w) = Scaling::update(&d.identity_mats(), &d.identity_mats(), &s, &z) else {
            return failure(m, 0, "initial scaling failed".into());
        };
        s = w.s();
        z = w.z();

        let resx0 = d.c.norm().max(1.0);
        let resy0 = d.b.norm().max(1.0);
        let resz0 = norm(&hmat).max(1.0);
        let mut stalls = 0;
        let mut best: Option<Best> = None;
        let mut progress = (f64::INFINITY, 0usize);
        let mut best_pinf = (f64::INFINITY, 0usize);

        for iter in 0..=self.settings.max_iters {
            let gx = d.g_mul(&x);
            let hrx = d.a.transpose() * &y + d.g_tmul(&z);
            let rx = &hrx + &d.c * tau;
            let hry = &d.a * &x;
            let ry = &hry - &d.b * tau;
            let mut hrz = s.clone();
            axpy(1.0, &gx, &mut hrz);
            let mut rz = hrz.clone();
            axpy(-tau, &hmat, &mut rz);
            let cx = d.c.dot(&x);
            let by = d.b.dot(&y);
            let hz = dot(&hmat, &z);
            let rt = kappa + cx + by + hz;
            let gap = dot(&s, &z);
            let mu = (gap + tau * kappa) / (deg + 1.0);

            let pcost = cx / tau;
            let dcost = -(by + hz) / tau;
            let pres = (ry.norm() / resy0).max(norm(&rz) / resz0) / tau;
            let dres = rx.norm() / resx0 / tau;
            let ngap = gap / (tau * tau);
            let relgap = if pcost < 0.0 {
                ngap / -pcost
            } else if dcost > 0.0 {
                ngap / dcost
            } else {
                f64::INFINITY
            };
            let pinfres =
                if hz + by < 0.0 { hrx.norm() / resx0 / -(hz + by) } else { f64::INFINITY };
            let dinfres = if cx < 0.0 {
                (hry.norm() / resy0).max(norm(&hrz) / resz0) / -cx
            } else {
                f64::INFINITY
            };
            let last = Residuals { primal: pres, dual: dres, gap: ngap };
            let score = pres.max(dres).max(ngap.min(relgap));
            if score.is_finite() && best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Best { score, x: x.clone(), tau, residuals: last, pd: (pcost, dcost), iter });
            }
            // infeasibility certificates count as progress too
            let prog = score.min(pinfres).min(dinfres);
            if prog < progress.0 {
                progress = (prog, iter);
            }
            if pinfres < best_pinf.0 {
                best_pinf = (pinfres, iter);
            }
            let since = iter - progress.1;
            if (since >= 10 && !(prog < 1e3 * progress.0)) || since >= 25 {
                return stopped(best, best_pinf, tol, m, iter, "diverging from best iterate");
            }
            if self.settings.verbose {
                log::debug!(
                    "{iter:3} pcost {pcost:+.8e} dcost {dcost:+.8e} gap {ngap:.2e} pres {pres:.2e} dres {dres:.2e} pinf {pinfres:.2e} dinf {dinfres:.2e} k/t {:.2e}",
                    kappa / tau
                );
            }

            let yout = (&x / tau).as_slice().to_vec();
            if pres <= tol && dres <= tol && (ngap <= tol || relgap <= tol) {
                return SdpResult {
                    status: SdpStatus::Optimal,
                    y: yout,
                    primal_objective: pcost,
                    dual_objective: dcost,
                    residuals: last,
                    iterations: iter,
                    message: "optimal".into(),
                };
            }
            if pinfres <= tol {
                return SdpResult {
                    status: SdpStatus::PrimalInfeasible,
                    y: yout,
                    primal_objective: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    residuals: last,
                    iterations: iter,
                    message: format!("infeasibility certificate, residual {pinfres:.2e}"),
                };
            }
            if dinfres <= tol {
                return SdpResult {
                    status: SdpStatus::Unbounded,
                    y: yout,
                    primal_objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    residuals: last,
                    iterations: iter,
                    message: format!("unboundedness certificate, residual {dinfres:.2e}"),
                };
            }
            if iter == self.settings.max_iters {
                break;
            }

            let Some(kkt) = Kkt::factor(d, &w) else {
                return stopped(best, best_pinf, tol, m, iter, "KKT factorization failed");
            };
            // z parts below are scaled, so pair them with W⁻ᵀ h.
            let hs: Mats = w.rti.iter().zip(&hmat).map(|(r, h)| r.transpose() * h * r).collect();
            let (x1, y1, z1) = kkt.solve(&(-&d.c), &d.b, &hmat);
            let denom = d.c.dot(&x1) + d.b.dot(&y1) + dot(&hs, &z1) - kappa / tau;

            let newton = |sigma: f64, eta: f64, corr: Option<&Direction>| -> Direction {
                let mut rs: Mats = w.lambda.iter().map(|l| DMatrix::from_diagonal(&l.map(|v| -v * v))).collect();
                let mut rtk = -tau * kappa + sigma * mu;
                for rsb in rs.iter_mut() {
                    for i in 0..rsb.nrows() {
                        rsb[(i, i)] += sigma * mu;
                    }
                }
                if let Some(a) = corr {
                    for (b, rsb) in rs.iter_mut().enumerate() {
                        let prod = &a.dst[b] * &a.dzt[b];
                        *rsb -= (&prod + prod.transpose()) * 0.5;
                    }
                    rtk -= a.dtau * a.dkappa;
                }
                let u: Mats = rs
                    .iter()
                    .zip(&w.lambda)
                    .map(|(r, l)| {
                        let n = r.nrows();
                        DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (l[i] + l[j]))
                    })
                    .collect();
                let wtu = w.apply_t(&u);
                let f = 1.0 - eta;
                let mut bz = scaled(-f, &rz);
                axpy(-1.0, &wtu, &mut bz);
                let (x2, y2, z2) = kkt.solve(&(&rx * -f), &(&ry * -f), &bz);
                let num = -f * rt - rtk / tau - d.c.dot(&x2) - d.b.dot(&y2) - dot(&hs, &z2);
                let dtau = num / denom;
                let dx = x2 + &x1 * dtau;
                let dy = y2 + &y1 * dtau;
                let mut dz = z2;
                axpy(dtau, &z1, &mut dz);
                let dzt: Mats = dz.iter().map(sym).collect();
                let dst: Mats = u.iter().zip(&dzt).map(|(u, z)| sym(&(u - z))).collect();
                let dkappa = (rtk - kappa * dtau) / tau;
                Direction { dx, dy, dst, dzt, dtau, dkappa }
            };

            let step_to_boundary = |dir: &Direction| -> f64 {
                let mut a = f64::INFINITY;
                for (l, (ds, dz)) in w.lambda.iter().zip(dir.dst.iter().zip(&dir.dzt)) {
                    a = a.min(max_step_scaled(l, ds)).min(max_step_scaled(l, dz));
                }
                if dir.dtau < 0.0 {
                    a = a.min(-tau / dir.dtau);
                }
                if dir.dkappa < 0.0 {
                    a = a.min(-kappa / dir.dkappa);
                }
                a
            };

            let aff = newton(0.0, 0.0, None);
            let alpha_aff = step_to_boundary(&aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3);
            let dir = newton(sigma, sigma, Some(&aff));
            let alpha = (0.99 * step_to_boundary(&dir)).min(1.0);
            if !alpha.is_finite() || alpha <= 0.0 {
                return stopped(best, best_pinf, tol, m, iter, "non-positive step");
            }
            if alpha < self.settings.min_step {
                stalls += 1;
                if stalls >= 5 {
                    return stopped(best, best_pinf, tol, m, iter, "step length stalled");
                }
            } else {
                stalls = 0;
            }

            x += &dir.dx * alpha;
            y += &dir.dy * alpha;
            tau += alpha * dir.dtau;
            kappa += alpha * dir.dkappa;
            let st: Mats = w
                .lambda
                .iter()
                .zip(&dir.dst)
                .map(|(l, ds)| DMatrix::from_diagonal(l) + ds * alpha)
                .collect();
            let zt: Mats = w
                .lambda
                .iter()
                .zip(&dir.dzt)
                .map(|(l, dz)| DMatrix::from_diagonal(l) + dz * alpha)
                .collect();
            match Scaling::update(&w.r, &w.rti, &st, &zt) {
                Some(nw) => w = nw,
                None => return stopped(best, best_pinf, tol, m, iter, "scaling update failed"),
            }
            s = w.s();
            z = w.z();
        }
        stopped(best, best_pinf, tol, m, self.settings.max_iters, "iteration limit reached")
    }
}

/// Iterate with the smallest combined residual seen so far.
struct Best {
    score: f64,
    x: DVector<f64>,
    tau: f64,
    residuals: Residuals,
    pd: (f64, f64),
    iter: usize,
}

/// When the solve stalls, an infeasibility certificate within this factor of
/// the tolerance is still reported, unless the best iterate is close enough
/// to optimal for the moment layer to use it.
const ALMOST_FACTOR: f64 = 100.0;

/// Failure result carrying the best iterate, so callers can judge whether
/// it is still usable.
fn stopped(best: Option<Best>, best_pinf: (f64, usize), tol: f64, m: usize, iterations: usize, why: &str) -> SdpResult {
    let usable = best.as_ref().is_some_and(|b| b.score <= crate::moment::REDUCED_ACCURACY_TOL);
    if !usable && best_pinf.0 <= ALMOST_FACTOR * tol {
        return SdpResult {
            status: SdpStatus::PrimalInfeasible,
            y: vec![f64::NAN; m],
            primal_objective: f64::INFINITY,
            dual_objective: f64::INFINITY,
            residuals: best.map(|b| b.residuals).unwrap_or_default(),
            iterations,
            message: format!(
                "infeasibility certificate at reduced accuracy, residual {:.2e} at iteration {} ({why})",
                best_pinf.0, best_pinf.1
            ),
        };
    }
    match best {
        Some(b) => SdpResult {
            status: SdpStatus::NumericalFailure,
            y: (b.x / b.tau).as_slice().to_vec(),
            primal_objective: b.pd.0,
            dual_objective: b.pd.1,
            residuals: b.residuals,
            iterations,
            message: format!("{why} after {iterations} iterations; best iterate from iteration {}", b.iter),
        },
        None => failure(m, iterations, why.to_string()),
    }
}

/// Moves a cone point into the interior, as in the standard starting point.
fn shift_interior(v: &mut Mats) {
    let ts = v.iter().map(|b| -min_eig(b)).fold(f64::NEG_INFINITY, f64::max);
    let nrm = norm(v);
    if ts >= -1e-8 * nrm.max(1.0) {
        for b in v.iter_mut() {
            for i in 0..b.nrows() {
                b[(i, i)] += 1.0 + ts;
            }
        }
    }
}
