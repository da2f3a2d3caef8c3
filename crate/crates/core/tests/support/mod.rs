//! Property checks shared by the `properties` and `acceptance` targets.
//! Each returns `Err` with the first counterexample.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use polyvi::fixtures;
use polyvi::lme::{catalog_lme, verify_lme, ConstraintKind, ConstraintSystem, LmeKind};
use polyvi::moment::{
    build_relaxation, extract_minimizers, flat_truncation, localizing_template, solve_relaxation, ExtractionOptions,
    PolyProgram, RelaxationResult,
};
use polyvi::poly::{basis, lift, pairing, MomentVector, Polynomial};
use polyvi::sdp::{EqualityRow, InteriorPoint, PsdBlock, SdpBackend, SdpProblem, SdpSettings, SdpStatus};
use polyvi::vip::{algebraic_degree_bound, random_theta, LmeSource, VipProblem};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<(), String>;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize, d: u32) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for m in basis(n, d).entries() {
        if rng.random_bool(0.7) {
            p.add_term(m.clone(), rng.sample(StandardNormal));
        }
    }
    p
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

/// `⟨p, lift(x)⟩ = p(x)`, and truncating a lift gives the lower lift.
pub fn pairing_is_evaluation() -> Check {
    run(100, (any::<u64>(), 1usize..4, 0u32..5, 0u32..3), |(seed, n, d, extra)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(&mut rng, n, d);
        let x = random_point(&mut rng, n, 1.5);
        let y = lift(&x, d + extra);
        let lhs = pairing(&p, &y).unwrap();
        let rhs = p.eval(&x);
        let scale: f64 = p.terms().map(|(m, c)| (c * m.eval(&x)).abs()).sum::<f64>().max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{} vs {}", lhs, rhs);
        prop_assert_eq!(y.truncate(d), lift(&x, d));
        Ok(())
    })
}

/// `L_q^{(k)}[lift(x)] = q(x) [x][x]ᵀ`.
pub fn localizing_at_lift() -> Check {
    run(50, (any::<u64>(), 1usize..4, 0u32..4, 0u32..2), |(seed, n, dq, slack)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_poly(&mut rng, n, dq);
        let half = q.degree().div_ceil(2);
        let k = half.max(1) + slack;
        let x = random_point(&mut rng, n, 1.0);
        let t = localizing_template(&q, k, n).unwrap();
        let got = t.instantiate(lift(&x, 2 * k).values());
        let v = DVector::from_vec(basis(n, k - half).evaluate(&x));
        let want = &v * v.transpose() * q.eval(&x);
        let scale = want.abs().max().max(1.0);
        prop_assert!((got - want).abs().max() <= 1e-12 * scale);
        Ok(())
    })
}

/// Ball VIP with a known interior solution `u`: `F = A[x]_2 − A[u]_2`.
fn ball_vip_with_solution(seed: u64) -> (VipProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2;
    let mons = basis(n, 2);
    let u = random_point(&mut rng, n, 0.5);
    let lu = mons.evaluate(&u);
    let f: Vec<Polynomial> = (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..mons.len()).map(|_| rng.sample(StandardNormal)).collect();
            let mut p = Polynomial::zero(n);
            for (m, &c) in mons.entries().iter().zip(&row) {
                p.add_term(m.clone(), c);
            }
            let shift: f64 = row.iter().zip(&lu).map(|(a, b)| a * b).sum();
            &p - &Polynomial::constant(n, shift)
        })
        .collect();
    let g = &Polynomial::constant(n, 1.0) - &(&Polynomial::var(n, 0).pow(2) + &Polynomial::var(n, 1).pow(2));
    let cs = ConstraintSystem::new(n, vec![g], vec![ConstraintKind::Ineq]).unwrap();
    (VipProblem::new(f, cs, LmeSource::Catalog(LmeKind::Ball)).unwrap(), u)
}

/// Relaxation values of candidate programs increase with the order and
/// never exceed `θ` at a feasible point.
pub fn hierarchy_bounds() -> Check {
    let settings = SdpSettings::default();
    for seed in 0..20 {
        let (p, u) = ball_vip_with_solution(seed);
        let theta = random_theta(p.n(), seed);
        let prog = PolyProgram::new(theta.poly.clone(), p.kkt.e.clone(), p.kkt.i.clone()).unwrap();
        if prog.violation(&u) > 1e-12 {
            return Err(format!("seed {seed}: u is not a KKT point"));
        }
        let upper = theta.value(&u);
        let d0 = prog.d0();
        let mut prev = f64::NEG_INFINITY;
        for k in d0..=d0 + 1 {
            let rel = build_relaxation(&prog, k).unwrap();
            let RelaxationResult::Optimal { value, .. } = solve_relaxation(&rel, &InteriorPoint, &settings) else {
                return Err(format!("seed {seed} order {k}: relaxation not solved"));
            };
            let tol = 1e-6 * value.abs().max(1.0);
            if value < prev - tol {
                return Err(format!("seed {seed}: order {k} value {value} below {prev}"));
            }
            if value > upper + tol {
                return Err(format!("seed {seed}: order {k} value {value} above θ(u) = {upper}"));
            }
            prev = value;
        }
    }
    Ok(())
}

/// Flat truncation and extraction recover the atoms of `Σ w_i lift(u_i)`.
pub fn extraction_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 30 {
        let n = rng.random_range(1..=3);
        let r = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..r).map(|_| random_point(&mut rng, n, 1.0)).collect();
        let separated = pts.iter().enumerate().all(|(i, p)| {
            pts[..i].iter().all(|q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 0.2)
        });
        if !separated {
            continue;
        }
        let w: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..1.0)).collect();
        let t = 3;
        let y = MomentVector::from_atoms(&pts, &w, 2 * t);
        let rank = flat_truncation(&y, 1, t, 1e-6).ok_or_else(|| format!("{pts:?}: not flat"))?;
        if rank != r {
            return Err(format!("{pts:?}: rank {rank}"));
        }
        let got = extract_minimizers(&y, t, rank, &ExtractionOptions::default()).map_err(|e| e.to_string())?;
        if got.len() != r {
            return Err(format!("{pts:?}: extracted {got:?}"));
        }
        for p in &pts {
            let best = got
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            if best > 1e-6 {
                return Err(format!("{p:?} not recovered: {got:?}"));
            }
        }
        checked += 1;
    }
    Ok(())
}

/// Every catalog template verifies, on random parameters and on the fixtures.
pub fn catalog_lmes_verify() -> Check {
    for name in fixtures::NAMES {
        let p = fixtures::load(name).unwrap();
        let l = p.l.as_ref().ok_or_else(|| format!("{name}: no L(x)"))?;
        if !verify_lme(l, &p.cs) {
            return Err(format!("{name}: L(x)G(x) ≠ I"));
        }
    }
    run(30, (any::<u64>(), 2usize..5), |(seed, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: f64 = rng.random_range(0.5..3.0);
        let ss = |n: usize| (0..n).fold(Polynomial::zero(n), |acc, i| &acc + &Polynomial::var(n, i).pow(2));
        let ball = ConstraintSystem::new(n, vec![&Polynomial::constant(n, c) - &ss(n)], vec![ConstraintKind::Ineq]).unwrap();
        let r2 = c + rng.random_range(0.5..2.0);
        let ring = ConstraintSystem::new(
            n,
            vec![&ss(n) - &Polynomial::constant(n, c), &Polynomial::constant(n, r2) - &ss(n)],
            vec![ConstraintKind::Ineq, ConstraintKind::Ineq],
        )
        .unwrap();
        let bh = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g0 = fixtures::unit_quadric(&(bh.transpose() * bh + DMatrix::identity(n, n) * 0.1));
        let f: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
        let quad = fixtures::eig_linear_with(f.clone(), g0.clone()).unwrap();
        let soc = fixtures::eig_soc_with(f, g0).unwrap();
        let a: f64 = rng.random_range(0.5..2.0);
        let mono = (0..n).fold(Polynomial::constant(n, a), |acc, i| &acc * &Polynomial::var(n, i));
        let mut g = vec![&Polynomial::constant(n, c) - &mono];
        let mut kinds = vec![ConstraintKind::Eq];
        for i in 0..n {
            g.push(Polynomial::var(n, i));
            kinds.push(ConstraintKind::Ineq);
        }
        let product = ConstraintSystem::new(n, g, kinds).unwrap();
        let cases = [
            (LmeKind::Orthant, ConstraintSystem::orthant(n)),
            (LmeKind::Ball, ball),
            (LmeKind::Ring, ring),
            (LmeKind::QuadricWithLinear, quad.cs),
            (LmeKind::SecondOrderCone, soc.cs),
            (LmeKind::OrthantWithProduct, product),
        ];
        for (kind, cs) in cases {
            let l = catalog_lme(kind, &cs).unwrap();
            prop_assert!(verify_lme(&l, &cs), "{:?}", kind);
        }
        Ok(())
    })
}

/// `h_r` by enumerating exponent vectors one letter at a time.
fn h_brute(r: u32, letters: &[u64]) -> BigUint {
    match letters.split_first() {
        None => BigUint::from((r == 0) as u32),
        Some((&l, rest)) => (0..=r).map(|i| BigUint::from(l).pow(i) * h_brute(r - i, rest)).sum(),
    }
}

/// `algebraic_degree_bound` against brute force for every `n + m ≤ 8` and
/// degrees up to 4.
pub fn degree_bound_enumeration() -> Check {
    fn multisets(m: usize, lo: u32, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for d in lo..=4 {
            cur.push(d);
            multisets(m, d, out, cur);
            cur.pop();
        }
    }
    for n in 1..=8usize {
        for m in 0..=n.min(8 - n) {
            let mut bs = Vec::new();
            multisets(m, 1, &mut bs, &mut Vec::new());
            for amax in 1..=4u32 {
                let mut a = vec![1; n];
                a[n - 1] = amax;
                for b in &bs {
                    let mut letters = vec![amax as u64];
                    letters.extend(b.iter().map(|&d| d as u64));
                    let prod: BigUint = b.iter().map(|&d| BigUint::from(d)).product();
                    let want = prod * h_brute((n - m) as u32, &letters);
                    let got = algebraic_degree_bound(&a, b).map_err(|e| e.to_string())?;
                    if got != want {
                        return Err(format!("n={n} a={a:?} b={b:?}: {got} vs {want}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Block from a constant matrix and one matrix per variable.
fn block(c: &[&[f64]], a: &[&[&[f64]]]) -> PsdBlock {
    let n = c.len();
    let mut b = PsdBlock::new(n);
    for i in 0..n {
        for j in i..n {
            if c[i][j] != 0.0 {
                b.add_constant(i, j, c[i][j]);
            }
            for (v, m) in a.iter().enumerate() {
                if m[i][j] != 0.0 {
                    b.add_linear(v, i, j, m[i][j]);
                }
            }
        }
    }
    b
}

fn sdp(objective: &[f64], blocks: Vec<PsdBlock>, eqs: &[(&[(usize, f64)], f64)]) -> SdpProblem {
    let mut p = SdpProblem::new(objective.len());
    p.objective = objective.to_vec();
    p.blocks = blocks;
    p.equalities = eqs.iter().map(|(c, r)| EqualityRow { coeffs: c.to_vec(), rhs: *r }).collect();
    p
}

const E11: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 0.0]];
const E22: &[&[f64]] = &[&[0.0, 0.0], &[0.0, 1.0]];
const E12: &[&[f64]] = &[&[0.0, 1.0], &[1.0, 0.0]];
const I2: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];

/// Small SDPs with closed-form optima.
pub fn toy_sdps() -> Vec<(&'static str, SdpProblem, f64)> {
    let s2 = 2f64.sqrt();
    let s5 = 5f64.sqrt();
    let i3: &[&[f64]] = &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
    let tridiag: &[&[f64]] = &[&[-2.0, 1.0, 0.0], &[1.0, -2.0, 1.0], &[0.0, 1.0, -2.0]];
    let x0: &[&[f64]] = &[&[1.0]];
    let zero: &[&[f64]] = &[&[0.0]];
    vec![
        ("scalar bound", sdp(&[1.0], vec![block(&[&[-1.0]], &[x0])], &[]), 1.0),
        ("diagonal bounds", sdp(&[1.0, 1.0], vec![block(&[&[-1.0, 0.0], &[0.0, -2.0]], &[E11, E22])], &[]), 3.0),
        ("symmetric hyperbola", sdp(&[1.0], vec![block(E12, &[I2])], &[]), 1.0),
        ("weighted hyperbola", sdp(&[2.0, 1.0], vec![block(E12, &[E11, E22])], &[]), 2.0 * s2),
        ("largest eigenvalue 2x2", sdp(&[1.0], vec![block(&[&[-2.0, -1.0], &[-1.0, -3.0]], &[I2])], &[]), (5.0 + s5) / 2.0),
        (
            "simplex",
            sdp(&[1.0, -1.0], vec![block(zero, &[x0, zero]), block(zero, &[zero, x0])], &[(&[(0, 1.0), (1, 1.0)], 1.0)]),
            -1.0,
        ),
        ("moment matrix with fixed mean", sdp(&[0.0, 1.0], vec![block(E11, &[E12, E22])], &[(&[(0, 1.0)], 1.0)]), 1.0),
        ("correlation bound", sdp(&[-1.0], vec![block(I2, &[E12])], &[]), -1.0),
        ("largest eigenvalue 3x3", sdp(&[1.0], vec![block(tridiag, &[i3])], &[]), 2.0 + s2),
        ("balanced hyperbola", sdp(&[1.0, 1.0], vec![block(E12, &[E11, E22])], &[]), 2.0),
    ]
}

/// SDPs with no feasible point.
pub fn infeasible_sdps() -> Vec<(&'static str, SdpProblem)> {
    let x0: &[&[f64]] = &[&[1.0]];
    let minus: &[&[f64]] = &[&[-1.0]];
    vec![
        ("opposite bounds", sdp(&[1.0], vec![block(minus, &[x0]), block(&[&[0.0]], &[minus])], &[])),
        ("negative diagonal", sdp(&[1.0], vec![block(&[&[-1.0, 0.0], &[0.0, 1.0]], &[E12])], &[])),
        ("correlation above one", sdp(&[0.0], vec![block(I2, &[E12])], &[(&[(0, 1.0)], 2.0)])),
    ]
}

/// Toy optima to 1e-7 and infeasibility certificates.
pub fn sdp_backend_toys() -> Check {
    let settings = SdpSettings::default();
    for (name, p, want) in toy_sdps() {
        let r = InteriorPoint.solve(&p, &settings);
        if r.status != SdpStatus::Optimal {
            return Err(format!("{name}: {:?} ({})", r.status, r.message));
        }
        if (r.primal_objective - want).abs() > 1e-7 {
            return Err(format!("{name}: {} vs {want}", r.primal_objective));
        }
        if p.equality_residual(&r.y) > 1e-7 || p.block_min_eigenvalues(&r.y).iter().any(|&e| e < -1e-7) {
            return Err(format!("{name}: solution infeasible"));
        }
    }
    for (name, p) in infeasible_sdps() {
        let r = InteriorPoint.solve(&p, &settings);
        if r.status != SdpStatus::PrimalInfeasible {
            return Err(format!("{name}: {:?} ({})", r.status, r.message));
        }
    }
    Ok(())
}
