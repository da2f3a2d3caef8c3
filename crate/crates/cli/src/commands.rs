//! Command implementations; `main` only parses arguments.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigUint;
use polyvi::lme::{kkt_residual, ConstraintKind};
use polyvi::sdp::InteriorPoint;
use polyvi::vip::{active_set_bounds, solve_all, solve_one_logged, verify_candidate, SolveOutcome, VipOptions};
use serde::Serialize;

use crate::generate::{generate, generate_problem, Family};
use crate::problem_file::ProblemFile;
use crate::report::{BatchFailure, BatchRow, Report};

/// Failure that maps to exit code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub type CliResult = Result<i32, CliError>;

pub fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    ProblemFile::parse(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, dest: Option<&Path>, body: &str) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => out.write_all(body.as_bytes()).map_err(|e| CliError(e.to_string())),
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveArgs {
    pub file: PathBuf,
    pub all: bool,
    pub seed: Option<u64>,
    pub max_loops: Option<usize>,
    pub max_order_extra: Option<u32>,
    pub json: bool,
    pub out: Option<PathBuf>,
}

pub fn solve(args: &SolveArgs, out: &mut dyn Write) -> CliResult {
    let pf = load(&args.file)?;
    let p = pf.to_problem().map_err(|e| CliError(e.to_string()))?;
    let mut opts = pf.options();
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    if let Some(m) = args.max_loops {
        opts.max_loops = m;
    }
    if let Some(k) = args.max_order_extra {
        opts.hierarchy.k_max_extra = k;
    }
    let t = Instant::now();
    let report = if args.all {
        let res = solve_all(&p, &opts, &InteriorPoint);
        Report::from_all(&res, opts.seed, t.elapsed().as_secs_f64())
    } else {
        let (res, trace) = solve_one_logged(&p, &opts, &InteriorPoint);
        Report::from_one(&res, &trace, opts.seed, t.elapsed().as_secs_f64())
    };
    let body = if args.json { report.to_json() + "\n" } else { report.to_text() };
    emit(out, args.out.as_deref(), &body)?;
    Ok(report.outcome.exit_code())
}

#[derive(Serialize)]
struct VerifyReport {
    point: Vec<f64>,
    epsilon: Option<f64>,
    /// Largest violation of the constraints of `X` at the point.
    feasibility_violation: f64,
    kkt_residual: f64,
    accepted: bool,
    order: Option<u32>,
    note: Option<String>,
}

pub fn parse_point(s: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let pt: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError(format!("malformed point `{s}`: {e}"))))
        .collect::<Result<_, _>>()?;
    if pt.len() != n {
        return Err(CliError(format!("point has {} entries, expected {n}", pt.len())));
    }
    if pt.iter().any(|v| !v.is_finite()) {
        return Err(CliError(format!("point `{s}` has non-finite entries")));
    }
    Ok(pt)
}

pub fn verify(file: &Path, point: &str, json: bool, out: &mut dyn Write) -> CliResult {
    let pf = load(file)?;
    let p = pf.to_problem().map_err(|e| CliError(e.to_string()))?;
    let u = parse_point(point, p.n())?;
    let opts = pf.options();
    let feas = p.cs.violation(&u);
    let kkt = kkt_residual(&u, &p.kkt);
    let r = opts.r_fallback.unwrap_or_else(|| u.iter().map(|v| v * v).sum::<f64>() + 100.0);
    let (rep, code) = match verify_candidate(&u, &p, r, &opts, &InteriorPoint) {
        Ok(v) => {
            let accepted = v.epsilon.abs() <= opts.tol_eps && feas <= opts.hierarchy.tol_feas;
            let note = v.by_bound.then(|| format!("ε ≥ {:.1e} certified by a relaxation bound", -opts.tol_eps));
            let rep = VerifyReport {
                point: u,
                epsilon: Some(v.epsilon),
                feasibility_violation: feas,
                kkt_residual: kkt,
                accepted,
                order: Some(v.order),
                note,
            };
            (rep, 0)
        }
        Err(reason) => {
            let rep = VerifyReport {
                point: u,
                epsilon: None,
                feasibility_violation: feas,
                kkt_residual: kkt,
                accepted: false,
                order: None,
                note: Some(reason),
            };
            (rep, 2)
        }
    };
    let body = if json {
        serde_json::to_string_pretty(&rep).expect("serializable") + "\n"
    } else {
        let mut s = String::new();
        s += &format!("point       {}\n", crate::report::fmt_point(&rep.point));
        s += &format!("epsilon     {}\n", rep.epsilon.map_or("-".into(), |e| format!("{e:.4e}")));
        s += &format!("feasibility {:.2e}\n", rep.feasibility_violation);
        s += &format!("kkt         {:.2e}\n", rep.kkt_residual);
        if let Some(k) = rep.order {
            s += &format!("order       {k}\n");
        }
        if let Some(n) = &rep.note {
            s += &format!("note        {n}\n");
        }
        s += &format!("verdict     {}\n", if rep.accepted { "accepted" } else { "rejected" });
        s
    };
    emit(out, None, &body)?;
    Ok(code)
}

#[derive(Serialize)]
struct BoundRow {
    active: Vec<usize>,
    size: usize,
    bound: String,
}

#[derive(Serialize)]
struct BoundReport {
    f_degrees: Vec<u32>,
    rows: Vec<BoundRow>,
    /// Sum over active sets of each size.
    by_size: Vec<(usize, String)>,
    total: String,
}

pub fn bound(file: &Path, json: bool, out: &mut dyn Write) -> CliResult {
    let pf = load(file)?;
    let p = pf.to_problem().map_err(|e| CliError(e.to_string()))?;
    // constant entries still count as degree-1 equations
    let a: Vec<u32> = p.f.iter().map(|f| f.degree().max(1)).collect();
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    let mut ineq_index = Vec::new();
    for (i, (g, k)) in p.cs.g.iter().zip(&p.cs.kinds).enumerate() {
        match k {
            ConstraintKind::Eq => eq.push(g.degree().max(1)),
            ConstraintKind::Ineq => {
                ineq.push(g.degree().max(1));
                ineq_index.push(i);
            }
        }
    }
    let sets = active_set_bounds(&a, &eq, &ineq).map_err(|e| CliError(e.to_string()))?;
    let eq_index: Vec<usize> = (0..p.cs.m()).filter(|i| !ineq_index.contains(i)).collect();
    let mut rows = Vec::new();
    let mut by_size: Vec<(usize, BigUint)> = Vec::new();
    let mut total = BigUint::from(0u32);
    for (active, b) in sets {
        let mut idx = eq_index.clone();
        idx.extend(active.iter().map(|&j| ineq_index[j]));
        idx.sort_unstable();
        let size = idx.len();
        match by_size.iter_mut().find(|(s, _)| *s == size) {
            Some((_, acc)) => *acc += &b,
            None => by_size.push((size, b.clone())),
        }
        total += &b;
        rows.push(BoundRow { active: idx, size, bound: b.to_string() });
    }
    by_size.sort_by_key(|(s, _)| *s);
    let rep = BoundReport {
        f_degrees: a,
        rows,
        by_size: by_size.into_iter().map(|(s, b)| (s, b.to_string())).collect(),
        total: total.to_string(),
    };
    let body = if json {
        serde_json::to_string_pretty(&rep).expect("serializable") + "\n"
    } else {
        let mut s = format!("deg F = {:?}\n\n", rep.f_degrees);
        let w = rep.rows.iter().map(|r| format!("{:?}", r.active).len()).max().unwrap_or(6).max(6);
        s += &format!("{:<w$}  {:>4}  bound\n", "active", "m");
        for r in &rep.rows {
            s += &format!("{:<w$}  {:>4}  {}\n", format!("{:?}", r.active), r.size, r.bound);
        }
        s += "\n";
        for (m, b) in &rep.by_size {
            s += &format!("|A| = {m}: {b}\n");
        }
        s += &format!("total: {}\n", rep.total);
        s
    };
    emit(out, None, &body)?;
    Ok(0)
}

pub fn gen_random(family: Family, dims: &[usize], seed: u64, dest: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let pf = generate(family, dims, seed).map_err(CliError)?;
    emit(out, dest, &(pf.to_json() + "\n"))?;
    Ok(0)
}

#[derive(Clone, Debug)]
pub struct BatchArgs {
    pub family: Family,
    pub dims: Vec<usize>,
    pub count: usize,
    pub seed: u64,
    pub jobs: usize,
    pub json: bool,
}

/// Solves one generated instance; `Ok(seconds)` on success.
fn batch_instance(family: Family, dims: &[usize], seed: u64, opts: &VipOptions) -> Result<f64, String> {
    let (p, _) = generate_problem(family, dims, seed)?;
    let t = Instant::now();
    let (out, _) = solve_one_logged(&p, opts, &InteriorPoint);
    let secs = t.elapsed().as_secs_f64();
    match out {
        SolveOutcome::Solution(s) if s.epsilon.abs() <= opts.tol_eps => Ok(secs),
        SolveOutcome::Solution(s) => Err(format!("|ε| = {:.2e}", s.epsilon.abs())),
        SolveOutcome::NoSolution { .. } => Ok(secs),
        SolveOutcome::Inconclusive { reason, .. } => Err(reason),
    }
}

pub fn run_batch(args: &BatchArgs) -> Result<BatchRow, CliError> {
    // validate dims before spawning anything
    generate(args.family, &args.dims, args.seed).map_err(CliError)?;
    let opts = VipOptions::default();
    let seeds: Vec<u64> = (0..args.count as u64).map(|i| args.seed.wrapping_add(i)).collect();
    let jobs = args.jobs.max(1).min(seeds.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(vec![None; seeds.len()]);
    std::thread::scope(|sc| {
        for _ in 0..jobs {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = batch_instance(args.family, &args.dims, seeds[i], &opts);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers finished");
    let mut successes = 0;
    let mut total = 0.0;
    let mut failures = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r.expect("every instance ran") {
            Ok(secs) => {
                successes += 1;
                total += secs;
            }
            Err(reason) => failures.push(BatchFailure { seed: *seed, reason }),
        }
    }
    let count = seeds.len();
    Ok(BatchRow {
        family: args.family.to_string(),
        dims: args.dims.clone(),
        count,
        successes,
        success_rate: if count == 0 { 0.0 } else { successes as f64 / count as f64 },
        mean_seconds: if successes == 0 { 0.0 } else { total / successes as f64 },
        failures,
    })
}

pub fn batch(args: &BatchArgs, out: &mut dyn Write) -> CliResult {
    let row = run_batch(args)?;
    let body = if args.json { serde_json::to_string_pretty(&row).expect("serializable") + "\n" } else { row.to_text() };
    emit(out, None, &body)?;
    Ok(0)
}
