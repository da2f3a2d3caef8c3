use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lme::{build_kkt_sets, kkt_residual};
use crate::moment::{minimize, HierarchyOptions, HierarchyOutcome, PolyProgram};
use crate::poly::Polynomial;
use crate::sdp::SdpBackend;

use super::{polish, random_theta, CutSet, SolveAll, SolveOutcome, Solution, ThetaForm, VipOptions, VipProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Candidate,
    Verify,
    Delta,
}

/// One line of the solver log.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub phase: Phase,
    /// Index of the solution being searched for (0 = first).
    pub solution_index: usize,
    pub loop_index: usize,
    /// Relaxation order that produced the result.
    pub order: Option<u32>,
    pub status: String,
    pub point: Option<Vec<f64>>,
    /// `θ(u)` for candidates, `ε` for verifications, `δ` for delta steps.
    pub value: Option<f64>,
    pub cuts_added: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub enum Candidate {
    Point { u: Vec<f64>, theta: f64, order: u32 },
    RelaxInfeasible { order: u32 },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug)]
pub struct Verification {
    /// Minimum of `(y − u)ᵀ F(u)` over `X`, or a certified lower bound
    /// above `−tol_eps` when `by_bound` is set.
    pub epsilon: f64,
    /// Minimizers (cut points); empty when accepted by bound.
    pub points: Vec<Vec<f64>>,
    pub order: u32,
    /// Whether the bounded direct formulation was needed.
    pub bounded: bool,
    pub by_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub enum NextOutcome {
    Solution(Solution),
    NoMoreSolutions { order: u32 },
    Inconclusive { candidate: Option<Vec<f64>>, epsilon: Option<f64>, reason: String },
}

/// Minimizes `θ` over the KKT set, the cuts and any extra inequalities.
pub fn find_candidate(
    p: &VipProblem,
    cuts: &CutSet,
    theta: &ThetaForm,
    extra: &[Polynomial],
    opts: &VipOptions,
    backend: &dyn SdpBackend,
) -> Candidate {
    let mut psi = p.kkt.i.clone();
    psi.extend(cuts.points.iter().map(|v| p.cut_polynomial(v)));
    psi.extend(extra.iter().cloned());
    let prog = match PolyProgram::new(theta.poly.clone(), p.kkt.e.clone(), psi) {
        Ok(prog) => prog,
        Err(e) => return Candidate::Inconclusive { reason: e.to_string() },
    };
    match minimize(&prog, &opts.hierarchy, backend) {
        Ok(HierarchyOutcome::Infeasible { order }) => Candidate::RelaxInfeasible { order },
        Ok(HierarchyOutcome::Minimizers { points, order, .. }) => {
            let u = points
                .into_iter()
                .min_by(|a, b| theta.value(a).total_cmp(&theta.value(b)))
                .expect("minimizer list is never empty");
            Candidate::Point { theta: theta.value(&u), u, order }
        }
        Ok(HierarchyOutcome::Inconclusive { bound, order, .. }) => Candidate::Inconclusive {
            reason: format!("no certified minimizer up to order {order} (bound {bound:?})"),
        },
        Ok(HierarchyOutcome::BoundReached { .. }) => unreachable!("no target bound set"),
        Err(e) => Candidate::Inconclusive { reason: e.to_string() },
    }
}

/// Solves `ε = min (y − u)ᵀ F(u)` over `X`, first through its own KKT
/// system when an `L(x)` is known, then directly over `X ∩ {‖x − u‖² ≤ R}`.
pub fn verify_candidate(
    u: &[f64],
    p: &VipProblem,
    r_fallback: f64,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
) -> std::result::Result<Verification, String> {
    let n = p.n();
    if u.len() != n {
        return Err(format!("point has length {}, expected {n}", u.len()));
    }
    let fu = p.eval_f(u);
    let offset: f64 = -fu.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    let objective = Polynomial::affine(&fu, offset);
    let tol = opts.tol_eps;
    let hopts = HierarchyOptions { stop_at_bound: Some(-tol), ..opts.hierarchy.clone() };

    let mut programs = Vec::new();
    if let Some(l) = &p.l {
        let consts: Vec<Polynomial> = fu.iter().map(|&v| Polynomial::constant(n, v)).collect();
        let kkt = l.apply(&consts).and_then(|lme| build_kkt_sets(&consts, &p.cs, &lme));
        match kkt {
            Ok(kkt) => programs.push((false, PolyProgram::new(objective.clone(), kkt.e, kkt.i))),
            Err(e) => log::debug!("verification KKT system unavailable: {e}"),
        }
    }
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for &i in &p.cs.eq_indices() {
        phi.push(p.cs.g[i].clone());
    }
    for &i in &p.cs.ineq_indices() {
        psi.push(p.cs.g[i].clone());
    }
    let mut ball = Polynomial::constant(n, r_fallback);
    for (i, &ui) in u.iter().enumerate() {
        let d = Polynomial::affine(&super::unit(n, i, 1.0), -ui);
        ball = &ball - &(&d * &d);
    }
    psi.push(ball);
    programs.push((true, PolyProgram::new(objective, phi, psi)));

    let mut reasons = Vec::new();
    let last = programs.len() - 1;
    for (idx, (bounded, prog)) in programs.into_iter().enumerate() {
        let prog = prog.map_err(|e| e.to_string())?;
        match minimize(&prog, &hopts, backend) {
            Ok(HierarchyOutcome::BoundReached { bound, order }) => {
                return Ok(Verification { epsilon: bound.min(0.0), points: vec![], order, bounded, by_bound: true });
            }
            Ok(HierarchyOutcome::Minimizers { value, points, order, .. }) => {
                return Ok(Verification { epsilon: value.min(0.0), points, order, bounded, by_bound: false });
            }
            Ok(HierarchyOutcome::Infeasible { order }) => {
                reasons.push(format!("verification relaxation infeasible at order {order}"));
            }
            Ok(HierarchyOutcome::Inconclusive { order, point, .. }) => {
                reasons.push(format!("verification inconclusive up to order {order}"));
                // Any v ∈ X with (v − u)ᵀF(u) < 0 is a valid cut that removes u.
                if idx == last {
                    if let Some(v) = point {
                        let gap = p.gap(u, &v);
                        if p.cs.violation(&v) <= opts.hierarchy.tol_feas && gap < -tol {
                            return Ok(Verification { epsilon: gap, points: vec![v], order, bounded, by_bound: false });
                        }
                    }
                }
            }
            Err(e) => reasons.push(e.to_string()),
        }
    }
    Err(reasons.join("; "))
}

struct Loop<'a> {
    p: &'a VipProblem,
    theta: &'a ThetaForm,
    opts: &'a VipOptions,
    backend: &'a dyn SdpBackend,
    solution_index: usize,
}

enum LoopEnd {
    Solution(Solution),
    Infeasible { loop_index: usize, order: u32 },
    Inconclusive { candidate: Option<Vec<f64>>, epsilon: Option<f64>, reason: String },
}

impl Loop<'_> {
    fn record(&self, trace: &mut Vec<StepRecord>, rec: StepRecord) {
        log::info!(
            "[{:?} s{} l{}] {} order={:?} value={:?}",
            rec.phase,
            rec.solution_index,
            rec.loop_index,
            rec.status,
            rec.order,
            rec.value
        );
        trace.push(rec);
    }

    fn step(&self, phase: Phase, loop_index: usize, status: impl Into<String>, started: Instant) -> StepRecord {
        StepRecord {
            phase,
            solution_index: self.solution_index,
            loop_index,
            order: None,
            status: status.into(),
            point: None,
            value: None,
            cuts_added: 0,
            seconds: started.elapsed().as_secs_f64(),
        }
    }

    fn run(&self, cuts: &mut CutSet, extra: &[Polynomial], trace: &mut Vec<StepRecord>) -> LoopEnd {
        let mut last: Option<(Vec<f64>, Option<f64>)> = None;
        for loop_index in 1..=self.opts.max_loops {
            let started = Instant::now();
            let cand = find_candidate(self.p, cuts, self.theta, extra, self.opts, self.backend);
            let u = match cand {
                Candidate::RelaxInfeasible { order } => {
                    let mut rec = self.step(Phase::Candidate, loop_index, "infeasible", started);
                    rec.order = Some(order);
                    self.record(trace, rec);
                    return LoopEnd::Infeasible { loop_index, order };
                }
                Candidate::Inconclusive { reason } => {
                    let rec = self.step(Phase::Candidate, loop_index, format!("inconclusive: {reason}"), started);
                    self.record(trace, rec);
                    let (candidate, epsilon) = last.map_or((None, None), |(u, e)| (Some(u), e));
                    return LoopEnd::Inconclusive { candidate, epsilon, reason };
                }
                Candidate::Point { u, theta, order } => {
                    let u = if self.opts.polish {
                        let radius = 1e-3 * u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                        polish(&u, &self.p.kkt, radius)
                    } else {
                        u
                    };
                    let mut rec = self.step(Phase::Candidate, loop_index, "candidate", started);
                    rec.order = Some(order);
                    rec.value = Some(theta);
                    rec.point = Some(u.clone());
                    self.record(trace, rec);
                    u
                }
            };

            let started = Instant::now();
            let r = self.opts.r_fallback.unwrap_or_else(|| u.iter().map(|v| v * v).sum::<f64>() + 100.0);
            let ver = match verify_candidate(&u, self.p, r, self.opts, self.backend) {
                Ok(v) => v,
                Err(reason) => {
                    let rec = self.step(Phase::Verify, loop_index, format!("inconclusive: {reason}"), started);
                    self.record(trace, rec);
                    return LoopEnd::Inconclusive { candidate: Some(u), epsilon: None, reason };
                }
            };
            let accepted = ver.epsilon.abs() <= self.opts.tol_eps;
            let mut added = 0;
            if !accepted {
                for v in &ver.points {
                    if cuts.insert(v.clone(), self.opts.cut_tol) {
                        added += 1;
                    }
                }
            }
            let mut rec = self.step(Phase::Verify, loop_index, if accepted { "accepted" } else { "rejected" }, started);
            rec.order = Some(ver.order);
            rec.value = Some(ver.epsilon);
            rec.cuts_added = added;
            self.record(trace, rec);
            if accepted {
                return LoopEnd::Solution(Solution {
                    theta: self.theta.value(&u),
                    kkt_residual: kkt_residual(&u, &self.p.kkt),
                    epsilon: ver.epsilon,
                    point: u,
                    loops: loop_index,
                });
            }
            if added == 0 {
                return LoopEnd::Inconclusive {
                    candidate: Some(u),
                    epsilon: Some(ver.epsilon),
                    reason: "verification produced no new cut".into(),
                };
            }
            last = Some((u, Some(ver.epsilon)));
        }
        let (candidate, epsilon) = last.map_or((None, None), |(u, e)| (Some(u), e));
        LoopEnd::Inconclusive { candidate, epsilon, reason: format!("{} loops without a verified solution", self.opts.max_loops) }
    }
}

fn solve_one_traced(
    p: &VipProblem,
    theta: &ThetaForm,
    cuts: &mut CutSet,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
    trace: &mut Vec<StepRecord>,
) -> SolveOutcome {
    let lp = Loop { p, theta, opts, backend, solution_index: 0 };
    match lp.run(cuts, &[], trace) {
        LoopEnd::Solution(s) => SolveOutcome::Solution(s),
        LoopEnd::Infeasible { loop_index, order } => SolveOutcome::NoSolution { loop_index, order },
        LoopEnd::Inconclusive { candidate, epsilon, reason } => SolveOutcome::Inconclusive { candidate, epsilon, reason },
    }
}

/// Finds one solution or certifies that none exists.
pub fn solve_one(p: &VipProblem, opts: &VipOptions, backend: &dyn SdpBackend) -> SolveOutcome {
    solve_one_logged(p, opts, backend).0
}

/// [`solve_one`] together with its step log.
pub fn solve_one_logged(p: &VipProblem, opts: &VipOptions, backend: &dyn SdpBackend) -> (SolveOutcome, Vec<StepRecord>) {
    let theta = random_theta(p.n(), opts.seed);
    let mut trace = Vec::new();
    let out = solve_one_traced(p, &theta, &mut CutSet::default(), opts, backend, &mut trace);
    (out, trace)
}

/// First `δ ∈ {δ0, ρδ0, ρ²δ0, …}` for which `θ` has no value in
/// `(θ(x*), θ(x*) + δ]` on the cut KKT set, up to `tol_eps`.
pub fn find_delta(
    p: &VipProblem,
    x_star: &[f64],
    cuts: &CutSet,
    theta: &ThetaForm,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
) -> Result<f64> {
    find_delta_traced(p, x_star, cuts, theta, opts, backend, &mut Vec::new(), 0)
}

#[allow(clippy::too_many_arguments)]
fn find_delta_traced(
    p: &VipProblem,
    x_star: &[f64],
    cuts: &CutSet,
    theta: &ThetaForm,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
    trace: &mut Vec<StepRecord>,
    solution_index: usize,
) -> Result<f64> {
    let t_star = theta.value(x_star);
    let tol = opts.tol_eps * t_star.abs().max(1.0);
    let mut psi = p.kkt.i.clone();
    psi.extend(cuts.points.iter().map(|v| p.cut_polynomial(v)));
    let hopts = HierarchyOptions { stop_at_bound: Some(-t_star - tol), ..opts.hierarchy.clone() };
    let lp = Loop { p, theta, opts, backend, solution_index };
    let mut delta = opts.delta0;
    for shrink in 0..=opts.max_shrinks {
        let started = Instant::now();
        let mut psi_d = psi.clone();
        psi_d.push(&Polynomial::constant(p.n(), t_star + delta) - &theta.poly);
        let prog = PolyProgram::new(-&theta.poly, p.kkt.e.clone(), psi_d)?;
        let (ok, status, order) = match minimize(&prog, &hopts, backend) {
            Ok(HierarchyOutcome::BoundReached { order, .. }) => (true, "bound reached".to_string(), Some(order)),
            Ok(HierarchyOutcome::Minimizers { value, order, .. }) => {
                (value >= -t_star - tol, format!("max θ = {:.6e}", -value), Some(order))
            }
            Ok(HierarchyOutcome::Infeasible { order }) => (false, "infeasible".to_string(), Some(order)),
            Ok(HierarchyOutcome::Inconclusive { order, .. }) => (false, "inconclusive".to_string(), Some(order)),
            Err(e) => (false, e.to_string(), None),
        };
        let mut rec = lp.step(Phase::Delta, shrink, status, started);
        rec.order = order;
        rec.value = Some(delta);
        lp.record(trace, rec);
        if ok {
            return Ok(delta);
        }
        delta *= opts.rho;
    }
    Err(Error::DeltaSearchFailed(opts.max_shrinks))
}

/// Minimizes `θ` over the KKT set with `θ(x) ≥ θ(x*) + δ` added.
pub fn solve_next(
    p: &VipProblem,
    x_star: &[f64],
    cuts: &mut CutSet,
    delta: f64,
    theta: &ThetaForm,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
) -> NextOutcome {
    solve_next_traced(p, x_star, cuts, delta, theta, opts, backend, &mut Vec::new(), 1)
}

#[allow(clippy::too_many_arguments)]
fn solve_next_traced(
    p: &VipProblem,
    x_star: &[f64],
    cuts: &mut CutSet,
    delta: f64,
    theta: &ThetaForm,
    opts: &VipOptions,
    backend: &dyn SdpBackend,
    trace: &mut Vec<StepRecord>,
    solution_index: usize,
) -> NextOutcome {
    let floor = &theta.poly - &Polynomial::constant(p.n(), theta.value(x_star) + delta);
    let lp = Loop { p, theta, opts, backend, solution_index };
    match lp.run(cuts, &[floor], trace) {
        LoopEnd::Solution(s) => NextOutcome::Solution(s),
        LoopEnd::Infeasible { order, .. } => NextOutcome::NoMoreSolutions { order },
        LoopEnd::Inconclusive { candidate, epsilon, reason } => NextOutcome::Inconclusive { candidate, epsilon, reason },
    }
}

/// Solutions in increasing `θ` order, with completeness when the last
/// search ends in an infeasibility certificate.
pub fn solve_all(p: &VipProblem, opts: &VipOptions, backend: &dyn SdpBackend) -> SolveAll {
    let theta = random_theta(p.n(), opts.seed);
    let mut cuts = CutSet::default();
    let mut trace = Vec::new();
    let mut out = SolveAll { solutions: vec![], complete: false, no_solution_order: None, reason: None, trace: vec![] };
    match solve_one_traced(p, &theta, &mut cuts, opts, backend, &mut trace) {
        SolveOutcome::Solution(s) => out.solutions.push(s),
        SolveOutcome::NoSolution { order, .. } => {
            out.complete = true;
            out.no_solution_order = Some(order);
        }
        SolveOutcome::Inconclusive { reason, .. } => out.reason = Some(reason),
    }
    while !out.complete && out.reason.is_none() && !out.solutions.is_empty() {
        if out.solutions.len() >= opts.max_solutions {
            out.reason = Some(format!("stopped after {} solutions", opts.max_solutions));
            break;
        }
        let idx = out.solutions.len();
        let x_star = out.solutions[idx - 1].point.clone();
        let delta = match find_delta_traced(p, &x_star, &cuts, &theta, opts, backend, &mut trace, idx) {
            Ok(d) => d,
            Err(e) => {
                out.reason = Some(e.to_string());
                break;
            }
        };
        match solve_next_traced(p, &x_star, &mut cuts, delta, &theta, opts, backend, &mut trace, idx) {
            NextOutcome::Solution(s) => out.solutions.push(s),
            NextOutcome::NoMoreSolutions { .. } => out.complete = true,
            NextOutcome::Inconclusive { reason, .. } => out.reason = Some(reason),
        }
    }
    out.trace = trace;
    out
}
