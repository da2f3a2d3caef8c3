use serde::Serialize;

use crate::error::{Error, Result};
use crate::sdp::{SdpBackend, SdpSettings};

use super::extract::{extract_minimizers, flat_truncation, ExtractionOptions};
use super::{build_relaxation, check_point_optimality, normalized, solve_relaxation, PolyProgram, RelaxationResult};

/// Consecutive unsolved orders before the hierarchy gives up.
const MAX_CONSECUTIVE_FAILURES: usize = 3;

#[derive(Clone, Debug)]
pub struct HierarchyOptions {
    /// Orders `d0 ..= d0 + k_max_extra` are tried.
    pub k_max_extra: u32,
    pub tol_feas: f64,
    /// Relative to `max(1, |ϑ_k|)`.
    pub tol_gap: f64,
    pub tol_rank: f64,
    /// Try reading the minimizer off the first moments before flat truncation.
    pub point_first: bool,
    /// Stop as soon as a relaxation value reaches this bound.
    pub stop_at_bound: Option<f64>,
    pub extraction: ExtractionOptions,
    pub sdp: SdpSettings,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            k_max_extra: 4,
            tol_feas: 1e-6,
            tol_gap: 1e-6,
            tol_rank: 1e-4,
            point_first: true,
            stop_at_bound: None,
            extraction: ExtractionOptions::default(),
            sdp: SdpSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Certificate {
    PointOptimality,
    FlatTruncation { rank: usize, t: u32 },
}

#[derive(Clone, Debug, Serialize)]
pub enum HierarchyOutcome {
    Infeasible { order: u32 },
    Minimizers { value: f64, points: Vec<Vec<f64>>, certificate: Certificate, order: u32 },
    /// A relaxation value reached `HierarchyOptions::stop_at_bound`.
    BoundReached { bound: f64, order: u32 },
    /// The order cap was reached without a certificate. `point` holds the
    /// first-order moments of the last solved relaxation.
    Inconclusive { bound: Option<f64>, order: u32, point: Option<Vec<f64>> },
}

/// Runs the moment hierarchy from the minimal order upwards.
pub fn minimize(prog: &PolyProgram, opts: &HierarchyOptions, backend: &dyn SdpBackend) -> Result<HierarchyOutcome> {
    let d0 = prog.d0();
    let scaled = PolyProgram {
        n: prog.n,
        objective: prog.objective.clone(),
        phi: prog.phi.iter().map(normalized).collect(),
        psi: prog.psi.iter().map(normalized).collect(),
    };
    let mut best: Option<f64> = None;
    let mut last_point = None;
    let mut failed_last = None;
    let mut failures: Vec<u32> = Vec::new();
    let last_order = d0 + opts.k_max_extra;
    for k in d0..=last_order {
        let rel = build_relaxation(prog, k)?;
        let (value, y, dual_bound) = match solve_relaxation(&rel, backend, &opts.sdp) {
            RelaxationResult::Infeasible => return Ok(HierarchyOutcome::Infeasible { order: k }),
            RelaxationResult::Unbounded => {
                failed_last = None;
                failures.clear();
                continue;
            }
            RelaxationResult::NumericalFailure(msg) => {
                log::debug!("order {k}: {msg}");
                failures.push(k);
                if failures.len() >= MAX_CONSECUTIVE_FAILURES {
                    let orders: Vec<String> = failures.iter().map(|k| k.to_string()).collect();
                    return Err(Error::NumericalFailure(format!("orders {}: {msg}", orders.join(", "))));
                }
                failed_last = Some(k);
                continue;
            }
            RelaxationResult::Optimal { value, y, dual_bound, .. } => (value, y, dual_bound),
        };
        failed_last = None;
        failures.clear();
        best = Some(best.map_or(value, |b: f64| b.max(value)));
        if let Some(target) = opts.stop_at_bound {
            let bound = value.min(dual_bound);
            if bound >= target {
                return Ok(HierarchyOutcome::BoundReached { bound, order: k });
            }
        }
        last_point = Some(y.first_order());

        if opts.point_first {
            if let Some(u) = check_point_optimality(&y, value, &scaled, opts.tol_feas, opts.tol_gap) {
                return Ok(HierarchyOutcome::Minimizers {
                    value,
                    points: vec![u],
                    certificate: Certificate::PointOptimality,
                    order: k,
                });
            }
        }
        for t in d0..=k {
            let Some(r) = flat_truncation(&y, d0, t, opts.tol_rank) else { continue };
            let Ok(points) = extract_minimizers(&y, t, r, &opts.extraction) else { continue };
            let tol_gap = opts.tol_gap * value.abs().max(1.0);
            let points: Vec<Vec<f64>> = points
                .into_iter()
                .filter(|u| {
                    scaled.violation(u) <= opts.tol_feas && (prog.objective.eval(u) - value).abs() <= tol_gap
                })
                .collect();
            if !points.is_empty() {
                return Ok(HierarchyOutcome::Minimizers {
                    value,
                    points,
                    certificate: Certificate::FlatTruncation { rank: r, t },
                    order: k,
                });
            }
        }
    }
    if let Some(k) = failed_last {
        if best.is_none() {
            return Err(Error::NumericalFailure(format!("no relaxation up to order {k} was solved")));
        }
    }
    Ok(HierarchyOutcome::Inconclusive { bound: best, order: last_order, point: last_point })
}
