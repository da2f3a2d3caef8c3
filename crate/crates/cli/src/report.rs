//! Solver reports as JSON and aligned text.

use std::fmt::Write as _;

use polyvi::vip::{SolveAll, SolveOutcome, StepRecord};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Solutions,
    NoSolution,
    Inconclusive,
}

impl OutcomeKind {
    pub fn exit_code(self) -> i32 {
        match self {
            OutcomeKind::Solutions | OutcomeKind::NoSolution => 0,
            OutcomeKind::Inconclusive => 2,
        }
    }

    fn label(self) -> &'static str {
        match self {
            OutcomeKind::Solutions => "solutions",
            OutcomeKind::NoSolution => "no solution",
            OutcomeKind::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub point: Vec<f64>,
    pub epsilon: f64,
    pub theta: f64,
    pub loops: usize,
    pub kkt_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopRow {
    pub phase: String,
    pub solution_index: usize,
    pub loop_index: usize,
    pub order: Option<u32>,
    pub status: String,
    pub value: Option<f64>,
    pub cuts_added: usize,
    pub seconds: f64,
}

impl From<&StepRecord> for LoopRow {
    fn from(r: &StepRecord) -> Self {
        LoopRow {
            phase: format!("{:?}", r.phase).to_lowercase(),
            solution_index: r.solution_index,
            loop_index: r.loop_index,
            order: r.order,
            status: r.status.clone(),
            value: r.value,
            cuts_added: r.cuts_added,
            seconds: r.seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub outcome: OutcomeKind,
    pub solutions: Vec<SolutionRow>,
    /// True when no further solution exists (certified).
    pub complete: bool,
    /// Relaxation order of the infeasibility certificate, if any.
    pub certificate_order: Option<u32>,
    pub reason: Option<String>,
    /// Last candidate and its gap when inconclusive.
    pub candidate: Option<Vec<f64>>,
    pub candidate_epsilon: Option<f64>,
    pub seed: u64,
    pub log: Vec<LoopRow>,
    pub seconds: f64,
}

fn row(s: &polyvi::vip::Solution) -> SolutionRow {
    SolutionRow { point: s.point.clone(), epsilon: s.epsilon, theta: s.theta, loops: s.loops, kkt_residual: s.kkt_residual }
}

impl Report {
    pub fn from_all(out: &SolveAll, seed: u64, seconds: f64) -> Self {
        let outcome = if !out.solutions.is_empty() {
            OutcomeKind::Solutions
        } else if out.no_solution_order.is_some() {
            OutcomeKind::NoSolution
        } else {
            OutcomeKind::Inconclusive
        };
        let certificate_order = out.no_solution_order.or_else(|| {
            out.complete.then(|| out.trace.iter().rev().find(|r| r.status == "infeasible").and_then(|r| r.order)).flatten()
        });
        Report {
            outcome,
            solutions: out.solutions.iter().map(row).collect(),
            complete: out.complete,
            certificate_order,
            reason: out.reason.clone(),
            candidate: None,
            candidate_epsilon: None,
            seed,
            log: out.trace.iter().map(LoopRow::from).collect(),
            seconds,
        }
    }

    pub fn from_one(out: &SolveOutcome, trace: &[StepRecord], seed: u64, seconds: f64) -> Self {
        let mut r = Report {
            outcome: OutcomeKind::Inconclusive,
            solutions: vec![],
            complete: false,
            certificate_order: None,
            reason: None,
            candidate: None,
            candidate_epsilon: None,
            seed,
            log: trace.iter().map(LoopRow::from).collect(),
            seconds,
        };
        match out {
            SolveOutcome::Solution(s) => {
                r.outcome = OutcomeKind::Solutions;
                r.solutions.push(row(s));
            }
            SolveOutcome::NoSolution { order, .. } => {
                r.outcome = OutcomeKind::NoSolution;
                r.complete = true;
                r.certificate_order = Some(*order);
            }
            SolveOutcome::Inconclusive { candidate, epsilon, reason } => {
                r.reason = Some(reason.clone());
                r.candidate = candidate.clone();
                r.candidate_epsilon = *epsilon;
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "outcome     {}", self.outcome.label());
        let _ = writeln!(s, "complete    {}", if self.complete { "yes" } else { "no" });
        if let Some(k) = self.certificate_order {
            let _ = writeln!(s, "certificate infeasible relaxation at order {k}");
        }
        if let Some(r) = &self.reason {
            let _ = writeln!(s, "reason      {r}");
        }
        if let Some(c) = &self.candidate {
            let _ = writeln!(s, "candidate   {}", fmt_point(c));
        }
        if let Some(e) = self.candidate_epsilon {
            let _ = writeln!(s, "cand. eps   {e:.4e}");
        }
        let _ = writeln!(s, "seed        {}", self.seed);
        let _ = writeln!(s, "time        {:.2}s", self.seconds);
        if !self.solutions.is_empty() {
            let _ = writeln!(s);
            let w = self.solutions.iter().map(|r| fmt_point(&r.point).len()).max().unwrap_or(5).max(5);
            let _ = writeln!(s, "{:>3}  {:<w$}  {:>11}  {:>11}  {:>5}  {:>9}", "#", "point", "eps", "theta", "loops", "kkt");
            for (i, r) in self.solutions.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:>3}  {:<w$}  {:>11.4e}  {:>11.6}  {:>5}  {:>9.2e}",
                    i + 1,
                    fmt_point(&r.point),
                    r.epsilon,
                    r.theta,
                    r.loops,
                    r.kkt_residual
                );
            }
        }
        if !self.log.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<9}  {:>3}  {:>4}  {:>5}  {:>11}  {:>4}  {:>8}  status",
                "phase", "sol", "loop", "order", "value", "cuts", "time"
            );
            for r in &self.log {
                let order = r.order.map_or("-".to_string(), |k| k.to_string());
                let value = r.value.map_or("-".to_string(), |v| format!("{v:.4e}"));
                let _ = writeln!(
                    s,
                    "{:<9}  {:>3}  {:>4}  {:>5}  {:>11}  {:>4}  {:>7.2}s  {}",
                    r.phase, r.solution_index, r.loop_index, order, value, r.cuts_added, r.seconds, r.status
                );
            }
        }
        s
    }
}

/// Point with four decimals, as printed in the solution table.
pub fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{:.4}", if v.abs() < 5e-5 { 0.0 } else { *v })).collect();
    format!("({})", parts.join(", "))
}

/// One row of a batch table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub family: String,
    pub dims: Vec<usize>,
    pub count: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_seconds: f64,
    pub failures: Vec<BatchFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub seed: u64,
    pub reason: String,
}

impl BatchRow {
    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "{:<11}  {:<8}  {:>5}  {:>7}  {:>9}", "family", "dims", "N", "SR", "time");
        let sr = if self.count == 0 { "-".to_string() } else { format!("{:.0}%", 100.0 * self.success_rate) };
        let time = if self.count == 0 { "-".to_string() } else { format!("{:.2}s", self.mean_seconds) };
        let _ = writeln!(s, "{:<11}  {:<8}  {:>5}  {:>7}  {:>9}", self.family, format!("({})", dims.join(",")), self.count, sr, time);
        for f in &self.failures {
            let _ = writeln!(s, "  seed {}: {}", f.seed, f.reason);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            outcome: OutcomeKind::Solutions,
            solutions: vec![
                SolutionRow { point: vec![1.0, 0.0, 3.0, 0.0], epsilon: 0.0, theta: 31.6, loops: 1, kkt_residual: 1e-15 },
                SolutionRow { point: vec![1.2247, 0.0, 0.0, 0.5], epsilon: -2e-9, theta: 40.0, loops: 2, kkt_residual: 1e-13 },
            ],
            complete: true,
            certificate_order: Some(3),
            reason: None,
            candidate: None,
            candidate_epsilon: None,
            seed: 0,
            log: vec![LoopRow {
                phase: "candidate".into(),
                solution_index: 0,
                loop_index: 1,
                order: Some(3),
                status: "candidate".into(),
                value: Some(31.6),
                cuts_added: 0,
                seconds: 0.5,
            }],
            seconds: 1.5,
        }
    }

    #[test]
    fn json_and_text_agree() {
        let r = sample();
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let text = r.to_text();
        assert!(text.contains("outcome     solutions"));
        assert!(text.contains("complete    yes"));
        assert!(text.contains("order 3"));
        for s in &back.solutions {
            assert!(text.contains(&fmt_point(&s.point)), "{text}");
            assert!(text.contains(&format!("{:.4e}", s.epsilon)));
        }
        let table_rows = text.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count();
        assert_eq!(table_rows, back.solutions.len());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(OutcomeKind::Solutions.exit_code(), 0);
        assert_eq!(OutcomeKind::NoSolution.exit_code(), 0);
        assert_eq!(OutcomeKind::Inconclusive.exit_code(), 2);
    }

    #[test]
    fn empty_batch_table() {
        let row = BatchRow {
            family: "ball".into(),
            dims: vec![4, 2],
            count: 0,
            successes: 0,
            success_rate: 0.0,
            mean_seconds: 0.0,
            failures: vec![],
        };
        let t = row.to_text();
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("(4,2)"));
    }
}
