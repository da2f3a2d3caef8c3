//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "F": [[{"coef": 1.0, "exp": [1, 0]}, {"coef": -2.0, "exp": [0, 0]}], "x2"],
//!   "constraints": [{"poly": "1 - x1^2 - x2^2", "kind": "ineq"}],
//!   "lme": {"kind": "ball"},
//!   "options": {"seed": 3}
//! }
//! ```
//!
//! Polynomials are term lists or infix strings; files are always written
//! with term lists.

use std::fmt;

use polyvi::lme::{ConstraintKind, ConstraintSystem, LmeKind, LmeMatrix, LmeSet};
use polyvi::poly::{Polynomial, Term};
use polyvi::vip::{LmeSource, VipOptions, VipProblem};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Terms(Vec<Term>),
    Text(String),
}

impl PolySpec {
    pub fn from_poly(p: &Polynomial) -> Self {
        PolySpec::Terms(p.to_terms())
    }

    /// Readable form; coefficients print in shortest round-trip notation.
    pub fn text(p: &Polynomial) -> Self {
        PolySpec::Text(p.to_string())
    }

    fn build(&self, n: usize) -> polyvi::Result<Polynomial> {
        match self {
            PolySpec::Terms(t) => Polynomial::from_terms(n, t),
            PolySpec::Text(s) => Polynomial::parse(n, s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    Eq,
    Ineq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub poly: PolySpec,
    pub kind: KindSpec,
}

/// Exactly one of `kind`, `lambdas` or `L` must be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<LmeKind>,
    /// Accepted for readability; template parameters are read off the constraints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<PolySpec>>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<Vec<PolySpec>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoms: Option<Vec<PolySpec>>,
}

impl LmeSpec {
    pub fn catalog(kind: LmeKind) -> Self {
        LmeSpec { kind: Some(kind), ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_loops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order_extra: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_fallback: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_solutions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish: Option<bool>,
}

impl OptionsSpec {
    pub fn is_empty(&self) -> bool {
        self == &OptionsSpec::default()
    }

    pub fn apply(&self, o: &mut VipOptions) {
        if let Some(v) = self.seed {
            o.seed = v;
        }
        if let Some(v) = self.max_loops {
            o.max_loops = v;
        }
        if let Some(v) = self.max_order_extra {
            o.hierarchy.k_max_extra = v;
        }
        if let Some(v) = self.tol_eps {
            o.tol_eps = v;
        }
        if let Some(v) = self.r_fallback {
            o.r_fallback = Some(v);
        }
        if let Some(v) = self.delta0 {
            o.delta0 = v;
        }
        if let Some(v) = self.rho {
            o.rho = v;
        }
        if let Some(v) = self.max_solutions {
            o.max_solutions = v;
        }
        if let Some(v) = self.polish {
            o.polish = v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "F")]
    pub f: Vec<PolySpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    pub lme: LmeSpec,
    #[serde(default, skip_serializing_if = "OptionsSpec::is_empty")]
    pub options: OptionsSpec,
}

/// Load failure with the JSON position (syntax and type errors) or the
/// path of the offending entry (semantic errors).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub path: Option<String>,
    pub message: String,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if let Some(p) = &self.path {
            write!(f, "{p}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for LoadError {}

fn at(path: impl Into<String>, e: impl fmt::Display) -> LoadError {
    LoadError { line: None, column: None, path: Some(path.into()), message: e.to_string() }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let pf: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            LoadError {
                line: Some(inner.line()),
                column: Some(inner.column()),
                path: (path != ".").then_some(path),
                message: inner.to_string(),
            }
        })?;
        // Surface semantic errors at load time too.
        pf.to_problem()?;
        Ok(pf)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Catalog problem file for an already built problem.
    pub fn from_problem(p: &VipProblem, kind: LmeKind) -> Self {
        ProblemFile {
            n: p.n(),
            f: p.f.iter().map(PolySpec::text).collect(),
            constraints: p
                .cs
                .g
                .iter()
                .zip(&p.cs.kinds)
                .map(|(g, k)| ConstraintSpec {
                    poly: PolySpec::text(g),
                    kind: match k {
                        ConstraintKind::Eq => KindSpec::Eq,
                        ConstraintKind::Ineq => KindSpec::Ineq,
                    },
                })
                .collect(),
            lme: LmeSpec::catalog(kind),
            options: OptionsSpec::default(),
        }
    }

    /// Same file with every polynomial written as a term list.
    pub fn canonical(&self) -> Result<Self, LoadError> {
        let n = self.n;
        let canon = |p: &PolySpec, path: String| p.build(n).map(|q| PolySpec::from_poly(&q)).map_err(|e| at(path, e));
        let canon_list = |ps: &[PolySpec], name: &str| -> Result<Vec<PolySpec>, LoadError> {
            ps.iter().enumerate().map(|(i, p)| canon(p, format!("{name}[{i}]"))).collect()
        };
        let mut out = self.clone();
        out.f = canon_list(&self.f, "F")?;
        for (i, c) in out.constraints.iter_mut().enumerate() {
            c.poly = canon(&c.poly, format!("constraints[{i}].poly"))?;
        }
        if let Some(l) = &self.lme.lambdas {
            out.lme.lambdas = Some(canon_list(l, "lme.lambdas")?);
        }
        if let Some(d) = &self.lme.denoms {
            out.lme.denoms = Some(canon_list(d, "lme.denoms")?);
        }
        if let Some(rows) = &self.lme.l {
            out.lme.l = Some(
                rows.iter().enumerate().map(|(i, r)| canon_list(r, &format!("lme.L[{i}]"))).collect::<Result<_, _>>()?,
            );
        }
        Ok(out)
    }

    pub fn options(&self) -> VipOptions {
        let mut o = VipOptions::default();
        self.options.apply(&mut o);
        o
    }

    pub fn to_problem(&self) -> Result<VipProblem, LoadError> {
        let n = self.n;
        if n == 0 {
            return Err(at("n", "must be positive"));
        }
        let build_list = |ps: &[PolySpec], name: &str| -> Result<Vec<Polynomial>, LoadError> {
            ps.iter().enumerate().map(|(i, p)| p.build(n).map_err(|e| at(format!("{name}[{i}]"), e))).collect()
        };
        let f = build_list(&self.f, "F")?;
        if f.len() != n {
            return Err(at("F", format!("has {} entries, expected n = {n}", f.len())));
        }
        let mut g = Vec::new();
        let mut kinds = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            g.push(c.poly.build(n).map_err(|e| at(format!("constraints[{i}].poly"), e))?);
            kinds.push(match c.kind {
                KindSpec::Eq => ConstraintKind::Eq,
                KindSpec::Ineq => ConstraintKind::Ineq,
            });
        }
        let cs = ConstraintSystem::new(n, g, kinds).map_err(|e| at("constraints", e))?;
        let lme = &self.lme;
        let given = [lme.kind.is_some(), lme.lambdas.is_some(), lme.l.is_some()].iter().filter(|&&b| b).count();
        if given != 1 {
            return Err(at("lme", "exactly one of `kind`, `lambdas` or `L` is required"));
        }
        let denoms = lme.denoms.as_deref().map(|d| build_list(d, "lme.denoms")).transpose()?;
        let source = if let Some(kind) = lme.kind {
            if denoms.is_some() {
                return Err(at("lme.denoms", "catalog kinds carry their own denominators"));
            }
            LmeSource::Catalog(kind)
        } else if let Some(l) = &lme.lambdas {
            LmeSource::Expressions(LmeSet { lambdas: build_list(l, "lme.lambdas")?, denoms })
        } else {
            let rows = lme
                .l
                .as_ref()
                .expect("checked above")
                .iter()
                .enumerate()
                .map(|(i, r)| build_list(r, &format!("lme.L[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            LmeSource::Matrix(LmeMatrix { rows, denoms })
        };
        VipProblem::new(f, cs, source).map_err(|e| at("lme", e))
    }
}
