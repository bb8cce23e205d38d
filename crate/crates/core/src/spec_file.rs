//! Declarative analysis specs in TOML and the bundled fixture pairs.
//!
//! ```toml
//! name = "P4"
//! m = 2                                   # optional, >= 2
//! window = [-5.0, 5.0]                    # optional
//! stabilization = [[-3.0, 3.0], [-5.0, 5.0]]
//! policy = "ClusterRestricted"            # or "LiteralDef4"
//! outputs = ["graph", "gdnf", "dot"]      # optional, default all
//!
//! [params]                                # integer constants usable in expressions
//! k = 4
//!
//! [tolerances]
//! root = 1e-10
//! coalesce = 1e-8
//!
//! [c1]
//! expr = "-1/(x^2+1) + x^2*sin(exp(x^2))/(x^2+1)^k"
//! neg_inf = { limit = 0.0, tail = "AccumulatingFromBelow" }
//! pos_inf = { limit = 0.0, tail = "AccumulatingFromBelow" }
//! ```
//!
//! `limit = inf` / `limit = -inf` declare divergence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_with, Expr, ParseError};
use crate::gdnf::Policy;
use crate::interval::Interval;
use crate::pipeline::Settings;
use crate::profile::{CriticalTail, End, Limit, ProfileError, TailDescriptor, DEFAULT_ROOT_TOL};
use crate::sweep::{Strip, DEFAULT_COALESCE};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{function}: {source}")]
    Expr {
        function: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("{function}: {source}")]
    Tail {
        function: &'static str,
        #[source]
        source: ProfileError,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub limit: f64,
    pub tail: CriticalTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub expr: String,
    pub neg_inf: TailSpec,
    pub pos_inf: TailSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_root")]
    pub root: f64,
    #[serde(default = "default_coalesce")]
    pub coalesce: f64,
}

fn default_root() -> f64 {
    DEFAULT_ROOT_TOL
}

fn default_coalesce() -> f64 {
    DEFAULT_COALESCE
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root: DEFAULT_ROOT_TOL,
            coalesce: DEFAULT_COALESCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Graph,
    Gdnf,
    Dot,
    Svg,
    Compactified,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub name: String,
    pub c1: FunctionSpec,
    pub c2: FunctionSpec,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_stabilization")]
    pub stabilization: Vec<[f64; 2]>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub params: BTreeMap<String, i64>,
}

fn default_m() -> u32 {
    2
}

fn default_window() -> [f64; 2] {
    [-5.0, 5.0]
}

fn default_stabilization() -> Vec<[f64; 2]> {
    vec![[-3.0, 3.0], [-5.0, 5.0]]
}

fn default_outputs() -> Vec<Output> {
    vec![
        Output::Graph,
        Output::Gdnf,
        Output::Dot,
        Output::Svg,
        Output::Compactified,
        Output::Oracle,
    ]
}

fn limit_of(v: f64) -> Limit {
    if v == f64::INFINITY {
        Limit::DivergePlus
    } else if v == f64::NEG_INFINITY {
        Limit::DivergeMinus
    } else {
        Limit::Converge(v)
    }
}

fn interval(w: [f64; 2]) -> Result<Interval, SpecError> {
    if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
        return Err(SpecError::Invalid(format!("bad window [{}, {}]", w[0], w[1])));
    }
    Interval::new(w[0], w[1]).map_err(|e| SpecError::Invalid(e.to_string()))
}

impl FunctionSpec {
    fn tails(&self, function: &'static str) -> Result<[TailDescriptor; 2], SpecError> {
        let make = |end, t: &TailSpec| {
            if t.limit.is_nan() {
                return Err(SpecError::Invalid(format!("{function}: limit is NaN")));
            }
            TailDescriptor::new(end, limit_of(t.limit), t.tail).map_err(|source| SpecError::Tail { function, source })
        };
        Ok([make(End::NegInf, &self.neg_inf)?, make(End::PosInf, &self.pos_inf)?])
    }
}

impl AnalysisSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let spec: AnalysisSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.m < 2 {
            return Err(SpecError::Invalid(format!("m must be at least 2 (got {})", self.m)));
        }
        interval(self.window)?;
        if self.stabilization.is_empty() {
            return Err(SpecError::Invalid("stabilization needs at least one window".into()));
        }
        for w in &self.stabilization {
            interval(*w)?;
        }
        if !(self.tolerances.root > 0.0 && self.tolerances.coalesce >= 0.0) {
            return Err(SpecError::Invalid("tolerances must be positive".into()));
        }
        self.strip().map(|_| ())
    }

    pub fn strip(&self) -> Result<Strip, SpecError> {
        let parse = |f: &FunctionSpec, function: &'static str| -> Result<Expr, SpecError> {
            parse_with(&f.expr, &self.params).map_err(|source| SpecError::Expr { function, source })
        };
        Ok(Strip::new(
            parse(&self.c1, "c1")?,
            parse(&self.c2, "c2")?,
            self.c1.tails("c1")?,
            self.c2.tails("c2")?,
        ))
    }

    pub fn window(&self) -> Interval {
        interval(self.window).expect("validated")
    }

    pub fn stabilization_windows(&self) -> Vec<Interval> {
        self.stabilization.iter().map(|&w| interval(w).expect("validated")).collect()
    }

    pub fn settings(&self) -> Settings {
        Settings {
            m: self.m,
            root_tol: self.tolerances.root,
            coalesce: self.tolerances.coalesce,
            policy: self.policy,
        }
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    /// The same spec with `c1` and `c2` exchanged.
    pub fn swapped(&self) -> Self {
        AnalysisSpec {
            c1: self.c2.clone(),
            c2: self.c1.clone(),
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

const FIXTURES: [(&str, &str); 8] = [
    ("P1", include_str!("../fixtures/p1.toml")),
    ("P2", include_str!("../fixtures/p2.toml")),
    ("P3", include_str!("../fixtures/p3.toml")),
    ("P4", include_str!("../fixtures/p4.toml")),
    ("P5", include_str!("../fixtures/p5.toml")),
    ("P6", include_str!("../fixtures/p6.toml")),
    ("window-artifact", include_str!("../fixtures/window_artifact.toml")),
    ("poles", include_str!("../fixtures/poles.toml")),
];

/// The six pattern pairs `P1`..`P6`, in order, as (name, spec file text).
pub fn bundled_fixtures() -> Vec<(&'static str, &'static str)> {
    FIXTURES[..6].to_vec()
}

/// Every bundled spec, including the extra test pairs.
pub fn all_fixtures() -> Vec<(&'static str, &'static str)> {
    FIXTURES.to_vec()
}

pub fn fixture(name: &str) -> Option<AnalysisSpec> {
    FIXTURES
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, text)| AnalysisSpec::from_toml(text).expect("bundled fixture parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        for (name, text) in all_fixtures() {
            let spec = AnalysisSpec::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(spec.name, name);
            assert_eq!(spec.window, [-5.0, 5.0]);
        }
    }

    #[test]
    fn declared_tails() {
        let p1 = fixture("P1").unwrap().strip().unwrap();
        for d in p1.tails_c1.iter().chain(&p1.tails_c2) {
            assert_eq!(d.limit, Limit::Converge(0.0));
            assert_eq!(d.critical_tail, CriticalTail::Finite);
        }
        let p6 = fixture("P6").unwrap().strip().unwrap();
        assert_eq!(p6.tails_c2[0].limit, Limit::Converge(0.0));
        assert_eq!(p6.tails_c2[1].limit, Limit::Converge(-0.5));
        assert!(p6.tails_c2.iter().all(|d| d.critical_tail == CriticalTail::AccumulatingFromAbove));
    }

    #[test]
    fn rejects_bad_specs() {
        let base = fixture("P1").unwrap();
        let mut low_m = base.clone();
        low_m.m = 1;
        assert!(AnalysisSpec::from_toml(&low_m.to_toml()).is_err());
        let mut bad_expr = base.clone();
        bad_expr.c2.expr = "1/(x^2+".into();
        assert!(matches!(
            AnalysisSpec::from_toml(&bad_expr.to_toml()),
            Err(SpecError::Expr { function: "c2", .. })
        ));
        let diverging = base.to_toml().replacen("limit = 0.0", "limit = inf", 1);
        let spec = AnalysisSpec::from_toml(&diverging).unwrap();
        assert_eq!(spec.strip().unwrap().tails_c1[0].limit, Limit::DivergePlus);
        assert!(AnalysisSpec::from_toml("name = 1").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let p4 = fixture("P4").unwrap();
        assert_eq!(AnalysisSpec::from_toml(&p4.to_toml()).unwrap(), p4);
    }
}
