//! Shared generators and helpers for the property and acceptance suites.
#![allow(dead_code)]

use proptest::prelude::*;
use reeb_gdnf::expr::{self, Expr};
use reeb_gdnf::interval::Interval;
use reeb_gdnf::pipeline::{analyze_window, Settings, WindowAnalysis};
use reeb_gdnf::predigraph::WindowedPreDigraph;
use reeb_gdnf::profile::{Limit, TailDescriptor};
use reeb_gdnf::spec_file::{all_fixtures, fixture};
use reeb_gdnf::sweep::Strip;

pub const PATTERN_FIXTURES: [&str; 6] = ["P1", "P2", "P3", "P4", "P5", "P6"];

pub fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

pub fn strip(name: &str) -> Strip {
    fixture(name).unwrap().strip().unwrap()
}

pub fn analyze(name: &str, window: Interval, settings: &Settings) -> WindowAnalysis {
    analyze_window(&strip(name), &window, settings).unwrap_or_else(|e| panic!("{name} on {window}: {e}"))
}

/// Sweep outputs for every bundled pair over several windows.
pub fn fixture_graphs() -> Vec<(String, WindowedPreDigraph)> {
    let mut out = Vec::new();
    for (name, _) in all_fixtures() {
        for w in [iv(-3.0, 3.0), iv(-2.5, 2.5), iv(-2.0, 2.0)] {
            let g = analyze(name, w, &Settings::default()).graph;
            out.push((format!("{name} on {w}"), g));
        }
    }
    out
}

/// Random expressions over `x` whose divisions are by `b^2 + 1`.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Var),
        (-30i32..=30).prop_map(|k| Expr::Const(k as f64 / 10.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Add(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Sub(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Mul(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| {
                Expr::Div(b(l), b(Expr::Add(b(Expr::Pow(b(r), 2)), b(Expr::Const(1.0)))))
            }),
            (inner.clone(), 0i32..4).prop_map(move |(e, n)| Expr::Pow(b(e), n)),
            inner.clone().prop_map(move |e| Expr::Neg(b(e))),
            inner.clone().prop_map(move |e| Expr::Sin(b(e))),
            inner.clone().prop_map(move |e| Expr::Cos(b(e))),
            inner.prop_map(move |e| Expr::Exp(b(e))),
        ]
    })
}

pub fn arb_interval() -> impl Strategy<Value = Interval> {
    (-3.0f64..3.0, 0.0f64..1.0).prop_map(|(lo, w)| iv(lo, lo + w))
}

/// Ridders' extrapolated central difference; returns (estimate, error estimate).
pub fn ridders(f: impl Fn(f64) -> Option<f64>, x: f64, h: f64) -> Option<(f64, f64)> {
    const N: usize = 10;
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    let mut a = [[0.0f64; N]; N];
    let diff = |h: f64| Some((f(x + h)? - f(x - h)?) / (2.0 * h));
    let mut hh = h;
    a[0][0] = diff(hh)?;
    let (mut best, mut err) = (a[0][0], f64::INFINITY);
    for i in 1..N {
        hh /= CON;
        a[0][i] = diff(hh)?;
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Some((best, err))
}

/// Initial step scaled to the fastest local phase of `f` at `x`.
pub fn step_for(f: &Expr, x: f64) -> f64 {
    let rate = f
        .phase_args()
        .into_iter()
        .filter_map(|g| g.differentiate().eval(x).ok())
        .fold(0.0f64, |m, r| m.max(r.abs()));
    0.05 / (1.0 + rate)
}

/// Symbolic derivative agrees with the extrapolated difference quotient.
pub fn derivative_agrees(f: &Expr, x: f64) -> Result<(), String> {
    let Ok(d) = f.differentiate().eval(x) else {
        return Ok(());
    };
    let Some((fd, err)) = ridders(|t| f.eval(t).ok(), x, step_for(f, x)) else {
        return Ok(());
    };
    let tol = 1e-6 * d.abs().max(fd.abs()) + 1e-9;
    if (d - fd).abs() <= tol.max(10.0 * err) && err <= 1e-6 * d.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{f} at x = {x}: symbolic {d}, difference {fd} (± {err})"))
    }
}

/// Strictly increasing reparametrisations of the height.
pub fn monotone_transforms() -> Vec<(&'static str, fn(Expr) -> Expr, fn(f64) -> f64)> {
    vec![
        ("2t+1", |e| expr::add(expr::mul(Expr::Const(2.0), e), Expr::Const(1.0)), |t| 2.0 * t + 1.0),
        ("t+t^3", |e| expr::add(e.clone(), expr::powi(e, 3)), |t| t + t * t * t),
        ("exp(t)", |e| Expr::Exp(Box::new(e)), f64::exp),
    ]
}

fn map_tail(d: &TailDescriptor, phi: fn(f64) -> f64) -> TailDescriptor {
    let limit = match d.limit {
        Limit::Converge(a) => Limit::Converge(phi(a)),
        other => other,
    };
    TailDescriptor { limit, ..*d }
}

pub fn transformed(s: &Strip, f: fn(Expr) -> Expr, phi: fn(f64) -> f64) -> Strip {
    Strip::new(
        f(s.c1.clone()),
        f(s.c2.clone()),
        [map_tail(&s.tails_c1[0], phi), map_tail(&s.tails_c1[1], phi)],
        [map_tail(&s.tails_c2[0], phi), map_tail(&s.tails_c2[1], phi)],
    )
}

/// Copy of `g` with every value passed through `phi`.
pub fn revalued(g: &WindowedPreDigraph, phi: fn(f64) -> f64) -> WindowedPreDigraph {
    let mut out = g.clone();
    for v in &mut out.vertices {
        v.value = phi(v.value);
    }
    for a in &mut out.nf {
        a.value = phi(a.value);
    }
    out
}
