//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::*;
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use reeb_gdnf::compactify::{check_invariance, compactify, Invariance};
use reeb_gdnf::expr::Expr;
use reeb_gdnf::gdnf::{build_gdnf, stabilized_gdnf, Policy, Stability};
use reeb_gdnf::interval::Interval;
use reeb_gdnf::oracle::{compare, raster_slice_counts, regular_levels, DEFAULT_X_SAMPLES};
use reeb_gdnf::pipeline::{effective_window, Settings};
use reeb_gdnf::predigraph::{isomorphic, Boundary, WindowedPreDigraph};
use reeb_gdnf::profile::{trust_window, verify_separation, Separation};
use reeb_gdnf::report::{run, Command, ExitStatus};
use reeb_gdnf::spec_file::fixture;

const EXPECTED: [&str; 6] = ["P1_2_1", "P1_2_2", "P1_2_3", "P1_2_4", "P1_2_5", "P1_2_6"];

type Verdict = Result<String, String>;

fn json(outcome: &reeb_gdnf::report::Outcome, path: &str) -> serde_json::Value {
    let a = outcome
        .artifacts
        .iter()
        .find(|a| a.path == path)
        .unwrap_or_else(|| panic!("missing {path}: {}", outcome.message));
    serde_json::from_str(&a.contents).expect("artifact is JSON")
}

fn patterns() -> Verdict {
    let mut slowest = Duration::ZERO;
    for (name, want) in PATTERN_FIXTURES.iter().zip(EXPECTED) {
        let spec = fixture(name).unwrap();
        let start = Instant::now();
        let out = run(&spec, Command::Classify, false);
        let took = start.elapsed();
        slowest = slowest.max(took);
        if out.status != ExitStatus::Success {
            return Err(format!("{name}: exit {} ({})", out.status.code(), out.message));
        }
        let got = json(&out, "gdnf.json")["pattern"].as_str().unwrap_or_default().to_string();
        if got != want {
            return Err(format!("{name}: got {got}, want {want}"));
        }
        if took >= Duration::from_secs(5) {
            return Err(format!("{name}: took {took:?}"));
        }
    }
    Ok(format!("P1..P6 -> {}; slowest run {slowest:.2?}", EXPECTED.join(", ")))
}

/// Zeros of `f'` by sign changes on a grid 16 times finer than the
/// profiler's, refined by plain bisection.
fn dense_critical_points(f: &Expr, w: &Interval) -> Vec<f64> {
    if f.is_constant() {
        return Vec::new();
    }
    let df = f.differentiate();
    let n = (w.width() * 65536.0).ceil() as usize;
    let x = |i: usize| w.lo() + w.width() * i as f64 / n as f64;
    let d = |x: f64| df.eval(x).unwrap_or(f64::NAN);
    let mut roots = Vec::new();
    let mut prev = d(x(0));
    for i in 1..=n {
        let cur = d(x(i));
        if cur == 0.0 && i < n {
            roots.push(x(i));
        } else if prev != 0.0 && prev * cur < 0.0 {
            let (mut a, mut b) = (x(i - 1), x(i));
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if (d(m) < 0.0) == (prev < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

fn event_correspondence() -> Verdict {
    let mut worst_value: f64 = 0.0;
    let mut total = 0;
    for name in PATTERN_FIXTURES {
        let s = strip(name);
        let a = analyze(name, fixture(name).unwrap().window(), &Settings::default());
        let g = &a.graph;
        for (f, which) in [(&s.c1, Boundary::C1), (&s.c2, Boundary::C2)] {
            let roots = dense_critical_points(f, &a.effective);
            let witnesses: Vec<(f64, f64)> = g
                .vertices
                .iter()
                .flat_map(|v| v.witnesses.iter().filter(|w| w.function == which).map(move |w| (w.x, v.value)))
                .collect();
            if roots.len() != witnesses.len() {
                return Err(format!(
                    "{name} {which:?}: {} independent critical points, {} sweep events",
                    roots.len(),
                    witnesses.len()
                ));
            }
            for (x, value) in witnesses {
                let r = roots
                    .iter()
                    .copied()
                    .min_by(|p, q| (p - x).abs().total_cmp(&(q - x).abs()))
                    .unwrap();
                let dv = (f.eval(r).unwrap() - value).abs();
                worst_value = worst_value.max(dv);
                if (r - x).abs() > 1e-6 || dv > 1e-9 {
                    return Err(format!("{name} {which:?}: event at x={x} value {value} vs root {r}"));
                }
            }
            total += roots.len();
        }
        let unexplained = g.vertices.iter().filter(|v| {
            v.kind == reeb_gdnf::predigraph::VertexKind::Critical && v.witnesses.is_empty()
        });
        if unexplained.count() > 0 {
            return Err(format!("{name}: critical vertex without a witness"));
        }
    }
    Ok(format!("{total} critical points matched one-to-one; max value gap {worst_value:.1e}"))
}

fn oracle_agreement() -> Verdict {
    let mut levels = 0;
    for name in PATTERN_FIXTURES {
        let s = strip(name);
        let a = analyze(name, fixture(name).unwrap().window(), &Settings::default());
        let ts = regular_levels(&a.graph, 64, 1e-6);
        if ts.len() != 64 {
            return Err(format!("{name}: only {} regular levels", ts.len()));
        }
        let r = raster_slice_counts(&s.c1, &s.c2, &a.effective, &ts, DEFAULT_X_SAMPLES);
        let ag = compare(&a.graph, &r);
        if !ag.agrees() {
            return Err(format!(
                "{name}: counts {:?}, incidence {:?}",
                ag.count_mismatches, ag.incidence_mismatches
            ));
        }
        levels += ts.len();
    }
    Ok(format!("{levels} levels, 100% agreement at {DEFAULT_X_SAMPLES} x-samples"))
}

fn compactification_invariance() -> Verdict {
    for name in ["P4", "P5", "P6"] {
        let s = strip(name);
        let g = analyze(name, fixture(name).unwrap().window(), &Settings::default()).graph;
        let c = compactify(&g, &s.tails_c1, &s.tails_c2).map_err(|e| format!("{name}: {e}"))?;
        let before = build_gdnf(&g, Policy::ClusterRestricted).unwrap();
        let after = build_gdnf(&c.graph, Policy::ClusterRestricted).unwrap();
        if let Invariance::Different(why) = check_invariance(&before, &after) {
            return Err(format!("{name}: {why}"));
        }
        if isomorphic(&g, &c.graph).is_none() {
            return Err(format!("{name}: compactified pre-digraph changed shape"));
        }
    }
    Ok("P4, P5, P6 isomorphic before and after".into())
}

fn window_stabilization() -> Verdict {
    let mut vacuous = Vec::new();
    for name in PATTERN_FIXTURES {
        let spec = fixture(name).unwrap();
        let (_, cert) = stabilized_gdnf(&spec.strip().unwrap(), &spec.stabilization_windows(), &spec.settings())
            .map_err(|e| format!("{name}: {e}"))?;
        if cert.verdict != Stability::Stable {
            return Err(format!("{name}: {:?}", cert.verdict));
        }
        if !cert.effective_windows_distinct {
            vacuous.push(name);
        }
    }
    let adversarial = fixture("window-artifact").unwrap();
    let (_, cert) = stabilized_gdnf(
        &adversarial.strip().unwrap(),
        &adversarial.stabilization_windows(),
        &adversarial.settings(),
    )
    .map_err(|e| e.to_string())?;
    if cert.verdict == Stability::Stable {
        return Err("window-artifact pair was not flagged".into());
    }
    Ok(format!(
        "all six stable, artifact pair flagged; effective windows coincide (trust clipping) for {}",
        vacuous.join(", ")
    ))
}

fn separation_gate() -> Verdict {
    for name in PATTERN_FIXTURES {
        let spec = fixture(name).unwrap();
        let s = spec.strip().unwrap();
        let w = effective_window(&s, &spec.window());
        if let Separation::ViolationAt(x) = verify_separation(&s.c1, &s.c2, &w) {
            return Err(format!("{name}: violation at {x}"));
        }
        let out = run(&spec.swapped(), Command::Classify, false);
        if out.status.code() != 2 {
            return Err(format!("{name} swapped: exit {}", out.status.code()));
        }
        let witness = json(&out, "error.json")["witness_x"].as_f64();
        let Some(x) = witness else {
            return Err(format!("{name} swapped: no witness"));
        };
        if s.c2.eval(x).unwrap() <= s.c1.eval(x).unwrap() {
            return Err(format!("{name} swapped: witness {x} is not a violation"));
        }
    }
    Ok("six pairs verified; six swapped mutants exit 2 with a witness".into())
}

fn derivative_check() -> Verdict {
    let mut exprs: Vec<Expr> = Vec::new();
    for name in PATTERN_FIXTURES {
        let s = strip(name);
        for f in [s.c1, s.c2] {
            if !exprs.contains(&f) {
                exprs.push(f);
            }
        }
    }
    let mut runner = TestRunner::new(Config::default());
    let mut clipped = Vec::new();
    for f in &exprs {
        let w = trust_window(f, &iv(-3.0, 3.0));
        if w != iv(-3.0, 3.0) {
            clipped.push(format!("{w}"));
        }
        for _ in 0..100 {
            let x = (w.lo()..=w.hi()).new_tree(&mut runner).unwrap();
            derivative_agrees(f, proptest::strategy::ValueTree::current(&x))?;
        }
    }
    Ok(format!(
        "{} expressions x 100 points; oscillatory ones sampled inside their trust windows ({})",
        exprs.len(),
        clipped.join(", ")
    ))
}

fn property_suites() -> Verdict {
    let graphs = fixture_graphs();
    for (name, g) in &graphs {
        if g.edges.iter().any(|e| e.head == Some(e.tail)) {
            return Err(format!("{name}: loop edge"));
        }
        if isomorphic(g, g).is_none() {
            return Err(format!("{name}: not reflexive"));
        }
        for (other, h) in &graphs {
            if isomorphic(g, h).is_some() != isomorphic(h, g).is_some() {
                return Err(format!("{name} / {other}: not symmetric"));
            }
        }
    }
    let w = iv(-3.0, 3.0);
    for name in PATTERN_FIXTURES {
        let s = strip(name);
        let base = analyze(name, w, &Settings::default()).graph;
        let d = build_gdnf(&base, Policy::ClusterRestricted).unwrap();
        for (label, f, phi) in monotone_transforms() {
            let t = reeb_gdnf::pipeline::analyze_window(&transformed(&s, f, phi), &w, &Settings::default())
                .map_err(|e| format!("{name} under {label}: {e}"))?
                .graph;
            let dt = build_gdnf(&t, Policy::ClusterRestricted).unwrap();
            if isomorphic(&base, &t).is_none() || isomorphic(&d, &dt).is_none() {
                return Err(format!("{name}: not invariant under {label}"));
            }
        }
        let three = analyze(name, w, &Settings { m: 3, ..Settings::default() }).graph;
        if (WindowedPreDigraph { m: 3, ..base }) != three {
            return Err(format!("{name}: m = 3 output differs"));
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    runner
        .run(&(arb_expr(), arb_interval(), 0.0f64..=1.0), |(e, i, k)| {
            let Ok(r) = e.eval_interval(&i) else {
                return Ok(());
            };
            for x in [i.lo(), i.hi(), (i.lo() + k * i.width()).min(i.hi())] {
                if let Ok(v) = e.eval(x) {
                    if !r.contains(v) {
                        return Err(TestCaseError::fail(format!("{e} on {i}: {v} at {x} outside {r}")));
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{} graphs reflexive/symmetric, loop-free; 3 monotone transforms x 6 pairs; m-independent; 1000 enclosure cases",
        graphs.len()
    ))
}

fn policy_discrepancy() -> Verdict {
    let out = run(&fixture("P4").unwrap(), Command::Classify, false);
    let doc = json(&out, "gdnf.json");
    let cmp = &doc["policy_comparison"];
    let (restricted, literal) = (
        cmp["cluster_restricted_classes"].as_u64(),
        cmp["literal_def4_classes"].as_u64(),
    );
    if (restricted, literal) != (Some(3), Some(2)) {
        return Err(format!("recorded {restricted:?} / {literal:?}"));
    }
    Ok("P4: cluster-restricted 3 classes, literal 2 classes, both in gdnf.json".into())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("pattern reproduction", patterns),
        ("event correspondence", event_correspondence),
        ("oracle equivalence", oracle_agreement),
        ("compactification invariance", compactification_invariance),
        ("window stabilization", window_stabilization),
        ("separation gate", separation_gate),
        ("derivative check", derivative_check),
        ("property suites", property_suites),
        ("policy discrepancy record", policy_discrepancy),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let took = start.elapsed();
        match verdict {
            Ok(detail) => println!("PASS {} {name}: {detail} [{took:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
