//! Subcommand runs: each turns a spec into a set of artifacts and an exit status.

use serde::Serialize;

use crate::compactify::{check_invariance, compactify, CompactifiedGraph, Invariance};
use crate::emit::{gdnf_dot, graph_dot, strip_svg, to_json, SCHEMA};
use crate::gdnf::{
    build_gdnf, classify_pattern, components_minus_nf, stabilized_gdnf, Gdnf, GermTable, PatternLabel, Policy,
    Stability, StabilityCertificate,
};
use crate::interval::Interval;
use crate::oracle::{compare, raster_slice_counts, regular_levels, Agreement, DEFAULT_X_SAMPLES};
use crate::pipeline::{analyze_window, PipelineError, WindowAnalysis};
use crate::predigraph::{complex_class, Boundary, ComplexClass, WindowedPreDigraph};
use crate::profile::{probe_tail, CriticalPoint, End, SabStatus, Separation, TailProbe};
use crate::spec_file::{AnalysisSpec, Output};
use crate::sweep::{event_schedule, graph_events, Event, Strip};

pub const ORACLE_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Classify,
    Compactify,
    Check,
    Render,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Classify => "classify",
            Command::Compactify => "compactify",
            Command::Check => "check",
            Command::Render => "render",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Separation = 2,
    Suspect = 3,
    Unstable = 4,
    Internal = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: ExitStatus,
    pub message: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEntry {
    pub function: Boundary,
    pub end: End,
    pub result: TailProbe,
}

#[derive(Debug, Clone, Serialize)]
struct ErrorDoc<'a> {
    schema: u32,
    name: &'a str,
    command: &'a str,
    error: String,
    witness_x: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoints {
    pub c1: Vec<CriticalPoint>,
    pub c2: Vec<CriticalPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeDoc {
    pub schema: u32,
    pub name: String,
    pub m: u32,
    pub requested_window: Interval,
    pub effective_window: Interval,
    pub separation: Separation,
    pub sab: SabStatus,
    pub tail_probes: Vec<ProbeEntry>,
    pub critical_points: CriticalPoints,
    pub predicted_events: Vec<Event>,
    pub events: Vec<Event>,
    pub complex_class: ComplexClass,
    pub graph: WindowedPreDigraph,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyComparison {
    pub cluster_restricted_classes: usize,
    pub literal_def4_classes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyDoc {
    pub schema: u32,
    pub name: String,
    pub pattern: PatternLabel,
    pub sab: SabStatus,
    pub policy: Policy,
    pub components: usize,
    pub germs: GermTable,
    pub gdnf: Gdnf,
    pub complex_class: ComplexClass,
    pub policy_comparison: PolicyComparison,
    pub stability: StabilityCertificate,
    pub tail_probes: Vec<ProbeEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactifyDoc {
    pub schema: u32,
    pub name: String,
    pub pattern: PatternLabel,
    /// Whether the pattern is one for which invariance is guaranteed.
    pub invariance_guaranteed: bool,
    pub invariance: Invariance,
    pub gdnf_before: Gdnf,
    pub gdnf_after: Gdnf,
    pub compactified: CompactifiedGraph,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckDoc {
    pub schema: u32,
    pub name: String,
    pub window: Interval,
    pub x_samples: usize,
    pub agrees: bool,
    pub agreement: Agreement,
}

fn probes(strip: &Strip) -> Vec<ProbeEntry> {
    let mut out = Vec::new();
    for (f, tails, function) in [
        (&strip.c1, &strip.tails_c1, Boundary::C1),
        (&strip.c2, &strip.tails_c2, Boundary::C2),
    ] {
        for d in tails {
            out.push(ProbeEntry {
                function,
                end: d.end,
                result: probe_tail(f, d),
            });
        }
    }
    out
}

fn failure(spec: &AnalysisSpec, command: Command, status: ExitStatus, error: String, witness_x: Option<f64>) -> Outcome {
    let doc = ErrorDoc {
        schema: SCHEMA,
        name: &spec.name,
        command: command.name(),
        error: error.clone(),
        witness_x,
    };
    Outcome {
        status,
        message: error,
        artifacts: vec![Artifact {
            path: "error.json".into(),
            contents: to_json(&doc),
        }],
    }
}

fn pipeline_failure(spec: &AnalysisSpec, command: Command, e: PipelineError) -> Outcome {
    match e {
        PipelineError::SeparationViolation { x } => {
            failure(spec, command, ExitStatus::Separation, e.to_string(), Some(x))
        }
        PipelineError::NoWindows => failure(spec, command, ExitStatus::Usage, e.to_string(), None),
        other => failure(spec, command, ExitStatus::Internal, other.to_string(), None),
    }
}

/// Runs one subcommand. Failures are reported through the status and an
/// `error.json` artifact rather than a Rust error.
pub fn run(spec: &AnalysisSpec, command: Command, strict: bool) -> Outcome {
    let strip = match spec.strip() {
        Ok(s) => s,
        Err(e) => return failure(spec, command, ExitStatus::Usage, e.to_string(), None),
    };
    let settings = spec.settings();
    let main = match analyze_window(&strip, &spec.window(), &settings) {
        Ok(a) => a,
        Err(e) => return pipeline_failure(spec, command, e),
    };
    let tail_probes = probes(&strip);
    let suspect: Vec<String> = tail_probes
        .iter()
        .filter_map(|p| match &p.result {
            TailProbe::Suspect(why) => Some(format!("{:?} toward {:?}: {why}", p.function, p.end)),
            TailProbe::Consistent => None,
        })
        .collect();

    let result = match command {
        Command::Analyze => analyze(spec, &main, tail_probes),
        Command::Classify => classify(spec, &strip, &main, tail_probes),
        Command::Compactify => compactify_run(spec, &strip, &main),
        Command::Check => check(spec, &strip, &main),
        Command::Render => Ok(Outcome {
            status: ExitStatus::Success,
            message: format!("rendered {}", spec.name),
            artifacts: vec![Artifact {
                path: "strip.svg".into(),
                contents: strip_svg(&strip, &main.graph, &spec.name),
            }],
        }),
    };
    let mut outcome = match result {
        Ok(o) => o,
        Err(e) => return pipeline_failure(spec, command, e),
    };
    if !suspect.is_empty() && outcome.status == ExitStatus::Success {
        let note = format!("tail descriptors look suspect: {}", suspect.join("; "));
        if strict {
            outcome.status = ExitStatus::Suspect;
            outcome.message = note;
        } else {
            outcome.message = format!("{} (warning: {note})", outcome.message);
        }
    }
    outcome
}

fn analyze(spec: &AnalysisSpec, main: &WindowAnalysis, tail_probes: Vec<ProbeEntry>) -> Result<Outcome, PipelineError> {
    let predicted_events = event_schedule(&main.p1, &main.p2, spec.tolerances.coalesce)?;
    let doc = AnalyzeDoc {
        schema: SCHEMA,
        name: spec.name.clone(),
        m: spec.m,
        requested_window: main.requested,
        effective_window: main.effective,
        separation: main.separation,
        sab: main.sab,
        tail_probes,
        critical_points: CriticalPoints {
            c1: main.p1.critical_points.clone(),
            c2: main.p2.critical_points.clone(),
        },
        predicted_events,
        events: graph_events(&main.graph),
        complex_class: complex_class(&main.graph),
        graph: main.graph.clone(),
    };
    let mut artifacts = vec![Artifact {
        path: "graph.json".into(),
        contents: to_json(&doc),
    }];
    if spec.wants(Output::Dot) {
        artifacts.push(Artifact {
            path: "graph.dot".into(),
            contents: graph_dot(&main.graph, &spec.name),
        });
    }
    Ok(Outcome {
        status: ExitStatus::Success,
        message: format!(
            "{}: {} vertices, {} edges, {} NF points",
            spec.name,
            main.graph.vertices.len(),
            main.graph.edges.len(),
            main.graph.nf.len()
        ),
        artifacts,
    })
}

fn classify(
    spec: &AnalysisSpec,
    strip: &Strip,
    main: &WindowAnalysis,
    tail_probes: Vec<ProbeEntry>,
) -> Result<Outcome, PipelineError> {
    let gdnf = build_gdnf(&main.graph, spec.policy)?;
    let restricted = build_gdnf(&main.graph, Policy::ClusterRestricted)?;
    let literal = build_gdnf(&main.graph, Policy::LiteralDef4)?;
    let (components, germs) = components_minus_nf(&main.graph);
    let (_, stability) = stabilized_gdnf(strip, &spec.stabilization_windows(), &spec.settings())?;
    let pattern = classify_pattern(&gdnf);
    let unstable = matches!(stability.verdict, Stability::Unstable { .. });
    let doc = ClassifyDoc {
        schema: SCHEMA,
        name: spec.name.clone(),
        pattern,
        sab: main.sab,
        policy: spec.policy,
        components: components.count,
        germs,
        complex_class: complex_class(&gdnf),
        gdnf: gdnf.clone(),
        policy_comparison: PolicyComparison {
            cluster_restricted_classes: restricted.classes.len(),
            literal_def4_classes: literal.classes.len(),
        },
        stability,
        tail_probes,
    };
    let (status, message) = if unstable {
        (
            ExitStatus::Unstable,
            format!("{}: GDNF changes across stabilization windows", spec.name),
        )
    } else {
        (ExitStatus::Success, format!("{}: {pattern}", spec.name))
    };
    Ok(Outcome {
        status,
        message,
        artifacts: vec![
            Artifact {
                path: "gdnf.json".into(),
                contents: to_json(&doc),
            },
            Artifact {
                path: "gdnf.dot".into(),
                contents: gdnf_dot(&gdnf, &spec.name),
            },
        ],
    })
}

fn compactify_run(spec: &AnalysisSpec, strip: &Strip, main: &WindowAnalysis) -> Result<Outcome, PipelineError> {
    let compactified = match compactify(&main.graph, &strip.tails_c1, &strip.tails_c2) {
        Ok(c) => c,
        Err(e) => {
            return Ok(failure(spec, Command::Compactify, ExitStatus::Usage, e.to_string(), None));
        }
    };
    let before = build_gdnf(&main.graph, spec.policy)?;
    let after = build_gdnf(&compactified.graph, spec.policy)?;
    let pattern = classify_pattern(&before);
    let invariance = check_invariance(&before, &after);
    let guaranteed = matches!(pattern, PatternLabel::P1_2_4 | PatternLabel::P1_2_5 | PatternLabel::P1_2_6);
    let verdict = match &invariance {
        Invariance::Isomorphic(_) => "Isomorphic",
        Invariance::Different(_) => "Different",
    };
    let status = if guaranteed && verdict != "Isomorphic" {
        ExitStatus::Internal
    } else {
        ExitStatus::Success
    };
    let doc = CompactifyDoc {
        schema: SCHEMA,
        name: spec.name.clone(),
        pattern,
        invariance_guaranteed: guaranteed,
        invariance,
        gdnf_before: before,
        gdnf_after: after,
        compactified,
    };
    Ok(Outcome {
        status,
        message: format!("{}: {verdict}", spec.name),
        artifacts: vec![Artifact {
            path: "compactified.json".into(),
            contents: to_json(&doc),
        }],
    })
}

fn check(spec: &AnalysisSpec, strip: &Strip, main: &WindowAnalysis) -> Result<Outcome, PipelineError> {
    let levels = regular_levels(&main.graph, ORACLE_LEVELS, 1e-6);
    let report = raster_slice_counts(&strip.c1, &strip.c2, &main.effective, &levels, DEFAULT_X_SAMPLES);
    let agreement = compare(&main.graph, &report);
    let agrees = agreement.agrees();
    let doc = CheckDoc {
        schema: SCHEMA,
        name: spec.name.clone(),
        window: main.effective,
        x_samples: report.x_samples,
        agrees,
        agreement,
    };
    Ok(Outcome {
        status: if agrees {
            ExitStatus::Success
        } else {
            ExitStatus::Internal
        },
        message: format!(
            "{}: oracle {} at {} levels",
            spec.name,
            if agrees { "agrees" } else { "DISAGREES" },
            levels.len()
        ),
        artifacts: vec![Artifact {
            path: "oracle.json".into(),
            contents: to_json(&doc),
        }],
    })
}
