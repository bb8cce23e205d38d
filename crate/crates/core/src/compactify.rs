//! Closing the strip at the two points at infinity and checking that the
//! simplified diagram does not change.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gdnf::Gdnf;
use crate::predigraph::{isomorphic, Boundary, Edge, Mapping, Vertex, VertexKind, WindowedPreDigraph};
use crate::profile::{End, Limit, TailDescriptor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompactifyError {
    #[error(
        "{function:?} diverges toward {end:?}; compactifying a diverging end needs a circle-valued map, which is not supported"
    )]
    Diverging { function: Boundary, end: End },
    #[error("c1 and c2 converge to different values toward {end:?} ({a} vs {b})")]
    DifferentLimits { end: End, a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactifiedGraph {
    pub graph: WindowedPreDigraph,
    /// Pole value at −∞.
    pub a1: f64,
    /// Pole value at +∞.
    pub a2: f64,
}

fn end_limit(tails_c1: &[TailDescriptor; 2], tails_c2: &[TailDescriptor; 2], end: End) -> Result<f64, CompactifyError> {
    let value = |d: &TailDescriptor, function| match d.limit {
        Limit::Converge(a) => Ok(a),
        _ => Err(CompactifyError::Diverging { function, end }),
    };
    let a = value(&tails_c1[end as usize], Boundary::C1)?;
    let b = value(&tails_c2[end as usize], Boundary::C2)?;
    if a != b {
        return Err(CompactifyError::DifferentLimits { end, a, b });
    }
    Ok(a)
}

/// Attaches a pole at each end. A pole whose value carries a noncompact
/// contour reaching that end lies in the contour's closure and is absorbed
/// into its vertex; otherwise a `Pole` vertex is appended and joined to the
/// window-boundary vertex at that end nearest in value.
pub fn compactify(
    g: &WindowedPreDigraph,
    tails_c1: &[TailDescriptor; 2],
    tails_c2: &[TailDescriptor; 2],
) -> Result<CompactifiedGraph, CompactifyError> {
    let a1 = end_limit(tails_c1, tails_c2, End::NegInf)?;
    let a2 = end_limit(tails_c1, tails_c2, End::PosInf)?;
    let mut out = g.clone();
    for (end, a) in [(End::NegInf, a1), (End::PosInf, a2)] {
        let reaches = |v: &Vertex| v.value == a && v.ends.contains(&end);
        if let Some(v) = out
            .vertices
            .iter_mut()
            .find(|v| reaches(v) && matches!(v.kind, VertexKind::NoncompactContour | VertexKind::Pole))
        {
            v.pole_closed = true;
            continue;
        }
        let id = out.vertices.iter().map(|v| v.id + 1).max().unwrap_or(0);
        let level = match out.vertices.iter().find(|v| v.value == a) {
            Some(v) => v.level,
            None => out.vertices.iter().map(|v| v.level + 1).max().unwrap_or(0),
        };
        let anchor = out
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::WindowBoundary && v.ends.contains(&end) && v.value != a)
            .min_by(|p, q| (p.value - a).abs().total_cmp(&(q.value - a).abs()))
            .map(|v| (v.id, v.value));
        out.vertices.push(Vertex {
            id,
            value: a,
            kind: VertexKind::Pole,
            level,
            witnesses: Vec::new(),
            ends: vec![end],
            pole_closed: true,
        });
        if let Some((anchor, value)) = anchor {
            let (tail, head) = if value < a { (anchor, id) } else { (id, anchor) };
            out.edges.push(Edge {
                id: out.edges.iter().map(|e| e.id + 1).max().unwrap_or(0),
                tail,
                head: Some(head),
                family: Vec::new(),
                spans: Vec::new(),
            });
        }
    }
    Ok(CompactifiedGraph { graph: out, a1, a2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Invariance {
    Isomorphic(Mapping),
    Different(String),
}

pub fn check_invariance(before: &Gdnf, after: &Gdnf) -> Invariance {
    match isomorphic(before, after) {
        Some(m) => Invariance::Isomorphic(m),
        None => Invariance::Different(format!(
            "{} classes / {} edges before, {} classes / {} edges after",
            before.classes.len(),
            before.edges.len(),
            after.classes.len(),
            after.edges.len()
        )),
    }
}
