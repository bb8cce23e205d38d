//! Windowed Reeb pre-digraph: valued vertices, value-increasing edges and
//! NF annotations, plus order-preserving isomorphism and the complex-class
//! taxonomy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::profile::End;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Critical,
    NoncompactContour,
    WindowBoundary,
    Pole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Boundary {
    C1,
    C2,
}

/// A critical point of one boundary function lying on a vertex's contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub function: Boundary,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub value: f64,
    pub kind: VertexKind,
    /// Index of the sweep level; vertices sharing a level were coalesced.
    pub level: usize,
    pub witnesses: Vec<Witness>,
    /// Ends toward which the contour is unbounded.
    pub ends: Vec<End>,
    pub pole_closed: bool,
}

/// An edge germ belonging to an accumulating branch family of an NF vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyTag {
    pub nf_vertex: usize,
    pub side: Side,
}

/// Slice extent of an edge over a band of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpan {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub touches_lo: bool,
    pub touches_hi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub tail: usize,
    /// `None` marks an open stub.
    pub head: Option<usize>,
    pub family: Vec<FamilyTag>,
    pub spans: Vec<EdgeSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfAnnotation {
    pub vertex: usize,
    pub value: f64,
    pub ends: Vec<End>,
    pub clustering_sides: Vec<Side>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedPreDigraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub nf: Vec<NfAnnotation>,
    pub m: u32,
    pub window: Interval,
}

impl WindowedPreDigraph {
    pub fn vertex(&self, id: usize) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn is_nf(&self, id: usize) -> bool {
        self.nf.iter().any(|a| a.vertex == id)
    }

    /// Edges whose open value band contains `t`, with their slice extents.
    pub fn edges_crossing(&self, t: f64) -> Vec<(usize, EdgeSpan)> {
        self.edges
            .iter()
            .filter_map(|e| {
                e.spans
                    .iter()
                    .find(|s| s.t_lo < t && t < s.t_hi)
                    .map(|s| (e.id, *s))
            })
            .collect()
    }
}

pub fn validate(g: &WindowedPreDigraph) -> Vec<String> {
    let mut out = Vec::new();
    let by_id: BTreeMap<usize, &Vertex> = g.vertices.iter().map(|v| (v.id, v)).collect();
    if by_id.len() != g.vertices.len() {
        out.push("duplicate vertex id".to_string());
    }
    for e in &g.edges {
        let Some(tail) = by_id.get(&e.tail) else {
            out.push(format!("edge {} references missing tail {}", e.id, e.tail));
            continue;
        };
        if let Some(h) = e.head {
            match by_id.get(&h) {
                None => out.push(format!("edge {} references missing head {h}", e.id)),
                Some(head) if head.value <= tail.value => {
                    out.push(format!("non-injective edge {} ({} -> {})", e.id, tail.value, head.value))
                }
                _ => {}
            }
        }
        for tag in &e.family {
            if !g.nf.iter().any(|a| a.vertex == tag.nf_vertex) {
                out.push(format!("edge {} tagged with non-NF vertex {}", e.id, tag.nf_vertex));
            }
        }
    }
    let mut sorted: Vec<&Vertex> = g.vertices.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    for w in sorted.windows(2) {
        if (w[1].value - w[0].value).abs() < 1e-12 && w[0].level != w[1].level {
            out.push(format!("vertices {} and {} are not separated", w[0].id, w[1].id));
        }
    }
    for a in &g.nf {
        match by_id.get(&a.vertex) {
            None => out.push(format!("NF annotation on missing vertex {}", a.vertex)),
            Some(v) if v.kind != VertexKind::NoncompactContour => {
                out.push(format!("NF annotation on {:?} vertex {}", v.kind, v.id))
            }
            _ => {}
        }
        if a.clustering_sides.is_empty() {
            out.push(format!("NF annotation on vertex {} has no clustering side", a.vertex));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NfError {
    #[error("vertex {vertex}: NF flag {flagged:?} but observed accumulation {observed:?}")]
    Inconsistent {
        vertex: usize,
        flagged: Vec<Side>,
        observed: Vec<Side>,
    },
}

/// Accumulation sides of Critical vertex values at a noncompact contour,
/// judged on finite data: within `delta` of the contour value on that side,
/// counting only witnesses in the half of the window facing the contour's
/// ends, at least three vertices and more than within the half-radius window.
pub fn observed_accumulation(g: &WindowedPreDigraph, v: &Vertex) -> Vec<Side> {
    let lo = g.vertices.iter().map(|u| u.value).fold(f64::INFINITY, f64::min);
    let hi = g.vertices.iter().map(|u| u.value).fold(f64::NEG_INFINITY, f64::max);
    let delta = 0.5 * (hi - lo);
    let c = g.window.mid();
    let inner = g.window.scaled(0.5);
    let facing = |x: f64| {
        v.ends.iter().any(|e| match e {
            End::NegInf => x < c,
            End::PosInf => x > c,
        })
    };
    let count = |side: Side, region: &Interval| {
        g.vertices
            .iter()
            .filter(|u| u.kind == VertexKind::Critical)
            .filter(|u| match side {
                Side::Above => u.value > v.value && u.value < v.value + delta,
                Side::Below => u.value < v.value && u.value > v.value - delta,
            })
            .filter(|u| u.witnesses.iter().any(|w| facing(w.x) && region.contains(w.x)))
            .count()
    };
    [Side::Below, Side::Above]
        .into_iter()
        .filter(|&s| {
            let full = count(s, &g.window);
            full >= 3 && full > count(s, &inner)
        })
        .collect()
}

/// NF annotations, re-checked against the observed accumulation trend.
pub fn nf_points(g: &WindowedPreDigraph) -> Result<Vec<NfAnnotation>, NfError> {
    for v in g.vertices.iter().filter(|v| v.kind == VertexKind::NoncompactContour) {
        let flagged: Vec<Side> = g
            .nf
            .iter()
            .find(|a| a.vertex == v.id)
            .map(|a| a.clustering_sides.clone())
            .unwrap_or_default();
        let observed = observed_accumulation(g, v);
        if flagged != observed {
            return Err(NfError::Inconsistent {
                vertex: v.id,
                flagged,
                observed,
            });
        }
    }
    Ok(g.nf.clone())
}

/// Combinatorial skeleton shared by pre-digraphs and GDNFs.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub vertex_values: Vec<Option<f64>>,
    pub nf: Vec<bool>,
    pub boundary: Vec<bool>,
    /// (tail, head, value carried by the edge); `None` ends dangle.
    pub edges: Vec<(Option<usize>, Option<usize>, Option<f64>)>,
}

pub trait AsShape {
    fn shape(&self) -> Shape;
}

impl AsShape for Shape {
    fn shape(&self) -> Shape {
        self.clone()
    }
}

impl AsShape for WindowedPreDigraph {
    fn shape(&self) -> Shape {
        let index: BTreeMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        Shape {
            vertex_values: self.vertices.iter().map(|v| Some(v.value)).collect(),
            nf: self.vertices.iter().map(|v| self.is_nf(v.id)).collect(),
            boundary: self
                .vertices
                .iter()
                .map(|v| v.kind == VertexKind::WindowBoundary)
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| (index.get(&e.tail).copied(), e.head.and_then(|h| index.get(&h).copied()), None))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

fn ranks(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn rank_of(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|&y| y < x)
}

type EdgeKey = (Option<usize>, Option<usize>, Option<usize>);

/// Finds a bijection preserving incidence, orientation, NF flags and the
/// strict order of all recorded values (vertex and edge values ranked
/// together). Values are only compared when both graphs record them.
pub fn isomorphic(a: &impl AsShape, b: &impl AsShape) -> Option<Mapping> {
    let (a, b) = (a.shape(), b.shape());
    let n = a.vertex_values.len();
    if n != b.vertex_values.len() || a.edges.len() != b.edges.len() {
        return None;
    }
    let all_a = ranks(a.vertex_values.iter().flatten().copied().chain(a.edges.iter().filter_map(|e| e.2)));
    let all_b = ranks(b.vertex_values.iter().flatten().copied().chain(b.edges.iter().filter_map(|e| e.2)));
    let use_values = a.vertex_values.iter().all(Option::is_some) == b.vertex_values.iter().all(Option::is_some)
        && !all_a.is_empty()
        && !all_b.is_empty();
    if use_values && all_a.len() != all_b.len() {
        return None;
    }
    let vrank = |s: &Shape, all: &[f64], i: usize| {
        if use_values {
            s.vertex_values[i].map(|x| rank_of(all, x))
        } else {
            None
        }
    };
    let erank = |all: &[f64], x: Option<f64>| if use_values { x.map(|x| rank_of(all, x)) } else { None };

    // Degree signature: (out, in, dangling out, dangling in, loops).
    let signature = |s: &Shape, i: usize| {
        let mut sig = (0usize, 0usize, 0usize, 0usize, 0usize);
        for e in &s.edges {
            match (e.0, e.1) {
                (Some(t), Some(h)) if t == i && h == i => sig.4 += 1,
                (Some(t), h) if t == i => {
                    if h.is_some() {
                        sig.0 += 1
                    } else {
                        sig.2 += 1
                    }
                }
                (t, Some(h)) if h == i => {
                    if t.is_some() {
                        sig.1 += 1
                    } else {
                        sig.3 += 1
                    }
                }
                _ => {}
            }
        }
        sig
    };
    let key_a: Vec<_> = (0..n).map(|i| (vrank(&a, &all_a, i), a.nf[i], signature(&a, i))).collect();
    let key_b: Vec<_> = (0..n).map(|i| (vrank(&b, &all_b, i), b.nf[i], signature(&b, i))).collect();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| key_a[i] == key_b[j]).collect())
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return None;
    }

    let edge_keys = |s: &Shape, all: &[f64], phi: &dyn Fn(usize) -> usize| -> Vec<EdgeKey> {
        s.edges
            .iter()
            .map(|e| (e.0.map(phi), e.1.map(phi), erank(all, e.2)))
            .collect()
    };
    let target: Vec<EdgeKey> = edge_keys(&b, &all_b, &|i| i);
    let mut sorted_target = target.clone();
    sorted_target.sort();

    // Search most constrained vertices first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| candidates[i].len());
    let mut phi = vec![usize::MAX; n];
    let mut used = vec![false; n];

    // Adjacency between already-mapped vertices must agree.
    let adjacency = |s: &Shape| {
        let mut m: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &s.edges {
            if let (Some(t), Some(h)) = (e.0, e.1) {
                *m.entry((t, h)).or_default() += 1;
            }
        }
        m
    };
    let adj_a = adjacency(&a);
    let adj_b = adjacency(&b);

    fn search(
        depth: usize,
        order: &[usize],
        candidates: &[Vec<usize>],
        phi: &mut Vec<usize>,
        used: &mut Vec<bool>,
        adj_a: &BTreeMap<(usize, usize), usize>,
        adj_b: &BTreeMap<(usize, usize), usize>,
        done: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if depth == order.len() {
            return done(phi);
        }
        let i = order[depth];
        for &j in &candidates[i] {
            if used[j] {
                continue;
            }
            let consistent = order[..depth].iter().all(|&k| {
                let fk = phi[k];
                adj_a.get(&(i, k)).copied().unwrap_or(0) == adj_b.get(&(j, fk)).copied().unwrap_or(0)
                    && adj_a.get(&(k, i)).copied().unwrap_or(0) == adj_b.get(&(fk, j)).copied().unwrap_or(0)
            });
            if !consistent {
                continue;
            }
            phi[i] = j;
            used[j] = true;
            if search(depth + 1, order, candidates, phi, used, adj_a, adj_b, done) {
                return true;
            }
            used[j] = false;
            phi[i] = usize::MAX;
        }
        false
    }

    let mut found: Option<Mapping> = None;
    let mut done = |phi: &[usize]| {
        let mapped = edge_keys(&a, &all_a, &|i| phi[i]);
        let mut sorted = mapped.clone();
        sorted.sort();
        if sorted != sorted_target {
            return false;
        }
        let mut pool: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        for (j, k) in target.iter().enumerate().rev() {
            pool.entry(*k).or_default().push(j);
        }
        let edges = mapped
            .iter()
            .map(|k| pool.get_mut(k).and_then(Vec::pop).expect("multisets agree"))
            .collect();
        found = Some(Mapping {
            vertices: phi.to_vec(),
            edges,
        });
        true
    };
    search(0, &order, &candidates, &mut phi, &mut used, &adj_a, &adj_b, &mut done);
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplexClass {
    Graph,
    WeaklyAlmostGraph,
    WithEnds,
    WithEndsAndLoops,
}

pub fn complex_class(g: &impl AsShape) -> ComplexClass {
    let s = g.shape();
    if s.edges.iter().any(|e| e.0.is_some() && e.0 == e.1) {
        return ComplexClass::WithEndsAndLoops;
    }
    let boundary_end = |v: Option<usize>| v.is_none_or(|i| s.boundary[i]);
    if s.edges.iter().any(|e| boundary_end(e.0) || boundary_end(e.1)) {
        return ComplexClass::WithEnds;
    }
    if s.nf.iter().any(|&f| f) {
        return ComplexClass::WeaklyAlmostGraph;
    }
    ComplexClass::Graph
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn vertex(id: usize, value: f64, kind: VertexKind) -> Vertex {
        Vertex {
            id,
            value,
            kind,
            level: id,
            witnesses: Vec::new(),
            ends: Vec::new(),
            pole_closed: false,
        }
    }

    fn edge(id: usize, tail: usize, head: usize) -> Edge {
        Edge {
            id,
            tail,
            head: Some(head),
            family: Vec::new(),
            spans: Vec::new(),
        }
    }

    fn graph(values: &[f64], edges: &[(usize, usize)]) -> WindowedPreDigraph {
        WindowedPreDigraph {
            vertices: values
                .iter()
                .enumerate()
                .map(|(i, &v)| vertex(i, v, VertexKind::Critical))
                .collect(),
            edges: edges.iter().enumerate().map(|(i, &(t, h))| edge(i, t, h)).collect(),
            nf: Vec::new(),
            m: 2,
            window: Interval::new(-5.0, 5.0).unwrap(),
        }
    }

    #[test]
    fn validate_flags_flat_edges_and_misplaced_nf() {
        let ok = graph(&[0.0, 1.0], &[(0, 1)]);
        assert!(validate(&ok).is_empty());
        let flat = graph(&[1.0, 1.0], &[(0, 1)]);
        assert!(validate(&flat).iter().any(|v| v.contains("non-injective edge")));
        let mut bad_nf = ok.clone();
        bad_nf.nf.push(NfAnnotation {
            vertex: 0,
            value: 0.0,
            ends: vec![End::PosInf],
            clustering_sides: vec![Side::Above],
        });
        assert!(!validate(&bad_nf).is_empty());
    }

    #[test]
    fn shifted_path_is_isomorphic() {
        let a = graph(&[0.0, 1.0], &[(0, 1)]);
        let b = graph(&[5.0, 7.0], &[(0, 1)]);
        let m = isomorphic(&a, &b).unwrap();
        assert_eq!(m.vertices, vec![0, 1]);
        assert!(isomorphic(&a, &a).is_some());
    }

    #[test]
    fn reversed_fork_is_not_isomorphic() {
        let out_fork = graph(&[0.0, 1.0, 2.0], &[(0, 1), (0, 2)]);
        let in_fork = graph(&[0.0, 1.0, 2.0], &[(0, 2), (1, 2)]);
        assert!(isomorphic(&out_fork, &in_fork).is_none());
    }

    #[test]
    fn order_matters_not_values() {
        let a = graph(&[0.0, 1.0, 2.0], &[(0, 1), (0, 2)]);
        let b = graph(&[0.0, 2.0, 1.0], &[(0, 1), (0, 2)]);
        assert!(isomorphic(&a, &b).is_some());
        let c = graph(&[1.0, 0.0, 2.0], &[(0, 1), (0, 2)]);
        assert!(isomorphic(&a, &c).is_none());
    }

    #[test]
    fn classes() {
        assert_eq!(complex_class(&graph(&[0.0, 1.0], &[(0, 1)])), ComplexClass::Graph);
        let dangling = Shape {
            vertex_values: vec![None],
            nf: vec![false],
            boundary: vec![false],
            edges: vec![(None, Some(0), Some(0.0))],
        };
        assert_eq!(complex_class(&dangling), ComplexClass::WithEnds);
        let looped = Shape {
            edges: vec![(Some(0), Some(0), None)],
            ..dangling
        };
        assert_eq!(complex_class(&looped), ComplexClass::WithEndsAndLoops);
    }
}
