//! Components off the NF vertices, their equivalence under accumulating
//! families, the simplified NF graph diagram, and pattern classification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::pipeline::{analyze_window, PipelineError, Settings};
use crate::predigraph::{isomorphic, AsShape, Mapping, Shape, Side, WindowedPreDigraph};
use crate::sweep::Strip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Multiplicity {
    Single,
    ClusterFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Germ {
    pub component: usize,
    pub nf_vertex: usize,
    pub side: Side,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GermTable {
    pub rows: Vec<Germ>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Relate components only through accumulating families on a clustering side.
    #[default]
    ClusterRestricted,
    /// Relate every pair of components attached to the same side of one NF point.
    LiteralDef4,
}

/// Component id per vertex and per edge; NF vertices get `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub count: usize,
    pub of_vertex: Vec<Option<usize>>,
    pub of_edge: Vec<usize>,
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Connected components of the graph with NF vertices deleted, and the
/// germs of edges at the deleted vertices.
pub fn components_minus_nf(g: &WindowedPreDigraph) -> (Components, GermTable) {
    let nv = g.vertices.len();
    let index: BTreeMap<usize, usize> = g.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let nf: Vec<bool> = g.vertices.iter().map(|v| g.is_nf(v.id)).collect();
    let mut sets = DisjointSets::new(nv + g.edges.len());
    for (j, e) in g.edges.iter().enumerate() {
        for end in [Some(e.tail), e.head].into_iter().flatten() {
            if let Some(&i) = index.get(&end) {
                if !nf[i] {
                    sets.union(nv + j, i);
                }
            }
        }
    }
    let mut labels: BTreeMap<usize, usize> = BTreeMap::new();
    let mut label = |sets: &mut DisjointSets, item: usize| {
        let root = sets.find(item);
        let next = labels.len();
        *labels.entry(root).or_insert(next)
    };
    let of_vertex: Vec<Option<usize>> = (0..nv).map(|i| (!nf[i]).then(|| label(&mut sets, i))).collect();
    let of_edge: Vec<usize> = (0..g.edges.len()).map(|j| label(&mut sets, nv + j)).collect();

    let mut rows: BTreeMap<(usize, usize, Side), Multiplicity> = BTreeMap::new();
    for (j, e) in g.edges.iter().enumerate() {
        let germs = [(e.head, Side::Below), (Some(e.tail), Side::Above)];
        for (end, side) in germs {
            let Some(s) = end.filter(|&s| g.is_nf(s)) else {
                continue;
            };
            let tagged = e.family.iter().any(|f| f.nf_vertex == s && f.side == side);
            let m = if tagged {
                Multiplicity::ClusterFamily
            } else {
                Multiplicity::Single
            };
            let slot = rows.entry((of_edge[j], s, side)).or_insert(m);
            *slot = (*slot).max(m);
        }
    }
    let table = GermTable {
        rows: rows
            .into_iter()
            .map(|((component, nf_vertex, side), multiplicity)| Germ {
                component,
                nf_vertex,
                side,
                multiplicity,
            })
            .collect(),
    };
    (
        Components {
            count: labels.len(),
            of_vertex,
            of_edge,
        },
        table,
    )
}

/// Classes of `0..count` under the relation generated by shared
/// attachments; each class lists its members in increasing order.
pub fn equivalence_classes(table: &GermTable, count: usize, policy: Policy) -> Vec<Vec<usize>> {
    let mut sets = DisjointSets::new(count);
    let mut first: BTreeMap<(usize, Side), usize> = BTreeMap::new();
    for r in &table.rows {
        if policy == Policy::ClusterRestricted && r.multiplicity != Multiplicity::ClusterFamily {
            continue;
        }
        match first.get(&(r.nf_vertex, r.side)) {
            Some(&c) => sets.union(c, r.component),
            None => {
                first.insert((r.nf_vertex, r.side), r.component);
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in 0..count {
        classes.entry(sets.find(c)).or_default().push(c);
    }
    classes.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdnfClass {
    pub id: usize,
    pub members: Vec<usize>,
}

/// An edge contributed by an NF point, oriented from the class below to the
/// class above; `None` marks a dangling end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdnfEdge {
    pub id: usize,
    pub nf_vertex: usize,
    pub nf_value: f64,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gdnf {
    pub policy: Policy,
    pub classes: Vec<GdnfClass>,
    pub edges: Vec<GdnfEdge>,
}

impl AsShape for Gdnf {
    fn shape(&self) -> Shape {
        Shape {
            vertex_values: vec![None; self.classes.len()],
            nf: vec![false; self.classes.len()],
            boundary: vec![false; self.classes.len()],
            edges: self.edges.iter().map(|e| (e.from, e.to, Some(e.nf_value))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GdnfError {
    #[error("NF vertex {0} has no attached germs")]
    UnattachedNf(usize),
}

pub fn build_gdnf(g: &WindowedPreDigraph, policy: Policy) -> Result<Gdnf, GdnfError> {
    let (comps, table) = components_minus_nf(g);
    let members = equivalence_classes(&table, comps.count, policy);
    let mut class_of = vec![0; comps.count];
    for (k, m) in members.iter().enumerate() {
        for &c in m {
            class_of[c] = k;
        }
    }
    let mut edges = Vec::new();
    for a in &g.nf {
        let attached = |side: Side| -> BTreeSet<usize> {
            table
                .rows
                .iter()
                .filter(|r| r.nf_vertex == a.vertex && r.side == side)
                .map(|r| class_of[r.component])
                .collect()
        };
        let (below, above) = (attached(Side::Below), attached(Side::Above));
        let pairs: Vec<(Option<usize>, Option<usize>)> = match (below.is_empty(), above.is_empty()) {
            (true, true) => return Err(GdnfError::UnattachedNf(a.vertex)),
            (true, false) => above.iter().map(|&t| (None, Some(t))).collect(),
            (false, true) => below.iter().map(|&f| (Some(f), None)).collect(),
            (false, false) => below
                .iter()
                .flat_map(|&f| above.iter().map(move |&t| (Some(f), Some(t))))
                .collect(),
        };
        for (from, to) in pairs {
            edges.push(GdnfEdge {
                id: edges.len(),
                nf_vertex: a.vertex,
                nf_value: a.value,
                from,
                to,
            });
        }
    }
    Ok(Gdnf {
        policy,
        classes: members
            .into_iter()
            .enumerate()
            .map(|(id, members)| GdnfClass { id, members })
            .collect(),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum PatternLabel {
    P1_2_1,
    P1_2_2,
    P1_2_3,
    P1_2_4,
    P1_2_5,
    P1_2_6,
    Other,
}

impl std::fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

fn template(n: usize, edges: &[(Option<usize>, Option<usize>)]) -> Shape {
    Shape {
        vertex_values: vec![None; n],
        nf: vec![false; n],
        boundary: vec![false; n],
        edges: edges.iter().map(|&(a, b)| (a, b, None)).collect(),
    }
}

/// The six admissible diagrams; a single dangling edge matches in either orientation.
pub fn templates() -> Vec<(PatternLabel, Shape)> {
    use PatternLabel::*;
    vec![
        (P1_2_1, template(1, &[])),
        (P1_2_2, template(1, &[(None, Some(0))])),
        (P1_2_2, template(1, &[(Some(0), None)])),
        (P1_2_3, template(2, &[(Some(0), Some(1))])),
        (P1_2_4, template(3, &[(Some(0), Some(1)), (Some(0), Some(2))])),
        (P1_2_5, template(3, &[(Some(1), Some(0)), (Some(2), Some(0))])),
        (P1_2_6, template(3, &[(Some(0), Some(1)), (Some(1), Some(2))])),
    ]
}

pub fn classify_pattern(d: &Gdnf) -> PatternLabel {
    templates()
        .into_iter()
        .find(|(_, t)| isomorphic(d, t).is_some())
        .map_or(PatternLabel::Other, |(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRun {
    pub requested: Interval,
    /// Requested window clipped to where both functions evaluate reliably.
    pub effective: Interval,
    pub classes: usize,
    pub edges: usize,
    pub pattern: PatternLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable { between: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub runs: Vec<WindowRun>,
    /// Whether consecutive effective windows actually differ; when they
    /// coincide the comparison is vacuous.
    pub effective_windows_distinct: bool,
    pub mappings: Vec<Mapping>,
    pub verdict: Stability,
}

/// Runs the pipeline on each window and certifies that consecutive GDNFs
/// are isomorphic. Returns the last GDNF together with the certificate.
pub fn stabilized_gdnf(
    strip: &Strip,
    windows: &[Interval],
    settings: &Settings,
) -> Result<(Gdnf, StabilityCertificate), PipelineError> {
    let mut runs = Vec::new();
    let mut gdnfs: Vec<Gdnf> = Vec::new();
    for w in windows {
        let a = analyze_window(strip, w, settings)?;
        let d = build_gdnf(&a.graph, settings.policy)?;
        runs.push(WindowRun {
            requested: *w,
            effective: a.effective,
            classes: d.classes.len(),
            edges: d.edges.len(),
            pattern: classify_pattern(&d),
        });
        gdnfs.push(d);
    }
    let mut mappings = Vec::new();
    let mut verdict = Stability::Stable;
    for i in 1..gdnfs.len() {
        match isomorphic(&gdnfs[i - 1], &gdnfs[i]) {
            Some(m) => mappings.push(m),
            None => {
                verdict = Stability::Unstable { between: (i - 1, i) };
                break;
            }
        }
    }
    let effective_windows_distinct = runs.windows(2).all(|p| p[0].effective != p[1].effective);
    let last = gdnfs.pop().ok_or(PipelineError::NoWindows)?;
    Ok((
        last,
        StabilityCertificate {
            runs,
            effective_windows_distinct,
            mappings,
            verdict,
        },
    ))
}
