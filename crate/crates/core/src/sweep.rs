//! Level sweep over the strip `c1(x) <= t <= c2(x)` building the windowed
//! Reeb pre-digraph of the height `t`.
//!
//! The window is cut at every critical point of either boundary function,
//! so both functions are monotone on each open cell. The slice at `t` is
//! then read off the path `b0 c0 b1 c1 ... bn` of breakpoints and cells: its
//! components are the maximal runs of elements alive at `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalFault, Expr};
use crate::interval::Interval;
use crate::predigraph::{
    Boundary, Edge, EdgeSpan, FamilyTag, NfAnnotation, Side, Vertex, VertexKind, WindowedPreDigraph, Witness,
};
use crate::profile::{CriticalKind, CriticalProfile, CriticalTail, End, Limit, SabEnd, SabStatus, TailDescriptor};

pub const DEFAULT_COALESCE: f64 = 1e-8;
const ISOLATION_BUDGET: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error(transparent)]
    Eval(#[from] EvalFault),
    #[error("{function:?} is not monotone on ({lo}, {hi}): missed critical point")]
    MissedCriticalPoint { function: Boundary, lo: f64, hi: f64 },
    #[error("slice topology changes at t = {t} on [{x_lo}, {x_hi}] with no critical point or window edge to explain it")]
    UnexplainedTopologyChange { t: f64, x_lo: f64, x_hi: f64 },
    #[error("declared noncompact contour at t = {t} toward {end:?} does not reach the window")]
    NoncompactContourOutsideWindow { t: f64, end: End },
    #[error("degenerate tangency at t = {t} not isolable within [{lo}, {hi}]")]
    Degenerate { t: f64, lo: f64, hi: f64 },
    #[error("profile {0:?} carries no tail descriptors")]
    MissingTails(Boundary),
    #[error("profile windows differ from the sweep window")]
    WindowMismatch,
    #[error("m must be at least 2 (got {0})")]
    InvalidDimension(u32),
}

/// The two boundary functions with their declared tails.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub c1: Expr,
    pub c2: Expr,
    pub tails_c1: [TailDescriptor; 2],
    pub tails_c2: [TailDescriptor; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Approach {
    Above,
    Below,
    Exact,
    Oscillating,
}

/// Side from which `f` approaches its finite limit toward `d.end`.
///
/// Accumulating tails carry the side in the descriptor; finite tails are
/// judged from the sign of `f - a` at the window edge facing that end.
pub fn approach(f: &Expr, d: &TailDescriptor, window: &Interval) -> Option<Approach> {
    let a = d.limit_value()?;
    Some(match d.critical_tail {
        CriticalTail::AccumulatingFromAbove => Approach::Above,
        CriticalTail::AccumulatingFromBelow => Approach::Below,
        CriticalTail::AccumulatingBothSides => Approach::Oscillating,
        CriticalTail::Finite => {
            let x = match d.end {
                End::NegInf => window.lo(),
                End::PosInf => window.hi(),
            };
            let v = if f.is_constant() { f.eval(0.0) } else { f.eval(x) };
            match v {
                Ok(v) if v > a => Approach::Above,
                Ok(v) if v < a => Approach::Below,
                _ => Approach::Exact,
            }
        }
    })
}

impl Strip {
    pub fn new(c1: Expr, c2: Expr, tails_c1: [TailDescriptor; 2], tails_c2: [TailDescriptor; 2]) -> Self {
        Strip {
            c1,
            c2,
            tails_c1,
            tails_c2,
        }
    }

    pub fn from_profiles(p1: &CriticalProfile, p2: &CriticalProfile) -> Result<Self, SweepError> {
        Ok(Strip {
            c1: p1.function.clone(),
            c2: p2.function.clone(),
            tails_c1: p1.tails.ok_or(SweepError::MissingTails(Boundary::C1))?,
            tails_c2: p2.tails.ok_or(SweepError::MissingTails(Boundary::C2))?,
        })
    }

    fn tail(&self, f: Boundary, end: End) -> &TailDescriptor {
        match f {
            Boundary::C1 => &self.tails_c1[end as usize],
            Boundary::C2 => &self.tails_c2[end as usize],
        }
    }

    /// Whether the slice at `t` contains an unbounded piece toward `end`:
    /// eventually `c1 <= t` and eventually `c2 >= t`.
    pub fn unbounded_at(&self, t: f64, end: End, window: &Interval) -> bool {
        let d1 = self.tail(Boundary::C1, end);
        let d2 = self.tail(Boundary::C2, end);
        let below = match d1.limit {
            Limit::DivergeMinus => true,
            Limit::DivergePlus => false,
            Limit::Converge(a) if a != t => a < t,
            Limit::Converge(_) => matches!(
                approach(&self.c1, d1, window),
                Some(Approach::Below | Approach::Exact)
            ),
        };
        let above = match d2.limit {
            Limit::DivergePlus => true,
            Limit::DivergeMinus => false,
            Limit::Converge(a) if a != t => a > t,
            Limit::Converge(_) => matches!(
                approach(&self.c2, d2, window),
                Some(Approach::Above | Approach::Exact)
            ),
        };
        below && above
    }

    /// Accumulation sides declared at value `t` toward `end`.
    pub fn clustering_sides(&self, t: f64, end: End) -> Vec<Side> {
        let mut sides = Vec::new();
        for f in [Boundary::C1, Boundary::C2] {
            let d = self.tail(f, end);
            if d.limit_value() != Some(t) {
                continue;
            }
            for (side, above) in [(Side::Below, false), (Side::Above, true)] {
                if d.critical_tail.accumulates_on(above) && !sides.contains(&side) {
                    sides.push(side);
                }
            }
        }
        sides.sort();
        sides
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    RootOfC1,
    RootOfC2,
    Unbounded,
    /// The component is cut by the window but bounded per the tails.
    WindowEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceBound {
    pub x: f64,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceComponent {
    pub t: f64,
    pub left: SliceBound,
    pub right: SliceBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CutKind {
    Root(Boundary),
    Touch(Boundary),
}

/// Roots of `f(x) = t` on `window` by interval subdivision: cells whose
/// enclosure excludes `t` are dropped, cells where `f` is provably monotone
/// are bisected to a sign change, and cells that shrink below resolution
/// without deciding are kept as tangency cut points.
fn isolate(f: &Expr, df: &Expr, t: f64, window: &Interval, which: Boundary) -> Result<Vec<(f64, CutKind)>, SweepError> {
    let g = |x: f64| f.eval(x).map(|v| v - t);
    let mut out = Vec::new();
    let mut stack = vec![*window];
    let mut budget = ISOLATION_BUDGET;
    while let Some(cell) = stack.pop() {
        budget = budget.checked_sub(1).ok_or(SweepError::Degenerate {
            t,
            lo: cell.lo(),
            hi: cell.hi(),
        })?;
        let enclosure = f.eval_interval(&cell).ok();
        if let Some(r) = enclosure {
            if r.lo() > t || r.hi() < t {
                continue;
            }
        }
        let (ga, gb) = (g(cell.lo())?, g(cell.hi())?);
        if ga == 0.0 {
            out.push((cell.lo(), CutKind::Root(which)));
        }
        if gb == 0.0 {
            out.push((cell.hi(), CutKind::Root(which)));
        }
        let monotone = df.eval_interval(&cell).is_ok_and(|d| !d.contains_zero());
        if monotone && enclosure.is_some() {
            if ga * gb < 0.0 {
                let (mut a, mut b) = (cell.lo(), cell.hi());
                loop {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let gm = g(m)?;
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if (gm < 0.0) == (ga < 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push((0.5 * (a + b), CutKind::Root(which)));
            }
            continue;
        }
        if cell.width() <= 1e-12 * cell.mid().abs().max(1.0) {
            out.push((cell.mid(), CutKind::Touch(which)));
            continue;
        }
        let (l, r) = cell.split();
        stack.push(r);
        stack.push(l);
    }
    Ok(out)
}

/// Connected components of the slice `{x : c1(x) <= t <= c2(x)}` inside
/// `window`, left to right; pieces reaching a window edge are marked
/// `Unbounded` when the tails extend them to infinity.
pub fn slice_components(strip: &Strip, t: f64, window: &Interval) -> Result<Vec<SliceComponent>, SweepError> {
    let mut cuts: Vec<(f64, CutKind)> = Vec::new();
    for (f, which) in [(&strip.c1, Boundary::C1), (&strip.c2, Boundary::C2)] {
        if f.is_constant() {
            continue;
        }
        let df = f.differentiate();
        cuts.extend(isolate(f, &df, t, window, which)?);
    }
    cuts.retain(|c| c.0 > window.lo() && c.0 < window.hi());
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    cuts.dedup_by(|b, a| (b.0 - a.0).abs() <= 1e-13 * a.0.abs().max(1.0));

    let product = |x: f64| -> Result<f64, SweepError> {
        Ok((t - strip.c1.eval(x)?) * (strip.c2.eval(x)? - t))
    };
    let scale = |x: f64| -> f64 {
        let a = strip.c1.eval(x).unwrap_or(0.0).abs();
        let b = strip.c2.eval(x).unwrap_or(0.0).abs();
        1e-12 * a.max(b).max(t.abs()).max(1.0).powi(2)
    };

    // Points: window edges and cut points; cells between them.
    let mut points: Vec<(f64, Option<CutKind>)> = vec![(window.lo(), None)];
    points.extend(cuts.iter().map(|&(x, k)| (x, Some(k))));
    points.push((window.hi(), None));
    let point_member: Vec<bool> = points
        .iter()
        .map(|&(x, _)| product(x).map(|p| p >= -scale(x)))
        .collect::<Result<_, _>>()?;
    let cell_member: Vec<bool> = points
        .windows(2)
        .map(|w| product(0.5 * (w[0].0 + w[1].0)).map(|p| p >= 0.0))
        .collect::<Result<_, _>>()?;

    let bound = |i: usize, left: bool| -> SliceBound {
        let (x, kind) = points[i];
        let edge = if i == 0 {
            Some(End::NegInf)
        } else if i == points.len() - 1 {
            Some(End::PosInf)
        } else {
            None
        };
        if let Some(end) = edge {
            if strip.unbounded_at(t, end, window) {
                let x = if left { f64::NEG_INFINITY } else { f64::INFINITY };
                return SliceBound {
                    x,
                    kind: BoundaryKind::Unbounded,
                };
            }
            return SliceBound {
                x,
                kind: BoundaryKind::WindowEdge,
            };
        }
        let kind = match kind {
            Some(CutKind::Root(Boundary::C1) | CutKind::Touch(Boundary::C1)) => BoundaryKind::RootOfC1,
            _ => BoundaryKind::RootOfC2,
        };
        SliceBound { x, kind }
    };

    // Element sequence: point 0, cell 0, point 1, ..., point n.
    let n = points.len();
    let member = |e: usize| {
        if e.is_multiple_of(2) {
            point_member[e / 2]
        } else {
            cell_member[e / 2]
        }
    };
    let mut out = Vec::new();
    let mut e = 0;
    while e < 2 * n - 1 {
        if !member(e) {
            e += 1;
            continue;
        }
        let start = e;
        while e + 1 < 2 * n - 1 && member(e + 1) {
            e += 1;
        }
        // Open cells end at their adjacent points.
        let li = start / 2;
        let ri = e.div_ceil(2);
        out.push(SliceComponent {
            t,
            left: bound(li, true),
            right: bound(ri, false),
        });
        e += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Interior,
    Boundary,
    Outside,
}

/// Sign of the defining product `(x1 - c1(x2)) (c2(x2) - x1)` at a point of the plane.
pub fn region_membership(c1: &Expr, c2: &Expr, x1: f64, x2: f64) -> Result<Membership, EvalFault> {
    let (a, b) = (c1.eval(x2)?, c2.eval(x2)?);
    let p = (x1 - a) * (b - x1);
    let tol = 1e-12 * x1.abs().max(a.abs()).max(b.abs()).max(1.0).powi(2);
    Ok(if p > tol {
        Membership::Interior
    } else if p.abs() <= tol {
        Membership::Boundary
    } else {
        Membership::Outside
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Birth,
    Death,
    Merge,
    Split,
    NoncompactContour,
    WindowArtifact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventSource {
    Critical { function: Boundary, x: f64 },
    Limit { value: f64, end: End },
    Window { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub value: f64,
    pub kind: EventKind,
    pub source: EventSource,
    /// Coalesced level index; events sharing it are processed together.
    pub level: usize,
    /// Net slice-count change across the level agrees with the predicted kinds.
    pub confirmed: bool,
}

fn coalesce(values: &mut [f64], tol: f64) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for &v in values.iter() {
        match clusters.last_mut() {
            Some(c) if v - c.1 <= tol => c.1 = v,
            _ => clusters.push((v, v)),
        }
    }
    clusters
}

fn cluster_of(clusters: &[(f64, f64)], v: f64) -> usize {
    clusters.partition_point(|c| c.1 < v).min(clusters.len() - 1)
}

fn forced_levels(strip: &Strip, sab: &SabStatus, window: &Interval) -> Vec<(f64, End)> {
    [End::NegInf, End::PosInf]
        .into_iter()
        .filter_map(|end| match sab.at(end) {
            SabEnd::SameLimit(a) if strip.unbounded_at(a, end, window) => Some((a, end)),
            _ => None,
        })
        .collect()
}

/// Predicted events from the critical profiles and declared limits, with
/// ties within `tol` sharing a level; each level's net change in slice
/// count is checked against a slice recomputation just below and above.
pub fn event_schedule(p1: &CriticalProfile, p2: &CriticalProfile, tol: f64) -> Result<Vec<Event>, SweepError> {
    let strip = Strip::from_profiles(p1, p2)?;
    let window = p1.window;
    let sab = crate::profile::sab_classify(&strip.tails_c1, &strip.tails_c2);
    let mut events = Vec::new();
    for (p, which) in [(p1, Boundary::C1), (p2, Boundary::C2)] {
        for c in &p.critical_points {
            let kind = match (which, c.kind) {
                (_, CriticalKind::Degenerate) => continue,
                (Boundary::C1, CriticalKind::LocalMin) => EventKind::Birth,
                (Boundary::C1, CriticalKind::LocalMax) => EventKind::Merge,
                (Boundary::C2, CriticalKind::LocalMin) => EventKind::Split,
                (Boundary::C2, CriticalKind::LocalMax) => EventKind::Death,
            };
            events.push(Event {
                value: c.value,
                kind,
                source: EventSource::Critical { function: which, x: c.x },
                level: 0,
                confirmed: false,
            });
        }
    }
    let mut forced = forced_levels(&strip, &sab, &window);
    // Both ends at one value give a single contour through infinity.
    forced.dedup_by(|b, a| a.0 == b.0);
    for (a, end) in forced {
        events.push(Event {
            value: a,
            kind: EventKind::NoncompactContour,
            source: EventSource::Limit { value: a, end },
            level: 0,
            confirmed: false,
        });
    }
    let mut values: Vec<f64> = events.iter().map(|e| e.value).collect();
    let clusters = coalesce(&mut values, tol);
    for e in &mut events {
        e.level = cluster_of(&clusters, e.value);
    }
    events.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.level.cmp(&b.level)));

    for (li, c) in clusters.iter().enumerate() {
        let at: Vec<&mut Event> = events.iter_mut().filter(|e| e.level == li).collect();
        if at.iter().any(|e| e.kind == EventKind::NoncompactContour) {
            continue;
        }
        let below_gap = if li == 0 { 1e-3 } else { c.0 - clusters[li - 1].1 };
        let above_gap = clusters.get(li + 1).map_or(1e-3, |n| n.0 - c.1);
        let eps = (0.25 * below_gap.min(above_gap)).min(1e-6);
        let lo = slice_components(&strip, c.0 - eps, &window)?.len() as i64;
        let hi = slice_components(&strip, c.1 + eps, &window)?.len() as i64;
        let expected: i64 = at
            .iter()
            .map(|e| match e.kind {
                EventKind::Birth | EventKind::Split => 1,
                _ => -1,
            })
            .sum();
        for e in at {
            e.confirmed = hi - lo == expected;
        }
    }
    Ok(events)
}

/// Events realised by a built graph, one per vertex, classified by incidence.
pub fn graph_events(g: &WindowedPreDigraph) -> Vec<Event> {
    g.vertices
        .iter()
        .map(|v| {
            let ins = g.edges.iter().filter(|e| e.head == Some(v.id)).count();
            let outs = g.edges.iter().filter(|e| e.tail == v.id).count();
            let kind = match v.kind {
                VertexKind::NoncompactContour => EventKind::NoncompactContour,
                VertexKind::WindowBoundary | VertexKind::Pole => EventKind::WindowArtifact,
                VertexKind::Critical if ins >= 2 => EventKind::Merge,
                VertexKind::Critical if outs >= 2 => EventKind::Split,
                VertexKind::Critical if ins == 0 => EventKind::Birth,
                VertexKind::Critical => EventKind::Death,
            };
            let source = match (v.kind, v.witnesses.first(), v.ends.first()) {
                (VertexKind::NoncompactContour, _, Some(&end)) => EventSource::Limit { value: v.value, end },
                (_, Some(w), _) => EventSource::Critical {
                    function: w.function,
                    x: w.x,
                },
                _ => EventSource::Window {
                    x: if v.ends.first() == Some(&End::NegInf) {
                        g.window.lo()
                    } else {
                        g.window.hi()
                    },
                },
            };
            Event {
                value: v.value,
                kind,
                source,
                level: v.level,
                confirmed: true,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub m: u32,
    pub coalesce: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            m: 2,
            coalesce: DEFAULT_COALESCE,
        }
    }
}

struct Breakpoint {
    x: f64,
    c1: f64,
    c2: f64,
    crit1: bool,
    crit2: bool,
}

struct Run {
    start: usize,
    end: usize,
    edge: usize,
}

/// Sweeps the coalesced levels bottom to top and assembles the windowed
/// pre-digraph. A contour whose incidence is not one edge in and one edge
/// out becomes a vertex, as does every contour at a noncompact level.
pub fn build_reeb(
    p1: &CriticalProfile,
    p2: &CriticalProfile,
    sab: &SabStatus,
    window: &Interval,
    opts: &SweepOptions,
) -> Result<WindowedPreDigraph, SweepError> {
    if opts.m < 2 {
        return Err(SweepError::InvalidDimension(opts.m));
    }
    if p1.window != *window || p2.window != *window {
        return Err(SweepError::WindowMismatch);
    }
    let strip = Strip::from_profiles(p1, p2)?;

    // Breakpoints: window ends plus critical points of either function.
    let mut marks: Vec<(f64, Boundary)> = Vec::new();
    for (p, which) in [(p1, Boundary::C1), (p2, Boundary::C2)] {
        marks.extend(
            p.critical_points
                .iter()
                .filter(|c| c.x > window.lo() && c.x < window.hi())
                .map(|c| (c.x, which)),
        );
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bps: Vec<Breakpoint> = Vec::new();
    let push = |bps: &mut Vec<Breakpoint>, x: f64, which: Option<Boundary>| -> Result<(), SweepError> {
        if let Some(last) = bps.last_mut() {
            if (x - last.x).abs() <= 1e-12 * x.abs().max(1.0) {
                last.crit1 |= which == Some(Boundary::C1);
                last.crit2 |= which == Some(Boundary::C2);
                return Ok(());
            }
        }
        bps.push(Breakpoint {
            x,
            c1: strip.c1.eval(x)?,
            c2: strip.c2.eval(x)?,
            crit1: which == Some(Boundary::C1),
            crit2: which == Some(Boundary::C2),
        });
        Ok(())
    };
    push(&mut bps, window.lo(), None)?;
    for &(x, which) in &marks {
        push(&mut bps, x, Some(which))?;
    }
    push(&mut bps, window.hi(), None)?;

    // Each function must be monotone between consecutive breakpoints.
    for (f, which, get) in [
        (&strip.c1, Boundary::C1, (|b: &Breakpoint| b.c1) as fn(&Breakpoint) -> f64),
        (&strip.c2, Boundary::C2, |b: &Breakpoint| b.c2),
    ] {
        if f.is_constant() {
            continue;
        }
        let df = f.differentiate();
        for w in bps.windows(2) {
            let rise = get(&w[1]) - get(&w[0]);
            let slope = df.eval(0.5 * (w[0].x + w[1].x))?;
            let scale = 1e-12 * get(&w[0]).abs().max(get(&w[1]).abs()).max(1.0);
            if rise.abs() > scale && slope != 0.0 && (slope > 0.0) != (rise > 0.0) {
                return Err(SweepError::MissedCriticalPoint {
                    function: which,
                    lo: w[0].x,
                    hi: w[1].x,
                });
            }
        }
    }

    // Elements: even index 2i is breakpoint i, odd index 2i+1 the cell after it.
    let n_el = 2 * bps.len() - 1;
    let alive: Vec<(f64, f64)> = (0..n_el)
        .map(|e| {
            if e % 2 == 0 {
                let b = &bps[e / 2];
                (b.c1, b.c2)
            } else {
                let (a, b) = (&bps[e / 2], &bps[e / 2 + 1]);
                (a.c1.min(b.c1), a.c2.max(b.c2))
            }
        })
        .collect();
    let extent = |start: usize, end: usize| (bps[start / 2].x, bps[end.div_ceil(2)].x);

    let forced = forced_levels(&strip, sab, window);
    let mut values: Vec<f64> = alive.iter().flat_map(|&(a, b)| [a, b]).collect();
    values.extend(forced.iter().map(|f| f.0));
    let clusters = coalesce(&mut values, opts.coalesce);
    let level_value: Vec<f64> = clusters
        .iter()
        .map(|c| {
            forced
                .iter()
                .map(|f| f.0)
                .find(|&a| a >= c.0 && a <= c.1)
                .unwrap_or(c.0)
        })
        .collect();
    let span: Vec<(usize, usize)> = alive
        .iter()
        .map(|&(a, b)| (cluster_of(&clusters, a), cluster_of(&clusters, b)))
        .collect();

    let runs_where = |pred: &dyn Fn(usize) -> bool| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut e = 0;
        while e < n_el {
            if !pred(e) {
                e += 1;
                continue;
            }
            let s = e;
            while e + 1 < n_el && pred(e + 1) {
                e += 1;
            }
            out.push((s, e));
            e += 1;
        }
        out
    };

    let mut vertices: Vec<Vertex> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut state: Vec<Run> = Vec::new();

    for (li, &t) in level_value.iter().enumerate() {
        let at_runs = runs_where(&|e| span[e].0 <= li && li <= span[e].1);
        let gap_runs = runs_where(&|e| span[e].0 <= li && li < span[e].1);
        let forced_here: Vec<End> = forced
            .iter()
            .filter(|f| cluster_of(&clusters, f.0) == li)
            .map(|f| f.1)
            .collect();
        for &end in &forced_here {
            let el = if end == End::NegInf { 0 } else { n_el - 1 };
            if !at_runs.iter().any(|r| r.0 <= el && el <= r.1) {
                return Err(SweepError::NoncompactContourOutsideWindow { t, end });
            }
        }

        let mut next: Vec<Run> = Vec::new();
        for &(rs, re) in &at_runs {
            let below: Vec<&Run> = state.iter().filter(|r| r.start >= rs && r.end <= re).collect();
            let above: Vec<(usize, usize)> = gap_runs.iter().copied().filter(|r| r.0 >= rs && r.1 <= re).collect();
            let ends: Vec<End> = forced_here
                .iter()
                .copied()
                .filter(|&end| {
                    let el = if end == End::NegInf { 0 } else { n_el - 1 };
                    rs <= el && el <= re
                })
                .collect();
            if ends.is_empty() && below.len() == 1 && above.len() == 1 {
                next.push(Run {
                    start: above[0].0,
                    end: above[0].1,
                    edge: below[0].edge,
                });
                continue;
            }
            if below.is_empty() && above.is_empty() && ends.is_empty() {
                // A contour present only at this level with nothing on either side
                // cannot arise from a strict strip; skip rather than invent a vertex.
                continue;
            }
            let witnesses: Vec<Witness> = (rs..=re)
                .filter(|e| e % 2 == 0)
                .flat_map(|e| {
                    let b = &bps[e / 2];
                    let mut w = Vec::new();
                    if b.crit1 && cluster_of(&clusters, b.c1) == li {
                        w.push(Witness {
                            function: Boundary::C1,
                            x: b.x,
                            value: b.c1,
                        });
                    }
                    if b.crit2 && cluster_of(&clusters, b.c2) == li {
                        w.push(Witness {
                            function: Boundary::C2,
                            x: b.x,
                            value: b.c2,
                        });
                    }
                    w
                })
                .collect();
            let touches = rs == 0 || re == n_el - 1;
            let kind = if !ends.is_empty() {
                VertexKind::NoncompactContour
            } else if !witnesses.is_empty() {
                VertexKind::Critical
            } else if touches {
                VertexKind::WindowBoundary
            } else {
                let (x_lo, x_hi) = extent(rs, re);
                return Err(SweepError::UnexplainedTopologyChange { t, x_lo, x_hi });
            };
            let id = vertices.len();
            let mut v_ends = ends.clone();
            if kind == VertexKind::WindowBoundary {
                if rs == 0 {
                    v_ends.push(End::NegInf);
                }
                if re == n_el - 1 {
                    v_ends.push(End::PosInf);
                }
            }
            vertices.push(Vertex {
                id,
                value: t,
                kind,
                level: li,
                witnesses,
                ends: v_ends,
                pole_closed: false,
            });
            for r in below {
                edges[r.edge].head = Some(id);
            }
            for (s, e) in above {
                let eid = edges.len();
                edges.push(Edge {
                    id: eid,
                    tail: id,
                    head: None,
                    family: Vec::new(),
                    spans: Vec::new(),
                });
                next.push(Run {
                    start: s,
                    end: e,
                    edge: eid,
                });
            }
        }
        if let Some(&t_next) = level_value.get(li + 1) {
            for r in &next {
                let (x_lo, x_hi) = extent(r.start, r.end);
                let s = EdgeSpan {
                    t_lo: t,
                    t_hi: t_next,
                    x_lo,
                    x_hi,
                    touches_lo: r.start == 0,
                    touches_hi: r.end == n_el - 1,
                };
                let spans = &mut edges[r.edge].spans;
                match spans.last_mut() {
                    Some(last) if last.t_hi == t && last.x_lo == s.x_lo && last.x_hi == s.x_hi => last.t_hi = t_next,
                    _ => spans.push(s),
                }
            }
        }
        next.sort_by_key(|r| r.start);
        state = next;
    }
    debug_assert!(state.is_empty(), "components alive above the top level");

    // NF annotations and accumulating-family tags.
    let mut nf = Vec::new();
    for v in vertices.iter().filter(|v| v.kind == VertexKind::NoncompactContour) {
        let mut sides: Vec<Side> = v.ends.iter().flat_map(|&e| strip.clustering_sides(v.value, e)).collect();
        sides.sort();
        sides.dedup();
        if !sides.is_empty() {
            nf.push(NfAnnotation {
                vertex: v.id,
                value: v.value,
                ends: v.ends.clone(),
                clustering_sides: sides,
            });
        }
    }
    for a in &nf {
        for e in edges.iter_mut() {
            let germs = [
                (e.head == Some(a.vertex), Side::Below, e.spans.last()),
                (e.tail == a.vertex, Side::Above, e.spans.first()),
            ];
            for (incident, side, span) in germs {
                let Some(span) = span.filter(|_| incident) else {
                    continue;
                };
                if !a.clustering_sides.contains(&side) {
                    continue;
                }
                let reaches = a.ends.iter().any(|&end| {
                    let touching = match end {
                        End::NegInf => span.touches_lo,
                        End::PosInf => span.touches_hi,
                    };
                    touching && strip.clustering_sides(a.value, end).contains(&side)
                });
                if reaches {
                    e.family.push(FamilyTag {
                        nf_vertex: a.vertex,
                        side,
                    });
                }
            }
        }
    }

    Ok(WindowedPreDigraph {
        vertices,
        edges,
        nf,
        m: opts.m,
        window: *window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::profile::{find_critical_points, sab_classify};

    fn w(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn finite(a: f64) -> [TailDescriptor; 2] {
        [
            TailDescriptor::new(End::NegInf, Limit::Converge(a), CriticalTail::Finite).unwrap(),
            TailDescriptor::new(End::PosInf, Limit::Converge(a), CriticalTail::Finite).unwrap(),
        ]
    }

    fn p1_strip() -> Strip {
        Strip::new(parse("0").unwrap(), parse("1/(x^2+1)").unwrap(), finite(0.0), finite(0.0))
    }

    #[test]
    fn p1_slices() {
        let s = p1_strip();
        let half = slice_components(&s, 0.5, &w(-5.0, 5.0)).unwrap();
        assert_eq!(half.len(), 1);
        assert!((half[0].left.x + 1.0).abs() < 1e-12 && (half[0].right.x - 1.0).abs() < 1e-12);
        assert_eq!(half[0].left.kind, BoundaryKind::RootOfC2);
        assert_eq!(half[0].right.kind, BoundaryKind::RootOfC2);
        assert!(slice_components(&s, 2.0, &w(-5.0, 5.0)).unwrap().is_empty());
        let line = slice_components(&s, 0.0, &w(-5.0, 5.0)).unwrap();
        assert_eq!(line.len(), 1);
        assert_eq!(line[0].left.kind, BoundaryKind::Unbounded);
        let low = slice_components(&s, 0.01, &w(-5.0, 5.0)).unwrap();
        assert_eq!(low[0].right.kind, BoundaryKind::WindowEdge);
    }

    #[test]
    fn bump_slice_has_two_lobes() {
        let s = Strip::new(
            parse("-(1/(x^2+1) - 1/(x^2+1)^2) - 1").unwrap(),
            parse("1/(x^2+1) - 1/(x^2+1)^2").unwrap(),
            finite(0.0),
            finite(0.0),
        );
        let comps = slice_components(&s, 0.1, &w(-3.0, 3.0)).unwrap();
        assert_eq!(comps.len(), 2);
        let inner = (4.0 - 15f64.sqrt()).sqrt();
        let outer = (4.0 + 15f64.sqrt()).sqrt();
        assert!((comps[0].left.x + outer).abs() < 1e-10 && (comps[0].right.x + inner).abs() < 1e-10);
        assert!((comps[1].left.x - inner).abs() < 1e-10 && (comps[1].right.x - outer).abs() < 1e-10);
    }

    #[test]
    fn membership_examples() {
        let (c1, c2) = (parse("0").unwrap(), parse("1/(x^2+1)").unwrap());
        assert_eq!(region_membership(&c1, &c2, 0.5, 0.0).unwrap(), Membership::Interior);
        assert_eq!(region_membership(&c1, &c2, 1.0, 0.0).unwrap(), Membership::Boundary);
        assert_eq!(region_membership(&c1, &c2, 2.0, 0.0).unwrap(), Membership::Outside);
    }

    fn p1_graph(m: u32) -> Result<WindowedPreDigraph, SweepError> {
        let s = p1_strip();
        let win = w(-5.0, 5.0);
        let a = find_critical_points(&s.c1, &win, 1e-10).unwrap().with_tails(s.tails_c1);
        let b = find_critical_points(&s.c2, &win, 1e-10).unwrap().with_tails(s.tails_c2);
        let sab = sab_classify(&s.tails_c1, &s.tails_c2);
        build_reeb(&a, &b, &sab, &win, &SweepOptions { m, ..Default::default() })
    }

    #[test]
    fn p1_graph_is_a_single_edge() {
        let g = p1_graph(2).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert_eq!(g.vertices[0].kind, VertexKind::NoncompactContour);
        assert_eq!(g.vertices[0].value, 0.0);
        assert_eq!(g.vertices[1].kind, VertexKind::Critical);
        assert!((g.vertices[1].value - 1.0).abs() < 1e-15);
        assert_eq!(g.edges.len(), 1);
        assert_eq!((g.edges[0].tail, g.edges[0].head), (0, Some(1)));
        assert!(g.nf.is_empty());
        assert!(crate::predigraph::validate(&g).is_empty());
        let kinds: Vec<EventKind> = graph_events(&g).iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::NoncompactContour, EventKind::Death]);
    }

    #[test]
    fn dimension_is_metadata_only() {
        let (a, b) = (p1_graph(2).unwrap(), p1_graph(3).unwrap());
        assert_eq!(WindowedPreDigraph { m: 3, ..a }, b);
        assert!(matches!(p1_graph(1), Err(SweepError::InvalidDimension(1))));
    }

    #[test]
    fn schedule_for_p1() {
        let s = p1_strip();
        let win = w(-5.0, 5.0);
        let a = find_critical_points(&s.c1, &win, 1e-10).unwrap().with_tails(s.tails_c1);
        let b = find_critical_points(&s.c2, &win, 1e-10).unwrap().with_tails(s.tails_c2);
        let ev = event_schedule(&a, &b, DEFAULT_COALESCE).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].kind, EventKind::NoncompactContour);
        assert_eq!(ev[1].kind, EventKind::Death);
        assert!(ev[1].confirmed);
    }
}
