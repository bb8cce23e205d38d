//! Brute-force slice oracle: membership on a dense x grid, independent of
//! the interval root isolation used by the sweep.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::interval::Interval;
use crate::predigraph::WindowedPreDigraph;

pub const DEFAULT_X_SAMPLES: usize = 100_000;
pub const MIN_X_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterLevel {
    pub t: f64,
    pub count: usize,
    pub intervals: Vec<(f64, f64)>,
}

/// Overlapping component pairs between two consecutive sampled levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub lower: usize,
    pub overlaps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterReport {
    pub window: Interval,
    pub x_samples: usize,
    pub levels: Vec<RasterLevel>,
    pub incidence: Vec<Incidence>,
}

fn refine(member: impl Fn(f64) -> bool, inside: f64, outside: f64) -> f64 {
    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if member(m) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Samples `(t - c1(x)) (c2(x) - t) >= 0` on `x_samples` evenly spaced
/// points of `window` for each `t`; maximal runs of member samples are the
/// components, with endpoints refined by bisection.
pub fn raster_slice_counts(c1: &Expr, c2: &Expr, window: &Interval, t_values: &[f64], x_samples: usize) -> RasterReport {
    let n = x_samples.max(MIN_X_SAMPLES);
    let xs: Vec<f64> = (0..n)
        .map(|i| window.lo() + window.width() * (i as f64 / (n - 1) as f64))
        .collect();
    let values: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| (c1.eval(x).unwrap_or(f64::NAN), c2.eval(x).unwrap_or(f64::NAN)))
        .collect();
    let levels: Vec<RasterLevel> = t_values
        .par_iter()
        .map(|&t| {
            let member = |x: f64| match (c1.eval(x), c2.eval(x)) {
                (Ok(a), Ok(b)) => (t - a) * (b - t) >= 0.0,
                _ => false,
            };
            let inside: Vec<bool> = values.iter().map(|&(a, b)| (t - a) * (b - t) >= 0.0).collect();
            let mut intervals = Vec::new();
            let mut i = 0;
            while i < n {
                if !inside[i] {
                    i += 1;
                    continue;
                }
                let s = i;
                while i + 1 < n && inside[i + 1] {
                    i += 1;
                }
                let lo = if s == 0 { xs[0] } else { refine(member, xs[s], xs[s - 1]) };
                let hi = if i == n - 1 { xs[n - 1] } else { refine(member, xs[i], xs[i + 1]) };
                intervals.push((lo, hi));
                i += 1;
            }
            RasterLevel {
                t,
                count: intervals.len(),
                intervals,
            }
        })
        .collect();
    let incidence = levels
        .windows(2)
        .enumerate()
        .map(|(k, w)| Incidence {
            lower: k,
            overlaps: w[0]
                .intervals
                .iter()
                .enumerate()
                .flat_map(|(i, a)| {
                    w[1].intervals
                        .iter()
                        .enumerate()
                        .filter(move |(_, b)| a.0 <= b.1 && b.0 <= a.1)
                        .map(move |(j, _)| (i, j))
                })
                .collect(),
        })
        .collect();
    RasterReport {
        window: *window,
        x_samples: n,
        levels,
        incidence,
    }
}

/// `n` levels spread over the graph's value range, each at least `gap` away
/// from every vertex value.
pub fn regular_levels(g: &WindowedPreDigraph, n: usize, gap: f64) -> Vec<f64> {
    let mut vals: Vec<f64> = g.vertices.iter().map(|v| v.value).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let (Some(&lo), Some(&hi)) = (vals.first(), vals.last()) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
        let k = vals.partition_point(|&v| v < t);
        let below = vals.get(k.wrapping_sub(1)).copied();
        let above = vals.get(k).copied();
        let clear = below.is_none_or(|b| t - b >= gap) && above.is_none_or(|a| a - t >= gap);
        if clear {
            out.push(t);
            continue;
        }
        // Move to the middle of the widest nearby gap between vertex values.
        let best = (k.saturating_sub(3)..(k + 3).min(vals.len() - 1))
            .map(|j| (vals[j], vals[j + 1]))
            .filter(|(a, b)| b - a >= 2.0 * gap)
            .max_by(|p, q| (p.1 - p.0).total_cmp(&(q.1 - q.0)));
        if let Some((a, b)) = best {
            out.push(0.5 * (a + b));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub t: f64,
    pub sweep: usize,
    pub oracle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub levels: Vec<LevelCheck>,
    pub count_mismatches: Vec<LevelCheck>,
    /// Consecutive sampled levels with no vertex between them where the
    /// oracle's overlap relation is not a one-to-one matching.
    pub incidence_mismatches: Vec<(f64, f64)>,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.count_mismatches.is_empty() && self.incidence_mismatches.is_empty()
    }

    pub fn fraction(&self) -> f64 {
        if self.levels.is_empty() {
            return 1.0;
        }
        1.0 - self.count_mismatches.len() as f64 / self.levels.len() as f64
    }
}

pub fn compare(g: &WindowedPreDigraph, report: &RasterReport) -> Agreement {
    let levels: Vec<LevelCheck> = report
        .levels
        .iter()
        .map(|l| LevelCheck {
            t: l.t,
            sweep: g.edges_crossing(l.t).len(),
            oracle: l.count,
        })
        .collect();
    let count_mismatches = levels.iter().filter(|c| c.sweep != c.oracle).cloned().collect();
    let mut incidence_mismatches = Vec::new();
    for inc in &report.incidence {
        let (a, b) = (&report.levels[inc.lower], &report.levels[inc.lower + 1]);
        let quiet = !g.vertices.iter().any(|v| v.value >= a.t && v.value <= b.t);
        if !quiet {
            continue;
        }
        let lower: BTreeSet<usize> = inc.overlaps.iter().map(|p| p.0).collect();
        let upper: BTreeSet<usize> = inc.overlaps.iter().map(|p| p.1).collect();
        let matching = inc.overlaps.len() == a.count
            && a.count == b.count
            && lower.len() == a.count
            && upper.len() == b.count;
        if !matching {
            incidence_mismatches.push((a.t, b.t));
        }
    }
    Agreement {
        levels,
        count_mismatches,
        incidence_mismatches,
    }
}
