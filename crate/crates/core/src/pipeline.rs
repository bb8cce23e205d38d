//! Per-window pipeline: trust clipping, separation gate, critical
//! profiles, sweep and NF re-derivation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gdnf::{GdnfError, Policy};
use crate::interval::Interval;
use crate::predigraph::{nf_points, NfError, WindowedPreDigraph};
use crate::profile::{
    find_critical_points, sab_classify, trust_window, CriticalProfile, ProfileError, SabStatus, Separation,
    DEFAULT_ROOT_TOL,
};
use crate::sweep::{build_reeb, Strip, SweepError, SweepOptions, DEFAULT_COALESCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub m: u32,
    pub root_tol: f64,
    pub coalesce: f64,
    pub policy: Policy,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            m: 2,
            root_tol: DEFAULT_ROOT_TOL,
            coalesce: DEFAULT_COALESCE,
            policy: Policy::ClusterRestricted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("c1 >= c2 at x = {x}: the strip is not separated")]
    SeparationViolation { x: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Nf(#[from] NfError),
    #[error(transparent)]
    Gdnf(#[from] GdnfError),
    #[error("no windows requested")]
    NoWindows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowAnalysis {
    pub requested: Interval,
    pub effective: Interval,
    pub separation: Separation,
    pub p1: CriticalProfile,
    pub p2: CriticalProfile,
    pub sab: SabStatus,
    pub graph: WindowedPreDigraph,
}

/// The requested window clipped to the trust regions of both functions.
pub fn effective_window(strip: &Strip, requested: &Interval) -> Interval {
    let a = trust_window(&strip.c1, requested);
    let b = trust_window(&strip.c2, requested);
    a.intersect(&b).unwrap_or(Interval::point(requested.mid()))
}

pub fn analyze_window(strip: &Strip, requested: &Interval, settings: &Settings) -> Result<WindowAnalysis, PipelineError> {
    let window = effective_window(strip, requested);
    let separation = crate::profile::verify_separation(&strip.c1, &strip.c2, &window);
    if let Separation::ViolationAt(x) = separation {
        return Err(PipelineError::SeparationViolation { x });
    }
    let (p1, p2) = rayon::join(
        || find_critical_points(&strip.c1, &window, settings.root_tol),
        || find_critical_points(&strip.c2, &window, settings.root_tol),
    );
    let p1 = p1?.with_tails(strip.tails_c1);
    let p2 = p2?.with_tails(strip.tails_c2);
    let sab = sab_classify(&strip.tails_c1, &strip.tails_c2);
    let graph = build_reeb(
        &p1,
        &p2,
        &sab,
        &window,
        &SweepOptions {
            m: settings.m,
            coalesce: settings.coalesce,
        },
    )?;
    nf_points(&graph)?;
    Ok(WindowAnalysis {
        requested: *requested,
        effective: window,
        separation,
        p1,
        p2,
        sab,
        graph,
    })
}
