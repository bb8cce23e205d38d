//! Critical structure of a boundary function, strict separation of the
//! pair, declared tail behaviour and its numerical sanity probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalFault, Expr};
use crate::interval::Interval;

/// Phase arguments above this lose sub-1e-3 resolution in binary64.
pub const PHASE_LIMIT: f64 = 4.5e12;
pub const OSCILLATORY_SEEDS_PER_UNIT: f64 = 4096.0;
pub const SMOOTH_SEEDS_PER_UNIT: f64 = 64.0;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
const SEPARATION_DEPTH: u32 = 30;
const SEPARATION_SAMPLES: usize = 100_000;
const PROBE_RADIUS: f64 = 64.0;
const PROBE_ANNULI: usize = 10;
const PROBE_TREND: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum End {
    NegInf,
    PosInf,
}

impl End {
    pub fn sign(self) -> f64 {
        match self {
            End::NegInf => -1.0,
            End::PosInf => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Limit {
    Converge(f64),
    DivergeMinus,
    DivergePlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalTail {
    Finite,
    AccumulatingFromAbove,
    AccumulatingFromBelow,
    AccumulatingBothSides,
}

impl CriticalTail {
    pub fn is_accumulating(self) -> bool {
        self != CriticalTail::Finite
    }

    /// Whether critical values accumulate strictly above (`true`) or below the limit.
    pub fn accumulates_on(self, above: bool) -> bool {
        match self {
            CriticalTail::Finite => false,
            CriticalTail::AccumulatingFromAbove => above,
            CriticalTail::AccumulatingFromBelow => !above,
            CriticalTail::AccumulatingBothSides => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDescriptor {
    pub end: End,
    pub limit: Limit,
    pub critical_tail: CriticalTail,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("window {window} exceeds the trust region {trusted}")]
    ExceedsTrustRegion { window: Interval, trusted: Interval },
    #[error("derivative sign pattern inconsistent near x = {x}")]
    InconsistentSignPattern { x: f64 },
    #[error("accumulating critical values require a finite limit ({end:?})")]
    AccumulatingWithoutLimit { end: End },
    #[error("tail descriptors must cover each end exactly once")]
    MissingEnd,
    #[error(transparent)]
    Eval(#[from] EvalFault),
}

impl TailDescriptor {
    pub fn new(end: End, limit: Limit, critical_tail: CriticalTail) -> Result<Self, ProfileError> {
        let d = TailDescriptor {
            end,
            limit,
            critical_tail,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.critical_tail.is_accumulating() && !matches!(self.limit, Limit::Converge(_)) {
            return Err(ProfileError::AccumulatingWithoutLimit { end: self.end });
        }
        Ok(())
    }

    pub fn limit_value(&self) -> Option<f64> {
        match self.limit {
            Limit::Converge(a) => Some(a),
            _ => None,
        }
    }
}

/// Descriptors for one function ordered `[NegInf, PosInf]`.
pub fn order_tails(tails: &[TailDescriptor]) -> Result<[TailDescriptor; 2], ProfileError> {
    let find = |end| {
        let mut it = tails.iter().filter(|d| d.end == end);
        match (it.next(), it.next()) {
            (Some(d), None) => Ok(*d),
            _ => Err(ProfileError::MissingEnd),
        }
    };
    let out = [find(End::NegInf)?, find(End::PosInf)?];
    for d in &out {
        d.validate()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    LocalMin,
    LocalMax,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub value: f64,
    pub kind: CriticalKind,
    /// Isolating bracket of the derivative root.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalProfile {
    pub function: Expr,
    pub window: Interval,
    pub critical_points: Vec<CriticalPoint>,
    pub constant_value: Option<f64>,
    pub tails: Option<[TailDescriptor; 2]>,
}

impl CriticalProfile {
    pub fn is_constant(&self) -> bool {
        self.constant_value.is_some()
    }

    pub fn with_tails(mut self, tails: [TailDescriptor; 2]) -> Self {
        self.tails = Some(tails);
        self
    }

    pub fn tail(&self, end: End) -> Option<&TailDescriptor> {
        self.tails.as_ref().map(|t| &t[end as usize])
    }
}

pub fn seeds_per_unit(f: &Expr) -> f64 {
    if f.is_oscillatory() {
        OSCILLATORY_SEEDS_PER_UNIT
    } else {
        SMOOTH_SEEDS_PER_UNIT
    }
}

/// Largest phase rate the oscillatory seed grid resolves (eight seeds per half-turn).
pub fn max_phase_rate() -> f64 {
    std::f64::consts::PI * OSCILLATORY_SEEDS_PER_UNIT / 8.0
}

/// The part of `requested` around its centre where every phase argument `g`
/// of `f` satisfies `|g| <= PHASE_LIMIT` and `|g'| <= max_phase_rate()`.
///
/// Scans outward from the centre on each side at seed spacing; the result
/// always contains the centre.
pub fn trust_window(f: &Expr, requested: &Interval) -> Interval {
    let phases: Vec<(Expr, Expr)> = f
        .phase_args()
        .into_iter()
        .filter(|g| !g.is_constant())
        .map(|g| (g.clone(), g.differentiate()))
        .collect();
    if phases.is_empty() {
        return *requested;
    }
    let ok = |x: f64| {
        phases.iter().all(|(g, dg)| match (g.eval(x), dg.eval(x)) {
            (Ok(v), Ok(dv)) => v.abs() <= PHASE_LIMIT && dv.abs() <= max_phase_rate(),
            _ => false,
        })
    };
    let c = requested.mid();
    let h = 1.0 / OSCILLATORY_SEEDS_PER_UNIT;
    let scan = |dir: f64, limit: f64| {
        let n = ((limit - c).abs() / h).floor() as usize;
        let mut last = c;
        for i in 1..=n {
            let x = c + dir * i as f64 * h;
            if !ok(x) {
                return last;
            }
            last = x;
        }
        if ok(limit) {
            limit
        } else {
            last
        }
    };
    let lo = scan(-1.0, requested.lo());
    let hi = scan(1.0, requested.hi());
    Interval::new(lo, hi).unwrap_or(Interval::point(c))
}

/// Isolates the zeros of `f'` on `window` by sign changes over a seed grid,
/// refined by bisection to `tol`.
pub fn find_critical_points(f: &Expr, window: &Interval, tol: f64) -> Result<CriticalProfile, ProfileError> {
    let trusted = trust_window(f, window);
    if trusted != *window {
        return Err(ProfileError::ExceedsTrustRegion {
            window: *window,
            trusted,
        });
    }
    let constant = |value| CriticalProfile {
        function: f.clone(),
        window: *window,
        critical_points: Vec::new(),
        constant_value: Some(value),
        tails: None,
    };
    if f.is_constant() {
        return Ok(constant(f.eval(window.mid())?));
    }
    let d = f.differentiate();
    let n = ((window.width() * seeds_per_unit(f)).ceil() as usize).max(2);
    let xs: Vec<f64> = (0..=n)
        .map(|i| {
            if i == n {
                window.hi()
            } else {
                window.lo() + window.width() * (i as f64 / n as f64)
            }
        })
        .collect();
    let ds: Vec<f64> = xs
        .par_iter()
        .map(|&x| d.eval(x))
        .collect::<Result<_, _>>()?;
    if ds.iter().all(|&v| v == 0.0) {
        return Ok(constant(f.eval(window.mid())?));
    }

    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let (a, b) = (xs[i], xs[i + 1]);
        let (da, db) = (ds[i], ds[i + 1]);
        if da != 0.0 && db != 0.0 && (da < 0.0) != (db < 0.0) {
            let (x, bracket) = bisect(&d, a, b, da, tol)?;
            let kind = if da > 0.0 {
                CriticalKind::LocalMax
            } else {
                CriticalKind::LocalMin
            };
            points.push(CriticalPoint {
                x,
                value: f.eval(x)?,
                kind,
                bracket,
            });
            i += 1;
        } else if db == 0.0 && i + 1 < n {
            // Run of exact zeros starting at seed i+1.
            let start = i + 1;
            let mut end = start;
            while end < n && ds[end + 1] == 0.0 {
                end += 1;
            }
            if end < n {
                let before = ds[i];
                let after = ds[end + 1];
                let x = 0.5 * (xs[start] + xs[end]);
                let kind = match (before > 0.0, after > 0.0) {
                    _ if before == 0.0 => CriticalKind::Degenerate,
                    (true, false) => CriticalKind::LocalMax,
                    (false, true) => CriticalKind::LocalMin,
                    _ => CriticalKind::Degenerate,
                };
                points.push(CriticalPoint {
                    x,
                    value: f.eval(x)?,
                    kind,
                    bracket: (xs[start], xs[end]),
                });
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }

    let mut last: Option<CriticalKind> = None;
    for p in &points {
        if p.kind == CriticalKind::Degenerate {
            continue;
        }
        if last == Some(p.kind) {
            return Err(ProfileError::InconsistentSignPattern { x: p.x });
        }
        last = Some(p.kind);
    }
    Ok(CriticalProfile {
        function: f.clone(),
        window: *window,
        critical_points: points,
        constant_value: None,
        tails: None,
    })
}

fn bisect(d: &Expr, mut a: f64, mut b: f64, da: f64, tol: f64) -> Result<(f64, (f64, f64)), EvalFault> {
    let neg_a = da < 0.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let dm = d.eval(m)?;
        if dm == 0.0 {
            return Ok((m, (a, b)));
        }
        if (dm < 0.0) == neg_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), (a, b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Separation {
    Verified { sampled_only: bool },
    ViolationAt(f64),
}

/// Proves `c2 - c1 > 0` on `window` by adaptive interval bisection, with a
/// dense sampling fallback for cells the enclosure cannot decide.
pub fn verify_separation(c1: &Expr, c2: &Expr, window: &Interval) -> Separation {
    let gap = expr::sub(c2.clone(), c1.clone());
    let witness = |x: f64| match (c1.eval(x), c2.eval(x)) {
        (Ok(a), Ok(b)) => a >= b,
        _ => false,
    };
    let mut stack = vec![(*window, 0u32)];
    let mut undecided = false;
    while let Some((cell, depth)) = stack.pop() {
        if let Ok(r) = gap.eval_interval(&cell) {
            if r.lo() > 0.0 {
                continue;
            }
        }
        let m = cell.mid();
        if witness(m) {
            return Separation::ViolationAt(m);
        }
        if depth >= SEPARATION_DEPTH {
            undecided = true;
            continue;
        }
        let (l, r) = cell.split();
        stack.push((r, depth + 1));
        stack.push((l, depth + 1));
    }
    if !undecided {
        return Separation::Verified { sampled_only: false };
    }
    let n = SEPARATION_SAMPLES;
    let hit = (0..=n)
        .into_par_iter()
        .map(|i| window.lo() + window.width() * (i as f64 / n as f64))
        .find_first(|&x| witness(x));
    match hit {
        Some(x) => Separation::ViolationAt(x),
        None => Separation::Verified { sampled_only: true },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SabEnd {
    SameLimit(f64),
    BothDivergeMinus,
    BothDivergePlus,
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabStatus {
    pub neg_inf: SabEnd,
    pub pos_inf: SabEnd,
}

impl SabStatus {
    pub fn is_sab(&self) -> bool {
        self.neg_inf != SabEnd::Mismatch && self.pos_inf != SabEnd::Mismatch
    }

    pub fn at(&self, end: End) -> SabEnd {
        match end {
            End::NegInf => self.neg_inf,
            End::PosInf => self.pos_inf,
        }
    }
}

pub fn sab_classify(tails_c1: &[TailDescriptor; 2], tails_c2: &[TailDescriptor; 2]) -> SabStatus {
    let at = |end: End| {
        let a = tails_c1.iter().find(|d| d.end == end).map(|d| d.limit);
        let b = tails_c2.iter().find(|d| d.end == end).map(|d| d.limit);
        match (a, b) {
            (Some(Limit::Converge(p)), Some(Limit::Converge(q))) if p == q => SabEnd::SameLimit(p),
            (Some(Limit::DivergeMinus), Some(Limit::DivergeMinus)) => SabEnd::BothDivergeMinus,
            (Some(Limit::DivergePlus), Some(Limit::DivergePlus)) => SabEnd::BothDivergePlus,
            _ => SabEnd::Mismatch,
        }
    };
    SabStatus {
        neg_inf: at(End::NegInf),
        pos_inf: at(End::PosInf),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TailProbe {
    Consistent,
    Suspect(String),
}

fn short(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

/// Samples `f` over geometric annuli toward `d.end`, out to the edge of
/// the trust region, and checks the declared behaviour against the trend.
pub fn probe_tail(f: &Expr, d: &TailDescriptor) -> TailProbe {
    let s = d.end.sign();
    let reach = trust_window(f, &Interval::new(-PROBE_RADIUS, PROBE_RADIUS).expect("static bounds"));
    let edge = match d.end {
        End::NegInf => -reach.lo(),
        End::PosInf => reach.hi(),
    };
    if edge <= 0.0 {
        return TailProbe::Suspect("no trusted samples toward this end".into());
    }
    let q = 2f64.powf(1.0 / PROBE_ANNULI as f64);
    let radii: Vec<f64> = (0..=PROBE_ANNULI)
        .map(|j| edge * q.powi(j as i32 - PROBE_ANNULI as i32))
        .collect();
    let rho = seeds_per_unit(f);
    let deriv = f.differentiate();

    struct Annulus {
        sup_dev: f64,
        min: f64,
        max: f64,
        sign_changes: usize,
        crit_values: Vec<f64>,
    }
    let limit = d.limit_value();
    let mut annuli = Vec::with_capacity(PROBE_ANNULI);
    for j in 0..PROBE_ANNULI {
        let (r0, r1) = (radii[j], radii[j + 1]);
        let n = (((r1 - r0) * rho).ceil() as usize).max(256);
        let xs: Vec<f64> = (0..=n).map(|i| s * (r0 + (r1 - r0) * i as f64 / n as f64)).collect();
        let fv: Vec<Option<f64>> = xs.iter().map(|&x| f.eval(x).ok()).collect();
        let dv: Vec<Option<f64>> = xs.iter().map(|&x| deriv.eval(x).ok()).collect();
        if fv.iter().any(Option::is_none) || dv.iter().any(Option::is_none) {
            return TailProbe::Suspect(format!("evaluation fault within |x| <= {}", short(r1)));
        }
        let fv: Vec<f64> = fv.into_iter().flatten().collect();
        let dv: Vec<f64> = dv.into_iter().flatten().collect();
        let mut sign_changes = 0;
        let mut crit_values = Vec::new();
        let mut prev: Option<(usize, bool)> = None;
        for (i, &v) in dv.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if let Some((pi, ps)) = prev {
                if ps != (v > 0.0) {
                    sign_changes += 1;
                    crit_values.push(fv[pi..=i].iter().copied().fold(
                        if ps { f64::NEG_INFINITY } else { f64::INFINITY },
                        |a, b| if ps { a.max(b) } else { a.min(b) },
                    ));
                }
            }
            prev = Some((i, v > 0.0));
        }
        annuli.push(Annulus {
            sup_dev: limit.map_or(0.0, |a| fv.iter().map(|v| (v - a).abs()).fold(0.0, f64::max)),
            min: fv.iter().copied().fold(f64::INFINITY, f64::min),
            max: fv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sign_changes,
            crit_values,
        });
    }
    let tail = &annuli[PROBE_ANNULI - PROBE_TREND..];
    let outer = f.eval(s * edge).unwrap_or(f64::NAN);

    match d.limit {
        Limit::Converge(a) => {
            // The running envelope of |f - a| may not set a new record outward.
            let head = &annuli[..PROBE_ANNULI - PROBE_TREND];
            let mut record = head.iter().map(|a| a.sup_dev).fold(0.0, f64::max);
            let mut rising = false;
            for t in tail {
                rising |= t.sup_dev > record * (1.0 + 1e-12) + 1e-15;
                record = record.max(t.sup_dev);
            }
            if rising {
                return TailProbe::Suspect(format!("limit trend {} ≠ {}", short(outer), short(a)));
            }
        }
        Limit::DivergePlus => {
            if tail.windows(2).any(|w| w[1].min < w[0].min) {
                return TailProbe::Suspect(format!("limit trend {} ≠ +inf", short(outer)));
            }
        }
        Limit::DivergeMinus => {
            if tail.windows(2).any(|w| w[1].max > w[0].max) {
                return TailProbe::Suspect(format!("limit trend {} ≠ -inf", short(outer)));
            }
        }
    }
    if d.critical_tail.is_accumulating() {
        let a = limit.unwrap_or(0.0);
        if tail.windows(2).any(|w| w[1].sign_changes < w[0].sign_changes)
            || tail.last().map_or(0, |t| t.sign_changes) == 0
        {
            return TailProbe::Suspect("critical points do not accumulate toward this end".into());
        }
        let last = tail.last().expect("nonempty");
        let above = last.crit_values.iter().any(|&v| v > a);
        let below = last.crit_values.iter().any(|&v| v < a);
        let side_ok = match d.critical_tail {
            CriticalTail::AccumulatingFromAbove => above && !below,
            CriticalTail::AccumulatingFromBelow => below && !above,
            _ => true,
        };
        if !side_ok {
            return TailProbe::Suspect(format!(
                "critical values near the limit {} lie on the undeclared side",
                short(a)
            ));
        }
    }
    TailProbe::Consistent
}
