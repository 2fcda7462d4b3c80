//! Long-run behaviour of the maps: trajectories, attractor classification,
//! Lyapunov exponents, basin grids, 1D bifurcation diagrams and
//! period-doubling cascades.

mod attractor;
mod cascade;

pub use attractor::{
    basin_scan, classify_attractor, lyapunov_exponent, AttractorKind, AttractorReport, BasinCell, Budget,
    LyapunovEstimate,
};
pub use cascade::{
    bifurcation_scan_1d, detect_period, feigenbaum_ratios, BifurcationColumn, CascadeReport, Family1d,
    LogisticFamily, PeriodBudget, PeriodDetection, PeriodMapFamily,
};

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::maps::{step_oieb, step_order_preserving, step_period_map, CycleRecord, MapState, ModelParams};

/// Iterates at or below this drive count as divergent.
pub const DIVERGENCE_FLOOR: f64 = 1.0 + 1e-12;
/// Iterates above this drive count as divergent.
pub const DIVERGENCE_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// One-dimensional period correction; the phase is carried as 0.
    Period1d,
    OrderPreserving,
    Oieb,
}

/// One application of the chosen map. Only the event-based map reports a
/// cycle record.
pub fn advance(kind: MapKind, s: MapState, p: &ModelParams) -> Result<(MapState, Option<CycleRecord>), MapError> {
    let (next, rec) = match kind {
        MapKind::Period1d => (MapState::new(step_period_map(s.i, p)?, 0.0), None),
        MapKind::OrderPreserving => (step_order_preserving(s, p)?, None),
        MapKind::Oieb => {
            let (n, r) = step_oieb(s, p)?;
            (n, Some(r))
        }
    };
    if next.i <= DIVERGENCE_FLOOR || next.i > DIVERGENCE_CEILING {
        return Err(MapError::Divergent { i: next.i });
    }
    Ok((next, rec))
}

/// Why an iteration stopped before its requested length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Termination {
    /// Index of the step that failed (0-based).
    pub step: usize,
    pub reason: String,
    pub tag: &'static str,
    #[serde(skip)]
    pub error: MapError,
}

impl Termination {
    pub(crate) fn new(step: usize, error: MapError) -> Self {
        Self { step, reason: error.to_string(), tag: error.tag(), error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub kind: MapKind,
    /// `states[0]` is the initial state.
    pub states: Vec<MapState>,
    /// `records[n]` describes the cycle from `states[n]` to `states[n + 1]`
    /// (event-based map only).
    pub records: Vec<CycleRecord>,
    pub termination: Option<Termination>,
}

/// Run `n` steps of a map, stopping early on the first failed step.
pub fn iterate(kind: MapKind, x0: MapState, p: &ModelParams, n: usize) -> Trajectory {
    let mut states = Vec::with_capacity(n + 1);
    let mut records = Vec::new();
    let mut s = if kind == MapKind::Period1d { MapState::new(x0.i, 0.0) } else { x0 };
    states.push(s);
    let mut termination = None;
    for step in 0..n {
        match advance(kind, s, p) {
            Ok((next, rec)) => {
                s = next;
                states.push(s);
                records.extend(rec);
            }
            Err(e) => {
                termination = Some(Termination::new(step, e));
                break;
            }
        }
    }
    Trajectory { kind, states, records, termination }
}

/// Iterates of the period map from `i0` until `|i - I*| < tol`; `None` if
/// that does not happen within `max_steps` or the orbit leaves the domain.
pub fn convergence_iterations(i0: f64, p: &ModelParams, tol: f64, max_steps: usize) -> Option<usize> {
    let target = p.synchronous_drive();
    let mut i = i0;
    for n in 0..=max_steps {
        if (i - target).abs() < tol {
            return Some(n);
        }
        i = step_period_map(i, p).ok()?;
    }
    None
}

/// Distance between phases on the circle `[0, 1)`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Signed circular difference `b - a` in `[-1/2, 1/2]`.
pub(crate) fn circular_delta(a: f64, b: f64) -> f64 {
    let mut d = b - a;
    if d > 0.5 {
        d -= 1.0;
    } else if d < -0.5 {
        d += 1.0;
    }
    d
}

/// Recurrence test used by period detection: relative in the drive, circular
/// in the phase.
pub(crate) fn recurs(a: &MapState, b: &MapState, tol: f64) -> bool {
    (a.i - b.i).abs() <= tol * a.i.abs().max(b.i.abs()) && circular_distance(a.phi, b.phi) <= tol
}

/// Smallest `k <= max_period` such that the tail of `seq` repeats with
/// period `k` over two full periods.
pub(crate) fn minimal_period<T, F>(seq: &[T], max_period: usize, close: F) -> Option<usize>
where
    F: Fn(&T, &T) -> bool,
{
    let n = seq.len();
    (1..=max_period).find(|&k| {
        let span = 2 * k;
        n > span + k && (0..span).all(|j| close(&seq[n - 1 - j], &seq[n - 1 - j - k]))
    })
}
