use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{advance, circular_delta, circular_distance, minimal_period, recurs, MapKind};
use crate::error::{AnalysisError, MapError};
use crate::maps::{CycleRecord, MapState, ModelParams};

/// Iteration budget and thresholds for attractor classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub transient: usize,
    pub observe: usize,
    pub max_period: usize,
    /// Relative recurrence tolerance in `(i, phi)`.
    pub recurrence_tol: f64,
    /// Distance to the synchronous state counted as converged.
    pub fixed_point_tol: f64,
    /// Exponents above this are chaotic.
    pub lyapunov_threshold: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            transient: 10_000,
            observe: 100_000,
            max_period: 512,
            recurrence_tol: 1e-8,
            fixed_point_tol: 1e-9,
            lyapunov_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    FixedPoint,
    Periodic,
    Chaotic,
    Divergent,
    Undecided,
}

impl AttractorKind {
    pub fn name(self) -> &'static str {
        match self {
            AttractorKind::FixedPoint => "fixed_point",
            AttractorKind::Periodic => "periodic",
            AttractorKind::Chaotic => "chaotic",
            AttractorKind::Divergent => "divergent",
            AttractorKind::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub kind: AttractorKind,
    /// Minimal period (1 for a fixed point).
    pub period: Option<usize>,
    pub order_switches_per_period: Option<u32>,
    pub bg_spikes_per_period: Option<u32>,
    pub tones_per_period: Option<u32>,
    pub lyapunov: Option<f64>,
    pub final_state: MapState,
    /// For a fixed point: 0 or 1, the synchronous representative reached.
    pub converged_phase: Option<u8>,
    /// Tag of the step failure that ended the run, if any.
    pub termination: Option<&'static str>,
}

impl AttractorReport {
    fn bare(kind: AttractorKind, final_state: MapState) -> Self {
        Self {
            kind,
            period: None,
            order_switches_per_period: None,
            bg_spikes_per_period: None,
            tones_per_period: None,
            lyapunov: None,
            final_state,
            converged_phase: None,
            termination: None,
        }
    }
}

/// Radius around the synchronous state inside which the approach side is
/// fixed.
const CAPTURE_RADIUS: f64 = 1e-6;

#[derive(Default)]
struct Side {
    inside: bool,
    upper: bool,
}

impl Side {
    fn update(&mut self, s: &MapState, dist: f64) {
        let inside = dist < CAPTURE_RADIUS;
        if inside && !self.inside {
            self.upper = s.phi > 0.5;
        }
        self.inside = inside;
    }
}

fn failed(err: &MapError, at: MapState) -> AttractorReport {
    // a stall means the drive after the phase rule is at or below 1
    let kind = match err {
        MapError::Divergent { .. } | MapError::Stalled { .. } | MapError::EscapedDomain { .. } => {
            AttractorKind::Divergent
        }
        _ => AttractorKind::Undecided,
    };
    let mut r = AttractorReport::bare(kind, at);
    r.termination = Some(err.tag());
    r
}

/// Classify the long-run behaviour from `x0`: divergence, convergence to the
/// synchronous state, a periodic orbit (minimal period up to the budget cap),
/// positive Lyapunov exponent, or undecided.
pub fn classify_attractor(kind: MapKind, x0: MapState, p: &ModelParams, budget: &Budget) -> AttractorReport {
    let mut s = if kind == MapKind::Period1d { MapState::new(x0.i, 0.0) } else { x0 };
    let star = p.synchronous_drive();
    let dist = |s: &MapState| ((s.i - star).powi(2) + circular_distance(s.phi, 0.0).powi(2)).sqrt();
    // side of the dual origin on which the orbit last entered its neighbourhood
    let mut side = Side::default();
    side.update(&s, dist(&s));
    for _ in 0..budget.transient {
        match advance(kind, s, p) {
            Ok((next, _)) => s = next,
            Err(e) => return failed(&e, s),
        }
        side.update(&s, dist(&s));
    }

    let mut states = Vec::with_capacity(budget.observe + 1);
    let mut records: Vec<CycleRecord> = Vec::new();
    states.push(s);
    for _ in 0..budget.observe {
        match advance(kind, s, p) {
            Ok((next, rec)) => {
                s = next;
                states.push(s);
                records.extend(rec);
                side.update(&s, dist(&s));
            }
            Err(e) => return failed(&e, s),
        }
    }

    if dist(&s) < budget.fixed_point_tol {
        let mut r = AttractorReport::bare(AttractorKind::FixedPoint, s);
        r.period = Some(1);
        r.bg_spikes_per_period = Some(1);
        r.tones_per_period = Some(1);
        r.order_switches_per_period = Some(0);
        r.converged_phase = Some(u8::from(side.upper));
        return r;
    }

    if let Some(k) = minimal_period(&states, budget.max_period, |a, b| recurs(a, b, budget.recurrence_tol)) {
        let mut r = AttractorReport::bare(AttractorKind::Periodic, s);
        r.period = Some(k);
        r.bg_spikes_per_period = Some(k as u32);
        if records.is_empty() {
            r.tones_per_period = Some(k as u32);
            r.order_switches_per_period = Some(0);
        } else {
            let last = &records[records.len() - k..];
            r.tones_per_period = Some(last.iter().map(|c| c.tones_in_cycle).sum());
            r.order_switches_per_period = Some(last.iter().filter(|c| c.order_switch).count() as u32);
        }
        return r;
    }

    match lyapunov_exponent(kind, s, p, budget.observe) {
        Ok(est) => {
            let k = if est.exponent > budget.lyapunov_threshold {
                AttractorKind::Chaotic
            } else {
                AttractorKind::Undecided
            };
            let mut r = AttractorReport::bare(k, s);
            r.lyapunov = Some(est.exponent);
            r
        }
        Err(AnalysisError::LeftDomain { reason, .. }) => failed(&reason, s),
        Err(_) => AttractorReport::bare(AttractorKind::Undecided, s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Mean log growth per iterate over the smooth steps.
    pub exponent: f64,
    pub smooth_steps: usize,
    pub excluded_steps: usize,
}

/// Initial and renormalized separation of the shadow trajectory.
const SEPARATION: f64 = 1e-9;

fn shadow_of(kind: MapKind, s: MapState, dir: (f64, f64)) -> MapState {
    match kind {
        MapKind::Period1d => MapState::new(s.i + SEPARATION * dir.0.signum(), 0.0),
        MapKind::OrderPreserving => MapState::new(s.i + SEPARATION * dir.0, s.phi + SEPARATION * dir.1),
        MapKind::Oieb => {
            let mut phi = (s.phi + SEPARATION * dir.1).rem_euclid(1.0);
            if phi >= 1.0 {
                phi = 0.0;
            }
            MapState::new(s.i + SEPARATION * dir.0, phi)
        }
    }
}

/// Largest Lyapunov exponent by the renormalized two-trajectory method.
///
/// Steps where the reference and shadow fall on different sides of a
/// discontinuity (the phase-rule sign switch at 1/2, a different tone count,
/// or a shadow step that fails) are left out of the average and the shadow is
/// re-seeded along the previous direction.
pub fn lyapunov_exponent(
    kind: MapKind,
    x0: MapState,
    p: &ModelParams,
    n: usize,
) -> Result<LyapunovEstimate, AnalysisError> {
    let mut dir = match kind {
        MapKind::Period1d => (1.0, 0.0),
        _ => (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    };
    let mut x = if kind == MapKind::Period1d { MapState::new(x0.i, 0.0) } else { x0 };
    let mut sum = 0.0;
    let (mut used, mut excluded) = (0usize, 0usize);
    for step in 0..n {
        let y = shadow_of(kind, x, dir);
        let (xn, xr) = advance(kind, x, p).map_err(|reason| AnalysisError::LeftDomain { step, reason })?;
        let straddles = kind != MapKind::Period1d && (x.phi < 0.5) != (y.phi < 0.5);
        match advance(kind, y, p) {
            Ok((yn, yr)) if !straddles && tones(&xr) == tones(&yr) => {
                let di = yn.i - xn.i;
                let dphi = match kind {
                    MapKind::Period1d => 0.0,
                    MapKind::OrderPreserving => yn.phi - xn.phi,
                    MapKind::Oieb => circular_delta(xn.phi, yn.phi),
                };
                let d = (di * di + dphi * dphi).sqrt().max(f64::MIN_POSITIVE);
                sum += (d / SEPARATION).ln();
                used += 1;
                if d > f64::MIN_POSITIVE {
                    dir = (di / d, dphi / d);
                }
            }
            _ => excluded += 1,
        }
        x = xn;
    }
    if used == 0 || excluded * 2 > n {
        return Err(AnalysisError::InsufficientSmoothSamples { usable: used, total: n });
    }
    Ok(LyapunovEstimate { exponent: sum / used as f64, smooth_steps: used, excluded_steps: excluded })
}

fn tones(r: &Option<CycleRecord>) -> Option<u32> {
    r.map(|c| c.tones_in_cycle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinCell {
    pub i0: f64,
    pub phi0: f64,
    pub kind: AttractorKind,
    pub period: Option<usize>,
    pub converged_phase: Option<u8>,
}

/// Classify every initial condition of an `ni x nphi` grid (cell centres,
/// phase fastest).
pub fn basin_scan(
    kind: MapKind,
    i_range: (f64, f64),
    phi_range: (f64, f64),
    ni: usize,
    nphi: usize,
    p: &ModelParams,
    budget: &Budget,
) -> Vec<BasinCell> {
    (0..ni * nphi)
        .into_par_iter()
        .map(|k| {
            let (ip, ii) = (k % nphi, k / nphi);
            let i0 = i_range.0 + (ii as f64 + 0.5) / ni as f64 * (i_range.1 - i_range.0);
            let phi0 = phi_range.0 + (ip as f64 + 0.5) / nphi as f64 * (phi_range.1 - phi_range.0);
            let r = classify_attractor(kind, MapState::new(i0, phi0), p, budget);
            BasinCell { i0, phi0, kind: r.kind, period: r.period, converged_phase: r.converged_phase }
        })
        .collect()
}
