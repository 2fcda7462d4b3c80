//! Closed-form LIF quantities and the three error-correction map steps.
//!
//! The beat generator is the leaky integrate-and-fire oscillator
//! `v' = (I - v) / tau` with threshold 1 and reset to 0. Between events the
//! drive `I` is constant, so every quantity below is an exact closed form.
//!
//! * [`step_period_map`]: one-dimensional period correction.
//! * [`step_order_preserving`]: two-dimensional map assuming strict
//!   spike/tone alternation.
//! * [`step_oieb`]: order-indeterminant map, which decides per cycle whether a
//!   tone occurs and wraps the phase modulo 1.

use serde::{Deserialize, Serialize};

use crate::error::MapError;

/// Phase window (in units of the stimulus period) inside which a tone and a
/// spike are treated as coincident. Rounding in `T(I*)` is a few ulps of the
/// period, far below this.
pub const COINCIDENCE_PHASE: f64 = 1e-12;

pub type MapResult<T> = Result<T, MapError>;

/// The four parameters governing every map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Membrane time constant (ms).
    pub tau: f64,
    /// Stimulus inter-onset interval (ms).
    pub t_stim: f64,
    /// Period-rule strength (drive units per ms).
    pub delta_t: f64,
    /// Phase-rule strength (drive units).
    pub delta_phi: f64,
}

impl ModelParams {
    pub fn new(tau: f64, t_stim: f64, delta_t: f64, delta_phi: f64) -> MapResult<Self> {
        let p = Self { tau, t_stim, delta_t, delta_phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> MapResult<()> {
        let ok = |x: f64| x.is_finite();
        if !(ok(self.tau) && self.tau > 0.0) {
            return Err(MapError::InvalidParams(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(ok(self.t_stim) && self.t_stim > 0.0) {
            return Err(MapError::InvalidParams(format!("t_stim must be > 0, got {}", self.t_stim)));
        }
        if !(ok(self.delta_t) && self.delta_t >= 0.0) {
            return Err(MapError::InvalidParams(format!("delta_t must be >= 0, got {}", self.delta_t)));
        }
        if !(ok(self.delta_phi) && self.delta_phi >= 0.0) {
            return Err(MapError::InvalidParams(format!(
                "delta_phi must be >= 0, got {}",
                self.delta_phi
            )));
        }
        Ok(())
    }

    /// Same oscillator and stimulus, different rule strengths.
    pub fn with_rules(self, delta_t: f64, delta_phi: f64) -> Self {
        Self { delta_t, delta_phi, ..self }
    }

    pub fn with_t_stim(self, t_stim: f64) -> Self {
        Self { t_stim, ..self }
    }

    /// Drive whose free-running period equals the stimulus period.
    pub fn synchronous_drive(&self) -> f64 {
        -1.0 / (-self.t_stim / self.tau).exp_m1()
    }
}

/// State of the two-dimensional maps at the start of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapState {
    pub i: f64,
    pub phi: f64,
}

impl MapState {
    pub fn new(i: f64, phi: f64) -> Self {
        Self { i, phi }
    }

    /// The synchronous fixed point `(I*, 0)`.
    pub fn synchronous(p: &ModelParams) -> Self {
        Self { i: p.synchronous_drive(), phi: 0.0 }
    }
}

/// Bookkeeping for one beat-generator cycle (spike to spike).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub tones_in_cycle: u32,
    /// Drive after the phase correction (equal to the starting drive when no
    /// correction happened).
    pub i_temp: f64,
    /// Realized spike-to-spike interval (ms).
    pub t_n: f64,
    pub order_switch: bool,
}

impl CycleRecord {
    pub fn new(tones_in_cycle: u32, i_temp: f64, t_n: f64) -> Self {
        Self { tones_in_cycle, i_temp, t_n, order_switch: tones_in_cycle != 1 }
    }
}

fn check_drive(i: f64) -> MapResult<()> {
    if i > 1.0 {
        Ok(())
    } else {
        Err(MapError::NoOscillation { i })
    }
}

fn check_phase(phi: f64) -> MapResult<()> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(MapError::PhaseOutOfRange { phi })
    }
}

/// Sign with `sgn(0) = 0`.
fn sign3(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Free-running period `T(I) = tau ln(I / (I - 1))`.
pub fn period_of_drive(i: f64, p: &ModelParams) -> MapResult<f64> {
    check_drive(i)?;
    Ok(p.tau * (1.0 / (i - 1.0)).ln_1p())
}

/// Inverse of [`period_of_drive`]: `I(T) = 1 / (1 - e^{-T/tau})`.
pub fn drive_of_period(t: f64, p: &ModelParams) -> MapResult<f64> {
    if !(t > 0.0) {
        return Err(MapError::NonPositivePeriod { t });
    }
    Ok(-1.0 / (-t / p.tau).exp_m1())
}

/// One step of the period-correction map
/// `f(I) = I + delta_T [T(I) - T_stim]`.
///
/// Returns [`MapError::EscapedDomain`] when the image is not above 1.
pub fn step_period_map(i: f64, p: &ModelParams) -> MapResult<f64> {
    let next = i + p.delta_t * (period_of_drive(i, p)? - p.t_stim);
    if next > 1.0 {
        Ok(next)
    } else {
        Err(MapError::EscapedDomain { i: next })
    }
}

/// `f'(I) = 1 - delta_T tau / (I (I - 1))`.
pub fn derivative_period_map(i: f64, p: &ModelParams) -> MapResult<f64> {
    check_drive(i)?;
    Ok(1.0 - p.delta_t * p.tau / (i * (i - 1.0)))
}

/// Location of the local minimum of the period map,
/// `(1 + sqrt(1 + 4 tau delta_T)) / 2`.
pub fn period_map_local_min(p: &ModelParams) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * p.tau * p.delta_t).sqrt())
}

/// Phase-rule drive increment `sgn(phi - 1/2) phi (1 - phi)`.
pub fn phase_increment(phi: f64) -> MapResult<f64> {
    check_phase(phi)?;
    Ok(phase_increment_unchecked(phi))
}

fn phase_increment_unchecked(phi: f64) -> f64 {
    sign3(phi - 0.5) * phi * (1.0 - phi)
}

/// Membrane value when the tone arrives `phi T_stim` after the spike.
pub fn voltage_at_tone(s: MapState, p: &ModelParams) -> MapResult<f64> {
    check_drive(s.i)?;
    check_phase(s.phi)?;
    let period = period_of_drive(s.i, p)?;
    let tone_offset = p.t_stim * s.phi;
    if period < tone_offset {
        return Err(MapError::AlreadyFired { period, tone_offset });
    }
    Ok(s.i * (1.0 - (-tone_offset / p.tau).exp()))
}

/// Spike-to-spike interval of a cycle whose first tone arrives at phase
/// `phi`, including the phase correction applied at that tone.
pub fn cycle_period(s: MapState, p: &ModelParams) -> MapResult<f64> {
    let v = voltage_at_tone(s, p)?;
    Ok(tone_locked_cycle(s.i, s.phi, v, p)?.1)
}

/// Returns `(effective drive, cycle period)` for a cycle with a tone at `phi`
/// and membrane value `v` at that tone.
fn tone_locked_cycle(i: f64, phi: f64, v: f64, p: &ModelParams) -> MapResult<(f64, f64)> {
    let drive = i + p.delta_phi * phase_increment_unchecked(phi);
    if !(drive > 1.0) || !(drive > v) {
        return Err(MapError::Stalled { drive, voltage: v });
    }
    let period = phi * p.t_stim + p.tau * ((drive - v) / (drive - 1.0)).ln();
    Ok((drive, period))
}

/// `(F1, F2)` of the order-preserving map evaluated by formula, without the
/// phase-range and event-order checks. This is the analytic extension of the
/// map across `phi = 0` and `phi = 1`, used for differentiating at the fixed
/// points.
pub fn order_preserving_extended(i: f64, phi: f64, p: &ModelParams) -> MapResult<(f64, f64)> {
    check_drive(i)?;
    let v = i * (1.0 - (-p.t_stim * phi / p.tau).exp());
    let (drive, t_n) = tone_locked_cycle(i, phi, v, p)?;
    Ok((drive + p.delta_t * (t_n - p.t_stim), phi + (p.t_stim - t_n) / p.t_stim))
}

/// One step of the order-preserving two-dimensional map.
///
/// No modulo is applied to the phase. A returned phase outside `[0, 1]` is
/// reported as [`MapError::OrderViolated`] carrying the computed state, since
/// that cycle did not alternate spike and tone.
pub fn step_order_preserving(s: MapState, p: &ModelParams) -> MapResult<MapState> {
    let t_n = cycle_period(s, p)?;
    let drive = s.i + p.delta_phi * phase_increment_unchecked(s.phi);
    let next = MapState {
        i: drive + p.delta_t * (t_n - p.t_stim),
        phi: s.phi + (p.t_stim - t_n) / p.t_stim,
    };
    if !(next.i > 1.0) {
        return Err(MapError::Divergent { i: next.i });
    }
    if !(0.0..=1.0).contains(&next.phi) {
        return Err(MapError::OrderViolated { next });
    }
    Ok(next)
}

/// Whether a tone falls inside the cycle starting at `s`: `T(I) >= T_stim phi`
/// with equality counted as inside.
pub fn tone_in_cycle(s: MapState, p: &ModelParams) -> MapResult<bool> {
    Ok(period_of_drive(s.i, p)? >= p.t_stim * s.phi)
}

/// Reduce a pre-modulo phase to `[0, 1)`, snapping values within
/// [`COINCIDENCE_PHASE`] below an integer up to it. Returns the reduced phase
/// and the integer that was subtracted.
pub(crate) fn wrap_phase(raw: f64) -> (f64, f64) {
    let whole = (raw + COINCIDENCE_PHASE).floor();
    ((raw - whole).max(0.0), whole)
}

/// One step of the order-indeterminant event-based map.
///
/// When a tone falls inside the cycle the phase rule fires once at the first
/// tone and the cycle period follows from the tone-to-spike time; otherwise the
/// cycle is a free-running period `T(I)`. The period rule always fires at the
/// closing spike, then the phase is wrapped modulo 1.
pub fn step_oieb(s: MapState, p: &ModelParams) -> MapResult<(MapState, CycleRecord)> {
    check_drive(s.i)?;
    if !(0.0..1.0).contains(&s.phi) {
        return Err(MapError::PhaseOutOfRange { phi: s.phi });
    }
    let free_period = period_of_drive(s.i, p)?;
    let tone_offset = p.t_stim * s.phi;
    let (drive, t_n, tone_seen) = if free_period >= tone_offset {
        let v = s.i * (1.0 - (-tone_offset / p.tau).exp());
        let (drive, t_n) = tone_locked_cycle(s.i, s.phi, v, p)?;
        (drive, t_n, true)
    } else {
        (s.i, free_period, false)
    };

    let i_next = drive + p.delta_t * (t_n - p.t_stim);
    if !(i_next > 1.0) {
        return Err(MapError::Divergent { i: i_next });
    }
    let raw = s.phi + 1.0 - t_n / p.t_stim;
    let (phi_next, whole) = wrap_phase(raw);
    let tones = if tone_seen { 1 + (-whole).max(0.0) as u32 } else { 0 };
    Ok((MapState { i: i_next, phi: phi_next }, CycleRecord::new(tones, drive, t_n)))
}
