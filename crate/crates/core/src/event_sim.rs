//! Event-driven simulation of the beat generator against an isochronous tone
//! sequence. Between events the membrane equation is solved in closed form,
//! so spike times are exact up to floating point.

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::maps::{period_of_drive, CycleRecord, MapState, ModelParams, COINCIDENCE_PHASE};
use crate::orbit::Termination;

/// Time for the membrane to climb from `v0` to threshold under drive `i`.
pub fn next_spike_time(v0: f64, i: f64, p: &ModelParams) -> Result<f64, MapError> {
    if v0 >= 1.0 {
        return Ok(0.0);
    }
    if !(i > 1.0) || !(i > v0) {
        return Err(MapError::Stalled { drive: i, voltage: v0 });
    }
    Ok(p.tau * ((i - v0) / (i - 1.0)).ln())
}

/// Time as an unevaluated sum `hi + lo`, so differences of nearby large
/// times stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Clock {
    hi: f64,
    lo: f64,
}

impl Clock {
    fn exact(t: f64) -> Self {
        Self { hi: t, lo: 0.0 }
    }

    fn add(self, x: f64) -> Self {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = two_sum(s, e + self.lo);
        Self { hi, lo }
    }

    /// `self - other` rounded once.
    fn minus(self, other: Clock) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `base + k t` with the product and the sum carried exactly.
fn offset_clock(base: Clock, k: u64, t: f64) -> Clock {
    let kf = k as f64;
    let prod = kf * t;
    let err = kf.mul_add(t, -prod);
    let (hi, e) = two_sum(base.hi, prod);
    let (hi, lo) = two_sum(hi, e + err + base.lo);
    Clock { hi, lo }
}

/// A single switch of tone spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoChange {
    /// Tones after this time use the new spacing.
    pub at: f64,
    pub t_stim: f64,
}

/// Tone times `origin + k t_stim`, optionally switching spacing once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSchedule {
    pub origin: f64,
    pub t_stim: f64,
    pub change: Option<TempoChange>,
}

impl ToneSchedule {
    pub fn isochronous(origin: f64, t_stim: f64) -> Self {
        Self { origin, t_stim, change: None }
    }

    /// Index of the last tone at the old spacing.
    fn pivot(&self, c: &TempoChange) -> u64 {
        ((c.at - self.origin) / self.t_stim).floor().max(0.0) as u64
    }

    /// Time of tone `k` (k = 0 is the origin). Computed by multiplication from
    /// the origin or the pivot tone, never by accumulation.
    pub fn time(&self, k: u64) -> f64 {
        self.clock(k).hi
    }

    fn clock(&self, k: u64) -> Clock {
        let origin = Clock::exact(self.origin);
        match self.change {
            Some(c) => {
                let k0 = self.pivot(&c);
                if k <= k0 {
                    offset_clock(origin, k, self.t_stim)
                } else {
                    offset_clock(offset_clock(origin, k0, self.t_stim), k - k0, c.t_stim)
                }
            }
            None => offset_clock(origin, k, self.t_stim),
        }
    }

    /// Stimulus period in force at time `t`.
    pub fn spacing_at(&self, t: f64) -> f64 {
        match self.change {
            Some(c) if t > c.at => c.t_stim,
            _ => self.t_stim,
        }
    }

    /// First tone at or after `t`, counting tones within the coincidence
    /// window before `t` as at `t`.
    pub fn first_at_or_after(&self, t: f64, k_from: u64) -> u64 {
        self.first_after_clock(Clock::exact(t), k_from)
    }

    fn first_after_clock(&self, t: Clock, k_from: u64) -> u64 {
        let window = COINCIDENCE_PHASE * self.spacing_at(t.hi);
        let mut k = k_from;
        while self.clock(k).minus(t) < -window {
            k += 1;
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BgSpike,
    Tone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub i_before: f64,
    pub i_after: f64,
    /// Membrane value at the event (before reset for spikes).
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTrace {
    pub params: ModelParams,
    pub schedule: ToneSchedule,
    pub events: Vec<Event>,
    /// One record per completed cycle.
    pub cycles: Vec<CycleRecord>,
    pub termination: Option<Termination>,
}

/// Simulate `n_cycles` cycles from `x0`: a spike at `t = 0` and tones at
/// `(phi0 + k) T_stim`.
pub fn simulate(x0: MapState, p: &ModelParams, n_cycles: usize) -> Result<EventTrace, MapError> {
    if !(0.0..1.0).contains(&x0.phi) {
        return Err(MapError::PhaseOutOfRange { phi: x0.phi });
    }
    let schedule = ToneSchedule::isochronous(x0.phi * p.t_stim, p.t_stim);
    simulate_with_schedule(x0.i, schedule, p, n_cycles)
}

/// Simulate with an arbitrary tone schedule; the oscillator spikes at
/// `t = 0` with drive `i0`. The stimulus period in `p` is replaced by the
/// schedule's spacing in force at each spike.
pub fn simulate_with_schedule(
    i0: f64,
    schedule: ToneSchedule,
    p: &ModelParams,
    n_cycles: usize,
) -> Result<EventTrace, MapError> {
    p.validate()?;
    if !(i0 > 1.0) {
        return Err(MapError::NoOscillation { i: i0 });
    }
    if !(schedule.t_stim > 0.0) || schedule.change.is_some_and(|c| !(c.t_stim > 0.0)) {
        return Err(MapError::NonPositivePeriod { t: schedule.t_stim });
    }

    let mut events = vec![Event { time: 0.0, kind: EventKind::BgSpike, i_before: i0, i_after: i0, v: 1.0 }];
    let mut cycles = Vec::with_capacity(n_cycles);
    let mut termination = None;

    let mut t_spike = Clock::exact(0.0);
    let mut drive = i0;
    let mut k = schedule.first_at_or_after(0.0, 0);

    for cycle in 0..n_cycles {
        let t_stim = schedule.spacing_at(t_spike.hi);
        let q = p.with_t_stim(t_stim);
        let result = run_cycle(t_spike, drive, &mut k, &schedule, &q, &mut events);
        match result {
            Ok(Cycle { interval, i_temp, tones, v }) => {
                let t_next = t_spike.add(interval);
                let i_after = i_temp + q.delta_t * (interval - q.t_stim);
                events.push(Event { time: t_next.hi, kind: EventKind::BgSpike, i_before: i_temp, i_after, v });
                cycles.push(CycleRecord::new(tones, i_temp, interval));
                if !(i_after > 1.0) {
                    termination = Some(Termination::new(cycle, MapError::Divergent { i: i_after }));
                    break;
                }
                t_spike = t_next;
                drive = i_after;
                k = schedule.first_after_clock(t_spike, k);
            }
            Err(e) => {
                termination = Some(Termination::new(cycle, e));
                break;
            }
        }
    }
    Ok(EventTrace { params: *p, schedule, events, cycles, termination })
}

struct Cycle {
    interval: f64,
    i_temp: f64,
    tones: u32,
    /// Membrane value reached at the closing spike.
    v: f64,
}

/// Runs one cycle from a reset at `t_spike` and pushes its tone events.
fn run_cycle(
    t_spike: Clock,
    drive: f64,
    k: &mut u64,
    schedule: &ToneSchedule,
    p: &ModelParams,
    events: &mut Vec<Event>,
) -> Result<Cycle, MapError> {
    let free = period_of_drive(drive, p)?;
    let t_tone = schedule.clock(*k);
    let offset = t_tone.minus(t_spike).max(0.0);
    if offset > free {
        let v = drive * (1.0 - (-free / p.tau).exp());
        return Ok(Cycle { interval: free, i_temp: drive, tones: 0, v });
    }

    // first tone: phase rule
    let phi = offset / p.t_stim;
    let v = drive * (1.0 - (-offset / p.tau).exp());
    let boosted = drive + p.delta_phi * phase_rule(phi);
    events.push(Event { time: t_tone.hi, kind: EventKind::Tone, i_before: drive, i_after: boosted, v });
    if !(boosted > 1.0) || !(boosted > v) {
        return Err(MapError::Stalled { drive: boosted, voltage: v });
    }
    let interval = offset + next_spike_time(v, boosted, p)?;
    let mut tones = 1;
    *k += 1;

    // later tones inside the same cycle change nothing
    loop {
        let tt = schedule.clock(*k);
        let since_spike = tt.minus(t_spike);
        if since_spike >= interval - COINCIDENCE_PHASE * p.t_stim {
            break;
        }
        let vt = boosted + (v - boosted) * (-(since_spike - offset) / p.tau).exp();
        events.push(Event { time: tt.hi, kind: EventKind::Tone, i_before: boosted, i_after: boosted, v: vt });
        tones += 1;
        *k += 1;
    }
    let v_spike = boosted + (v - boosted) * (-(interval - offset) / p.tau).exp();
    Ok(Cycle { interval, i_temp: boosted, tones, v: v_spike })
}

fn phase_rule(phi: f64) -> f64 {
    let s = if phi > 0.5 {
        1.0
    } else if phi < 0.5 {
        -1.0
    } else {
        0.0
    };
    s * phi * (1.0 - phi)
}

/// Map states at the start of each cycle: the drive after the period rule and
/// the time to the next tone in units of the stimulus period, reduced to
/// `[0, 1)`. Entry 0 is the initial state.
pub fn trace_to_map_states(trace: &EventTrace) -> Vec<MapState> {
    let sched = &trace.schedule;
    let mut k = 0;
    trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::BgSpike)
        .map(|e| {
            k = sched.first_at_or_after(e.time, k);
            let t_stim = sched.spacing_at(e.time);
            let raw = ((sched.time(k) - e.time) / t_stim).max(0.0);
            let phi = if raw >= 1.0 { raw.fract() } else { raw };
            MapState::new(e.i_after, phi)
        })
        .collect()
}
