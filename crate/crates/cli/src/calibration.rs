//! Reference attractor labels for the presets and the tau sweep that checks
//! them.

use beatmap::orbit::{classify_attractor, AttractorKind, AttractorReport, Budget, MapKind};
use beatmap::{MapState, ModelParams};
use rayon::prelude::*;

use crate::presets;

pub struct Label {
    pub preset: &'static str,
    pub expected: &'static str,
    pub matches: fn(&AttractorReport) -> bool,
}

fn periodic(r: &AttractorReport, period: usize) -> bool {
    r.kind == AttractorKind::Periodic && r.period == Some(period)
}

pub const LABELS: [Label; 6] = [
    Label {
        preset: "fig8b",
        expected: "period 5, 2 order switches",
        matches: |r| periodic(r, 5) && r.order_switches_per_period == Some(2),
    },
    Label {
        preset: "fig8c",
        expected: "period 4, 4 spikes / 3 tones",
        matches: |r| periodic(r, 4) && r.bg_spikes_per_period == Some(4) && r.tones_per_period == Some(3),
    },
    Label {
        preset: "fig8d",
        expected: "chaotic, lyapunov > 0.01",
        matches: |r| r.kind == AttractorKind::Chaotic && r.lyapunov.is_some_and(|l| l > 0.01),
    },
    Label { preset: "fig8e", expected: "divergent", matches: |r| r.kind == AttractorKind::Divergent },
    Label { preset: "fig8f", expected: "period 104", matches: |r| periodic(r, 104) },
    Label {
        preset: "fig6c",
        expected: "period 3, tones 2/1/0",
        matches: |r| periodic(r, 3) && r.tones_per_period == Some(3) && r.order_switches_per_period == Some(2),
    },
];

/// One-line summary of a report.
pub fn describe(r: &AttractorReport) -> String {
    let n = |x: Option<u32>| x.map_or("?".to_string(), |v| v.to_string());
    match r.kind {
        AttractorKind::FixedPoint => match r.converged_phase {
            Some(phase) => format!("fixed point at phi = {phase}"),
            None => "fixed point".to_string(),
        },
        AttractorKind::Periodic => format!(
            "period {}, {} spikes / {} tones, {} order switches",
            r.period.map_or("?".to_string(), |p| p.to_string()),
            n(r.bg_spikes_per_period),
            n(r.tones_per_period),
            n(r.order_switches_per_period),
        ),
        AttractorKind::Chaotic => format!("chaotic, lyapunov {:.4}", r.lyapunov.unwrap_or(f64::NAN)),
        AttractorKind::Divergent => format!("divergent ({})", r.termination.unwrap_or("left the domain")),
        AttractorKind::Undecided => "undecided".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub tau: f64,
    pub preset: &'static str,
    pub expected: &'static str,
    pub achieved: String,
    pub reproduced: bool,
    pub report: Option<AttractorReport>,
}

/// Classify every labelled preset, from its own initial condition, at each
/// tau. Rows are ordered by tau, then by label.
pub fn calibrate(taus: &[f64], budget: &Budget) -> Vec<CalibrationRow> {
    let jobs: Vec<(f64, &Label)> = taus.iter().flat_map(|&t| LABELS.iter().map(move |l| (t, l))).collect();
    jobs.par_iter()
        .map(|&(tau, label)| {
            let q = presets::get(label.preset).expect("labelled presets are bundled");
            let x0 = MapState::new(q.i0.unwrap_or(2.5), q.phi0.unwrap_or(0.3));
            let report = ModelParams::new(tau, q.t_stim, q.delta_t, q.delta_phi)
                .map(|p| classify_attractor(MapKind::Oieb, x0, &p, budget));
            let (achieved, reproduced) = match &report {
                Ok(r) => (describe(r), (label.matches)(r)),
                Err(e) => (e.to_string(), false),
            };
            CalibrationRow { tau, preset: label.preset, expected: label.expected, achieved, reproduced, report: report.ok() }
        })
        .collect()
}
