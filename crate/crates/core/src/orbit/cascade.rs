use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimal_period, DIVERGENCE_CEILING, DIVERGENCE_FLOOR};
use crate::error::AnalysisError;
use crate::maps::{period_map_local_min, step_period_map, ModelParams};
use crate::roots::bisect_predicate;

/// A one-parameter family of interval maps with a single critical point.
pub trait Family1d: Sync {
    fn step(&self, param: f64, x: f64) -> Option<f64>;
    /// Orbit seed; for unimodal maps the critical point.
    fn start(&self, param: f64) -> f64;
}

/// The period-correction map with `delta_T` as the parameter.
#[derive(Debug, Clone, Copy)]
pub struct PeriodMapFamily {
    pub base: ModelParams,
}

impl Family1d for PeriodMapFamily {
    fn step(&self, param: f64, x: f64) -> Option<f64> {
        let p = self.base.with_rules(param, self.base.delta_phi);
        let next = step_period_map(x, &p).ok()?;
        (next > DIVERGENCE_FLOOR && next <= DIVERGENCE_CEILING).then_some(next)
    }

    fn start(&self, param: f64) -> f64 {
        period_map_local_min(&self.base.with_rules(param, self.base.delta_phi))
    }
}

/// `x -> r x (1 - x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticFamily;

impl Family1d for LogisticFamily {
    fn step(&self, r: f64, x: f64) -> Option<f64> {
        let next = r * x * (1.0 - x);
        (0.0..=1.0).contains(&next).then_some(next)
    }

    fn start(&self, _r: f64) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodBudget {
    /// Iterates discarded before the first period check.
    pub transient: usize,
    /// The transient is doubled up to this length while the answer is unsettled.
    pub max_transient: usize,
    pub max_period: usize,
    /// Relative recurrence tolerance.
    pub tol: f64,
    /// Attractor samples kept per bifurcation-diagram column.
    pub points: usize,
}

impl Default for PeriodBudget {
    fn default() -> Self {
        Self { transient: 1 << 12, max_transient: 1 << 22, max_period: 64, tol: 1e-8, points: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodDetection {
    Period(usize),
    Aperiodic,
    Escaped,
}

impl PeriodDetection {
    /// Whether the attractor has period at least `n`; aperiodic counts as
    /// infinite period, escape as none.
    pub fn at_least(self, n: usize) -> bool {
        match self {
            PeriodDetection::Period(k) => k >= n,
            PeriodDetection::Aperiodic => true,
            PeriodDetection::Escaped => false,
        }
    }

    pub fn period(self) -> Option<usize> {
        match self {
            PeriodDetection::Period(k) => Some(k),
            _ => None,
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Largest relative mismatch between samples `lag` apart over the last
/// `span` samples.
fn lag_residual(w: &[f64], lag: usize, span: usize) -> f64 {
    let n = w.len();
    (0..span)
        .map(|j| {
            let (a, b) = (w[n - 1 - j], w[n - 1 - j - lag]);
            (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Detect the attractor period of `family` at `param`, starting from the
/// critical point.
///
/// Near a doubling onset the orbit approaches its attractor very slowly, so
/// the check is repeated with a doubling transient until two consecutive
/// checkpoints agree and, for an even period, the gap between the two halves
/// of the orbit has stopped shrinking.
pub fn detect_period<F: Family1d + ?Sized>(family: &F, param: f64, budget: &PeriodBudget) -> PeriodDetection {
    let window = 3 * budget.max_period + 1;
    let mut x = family.start(param);
    let mut done = 0usize;
    let mut target = budget.transient;
    let mut prev: Option<(PeriodDetection, f64)> = None;
    let mut w = vec![0.0; window];
    loop {
        while done < target {
            match family.step(param, x) {
                Some(n) => x = n,
                None => return PeriodDetection::Escaped,
            }
            done += 1;
        }
        for slot in w.iter_mut() {
            *slot = x;
            match family.step(param, x) {
                Some(n) => x = n,
                None => return PeriodDetection::Escaped,
            }
            done += 1;
        }
        let det = match minimal_period(&w, budget.max_period, |a, b| close(*a, *b, budget.tol)) {
            Some(k) => PeriodDetection::Period(k),
            None => PeriodDetection::Aperiodic,
        };
        // for an even period the half-period mismatch, otherwise the best
        // recurrence mismatch over all candidate periods
        let gap = match det {
            PeriodDetection::Period(k) if k % 2 == 0 => lag_residual(&w, k / 2, k),
            PeriodDetection::Period(_) => 0.0,
            _ => (1..=budget.max_period).map(|k| lag_residual(&w, k, 2 * k)).fold(f64::INFINITY, f64::min),
        };
        let settled = match (prev, det) {
            (Some((pd, pg)), PeriodDetection::Period(k)) => pd == det && (k % 2 == 1 || gap >= 0.9 * pg),
            (Some((pd, pg)), _) => pd == det && gap >= 0.5 * pg,
            (None, _) => false,
        };
        if settled {
            return det;
        }
        if target >= budget.max_transient {
            if det == PeriodDetection::Aperiodic {
                // still creeping towards a cycle: take the tightest candidate
                if let Some(k) = (1..=budget.max_period).find(|&k| lag_residual(&w, k, 2 * k) < 1e-5) {
                    return PeriodDetection::Period(k);
                }
            }
            return det;
        }
        prev = Some((det, gap));
        target *= 2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationColumn {
    pub param: f64,
    pub period: Option<usize>,
    pub divergent: bool,
    /// Post-transient attractor samples.
    pub points: Vec<f64>,
}

/// Bifurcation diagram of `family` over `samples` equally spaced parameters
/// (endpoints included).
pub fn bifurcation_scan_1d<F: Family1d>(
    family: &F,
    range: (f64, f64),
    samples: usize,
    budget: &PeriodBudget,
) -> Vec<BifurcationColumn> {
    let n = samples.max(1);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let param = if n == 1 { range.0 } else { range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64 };
            column(family, param, budget)
        })
        .collect()
}

fn column<F: Family1d>(family: &F, param: f64, budget: &PeriodBudget) -> BifurcationColumn {
    let det = detect_period(family, param, budget);
    let escaped = BifurcationColumn { param, period: None, divergent: true, points: Vec::new() };
    if det == PeriodDetection::Escaped {
        return escaped;
    }
    let mut x = family.start(param);
    for _ in 0..budget.transient {
        match family.step(param, x) {
            Some(n) => x = n,
            None => return escaped,
        }
    }
    let mut points = Vec::with_capacity(budget.points);
    for _ in 0..budget.points {
        points.push(x);
        match family.step(param, x) {
            Some(n) => x = n,
            None => return escaped,
        }
    }
    BifurcationColumn { param, period: det.period(), divergent: false, points }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    /// `doubling_params[k - 1]` is the onset of period `2^k`.
    pub doubling_params: Vec<f64>,
    /// `ratios[j]` is `F_{j + 3}`.
    pub ratios: Vec<f64>,
}

impl CascadeReport {
    /// `F_k` for `k >= 3`.
    pub fn ratio(&self, k: usize) -> Option<f64> {
        k.checked_sub(3).and_then(|j| self.ratios.get(j)).copied()
    }
}

/// Locate the onsets of periods `2, 4, ..., 2^k_max` in `range` and form the
/// ratios of successive gaps.
///
/// A coarse parallel scan brackets each onset (the first pair of consecutive
/// samples both at or above the period), then bisection on the detected
/// period refines it to `tol`.
pub fn feigenbaum_ratios<F: Family1d>(
    family: &F,
    range: (f64, f64),
    k_max: u32,
    scan_samples: usize,
    tol: f64,
    budget: &PeriodBudget,
) -> Result<CascadeReport, AnalysisError> {
    if !(range.1 > range.0) || k_max == 0 || scan_samples < 3 {
        return Err(AnalysisError::InvalidWindow(format!(
            "need lo < hi, k_max >= 1 and at least 3 samples, got {range:?}, {k_max}, {scan_samples}"
        )));
    }
    let mut budget = *budget;
    budget.max_period = budget.max_period.max(2usize << k_max);
    let params: Vec<f64> = (0..scan_samples)
        .map(|j| range.0 + (range.1 - range.0) * j as f64 / (scan_samples - 1) as f64)
        .collect();
    let coarse: Vec<PeriodDetection> = params.par_iter().map(|&x| detect_period(family, x, &budget)).collect();

    let mut onsets = Vec::with_capacity(k_max as usize);
    let mut from = 0usize;
    for k in 1..=k_max {
        let n = 1usize << k;
        let hit = (from.max(1)..scan_samples - 1).find(|&j| coarse[j].at_least(n) && coarse[j + 1].at_least(n));
        let j = match hit {
            Some(j) if !coarse[j - 1].at_least(n) && coarse[j - 1] != PeriodDetection::Escaped => j,
            _ => return Err(AnalysisError::CascadeTruncated { found: onsets.len(), wanted: k_max as usize }),
        };
        let (_, hi) = bisect_predicate(|x| detect_period(family, x, &budget).at_least(n), params[j - 1], params[j], tol);
        onsets.push(hi);
        from = j;
    }
    let ratios = onsets
        .windows(3)
        .map(|d| (d[1] - d[0]) / (d[2] - d[1]))
        .collect();
    Ok(CascadeReport { doubling_params: onsets, ratios })
}
