//! Linear stability of the synchronous fixed points of the order-preserving
//! map, the stability and node/spiral boundaries in the `(delta_T, delta_phi)`
//! plane, the nine-region classifier and the critical `delta_T` curves of the
//! period map.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::maps::{drive_of_period, period_map_local_min, MapResult, MapState, ModelParams};
use crate::roots::{bisect, roots_on_segment};

/// Half-width of the band around `|lambda| = 1` reported as non-hyperbolic.
pub const NON_HYPERBOLIC_BAND: f64 = 1e-10;

/// `g(I) = dT/dI = -tau / (I (I - 1))`.
pub fn g_of_i(i: f64, p: &ModelParams) -> MapResult<f64> {
    if !(i > 1.0) {
        return Err(crate::error::MapError::NoOscillation { i });
    }
    Ok(-p.tau / (i * (i - 1.0)))
}

/// Which representative of the synchronous solution: phase 0 or phase 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedPhase {
    Zero,
    One,
}

impl FixedPhase {
    pub fn value(self) -> f64 {
        match self {
            FixedPhase::Zero => 0.0,
            FixedPhase::One => 1.0,
        }
    }
}

/// Trace, determinant and radicand of the linearization at a fixed point.
#[derive(Debug, Clone, Copy)]
struct Linearization {
    trace: f64,
    det: f64,
    radicand: f64,
}

fn linearization(phase: FixedPhase, delta_t: f64, delta_phi: f64, g: f64, t_stim: f64) -> Linearization {
    let phase_gain = delta_phi / t_stim;
    let a = delta_t + phase_gain * (1.0 - phase.value());
    Linearization {
        trace: 2.0 + a * g,
        det: 1.0 + a * g - phase_gain * g,
        radicand: a * a * g * g + 4.0 * phase_gain * g,
    }
}

fn fixed_point_slope(p: &ModelParams) -> f64 {
    let star = p.synchronous_drive();
    -p.tau / (star * (star - 1.0))
}

/// Closed-form eigenvalues `(lambda_+, lambda_-)` at `(I*, phi*)`.
pub fn eigenvalues_at_fixed_point(phase: FixedPhase, p: &ModelParams) -> [Complex64; 2] {
    let g = fixed_point_slope(p);
    let phase_gain = p.delta_phi / p.t_stim;
    let a = p.delta_t + phase_gain * (1.0 - phase.value());
    let centre = 1.0 + 0.5 * a * g;
    let root = Complex64::new(a * a * g * g + 4.0 * phase_gain * g, 0.0).sqrt();
    [centre + 0.5 * root, centre - 0.5 * root]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    NonHyperbolic,
}

impl StabilityClass {
    pub fn is_stable(self) -> bool {
        matches!(self, StabilityClass::StableNode | StabilityClass::StableSpiral)
    }

    pub fn is_spiral(self) -> bool {
        matches!(self, StabilityClass::StableSpiral | StabilityClass::UnstableSpiral)
    }

    pub fn label(self) -> &'static str {
        match self {
            StabilityClass::StableNode => "stable node",
            StabilityClass::StableSpiral => "stable spiral",
            StabilityClass::UnstableNode => "unstable node",
            StabilityClass::UnstableSpiral => "unstable spiral",
            StabilityClass::NonHyperbolic => "non-hyperbolic",
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub fixed_point: MapState,
    pub eigenvalues: [Complex64; 2],
    pub class: StabilityClass,
}

/// Stability class from a spectrum and whether it is a complex pair.
pub fn classify_spectrum(eigenvalues: &[Complex64; 2], spiral: bool) -> StabilityClass {
    let radius = eigenvalues[0].norm().max(eigenvalues[1].norm());
    if (radius - 1.0).abs() < NON_HYPERBOLIC_BAND {
        return StabilityClass::NonHyperbolic;
    }
    match (radius < 1.0, spiral) {
        (true, false) => StabilityClass::StableNode,
        (true, true) => StabilityClass::StableSpiral,
        (false, false) => StabilityClass::UnstableNode,
        (false, true) => StabilityClass::UnstableSpiral,
    }
}

/// Classify a fixed point by the discriminant sign (node/spiral) and the
/// spectral radius (stable/unstable).
pub fn classify_fixed_point(phase: FixedPhase, p: &ModelParams) -> StabilityReport {
    let eigenvalues = eigenvalues_at_fixed_point(phase, p);
    let lin = linearization(phase, p.delta_t, p.delta_phi, fixed_point_slope(p), p.t_stim);
    let class = classify_spectrum(&eigenvalues, lin.radicand < 0.0);
    StabilityReport {
        fixed_point: MapState::new(p.synchronous_drive(), phase.value()),
        eigenvalues,
        class,
    }
}

/// The nine regions of the rule-strength plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
}

impl Region {
    pub const ALL: [Region; 9] = [
        Region::I,
        Region::II,
        Region::III,
        Region::IV,
        Region::V,
        Region::VI,
        Region::VII,
        Region::VIII,
        Region::IX,
    ];

    /// `(phi = 0 class, phi = 1 class)` for each region.
    pub fn signature(self) -> (StabilityClass, StabilityClass) {
        use StabilityClass::*;
        match self {
            Region::I => (StableNode, StableNode),
            Region::II => (StableNode, StableSpiral),
            Region::III => (StableSpiral, StableSpiral),
            Region::IV => (StableSpiral, UnstableSpiral),
            Region::V => (StableNode, UnstableSpiral),
            Region::VI => (UnstableNode, UnstableSpiral),
            Region::VII => (UnstableNode, StableSpiral),
            Region::VIII => (UnstableNode, StableNode),
            Region::IX => (UnstableNode, UnstableNode),
        }
    }

    pub fn from_classes(phi0: StabilityClass, phi1: StabilityClass) -> Option<Region> {
        Region::ALL.into_iter().find(|r| r.signature() == (phi0, phi1))
    }

    pub fn numeral(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
            Region::VI => "VI",
            Region::VII => "VII",
            Region::VIII => "VIII",
            Region::IX => "IX",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionLabel {
    /// `None` when the class pair matches no region (a cell straddling a
    /// boundary within tolerance).
    pub region: Option<Region>,
    pub class_phi0: StabilityClass,
    pub class_phi1: StabilityClass,
}

impl RegionLabel {
    pub fn is_flagged(&self) -> bool {
        self.region.is_none()
    }
}

pub fn region_label(p: &ModelParams) -> RegionLabel {
    let class_phi0 = classify_fixed_point(FixedPhase::Zero, p).class;
    let class_phi1 = classify_fixed_point(FixedPhase::One, p).class;
    RegionLabel { region: Region::from_classes(class_phi0, class_phi1), class_phi0, class_phi1 }
}

/// Rectangle in the `(delta_T, delta_phi)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamWindow {
    pub delta_t: (f64, f64),
    pub delta_phi: (f64, f64),
}

impl ParamWindow {
    pub fn new(delta_t: (f64, f64), delta_phi: (f64, f64)) -> Result<Self, AnalysisError> {
        let w = Self { delta_t, delta_phi };
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b && a >= 0.0;
        if !ordered(delta_t) || !ordered(delta_phi) {
            return Err(AnalysisError::InvalidWindow(format!("{w:?}")));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCell {
    pub delta_t: f64,
    pub delta_phi: f64,
    pub label: RegionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub window: ParamWindow,
    pub nx: usize,
    pub ny: usize,
    /// Row-major over `delta_phi` rows, `delta_T` fastest; cell centres.
    pub cells: Vec<RegionCell>,
}

/// Label every cell centre of an `nx x ny` grid over `window`.
pub fn region_map(window: ParamWindow, nx: usize, ny: usize, p: &ModelParams) -> RegionGrid {
    let cells = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let delta_t = window.delta_t.0 + (ix as f64 + 0.5) / nx as f64 * (window.delta_t.1 - window.delta_t.0);
            let delta_phi =
                window.delta_phi.0 + (iy as f64 + 0.5) / ny as f64 * (window.delta_phi.1 - window.delta_phi.0);
            RegionCell { delta_t, delta_phi, label: region_label(&p.with_rules(delta_t, delta_phi)) }
        })
        .collect();
    RegionGrid { window, nx, ny, cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    LambdaMinusOnePhi0,
    LambdaMinusOnePhi1,
    UnitModulusPhi1,
    DiscriminantZeroPhi0,
    DiscriminantZeroPhi1,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 5] = [
        BoundaryKind::LambdaMinusOnePhi0,
        BoundaryKind::LambdaMinusOnePhi1,
        BoundaryKind::UnitModulusPhi1,
        BoundaryKind::DiscriminantZeroPhi0,
        BoundaryKind::DiscriminantZeroPhi1,
    ];

    pub fn fixed_phase(self) -> FixedPhase {
        match self {
            BoundaryKind::LambdaMinusOnePhi0 | BoundaryKind::DiscriminantZeroPhi0 => FixedPhase::Zero,
            _ => FixedPhase::One,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::LambdaMinusOnePhi0 => "lambda_minus_one_phi0",
            BoundaryKind::LambdaMinusOnePhi1 => "lambda_minus_one_phi1",
            BoundaryKind::UnitModulusPhi1 => "unit_modulus_phi1",
            BoundaryKind::DiscriminantZeroPhi0 => "discriminant_zero_phi0",
            BoundaryKind::DiscriminantZeroPhi1 => "discriminant_zero_phi1",
        }
    }
}

/// Defining scalar of a boundary at `(delta_T, delta_phi)`; the boundary is
/// its zero set. For the unit-modulus kind the zero only counts where the
/// eigenvalues are complex, see [`on_branch`].
///
/// * eigenvalue `-1`: characteristic polynomial at `-1`, `1 + tr + det`;
/// * complex unit modulus: `det - 1`;
/// * node/spiral transition: the radicand of the eigenvalue formula.
pub fn boundary_residual(kind: BoundaryKind, delta_t: f64, delta_phi: f64, p: &ModelParams) -> f64 {
    let lin = linearization(kind.fixed_phase(), delta_t, delta_phi, fixed_point_slope(p), p.t_stim);
    match kind {
        BoundaryKind::LambdaMinusOnePhi0 | BoundaryKind::LambdaMinusOnePhi1 => 1.0 + lin.trace + lin.det,
        BoundaryKind::UnitModulusPhi1 => lin.det - 1.0,
        BoundaryKind::DiscriminantZeroPhi0 | BoundaryKind::DiscriminantZeroPhi1 => lin.radicand,
    }
}

/// Whether a zero of [`boundary_residual`] lies on the branch the kind names.
pub fn on_branch(kind: BoundaryKind, delta_t: f64, delta_phi: f64, p: &ModelParams) -> bool {
    match kind {
        BoundaryKind::UnitModulusPhi1 => {
            let lin = linearization(kind.fixed_phase(), delta_t, delta_phi, fixed_point_slope(p), p.t_stim);
            // the origin is the degenerate endpoint where both eigenvalues are 1
            lin.radicand < 0.0 || (delta_t == 0.0 && delta_phi == 0.0)
        }
        _ => true,
    }
}

/// Which parameter varies along a scan line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    /// Vertical lines: fixed `delta_T`, scan `delta_phi`.
    DeltaPhi,
    /// Horizontal lines: fixed `delta_phi`, scan `delta_T`.
    DeltaT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    /// Number of scan lines across the window (endpoints included).
    pub lines: usize,
    /// Samples along each line used to bracket sign changes.
    pub samples: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { axis: ScanAxis::DeltaPhi, lines: 201, samples: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub kind: BoundaryKind,
    /// `(delta_T, delta_phi)` points in scan-line order.
    pub points: Vec<(f64, f64)>,
}

fn spaced(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if n <= 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Trace a boundary by bisecting every sign change of its defining scalar
/// along axis-parallel scan lines.
pub fn trace_boundary(
    kind: BoundaryKind,
    window: ParamWindow,
    scan: ScanSpec,
    p: &ModelParams,
) -> Result<BoundaryCurve, AnalysisError> {
    let per_line: Vec<Vec<(f64, f64)>> = (0..scan.lines.max(1))
        .into_par_iter()
        .map(|k| match scan.axis {
            ScanAxis::DeltaPhi => {
                let dt = spaced(window.delta_t.0, window.delta_t.1, scan.lines, k);
                roots_on_segment(
                    |dp| boundary_residual(kind, dt, dp, p),
                    window.delta_phi.0,
                    window.delta_phi.1,
                    scan.samples,
                )
                .into_iter()
                .map(|dp| (dt, dp))
                .filter(|&(x, y)| on_branch(kind, x, y, p))
                .collect()
            }
            ScanAxis::DeltaT => {
                let dp = spaced(window.delta_phi.0, window.delta_phi.1, scan.lines, k);
                roots_on_segment(
                    |dt| boundary_residual(kind, dt, dp, p),
                    window.delta_t.0,
                    window.delta_t.1,
                    scan.samples,
                )
                .into_iter()
                .map(|dt| (dt, dp))
                .filter(|&(x, y)| on_branch(kind, x, y, p))
                .collect()
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = per_line.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(AnalysisError::NoCrossing { kind: kind.name() });
    }
    Ok(BoundaryCurve { kind, points })
}

/// Stability-loss threshold `2 I*(I* - 1) / tau` of the period map.
pub fn stability_loss_delta_t(p: &ModelParams) -> f64 {
    let star = p.synchronous_drive();
    2.0 * star * (star - 1.0) / p.tau
}

/// Rule strength with zero slope at the fixed point, `I*(I* - 1) / tau`.
pub fn optimal_delta_t(p: &ModelParams) -> f64 {
    0.5 * stability_loss_delta_t(p)
}

/// `f(I_min) - 1` for the period map with rule strength `delta_t`. Positive
/// means every iterate stays in `(1, inf)`.
pub fn local_min_margin(delta_t: f64, p: &ModelParams) -> f64 {
    let q = p.with_rules(delta_t, p.delta_phi);
    let m = period_map_local_min(&q);
    let tail = q.tau * (m / (m - 1.0)).ln() - q.t_stim;
    m + delta_t * tail - 1.0
}

/// Rule strength above which the period map's local minimum falls to 1.
pub fn divergence_delta_t(p: &ModelParams) -> Result<f64, AnalysisError> {
    let mut lo = stability_loss_delta_t(p);
    let mut tries = 0;
    while local_min_margin(lo, p) <= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(AnalysisError::NotBracketed { lo, hi: stability_loss_delta_t(p) });
        }
    }
    let mut hi = 2.0 * lo;
    tries = 0;
    while local_min_margin(hi, p) > 0.0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(AnalysisError::NotBracketed { lo, hi });
        }
    }
    bisect(|d| local_min_margin(d, p), lo, hi, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCurves {
    pub t_stim: Vec<f64>,
    pub stability_loss: Vec<f64>,
    pub optimal: Vec<f64>,
    /// Per sample; `None` where the root finder failed.
    pub divergence: Vec<Option<f64>>,
}

/// The three critical `delta_T` curves of the period map over a range of
/// stimulus periods.
pub fn critical_delta_curves_1d(t_range: (f64, f64), samples: usize, p: &ModelParams) -> CriticalCurves {
    let t_stim: Vec<f64> = (0..samples).map(|k| spaced(t_range.0, t_range.1, samples, k)).collect();
    let rows: Vec<(f64, f64, Option<f64>)> = t_stim
        .par_iter()
        .map(|&t| {
            let q = p.with_t_stim(t);
            let a = stability_loss_delta_t(&q);
            (a, 0.5 * a, divergence_delta_t(&q).ok())
        })
        .collect();
    CriticalCurves {
        t_stim,
        stability_loss: rows.iter().map(|r| r.0).collect(),
        optimal: rows.iter().map(|r| r.1).collect(),
        divergence: rows.iter().map(|r| r.2).collect(),
    }
}

/// Stability of the period-map fixed point by the derivative test, used to
/// cross-check the two-dimensional formula at `delta_phi = 0`.
pub fn period_map_fixed_point_stable(p: &ModelParams) -> MapResult<bool> {
    let star = drive_of_period(p.t_stim, p)?;
    let slope = 1.0 + p.delta_t * g_of_i(star, p)?;
    Ok(slope.abs() < 1.0)
}
