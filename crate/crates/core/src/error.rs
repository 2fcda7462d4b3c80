use thiserror::Error;

use crate::maps::MapState;

/// Failures of a single map or simulator step.
///
/// Several variants are not programming errors but dynamical outcomes
/// (the beat generator stops oscillating, the orbit leaves the domain);
/// callers that iterate treat those as termination reasons.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("drive {i} <= 1: the beat generator does not oscillate")]
    NoOscillation { i: f64 },

    #[error("period {t} ms is not positive")]
    NonPositivePeriod { t: f64 },

    #[error("phase {phi} outside [0, 1]")]
    PhaseOutOfRange { phi: f64 },

    #[error("spike at {period} ms precedes the tone at {tone_offset} ms")]
    AlreadyFired { period: f64, tone_offset: f64 },

    #[error("effective drive {drive} cannot bring v = {voltage} to threshold: no further spike")]
    Stalled { drive: f64, voltage: f64 },

    #[error("drive fell to {i} after the period update")]
    Divergent { i: f64 },

    #[error("iterate {i} left the domain (1, inf) of the period map")]
    EscapedDomain { i: f64 },

    #[error("phase left [0, 1] (next state {next:?}): spike/tone alternation broken")]
    OrderViolated { next: MapState },
}

impl MapError {
    /// True for outcomes of the dynamics rather than bad input.
    pub fn is_dynamical(&self) -> bool {
        matches!(
            self,
            MapError::Stalled { .. }
                | MapError::Divergent { .. }
                | MapError::EscapedDomain { .. }
                | MapError::OrderViolated { .. }
        )
    }

    /// Short machine-readable tag, used in serialized outputs.
    pub fn tag(&self) -> &'static str {
        match self {
            MapError::InvalidParams(_) => "invalid_params",
            MapError::NoOscillation { .. } => "no_oscillation",
            MapError::NonPositivePeriod { .. } => "non_positive_period",
            MapError::PhaseOutOfRange { .. } => "phase_out_of_range",
            MapError::AlreadyFired { .. } => "already_fired",
            MapError::Stalled { .. } => "stalled",
            MapError::Divergent { .. } => "divergent",
            MapError::EscapedDomain { .. } => "escaped_domain",
            MapError::OrderViolated { .. } => "order_violated",
        }
    }
}

/// Failures of the analysis routines built on top of the maps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Map(#[from] MapError),

    #[error("no crossing of the {kind} condition inside the window")]
    NoCrossing { kind: &'static str },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("only {usable} of {total} Lyapunov steps were smooth")]
    InsufficientSmoothSamples { usable: usize, total: usize },

    #[error("trajectory left the domain after {step} steps: {reason}")]
    LeftDomain { step: usize, reason: MapError },

    #[error("cascade truncated: found {found} of {wanted} period-doubling onsets")]
    CascadeTruncated { found: usize, wanted: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),
}
