use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use beatmap::linear::{divergence_delta_t, stability_loss_delta_t, BoundaryKind, FixedPhase, ScanAxis};
use beatmap::orbit::{Budget, MapKind, PeriodBudget};
use beatmap::ModelParams;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::presets::Preset;
use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "beatmap", version, about = "Error-correction maps of a beat generator entrained to a metronome")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate a map from an initial state and write the trajectory
    Iterate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: IterateOpts,
    },
    /// Run the event-driven simulator and write every spike and tone
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: SimulateOpts,
    },
    /// Stability region labels over a (delta_t, delta_phi) grid
    Regions {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: RegionsOpts,
    },
    /// Trace stability boundary curves in the (delta_t, delta_phi) plane
    Boundaries {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: BoundariesOpts,
    },
    /// Bifurcation diagram of the period map over delta_t
    Sweep1d {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: Sweep1dOpts,
    },
    /// Critical delta_t curves of the period map over a range of t_stim
    Critical {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: CriticalOpts,
    },
    /// Period-doubling onsets and Feigenbaum ratios
    Feigenbaum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: FeigenbaumOpts,
    },
    /// Classify the long-run behaviour from one initial state
    Attractor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: AttractorOpts,
    },
    /// Classify a grid of initial states
    Basin {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: BasinOpts,
    },
    /// Sweep tau and report which reference attractors each value reproduces
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: CalibrateOpts,
    },
    /// Recompute an output file from its own metadata header
    Rerun(RerunArgs),
    /// List the bundled presets
    Presets,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Named parameter set (see `beatmap presets`)
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML file with `preset` and a `[params]` table, or a previous output file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Membrane time constant (ms)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Stimulus inter-onset interval (ms)
    #[arg(long = "tstim")]
    pub t_stim: Option<f64>,
    /// Strength of the period-correction rule
    #[arg(long)]
    pub delta_t: Option<f64>,
    /// Strength of the phase-correction rule
    #[arg(long)]
    pub delta_phi: Option<f64>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to the extension of --out, else csv
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare with the original instead of writing; exit 2 on any difference
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapArg {
    Period1d,
    OrderPreserving,
    Oieb,
}

impl From<MapArg> for MapKind {
    fn from(m: MapArg) -> Self {
        match m {
            MapArg::Period1d => MapKind::Period1d,
            MapArg::OrderPreserving => MapKind::OrderPreserving,
            MapArg::Oieb => MapKind::Oieb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Period,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveArg {
    LambdaMinusOne,
    UnitModulus,
    DiscriminantZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisArg {
    DeltaPhi,
    DeltaT,
}

impl From<AxisArg> for ScanAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::DeltaPhi => ScanAxis::DeltaPhi,
            AxisArg::DeltaT => ScanAxis::DeltaT,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// `lo:hi`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn pair(self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
        let (lo, hi) = (parse_f64(a)?, parse_f64(b)?);
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        Ok(Span { lo, hi })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl From<Span> for String {
    fn from(s: Span) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Span {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// `dt_lo:dt_hi,dphi_lo:dphi_hi`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Window {
    pub delta_t: Span,
    pub delta_phi: Span,
}

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected dt_lo:dt_hi,dphi_lo:dphi_hi, got `{s}`"))?;
        Ok(Window { delta_t: a.parse()?, delta_phi: b.parse()? })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.delta_t, self.delta_phi)
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Window {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// `NXxNY`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Res {
    pub nx: usize,
    pub ny: usize,
}

impl FromStr for Res {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once('x').ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
        let n = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad resolution `{s}`"));
        let (nx, ny) = (n(a)?, n(b)?);
        if nx == 0 || ny == 0 {
            return Err(format!("resolution must be positive, got `{s}`"));
        }
        Ok(Res { nx, ny })
    }
}

impl fmt::Display for Res {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

impl From<Res> for String {
    fn from(r: Res) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Res {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateOpts {
    #[arg(long, value_enum, default_value = "oieb")]
    pub map: MapArg,
    /// Initial drive; preset value, else the synchronous drive
    #[arg(long, value_parser = parse_f64)]
    pub i0: Option<f64>,
    /// Initial phase; preset value, else 0
    #[arg(long, value_parser = parse_f64)]
    pub phi0: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    #[arg(long, value_parser = parse_f64)]
    pub i0: Option<f64>,
    #[arg(long, value_parser = parse_f64)]
    pub phi0: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub cycles: usize,
    /// Switch the tone spacing to NEW_TSTIM after time T_SWITCH (ms)
    #[arg(long, num_args = 2, value_names = ["T_SWITCH", "NEW_TSTIM"], value_parser = parse_f64)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tempo_change: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsOpts {
    #[arg(long, default_value = "0:0.01,0:7")]
    pub window: Window,
    #[arg(long, default_value = "200x200")]
    pub res: Res,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundariesOpts {
    /// Restrict to curves of one fixed point (0 or 1)
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<u8>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CurveArg>,
    #[arg(long, default_value = "0:0.01,0:7")]
    pub window: Window,
    /// Axis along which scan lines run
    #[arg(long, value_enum, default_value = "delta-phi")]
    pub axis: AxisArg,
    #[arg(long, default_value_t = 201)]
    pub lines: usize,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

impl BoundariesOpts {
    pub fn curves(&self) -> Vec<BoundaryKind> {
        BoundaryKind::ALL
            .into_iter()
            .filter(|k| {
                let fp = match k.fixed_phase() {
                    FixedPhase::Zero => 0,
                    FixedPhase::One => 1,
                };
                let kind = match k {
                    BoundaryKind::LambdaMinusOnePhi0 | BoundaryKind::LambdaMinusOnePhi1 => CurveArg::LambdaMinusOne,
                    BoundaryKind::UnitModulusPhi1 => CurveArg::UnitModulus,
                    _ => CurveArg::DiscriminantZero,
                };
                self.fixed_point.map_or(true, |f| f == fp) && self.kind.map_or(true, |c| c == kind)
            })
            .collect()
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep1dOpts {
    /// delta_t range; defaults to half the stability bound up to the divergence threshold
    #[arg(long)]
    pub range: Option<Span>,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    /// Attractor samples per column
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long, default_value_t = 1 << 12)]
    pub transient: usize,
    #[arg(long, default_value_t = 1 << 18)]
    pub max_transient: usize,
    #[arg(long, default_value_t = 64)]
    pub max_period: usize,
}

impl Sweep1dOpts {
    pub fn budget(&self) -> PeriodBudget {
        PeriodBudget {
            transient: self.transient,
            max_transient: self.max_transient.max(self.transient),
            max_period: self.max_period,
            points: self.points,
            ..PeriodBudget::default()
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalOpts {
    #[arg(long, default_value = "100:1000")]
    pub tstim_range: Span,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeigenbaumOpts {
    #[arg(long, value_enum, default_value = "period")]
    pub map: FamilyArg,
    #[arg(long, default_value_t = 5)]
    pub k_max: u32,
    /// Parameter window; defaults to the whole cascade of the chosen map
    #[arg(long)]
    pub range: Option<Span>,
    #[arg(long, default_value_t = 4000)]
    pub scan_samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorOpts {
    #[arg(long, value_enum, default_value = "oieb")]
    pub map: MapArg,
    #[arg(long, value_parser = parse_f64)]
    pub i0: Option<f64>,
    #[arg(long, value_parser = parse_f64)]
    pub phi0: Option<f64>,
    #[arg(long, default_value_t = Budget::default().transient)]
    pub transient: usize,
    #[arg(long, default_value_t = Budget::default().observe)]
    pub observe: usize,
    #[arg(long, default_value_t = Budget::default().max_period)]
    pub max_period: usize,
}

fn budget(transient: usize, observe: usize, max_period: usize) -> Budget {
    Budget { transient, observe, max_period, ..Budget::default() }
}

impl AttractorOpts {
    pub fn budget(&self) -> Budget {
        budget(self.transient, self.observe, self.max_period)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinOpts {
    #[arg(long, value_enum, default_value = "oieb")]
    pub map: MapArg,
    /// Drive range; defaults to 10% either side of the synchronous drive
    #[arg(long)]
    pub i_range: Option<Span>,
    #[arg(long, default_value = "0:1")]
    pub phi_range: Span,
    /// Cells along i and phi
    #[arg(long, default_value = "40x40")]
    pub res: Res,
    #[arg(long, default_value_t = 3000)]
    pub transient: usize,
    #[arg(long, default_value_t = 3000)]
    pub observe: usize,
    #[arg(long, default_value_t = Budget::default().max_period)]
    pub max_period: usize,
}

impl BasinOpts {
    pub fn budget(&self) -> Budget {
        budget(self.transient, self.observe, self.max_period)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateOpts {
    #[arg(long, default_value = "500:2000")]
    pub tau_range: Span,
    /// Number of tau values (endpoints included)
    #[arg(long, default_value_t = 16)]
    pub taus: usize,
    #[arg(long, default_value_t = Budget::default().transient)]
    pub transient: usize,
    #[arg(long, default_value_t = Budget::default().observe)]
    pub observe: usize,
}

impl CalibrateOpts {
    pub fn budget(&self) -> Budget {
        budget(self.transient, self.observe, Budget::default().max_period)
    }

    pub fn tau_values(&self) -> Vec<f64> {
        let n = self.taus.max(1);
        let Span { lo, hi } = self.tau_range;
        (0..n).map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
    }
}

/// The command-specific part of a run, fully resolved before execution so
/// that it can be written to and read back from an output header.
#[derive(Debug, Clone, PartialEq)]
pub enum Options {
    Iterate(IterateOpts),
    Simulate(SimulateOpts),
    Regions(RegionsOpts),
    Boundaries(BoundariesOpts),
    Sweep1d(Sweep1dOpts),
    Critical(CriticalOpts),
    Feigenbaum(FeigenbaumOpts),
    Attractor(AttractorOpts),
    Basin(BasinOpts),
    Calibrate(CalibrateOpts),
}

impl Options {
    pub fn name(&self) -> &'static str {
        match self {
            Options::Iterate(_) => "iterate",
            Options::Simulate(_) => "simulate",
            Options::Regions(_) => "regions",
            Options::Boundaries(_) => "boundaries",
            Options::Sweep1d(_) => "sweep1d",
            Options::Critical(_) => "critical",
            Options::Feigenbaum(_) => "feigenbaum",
            Options::Attractor(_) => "attractor",
            Options::Basin(_) => "basin",
            Options::Calibrate(_) => "calibrate",
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        let v = match self {
            Options::Iterate(o) => serde_json::to_value(o),
            Options::Simulate(o) => serde_json::to_value(o),
            Options::Regions(o) => serde_json::to_value(o),
            Options::Boundaries(o) => serde_json::to_value(o),
            Options::Sweep1d(o) => serde_json::to_value(o),
            Options::Critical(o) => serde_json::to_value(o),
            Options::Feigenbaum(o) => serde_json::to_value(o),
            Options::Attractor(o) => serde_json::to_value(o),
            Options::Basin(o) => serde_json::to_value(o),
            Options::Calibrate(o) => serde_json::to_value(o),
        };
        v.expect("options serialize")
    }

    pub fn from_value(command: &str, v: serde_json::Value) -> Result<Self, CliError> {
        fn de<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, CliError> {
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("bad options in header: {e}")))
        }
        Ok(match command {
            "iterate" => Options::Iterate(de(v)?),
            "simulate" => Options::Simulate(de(v)?),
            "regions" => Options::Regions(de(v)?),
            "boundaries" => Options::Boundaries(de(v)?),
            "sweep1d" => Options::Sweep1d(de(v)?),
            "critical" => Options::Critical(de(v)?),
            "feigenbaum" => Options::Feigenbaum(de(v)?),
            "attractor" => Options::Attractor(de(v)?),
            "basin" => Options::Basin(de(v)?),
            "calibrate" => Options::Calibrate(de(v)?),
            other => return Err(CliError::Config(format!("unknown command `{other}` in header"))),
        })
    }

    /// Fill every default that depends on the model parameters or the preset.
    pub fn resolve(&mut self, p: &ModelParams, preset: Option<&Preset>) -> Result<(), CliError> {
        let x0 = |i0: &mut Option<f64>, phi0: &mut Option<f64>| {
            if i0.is_none() {
                *i0 = Some(preset.and_then(|q| q.i0).unwrap_or_else(|| p.synchronous_drive()));
            }
            if phi0.is_none() {
                *phi0 = Some(preset.and_then(|q| q.phi0).unwrap_or(0.0));
            }
        };
        match self {
            Options::Iterate(o) => x0(&mut o.i0, &mut o.phi0),
            Options::Simulate(o) => {
                x0(&mut o.i0, &mut o.phi0);
                if let Some(tc) = &o.tempo_change {
                    if tc.len() != 2 {
                        return Err(CliError::Config("--tempo-change takes T_SWITCH NEW_TSTIM".into()));
                    }
                }
            }
            Options::Attractor(o) => x0(&mut o.i0, &mut o.phi0),
            Options::Sweep1d(o) => {
                if o.range.is_none() {
                    let dc = stability_loss_delta_t(p);
                    let hi = divergence_delta_t(p).map_err(|e| CliError::Domain(e.to_string()))?;
                    o.range = Some(Span::new(0.5 * dc, hi));
                }
            }
            Options::Feigenbaum(o) => {
                if o.range.is_none() {
                    o.range = Some(match o.map {
                        FamilyArg::Logistic => Span::new(2.9, 3.5699),
                        FamilyArg::Period => {
                            let dc = stability_loss_delta_t(p);
                            let hi = divergence_delta_t(p).map_err(|e| CliError::Domain(e.to_string()))?;
                            Span::new(0.9 * dc, hi)
                        }
                    });
                }
            }
            Options::Basin(o) => {
                if o.i_range.is_none() {
                    let star = p.synchronous_drive();
                    o.i_range = Some(Span::new(0.9 * star, 1.1 * star));
                }
            }
            Options::Boundaries(o) => {
                if o.curves().is_empty() {
                    return Err(CliError::Config("no boundary curve matches --fixed-point and --kind".into()));
                }
            }
            Options::Regions(_) | Options::Critical(_) | Options::Calibrate(_) => {}
        }
        Ok(())
    }
}

impl Command {
    /// Split a run command into its shared flags and its options.
    pub fn into_parts(self) -> Option<(Common, Options)> {
        Some(match self {
            Command::Iterate { common, opts } => (common, Options::Iterate(opts)),
            Command::Simulate { common, opts } => (common, Options::Simulate(opts)),
            Command::Regions { common, opts } => (common, Options::Regions(opts)),
            Command::Boundaries { common, opts } => (common, Options::Boundaries(opts)),
            Command::Sweep1d { common, opts } => (common, Options::Sweep1d(opts)),
            Command::Critical { common, opts } => (common, Options::Critical(opts)),
            Command::Feigenbaum { common, opts } => (common, Options::Feigenbaum(opts)),
            Command::Attractor { common, opts } => (common, Options::Attractor(opts)),
            Command::Basin { common, opts } => (common, Options::Basin(opts)),
            Command::Calibrate { common, opts } => (common, Options::Calibrate(opts)),
            Command::Rerun(_) | Command::Presets => return None,
        })
    }
}
