use beatmap::event_sim::{simulate_with_schedule, EventKind, TempoChange, ToneSchedule};
use beatmap::linear::{critical_delta_curves_1d, region_map, trace_boundary, ParamWindow, ScanSpec};
use beatmap::orbit::{
    basin_scan, bifurcation_scan_1d, classify_attractor, feigenbaum_ratios, iterate, Family1d, LogisticFamily,
    MapKind, PeriodBudget, PeriodMapFamily,
};
use beatmap::{AnalysisError, MapState, ModelParams};

use crate::calibration::calibrate;
use crate::options::*;
use crate::output::{Column, Table};
use crate::CliError;

/// Result of running one command.
pub struct Produced {
    pub table: Table,
    /// Reason the run stopped early, if it did.
    pub outcome: Option<String>,
    /// The model, not the tool, ended the run (stall or divergence).
    pub dynamical: bool,
}

impl Produced {
    fn done(table: Table) -> Self {
        Self { table, outcome: None, dynamical: false }
    }
}

fn domain(e: impl ToString) -> CliError {
    CliError::Domain(e.to_string())
}

fn initial_state(i0: Option<f64>, phi0: Option<f64>) -> Result<MapState, CliError> {
    let (i, phi) = (i0.unwrap_or(f64::NAN), phi0.unwrap_or(0.0));
    if !(i > 1.0 && i.is_finite()) {
        return Err(CliError::Config(format!("initial drive must be finite and > 1, got {i}")));
    }
    if !(0.0..1.0).contains(&phi) {
        return Err(CliError::Config(format!("initial phase must lie in [0, 1), got {phi}")));
    }
    Ok(MapState::new(i, phi))
}

fn window(w: &Window) -> Result<ParamWindow, CliError> {
    ParamWindow::new(w.delta_t.pair(), w.delta_phi.pair()).map_err(domain)
}

pub fn execute(opts: &Options, p: &ModelParams) -> Result<Produced, CliError> {
    match opts {
        Options::Iterate(o) => run_iterate(o, p),
        Options::Simulate(o) => run_simulate(o, p),
        Options::Regions(o) => {
            let grid = region_map(window(&o.window)?, o.res.nx, o.res.ny, p);
            let c = &grid.cells;
            Ok(Produced::done(
                Table::new()
                    .with("delta_t", Column::floats(c.iter().map(|c| c.delta_t)))
                    .with("delta_phi", Column::floats(c.iter().map(|c| c.delta_phi)))
                    .with("region", Column::text(c.iter().map(|c| c.label.region.map_or("flagged", |r| r.numeral()))))
                    .with("class_phi0", Column::text(c.iter().map(|c| c.label.class_phi0.label())))
                    .with("class_phi1", Column::text(c.iter().map(|c| c.label.class_phi1.label()))),
            ))
        }
        Options::Boundaries(o) => {
            let w = window(&o.window)?;
            let scan = ScanSpec { axis: o.axis.into(), lines: o.lines, samples: o.samples };
            let (mut names, mut dt, mut dp) = (Vec::new(), Vec::new(), Vec::new());
            let mut missing = Vec::new();
            for kind in o.curves() {
                match trace_boundary(kind, w, scan, p) {
                    Ok(curve) => {
                        for (x, y) in curve.points {
                            names.push(kind.name());
                            dt.push(x);
                            dp.push(y);
                        }
                    }
                    Err(AnalysisError::NoCrossing { kind }) => missing.push(kind),
                    Err(e) => return Err(domain(e)),
                }
            }
            let table = Table::new()
                .with("curve", Column::text(names))
                .with("delta_t", Column::floats(dt))
                .with("delta_phi", Column::floats(dp));
            let outcome = (!missing.is_empty()).then(|| format!("no crossing inside the window: {}", missing.join(", ")));
            Ok(Produced { table, outcome, dynamical: false })
        }
        Options::Sweep1d(o) => {
            let range = o.range.expect("resolved").pair();
            let cols = bifurcation_scan_1d(&PeriodMapFamily { base: *p }, range, o.samples, &o.budget());
            let (mut param, mut period, mut divergent, mut x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for c in &cols {
                let pts: Vec<Option<f64>> =
                    if c.points.is_empty() { vec![None] } else { c.points.iter().copied().map(Some).collect() };
                for pt in pts {
                    param.push(c.param);
                    period.push(c.period.map(|k| k as i64));
                    divergent.push(Some(c.divergent));
                    x.push(pt);
                }
            }
            Ok(Produced::done(
                Table::new()
                    .with("delta_t", Column::floats(param))
                    .with("period", Column::Int(period))
                    .with("divergent", Column::Bool(divergent))
                    .with("i", Column::Float(x)),
            ))
        }
        Options::Critical(o) => {
            let c = critical_delta_curves_1d(o.tstim_range.pair(), o.samples, p);
            Ok(Produced::done(
                Table::new()
                    .with("t_stim", Column::floats(c.t_stim))
                    .with("stability_loss", Column::floats(c.stability_loss))
                    .with("optimal", Column::floats(c.optimal))
                    .with("divergence", Column::Float(c.divergence)),
            ))
        }
        Options::Feigenbaum(o) => {
            let range = o.range.expect("resolved").pair();
            let budget = PeriodBudget::default();
            let report = match o.map {
                FamilyArg::Period => cascade(&PeriodMapFamily { base: *p }, range, o, &budget),
                FamilyArg::Logistic => cascade(&LogisticFamily, range, o, &budget),
            }?;
            let n = report.doubling_params.len();
            Ok(Produced::done(
                Table::new()
                    .with("k", Column::ints(1..=n as i64))
                    .with("period", Column::ints((1..=n).map(|k| 1i64 << k)))
                    .with("onset", Column::floats(report.doubling_params.iter().copied()))
                    .with("ratio", Column::Float((1..=n).map(|k| report.ratio(k)).collect())),
            ))
        }
        Options::Attractor(o) => {
            let x0 = initial_state(o.i0, o.phi0)?;
            let r = classify_attractor(o.map.into(), x0, p, &o.budget());
            let int = |x: Option<u32>| Column::Int(vec![x.map(i64::from)]);
            Ok(Produced::done(
                Table::new()
                    .with("kind", Column::text([r.kind.name()]))
                    .with("period", Column::Int(vec![r.period.map(|k| k as i64)]))
                    .with("order_switches_per_period", int(r.order_switches_per_period))
                    .with("bg_spikes_per_period", int(r.bg_spikes_per_period))
                    .with("tones_per_period", int(r.tones_per_period))
                    .with("lyapunov", Column::Float(vec![r.lyapunov]))
                    .with("final_i", Column::floats([r.final_state.i]))
                    .with("final_phi", Column::floats([r.final_state.phi]))
                    .with("converged_phase", Column::Int(vec![r.converged_phase.map(i64::from)]))
                    .with("termination", Column::Text(vec![r.termination.map(String::from)])),
            ))
        }
        Options::Basin(o) => {
            let cells = basin_scan(
                o.map.into(),
                o.i_range.expect("resolved").pair(),
                o.phi_range.pair(),
                o.res.nx,
                o.res.ny,
                p,
                &o.budget(),
            );
            Ok(Produced::done(
                Table::new()
                    .with("i0", Column::floats(cells.iter().map(|c| c.i0)))
                    .with("phi0", Column::floats(cells.iter().map(|c| c.phi0)))
                    .with("kind", Column::text(cells.iter().map(|c| c.kind.name())))
                    .with("period", Column::Int(cells.iter().map(|c| c.period.map(|k| k as i64)).collect()))
                    .with("converged_phase", Column::Int(cells.iter().map(|c| c.converged_phase.map(i64::from)).collect())),
            ))
        }
        Options::Calibrate(o) => {
            let taus = o.tau_values();
            if let Some(t) = taus.iter().find(|t| !(**t > 0.0)) {
                return Err(CliError::Config(format!("tau must be > 0, got {t}")));
            }
            let rows = calibrate(&taus, &o.budget());
            Ok(Produced::done(
                Table::new()
                    .with("tau", Column::floats(rows.iter().map(|r| r.tau)))
                    .with("preset", Column::text(rows.iter().map(|r| r.preset)))
                    .with("expected", Column::text(rows.iter().map(|r| r.expected)))
                    .with("achieved", Column::text(rows.iter().map(|r| r.achieved.clone())))
                    .with("reproduced", Column::Bool(rows.iter().map(|r| Some(r.reproduced)).collect())),
            ))
        }
    }
}

fn cascade<F: Family1d>(
    family: &F,
    range: (f64, f64),
    o: &FeigenbaumOpts,
    budget: &PeriodBudget,
) -> Result<beatmap::orbit::CascadeReport, CliError> {
    feigenbaum_ratios(family, range, o.k_max, o.scan_samples, o.tol, budget).map_err(domain)
}

fn run_iterate(o: &IterateOpts, p: &ModelParams) -> Result<Produced, CliError> {
    let kind: MapKind = o.map.into();
    let x0 = initial_state(o.i0, o.phi0)?;
    let t = iterate(kind, x0, p, o.steps);
    let n = t.states.len();
    let mut table = Table::new()
        .with("n", Column::ints(0..n as i64))
        .with("i", Column::floats(t.states.iter().map(|s| s.i)));
    if kind != MapKind::Period1d {
        table = table.with("phi", Column::floats(t.states.iter().map(|s| s.phi)));
    }
    if kind == MapKind::Oieb {
        // the record of row n describes the cycle leaving state n
        let rec = |k: usize| t.records.get(k);
        table = table
            .with("tones_in_cycle", Column::Int((0..n).map(|k| rec(k).map(|r| i64::from(r.tones_in_cycle))).collect()))
            .with("order_switch", Column::Bool((0..n).map(|k| rec(k).map(|r| r.order_switch)).collect()));
    }
    let outcome = t.termination.as_ref().map(|e| format!("{} at step {}: {}", e.tag, e.step, e.reason));
    Ok(Produced { table, dynamical: outcome.is_some(), outcome })
}

fn run_simulate(o: &SimulateOpts, p: &ModelParams) -> Result<Produced, CliError> {
    let x0 = initial_state(o.i0, o.phi0)?;
    let mut schedule = ToneSchedule::isochronous(x0.phi * p.t_stim, p.t_stim);
    if let Some(tc) = &o.tempo_change {
        schedule.change = Some(TempoChange { at: tc[0], t_stim: tc[1] });
    }
    let trace = simulate_with_schedule(x0.i, schedule, p, o.cycles).map_err(domain)?;
    let e = &trace.events;
    let table = Table::new()
        .with("time_ms", Column::floats(e.iter().map(|e| e.time)))
        .with(
            "kind",
            Column::text(e.iter().map(|e| match e.kind {
                EventKind::BgSpike => "bg_spike",
                EventKind::Tone => "tone",
            })),
        )
        .with("i_before", Column::floats(e.iter().map(|e| e.i_before)))
        .with("i_after", Column::floats(e.iter().map(|e| e.i_after)))
        .with("v", Column::floats(e.iter().map(|e| e.v)));
    let outcome = trace.termination.as_ref().map(|e| format!("{} in cycle {}: {}", e.tag, e.step, e.reason));
    Ok(Produced { table, dynamical: outcome.is_some(), outcome })
}
