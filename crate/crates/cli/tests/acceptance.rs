//! Acceptance suite: one PASS/FAIL line per criterion, then a non-zero exit
//! if any criterion failed.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use beatmap_cli::calibration::{calibrate, LABELS};
use beatmap_cli::presets;
use beatmap::event_sim::{simulate, trace_to_map_states};
use beatmap::linear::{
    eigenvalues_at_fixed_point, region_map, stability_loss_delta_t, FixedPhase, ParamWindow, Region,
};
use beatmap::maps::{derivative_period_map, drive_of_period, order_preserving_extended, period_of_drive, step_oieb};
use beatmap::orbit::{
    classify_attractor, convergence_iterations, feigenbaum_ratios, iterate, AttractorKind, Budget, LogisticFamily,
    MapKind, PeriodBudget, PeriodMapFamily,
};
use beatmap::{MapError, MapState, ModelParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn params(tau: f64, t_stim: f64, delta_t: f64, delta_phi: f64) -> ModelParams {
    ModelParams::new(tau, t_stim, delta_t, delta_phi).unwrap()
}

fn preset(name: &str) -> (ModelParams, MapState) {
    let q = presets::get(name).unwrap();
    (params(q.tau, q.t_stim, q.delta_t, q.delta_phi), MapState::new(q.i0.unwrap_or(2.5), q.phi0.unwrap_or(0.3)))
}

fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn closed_form_round_trip() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for tau in [100.0, 1000.0, 2000.0] {
        let p = params(tau, 500.0, 0.0, 0.0);
        let (mut worst, mut first_bad) = (0.0f64, None);
        for k in 0..=9990 {
            let t = 10.0 + k as f64;
            let err = drive_of_period(t, &p)
                .and_then(|i| period_of_drive(i, &p))
                .map_or(f64::INFINITY, |back| (back - t).abs() / t);
            worst = worst.max(err);
            if err > 1e-12 && first_bad.is_none() {
                first_bad = Some(t);
            }
        }
        pass &= first_bad.is_none();
        lines.push(match first_bad {
            None => format!("tau {tau}: worst {worst:.1e}"),
            Some(t) => format!("tau {tau}: worst {worst:.1e}, exceeds 1e-12 from t = {t} ms"),
        });
    }
    verdict(pass, lines.join("; "))
}

fn one_dimensional_bound() -> Verdict {
    let p = params(1000.0, 500.0, 0.0, 0.0);
    let dc = stability_loss_delta_t(&p);
    let star = p.synchronous_drive();
    let starts = [0.9 * star, 0.99 * star, 1.01 * star, 1.1 * star];
    let below = p.with_rules(0.9 * dc, 0.0);
    let above = p.with_rules(1.1 * dc, 0.0);
    let converges = starts.iter().all(|&i| convergence_iterations(i, &below, 1e-9, 100_000).is_some());
    let fails = starts.iter().all(|&i| convergence_iterations(i, &above, 1e-9, 100_000).is_none());
    verdict(
        converges && fails && (dc - 0.0078354).abs() < 5e-8,
        format!("delta_c = {dc:.7}; converges at 0.9 delta_c: {converges}; fails at 1.1 delta_c: {fails}"),
    )
}

/// Iterates to settle after a tempo switch, in both directions.
fn switch_counts(tau: f64) -> (Option<usize>, Option<usize>) {
    let slow = params(tau, 500.0, 0.005, 0.0);
    let fast = slow.with_t_stim(250.0);
    (
        convergence_iterations(fast.synchronous_drive(), &slow, 1e-6, 100_000),
        convergence_iterations(slow.synchronous_drive(), &fast, 1e-6, 100_000),
    )
}

/// Slope of the period map at its fixed point.
fn fixed_point_slope(tau: f64, t_stim: f64) -> f64 {
    let p = params(tau, t_stim, 0.005, 0.0);
    derivative_period_map(p.synchronous_drive(), &p).unwrap()
}

fn tempo_change_asymmetry() -> Verdict {
    let mut pinned = Vec::new();
    let mut pass = true;
    for name in ["fig1c", "flat-slope"] {
        let tau = presets::get(name).unwrap().tau;
        let (up, down) = switch_counts(tau);
        pass &= matches!((up, down), (Some(u), Some(d)) if u < d);
        pinned.push(format!("tau {tau:.0}: 250->500 in {up:?}, 500->250 in {down:?}"));
    }
    // the property holds wherever the 500 ms fixed point is locally at least
    // as contracting as the 250 ms one
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut excluded, mut bad) = (0, 0, Vec::new());
    let mut lowest = f64::INFINITY;
    for _ in 0..500 {
        let tau = rng.gen_range(500.0..2000.0);
        if fixed_point_slope(tau, 500.0).abs() > fixed_point_slope(tau, 250.0).abs() {
            excluded += 1;
            continue;
        }
        lowest = lowest.min(tau);
        checked += 1;
        match switch_counts(tau) {
            (Some(u), Some(d)) if u < d => {}
            (u, d) => bad.push(format!("tau {tau:.1}: {u:?} vs {d:?}")),
        }
    }
    pass &= bad.is_empty() && checked >= 100;
    verdict(
        pass,
        format!(
            "{}; {checked} random tau in [{lowest:.0}, 2000] checked, {excluded} below excluded{}",
            pinned.join(", "),
            if bad.is_empty() { String::new() } else { format!(", violations: {}", bad.join(", ")) }
        ),
    )
}

fn eigenvalue_formula() -> Verdict {
    let fd_jacobian = |phase: FixedPhase, p: &ModelParams, h: f64| {
        let star = p.synchronous_drive();
        let phi = phase.value();
        let f = |i: f64, ph: f64| order_preserving_extended(i, ph, p).unwrap();
        let hi = h * star;
        let (a, b) = (f(star + hi, phi), f(star - hi, phi));
        let (c, d) = (f(star, phi + h), f(star, phi - h));
        [[(a.0 - b.0) / (2.0 * hi), (c.0 - d.0) / (2.0 * h)], [(a.1 - b.1) / (2.0 * hi), (c.1 - d.1) / (2.0 * h)]]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = params(
            rng.gen_range(500.0..2000.0),
            rng.gen_range(250.0..800.0),
            rng.gen_range(0.0..0.012),
            rng.gen_range(0.0..8.0),
        );
        for phase in [FixedPhase::Zero, FixedPhase::One] {
            let j = fd_jacobian(phase, &p, 1e-5);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let root = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
            let fd = [0.5 * (tr + root), 0.5 * (tr - root)];
            let cf = eigenvalues_at_fixed_point(phase, &p);
            let direct = (cf[0] - fd[0]).norm().max((cf[1] - fd[1]).norm());
            let swapped = (cf[0] - fd[1]).norm().max((cf[1] - fd[0]).norm());
            worst = worst.max(direct.min(swapped));
        }
    }
    verdict(worst < 1e-6, format!("400 fixed points, worst eigenvalue mismatch {worst:.1e}"))
}

fn region_signatures() -> Verdict {
    let window = ParamWindow::new((0.0, 0.01), (0.0, 7.0)).unwrap();
    let inside = presets::names().filter_map(|n| presets::get(n).ok()).all(|q| {
        (window.delta_t.0..=window.delta_t.1).contains(&q.delta_t)
            && (window.delta_phi.0..=window.delta_phi.1).contains(&q.delta_phi)
    });
    let grid = region_map(window, 200, 200, &params(1000.0, 500.0, 0.0, 0.0));
    let mut found = BTreeSet::new();
    let mut unlisted = BTreeSet::new();
    let mut flagged = 0;
    for c in &grid.cells {
        match c.label.region {
            Some(r) => {
                found.insert(r.numeral());
            }
            None if c.label.is_flagged() => flagged += 1,
            None => {
                unlisted.insert((c.label.class_phi0.label(), c.label.class_phi1.label()));
            }
        }
    }
    let all: BTreeSet<&str> = Region::ALL.iter().map(|r| r.numeral()).collect();
    verdict(
        inside && found == all && unlisted.is_empty(),
        format!(
            "{} of 9 signatures present, {} unlisted, {flagged} flagged cells, presets inside window: {inside}",
            found.len(),
            unlisted.len()
        ),
    )
}

type Run = (Vec<MapState>, Option<&'static str>);

fn map_run(x0: MapState, p: &ModelParams, n: usize) -> Run {
    let mut states = vec![x0];
    let mut s = x0;
    for _ in 0..n {
        match step_oieb(s, p) {
            Ok((next, _)) => {
                s = next;
                states.push(s);
            }
            Err(e) => return (states, Some(e.tag())),
        }
    }
    (states, None)
}

/// Largest per-cycle difference: relative in the drive, circular in the phase.
fn state_gap(a: &[MapState], b: &[MapState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| ((a.i - b.i).abs() / a.i.abs().max(b.i.abs()).max(1.0)).max(circular(a.phi, b.phi)))
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let names: Vec<&str> = presets::names().filter(|n| n.starts_with("fig")).collect();
    let (mut runs, mut failures, mut conditioned, mut worst) = (0, 0, 0, (0.0f64, String::new()));
    for name in &names {
        let (p, _) = preset(name);
        for _ in 0..1000 {
            let x0 = MapState::new(rng.gen_range(1.5..5.0), rng.gen_range(0.0..1.0));
            runs += 1;
            let Ok(trace) = simulate(x0, &p, 50) else {
                failures += 1;
                continue;
            };
            let sim = trace_to_map_states(&trace);
            let sim_end = trace.termination.as_ref().map(|t| t.tag);
            let (map, map_end) = map_run(x0, &p, 50);
            let gap = state_gap(&map, &sim);
            let same_end = map_end == sim_end && map.len() == sim.len();
            if gap > 1e-9 || !same_end {
                failures += 1;
                // growth of a 1e-12 perturbation of x0 along the same orbit
                let nudged = map_run(MapState::new(x0.i * (1.0 + 1e-12), x0.phi), &p, 50).0;
                let growth = if nudged.len() == map.len() { state_gap(&map, &nudged) / 1e-12 } else { f64::INFINITY };
                if gap <= 64.0 * f64::EPSILON * growth {
                    conditioned += 1;
                }
                if gap > worst.0 {
                    worst = (gap, format!("{name} from ({}, {})", x0.i, x0.phi));
                }
            }
        }
    }
    let detail = if failures == 0 {
        format!("{runs} runs over {} presets agree to 1e-9", names.len())
    } else {
        format!(
            "{failures} of {runs} runs disagree beyond 1e-9, {conditioned} of them within 64 ulp times the orbit's own \
             perturbation growth; worst {:.1e} at {}",
            worst.0, worst.1
        )
    };
    verdict(failures == 0, detail)
}

fn fig8_phenomenology() -> Verdict {
    let budget = Budget::default();
    let rows = calibrate(&[1000.0], &budget);
    let mut pass = true;
    let mut parts = Vec::new();
    for row in rows.iter().filter(|r| r.preset.starts_with("fig8")) {
        let mut ok = row.reproduced;
        if row.preset == "fig8d" {
            // bounded and aperiodic up to the period cap
            ok &= row.report.as_ref().is_some_and(|r| r.termination.is_none());
        }
        if row.preset == "fig8e" {
            let (p, x0) = preset("fig8e");
            let end = iterate(MapKind::Oieb, x0, &p, budget.transient).termination.map(|t| t.error);
            ok &= matches!(end, Some(MapError::Divergent { i }) | Some(MapError::Stalled { drive: i, .. }) if i <= 1.0);
        }
        pass &= ok;
        parts.push(format!("{} {}", row.preset, row.achieved));
    }
    if !pass {
        let taus: Vec<f64> = (0..16).map(|k| 500.0 + 100.0 * k as f64).collect();
        let sweep = calibrate(&taus, &budget);
        for label in LABELS.iter().filter(|l| l.preset.starts_with("fig8")) {
            let hits: Vec<String> =
                sweep.iter().filter(|r| r.preset == label.preset && r.reproduced).map(|r| r.tau.to_string()).collect();
            parts.push(format!(
                "calibration {}: expected {}, reproduced at tau = [{}]",
                label.preset,
                label.expected,
                hits.join(", ")
            ));
        }
    }
    verdict(pass, format!("tau 1000: {}", parts.join("; ")))
}

fn fig6c_period_three() -> Verdict {
    let (p, x0) = preset("fig6c");
    let budget = Budget::default();
    let r = classify_attractor(MapKind::Oieb, x0, &p, &budget);
    let mut tones: Vec<u32> = Vec::new();
    if r.period == Some(3) {
        let t = iterate(MapKind::Oieb, r.final_state, &p, 3);
        tones = t.records.iter().map(|c| c.tones_in_cycle).collect();
    }
    let mut sorted = tones.clone();
    sorted.sort_unstable();
    verdict(
        r.kind == AttractorKind::Periodic && r.period == Some(3) && sorted == [0, 1, 2],
        format!("{:?} period {:?}, tones per cycle {tones:?}", r.kind, r.period),
    )
}

fn feigenbaum() -> Verdict {
    let budget = PeriodBudget::default();
    let logistic = feigenbaum_ratios(&LogisticFamily, (2.9, 3.5699), 5, 4000, 1e-10, &budget);
    let base = params(1000.0, 500.0, 0.0, 0.0);
    let dc = stability_loss_delta_t(&base);
    let hi = beatmap::linear::divergence_delta_t(&base).unwrap();
    let period = feigenbaum_ratios(&PeriodMapFamily { base }, (0.9 * dc, hi), 5, 4000, 1e-10, &budget);
    let rel = |r: Option<f64>| r.map_or(f64::INFINITY, |f| (f - 4.669).abs() / 4.669);
    match (logistic, period) {
        (Ok(l), Ok(m)) => {
            let (fl, fm) = (l.ratio(5), m.ratio(5));
            verdict(
                rel(fl) < 0.02 && rel(fm) < 0.10,
                format!(
                    "logistic F5 = {:.4}; period map F3 = {:.4}, F4 = {:.4}, F5 = {:.4}",
                    fl.unwrap_or(f64::NAN),
                    m.ratio(3).unwrap_or(f64::NAN),
                    m.ratio(4).unwrap_or(f64::NAN),
                    fm.unwrap_or(f64::NAN)
                ),
            )
        }
        (l, m) => verdict(false, format!("cascade not found: logistic {:?}, period map {:?}", l.err(), m.err())),
    }
}

fn basin_structure() -> Verdict {
    let (p, _) = preset("fig4");
    let star = p.synchronous_drive();
    let mut parts = Vec::new();
    let mut pass = true;
    for (x0, want) in [(MapState::new(2.47, 0.25), 0u8), (MapState::new(2.62, 0.75), 1)] {
        let below = x0.i < star;
        let r = classify_attractor(MapKind::Oieb, x0, &p, &Budget::default());
        let t = iterate(MapKind::Oieb, x0, &p, 2000);
        let switches = t.records.iter().filter(|c| c.order_switch).count();
        let ok = r.kind == AttractorKind::FixedPoint && r.converged_phase == Some(want) && switches == 0;
        pass &= ok && (below == (want == 0));
        parts.push(format!(
            "({}, {}) -> {} phi = {:?}, {switches} switches",
            x0.phi,
            x0.i,
            r.kind.name(),
            r.converged_phase
        ));
    }
    verdict(pass, parts.join("; "))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let sweeps: [&[&str]; 6] = [
        &["regions", "--res", "120x120"],
        &["boundaries", "--lines", "101"],
        &["sweep1d", "--samples", "120"],
        &["basin", "--preset", "fig4", "--res", "16x16", "--format", "json"],
        &["calibrate", "--taus", "4"],
        &["critical", "--samples", "50"],
    ];
    let mut differing = Vec::new();
    for (k, args) in sweeps.iter().enumerate() {
        let mut outputs = Vec::new();
        for workers in ["1", "4"] {
            let out = dir.path().join(format!("{k}-{workers}.out"));
            let status = Command::new(env!("CARGO_BIN_EXE_beatmap"))
                .args(*args)
                .arg("--out")
                .arg(&out)
                .env("BEATMAP_WORKERS", workers)
                .status()
                .unwrap();
            outputs.push((status.code(), std::fs::read(&out).unwrap_or_default()));
        }
        if outputs[0] != outputs[1] || outputs[0].0 != Some(0) || outputs[0].1.is_empty() {
            differing.push(args[0]);
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} sweeps byte-identical with 1 and 4 workers", sweeps.len())
        } else {
            format!("outputs differ or failed for: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Verdict); 11] = [
        (1, "closed-form round trip", Duration::from_secs(1), closed_form_round_trip),
        (2, "1D stability bound", Duration::from_secs(1), one_dimensional_bound),
        (3, "tempo-change asymmetry", Duration::from_secs(1), tempo_change_asymmetry),
        (4, "eigenvalue formula", Duration::from_secs(5), eigenvalue_formula),
        (5, "region signatures", Duration::from_secs(30), region_signatures),
        (6, "oracle equivalence", Duration::from_secs(60), oracle_equivalence),
        (7, "fig8 phenomenology", Duration::from_secs(120), fig8_phenomenology),
        (8, "fig6c period 3", Duration::from_secs(10), fig6c_period_three),
        (9, "feigenbaum ratios", Duration::from_secs(120), feigenbaum),
        (10, "basin structure", Duration::from_secs(1), basin_structure),
        (11, "determinism", Duration::from_secs(30), determinism),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed < budget;
        if !pass {
            failed.push(n);
        }
        println!(
            "criterion {n:>2} {} {name}: {} [{:.2} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
