mod common;

use beatmap::linear::stability_loss_delta_t;
use beatmap::maps::*;
use beatmap::orbit::*;
use beatmap::roots::roots_on_segment;
use common::*;

fn oieb(name: &str) -> AttractorReport {
    classify_attractor(MapKind::Oieb, MapState::new(2.5, 0.3), &preset(name), &Budget::default())
}

#[test]
fn fig8_gallery() {
    let b = oieb("fig8b");
    assert_eq!((b.kind, b.period, b.order_switches_per_period), (AttractorKind::Periodic, Some(5), Some(2)));
    let c = oieb("fig8c");
    assert_eq!((c.kind, c.period), (AttractorKind::Periodic, Some(4)));
    assert_eq!((c.bg_spikes_per_period, c.tones_per_period), (Some(4), Some(3)));
    let d = oieb("fig8d");
    assert_eq!(d.kind, AttractorKind::Chaotic);
    assert!(d.lyapunov.unwrap() > 0.01);
    let e = oieb("fig8e");
    assert_eq!(e.kind, AttractorKind::Divergent);
    let f = oieb("fig8f");
    assert_eq!((f.kind, f.period), (AttractorKind::Periodic, Some(104)));
}

#[test]
fn fig6c_period_three_tone_pattern() {
    let p = preset("fig6c");
    let r = classify_attractor(MapKind::Oieb, MapState::new(2.5, 0.3), &p, &Budget::default());
    assert_eq!(r.period, Some(3));
    let t = iterate(MapKind::Oieb, r.final_state, &p, 3);
    let mut tones: Vec<u32> = t.records.iter().map(|c| c.tones_in_cycle).collect();
    let k = tones.iter().position(|&x| x == 2).unwrap();
    tones.rotate_left(k);
    assert_eq!(tones, vec![2, 1, 0]);
}

#[test]
fn periodic_reports_are_consistent() {
    for &(name, dt, dp) in &RULE_PRESETS {
        let p = params(dt, dp);
        let budget = Budget::default();
        let r = classify_attractor(MapKind::Oieb, MapState::new(2.5, 0.3), &p, &budget);
        if r.kind != AttractorKind::Periodic {
            continue;
        }
        let k = r.period.unwrap();
        let t = iterate(MapKind::Oieb, r.final_state, &p, 2 * k);
        // recurrence at k and at no divisor of k
        let rec = |a: &MapState, b: &MapState| {
            (a.i - b.i).abs() <= budget.recurrence_tol * a.i.max(b.i)
                && circular_distance(a.phi, b.phi) <= budget.recurrence_tol
        };
        assert!(rec(&t.states[0], &t.states[k]), "{name}");
        for d in (1..k).filter(|d| k % d == 0) {
            assert!(!(0..k).all(|j| rec(&t.states[j], &t.states[j + d])), "{name}: divisor {d}");
        }
        let recs = &t.records[..k];
        let tones: u32 = recs.iter().map(|c| c.tones_in_cycle).sum();
        assert_eq!(r.tones_per_period, Some(tones), "{name}");
        assert_eq!(r.bg_spikes_per_period, Some(k as u32));
        assert!((tones as i64 - k as i64).abs() <= 1, "{name}");
        let switches = recs.iter().filter(|c| c.tones_in_cycle != 1).count() as u32;
        assert_eq!(r.order_switches_per_period, Some(switches));
    }
}

#[test]
fn classification_is_deterministic() {
    let a = oieb("fig8d");
    let b = oieb("fig8d");
    assert_eq!(a, b);
}

#[test]
fn lyapunov_of_period_two_orbit() {
    let base = params(0.0, 0.0);
    let p = base.with_rules(1.05 * stability_loss_delta_t(&base), 0.0);
    let r = classify_attractor(MapKind::Period1d, MapState::new(2.0, 0.0), &p, &Budget::default());
    assert_eq!(r.period, Some(2));
    let a = r.final_state.i;
    let b = step_period_map(a, &p).unwrap();
    let want = 0.5 * (derivative_period_map(a, &p).unwrap() * derivative_period_map(b, &p).unwrap()).abs().ln();
    let got = lyapunov_exponent(MapKind::Period1d, r.final_state, &p, 20_000).unwrap();
    assert!((got.exponent - want).abs() < 1e-3, "{} vs {}", got.exponent, want);
}

#[test]
fn period_two_orbit_solves_second_iterate() {
    let base = params(0.0, 0.0);
    let p = base.with_rules(1.05 * stability_loss_delta_t(&base), 0.0);
    let star = p.synchronous_drive();
    let g = |i: f64| step_period_map(step_period_map(i, &p).unwrap(), &p).unwrap() - i;
    let roots = roots_on_segment(g, 2.0, 3.2, 4000);
    let cycle: Vec<f64> = roots.into_iter().filter(|r| (r - star).abs() > 1e-6).collect();
    assert_eq!(cycle.len(), 2);
    let r = classify_attractor(MapKind::Period1d, MapState::new(2.0, 0.0), &p, &Budget::default());
    let orbit = [r.final_state.i, step_period_map(r.final_state.i, &p).unwrap()];
    for x in orbit {
        assert!(cycle.iter().any(|c| (c - x).abs() < 1e-7), "{x} not in {cycle:?}");
        assert!((step_period_map(x, &p).unwrap() - x).abs() > 1e-3);
    }
}

#[test]
fn bifurcation_scan_shapes() {
    let base = params(0.0, 0.0);
    let fam = PeriodMapFamily { base };
    let dc = stability_loss_delta_t(&base);
    let budget = PeriodBudget::default();
    let below = bifurcation_scan_1d(&fam, (0.1 * dc, 0.95 * dc), 20, &budget);
    assert!(below.iter().all(|c| c.period == Some(1)));
    let above = bifurcation_scan_1d(&fam, (1.01 * dc, 1.1 * dc), 10, &budget);
    assert!(above.iter().all(|c| c.period == Some(2)));
    let wide = bifurcation_scan_1d(&fam, (0.9 * dc, 1.32 * dc), 400, &budget);
    let periods: Vec<Option<usize>> = wide.iter().map(|c| c.period).collect();
    let first = |n: usize| periods.iter().position(|&q| q == Some(n));
    let (p2, p4) = (first(2).unwrap(), first(4).unwrap());
    assert!(p2 < p4);
    let chaos = periods.iter().position(|q| q.is_none()).unwrap();
    assert!(p4 < chaos);
    assert!(wide.iter().all(|c| !c.divergent));
}

#[test]
fn onset_brackets_double_the_period() {
    let base = params(0.0, 0.0);
    let fam = PeriodMapFamily { base };
    let budget = PeriodBudget::default();
    let dc = stability_loss_delta_t(&base);
    let r = feigenbaum_ratios(&fam, (0.9 * dc, 1.4 * dc), 3, 1500, 1e-10, &budget).unwrap();
    for (k, &d) in r.doubling_params.iter().enumerate() {
        let n = 1usize << (k + 1);
        assert_eq!(detect_period(&fam, d - 1e-7, &budget), PeriodDetection::Period(n / 2));
        assert_eq!(detect_period(&fam, d + 1e-7, &budget), PeriodDetection::Period(n));
    }
    assert!(r.doubling_params.windows(2).all(|w| w[0] < w[1]));
    assert!((r.doubling_params[0] - dc).abs() < 1e-7);
}

#[test]
fn logistic_cascade_converges() {
    let r = feigenbaum_ratios(&LogisticFamily, (2.9, 3.5699), 5, 4000, 1e-10, &PeriodBudget::default()).unwrap();
    let known = [3.0, 3.449_489_742_783_178, 3.544_090_359_552_3, 3.564_407_266_095, 3.568_759_419_544];
    for (a, b) in r.doubling_params.iter().zip(known) {
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }
    let f5 = r.ratio(5).unwrap();
    assert!((f5 - 4.669).abs() / 4.669 < 0.02, "F5 = {f5}");
}

#[test]
fn cascade_truncation_reported() {
    let base = params(0.0, 0.0);
    let dc = stability_loss_delta_t(&base);
    let err = feigenbaum_ratios(&PeriodMapFamily { base }, (0.5 * dc, 1.1 * dc), 3, 200, 1e-10, &PeriodBudget::default());
    assert!(matches!(err, Err(beatmap::AnalysisError::CascadeTruncated { found: 1, wanted: 3 })));
}

#[test]
fn fig4_basin_quadrants() {
    let p = preset("fig4");
    let star = p.synchronous_drive();
    let budget = Budget { transient: 3000, observe: 2000, ..Budget::default() };
    let q3 = basin_scan(MapKind::Oieb, (star - 0.1, star - 0.01), (0.05, 0.45), 6, 6, &p, &budget);
    assert!(q3.iter().all(|c| c.kind == AttractorKind::FixedPoint && c.converged_phase == Some(0)));
    let q1 = basin_scan(MapKind::Oieb, (star + 0.01, star + 0.1), (0.55, 0.95), 6, 6, &p, &budget);
    assert!(q1.iter().all(|c| c.kind == AttractorKind::FixedPoint && c.converged_phase == Some(1)));
}

#[test]
fn straddling_the_discontinuity_splits_the_basin() {
    let p = preset("fig4");
    let star = p.synchronous_drive();
    let budget = Budget { transient: 5000, observe: 2000, ..Budget::default() };
    let lo = classify_attractor(MapKind::Oieb, MapState::new(star, 0.5 - 1e-6), &p, &budget);
    let hi = classify_attractor(MapKind::Oieb, MapState::new(star, 0.5 + 1e-6), &p, &budget);
    assert_eq!(lo.converged_phase, Some(0));
    assert_eq!(hi.converged_phase, Some(1));
}

#[test]
fn fig4_orbits_preserve_order() {
    let p = preset("fig4");
    for (x0, phase) in [(MapState::new(2.47, 0.25), 0), (MapState::new(2.62, 0.75), 1)] {
        let t = iterate(MapKind::Oieb, x0, &p, 3000);
        assert!(t.records.iter().all(|c| c.tones_in_cycle == 1));
        let r = classify_attractor(MapKind::Oieb, x0, &p, &Budget::default());
        assert_eq!(r.converged_phase, Some(phase));
    }
}

#[test]
fn tempo_switch_asymmetry() {
    let base = params(0.005, 0.0);
    let slow = base.with_t_stim(500.0);
    let fast = base.with_t_stim(250.0);
    let up = convergence_iterations(fast.synchronous_drive(), &slow, 1e-6, 10_000).unwrap();
    let down = convergence_iterations(slow.synchronous_drive(), &fast, 1e-6, 10_000).unwrap();
    assert!(up < down, "250->500 took {up}, 500->250 took {down}");
}
