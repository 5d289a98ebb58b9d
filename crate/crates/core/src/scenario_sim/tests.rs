use std::collections::BTreeMap;

use super::*;
use crate::fixtures;
use crate::odd_monitor::{Modality, Mode, Region, Surface};

fn segment(region: Region, surface: Surface, km: f64) -> Segment {
    Segment {
        region,
        surface,
        length_km: km,
        speed_kmh: 72.0,
        in_odd: true,
    }
}

fn spec(duration_ms: u64, injections: Vec<Injection>) -> ScenarioSpec {
    ScenarioSpec {
        id: "t".into(),
        seed: 42,
        duration_ms,
        tick_ms: 10,
        scenario_class: "stale_map".into(),
        segments: vec![
            segment(Region::Urban, Surface::Dry, 0.5),
            segment(Region::Rural, Surface::Wet, 0.5),
        ],
        injections,
        llp: LlpModel::default(),
    }
}

fn inj(kind: InjectionKind, start_ms: u64, duration_ms: u64, magnitude: f64) -> Injection {
    Injection {
        kind,
        start_ms,
        duration_ms,
        magnitude,
        modality: None,
    }
}

fn cfg() -> MonitorConfig<f64> {
    MonitorConfig::default()
}

#[test]
fn no_injections_gives_base_confidences() {
    let mut s = spec(60_000, vec![]);
    s.llp.noise_sigma = 0.0;
    let trace = generate(&s).unwrap();
    assert_eq!(trace.frames.len(), 6000);
    for f in &trace.frames {
        let base = s.llp.base_confidence(f.region, f.surface);
        for m in Modality::ALL {
            assert!(f.reading(m).valid);
            assert_eq!(f.reading(m).confidence, base);
        }
        assert!(f.true_in_odd);
    }
    // 72 km/h is 20 m/s: 25 s per 0.5 km segment, so both segments appear
    let regions: std::collections::BTreeSet<_> = trace.frames.iter().map(|f| f.region).collect();
    assert_eq!(regions.len(), 2);
    assert_eq!(trace.frames[2499].region, Region::Urban);
    assert_eq!(trace.frames[2500].region, Region::Rural);
}

#[test]
fn gps_ramp_is_linear() {
    let s = spec(
        120_000,
        vec![inj(InjectionKind::GpsDriftRamp, 10_000, 60_000, 5.0)],
    );
    let trace = generate(&s).unwrap();
    let base = s.llp.base_gps_err_m;
    for f in &trace.frames {
        let expected = if (10_000..70_000).contains(&f.t) {
            5.0 * (f.t - 10_000) as f64 / 60_000.0
        } else {
            0.0
        };
        assert!((f.gps_err_m - base - expected).abs() < 1e-12, "t={}", f.t);
    }
    assert_eq!(trace.frames[1000].gps_err_m, base);
    assert!((trace.frames[6999].gps_err_m - base - 5.0).abs() < 1e-3);
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let s = spec(30_000, vec![inj(InjectionKind::Weather, 1000, 5000, 0.5)]);
    assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(
        generate(&s).unwrap().frames,
        generate(&other).unwrap().frames
    );
}

#[test]
fn injections_are_local() {
    let clean = generate(&spec(40_000, vec![])).unwrap();
    let mut gap = inj(InjectionKind::DataGap, 20_000, 3_000, 0.0);
    gap.modality = Some(Modality::Radar);
    for i in [
        inj(InjectionKind::GpsDriftRamp, 10_000, 5_000, 8.0),
        inj(InjectionKind::CameraNoise, 10_000, 5_000, 3.0),
        inj(InjectionKind::Weather, 10_000, 5_000, 1.0),
        inj(InjectionKind::MapStale, 10_000, 5_000, 30.0),
        inj(InjectionKind::BoundarySkim, 10_000, 5_000, 0.5),
        gap,
    ] {
        let (lo, hi) = (i.start_ms, i.start_ms + i.duration_ms);
        let t = generate(&spec(40_000, vec![i])).unwrap();
        let mut touched = 0;
        for (a, b) in clean.frames.iter().zip(&t.frames) {
            if a.t < lo || a.t >= hi {
                assert_eq!(a, b);
            } else if a != b {
                touched += 1;
            }
        }
        assert!(touched > 0);
    }
}

#[test]
fn spec_errors() {
    let overlap = spec(
        60_000,
        vec![
            inj(InjectionKind::Weather, 0, 10_000, 0.5),
            inj(InjectionKind::Weather, 9_990, 100, 0.2),
        ],
    );
    assert!(matches!(generate(&overlap), Err(SimError::Spec(m)) if m.contains("overlap")));
    // back to back is fine, and different channels may overlap
    let ok = spec(
        60_000,
        vec![
            inj(InjectionKind::Weather, 0, 10_000, 0.5),
            inj(InjectionKind::Weather, 10_000, 100, 0.2),
            inj(InjectionKind::CameraNoise, 0, 10_000, 1.0),
        ],
    );
    ok.validate().unwrap();
    let mut gap_a = inj(InjectionKind::DataGap, 0, 1000, 0.0);
    gap_a.modality = Some(Modality::Gps);
    let mut gap_b = gap_a.clone();
    gap_b.modality = Some(Modality::Camera);
    spec(60_000, vec![gap_a, gap_b]).validate().unwrap();

    assert!(spec(60_000, vec![inj(InjectionKind::DataGap, 0, 10, 0.0)])
        .validate()
        .is_err());
    assert!(spec(
        60_000,
        vec![inj(InjectionKind::Weather, 59_000, 2_000, 0.1)]
    )
    .validate()
    .is_err());
    assert!(spec(60_005, vec![]).validate().is_err());
    let mut s = spec(60_000, vec![]);
    s.segments[0].length_km = 0.0;
    assert!(s.validate().is_err());
}

#[test]
fn spec_toml_round_trip() {
    let mut gap = inj(InjectionKind::DataGap, 0, 1000, 0.0);
    gap.modality = Some(Modality::Camera);
    let s = spec(60_000, vec![gap, inj(InjectionKind::Weather, 0, 1000, 0.3)]);
    let back = ScenarioSpec::from_toml(&s.to_toml()).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.digest(), s.digest());
}

#[test]
fn trace_file_round_trip_is_exact() {
    let t = generate(&spec(
        5_000,
        vec![inj(InjectionKind::GpsDriftRamp, 0, 5_000, 3.3)],
    ))
    .unwrap();
    let text = write_trace(&t);
    assert!(text.starts_with("# odd-assure trace v1\n# scenario_id=t\n"));
    assert!(text.contains("# seed=42\n"));
    let back = parse_trace(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(write_trace(&back), text);
    assert!(parse_trace("t_ms\n").is_err());
}

#[test]
fn nominal_replay_is_one_full_autonomy_segment() {
    let t = generate(&spec(60_000, vec![])).unwrap();
    let run = replay(&t, &cfg()).unwrap();
    assert_eq!(run.outputs.len(), 6000);
    assert_eq!(run.segments(), vec![(Mode::FullAutonomy, 0, 59_990)]);
    assert_eq!(run.events.len(), 1);
    assert_eq!(run.terminal_mode(), Some(Mode::FullAutonomy));
}

#[test]
fn confidence_dip_requests_safe_state_within_latency() {
    let t = generate(&spec(
        10_000,
        vec![inj(InjectionKind::BoundarySkim, 5_000, 1_000, 0.0)],
    ))
    .unwrap();
    let run = replay(&t, &cfg()).unwrap();
    let safe = run
        .events
        .iter()
        .find(|e| e.mode == Mode::SafeStateRequested)
        .unwrap();
    assert!(safe.t >= 5_000 && safe.t <= 5_100, "{}", safe.t);
    assert_eq!(run.terminal_mode(), Some(Mode::SafeStateRequested));
}

#[test]
fn run_record_round_trip_and_replay_identity() {
    let t = generate(&spec(
        3_000,
        vec![inj(InjectionKind::MapStale, 1_000, 500, 30.0)],
    ))
    .unwrap();
    let a = replay(&t, &cfg()).unwrap();
    let b = replay(&t, &cfg()).unwrap();
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    let back = RunRecord::from_jsonl(&a.to_jsonl()).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.digest(), a.digest());

    let mut tampered =
        a.to_jsonl()
            .replacen("\"confidence_floor\":0.8", "\"confidence_floor\":0.7", 1);
    assert!(RunRecord::from_jsonl(&tampered).is_err());
    tampered = a.to_jsonl();
    tampered.truncate(tampered.len() / 2);
    assert!(RunRecord::from_jsonl(&tampered).is_err());
}

#[test]
fn tick_mismatch_is_rejected() {
    let t = generate(&spec(1_000, vec![])).unwrap();
    let c = MonitorConfig {
        tick_ms: 20,
        ..cfg()
    };
    assert!(matches!(replay(&t, &c), Err(SimError::TickMismatch { .. })));
}

#[test]
fn all_correct_run_has_full_accuracy() {
    let t = generate(&spec(60_000, vec![])).unwrap();
    let run = replay(&t, &cfg()).unwrap();
    let r = metrics(&run, &t, 0.95, &Thresholds::default()).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.false_classifications, 0);
    assert_eq!(r.unsafe_events, 0);
    assert_eq!(r.max_deviation, Some(0.0));
    assert!((r.km - 1.2).abs() < 1e-9);
    assert_eq!(r.verdicts["REQ-3"], Verdict::InsufficientEvidence);
    assert_eq!(r.verdicts["REQ-4"], Verdict::Pass);
}

#[test]
fn fooled_skim_is_an_unsafe_exposure_event() {
    let t = generate(&spec(
        20_000,
        vec![inj(InjectionKind::BoundarySkim, 5_000, 2_000, 1.0)],
    ))
    .unwrap();
    let run = replay(&t, &cfg()).unwrap();
    let r = metrics(&run, &t, 0.95, &Thresholds::default()).unwrap();
    assert_eq!(r.unsafe_events, 1);
    assert_eq!(r.false_classifications, 1);
    assert!((r.unsafe_km - 0.04).abs() < 1e-9);
    assert!((r.accuracy - 0.9).abs() < 1e-12);
    assert_eq!(r.verdicts["REQ-3"], Verdict::Fail);
}

#[test]
fn accuracy_decomposes_over_regions() {
    let t = generate(&spec(
        120_000,
        vec![inj(InjectionKind::BoundarySkim, 20_000, 4_000, 1.0)],
    ))
    .unwrap();
    let run = replay(&t, &cfg()).unwrap();
    let r = metrics(&run, &t, 0.95, &Thresholds::default()).unwrap();
    let weighted: f64 = r
        .by_region
        .values()
        .map(|g| g.accuracy * g.ticks as f64)
        .sum::<f64>()
        / r.ticks as f64;
    assert!((weighted - r.accuracy).abs() < 1e-15);
}

#[test]
fn metrics_preconditions() {
    let t = generate(&spec(1_000, vec![])).unwrap();
    let run = replay(&t, &cfg()).unwrap();
    let other = generate(&spec(1_000, vec![inj(InjectionKind::Weather, 0, 10, 0.1)])).unwrap();
    let th = Thresholds::default();
    assert!(matches!(
        metrics(&run, &other, 0.95, &th),
        Err(SimError::Metrics(_))
    ));
    let mut empty = run.clone();
    empty.outputs.clear();
    assert!(
        matches!(metrics(&empty, &t, 0.95, &th), Err(SimError::Metrics(m)) if m.contains("zero"))
    );
}

fn report(id: &str, class: &str, accuracy: f64, events: u64, km: f64) -> MetricsReport {
    MetricsReport {
        scenario_id: id.into(),
        scenario_class: class.into(),
        seed: 0,
        config_digest: "cfg".into(),
        trace_digest: String::new(),
        ticks: 1,
        hours: 1.0,
        km,
        accuracy,
        false_classifications: 0,
        false_per_10h: 0.0,
        by_region: BTreeMap::new(),
        by_surface: BTreeMap::new(),
        region_deviation: None,
        surface_deviation: None,
        max_deviation: None,
        unsafe_events: events,
        unsafe_km: 0.0,
        bound_confidence: 0.95,
        event_rate_upper_bound: None,
        verdicts: BTreeMap::new(),
    }
}

#[test]
fn degradation_examples() {
    let th = Thresholds::default();
    let base = report("a", "c", 0.995, 0, 1.0);
    let d = compare_pair(&base, &report("b", "c", 0.991, 0, 1.0), &th).unwrap();
    assert!((d.degradation_pp - 0.4).abs() < 1e-9);
    assert_eq!(d.verdict, Verdict::Pass);
    let d = compare_pair(&base, &report("b", "c", 0.980, 0, 1.0), &th).unwrap();
    assert!((d.degradation_pp - 1.5).abs() < 1e-9);
    assert_eq!(d.verdict, Verdict::Fail);
    let d = compare_pair(&base, &base, &th).unwrap();
    assert_eq!(d.degradation_pp, 0.0);
    assert_eq!(d.verdict, Verdict::Pass);
    // exactly one point is not "less than one point"
    let d = compare_pair(&base, &report("b", "c", 0.985, 0, 1.0), &th).unwrap();
    assert_eq!(d.verdict, Verdict::Fail);

    let mut other = base.clone();
    other.config_digest = "other".into();
    assert!(matches!(
        compare_pair(&base, &other, &th),
        Err(SimError::Comparison(_))
    ));
}

#[test]
fn region_spread_example() {
    let mut r = report("a", "c", 0.992, 0, 1.0);
    for (region, acc) in [
        (Region::Urban, 0.995),
        (Region::Suburban, 0.991),
        (Region::Rural, 0.990),
    ] {
        r.by_region.insert(
            region,
            GroupAccuracy {
                ticks: 1000,
                correct: (acc * 1000.0) as u64,
                accuracy: acc,
            },
        );
    }
    r.max_deviation = super::metrics::spread_for_tests(&r.by_region);
    assert!((r.max_deviation.unwrap() - 0.005).abs() < 1e-12);
    assert_eq!(req4_verdict(&r, &Thresholds::default()), Verdict::Pass);
    r.max_deviation = Some(0.021);
    assert_eq!(req4_verdict(&r, &Thresholds::default()), Verdict::Fail);
    r.max_deviation = None;
    assert_eq!(
        req4_verdict(&r, &Thresholds::default()),
        Verdict::InsufficientEvidence
    );
}

#[test]
fn target_verdicts() {
    let target = |class: &str, rate: f64| crate::cause_tree::ValidationTarget {
        scenario_class: class.into(),
        max_event_rate: rate,
        confidence_level: 0.95,
    };
    let targets = [target("a", 1e-4), target("b", 1e-4), target("c", 1e-4)];
    // 0 events over 5e4 km: bound ~6e-5 <= 1e-4
    let pass = report("r1", "a", 1.0, 0, 50_000.0);
    // 0 events over 100 km: bound ~3e-2
    let thin = report("r2", "b", 1.0, 0, 100.0);
    // 2 events over 1000 km: point 2e-3
    let fail = report("r3", "c", 1.0, 2, 1000.0);
    let v = evaluate_targets(&[pass.clone(), thin.clone()], &targets[..2]).unwrap();
    assert_eq!(v.classes[0].verdict, Verdict::Pass);
    assert_eq!(v.classes[1].verdict, Verdict::InsufficientEvidence);
    assert_eq!(v.aggregate, Verdict::InsufficientEvidence);

    let mut pass_b = thin.clone();
    pass_b.km = 50_000.0;
    let v = evaluate_targets(&[pass.clone(), pass_b, fail], &targets).unwrap();
    assert_eq!(
        v.classes.iter().map(|c| c.verdict).collect::<Vec<_>>(),
        [Verdict::Pass, Verdict::Pass, Verdict::Fail]
    );
    assert_eq!(v.aggregate, Verdict::Fail);

    // a target nobody drove is not evidence of anything
    let v = evaluate_targets(std::slice::from_ref(&pass), &targets[..2]).unwrap();
    assert_eq!(v.classes[1].km, 0.0);
    assert_eq!(v.aggregate, Verdict::InsufficientEvidence);

    let stray = report("r4", "nowhere", 1.0, 0, 1.0);
    assert!(matches!(
        evaluate_targets(&[stray], &targets),
        Err(SimError::Allocation(_))
    ));
}

#[test]
fn batch_matches_sequential_and_is_sorted() {
    let mut specs: Vec<_> = (0..6)
        .map(|i| {
            let mut s = spec(
                20_000,
                vec![inj(InjectionKind::Weather, 1_000, 2_000, 0.1 * i as f64)],
            );
            s.id = format!("s{}", 5 - i);
            s.seed = i;
            s
        })
        .collect();
    let th = Thresholds::default();
    let batch = run_batch(&specs, &cfg(), 0.95, &th).unwrap();
    specs.sort_by(|a, b| a.id.cmp(&b.id));
    let seq: Vec<_> = specs
        .iter()
        .map(|s| {
            let t = generate(s).unwrap();
            metrics(&replay(&t, &cfg()).unwrap(), &t, 0.95, &th).unwrap()
        })
        .collect();
    assert_eq!(batch, seq);
}

#[test]
fn thresholds_follow_the_requirement_fixture() {
    assert_eq!(
        Thresholds::from_requirements(&fixtures::requirements()),
        Thresholds::default()
    );
}
