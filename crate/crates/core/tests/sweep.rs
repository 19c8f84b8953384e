use tweezer_core::presets::{self, hand_tuned_settings};
use tweezer_core::sim::predict_probe_loss;
use tweezer_core::*;

fn spec(trials: u64) -> SweepSpec {
    SweepSpec::from_settings(&hand_tuned_settings(), trials, 4)
}

#[test]
fn sweep_is_reproducible() {
    let template = presets::baseline();
    let a = sweep_depths(&spec(3000), &template).unwrap();
    let b = sweep_depths(&spec(3000), &template).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_point_sweep_equals_direct_run() {
    let template = presets::calibrated();
    let setting = hand_tuned_settings()[4];
    let one = SweepSpec::from_settings(&[setting], 4000, 21);
    let row = sweep_depths(&one, &template).unwrap().remove(0);

    let cfg = ExperimentConfig {
        trap: TrapConfig {
            depth: setting.depth,
            ..template.trap
        },
        probe: setting.probe,
        trials: 4000,
        seed: 21,
        ..template
    };
    let run = run_pair(&cfg).unwrap();
    let rep = DiscriminationReport::from_histograms(&run.dark.histogram, &run.bright.histogram).unwrap();
    assert_eq!(row.fidelity, rep.fidelity);
    assert_eq!(row.threshold, rep.threshold);
    assert_eq!(row.mean_bright, rep.mean_bright);
    assert_eq!(row.probe_loss, run.bright.losses.probe_heating_fraction());
}

#[test]
fn failing_point_is_identified() {
    let mut s = spec(100);
    s.points[3].schedule = ProbeSchedule::Fixed(ProbeConfig::new(-1.0, 1e-3));
    match sweep_depths(&s, &presets::baseline()) {
        Err(SweepError::Point { index, .. }) => assert_eq!(index, 3),
        other => panic!("unexpected {other:?}"),
    }
}

fn quick_constraints(max_probe_loss: f64) -> OptimizationConstraints {
    OptimizationConstraints {
        max_probe_loss,
        duration_steps: 12,
        saturation_steps: 12,
        loss_trials: 2000,
        ..OptimizationConstraints::default()
    }
}

#[test]
fn relaxing_loss_ceiling_never_lowers_fidelity() {
    // a shallow, hot trap where the ceiling actually binds
    let template = ExperimentConfig {
        trap: TrapConfig {
            loading_depth: 0.3e-3,
            ..TrapConfig::with_depth(0.3e-3)
        },
        ..presets::baseline()
    };
    let mut last = 0.0;
    for ceiling in [0.0, 1e-3, 0.01, 0.05, 0.2, 0.5] {
        let best = optimize_probe(0.3e-3, &quick_constraints(ceiling), &template, &[]).unwrap();
        assert!(best.predicted_loss <= ceiling);
        assert!(best.fidelity >= last, "ceiling {ceiling}: {} < {last}", best.fidelity);
        last = best.fidelity;
    }
}

#[test]
fn noise_free_detector_optimum_beats_table() {
    let template = ExperimentConfig {
        detector: DetectorConfig {
            dark_count_rate: 0.0,
            ..DetectorConfig::default()
        },
        ..presets::baseline()
    };
    for s in hand_tuned_settings() {
        let best = optimize_probe(s.depth, &quick_constraints(0.02), &template, &[s.probe]).unwrap();
        let table = ReadoutModel::from_configs(&template.constants, &s.probe, &template.detector)
            .optimal()
            .fidelity();
        assert!(best.fidelity >= table, "{} < {table}", best.fidelity);
    }
}

#[test]
fn optimum_respects_constraints() {
    let template = presets::baseline();
    let c = quick_constraints(0.02);
    let best = optimize_probe(0.7e-3, &c, &template, &[]).unwrap();
    assert!(c.admits(&best.probe));
    let trap = TrapConfig {
        depth: 0.7e-3,
        ..template.trap
    };
    let again = predict_probe_loss(&template.constants, &trap, &best.probe, 2000, template.seed, 99);
    assert!(again <= 0.05, "{again}");
}

#[test]
fn linear_schedule_passes_near_table() {
    let settings = hand_tuned_settings();
    let fit = LinearSchedule::fit(&settings).unwrap();
    for s in settings {
        let p = fit.at(s.depth).probe;
        assert!((p.duration - s.probe.duration).abs() < 0.1e-3);
        assert!((p.saturation - s.probe.saturation).abs() < 6e-3);
    }
}
