use tweezer_core::discrimination::nonstretched_misread;
use tweezer_core::presets;
use tweezer_core::*;

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn noiseless_errors_match_poisson_model() {
    let cfg = ExperimentConfig {
        noise: NoiseConfig::noiseless(),
        trials: 50_000,
        seed: 11,
        ..presets::baseline()
    };
    let run = run_pair(&cfg).unwrap();
    let model = ReadoutModel::from_configs(&cfg.constants, &cfg.probe, &cfg.detector);
    for nc in 0..5 {
        let mc = classification_errors(&run.dark.histogram, &run.bright.histogram, nc).unwrap();
        let th = model.errors_at(nc);
        let n = cfg.trials;
        let tol_b = 3.0 * binomial_se(th.epsilon_bright, n).max(1.0 / n as f64);
        let tol_d = 3.0 * binomial_se(th.epsilon_dark, n).max(1.0 / n as f64);
        assert!((mc.epsilon_bright - th.epsilon_bright).abs() <= tol_b, "n_c={nc}: {mc:?} vs {th:?}");
        assert!((mc.epsilon_dark - th.epsilon_dark).abs() <= tol_d, "n_c={nc}: {mc:?} vs {th:?}");
    }
}

#[test]
fn nonstretched_atoms_match_closed_form() {
    let depump = 0.01;
    let cfg = ExperimentConfig {
        noise: NoiseConfig {
            zeeman_prep_fidelity: 0.0,
            depump_probability_per_scatter: depump,
            ..NoiseConfig::noiseless()
        },
        prepared_state: PreparedState::Bright,
        trials: 50_000,
        seed: 5,
        ..presets::baseline()
    };
    let res = run_experiment(&cfg).unwrap();
    let model = ReadoutModel::from_configs(&cfg.constants, &cfg.probe, &cfg.detector);
    let nc = 2;
    let expected = model.errors_at(nc).epsilon_bright + nonstretched_misread(&model, depump, nc);
    let observed = res.histogram.trials_at_most(nc) as f64 / res.histogram.kept_trials() as f64;
    let tol = 3.0 * binomial_se(expected, res.histogram.kept_trials());
    assert!((observed - expected).abs() <= tol, "{observed} vs {expected}");
}

#[test]
fn baseline_bright_mean_is_recovered() {
    let cfg = ExperimentConfig {
        noise: NoiseConfig::noiseless(),
        prepared_state: PreparedState::Bright,
        trials: 20_000,
        seed: 3,
        ..presets::baseline()
    };
    let res = run_experiment(&cfg).unwrap();
    let expected = expected_counts(&cfg.constants, &cfg.probe, &cfg.detector, PreparedState::Bright);
    let fitted = fit_poisson(&res.histogram).unwrap();
    let se = (expected / res.histogram.kept_trials() as f64).sqrt();
    assert!((fitted - expected).abs() <= 3.0 * se, "{fitted} vs {expected}");
}

#[test]
fn trial_level_and_aggregate_runs_agree() {
    let cfg = ExperimentConfig {
        trials: 2000,
        seed: 8,
        ..presets::calibrated()
    }
    .with_state(PreparedState::Bright);
    let outcomes = simulate_trials(&cfg);
    let res = run_experiment(&cfg).unwrap();
    let kept = CountHistogram::from_samples(
        PreparedState::Bright,
        outcomes.iter().filter(|o| o.post_selected).map(|o| o.detected),
    );
    assert_eq!(kept, res.histogram);
    let heated = outcomes
        .iter()
        .filter(|o| o.loss_cause == LossCause::ProbeHeating)
        .count() as u64;
    assert_eq!(heated, res.losses.probe_heating);
    for (i, o) in outcomes.iter().enumerate().step_by(97) {
        assert_eq!(*o, simulate_trial(&cfg, i as u64));
    }
}

#[test]
fn seeds_change_results() {
    let a = run_pair(&ExperimentConfig { seed: 1, trials: 1000, ..presets::baseline() }).unwrap();
    let b = run_pair(&ExperimentConfig { seed: 2, trials: 1000, ..presets::baseline() }).unwrap();
    assert_ne!(a, b);
}

#[test]
fn shallow_trap_loses_hot_atoms() {
    let cfg = ExperimentConfig {
        trap: TrapConfig {
            loading_depth: 0.1e-3,
            ..TrapConfig::with_depth(0.1e-3)
        },
        probe: ProbeConfig::new(0.1, 5e-3),
        noise: NoiseConfig::noiseless(),
        prepared_state: PreparedState::Bright,
        trials: 2000,
        ..presets::baseline()
    };
    let res = run_experiment(&cfg).unwrap();
    assert!(res.losses.probe_heating_fraction() > 0.9, "{:?}", res.losses);
}

#[test]
fn nominal_bright_mean_and_heating() {
    let cfg = ExperimentConfig {
        trials: 100_000,
        seed: 17,
        ..presets::baseline()
    }
    .with_state(PreparedState::Bright);
    let res = run_experiment(&cfg).unwrap();
    let mean = res.histogram.sample_mean().unwrap();
    assert!((9.2..=10.0).contains(&mean), "{mean}");
    assert!(res.losses.probe_heating_fraction() < 0.02);
}
