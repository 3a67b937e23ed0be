use regime_qml::dgp::{simulate, HmmDgpParams, OutcomeKind, SimOptions, DEFAULT_BURN_IN};
use regime_qml::estimator::{align_permutation, qml_estimate, EstimatorConfig};
use regime_qml::inference::{sandwich_cov, HacConfig};
use regime_qml::mixture::ModelSpec;
use regime_qml::oracle::{pseudo_true_weights, PseudoTrueResult};

fn paper_oracle(seed: u64) -> PseudoTrueResult {
    pseudo_true_weights(&HmmDgpParams::paper_hmm(0.0, 0.0), 1_000_000, DEFAULT_BURN_IN, seed).unwrap()
}

#[test]
fn pseudo_true_weights_are_seed_robust_and_agree_with_occupancy() {
    let a = paper_oracle(1);
    let b = paper_oracle(2);
    assert!(a.weights_star[0] > 0.5);
    for s in 0..2 {
        let joint = (a.mc_error[s].powi(2) + b.mc_error[s].powi(2)).sqrt();
        assert!((a.weights_star[s] - b.weights_star[s]).abs() < 3.0 * joint);
        let cross = (a.mc_error[s].powi(2) + a.occupancy_mc_error[s].powi(2)).sqrt();
        assert!((a.weights_star[s] - a.occupancy[s]).abs() < 3.0 * cross);
        assert!(a.mc_error[s] <= a.occupancy_mc_error[s]);
    }
    assert!((a.weights_star.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn long_sample_estimate_covers_pseudo_true_parameter() {
    let dgp = HmmDgpParams::paper_hmm(0.0, 0.0);
    let oracle = paper_oracle(3);
    let star = oracle.theta_star().unwrap();
    let sample = simulate(&dgp, OutcomeKind::Hmm, 20_000, DEFAULT_BURN_IN, 11, SimOptions::default())
        .unwrap()
        .sample;
    let spec = ModelSpec::hmm(2);
    let fit = qml_estimate(&sample, &spec, &EstimatorConfig::default()).unwrap();
    let aligned = align_permutation(&fit.theta_hat, &star).unwrap().params;
    let free = spec.encode(&aligned).unwrap();
    let se = sandwich_cov(&free, &sample, &spec, &HacConfig::default()).unwrap().std_errors;
    let est = spec.natural(&aligned);
    let target = spec.natural(&star);
    for (k, name) in spec.param_names().iter().enumerate() {
        let mut spread = se[k];
        if name == "weight1" {
            spread = (se[k].powi(2) + oracle.mc_error[0].powi(2)).sqrt();
        }
        assert!((est[k] - target[k]).abs() < 3.0 * spread, "{name}: {} vs {}", est[k], target[k]);
        if k < 6 {
            assert!((est[k] - target[k]).abs() < 0.05, "{name}");
        }
    }
}
