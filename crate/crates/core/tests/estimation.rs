use regime_qml::dgp::{simulate, HmmDgpParams, OutcomeKind, Sample, SimOptions};
use regime_qml::estimator::{align_permutation, em_fit, qml_estimate, EstimatorConfig};
use regime_qml::mixture::{quasi_loglik, Component, MixtureParams, ModelSpec};

fn paper_sample(t: usize, seed: u64) -> (HmmDgpParams, Sample) {
    let dgp = HmmDgpParams::paper_hmm(0.0, 0.0);
    let s = simulate(&dgp, OutcomeKind::Hmm, t, 500, seed, SimOptions::default()).unwrap().sample;
    (dgp, s)
}

fn truth(dgp: &HmmDgpParams, w1: f64) -> MixtureParams {
    MixtureParams::new(dgp.outcomes.iter().map(|&o| Component::from(o)).collect(), vec![w1, 1.0 - w1]).unwrap()
}

fn assert_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-10, "EM decreased: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn em_from_truth_moves_little_and_never_down() {
    let (dgp, sample) = paper_sample(3200, 1);
    let spec = ModelSpec::hmm(2);
    let cfg = EstimatorConfig {
        em_max_iter: 1,
        ..Default::default()
    };
    let fit = em_fit(&sample, &spec, &truth(&dgp, 0.6), &cfg).unwrap();
    assert_eq!(fit.trace.len(), 2);
    let change = fit.trace[1] - fit.trace[0];
    assert!((0.0..0.01).contains(&change), "{change}");
}

#[test]
fn paper_design_fit_is_close() {
    let (dgp, sample) = paper_sample(3200, 2);
    let spec = ModelSpec::hmm(2);
    let fit = qml_estimate(&sample, &spec, &EstimatorConfig::default()).unwrap();
    assert!(fit.converged, "max score {}", fit.max_abs_score);
    assert!(fit.max_abs_score <= EstimatorConfig::default().qn_grad_tol);
    for s in &fit.starts {
        assert!(fit.loglik >= s.loglik - 1e-12);
    }
    let a = align_permutation(&fit.theta_hat, &truth(&dgp, 0.6)).unwrap();
    assert!((a.params.components[0].mu - 1.0).abs() < 0.15);
    assert!((a.params.components[1].gamma - 1.0).abs() < 0.15);

    let again = qml_estimate(&sample, &spec, &EstimatorConfig::default()).unwrap();
    assert_eq!(format!("{fit:?}"), format!("{again:?}"));
}

#[test]
fn em_is_monotone_from_many_starts() {
    let (dgp, sample) = paper_sample(800, 3);
    let spec = ModelSpec::hmm(2);
    let base = truth(&dgp, 0.5);
    for k in 0..6 {
        let mut init = base.clone();
        let shift = k as f64 * 0.4 - 1.0;
        init.components[0].mu += shift;
        init.components[1].sigma *= 1.0 + 0.3 * k as f64;
        init.weights = vec![0.2 + 0.1 * k as f64, 0.8 - 0.1 * k as f64];
        let fit = em_fit(&sample, &spec, &init, &EstimatorConfig::default()).unwrap();
        assert_monotone(&fit.trace);
    }
}

#[test]
fn permuted_initialization_gives_same_aligned_estimate() {
    let (dgp, sample) = paper_sample(1600, 4);
    let spec = ModelSpec::hmm(2);
    let cfg = EstimatorConfig {
        em_tol: 1e-14,
        em_max_iter: 5000,
        ..Default::default()
    };
    let init = truth(&dgp, 0.55);
    let a = em_fit(&sample, &spec, &init, &cfg).unwrap();
    let b = em_fit(&sample, &spec, &init.permuted(&[1, 0]), &cfg).unwrap();
    assert_monotone(&a.trace);
    assert_monotone(&b.trace);
    let reference = truth(&dgp, 0.6);
    let a = align_permutation(&a.params, &reference).unwrap().params;
    let b = align_permutation(&b.params, &reference).unwrap().params;
    for s in 0..2 {
        let (x, y) = (&a.components[s], &b.components[s]);
        assert!((x.mu - y.mu).abs() < 1e-6);
        assert!((x.gamma - y.gamma).abs() < 1e-6);
        assert!((x.sigma - y.sigma).abs() < 1e-6);
        assert!((a.weights[s] - b.weights[s]).abs() < 1e-6);
    }
}

#[test]
fn single_regime_fit_is_pooled_regression_and_worse() {
    let (_, sample) = paper_sample(1600, 5);
    let one = qml_estimate(&sample, &ModelSpec::hmm(1), &EstimatorConfig::default()).unwrap();
    let two = qml_estimate(&sample, &ModelSpec::hmm(2), &EstimatorConfig::default()).unwrap();
    assert!(one.loglik < two.loglik);

    let n = sample.len() as f64;
    let (y, w) = (&sample.y, &sample.w);
    let mw = w.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let b = w.iter().zip(y).map(|(a, c)| (a - mw) * (c - my)).sum::<f64>()
        / w.iter().map(|a| (a - mw).powi(2)).sum::<f64>();
    let a = my - b * mw;
    let s = (w.iter().zip(y).map(|(x, v)| (v - a - b * x).powi(2)).sum::<f64>() / n).sqrt();
    let c = &one.theta_hat.components[0];
    assert!((c.mu - a).abs() < 1e-8 && (c.gamma - b).abs() < 1e-8 && (c.sigma - s).abs() < 1e-8);
    let ll = quasi_loglik(&one.theta_hat, &sample, &ModelSpec::hmm(1)).unwrap();
    assert_eq!(ll, one.loglik);
}

#[test]
fn brute_force_alignment_recovers_permutations() {
    let refs = MixtureParams::new(
        vec![
            Component { mu: -1.3, gamma: 0.2, sigma: 0.8 },
            Component { mu: 0.4, gamma: 1.1, sigma: 1.4 },
            Component { mu: 2.2, gamma: -0.5, sigma: 0.6 },
        ],
        vec![0.2, 0.5, 0.3],
    )
    .unwrap();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        let shuffled = refs.permuted(&p);
        let a = align_permutation(&shuffled, &refs).unwrap();
        assert_eq!(a.params, refs);
        for k in 0..3 {
            assert_eq!(p[a.permutation[k]], k);
        }
    }
}
