mod common;

use leadership::svm::{dual_objective, gram_matrix, svm_decision, svm_train, svm_train_dual, Gamma, SvmConfig};

#[test]
fn smo_matches_projected_gradient_oracle() {
    let mut rng = common::rng(91);
    for case in 0..25u64 {
        let (x, y) = common::random_instance(&mut rng);
        let c = [0.5, 2.0, 8.0][case as usize % 3];
        let config = SvmConfig { c, gamma: Gamma::Value(0.7), smo_tolerance: 1e-6, ..SvmConfig::default() };
        let (model, sol) = svm_train_dual(&x, &y, &config, case).unwrap();
        let gram = gram_matrix(&x, 0.7);
        let reference = common::qp_oracle(&gram, &y, c, 40_000);
        let gap = common::dual_value(&gram, &y, &reference) - dual_objective(&gram, &y, &sol.alpha);
        assert!(gap <= 1e-4, "case {case}: gap {gap}");
        let bias = common::oracle_bias(&gram, &y, &reference, c);
        for xi in &x {
            let theirs: f64 = x
                .iter()
                .zip(&y)
                .zip(&reference)
                .map(|((xj, yj), aj)| aj * yj * common::rbf(0.7, xj, xi))
                .sum::<f64>()
                + bias;
            let ours = svm_decision(&model, xi).unwrap();
            assert!((ours - theirs).abs() <= 1e-3, "case {case}: {ours} vs {theirs}");
        }
    }
}

#[test]
fn alphas_stay_in_the_box_and_balance() {
    let mut rng = common::rng(5);
    for case in 0..10u64 {
        let (x, y) = common::random_instance(&mut rng);
        let config = SvmConfig { c: 1.0, ..SvmConfig::default() };
        let (_, sol) = svm_train_dual(&x, &y, &config, case).unwrap();
        assert!(sol.converged);
        assert!(sol.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(balance.abs() < 1e-9, "y'a = {balance}");
    }
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let (x, y) = common::random_instance(&mut common::rng(12));
    let config = SvmConfig::default();
    assert_eq!(svm_train(&x, &y, &config, 4).unwrap(), svm_train(&x, &y, &config, 4).unwrap());
}

#[test]
fn single_class_is_rejected() {
    let x = vec![vec![0.0], vec![1.0]];
    assert!(svm_train(&x, &[1.0, 1.0], &SvmConfig::default(), 0).is_err());
}
