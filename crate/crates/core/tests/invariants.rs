use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use warfarin_gate::cohort::{
    apply_imputation, encode_features, filter_unbalanced, fit_imputation, generate_synthetic_cohort, impute_all,
    split_indices, FeatureMatrix, RawPatientRecord,
};
use warfarin_gate::eval::confusion;
use warfarin_gate::gate::{label_record, GateConfig, GateLabel};
use warfarin_gate::iwpc_dose::IwpcCoefficients;
use warfarin_gate::pipeline::{prepare, GateTrainingConfig};
use warfarin_gate::svm::{gram_matrix, train_detailed, KernelSpec, TrainConfig};

/// Synthetic records with roughly a fifth of the covariates blanked.
fn holey_cohort(n: usize, seed: u64) -> Vec<RawPatientRecord> {
    let mut records = generate_synthetic_cohort(n, seed);
    for (i, r) in records.iter_mut().enumerate() {
        let k = (i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 10;
        match k {
            0 => r.height_cm = None,
            1 => r.weight_kg = None,
            2 => r.target_inr = None,
            3 => {
                if let Some(v) = r.binary.values_mut().next() {
                    *v = None;
                }
            }
            _ => {}
        }
    }
    records
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn imputation_is_idempotent(seed in 0u64..1000) {
        let records = holey_cohort(80, seed);
        let plan = fit_imputation(&records).unwrap();
        for r in impute_all(&plan, &records).unwrap() {
            prop_assert_eq!(apply_imputation(&plan, &r.to_raw()).unwrap(), r);
        }
    }

    #[test]
    fn test_rows_never_reach_training_state(seed in 0u64..1000, other in 0u64..1000) {
        let train = holey_cohort(120, seed);
        let test_a = holey_cohort(60, seed + 10_000);
        let test_b = holey_cohort(60, other + 20_000);
        let config = GateTrainingConfig::default();
        let coeffs = IwpcCoefficients::PUBLISHED;
        let a = prepare(&train, &test_a, &config, &GateConfig::default(), &coeffs).unwrap();
        let b = prepare(&train, &test_b, &config, &GateConfig::default(), &coeffs).unwrap();
        prop_assert_eq!(&a.plan, &b.plan);
        prop_assert_eq!(&a.removed, &b.removed);
        prop_assert_eq!(a.train_matrix.data(), b.train_matrix.data());
        prop_assert_eq!(a.train_matrix.scaler(), b.train_matrix.scaler());
        prop_assert_eq!(a.test_matrix.scaler(), a.train_matrix.scaler());
    }

    #[test]
    fn stricter_filter_removes_more(seed in 0u64..1000, lo in 0.01f64..0.25, extra in 0.0f64..0.2) {
        let records = holey_cohort(150, seed);
        let loose = filter_unbalanced(&records, lo);
        let strict = filter_unbalanced(&records, lo + extra);
        prop_assert!(loose.iter().all(|v| strict.contains(v)));
    }

    #[test]
    fn stored_scaler_reproduces_encoding(seed in 0u64..1000) {
        let records = holey_cohort(60, seed);
        let imputed = impute_all(&fit_imputation(&records).unwrap(), &records).unwrap();
        let names: Vec<String> =
            ["age_decade", "height_cm", "weight_kg", "target_inr", "gender", "race_asian"].map(String::from).to_vec();
        let fitted = encode_features(&imputed, &names, None).unwrap();
        let again = encode_features(&imputed, &names, Some(fitted.scaler())).unwrap();
        prop_assert_eq!(fitted.data(), again.data());
    }

    #[test]
    fn confusion_ignores_record_order(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..80), rot in 0usize..80) {
        let label = |b: bool| if b { GateLabel::HighRisk } else { GateLabel::SafeForModel };
        let truth: Vec<GateLabel> = pairs.iter().map(|p| label(p.0)).collect();
        let pred: Vec<GateLabel> = pairs.iter().map(|p| label(p.1)).collect();
        let mut shuffled: Vec<(GateLabel, GateLabel)> = truth.iter().copied().zip(pred.iter().copied()).collect();
        shuffled.rotate_left(rot % pairs.len());
        shuffled.reverse();
        let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        prop_assert_eq!(confusion(&truth, &pred).unwrap(), confusion(&t2, &p2).unwrap());
    }

    #[test]
    fn split_is_a_seeded_partition(n in 2usize..300, frac in 0.1f64..0.9, seed in any::<u64>()) {
        if let Ok((train, test)) = split_indices(n, frac, seed) {
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_indices(n, frac, seed).unwrap(), (train, test));
        }
    }

    #[test]
    fn gate_label_is_scale_free(pred in 1.0f64..200.0, ther in 1.0f64..200.0, k in 0u32..6) {
        let scale = f64::from(1u32 << k);
        let g = GateConfig::default();
        prop_assert_eq!(label_record(pred, ther, &g).unwrap(), label_record(pred * scale, ther * scale, &g).unwrap());
    }

    #[test]
    fn trained_model_satisfies_kkt(seed in 0u64..500, c in prop::sample::select(vec![0.5, 1.0, 10.0])) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<f64> = rows.iter().map(|r| if r[0] + 0.5 * r[1] * r[2] + rng.random_range(-0.3..0.3) > 0.0 { 1.0 } else { -1.0 }).collect();
        prop_assume!(labels.iter().any(|&z| z > 0.0) && labels.iter().any(|&z| z < 0.0));
        let x = FeatureMatrix::from_rows(&rows, Some(labels.clone())).unwrap();
        let kernel = KernelSpec::Rbf { delta: 0.8 };
        let config = TrainConfig { c, kkt_tolerance: 1e-9, max_passes: 10_000, ..Default::default() };
        let (model, dual) = train_detailed(&x, &kernel, &config).unwrap();
        prop_assert!(dual.converged);
        let tol = 1e-6;
        let mut balance = 0.0;
        for (i, &z) in labels.iter().enumerate() {
            let margin = z * model.decision_value_encoded(x.row(i)).unwrap();
            let a = dual.alphas[i];
            balance += a * z;
            prop_assert!((-tol..=c + tol).contains(&a));
            if a <= tol {
                prop_assert!(margin >= 1.0 - 1e-5, "alpha=0 but margin {}", margin);
            } else if a >= c - tol {
                prop_assert!(margin <= 1.0 + 1e-5, "alpha=C but margin {}", margin);
            } else {
                prop_assert!((margin - 1.0).abs() <= 1e-5, "free alpha but margin {}", margin);
            }
        }
        prop_assert!(balance.abs() <= 1e-9);
    }

    #[test]
    fn anova_and_linear_grams_are_psd(seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..15).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let x = FeatureMatrix::from_rows(&rows, None).unwrap();
        for kernel in [KernelSpec::Linear, KernelSpec::Anova { sigma: 0.5, degree: 2 }] {
            let g = gram_matrix(&kernel, &x).unwrap();
            let min = SymmetricEigen::new(DMatrix::from_row_slice(15, 15, g.as_slice())).eigenvalues.min();
            prop_assert!(min >= -1e-9, "{kernel}: {min}");
        }
    }
}
