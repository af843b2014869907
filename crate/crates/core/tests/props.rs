//! Property tests for metric and theory invariants.

use dcem_core::metrics::{aggregate, auc, roc_gap};
use dcem_core::nnet::m_step_loss;
use dcem_core::synthgen::{Dataset, LabeledExample, Split};
use dcem_core::theory::{causal_reg_strength, y_opt_closed_form};
use proptest::prelude::*;

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    proptest::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)
        .prop_filter("needs both classes", |v| {
            v.iter().any(|(_, l)| *l) && v.iter().any(|(_, l)| !*l)
        })
        .prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #[test]
    fn auc_is_invariant_under_increasing_transforms((scores, labels) in scores_and_labels()) {
        let base = auc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| 3.5 * s + 0.2 + s.powi(3)).collect();
        let transformed = auc(&mapped, &labels).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn auc_flips_with_labels_when_tie_free((scores, labels) in scores_and_labels()) {
        // perturb scores to unique values, preserving order
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
        let mut unique = vec![0.0; scores.len()];
        for (rank, &i) in idx.iter().enumerate() {
            unique[i] = rank as f64;
        }
        let a = auc(&unique, &labels).unwrap();
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let b = auc(&unique, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_gap_is_bounded_and_symmetric(
        (scores, labels) in scores_and_labels(),
        group_bits in proptest::collection::vec(any::<bool>(), 60),
    ) {
        let groups: Vec<bool> = (0..scores.len()).map(|i| group_bits[i % group_bits.len()]).collect();
        let valid = |g: bool| {
            labels.iter().zip(groups.iter()).any(|(l, gg)| *gg == g && *l)
                && labels.iter().zip(groups.iter()).any(|(l, gg)| *gg == g && !*l)
        };
        prop_assume!(valid(false) && valid(true));
        let gap = roc_gap(&scores, &labels, &groups).unwrap();
        prop_assert!((0.0..=1.0).contains(&gap));
        let swapped: Vec<bool> = groups.iter().map(|g| !g).collect();
        let gap2 = roc_gap(&scores, &labels, &swapped).unwrap();
        prop_assert!((gap - gap2).abs() < 1e-12);
    }

    #[test]
    fn identical_group_score_multisets_give_zero_gap((scores, labels) in scores_and_labels()) {
        // mirror the sample into both groups
        let all_scores: Vec<f64> = scores.iter().chain(scores.iter()).copied().collect();
        let all_labels: Vec<bool> = labels.iter().chain(labels.iter()).copied().collect();
        let groups: Vec<bool> = (0..all_scores.len()).map(|i| i >= scores.len()).collect();
        let gap = roc_gap(&all_scores, &all_labels, &groups).unwrap();
        prop_assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_permutation_invariant(mut values in proptest::collection::vec(0.0f64..1.0, 1..24), rot in 0usize..24) {
        let a = aggregate(&values).unwrap();
        let r = rot % values.len();
        values.rotate_left(r);
        let b = aggregate(&values).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.min <= a.median && a.median <= a.max);
        prop_assert!((a.range - (a.max - a.min)).abs() < 1e-15);
    }

    #[test]
    fn m_step_loss_is_finite_and_nonnegative(
        q in 0.0f64..=1.0,
        y_obs in prop_oneof![Just(0.0f64), Just(1.0f64)],
        y_hat in 0.0f64..=1.0,
        t_hat in 0.0f64..=1.0,
    ) {
        let loss = m_step_loss(q, y_obs, y_hat, t_hat);
        prop_assert!(loss.is_finite());
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn closed_form_optimum_stays_below_pseudo_label(q in 0.0f64..=1.0, t_hat in 1e-6f64..=1.0) {
        let y = y_opt_closed_form(q, t_hat);
        prop_assert!(y >= -1e-12 && y <= q + 1e-12);
        let r = causal_reg_strength(q, t_hat);
        prop_assert!(r >= -1e-12);
    }
}

fn arbitrary_example() -> impl Strategy<Value = LabeledExample<f64>> {
    (
        -1.0f64..1.0,
        -1.0f64..1.0,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(x0, x1, a, t, y)| LabeledExample {
            x: vec![x0, x1],
            a,
            t,
            y,
            y_obs: y && t,
        })
}

proptest! {
    #[test]
    fn dataset_csv_round_trip(examples in proptest::collection::vec(arbitrary_example(), 1..40)) {
        let ds = Dataset { examples, split: Split::Test };
        let dir = std::env::temp_dir().join(format!("dcem-props-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.csv");
        ds.write_csv(&path).unwrap();
        let back = Dataset::<f64>::read_csv(&path, Split::Test).unwrap();
        prop_assert_eq!(ds, back);
    }
}
