mod common;

use common::{arb_dataset, arb_tied_dataset, chained, map_rewards, spec};
use proptest::prelude::*;
use sieve_core::dataset::{validate_dataset, Dataset, Episode};
use sieve_core::filter::{
    apply_filter, load_report, partition, save_report, score_episode, CriterionKind, DiscountMode, ScoreCriterion,
};
use sieve_core::Error;

fn criteria() -> Vec<ScoreCriterion> {
    let mut out = vec![ScoreCriterion::average_reward()];
    for mode in [DiscountMode::AbsolutePower, DiscountMode::RelativePower] {
        for gamma in [0.0, 0.5, 0.99] {
            out.push(ScoreCriterion::discounted(gamma, mode).unwrap());
        }
    }
    out
}

/// Rewards of an episode as a key that survives re-indexing.
fn content(e: &Episode) -> Vec<u64> {
    e.transitions.iter().map(|t| t.reward.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn filtered_dataset_is_valid_and_ordered(d in arb_tied_dataset(12, 10)) {
        for c in criteria() {
            let r = partition(&d, &c).unwrap();
            match apply_filter(&d, &r) {
                Ok(f) => {
                    prop_assert!(validate_dataset(&f).is_ok());
                    prop_assert_eq!(f.len(), r.superior_indices.len());
                    for (e, &i) in f.episodes.iter().zip(&r.superior_indices) {
                        prop_assert_eq!(&e.transitions, &d.episodes[i].transitions);
                    }
                    prop_assert_eq!(f.transition_count(), r.retained_transition_count);
                    prop_assert!(f.provenance.starts_with(&d.provenance));
                    let parent = format!("parent={}", d.digest());
                    prop_assert!(f.provenance.contains(&parent), "{}", f.provenance);
                }
                Err(Error::Degenerate { .. }) => prop_assert!(r.superior_indices.is_empty()),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }

    #[test]
    fn partition_ignores_episode_order(d in arb_dataset(12, 10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = d.clone();
        shuffled.episodes.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for (i, e) in shuffled.episodes.iter_mut().enumerate() {
            e.index = i;
        }
        for c in criteria() {
            let keep = |d: &Dataset| {
                let r = partition(d, &c).unwrap();
                let mut v: Vec<Vec<u64>> = r.superior_indices.iter().map(|&i| content(&d.episodes[i])).collect();
                v.sort();
                v
            };
            prop_assert_eq!(keep(&d), keep(&shuffled));
        }
    }

    #[test]
    fn power_of_two_scaling_preserves_partition_even_with_ties(d in arb_tied_dataset(12, 10), k in -8i32..8) {
        let scaled = map_rewards(&d, |r| r * 2f64.powi(k));
        for c in criteria() {
            let a = partition(&d, &c).unwrap();
            let b = partition(&scaled, &c).unwrap();
            prop_assert_eq!(a.superior_indices, b.superior_indices);
        }
    }

    #[test]
    fn relative_mode_averages_tail_returns(rewards in prop::collection::vec(-1.0f64..1.0, 1..30), gamma in 0.0f64..0.999) {
        let steps: Vec<(u64, f64, u64)> = rewards.iter().map(|&r| (0, r, 0)).collect();
        let e = chained(0, 0, &steps, 1);
        let c = ScoreCriterion::discounted(gamma, DiscountMode::RelativePower).unwrap();
        let s = score_episode(&e, &c).unwrap();
        // average of the usual discounted return-to-go from each step
        let n = rewards.len();
        let mean_rtg = (0..n)
            .map(|j| rewards[j..].iter().enumerate().map(|(k, r)| gamma.powi(k as i32) * r).sum::<f64>())
            .sum::<f64>() / n as f64;
        prop_assert!((s.r_disc - mean_rtg).abs() <= 1e-9);
    }
}

#[test]
fn report_survives_a_file_round_trip_and_drives_the_filter() {
    let d = Dataset::new(
        spec(),
        vec![
            chained(0, 0, &[(0, 0.1, 1), (1, 0.2, 2)], 2),
            chained(1, 3, &[(2, 1.0 / 3.0, 4)], 1),
            chained(2, 5, &[(1, -0.7, 5), (0, 0.9, 1), (0, 0.05, 2)], 0),
        ],
        "source=test",
    );
    let c = ScoreCriterion::new(CriterionKind::AverageDiscounted, 0.9, DiscountMode::RelativePower).unwrap();
    let r = partition(&d, &c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.report");
    save_report(&r, &path).unwrap();
    let back = load_report(&path).unwrap();
    assert_eq!(back, r);
    assert_eq!(apply_filter(&d, &back).unwrap(), apply_filter(&d, &r).unwrap());
}

#[test]
fn report_for_another_dataset_is_rejected() {
    let a = Dataset::new(spec(), vec![chained(0, 0, &[(0, 1.0, 1)], 1), chained(1, 0, &[(0, 0.0, 1)], 1)], "");
    let b = Dataset::new(spec(), vec![chained(0, 0, &[(0, 1.0, 1), (0, 1.0, 2)], 1), chained(1, 0, &[(0, 0.0, 1)], 1)], "");
    let c = Dataset::new(spec(), vec![chained(0, 0, &[(0, 1.0, 1)], 1)], "");
    let r = partition(&a, &ScoreCriterion::default()).unwrap();
    assert!(matches!(apply_filter(&b, &r), Err(Error::ReportMismatch(_))));
    assert!(matches!(apply_filter(&c, &r), Err(Error::ReportMismatch(_))));
}

#[test]
fn constant_reward_dataset_is_degenerate_under_both_criteria() {
    let d = Dataset::new(
        spec(),
        (0..5).map(|i| chained(i, 0, &[(0, 0.5, 1), (1, 0.5, 2)], 1)).collect(),
        "",
    );
    for c in criteria().into_iter().filter(|c| c.kind == CriterionKind::AverageReward) {
        let r = partition(&d, &c).unwrap();
        assert!(r.is_degenerate());
        let err = apply_filter(&d, &r).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
        assert!(err.to_string().contains("no filtered dataset"), "{err}");
    }
    // equal-length episodes also tie under the discounted score
    let r = partition(&d, &ScoreCriterion::default()).unwrap();
    assert!(r.is_degenerate());
}

#[test]
fn empty_dataset_cannot_be_scored() {
    let d = Dataset::new(spec(), vec![], "");
    assert!(matches!(partition(&d, &ScoreCriterion::default()), Err(Error::EmptyDataset)));
}
