use gtlab_core::noise::sample_outcome;
use gtlab_core::rng::{derive_seed, stream, StreamRole};
use gtlab_core::{ChannelLaw, NoiseModel};
use proptest::prelude::*;
use rand::Rng;

fn frequency(m: &NoiseModel, k: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 0, StreamRole::Channel);
    (0..draws)
        .filter(|_| sample_outcome(m, k, &mut rng))
        .count() as f64
        / draws as f64
}

#[test]
fn dilution_false_negative_rate() {
    let m = NoiseModel::dilution(0.5).unwrap();
    let negatives = 1.0 - frequency(&m, 2, 10_000, 1);
    assert!((negatives - 0.25).abs() <= 0.03, "{negatives}");
}

#[test]
fn addition_false_positive_rate() {
    let m = NoiseModel::addition(0.2).unwrap();
    let positives = frequency(&m, 0, 10_000, 2);
    assert!((positives - 0.2).abs() <= 0.02, "{positives}");
}

#[test]
fn noise_free_is_deterministic() {
    let m = NoiseModel::noise_free();
    assert_eq!(frequency(&m, 0, 1000, 3), 0.0);
    assert_eq!(frequency(&m, 3, 1000, 3), 1.0);
}

#[test]
fn streams_are_distinct_and_reproducible() {
    let draw = |seed, trial, role| stream(seed, trial, role).random::<u64>();
    assert_eq!(
        draw(9, 4, StreamRole::Design),
        draw(9, 4, StreamRole::Design)
    );
    assert_ne!(
        draw(9, 4, StreamRole::Design),
        draw(9, 4, StreamRole::Channel)
    );
    assert_ne!(
        draw(9, 4, StreamRole::Design),
        draw(9, 5, StreamRole::Design)
    );
    assert_ne!(derive_seed(9, 0), derive_seed(9, 1));
}

proptest! {
    #[test]
    fn positive_rate_is_a_monotone_probability(q in 0.0..0.999f64, u in 0.0..0.999f64, k in 0usize..40) {
        let m = NoiseModel::add_dilute(q, u).unwrap();
        let (a, b) = (m.positive_prob(k), m.positive_prob(k + 1));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
        prop_assert!((m.positive_prob(k) + m.negative_prob(k) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_parameters_collapse(q in 0.0..0.999f64, u in 0.0..0.999f64, k in 0usize..20) {
        let both = NoiseModel::add_dilute(q, 0.0).unwrap();
        prop_assert_eq!(both.positive_prob(k), NoiseModel::addition(q).unwrap().positive_prob(k));
        let both = NoiseModel::add_dilute(0.0, u).unwrap();
        prop_assert!((both.positive_prob(k) - NoiseModel::dilution(u).unwrap().positive_prob(k)).abs() < 1e-15);
        prop_assert_eq!(NoiseModel::addition(0.0).unwrap().positive_prob(k), NoiseModel::noise_free().positive_prob(k));
    }
}
