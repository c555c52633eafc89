use gtlab_core::bounds::{
    binary_entropy, fano_floor, mutual_information, mutual_information_bruteforce,
    mutual_information_bruteforce_subset, t_lower, t_upper, PMode,
};
use gtlab_core::combin::log2_binomial;
use gtlab_core::{MiSpec, NoiseModel, PGrid};
use proptest::prelude::*;

fn models() -> Vec<NoiseModel> {
    vec![
        NoiseModel::noise_free(),
        NoiseModel::addition(0.05).unwrap(),
        NoiseModel::addition(0.2).unwrap(),
        NoiseModel::dilution(0.1).unwrap(),
        NoiseModel::dilution(0.5).unwrap(),
        NoiseModel::add_dilute(0.1, 0.3).unwrap(),
    ]
}

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

// P(Y = 1 | k defectives), written out from (q, u) directly
fn positive(q: f64, u: f64, k: usize) -> f64 {
    1.0 - u.powi(k as i32) * (1.0 - q)
}

/// Independent joint-table computation: H(Y | X_known) - H(Y | X_all).
fn oracle_mi(q: f64, u: f64, k: usize, ell: usize, p: f64) -> f64 {
    let known_mask = (1usize << ell) - 1;
    let mut by_known = vec![[0.0f64; 2]; 1 << ell];
    let mut h_all = 0.0;
    for x in 0..1usize << k {
        let ones = x.count_ones() as usize;
        let px = p.powi(ones as i32) * (1.0 - p).powi((k - ones) as i32);
        let f = positive(q, u, ones);
        h_all += px * h(f);
        let slot = &mut by_known[x & known_mask];
        slot[0] += px;
        slot[1] += px * f;
    }
    let h_known: f64 = by_known
        .iter()
        .map(|[w, y]| if *w > 0.0 { w * h(y / w) } else { 0.0 })
        .sum();
    h_known - h_all
}

fn qu(m: &NoiseModel) -> (f64, f64) {
    (m.q(), m.u())
}

fn mi(m: NoiseModel, k: usize, ell: usize, p: f64) -> f64 {
    mutual_information(&MiSpec::new(m, k, ell, p).unwrap())
}

#[test]
fn frozen_reference_values() {
    // computed at 40 digits by joint enumeration
    let cases = [
        (
            NoiseModel::addition(0.3).unwrap(),
            1,
            0,
            0.5,
            0.4934226057601447,
        ),
        (
            NoiseModel::dilution(0.5).unwrap(),
            3,
            1,
            0.3,
            0.270_522_349_446_650_3,
        ),
        (
            NoiseModel::add_dilute(0.1, 0.3).unwrap(),
            4,
            2,
            0.6,
            0.07078095066111541,
        ),
    ];
    for (m, k, ell, p, want) in cases {
        let got = mi(m, k, ell, p);
        assert!(
            (got - want).abs() < 1e-13,
            "{m} k={k} ell={ell} p={p}: {got} vs {want}"
        );
    }
}

#[test]
fn closed_form_matches_oracles() {
    for m in models() {
        let (q, u) = qu(&m);
        for k in 1..=6 {
            for ell in 0..k {
                for i in 1..=9 {
                    let p = i as f64 / 10.0;
                    let closed = mi(m, k, ell, p);
                    let spec = MiSpec::new(m, k, ell, p).unwrap();
                    let brute = mutual_information_bruteforce(&spec).unwrap();
                    let oracle = oracle_mi(q, u, k, ell, p);
                    assert!((closed - oracle).abs() <= 1e-10, "{m} {k} {ell} {p}");
                    assert!((brute - oracle).abs() <= 1e-10, "{m} {k} {ell} {p}");
                }
            }
        }
    }
}

#[test]
fn information_depends_only_on_revealed_count() {
    for m in models() {
        for k in 1..=4u32 {
            for mask in 0u32..(1 << k) {
                let ell = mask.count_ones() as usize;
                if ell == k as usize {
                    continue;
                }
                for p in [0.2, 0.5, 0.7] {
                    let subset =
                        mutual_information_bruteforce_subset(&m, k as usize, mask, p).unwrap();
                    let closed = mi(m, k as usize, ell, p);
                    assert!((subset - closed).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn noise_free_single_item_is_entropy() {
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let want = binary_entropy(p).unwrap();
        assert!((mi(NoiseModel::noise_free(), 1, 0, p) - want).abs() < 1e-12);
    }
}

#[test]
fn information_vanishes_as_dilution_saturates() {
    for (k, ell, p) in [(1, 0, 0.5), (3, 1, 0.3), (4, 0, 0.2)] {
        let vals: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&u| mi(NoiseModel::dilution(u).unwrap(), k, ell, p))
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        assert!(vals[2] < 1e-2);
    }
}

#[test]
fn noise_raises_the_lower_bound() {
    let g = PGrid::default();
    for (n, k) in [(20, 1), (50, 2), (100, 3)] {
        let nf = t_lower(&NoiseModel::noise_free(), n, k, g).unwrap().value;
        let dil = t_lower(&NoiseModel::dilution(0.3).unwrap(), n, k, g)
            .unwrap()
            .value;
        assert!(dil > nf);
    }
}

#[test]
fn upper_bound_grows_with_addition_noise() {
    let g = PGrid::default();
    for (n, k) in [(50, 2), (100, 3)] {
        let vals: Vec<f64> = [0.0, 0.05, 0.1, 0.2]
            .iter()
            .map(|&q| {
                t_upper(&NoiseModel::addition(q).unwrap(), n, k, g)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }
}

#[test]
fn fano_floor_reference_value() {
    let f = fano_floor(&NoiseModel::noise_free(), 10, 2, 0, PMode::Fixed(0.5)).unwrap();
    assert!((f.floor - 0.8179120995300618).abs() < 1e-14);
}

fn any_model() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        Just(NoiseModel::noise_free()),
        (0.0..0.95f64).prop_map(|q| NoiseModel::addition(q).unwrap()),
        (0.0..0.95f64).prop_map(|u| NoiseModel::dilution(u).unwrap()),
        (0.0..0.95f64, 0.0..0.95f64).prop_map(|(q, u)| NoiseModel::add_dilute(q, u).unwrap()),
    ]
}

proptest! {
    #[test]
    fn information_is_bounded(m in any_model(), k in 1usize..8, ell_frac in 0.0..1.0f64, p in 0.01..0.99f64) {
        let ell = ((k as f64) * ell_frac) as usize;
        let v = mi(m, k, ell, p);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= 1.0 + 1e-12);
        prop_assert!(v <= (k - ell) as f64 * binary_entropy(p).unwrap() + 1e-12);
    }

    #[test]
    fn lower_bound_exceeds_counting_bound(m in any_model(), n in 5usize..120, k in 1usize..4) {
        prop_assume!(k < n);
        let lower = t_lower(&m, n, k, PGrid::new(0.05).unwrap()).unwrap().value;
        prop_assert!(lower >= log2_binomial(n as u64, k as u64) - 1e-9);
    }

    #[test]
    fn fano_floor_is_nonincreasing_in_tests(m in any_model(), n in 5usize..80, k in 1usize..4, t in 0usize..60) {
        prop_assume!(k < n);
        let mode = PMode::MaxOverGrid(PGrid::new(0.05).unwrap());
        let a = fano_floor(&m, n, k, t, mode).unwrap();
        let b = fano_floor(&m, n, k, t + 1, mode).unwrap();
        prop_assert!(b.raw <= a.raw + 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.floor));
    }
}
