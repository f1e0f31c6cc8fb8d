mod common;

use common::{dense_mmd, random_block};
use mbn::data::SparseCode;
use mbn::divergence::{mmd_scores_codes, mmd_weights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn ensemble(seed: u64) -> Vec<SparseCode> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z = rng.random_range(1..=3);
    let n = rng.random_range(2..=30);
    let v = rng.random_range(1..=6);
    let k = rng.random_range(1..=(300 / (z * v)) as u32).min(n as u32 + 2);
    (0..z).map(|_| SparseCode::single(random_block(n, v, k, &mut rng))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn histogram_mmd_matches_double_sums(seed in any::<u64>(), include in any::<bool>()) {
        let codes = ensemble(seed);
        let refs: Vec<&SparseCode> = codes.iter().collect();
        let got = mmd_scores_codes(&refs, include).unwrap();
        let want = dense_mmd(&refs, include);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn weights_lie_in_unit_interval(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let w = mmd_weights(&v);
        prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
        if v.iter().any(|x| *x != v[0]) {
            prop_assert!(w.contains(&1.0) && w.contains(&0.0));
        }
    }
}
