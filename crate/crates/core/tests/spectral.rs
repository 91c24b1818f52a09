use std::collections::{BTreeSet, VecDeque};

use cayley_sieve::spectral::{
    add_identity, cayley_spectrum, check_product_expansion, cheeger_sandwich, edge_expansion, matrix_spectrum_oracle,
    AbelianGroup, LoopConvention, DEFAULT_CHARACTER_CAP,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn group_and_gens(max_order: usize) -> impl Strategy<Value = (AbelianGroup, Vec<usize>)> {
    prop::collection::vec(2u32..=6, 1..=3)
        .prop_filter("order cap", move |m| m.iter().map(|&x| x as usize).product::<usize>() <= max_order)
        .prop_flat_map(|moduli| {
            let g = AbelianGroup::new(moduli).unwrap();
            let n = g.order();
            (Just(g), prop::collection::vec(0..n, 1..=5))
        })
}

fn generated_subgroup(g: &AbelianGroup, gens: &[usize]) -> usize {
    let mut seen = BTreeSet::from([0usize]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for &s in gens {
            for y in [g.add(x, s), g.add(x, g.neg(s))] {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
    }
    seen.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn character_sums_match_dense_eigensolver((g, gens) in group_and_gens(216)) {
        for loops in [LoopConvention::Plain, LoopConvention::HalfLoop, LoopConvention::FullLoop] {
            let r = cayley_spectrum(&g, &gens, loops, DEFAULT_CHARACTER_CAP).unwrap();
            let dense = matrix_spectrum_oracle(&g, &gens, loops).unwrap();
            let chars = r.sorted_eigenvalues();
            for (a, b) in chars.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn report_invariants((g, gens) in group_and_gens(216)) {
        let r = cayley_spectrum(&g, &gens, LoopConvention::Plain, DEFAULT_CHARACTER_CAP).unwrap();
        prop_assert!(r.eigenvalues.iter().all(|l| (-1.0 - 1e-12..=1.0 + 1e-12).contains(l)));
        prop_assert!((r.trivial_eigenvalue - 1.0).abs() < 1e-12);
        prop_assert!(r.paper_gap >= r.strict_gap);
        prop_assert_eq!(r.connected, generated_subgroup(&g, &gens) == g.order());
        if r.connected {
            let has_minus_one = r.eigenvalues.iter().any(|&l| (l + 1.0).abs() < 1e-12);
            prop_assert_eq!(r.bipartite, has_minus_one);
        }
    }

    #[test]
    fn product_guarantee_holds((g, s) in group_and_gens(64), (h, t) in group_and_gens(64), pick in any::<(u64, u64)>()) {
        let involutions = |grp: &AbelianGroup| -> Vec<usize> {
            (0..grp.order()).filter(|&x| grp.add(x, x) == 0).collect()
        };
        let (ig, ih) = (involutions(&g), involutions(&h));
        let x0 = ig[(pick.0 % ig.len() as u64) as usize];
        let y0 = ih[(pick.1 % ih.len() as u64) as usize];
        let check = check_product_expansion(&g, &s, &h, &t, x0, y0).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn loop_relation_and_preservation((g, gens) in group_and_gens(216)) {
        let gens: Vec<usize> = gens.into_iter().filter(|&s| s != 0).collect();
        prop_assume!(!gens.is_empty());
        let check = add_identity(&g, &gens).unwrap();
        prop_assert!(check.max_relation_error <= 1e-12);
        prop_assert!(check.preserved_signed && check.preserved_strict);
    }
}

#[test]
fn cheeger_sandwich_on_small_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    for _ in 0..300 {
        let moduli: Vec<u32> = match rng.random_range(0..3) {
            0 => vec![rng.random_range(2..=16)],
            1 => vec![rng.random_range(2..=4), rng.random_range(2..=4)],
            _ => vec![2, 2, rng.random_range(2..=4)],
        };
        let g = AbelianGroup::new(moduli).unwrap();
        if g.order() > 16 {
            continue;
        }
        let gens: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..g.order())).collect();
        let r = cayley_spectrum(&g, &gens, LoopConvention::Plain, 1 << 10).unwrap();
        if !r.connected {
            continue;
        }
        let h = edge_expansion(&g, &gens).unwrap();
        assert!(cheeger_sandwich(&r, h), "moduli {:?} gens {gens:?} h {h}", g.moduli());
        tested += 1;
    }
    assert!(tested > 100);
}

#[test]
fn random_cube_generators_match_oracle() {
    let g = AbelianGroup::elementary(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let gens: Vec<usize> = (0..rng.random_range(1..8)).map(|_| rng.random_range(0..27)).collect();
        let r = cayley_spectrum(&g, &gens, LoopConvention::Plain, 27).unwrap();
        let dense = matrix_spectrum_oracle(&g, &gens, LoopConvention::Plain).unwrap();
        let max = r
            .sorted_eigenvalues()
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1e-9);
    }
}
