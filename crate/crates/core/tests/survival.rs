mod common;

use common::{
    brute_force_c_index, exponential_group, km_by_redistribution, log_rank_oracle, permutation_oracle,
    random_survival_set,
};
use flowsurv::parallel::Execution;
use flowsurv::survcore::{concordance_index, kaplan_meier, log_rank_test, permutation_p_value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn kaplan_meier_matches_redistribution_to_the_right() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 5, 17, 60, 200] {
        let (_, labels) = random_survival_set(&mut rng, n);
        let curve = kaplan_meier(&labels);
        let grid: Vec<f64> = (0..=44).map(|i| i as f64 / 4.0 - 0.5).collect();
        let oracle = km_by_redistribution(&labels, &grid);
        for (t, s) in grid.iter().zip(oracle) {
            assert!((curve.at(*t) - s).abs() < 1e-12, "n={n} t={t}: {} vs {s}", curve.at(*t));
        }
    }
}

#[test]
fn concordance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in (0..50).map(|i| 4 * i + 2) {
        let (risks, labels) = random_survival_set(&mut rng, n);
        let fast = concordance_index(&risks, &labels).ok().map(|c| c.c_index);
        assert_eq!(fast, brute_force_c_index(&risks, &labels), "n={n}");
    }
}

#[test]
fn log_rank_matches_oracle_statistic_and_permutation_p() {
    // Chosen so the asymptotic p lands near 0.06, where the chi-square
    // approximation matters.
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let a = exponential_group(&mut rng, 40, 1.0, 3.0);
    let b = exponential_group(&mut rng, 40, 0.4, 3.0);
    let test = log_rank_test(&a, &b).unwrap();
    assert!((test.chi2 - log_rank_oracle(&a, &b)).abs() < 1e-10);
    let oracle = permutation_oracle(&a, &b, 10_000, &mut ChaCha8Rng::seed_from_u64(4));
    assert!((test.p - oracle).abs() <= 0.01, "asymptotic {} vs permutation {oracle}", test.p);
    let library = permutation_p_value(&a, &b, 10_000, 5, Execution::Parallel).unwrap();
    assert!((library - oracle).abs() <= 0.01, "{library} vs {oracle}");
}
