use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataio::{feature_names, synth_tcs_with_lengths};
use crate::distances::{mmd_value, KernelConfig};

fn synth_features(lengths: &[usize], seed: u64, delta: f64) -> Matrix {
    let out = synth_tcs_with_lengths(lengths, 3, seed, delta).unwrap();
    out.table().dense(&feature_names(3)).unwrap()
}

fn noise(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

// Recomputes the objective from scratch: slice rows, run MMD, average pairs.
fn naive_objective(x: &Matrix, row_edges: &[usize]) -> f64 {
    let k = row_edges.len() - 1;
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..k {
        for j in i + 1..k {
            let a = SampleSet::new(x.slice_rows(row_edges[i], row_edges[i + 1])).unwrap();
            let b = SampleSet::new(x.slice_rows(row_edges[j], row_edges[j + 1])).unwrap();
            sum += mmd_value(&a, &b, &KernelConfig::default()).unwrap();
            pairs += 1;
        }
    }
    sum / pairs as f64
}

#[test]
fn units_spread_the_remainder_over_leading_units() {
    let u = partition_units(103, 10).unwrap();
    let sizes: Vec<usize> = u.edges.windows(2).map(|w| w[1] - w[0]).collect();
    assert_eq!(sizes, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
    assert_eq!(u.len(), 103);
    assert_eq!(partition_units(10, 10).unwrap().edges, (0..=10).collect::<Vec<_>>());
}

#[test]
fn too_few_steps_for_units() {
    assert!(matches!(partition_units(9, 10), Err(Error::InputTooShort(_))));
}

#[test]
fn k_above_n_is_infeasible() {
    let x = noise(40, 2, 0);
    let mut c = Characterizer::new(&x, 4, DistanceKind::mmd()).unwrap();
    assert!(matches!(c.greedy_split(5), Err(Error::Infeasible(_))));
    assert!(matches!(c.greedy_split(1), Err(Error::Infeasible(_))));
    assert!(c.greedy_split(4).is_ok());
}

#[test]
fn two_regimes_boundary_lands_on_the_shift() {
    let x = synth_features(&[600, 400], 1, 4.0);
    let split = greedy_split(&x, 10, 2, &DistanceKind::mmd()).unwrap();
    assert_eq!(split.unit_boundaries, vec![0, 6, 10]);
    assert_eq!(split.boundaries, vec![0, 600, 1000]);
}

#[test]
fn three_regimes_recovered_by_greedy() {
    let x = synth_features(&[400, 300, 300], 2, 4.0);
    let split = greedy_split(&x, 10, 3, &DistanceKind::mmd()).unwrap();
    assert_eq!(split.unit_boundaries, vec![0, 4, 7, 10]);
}

#[test]
fn three_regimes_recovered_by_selection() {
    let x = synth_features(&[400, 300, 300], 3, 4.0);
    let sel = select_split(&x, 10, &DEFAULT_K_CANDIDATES, &DistanceKind::mmd()).unwrap();
    assert_eq!(sel.candidates.len(), 5);
    assert!(sel.candidates.iter().all(|&(_, o)| o <= sel.split.objective));
    assert_eq!(sel.split.unit_boundaries, vec![0, 4, 7, 10]);
}

#[test]
fn greedy_matches_brute_force_for_two_periods() {
    for seed in 0..4 {
        let x = noise(60, 2, seed);
        for kind in [DistanceKind::mmd(), DistanceKind::Cosine, DistanceKind::Coral] {
            let mut c = Characterizer::new(&x, 10, kind).unwrap();
            let g = c.greedy_split(2).unwrap();
            let b = c.brute_force_split(2).unwrap();
            assert_eq!(g.unit_boundaries, b.unit_boundaries);
            assert_eq!(g.objective, b.objective);
        }
    }
}

#[test]
fn brute_force_is_an_upper_bound() {
    let x = synth_features(&[300, 200, 300, 200], 5, 2.0);
    let mut c = Characterizer::new(&x, 10, DistanceKind::mmd()).unwrap();
    for k in [3, 4] {
        let g = c.greedy_split(k).unwrap();
        let b = c.brute_force_split(k).unwrap();
        assert!(b.objective >= g.objective - 1e-12);
    }
}

#[test]
fn brute_force_refuses_large_searches() {
    let x = noise(40, 1, 0);
    let mut c = Characterizer::new(&x, 40, DistanceKind::Cosine).unwrap();
    // C(39, 6) = 3_262_623
    assert!(matches!(
        c.brute_force_split(7),
        Err(Error::OracleTooLarge { combinations: 3_262_623, .. })
    ));
}

#[test]
fn objective_matches_naive_recomputation() {
    let x = synth_features(&[250, 250, 250, 250], 4, 1.5);
    let split = greedy_split(&x, 10, 4, &DistanceKind::mmd()).unwrap();
    let naive = naive_objective(&x, &split.boundaries);
    assert!((split.objective - naive).abs() < 1e-12, "{} vs {naive}", split.objective);
}

#[test]
fn each_insertion_is_the_argmax_of_its_candidates() {
    let x = synth_features(&[200, 500, 300], 6, 3.0);
    let mut c = Characterizer::new(&x, 10, DistanceKind::mmd()).unwrap();
    let (split, trace) = c.greedy_split_traced(5).unwrap();
    let mut cuts: Vec<usize> = Vec::new();
    for ins in &trace {
        let best = ins.scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let first = ins.scores.iter().find(|s| s.1 == best).unwrap().0;
        assert_eq!(ins.chosen, first);
        // Re-evaluate the chosen placement independently.
        cuts.push(ins.chosen);
        cuts.sort_unstable();
        let mut edges = vec![0];
        edges.extend(cuts.iter().map(|&u| c.units().edges[u]));
        edges.push(x.rows());
        assert!((naive_objective(&x, &edges) - best).abs() < 1e-12);
    }
    assert_eq!(split.unit_boundaries[1..5], cuts[..]);
}

#[test]
fn constant_series_picks_two_periods_at_the_first_edge() {
    let x = Matrix::filled(100, 2, 3.0);
    let sel = select_split(&x, 10, &DEFAULT_K_CANDIDATES, &DistanceKind::mmd()).unwrap();
    assert_eq!(sel.split.k, 2);
    assert_eq!(sel.split.unit_boundaries, vec![0, 1, 10]);
    assert_eq!(sel.split.objective, 0.0);
}

#[test]
fn no_shift_scores_far_below_a_shift() {
    let lengths = [1500, 1500, 1500];
    let flat = synth_features(&lengths, 0, 0.0);
    let shifted = synth_features(&lengths, 0, 4.0);
    let kind = DistanceKind::mmd();
    let a = select_split(&flat, 10, &DEFAULT_K_CANDIDATES, &kind).unwrap().split.objective;
    let b = select_split(&shifted, 10, &DEFAULT_K_CANDIDATES, &kind).unwrap().split.objective;
    assert!(a * 10.0 <= b, "flat {a} vs shifted {b}");
}

#[test]
fn pair_distances_are_memoized() {
    let x = noise(50, 2, 1);
    let mut c = Characterizer::new(&x, 10, DistanceKind::mmd()).unwrap();
    c.greedy_split(3).unwrap();
    let cached = c.cache.len();
    c.greedy_split(3).unwrap();
    assert_eq!(c.cache.len(), cached);
}

#[test]
fn coral_on_single_step_units_fails() {
    let x = noise(10, 2, 0);
    let mut c = Characterizer::new(&x, 10, DistanceKind::Coral).unwrap();
    assert!(matches!(c.greedy_split(10), Err(Error::DegenerateInput(_))));
}

#[test]
fn json_shape() {
    let x = noise(30, 2, 2);
    let split = greedy_split(&x, 10, 3, &DistanceKind::mmd()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&split.to_json()).unwrap();
    assert_eq!(v["k"], 3);
    assert_eq!(v["distance"], "mmd");
    assert_eq!(v["boundaries"].as_array().unwrap().len(), 4);
    assert!(v.get("unit_boundaries").is_none());
}

#[test]
fn assign_by_origin() {
    let split = PeriodSplit {
        k: 3,
        boundaries: vec![0, 10, 20, 30],
        objective: 0.0,
        distance: DistanceKind::Cosine,
        unit_boundaries: vec![0, 1, 2, 3],
    };
    let groups = split.assign(&[0, 9, 10, 19, 20, 29, 35]);
    assert_eq!(groups, vec![vec![0, 1], vec![2, 3], vec![4, 5, 6]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_split_is_well_formed(len in 10usize..80, n in 2usize..10, k_off in 0usize..8, seed in 0u64..50) {
        let k = 2 + k_off % (n - 1);
        let x = noise(len, 2, seed);
        let mut c = Characterizer::new(&x, n, DistanceKind::Cosine).unwrap();
        let split = c.greedy_split(k).unwrap();
        prop_assert_eq!(split.k, k);
        split.validate(c.units()).unwrap();
        prop_assert!(split.objective >= 0.0);
    }
}

