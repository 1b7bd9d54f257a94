use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::numgraph::grad_check_many;

fn set(rows: &[&[f64]]) -> SampleSet {
    SampleSet::new(Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, dim: usize, mean: f64) -> SampleSet {
    let data = (0..n * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + z
        })
        .collect();
    SampleSet::new(Matrix::from_vec(n, dim, data).unwrap()).unwrap()
}

fn value(kind: &DistanceKind, a: &SampleSet, b: &SampleSet) -> f64 {
    let mut tape = Tape::no_grad();
    let ta = tape.constant(a.values().clone());
    let tb = tape.constant(b.values().clone());
    let d = distance(&mut tape, kind, ta, tb, None).unwrap();
    tape.item(d).unwrap()
}

// Independent oracles: naive loops, no shared helpers with the implementation.

fn naive_median_sq_dist(a: &SampleSet, b: &SampleSet) -> f64 {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for s in [a, b] {
        for i in 0..s.n() {
            pts.push(s.values().row(i).to_vec());
        }
    }
    let mut d = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let mut acc = 0.0;
            for k in 0..pts[i].len() {
                acc += (pts[i][k] - pts[j][k]).powi(2);
            }
            d.push(acc);
        }
    }
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let m = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        (d[d.len() / 2 - 1] + d[d.len() / 2]) / 2.0
    };
    if m == 0.0 {
        1.0
    } else {
        m
    }
}

fn naive_mmd(a: &SampleSet, b: &SampleSet, k: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
    let (na, nb) = (a.n() as f64, b.n() as f64);
    let mut s_aa = 0.0;
    for i in 0..a.n() {
        for j in 0..a.n() {
            s_aa += k(a.values().row(i), a.values().row(j));
        }
    }
    let mut s_bb = 0.0;
    for i in 0..b.n() {
        for j in 0..b.n() {
            s_bb += k(b.values().row(i), b.values().row(j));
        }
    }
    let mut s_ab = 0.0;
    for i in 0..a.n() {
        for j in 0..b.n() {
            s_ab += k(a.values().row(i), b.values().row(j));
        }
    }
    s_aa / (na * na) + s_bb / (nb * nb) - 2.0 * s_ab / (na * nb)
}

fn naive_rbf_mmd(a: &SampleSet, b: &SampleSet) -> f64 {
    let bw = naive_median_sq_dist(a, b);
    let k = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|c| (-d / (c * bw)).exp()).sum::<f64>() / 5.0
    };
    naive_mmd(a, b, &k)
}

fn naive_covariance(s: &SampleSet) -> Vec<Vec<f64>> {
    let (n, q) = (s.n(), s.dim());
    let mut mean = vec![0.0; q];
    for i in 0..n {
        for k in 0..q {
            mean[k] += s.values().get(i, k) / n as f64;
        }
    }
    let mut c = vec![vec![0.0; q]; q];
    for i in 0..n {
        for r in 0..q {
            for k in 0..q {
                c[r][k] += (s.values().get(i, r) - mean[r]) * (s.values().get(i, k) - mean[k]) / (n as f64 - 1.0);
            }
        }
    }
    c
}

fn naive_coral(a: &SampleSet, b: &SampleSet) -> f64 {
    let (ca, cb) = (naive_covariance(a), naive_covariance(b));
    let q = a.dim() as f64;
    let mut s = 0.0;
    for r in 0..ca.len() {
        for k in 0..ca.len() {
            s += (ca[r][k] - cb[r][k]).powi(2);
        }
    }
    s / (4.0 * q * q)
}

#[test]
fn cosine_examples() {
    let a = set(&[&[1.0, 2.0], &[3.0, -1.0]]);
    assert!(value(&DistanceKind::Cosine, &a, &a).abs() < 1e-15);
    let x = set(&[&[1.0, 0.0]]);
    let y = set(&[&[0.0, 1.0]]);
    let z = set(&[&[-1.0, 0.0]]);
    assert!((value(&DistanceKind::Cosine, &x, &y) - 1.0).abs() < 1e-15);
    assert!((value(&DistanceKind::Cosine, &x, &z) - 2.0).abs() < 1e-15);
}

#[test]
fn cosine_of_zero_mean_is_degenerate() {
    let a = set(&[&[1.0, 0.0], &[-1.0, 0.0]]);
    let b = set(&[&[1.0, 1.0]]);
    assert!(matches!(DistanceKind::Cosine.divergence(&a, &b), Err(Error::DegenerateInput(_))));
}

#[test]
fn median_bandwidth_examples() {
    assert_eq!(median_bandwidth(&set(&[&[0.0]]), &set(&[&[2.0]])).unwrap(), 4.0);
    assert_eq!(median_bandwidth(&set(&[&[0.0], &[1.0]]), &set(&[&[3.0]])).unwrap(), 4.0);
    let same = set(&[&[0.7, 0.7], &[0.7, 0.7]]);
    assert_eq!(median_bandwidth(&same, &same).unwrap(), 1.0);
}

#[test]
fn mmd_of_identical_sets_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = gaussian(&mut rng, 12, 3, 0.0);
    assert!(value(&DistanceKind::mmd(), &a, &a).abs() < 1e-9);
    assert!(mmd_value(&a, &a, &KernelConfig::default()).unwrap().abs() < 1e-9);
}

#[test]
fn linear_mmd_hand_example() {
    let a = set(&[&[1.0, 0.0]]);
    let b = set(&[&[0.0, 1.0]]);
    let kind = DistanceKind::Mmd(KernelConfig::Linear);
    assert!((value(&kind, &a, &b) - 2.0).abs() < 1e-15);
    assert!((mmd_value(&a, &b, &KernelConfig::Linear).unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn mmd_matches_naive_double_sum() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(&mut rng, 10, 3, 0.0);
        let b = gaussian(&mut rng, 10, 3, 0.5);
        let oracle = naive_rbf_mmd(&a, &b);
        assert!((value(&DistanceKind::mmd(), &a, &b) - oracle).abs() < 1e-10);
        assert!((mmd_value(&a, &b, &KernelConfig::default()).unwrap() - oracle).abs() < 1e-10);

        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let lin = naive_mmd(&a, &b, &dot);
        assert!((value(&DistanceKind::Mmd(KernelConfig::Linear), &a, &b) - lin).abs() < 1e-10);
    }
}

#[test]
fn mmd_with_unequal_set_sizes_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = gaussian(&mut rng, 7, 2, 0.0);
    let b = gaussian(&mut rng, 13, 2, 1.0);
    let oracle = naive_rbf_mmd(&a, &b);
    assert!((value(&DistanceKind::mmd(), &a, &b) - oracle).abs() < 1e-10);
    assert!((mmd_value(&a, &b, &KernelConfig::default()).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn mmd_dimension_mismatch() {
    let a = set(&[&[1.0, 0.0]]);
    let b = set(&[&[1.0]]);
    assert!(matches!(DistanceKind::mmd().divergence(&a, &b), Err(Error::Dimension { .. })));
}

#[test]
fn mmd_increases_with_mean_gap() {
    for seed in 0..5 {
        let mut last = f64::NEG_INFINITY;
        for gap in [0.0, 1.0, 2.0, 4.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gaussian(&mut rng, 200, 1, 0.0);
            let b = gaussian(&mut rng, 200, 1, gap);
            let d = mmd_value(&a, &b, &KernelConfig::default()).unwrap();
            assert!(d > last, "seed {seed} gap {gap}: {d} <= {last}");
            last = d;
        }
    }
}

#[test]
fn coral_examples() {
    let a = set(&[&[-1.0], &[1.0]]);
    let b = set(&[&[0.0], &[0.0]]);
    assert!((value(&DistanceKind::Coral, &a, &b) - 1.0).abs() < 1e-12);
    assert_eq!(value(&DistanceKind::Coral, &a, &a), 0.0);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(&mut rng, 9, 4, 0.0);
        let b = gaussian(&mut rng, 6, 4, 1.0);
        assert!((value(&DistanceKind::Coral, &a, &b) - naive_coral(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn coral_needs_two_samples() {
    let a = set(&[&[1.0]]);
    let b = set(&[&[0.0], &[2.0]]);
    assert!(matches!(DistanceKind::Coral.divergence(&a, &b), Err(Error::DegenerateInput(_))));
}

#[test]
fn adversarial_at_chance_is_two_ln_two() {
    let a = set(&[&[1.0, 2.0], &[0.5, 0.1]]);
    let b = set(&[&[-3.0, 0.0]]);
    let disc = Discriminator::zeros(2, DiscriminatorConfig::default());
    let d = adversarial_value(&a, &b, &disc).unwrap();
    assert!((d - 1.3862943611198906).abs() < 1e-12);
}

#[test]
fn adversarial_with_perfect_discriminator_tends_to_zero() {
    let a = set(&[&[1.0], &[2.0]]);
    let b = set(&[&[-1.0], &[-2.0]]);
    let disc = Discriminator {
        w1: Matrix::scalar(10.0),
        b1: Matrix::scalar(0.0),
        w2: Matrix::scalar(10.0),
        b2: Matrix::scalar(-50.0),
        reversal: 1.0,
    };
    let d = adversarial_value(&a, &b, &disc).unwrap();
    assert!((0.0..1e-6).contains(&d), "{d}");
}

#[test]
fn adversarial_on_identical_sets_converges_to_confusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = gaussian(&mut rng, 64, 3, 0.0);
    let disc = fit_discriminator(&a, &a, DiscriminatorConfig::default(), 200, 1e-2, 0).unwrap();
    let d = adversarial_value(&a, &a, &disc).unwrap();
    assert!((d - ADV_CONFUSION).abs() < 0.1, "{d}");
    // The divergence proxy is near zero for indistinguishable sets.
    assert!(DistanceKind::adversarial().divergence(&a, &a).unwrap() < 0.1);
}

#[test]
fn adversarial_divergence_grows_for_separated_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = gaussian(&mut rng, 64, 2, 0.0);
    let b = gaussian(&mut rng, 64, 2, 4.0);
    let near = gaussian(&mut rng, 64, 2, 0.0);
    let kind = DistanceKind::adversarial();
    assert!(kind.divergence(&a, &b).unwrap() > kind.divergence(&a, &near).unwrap() + 0.5);
}

#[test]
fn distances_pass_grad_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = gaussian(&mut rng, 5, 3, 0.0).values().clone();
    let b = gaussian(&mut rng, 4, 3, 0.7).values().clone();
    for kind in [
        DistanceKind::Cosine,
        DistanceKind::mmd(),
        DistanceKind::Mmd(KernelConfig::Linear),
        DistanceKind::Coral,
    ] {
        let err = grad_check_many(|t, xs| distance(t, &kind, xs[0], xs[1], None), &[a.clone(), b.clone()], 1e-5).unwrap();
        assert!(err < 1e-4, "{kind}: {err}");
    }

    // With reversal -1 the reversal node is an identity, so the whole chain
    // including discriminator weights is checkable against finite differences.
    let cfg = DiscriminatorConfig { hidden: 4, reversal: -1.0 };
    let disc = Discriminator::new(3, cfg, &mut rng);
    let inputs = [a.clone(), b.clone(), disc.w1.clone(), disc.b1.clone(), disc.w2.clone(), disc.b2.clone()];
    let err = grad_check_many(
        |t, xs| {
            let bound = BoundDiscriminator { w1: xs[2], b1: xs[3], w2: xs[4], b2: xs[5], reversal: -1.0 };
            adversarial(t, xs[0], xs[1], &bound)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "adv: {err}");
}

#[test]
fn reversal_negates_input_gradients_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = gaussian(&mut rng, 4, 2, 0.0).values().clone();
    let b = gaussian(&mut rng, 4, 2, 1.0).values().clone();
    let base = Discriminator::new(2, DiscriminatorConfig { hidden: 3, reversal: 1.0 }, &mut rng);
    let grads = |reversal: f64| {
        let mut disc = base.clone();
        disc.reversal = reversal;
        let mut t = Tape::new();
        let bound = disc.bind(&mut t);
        let ta = t.param(a.clone());
        let tb = t.param(b.clone());
        let d = adversarial(&mut t, ta, tb, &bound).unwrap();
        t.backward(d).unwrap();
        (t.grad(ta).unwrap().clone(), t.grad(bound.w1).unwrap().clone())
    };
    let (ga_rev, gw_rev) = grads(1.0);
    let (ga_id, gw_id) = grads(-1.0);
    assert!(ga_rev.max_abs_diff(&ga_id.map(|x| -x)) < 1e-15);
    assert_eq!(gw_rev, gw_id);
}

#[test]
fn kind_names_round_trip() {
    for name in ["cosine", "mmd", "mmd_linear", "coral", "adv"] {
        let k: DistanceKind = name.parse().unwrap();
        assert_eq!(k.to_string(), name);
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<DistanceKind>(&json).unwrap(), k);
    }
    assert!("dtw".parse::<DistanceKind>().is_err());
}

#[test]
fn kind_validation() {
    assert!(DistanceKind::Mmd(KernelConfig::Rbf { multipliers: vec![] }).validate().is_err());
    assert!(DistanceKind::Mmd(KernelConfig::Rbf { multipliers: vec![1.0, -1.0] }).validate().is_err());
    assert!(DistanceKind::Adversarial(DiscriminatorConfig { hidden: 0, reversal: 1.0 }).validate().is_err());
    assert!(DistanceKind::mmd().validate().is_ok());
}

fn sample_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (1usize..4, 2usize..7, 2usize..7).prop_flat_map(|(dim, na, nb)| {
        (
            prop::collection::vec(-3.0f64..3.0, na * dim),
            prop::collection::vec(-3.0f64..3.0, nb * dim),
            Just(dim),
        )
    })
}

proptest! {
    #[test]
    fn symmetric_and_non_negative((xa, xb, dim) in sample_pair()) {
        let a = SampleSet::new(Matrix::from_vec(xa.len() / dim, dim, xa).unwrap()).unwrap();
        let b = SampleSet::new(Matrix::from_vec(xb.len() / dim, dim, xb).unwrap()).unwrap();
        for kind in [DistanceKind::mmd(), DistanceKind::Mmd(KernelConfig::Linear), DistanceKind::Coral] {
            let ab = value(&kind, &a, &b);
            let ba = value(&kind, &b, &a);
            prop_assert!((ab - ba).abs() <= 1e-10, "{kind}: {ab} vs {ba}");
            prop_assert!(ab >= -1e-12);
        }
        let near_zero = |s: &SampleSet| s.values().col_means().data().iter().all(|v| v.abs() < 1e-9);
        if !near_zero(&a) && !near_zero(&b) {
            let ab = value(&DistanceKind::Cosine, &a, &b);
            let ba = value(&DistanceKind::Cosine, &b, &a);
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&ab));
        }
    }
}

#[test]
fn streaming_mmd_agrees_with_tape_on_larger_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let a = gaussian(&mut rng, 40, 4, 0.0);
    let shift = rng.gen_range(0.0..1.0);
    let b = gaussian(&mut rng, 31, 4, shift);
    let tape = value(&DistanceKind::mmd(), &a, &b);
    let streamed = mmd_value(&a, &b, &KernelConfig::default()).unwrap();
    assert!((tape - streamed).abs() < 1e-12);
}
