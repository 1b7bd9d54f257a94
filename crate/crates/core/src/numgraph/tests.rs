use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

#[test]
fn sigmoid_of_zero_is_half() {
    let mut t = Tape::new();
    let x = t.constant(Matrix::scalar(0.0));
    let y = t.sigmoid(x).unwrap();
    assert_eq!(t.item(y).unwrap(), 0.5);
}

#[test]
fn identity_matmul_returns_operand() {
    let mut t = Tape::new();
    let a = Matrix::from_vec(3, 2, vec![1., -2., 3., 4.5, 0., 7.]).unwrap();
    let i = t.constant(Matrix::identity(3));
    let ah = t.constant(a.clone());
    let y = t.matmul(i, ah).unwrap();
    assert_eq!(t.value(y), &a);
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut t = Tape::new();
    let x = t.constant(Matrix::row_vector(&[1.0, 1.0, 1.0]));
    let y = t.softmax_rows(x).unwrap();
    for &v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn shape_mismatch_is_dimension_error() {
    let mut t = Tape::new();
    let a = t.constant(Matrix::zeros(2, 3));
    let b = t.constant(Matrix::zeros(2, 3));
    assert!(matches!(t.matmul(a, b), Err(Error::Dimension { op: "matmul", .. })));
    let c = t.constant(Matrix::zeros(3, 2));
    assert!(matches!(t.add(a, c), Err(Error::Dimension { .. })));
    let wide_row = t.constant(Matrix::zeros(1, 4));
    assert!(t.add_row(a, wide_row).is_err());
}

#[cfg(debug_assertions)]
#[test]
fn non_finite_output_names_the_op() {
    let mut t = Tape::new();
    let x = t.constant(Matrix::scalar(0.0));
    match t.log(x) {
        Err(Error::Numeric { op }) => assert_eq!(op, "log"),
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn product_rule() {
    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(3.0));
    let y = t.param(Matrix::scalar(4.0));
    let l = t.mul(x, y).unwrap();
    t.backward(l).unwrap();
    assert_eq!(t.grad(x).unwrap().data(), &[4.0]);
    assert_eq!(t.grad(y).unwrap().data(), &[3.0]);
}

#[test]
fn tanh_derivative_matches_finite_difference() {
    let mut t = Tape::new();
    let x = t.param(Matrix::scalar(0.5));
    let l = t.tanh(x).unwrap();
    t.backward(l).unwrap();
    let g = t.grad(x).unwrap().data()[0];
    let fd = central_difference(|v| Ok(v[0].tanh()), &[0.5], 1e-5).unwrap()[0];
    assert!((g - fd).abs() < 1e-9);
    assert!((g - 0.78644).abs() < 1e-5);
}

#[test]
fn mean_square_of_ones_has_half_gradient() {
    let mut t = Tape::new();
    let x = t.param(Matrix::ones(2, 2));
    let sq = t.square(x).unwrap();
    let l = t.mean(sq).unwrap();
    t.backward(l).unwrap();
    assert_eq!(t.grad(x).unwrap().data(), &[0.5; 4]);
}

#[test]
fn backward_on_non_scalar_is_contract_error() {
    let mut t = Tape::new();
    let x = t.param(Matrix::ones(2, 2));
    let y = t.square(x).unwrap();
    assert!(matches!(t.backward(y), Err(Error::Contract(_))));
}

#[test]
fn grad_check_of_sum_is_exact() {
    let x = Matrix::from_vec(2, 3, vec![0.1, -4.0, 2.0, 7.5, 3.3, -0.2]).unwrap();
    let err = grad_check(|t, x| t.sum(x), &x, 1e-5).unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn grad_check_of_mean_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&mut rng, 3, 3, -1.0, 1.0);
    let err = grad_check(
        |t, x| {
            let s = t.square(x)?;
            t.mean(s)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

type UnaryCase = (&'static str, fn(&mut Tape, Tensor) -> crate::Result<Tensor>, f64, f64);

/// Reduces an op's output to a scalar with a non-uniform weighting so every
/// output entry contributes a distinct sensitivity.
fn weighted_sum(t: &mut Tape, y: Tensor) -> crate::Result<Tensor> {
    let (r, c) = t.shape(y);
    let w = Matrix::from_vec(r, c, (0..r * c).map(|i| 0.3 + 0.17 * i as f64).collect())?;
    let w = t.constant(w);
    let p = t.mul(y, w)?;
    t.sum(p)
}

#[test]
fn every_unary_op_passes_grad_check() {
    let cases: Vec<UnaryCase> = vec![
        ("sigmoid", |t, x| t.sigmoid(x), -3.0, 3.0),
        ("tanh", |t, x| t.tanh(x), -2.0, 2.0),
        ("exp", |t, x| t.exp(x), -2.0, 2.0),
        ("log", |t, x| t.log(x), 0.5, 3.0),
        ("sqrt", |t, x| t.sqrt(x), 0.5, 3.0),
        ("square", |t, x| t.square(x), -2.0, 2.0),
        ("relu", |t, x| t.relu(x), 0.05, 2.0),
        ("relu_neg", |t, x| t.relu(x), -2.0, -0.05),
        ("scale", |t, x| t.scale(x, -1.7), -2.0, 2.0),
        ("add_scalar", |t, x| t.add_scalar(x, 0.4), -2.0, 2.0),
        ("mean", |t, x| t.mean(x), -2.0, 2.0),
        ("sum", |t, x| t.sum(x), -2.0, 2.0),
        ("mean_rows", |t, x| t.mean_rows(x), -2.0, 2.0),
        ("transpose", |t, x| t.transpose(x), -2.0, 2.0),
        ("softmax_rows", |t, x| t.softmax_rows(x), -2.0, 2.0),
        ("clamp_inside", |t, x| t.clamp(x, -5.0, 5.0), -2.0, 2.0),
        ("slice_rows", |t, x| {
            let r = t.shape(x).0;
            t.slice_rows(x, r / 2, r)
        }, -2.0, 2.0),
        ("slice_cols", |t, x| {
            let c = t.shape(x).1;
            t.slice_cols(x, 0, c.div_ceil(2))
        }, -2.0, 2.0),
        ("pick", |t, x| t.pick(x, 0, 0), -2.0, 2.0),
    ];
    for (name, op, lo, hi) in cases {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let x = random(&mut rng, r, c, lo, hi);
            let err = grad_check(
                |t, x| {
                    let y = op(t, x)?;
                    weighted_sum(t, y)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{name} seed {seed}: {err}");
        }
    }
}

type BinaryCase = (&'static str, fn(&mut Tape, Tensor, Tensor) -> crate::Result<Tensor>);

#[test]
fn every_binary_op_passes_grad_check() {
    let cases: Vec<BinaryCase> = vec![
        ("add", |t, a, b| t.add(a, b)),
        ("sub", |t, a, b| t.sub(a, b)),
        ("mul", |t, a, b| t.mul(a, b)),
        ("div", |t, a, b| t.div(a, b)),
        ("concat_rows", |t, a, b| t.concat_rows(&[a, b, a])),
    ];
    for (name, op) in cases {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let a = random(&mut rng, r, c, -2.0, 2.0);
            let b = random(&mut rng, r, c, 0.5, 2.0);
            let err = grad_check_many(
                |t, xs| {
                    let y = op(t, xs[0], xs[1])?;
                    weighted_sum(t, y)
                },
                &[a, b],
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{name} seed {seed}: {err}");
        }
    }
}

#[test]
fn matmul_add_row_and_scale_by_pass_grad_check() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (n, k, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a = random(&mut rng, n, k, -1.0, 1.0);
        let b = random(&mut rng, k, m, -1.0, 1.0);
        let bias = random(&mut rng, 1, m, -1.0, 1.0);
        let s = random(&mut rng, 1, 1, 0.5, 1.5);
        let err = grad_check_many(
            |t, xs| {
                let y = t.matmul(xs[0], xs[1])?;
                let y = t.add_row(y, xs[2])?;
                let y = t.scale_by(y, xs[3])?;
                weighted_sum(t, y)
            },
            &[a, b, bias, s],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn reused_tensor_accumulates_path_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x0 = random(&mut rng, 3, 4, -1.0, 1.0);

    // L = sum(x ⊙ x) + sum(tanh(x)) + mean(x), x used on three paths.
    let mut t = Tape::new();
    let x = t.param(x0.clone());
    let a = t.mul(x, x).unwrap();
    let a = t.sum(a).unwrap();
    let b = t.tanh(x).unwrap();
    let b = t.sum(b).unwrap();
    let c = t.mean(x).unwrap();
    let ab = t.add(a, b).unwrap();
    let l = t.add(ab, c).unwrap();
    t.backward(l).unwrap();
    let combined = t.grad(x).unwrap().clone();

    let single = |f: &dyn Fn(&mut Tape, Tensor) -> crate::Result<Tensor>| {
        let mut t = Tape::new();
        let x = t.param(x0.clone());
        let l = f(&mut t, x).unwrap();
        t.backward(l).unwrap();
        t.grad(x).unwrap().clone()
    };
    let mut expected = single(&|t, x| {
        let a = t.mul(x, x)?;
        t.sum(a)
    });
    expected.add_assign(&single(&|t, x| {
        let b = t.tanh(x)?;
        t.sum(b)
    }));
    expected.add_assign(&single(&|t, x| t.mean(x)));
    assert!(combined.max_abs_diff(&expected) < 1e-14);
}

#[test]
fn grad_reverse_negates_and_scales() {
    let mut t = Tape::new();
    let x = t.param(Matrix::from_vec(1, 2, vec![1.0, -2.0]).unwrap());
    let r = t.grad_reverse(x, 0.5).unwrap();
    assert_eq!(t.value(r), t.value(x));
    let s = t.square(r).unwrap();
    let l = t.sum(s).unwrap();
    t.backward(l).unwrap();
    assert_eq!(t.grad(x).unwrap().data(), &[-1.0, 2.0]);
}

#[test]
fn no_grad_tape_matches_recording_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random(&mut rng, 4, 3, -1.0, 1.0);
    let w = random(&mut rng, 3, 5, -1.0, 1.0);
    let run = |mut t: Tape| {
        let a = t.param(a.clone());
        let w = t.param(w.clone());
        let y = t.matmul(a, w).unwrap();
        let y = t.tanh(y).unwrap();
        let y = t.softmax_rows(y).unwrap();
        t.value(y).clone()
    };
    let recorded = run(Tape::new());
    assert_eq!(recorded, run(Tape::new()));
    assert_eq!(recorded, run(Tape::no_grad()));
}
