use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numgraph::grad_check_many;

fn random_segments(b: usize, m: usize, p: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..b)
        .map(|_| Matrix::from_vec(m, p, (0..m * p).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap())
        .collect()
}

fn refs(v: &[Matrix]) -> Vec<&Matrix> {
    v.iter().collect()
}

#[test]
fn init_is_deterministic_and_bounded() {
    let a = init_params(6, 64, 2, Task::Regression(1), 3).unwrap();
    let b = init_params(6, 64, 2, Task::Regression(1), 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, init_params(6, 64, 2, Task::Regression(1), 4).unwrap());
    for m in a.matrices() {
        assert!(m.data().iter().all(|v| v.abs() < 0.125));
    }
    assert!(a.layers[0].b_z.data().iter().all(|&v| v == 0.0));
    assert_eq!(a.layers[0].w_z.shape(), (6, 64));
    assert_eq!(a.layers[1].w_z.shape(), (64, 64));
    assert_eq!(a.head.w.shape(), (64, 1));
    a.validate().unwrap();
}

#[test]
fn zero_params_keep_zero_state() {
    let params = ModelParams::zeros(3, 5, 2, Task::Regression(1));
    let segs = random_segments(2, 4, 3, 0);
    let mut tape = Tape::new();
    let (_, trace, _) = gru_forward(&mut tape, &params, &refs(&segs)).unwrap();
    for layer in &trace.layers {
        for &h in layer {
            assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn saturated_update_gate_gives_tanh() {
    let mut params = ModelParams::zeros(1, 1, 1, Task::Regression(1));
    params.layers[0].b_z = Matrix::scalar(100.0);
    params.layers[0].w_h = Matrix::scalar(1.0);
    let seg = Matrix::scalar(1.0);
    let mut tape = Tape::new();
    let (_, trace, _) = gru_forward(&mut tape, &params, &[&seg]).unwrap();
    let h = tape.value(trace.layers[0][0]).item().unwrap();
    assert!((h - 0.76159).abs() < 1e-5, "{h}");
    assert!((h - 1f64.tanh()).abs() < 1e-12);
}

#[test]
fn trace_shape() {
    let params = init_params(6, 64, 2, Task::Regression(1), 0).unwrap();
    let segs = random_segments(4, 16, 6, 1);
    let mut tape = Tape::no_grad();
    let (_, trace, out) = gru_forward(&mut tape, &params, &refs(&segs)).unwrap();
    assert_eq!(trace.layers.len(), 2);
    assert_eq!(trace.steps(), 16);
    for layer in &trace.layers {
        for &h in layer {
            assert_eq!(tape.shape(h), (4, 64));
        }
    }
    assert_eq!(tape.shape(out), (4, 1));
}

#[test]
fn wrong_feature_count_is_a_dimension_error() {
    let params = init_params(3, 4, 1, Task::Regression(1), 0).unwrap();
    let segs = random_segments(2, 5, 2, 0);
    assert!(matches!(predict(&params, &refs(&segs)), Err(Error::Dimension { .. })));
}

#[test]
fn predict_matches_recorded_forward() {
    for task in [Task::Regression(2), Task::Classification(3)] {
        let params = init_params(3, 8, 2, task, 5).unwrap();
        let segs = random_segments(5, 7, 3, 2);
        let mut tape = Tape::new();
        let (_, _, out) = gru_forward(&mut tape, &params, &refs(&segs)).unwrap();
        let fast = predict(&params, &refs(&segs)).unwrap();
        assert_eq!(tape.value(out), &fast);
        assert_eq!(fast.shape(), (5, task.output_dim()));
        if let Task::Classification(_) = task {
            for i in 0..5 {
                assert!((fast.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn hidden_states_stay_in_unit_box() {
    let params = init_params(4, 6, 2, Task::Regression(1), 9).unwrap();
    let mut big = params.clone();
    for m in big.matrices_mut() {
        for v in m.data_mut() {
            *v *= 40.0;
        }
    }
    let segs = random_segments(3, 20, 4, 3);
    for p in [&params, &big] {
        let mut tape = Tape::no_grad();
        let (_, trace, _) = gru_forward(&mut tape, p, &refs(&segs)).unwrap();
        for layer in &trace.layers {
            for &h in layer {
                assert!(tape.value(h).data().iter().all(|v| v.abs() <= 1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn trace_entries_reproduce_from_previous_state() {
    let params = init_params(3, 5, 2, Task::Regression(1), 1).unwrap();
    let segs = random_segments(2, 6, 3, 4);
    let mut tape = Tape::no_grad();
    let (bound, trace, _) = gru_forward(&mut tape, &params, &refs(&segs)).unwrap();
    let steps = batch_steps(&refs(&segs)).unwrap();
    for layer in 0..2 {
        for t in 1..6 {
            let x = if layer == 0 {
                tape.constant(steps[t].clone())
            } else {
                trace.layers[0][t]
            };
            let h = bound.gru_step(&mut tape, layer, x, trace.layers[layer][t - 1]).unwrap();
            assert_eq!(tape.value(h), tape.value(trace.layers[layer][t]));
        }
    }
}

// Plain-loop GRU used only to cross-check the tape version.
fn naive_gru_last(params: &ModelParams, seg: &Matrix) -> Vec<f64> {
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut input: Vec<Vec<f64>> = (0..seg.rows()).map(|t| seg.row(t).to_vec()).collect();
    for layer in &params.layers {
        let q = params.q;
        let mut h = vec![0.0; q];
        let mut outs = Vec::new();
        for x in &input {
            let lin = |w: &Matrix, u: &Matrix, b: &Matrix, hv: &[f64], j: usize| {
                let mut s = b.get(0, j);
                for (i, xi) in x.iter().enumerate() {
                    s += xi * w.get(i, j);
                }
                for (i, hi) in hv.iter().enumerate() {
                    s += hi * u.get(i, j);
                }
                s
            };
            let z: Vec<f64> = (0..q).map(|j| sig(lin(&layer.w_z, &layer.u_z, &layer.b_z, &h, j))).collect();
            let r: Vec<f64> = (0..q).map(|j| sig(lin(&layer.w_r, &layer.u_r, &layer.b_r, &h, j))).collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let c: Vec<f64> = (0..q).map(|j| lin(&layer.w_h, &layer.u_h, &layer.b_h, &rh, j).tanh()).collect();
            h = (0..q).map(|j| (1.0 - z[j]) * h[j] + z[j] * c[j]).collect();
            outs.push(h.clone());
        }
        input = outs;
    }
    input.pop().unwrap()
}

#[test]
fn matches_plain_loop_gru() {
    let params = init_params(3, 4, 2, Task::Regression(1), 11).unwrap();
    let segs = random_segments(3, 5, 3, 6);
    let mut tape = Tape::no_grad();
    let (_, trace, _) = gru_forward(&mut tape, &params, &refs(&segs)).unwrap();
    let last = tape.value(*trace.layers[1].last().unwrap()).clone();
    for (i, seg) in segs.iter().enumerate() {
        let want = naive_gru_last(&params, seg);
        for (j, w) in want.iter().enumerate() {
            assert!((last.get(i, j) - w).abs() < 1e-12);
        }
    }
}

fn loss_fn(
    task: Task,
    segs: Vec<Matrix>,
    targets: Matrix,
    template: ModelParams,
) -> impl Fn(&mut Tape, &[Tensor]) -> Result<Tensor> {
    move |tape, ps| {
        let bound = BoundModel {
            task,
            layers: template.layers.len(),
            handles: ps.to_vec(),
        };
        let steps = batch_steps(&segs.iter().collect::<Vec<_>>())?;
        let xs: Vec<Tensor> = steps.into_iter().map(|s| tape.constant(s)).collect();
        let (_, out) = bound.forward(tape, &xs)?;
        task_loss(tape, task, out, &targets)
    }
}

#[test]
fn full_model_gradients_check_out() {
    for (task, targets) in [
        (Task::Regression(1), Matrix::column(&[0.3, -0.5, 0.9, 0.1])),
        (Task::Classification(3), Matrix::column(&[0.0, 2.0, 1.0, 2.0])),
    ] {
        let mut params = init_params(2, 3, 2, task, 21).unwrap();
        // Non-zero biases so their gradients are exercised away from zero.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in params.matrices_mut() {
            for v in m.data_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        let segs = random_segments(4, 2, 2, 13);
        let f = loss_fn(task, segs, targets, params.clone());
        let inputs: Vec<Matrix> = params.matrices().into_iter().cloned().collect();
        let err = grad_check_many(f, &inputs, 1e-5).unwrap();
        assert!(err < 1e-4, "{task:?}: {err}");
    }
}

#[test]
fn json_round_trip_is_exact() {
    let params = init_params(3, 5, 2, Task::Classification(4), 2).unwrap();
    let back = ModelParams::from_json(&params.to_json()).unwrap();
    assert_eq!(back, params);
}

#[test]
fn extra_fields_survive_round_trip() {
    let params = init_params(2, 3, 1, Task::Regression(1), 0).unwrap();
    let mut extra = serde_json::Map::new();
    extra.insert("window".into(), serde_json::json!(16));
    let (back, got) = ModelParams::from_json_with(&params.to_json_with(extra.clone())).unwrap();
    assert_eq!(back, params);
    assert_eq!(got, extra);
}

#[test]
fn tampered_shape_is_a_format_error() {
    let params = init_params(2, 3, 1, Task::Regression(1), 0).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["weights"]["layer0.W_z"]["shape"] = serde_json::json!([3, 2]);
    assert!(matches!(ModelParams::from_json(&doc.to_string()), Err(Error::Format(_))));

    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["q"] = serde_json::json!(4);
    assert!(matches!(ModelParams::from_json(&doc.to_string()), Err(Error::Format(_))));
}

#[test]
fn truncated_document_is_a_format_error() {
    let text = init_params(2, 3, 1, Task::Regression(1), 0).unwrap().to_json();
    assert!(matches!(ModelParams::from_json(&text[..text.len() / 2]), Err(Error::Format(_))));
}

#[test]
fn newer_version_is_rejected() {
    let params = init_params(2, 3, 1, Task::Regression(1), 0).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["version"] = serde_json::json!(2);
    assert!(matches!(ModelParams::from_json(&doc.to_string()), Err(Error::Version { .. })));
    doc["version"] = serde_json::json!("2");
    assert!(matches!(ModelParams::from_json(&doc.to_string()), Err(Error::Version { .. })));
}

#[test]
fn cross_entropy_hand_value() {
    let mut tape = Tape::new();
    let probs = tape.constant(Matrix::from_rows(&[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap());
    let loss = task_loss(&mut tape, Task::Classification(2), probs, &Matrix::column(&[1.0, 0.0])).unwrap();
    let want = -(0.75f64.ln() + 0.5f64.ln()) / 2.0;
    assert!((tape.item(loss).unwrap() - want).abs() < 1e-15);
}

#[test]
fn out_of_range_label_is_rejected() {
    let mut tape = Tape::new();
    let probs = tape.constant(Matrix::filled(1, 2, 0.5));
    assert!(task_loss(&mut tape, Task::Classification(2), probs, &Matrix::column(&[2.0])).is_err());
}
