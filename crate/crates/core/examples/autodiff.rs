//! Reverse-mode gradients on a small graph, checked against central differences.
//!
//! Run with: cargo run --example autodiff

use adarnn::numgraph::{grad_check, Matrix, Tape};

fn main() -> adarnn::Result<()> {
    let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.0], vec![1.5, 0.25, -0.75]])?;
    let w = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.5, -0.6]])?;

    // loss = mean(tanh(x W)^2)
    let mut tape = Tape::new();
    let tx = tape.param(x.clone());
    let tw = tape.param(w.clone());
    let h = tape.matmul(tx, tw)?;
    let h = tape.tanh(h)?;
    let sq = tape.square(h)?;
    let loss = tape.mean(sq)?;
    tape.backward(loss)?;

    println!("loss      = {:.6}", tape.item(loss)?);
    println!("dloss/dW  = {:?}", tape.grad(tw).unwrap().data());
    println!("dloss/dx  = {:?}", tape.grad(tx).unwrap().data());

    let err = grad_check(
        |t, wt| {
            let xc = t.constant(x.clone());
            let h = t.matmul(xc, wt)?;
            let h = t.tanh(h)?;
            let sq = t.square(h)?;
            t.mean(sq)
        },
        &w,
        1e-5,
    )?;
    println!("max relative error vs central differences: {err:.2e}");
    Ok(())
}
