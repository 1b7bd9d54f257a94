use crate::error::{Error, Result};

use super::{Matrix, Tape, Tensor};

/// Central-difference derivative of a scalar function of a flat vector.
pub fn central_difference<F>(f: F, point: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x)?;
        x[i] = orig - eps;
        let down = f(&x)?;
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric { op: "grad_check" });
        }
        out.push((up - down) / (2.0 * eps));
    }
    Ok(out)
}

/// Compares tape gradients of a scalar function against central differences.
///
/// Returns the largest `|analytic - numeric| / max(1, |numeric|)` over every
/// coordinate of every input.
pub fn grad_check_many<F>(f: F, inputs: &[Matrix], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Tensor]) -> Result<Tensor>,
{
    if eps <= 0.0 {
        return Err(Error::Contract("grad_check needs eps > 0".into()));
    }
    let mut tape = Tape::new();
    let handles: Vec<Tensor> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &handles)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = handles
        .iter()
        .zip(inputs)
        .map(|(&h, m)| tape.grad(h).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
        .collect();

    let eval = |values: &[Matrix]| -> Result<f64> {
        let mut t = Tape::no_grad();
        let hs: Vec<Tensor> = values.iter().map(|m| t.constant(m.clone())).collect();
        let y = f(&mut t, &hs)?;
        t.item(y)
    };

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let numeric = central_difference(
            |flat| {
                let mut values = inputs.to_vec();
                values[k] = Matrix::from_vec(input.rows(), input.cols(), flat.to_vec())?;
                eval(&values)
            },
            input.data(),
            eps,
        )?;
        for (a, n) in analytic[k].data().iter().zip(&numeric) {
            worst = worst.max((a - n).abs() / n.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(f: F, x: &Matrix, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Tensor) -> Result<Tensor>,
{
    grad_check_many(|tape, xs| f(tape, xs[0]), std::slice::from_ref(x), eps)
}
