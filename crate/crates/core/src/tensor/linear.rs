use super::gemm::{gemm, ROW_MAJOR, TRANSPOSED};
use super::{shape_err, Real, Result, Tensor, TensorError};

/// Gradients of [`fully_connected`].
#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T: Real>(op: &'static str, input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (n, d) = match input.shape() {
        [n, d] => (*n, *d),
        other => return Err(shape_err(op, format!("input must be [N,D], got {other:?}"))),
    };
    match weights.shape() {
        [wd, m] if *wd == d => Ok((n, d, *m)),
        other => Err(shape_err(op, format!("input is [{n},{d}] but weights are {other:?}"))),
    }
}

/// Affine map `[N,D] · [D,M] + [M] -> [N,M]`.
pub fn fully_connected<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d, m) = check("fully_connected", input, weights)?;
    if bias.shape() != [m] {
        return Err(shape_err("fully_connected", format!("bias is {:?}, expected [{m}]", bias.shape())));
    }
    let mut out: Vec<T> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
    gemm(n, d, m, input.data(), ROW_MAJOR(d), weights.data(), ROW_MAJOR(m), T::one(), &mut out);
    Tensor::new(&[n, m], out)
}

pub(crate) fn fully_connected_backward_parts<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
    want_params: bool,
) -> Result<(Tensor<T>, Option<(Tensor<T>, Tensor<T>)>)> {
    let input = saved_input.ok_or(TensorError::MissingActivation { op: "fully_connected_backward" })?;
    let (n, d, m) = check("fully_connected_backward", input, weights)?;
    if grad_out.shape() != [n, m] {
        return Err(shape_err(
            "fully_connected_backward",
            format!("grad_out is {:?}, expected [{n},{m}]", grad_out.shape()),
        ));
    }
    let go = grad_out.data();
    let mut gi = vec![T::zero(); n * d];
    gemm(n, m, d, go, ROW_MAJOR(m), weights.data(), TRANSPOSED(m), T::zero(), &mut gi);
    let params = if want_params {
        let mut gw = vec![T::zero(); d * m];
        gemm(d, n, m, input.data(), TRANSPOSED(d), go, ROW_MAJOR(m), T::zero(), &mut gw);
        let mut gb = vec![T::zero(); m];
        for row in go.chunks_exact(m) {
            for (b, &g) in gb.iter_mut().zip(row) {
                *b = *b + g;
            }
        }
        Some((Tensor::new(&[d, m], gw)?, Tensor::new(&[m], gb)?))
    } else {
        None
    };
    Ok((Tensor::new(&[n, d], gi)?, params))
}

pub fn fully_connected_backward<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (input, params) = fully_connected_backward_parts(grad_out, saved_input, weights, true)?;
    let (weights, bias) = params.expect("requested");
    Ok(LinearGrads { input, weights, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_cases() {
        let x = Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let eye = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        assert_eq!(fully_connected(&x, &eye, &Tensor::zeros(&[3])).unwrap().data(), x.data());

        let b = Tensor::new(&[2], vec![0.5, -1.5]).unwrap();
        let y = fully_connected(&Tensor::zeros(&[3, 4]), &Tensor::full(&[4, 2], 7.0), &b).unwrap();
        assert_eq!(y.data(), &[0.5, -1.5, 0.5, -1.5, 0.5, -1.5]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = fully_connected(&Tensor::<f64>::zeros(&[2, 3]), &Tensor::zeros(&[4, 2]), &Tensor::zeros(&[2])).unwrap_err();
        assert!(err.to_string().contains("[4, 2]"), "{err}");
        assert!(fully_connected(&Tensor::<f64>::zeros(&[2, 3]), &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[3])).is_err());
    }
}
