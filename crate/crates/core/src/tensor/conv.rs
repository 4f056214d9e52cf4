use super::gemm::{gemm, ROW_MAJOR, TRANSPOSED};
use super::{shape_err, Real, Result, Tensor, TensorError};

/// Geometry of a square-kernel 2-D convolution layer.
///
/// For [`conv2d`] the weights are `[out, in, k, k]`; for
/// [`transposed_conv2d`] they are `[in, out, k, k]`, i.e. the same tensor as
/// the convolution whose adjoint it computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self { in_channels, out_channels, kernel, stride, padding }
    }

    fn validate(&self, op: &'static str) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 || self.stride == 0 {
            return Err(TensorError::Spec { op, detail: format!("{self:?}") });
        }
        Ok(())
    }

    /// `floor((in + 2p - k) / s) + 1`, or an error when the kernel does not fit.
    pub fn conv_out(&self, size: usize) -> Result<usize> {
        let padded = size + 2 * self.padding;
        if padded < self.kernel {
            return Err(TensorError::Spec {
                op: "conv2d",
                detail: format!(
                    "kernel {} does not fit input {size} with padding {}",
                    self.kernel, self.padding
                ),
            });
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// `(in - 1) * s - 2p + k`, or an error when that is not positive.
    pub fn transposed_out(&self, size: usize) -> Result<usize> {
        let full = (size - 1) * self.stride + self.kernel;
        if full <= 2 * self.padding {
            return Err(TensorError::Spec {
                op: "transposed_conv2d",
                detail: format!("padding {} leaves no output for input {size}", self.padding),
            });
        }
        Ok(full - 2 * self.padding)
    }
}

/// Gradients of a (transposed) convolution with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Maps output position `o` and kernel tap `t` to an input coordinate.
    #[inline]
    fn source(&self, o: usize, t: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + t).checked_sub(self.padding)?;
        (pos < limit).then_some(pos)
    }
}

/// Unfolds one `C×H×W` image into a `(C·k·k) × (H'·W')` column matrix.
fn im2col<T: Real>(image: &[T], g: &Geometry, cols: &mut [T]) {
    let positions = g.positions();
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..g.out_h {
                    let dst = &mut row[oy * g.out_w..(oy + 1) * g.out_w];
                    match g.source(oy, ky, g.height) {
                        None => dst.iter_mut().for_each(|v| *v = T::zero()),
                        Some(iy) => {
                            let src = &plane[iy * g.width..(iy + 1) * g.width];
                            for (ox, v) in dst.iter_mut().enumerate() {
                                *v = match g.source(ox, kx, g.width) {
                                    Some(ix) => src[ix],
                                    None => T::zero(),
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into an image.
fn col2im<T: Real>(cols: &[T], g: &Geometry, image: &mut [T]) {
    let positions = g.positions();
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..g.out_h {
                    let Some(iy) = g.source(oy, ky, g.height) else { continue };
                    let src = &row[oy * g.out_w..(oy + 1) * g.out_w];
                    let dst = &mut plane[iy * g.width..(iy + 1) * g.width];
                    for (ox, &v) in src.iter().enumerate() {
                        if let Some(ix) = g.source(ox, kx, g.width) {
                            dst[ix] = dst[ix] + v;
                        }
                    }
                }
            }
        }
    }
}

fn check_params<T: Real>(
    op: &'static str,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    expected_w: [usize; 4],
    bias_len: usize,
) -> Result<()> {
    if weights.shape() != expected_w {
        return Err(shape_err(
            op,
            format!("weights are {:?}, spec requires {:?}", weights.shape(), expected_w),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [bias_len] {
            return Err(shape_err(
                op,
                format!("bias is {:?}, spec requires [{bias_len}]", b.shape()),
            ));
        }
    }
    Ok(())
}

fn conv_geometry<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    channels: usize,
    spec: &ConvSpec,
) -> Result<(usize, Geometry)> {
    let (n, c, h, w) = input.dims4()?;
    if c != channels {
        return Err(shape_err(
            op,
            format!("input has {c} channels, spec requires {channels}"),
        ));
    }
    let out_h = spec.conv_out(h)?;
    let out_w = spec.conv_out(w)?;
    Ok((
        n,
        Geometry {
            channels: c,
            height: h,
            width: w,
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            out_h,
            out_w,
        },
    ))
}

/// Direct 2-D cross-correlation plus bias: `[N,C,H,W] -> [N,K,H',W']`.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    spec.validate("conv2d")?;
    let k = spec.kernel;
    check_params("conv2d", weights, Some(bias), [spec.out_channels, spec.in_channels, k, k], spec.out_channels)?;
    let (n, g) = conv_geometry("conv2d", input, spec.in_channels, spec)?;
    let (rows, positions) = (g.rows(), g.positions());
    let per_in = g.channels * g.height * g.width;
    let per_out = spec.out_channels * positions;
    let mut out = vec![T::zero(); n * per_out];
    let mut cols = vec![T::zero(); rows * positions];
    for (b, dst) in out.chunks_exact_mut(per_out).enumerate() {
        im2col(&input.data()[b * per_in..(b + 1) * per_in], &g, &mut cols);
        for (oc, plane) in dst.chunks_exact_mut(positions).enumerate() {
            plane.iter_mut().for_each(|v| *v = bias.data()[oc]);
        }
        gemm(spec.out_channels, rows, positions, weights.data(), ROW_MAJOR(rows), &cols, ROW_MAJOR(positions), T::one(), dst);
    }
    Tensor::new(&[n, spec.out_channels, g.out_h, g.out_w], out)
}

/// Which gradients a backward pass should produce.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Needs {
    pub input: bool,
    pub params: bool,
}

pub(crate) type PartialGrads<T> = (Option<Tensor<T>>, Option<(Tensor<T>, Tensor<T>)>);

fn bias_grad<T: Real>(grad_out: &Tensor<T>, channels: usize) -> Tensor<T> {
    let positions = grad_out.len() / (grad_out.shape()[0] * channels);
    let mut gb = vec![T::zero(); channels];
    for plane in grad_out.data().chunks_exact(positions * channels) {
        for (c, chunk) in plane.chunks_exact(positions).enumerate() {
            gb[c] = chunk.iter().fold(gb[c], |acc, &v| acc + v);
        }
    }
    Tensor::new(&[channels], gb).expect("bias shape")
}

pub(crate) fn conv2d_backward_parts<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
    needs: Needs,
) -> Result<PartialGrads<T>> {
    spec.validate("conv2d_backward")?;
    let input = saved_input.ok_or(TensorError::MissingActivation { op: "conv2d_backward" })?;
    let k = spec.kernel;
    check_params("conv2d_backward", weights, None, [spec.out_channels, spec.in_channels, k, k], 0)?;
    let (n, g) = conv_geometry("conv2d_backward", input, spec.in_channels, spec)?;
    let expected = [n, spec.out_channels, g.out_h, g.out_w];
    if grad_out.shape() != expected {
        return Err(shape_err(
            "conv2d_backward",
            format!("grad_out is {:?}, forward output was {expected:?}", grad_out.shape()),
        ));
    }
    let (rows, positions) = (g.rows(), g.positions());
    let per_in = g.channels * g.height * g.width;
    let per_out = spec.out_channels * positions;
    let mut cols = vec![T::zero(); rows * positions];
    let mut grad_in = needs.input.then(|| vec![T::zero(); input.len()]);
    let mut grad_w = needs.params.then(|| vec![T::zero(); weights.len()]);
    for b in 0..n {
        let go = &grad_out.data()[b * per_out..(b + 1) * per_out];
        if let Some(gw) = grad_w.as_mut() {
            im2col(&input.data()[b * per_in..(b + 1) * per_in], &g, &mut cols);
            // gw[K×R] += go[K×P] · cols[R×P]^T
            gemm(spec.out_channels, positions, rows, go, ROW_MAJOR(positions), &cols, TRANSPOSED(positions), T::one(), gw);
        }
        if let Some(gi) = grad_in.as_mut() {
            // cols[R×P] = W[K×R]^T · go[K×P]
            gemm(rows, spec.out_channels, positions, weights.data(), TRANSPOSED(rows), go, ROW_MAJOR(positions), T::zero(), &mut cols);
            col2im(&cols, &g, &mut gi[b * per_in..(b + 1) * per_in]);
        }
    }
    let input_grad = grad_in.map(|d| Tensor::new(input.shape(), d)).transpose()?;
    let params = match grad_w {
        Some(gw) => Some((Tensor::new(weights.shape(), gw)?, bias_grad(grad_out, spec.out_channels))),
        None => None,
    };
    Ok((input_grad, params))
}

/// Gradients of [`conv2d`] given the upstream gradient and the saved forward input.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    let (input, params) =
        conv2d_backward_parts(grad_out, saved_input, weights, spec, Needs { input: true, params: true })?;
    let (weights, bias) = params.expect("requested");
    Ok(ConvGrads { input: input.expect("requested"), weights, bias })
}

fn transposed_geometry<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<(usize, Geometry)> {
    let (n, c, h, w) = input.dims4()?;
    if c != spec.in_channels {
        return Err(shape_err(
            op,
            format!("input has {c} channels, spec requires {}", spec.in_channels),
        ));
    }
    let out_h = spec.transposed_out(h)?;
    let out_w = spec.transposed_out(w)?;
    // The output image plays the role of the convolution input.
    Ok((
        n,
        Geometry {
            channels: spec.out_channels,
            height: out_h,
            width: out_w,
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            out_h: h,
            out_w: w,
        },
    ))
}

/// Transposed convolution ("deconvolution"), the adjoint of [`conv2d`] plus bias.
pub fn transposed_conv2d<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    spec.validate("transposed_conv2d")?;
    let k = spec.kernel;
    check_params("transposed_conv2d", weights, Some(bias), [spec.in_channels, spec.out_channels, k, k], spec.out_channels)?;
    let (n, g) = transposed_geometry("transposed_conv2d", input, spec)?;
    let (rows, positions) = (g.rows(), g.positions());
    let per_in = spec.in_channels * positions;
    let per_out = g.channels * g.height * g.width;
    let mut out = vec![T::zero(); n * per_out];
    let mut cols = vec![T::zero(); rows * positions];
    for (b, dst) in out.chunks_exact_mut(per_out).enumerate() {
        let x = &input.data()[b * per_in..(b + 1) * per_in];
        // cols[R×P] = W[Cin×R]^T · x[Cin×P]
        gemm(rows, spec.in_channels, positions, weights.data(), TRANSPOSED(rows), x, ROW_MAJOR(positions), T::zero(), &mut cols);
        col2im(&cols, &g, dst);
        let plane = g.height * g.width;
        for (oc, chunk) in dst.chunks_exact_mut(plane).enumerate() {
            let b = bias.data()[oc];
            chunk.iter_mut().for_each(|v| *v = *v + b);
        }
    }
    Tensor::new(&[n, spec.out_channels, g.height, g.width], out)
}

pub(crate) fn transposed_conv2d_backward_parts<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
    needs: Needs,
) -> Result<PartialGrads<T>> {
    spec.validate("transposed_conv2d_backward")?;
    let input = saved_input.ok_or(TensorError::MissingActivation { op: "transposed_conv2d_backward" })?;
    let k = spec.kernel;
    check_params("transposed_conv2d_backward", weights, None, [spec.in_channels, spec.out_channels, k, k], 0)?;
    let (n, g) = transposed_geometry("transposed_conv2d_backward", input, spec)?;
    let expected = [n, spec.out_channels, g.height, g.width];
    if grad_out.shape() != expected {
        return Err(shape_err(
            "transposed_conv2d_backward",
            format!("grad_out is {:?}, forward output was {expected:?}", grad_out.shape()),
        ));
    }
    let (rows, positions) = (g.rows(), g.positions());
    let per_in = spec.in_channels * positions;
    let per_out = g.channels * g.height * g.width;
    let mut cols = vec![T::zero(); rows * positions];
    let mut grad_in = needs.input.then(|| vec![T::zero(); input.len()]);
    let mut grad_w = needs.params.then(|| vec![T::zero(); weights.len()]);
    for b in 0..n {
        im2col(&grad_out.data()[b * per_out..(b + 1) * per_out], &g, &mut cols);
        if let Some(gi) = grad_in.as_mut() {
            // gx[Cin×P] = W[Cin×R] · cols[R×P]
            gemm(spec.in_channels, rows, positions, weights.data(), ROW_MAJOR(rows), &cols, ROW_MAJOR(positions), T::zero(), &mut gi[b * per_in..(b + 1) * per_in]);
        }
        if let Some(gw) = grad_w.as_mut() {
            // gw[Cin×R] += x[Cin×P] · cols[R×P]^T
            let x = &input.data()[b * per_in..(b + 1) * per_in];
            gemm(spec.in_channels, positions, rows, x, ROW_MAJOR(positions), &cols, TRANSPOSED(positions), T::one(), gw);
        }
    }
    let input_grad = grad_in.map(|d| Tensor::new(input.shape(), d)).transpose()?;
    let params = match grad_w {
        Some(gw) => Some((Tensor::new(weights.shape(), gw)?, bias_grad(grad_out, spec.out_channels))),
        None => None,
    };
    Ok((input_grad, params))
}

/// Gradients of [`transposed_conv2d`].
pub fn transposed_conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    saved_input: Option<&Tensor<T>>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    let (input, params) = transposed_conv2d_backward_parts(
        grad_out,
        saved_input,
        weights,
        spec,
        Needs { input: true, params: true },
    )?;
    let (weights, bias) = params.expect("requested");
    Ok(ConvGrads { input: input.expect("requested"), weights, bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Quadruple-loop cross-correlation, independent of the im2col path.
    fn direct_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: &ConvSpec) -> Vec<f64> {
        let (n, c, h, wd) = x.dims4().unwrap();
        let (oh, ow) = (s.conv_out(h).unwrap(), s.conv_out(wd).unwrap());
        let k = s.kernel;
        let mut out = Vec::new();
        for bi in 0..n {
            for o in 0..s.out_channels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.data()[o];
                        for ci in 0..c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                                    let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    acc += x.data()[((bi * c + ci) * h + iy as usize) * wd + ix as usize]
                                        * w.data()[((o * c + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::new(&[1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let w = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let spec = ConvSpec::new(1, 1, 1, 1, 0);
        assert_eq!(conv2d(&x, &w, &b, &spec).unwrap().data(), x.data());

        let grads = conv2d_backward(&Tensor::full(&[1, 1, 3, 3], 1.0), Some(&x), &w, &spec).unwrap();
        assert_eq!(grads.input.data(), &[1.0; 9]);
    }

    #[test]
    fn zero_input_gives_bias_and_zero_weight_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = ConvSpec::new(2, 3, 3, 1, 1);
        let x = Tensor::zeros(&[2, 2, 5, 5]);
        let w = random(&[3, 2, 3, 3], &mut rng);
        let b = Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let y = conv2d(&x, &w, &b, &spec).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, b.data()[(i / 25) % 3]);
        }
        let g = conv2d_backward(&random(y.shape(), &mut rng), Some(&x), &w, &spec).unwrap();
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strided_padded_case_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = ConvSpec::new(3, 4, 3, 2, 1);
        let x = random(&[2, 3, 8, 8], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        let y = conv2d(&x, &w, &b, &spec).unwrap();
        assert_eq!(y.shape(), &[2, 4, 4, 4]);
        for (a, e) in y.data().iter().zip(direct_conv(&x, &w, &b, &spec)) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let spec = ConvSpec::new(3, 4, 3, 1, 0);
        let w = Tensor::<f64>::zeros(&[4, 3, 3, 3]);
        let b = Tensor::zeros(&[4]);
        let err = conv2d(&Tensor::zeros(&[1, 2, 5, 5]), &w, &b, &spec).unwrap_err();
        assert!(err.to_string().contains("2 channels"), "{err}");
        let err = conv2d(&Tensor::zeros(&[1, 3, 2, 2]), &w, &b, &spec).unwrap_err();
        assert!(matches!(err, TensorError::Spec { .. }));
        let err = conv2d(&Tensor::zeros(&[1, 3, 5, 5]), &Tensor::zeros(&[4, 3, 2, 2]), &b, &spec).unwrap_err();
        assert!(err.to_string().contains("[4, 3, 2, 2]"), "{err}");
        let err = conv2d_backward(&Tensor::zeros(&[1, 4, 3, 3]), None, &w, &spec).unwrap_err();
        assert!(matches!(err, TensorError::MissingActivation { .. }));
        let err = conv2d_backward(&Tensor::zeros(&[1, 4, 2, 3]), Some(&Tensor::zeros(&[1, 3, 5, 5])), &w, &spec)
            .unwrap_err();
        assert!(err.to_string().contains("grad_out"), "{err}");
    }

    #[test]
    fn transposed_unit_cases() {
        let spec = ConvSpec::new(1, 1, 1, 1, 0);
        let x = Tensor::full(&[1, 1, 1, 1], 3.25);
        let w = Tensor::full(&[1, 1, 1, 1], 1.0);
        let y = transposed_conv2d(&x, &w, &Tensor::zeros(&[1]), &spec).unwrap();
        assert_eq!(y.data(), &[3.25]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ConvSpec::new(2, 3, 4, 2, 1);
        let w = random(&[2, 3, 4, 4], &mut rng);
        let b = Tensor::new(&[3], vec![0.1, 0.2, 0.3]).unwrap();
        let y = transposed_conv2d(&Tensor::zeros(&[1, 2, 4, 4]), &w, &b, &spec).unwrap();
        assert_eq!(y.shape(), &[1, 3, 8, 8]);
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, b.data()[i / 64]);
        }
    }

    #[test]
    fn transposed_is_adjoint_of_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = ConvSpec::new(2, 3, 3, 2, 0);
        // conv maps 2 -> 3 channels; its adjoint maps 3 -> 2 with the same weights.
        let w = random(&[3, 2, 3, 3], &mut rng);
        let x = random(&[1, 2, 9, 9], &mut rng);
        let y = random(&[1, 3, 4, 4], &mut rng);
        let cx = conv2d(&x, &w, &Tensor::zeros(&[3]), &spec).unwrap();
        let t_spec = ConvSpec::new(3, 2, 3, 2, 0);
        let ty = transposed_conv2d(&y, &w, &Tensor::zeros(&[2]), &t_spec).unwrap();
        let lhs = cx.dot(&y).unwrap();
        let rhs = x.dot(&ty).unwrap();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn partial_backward_skips_work_but_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ConvSpec::new(2, 2, 4, 2, 1);
        let x = random(&[2, 2, 6, 6], &mut rng);
        let w = random(&[2, 2, 4, 4], &mut rng);
        let go = random(&[2, 2, 3, 3], &mut rng);
        let full = conv2d_backward(&go, Some(&x), &w, &spec).unwrap();
        let (gi, gp) =
            conv2d_backward_parts(&go, Some(&x), &w, &spec, Needs { input: true, params: false }).unwrap();
        assert!(gp.is_none());
        assert_eq!(gi.unwrap(), full.input);
    }
}
