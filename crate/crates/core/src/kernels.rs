//! Raw numerical kernels over HWC tensors.
//!
//! Convolution is valid (no padding), stride 1, cross-correlation
//! orientation. Kernels are laid out `(K, K, Cin, Cout)` so that the inner
//! loop of every pass is a contiguous run over output channels.
//! All loops run in a fixed order, so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn expect_rank<T: Real>(op: &'static str, t: &Tensor<T>, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![0; rank],
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

struct ConvDims {
    h: usize,
    w: usize,
    cin: usize,
    k: usize,
    cout: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
) -> Result<ConvDims> {
    expect_rank(op, input, 3)?;
    expect_rank(op, kernels, 4)?;
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (k, k2, kcin, cout) = (
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    );
    if k != k2 || kcin != cin {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![k, k, cin, cout],
            got: kernels.shape().to_vec(),
        });
    }
    if h < k || w < k {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![k, k, cin],
            got: input.shape().to_vec(),
        });
    }
    Ok(ConvDims {
        h,
        w,
        cin,
        k,
        cout,
        oh: h - k + 1,
        ow: w - k + 1,
    })
}

/// Dense product `C ← A·B + β·C` where `A` is m×k (stored k×m when
/// `a_t`), `B` is k×n (stored n×k when `b_t`) and `C` is row-major m×n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_t: bool,
    b: &[T],
    b_t: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every index reachable through the
    // shapes and strides above, and `c` is a unique borrow.
    unsafe {
        T::gemm(m, k, n, T::one(), a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Unrolls every `k×k×cin` receptive field into a row: `(oh·ow) × (k·k·cin)`.
fn im2col<T: Real>(src: &[T], d: &ConvDims) -> Vec<T> {
    let row = d.k * d.cin;
    let mut cols = Vec::with_capacity(d.oh * d.ow * d.k * row);
    for y in 0..d.oh {
        for x in 0..d.ow {
            for dy in 0..d.k {
                let start = ((y + dy) * d.w + x) * d.cin;
                cols.extend_from_slice(&src[start..start + row]);
            }
        }
    }
    cols
}

/// `out(y,x,co) = bias(co) + Σ input(y+dy, x+dx, ci) · kernels(dy,dx,ci,co)`.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let d = conv_dims("conv2d_forward", input, kernels)?;
    if bias.shape() != [d.cout] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_forward",
            expected: vec![d.cout],
            got: bias.shape().to_vec(),
        });
    }
    let cols = im2col(input.data(), &d);
    let mut out = Tensor::zeros(&[d.oh, d.ow, d.cout]);
    let out_data = out.data_mut();
    for cell in out_data.chunks_exact_mut(d.cout) {
        cell.copy_from_slice(bias.data());
    }
    gemm(d.oh * d.ow, d.k * d.k * d.cin, d.cout, &cols, false, kernels.data(), false, T::one(), out_data);
    Ok(out)
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv2d_forward`] with respect to input, kernels and bias.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = conv2d_backward_opt(grad_out, input, kernels, true)?;
    Ok((g.input.expect("input grad requested"), g.kernels, g.bias))
}

/// As [`conv2d_backward`], optionally skipping the input gradient (first
/// layer of a network never needs it).
pub fn conv2d_backward_opt<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    let d = conv_dims("conv2d_backward", input, kernels)?;
    if grad_out.shape() != [d.oh, d.ow, d.cout] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            expected: vec![d.oh, d.ow, d.cout],
            got: grad_out.shape().to_vec(),
        });
    }
    let (p, r) = (d.oh * d.ow, d.k * d.k * d.cin);
    let go = grad_out.data();

    let mut g_bias = Tensor::zeros(&[d.cout]);
    for cell in go.chunks_exact(d.cout) {
        for (b, &v) in g_bias.data_mut().iter_mut().zip(cell) {
            *b += v;
        }
    }

    // dK = colsᵀ · G
    let cols = im2col(input.data(), &d);
    let mut g_kern = Tensor::zeros(kernels.shape());
    gemm(r, p, d.cout, &cols, true, go, false, T::zero(), g_kern.data_mut());

    // dCols = G · Kᵀ, then scatter-add each row back onto its receptive field
    let g_in = want_input.then(|| {
        let mut g_cols = cols;
        gemm(p, d.cout, r, go, false, kernels.data(), true, T::zero(), &mut g_cols);
        let mut gi = Tensor::zeros(&[d.h, d.w, d.cin]);
        let gi_data = gi.data_mut();
        let row = d.k * d.cin;
        let mut fields = g_cols.chunks_exact(row);
        for y in 0..d.oh {
            for x in 0..d.ow {
                for dy in 0..d.k {
                    let start = ((y + dy) * d.w + x) * d.cin;
                    let src = fields.next().expect("one row per field offset");
                    for (dst, &v) in gi_data[start..start + row].iter_mut().zip(src) {
                        *dst += v;
                    }
                }
            }
        }
        gi
    });

    Ok(ConvGrads {
        input: g_in,
        kernels: g_kern,
        bias: g_bias,
    })
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled tensor and, per output cell, the flat input index of
/// the winning element (ties go to the smallest index).
pub fn maxpool2d_forward<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    expect_rank("maxpool2d_forward", input, 3)?;
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch {
            op: "maxpool2d_forward",
            expected: vec![2, 2, c],
            got: input.shape().to_vec(),
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = input.data();
    let mut out = Tensor::zeros(&[oh, ow, c]);
    let mut argmax = vec![0usize; oh * ow * c];
    let dst = out.data_mut();
    for y in 0..oh {
        for x in 0..ow {
            let base = (y * ow + x) * c;
            let corners = [
                ((2 * y) * w + 2 * x) * c,
                ((2 * y) * w + 2 * x + 1) * c,
                ((2 * y + 1) * w + 2 * x) * c,
                ((2 * y + 1) * w + 2 * x + 1) * c,
            ];
            for ch in 0..c {
                let mut best_idx = corners[0] + ch;
                let mut best = src[best_idx];
                for &corner in &corners[1..] {
                    let idx = corner + ch;
                    if src[idx] > best {
                        best = src[idx];
                        best_idx = idx;
                    }
                }
                dst[base + ch] = best;
                argmax[base + ch] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the input position recorded in `argmax`.
pub fn maxpool2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::ShapeMismatch {
            op: "maxpool2d_backward",
            expected: vec![argmax.len()],
            got: grad_out.shape().to_vec(),
        });
    }
    let mut grad_in = Tensor::zeros(input_shape);
    let len = grad_in.len();
    let gi = grad_in.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        if idx >= len {
            return Err(Error::IndexOutOfRange { index: idx, len });
        }
        gi[idx] += g;
    }
    Ok(grad_in)
}

/// Plain `(M,K) × (K,N)` matrix product.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    expect_rank("matmul", a, 2)?;
    expect_rank("matmul", b, 2)?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            expected: vec![k, n],
            got: b.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[m, n]);
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for i in 0..m {
        let orow = &mut od[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            for (o, &bv) in orow.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
    }

    #[test]
    fn conv_output_shape_first_layer() {
        let input = Tensor::<f32>::zeros(&[128, 128, 3]);
        let kernels = Tensor::zeros(&[7, 7, 3, 32]);
        let bias = Tensor::zeros(&[32]);
        let out = conv2d_forward(&input, &kernels, &bias).unwrap();
        assert_eq!(out.shape(), &[122, 122, 32]);
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = Rng::new(5);
        let input = random(&[5, 6, 1], &mut rng);
        let kernels = Tensor::full(&[1, 1, 1, 1], 1.0);
        let out = conv2d_forward(&input, &kernels, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_window_sums() {
        let input = Tensor::<f32>::from_fn(&[4, 4, 1], |i| (i + 1) as f32);
        let kernels = Tensor::full(&[3, 3, 1, 1], 1.0);
        let out = conv2d_forward(&input, &kernels, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.data(), &[54.0, 63.0, 90.0, 99.0]);
    }

    #[test]
    fn conv_channel_mismatch_is_error() {
        let input = Tensor::<f32>::zeros(&[8, 8, 3]);
        let kernels = Tensor::zeros(&[3, 3, 2, 4]);
        let err = conv2d_forward(&input, &kernels, &Tensor::zeros(&[4])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3, 3, 2, 4]") && msg.contains("[3, 3, 3, 4]"), "{msg}");
    }

    #[test]
    fn conv_backward_zero_grad() {
        let mut rng = Rng::new(9);
        let input = random(&[6, 6, 2], &mut rng);
        let kernels = random(&[3, 3, 2, 2], &mut rng);
        let (gi, gk, gb) =
            conv2d_backward(&Tensor::zeros(&[4, 4, 2]), &input, &kernels).unwrap();
        assert!(gi.data().iter().chain(gk.data()).chain(gb.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn conv_backward_identity_kernel_passes_grad() {
        let mut rng = Rng::new(10);
        let input = random(&[4, 4, 1], &mut rng);
        let go = random(&[4, 4, 1], &mut rng);
        let (gi, _, gb) =
            conv2d_backward(&go, &input, &Tensor::full(&[1, 1, 1, 1], 1.0)).unwrap();
        assert_eq!(gi, go);
        assert!((gb.data()[0] - go.sum()).abs() < 1e-12);
    }

    #[test]
    fn conv_backward_shape_error() {
        let input = Tensor::<f32>::zeros(&[6, 6, 2]);
        let kernels = Tensor::zeros(&[3, 3, 2, 2]);
        assert!(conv2d_backward(&Tensor::zeros(&[3, 4, 2]), &input, &kernels).is_err());
    }

    #[test]
    fn pool_example_block() {
        let input = Tensor::<f32>::from_fn(&[4, 4, 1], |i| (i + 1) as f32);
        let (out, argmax) = maxpool2d_forward(&input).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0, 14.0, 16.0]);
        assert_eq!(argmax, vec![5, 7, 13, 15]);
    }

    #[test]
    fn pool_floor_and_constant() {
        let input = Tensor::<f32>::full(&[57, 57, 64], 0.25);
        let (out, _) = maxpool2d_forward(&input).unwrap();
        assert_eq!(out.shape(), &[28, 28, 64]);
        assert!(out.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn pool_ties_take_smallest_index() {
        let input = Tensor::<f32>::full(&[2, 2, 1], 1.0);
        let (_, argmax) = maxpool2d_forward(&input).unwrap();
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn pool_too_small() {
        assert!(maxpool2d_forward(&Tensor::<f32>::zeros(&[1, 4, 1])).is_err());
    }

    #[test]
    fn pool_backward_one_per_block() {
        let mut rng = Rng::new(11);
        let input = random(&[6, 6, 1], &mut rng);
        let (out, argmax) = maxpool2d_forward(&input).unwrap();
        let ones = Tensor::full(out.shape(), 1.0);
        let gi = maxpool2d_backward(&ones, &argmax, input.shape()).unwrap();
        for by in 0..3 {
            for bx in 0..3 {
                let block: f64 = (0..2)
                    .flat_map(|dy| (0..2).map(move |dx| (dy, dx)))
                    .map(|(dy, dx)| gi.get(&[2 * by + dy, 2 * bx + dx, 0]))
                    .sum();
                assert_eq!(block, 1.0);
            }
        }
        let zero = maxpool2d_backward(&Tensor::<f32>::zeros(out.shape()), &argmax, input.shape()).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pool_backward_rejects_bad_index() {
        let go = Tensor::<f32>::full(&[1, 1, 1], 1.0);
        let err = maxpool2d_backward(&go, &[4], &[2, 2, 1]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 4, len: 4 }));
    }

    #[test]
    fn matmul_small_cases() {
        let a = Tensor::<f32>::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![3.0, 4.0]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);

        let eye = Tensor::<f32>::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let m = Tensor::from_fn(&[3, 2], |i| i as f32 * 0.5 - 1.0);
        assert_eq!(matmul(&eye, &m).unwrap(), m);

        assert!(matmul(&a, &a).is_err());
    }
}
