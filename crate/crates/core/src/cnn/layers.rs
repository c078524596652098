//! Convolution, dense, ReLU, softmax and cross-entropy, each with its
//! backward pass. Convolutions are stride 1 with no padding and run as an
//! im2col matrix product; images are `H x W x C` row-major.

use super::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Probability floor inside the logarithm of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    /// `[F, k, k, C]`
    pub weights: Tensor<T>,
    /// `[F]`
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 4 || s[1] != s[2] || bias.shape() != [s[0]] {
            return Err(Error::Shape(format!(
                "conv weights {:?} with bias {:?}",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn size(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.size();
        if h < k || w < k {
            return Err(Error::Shape(format!("{h}x{w} input smaller than {k}x{k} filter")));
        }
        Ok((h - k + 1, w - k + 1))
    }

    /// Patch matrix `[B*Ho*Wo, k*k*C]` for a `[B, H, W, C]` input.
    fn im2col(&self, x: &[T], batch: usize, h: usize, w: usize) -> Vec<T> {
        let (k, c) = (self.size(), self.channels());
        let (ho, wo) = (h - k + 1, w - k + 1);
        let patch = k * k * c;
        let mut cols = Vec::with_capacity(batch * ho * wo * patch);
        for b in 0..batch {
            let image = &x[b * h * w * c..(b + 1) * h * w * c];
            for y in 0..ho {
                for xo in 0..wo {
                    for dy in 0..k {
                        let start = ((y + dy) * w + xo) * c;
                        cols.extend_from_slice(&image[start..start + k * c]);
                    }
                }
            }
        }
        cols
    }

    /// Returns the `[B, Ho, Wo, F]` output and the patch matrix for backward.
    pub fn forward_batch(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
        let &[batch, h, w, c] = x.shape() else {
            return Err(Error::Shape(format!("conv input must be [B,H,W,C], got {:?}", x.shape())));
        };
        if c != self.channels() {
            return Err(Error::Shape(format!("{c} input channels, filters expect {}", self.channels())));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        let f = self.filters();
        let patch = self.size() * self.size() * c;
        let rows = batch * ho * wo;
        let cols = self.im2col(x.data(), batch, h, w);
        let mut out = Vec::with_capacity(rows * f);
        for _ in 0..rows {
            out.extend_from_slice(self.bias.data());
        }
        T::gemm(&mut out, rows, f, patch, &cols, false, self.weights.data(), true, true);
        Ok((Tensor::new(vec![batch, ho, wo, f], out)?, cols))
    }

    /// Gradients `(dW, db, dX)`; `dX` only when `need_input_grad`.
    pub fn backward_batch(
        &self,
        input_shape: &[usize],
        cols: &[T],
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
        let (batch, h, w, c) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
        let (k, f) = (self.size(), self.filters());
        let (ho, wo) = (h - k + 1, w - k + 1);
        let rows = batch * ho * wo;
        let patch = k * k * c;
        let g = grad_out.data();

        let mut dw = vec![T::zero(); f * patch];
        T::gemm(&mut dw, f, patch, rows, g, true, cols, false, false);
        let mut db = vec![T::zero(); f];
        for row in g.chunks_exact(f) {
            for (acc, &v) in db.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }

        let dx = need_input_grad.then(|| {
            let mut dcols = vec![T::zero(); rows * patch];
            T::gemm(&mut dcols, rows, patch, f, g, false, self.weights.data(), false, false);
            let mut dx = vec![T::zero(); batch * h * w * c];
            let mut row = 0;
            for b in 0..batch {
                let image = &mut dx[b * h * w * c..(b + 1) * h * w * c];
                for y in 0..ho {
                    for xo in 0..wo {
                        let src = &dcols[row * patch..(row + 1) * patch];
                        for dy in 0..k {
                            let start = ((y + dy) * w + xo) * c;
                            for (d, &s) in image[start..start + k * c].iter_mut().zip(&src[dy * k * c..(dy + 1) * k * c]) {
                                *d = *d + s;
                            }
                        }
                        row += 1;
                    }
                }
            }
            Tensor::new(input_shape.to_vec(), dx).expect("input shape")
        });
        (
            Tensor::new(self.weights.shape().to_vec(), dw).expect("weight shape"),
            Tensor::new(vec![f], db).expect("bias shape"),
            dx,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `[m, n]`: `m` outputs from `n` inputs.
    pub weights: Tensor<T>,
    /// `[m]`
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 2 || bias.shape() != [s[0]] {
            return Err(Error::Shape(format!(
                "dense weights {:?} with bias {:?}",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    /// `[B, n] -> [B, m]`.
    pub fn forward_batch(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let &[batch, n] = x.shape() else {
            return Err(Error::Shape(format!("dense input must be [B,n], got {:?}", x.shape())));
        };
        if n != self.inputs() {
            return Err(Error::Shape(format!("{n} inputs, layer expects {}", self.inputs())));
        }
        let m = self.outputs();
        let mut out = Vec::with_capacity(batch * m);
        for _ in 0..batch {
            out.extend_from_slice(self.bias.data());
        }
        T::gemm(&mut out, batch, m, n, x.data(), false, self.weights.data(), true, true);
        Tensor::new(vec![batch, m], out)
    }

    pub fn backward_batch(
        &self,
        x: &Tensor<T>,
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
        let (batch, n, m) = (x.shape()[0], self.inputs(), self.outputs());
        let g = grad_out.data();
        let mut dw = vec![T::zero(); m * n];
        T::gemm(&mut dw, m, n, batch, g, true, x.data(), false, false);
        let mut db = vec![T::zero(); m];
        for row in g.chunks_exact(m) {
            for (acc, &v) in db.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        let dx = need_input_grad.then(|| {
            let mut dx = vec![T::zero(); batch * n];
            T::gemm(&mut dx, batch, n, m, g, false, self.weights.data(), false, false);
            Tensor::new(vec![batch, n], dx).expect("input shape")
        });
        (
            Tensor::new(vec![m, n], dw).expect("weight shape"),
            Tensor::new(vec![m], db).expect("bias shape"),
            dx,
        )
    }
}

/// Single-image convolution: `[H, W, C]` with `[F, k, k, C]` filters gives
/// `[H-k+1, W-k+1, F]`.
pub fn conv2d_forward<T: Real>(x: &Tensor<T>, filters: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let &[h, w, c] = x.shape() else {
        return Err(Error::Shape(format!("conv input must be [H,W,C], got {:?}", x.shape())));
    };
    let layer = Conv2d::new(filters.clone(), bias.clone())?;
    let batched = Tensor::new(vec![1, h, w, c], x.data().to_vec())?;
    let (out, _) = layer.forward_batch(&batched)?;
    let (ho, wo) = layer.output_hw(h, w)?;
    out.reshape(vec![ho, wo, layer.filters()])
}

pub fn dense_forward<T: Real>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let layer = Dense::new(weights.clone(), bias.clone())?;
    let batched = Tensor::new(vec![1, x.len()], x.data().to_vec())?;
    let out = layer.forward_batch(&batched)?;
    out.reshape(vec![layer.outputs()])
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    relu_in_place(&mut out);
    out
}

pub(crate) fn relu_in_place<T: Real>(x: &mut Tensor<T>) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
}

/// Zeroes gradient entries whose forward output was not positive.
pub(crate) fn relu_backward<T: Real>(output: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Max-subtracted softmax of one logit vector.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    softmax_in_place(out.data_mut());
    out
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    row.iter_mut().for_each(|v| *v = *v / sum);
}

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, label: usize) -> Result<f64> {
    let p = probs
        .data()
        .get(label)
        .ok_or_else(|| Error::Index(format!("label {label} with {} classes", probs.len())))?;
    Ok(-(p.as_f64().max(PROB_FLOOR)).ln())
}
