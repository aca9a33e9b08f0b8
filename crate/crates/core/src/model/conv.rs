//! 3×3 same-padded convolution with ReLU, and 2×2 max pooling, on
//! channel-first single images. Convolution runs as im2col followed by a
//! single GEMM; all reductions happen in a fixed order, so results are
//! bit-reproducible.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Convolution + ReLU, weights laid out `(out, in, 3, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub name: String,
    pub weight: Array4<f32>,
    pub bias: Array1<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub weight: Array4<f32>,
    pub bias: Array1<f32>,
}

impl Conv2d {
    pub fn zeros(name: impl Into<String>, in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            name: name.into(),
            weight: Array4::zeros((out_channels, in_channels, KERNEL, KERNEL)),
            bias: Array1::zeros(out_channels),
        }
    }

    /// He-normal weights, zero bias. Only used when no pretrained weights
    /// are supplied (tests, smoke runs).
    pub fn he_normal(name: impl Into<String>, in_channels: usize, out_channels: usize, seed: u64) -> Self {
        let mut conv = Self::zeros(name, in_channels, out_channels);
        let std = (2.0 / (in_channels * TAPS) as f32).sqrt();
        let normal = Normal::new(0.0f32, std).expect("positive std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        conv.weight.mapv_inplace(|_| normal.sample(&mut rng));
        conv
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn weight_matrix(&self) -> ArrayView2<'_, f32> {
        let (o, i, _, _) = self.weight.dim();
        self.weight
            .view()
            .into_shape_with_order((o, i * TAPS))
            .expect("weights are contiguous")
    }

    /// `(C, H, W)` -> `(O, H, W)`, ReLU applied.
    pub fn forward(&self, x: ArrayView3<'_, f32>) -> Array3<f32> {
        let (_, h, w) = x.dim();
        let cols = im2col(x);
        let mut out = Array2::<f32>::zeros((self.out_channels(), h * w));
        general_mat_mul(1.0, &self.weight_matrix(), &cols, 0.0, &mut out);
        for (mut row, &b) in out.axis_iter_mut(Axis(0)).zip(self.bias.iter()) {
            row.mapv_inplace(|v| (v + b).max(0.0));
        }
        out.into_shape_with_order((self.out_channels(), h, w))
            .expect("contiguous")
    }

    /// Backpropagates through ReLU and the convolution for one image.
    ///
    /// `output` is this layer's forward result; `grad_out` the loss gradient
    /// with respect to it. Parameter gradients are accumulated into `acc`
    /// when given, and the input gradient is returned when requested.
    pub fn backward(
        &self,
        input: ArrayView3<'_, f32>,
        output: ArrayView3<'_, f32>,
        grad_out: ArrayView3<'_, f32>,
        acc: Option<&mut ConvGrad>,
        want_input_grad: bool,
    ) -> Option<Array3<f32>> {
        let (c, h, w) = input.dim();
        let o = self.out_channels();
        let mut dy = Array2::<f32>::zeros((o, h * w));
        for ((d, &g), &y) in dy.iter_mut().zip(grad_out.iter()).zip(output.iter()) {
            *d = if y > 0.0 { g } else { 0.0 };
        }
        if let Some(acc) = acc {
            let cols = im2col(input);
            let mut dw = acc
                .weight
                .view_mut()
                .into_shape_with_order((o, c * TAPS))
                .expect("contiguous");
            general_mat_mul(1.0, &dy, &cols.t(), 1.0, &mut dw);
            for (b, row) in acc.bias.iter_mut().zip(dy.axis_iter(Axis(0))) {
                *b += row.sum();
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut dcols = Array2::<f32>::zeros((c * TAPS, h * w));
        general_mat_mul(1.0, &self.weight_matrix().t(), &dy, 0.0, &mut dcols);
        Some(col2im(dcols.view(), c, h, w))
    }

    pub fn zero_grad(&self) -> ConvGrad {
        ConvGrad {
            weight: Array4::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

/// `(C, H, W)` -> `(C*9, H*W)` patch matrix with zero padding of one.
pub fn im2col(x: ArrayView3<'_, f32>) -> Array2<f32> {
    let (c, h, w) = x.dim();
    let x = x.as_standard_layout();
    let src = x.as_slice().expect("standard layout");
    let mut cols = vec![0.0f32; c * TAPS * h * w];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * TAPS + ky * KERNEL + kx) * h * w;
                let dst = &mut cols[row..row + h * w];
                copy_shifted(plane, dst, h, w, ky as isize - 1, kx as isize - 1);
            }
        }
    }
    Array2::from_shape_vec((c * TAPS, h * w), cols).expect("sized above")
}

/// dst[y, x] = src[y + dy, x + dx], zero outside.
fn copy_shifted(src: &[f32], dst: &mut [f32], h: usize, w: usize, dy: isize, dx: isize) {
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    for y in 0..h {
        let sy = y as isize + dy;
        if sy < 0 || sy >= h as isize || x0 >= x1 {
            continue;
        }
        let s = sy as usize * w;
        let d = y * w;
        let sx0 = (x0 as isize + dx) as usize;
        dst[d + x0..d + x1].copy_from_slice(&src[s + sx0..s + sx0 + (x1 - x0)]);
    }
}

/// Adjoint of [`im2col`].
pub fn col2im(cols: ArrayView2<'_, f32>, c: usize, h: usize, w: usize) -> Array3<f32> {
    let cols = cols.as_standard_layout();
    let src = cols.as_slice().expect("standard layout");
    let mut out = vec![0.0f32; c * h * w];
    for ch in 0..c {
        let plane = &mut out[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * TAPS + ky * KERNEL + kx) * h * w;
                let patch = &src[row..row + h * w];
                let (dy, dx) = (ky as isize - 1, kx as isize - 1);
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        continue;
                    }
                    let s = sy as usize * w;
                    for x in x0..x1 {
                        plane[s + (x as isize + dx) as usize] += patch[y * w + x];
                    }
                }
            }
        }
    }
    Array3::from_shape_vec((c, h, w), out).expect("sized above")
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn max_pool(x: ArrayView3<'_, f32>) -> Array3<f32> {
    let (c, h, w) = x.dim();
    let (oh, ow) = (h / 2, w / 2);
    Array3::from_shape_fn((c, oh, ow), |(ch, i, j)| {
        let (y, x0) = (2 * i, 2 * j);
        x[[ch, y, x0]]
            .max(x[[ch, y, x0 + 1]])
            .max(x[[ch, y + 1, x0]])
            .max(x[[ch, y + 1, x0 + 1]])
    })
}

/// Routes each output gradient to the first maximal input of its window.
pub fn max_pool_backward(input: ArrayView3<'_, f32>, grad_out: ArrayView3<'_, f32>) -> Array3<f32> {
    let (c, oh, ow) = grad_out.dim();
    let mut dx = Array3::<f32>::zeros(input.raw_dim());
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = (2 * i, 2 * j);
                for (y, x) in [(2 * i, 2 * j + 1), (2 * i + 1, 2 * j), (2 * i + 1, 2 * j + 1)] {
                    if input[[ch, y, x]] > input[[ch, best.0, best.1]] {
                        best = (y, x);
                    }
                }
                dx[[ch, best.0, best.1]] += grad_out[[ch, i, j]];
            }
        }
    }
    dx
}
