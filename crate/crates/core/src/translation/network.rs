//! Layer graph with explicit forward/backward passes.
//!
//! Forward passes return a [`Tape`] instead of caching inside the network, so
//! one network can be applied several times per step (the generators are used
//! for translation, reconstruction and identity) and inference stays
//! reentrant.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::translation::tensor::{matmul, Mat, Scalar, Tensor};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Reflect,
}

/// A learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    padding: Padding,
}

#[derive(Debug, Clone)]
enum Op {
    Conv {
        geom: ConvGeom,
        weight: usize,
        bias: usize,
    },
    /// Transposed convolution; weight layout `in_ch x out_ch x k x k`.
    ConvTranspose {
        geom: ConvGeom,
        output_pad: usize,
        weight: usize,
        bias: usize,
    },
    InstanceNorm,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Residual(Vec<Op>),
}

enum Cache<T> {
    Input(Tensor<T>),
    Norm { xhat: Tensor<T>, inv_std: Vec<T> },
    Output(Tensor<T>),
    Residual(Vec<Cache<T>>),
}

/// Intermediate values of one forward pass, consumed by [`Network::backward`].
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

/// Parameter gradients, aligned with [`Network::params`].
pub type Grads<T> = Vec<Vec<T>>;

/// Feed-forward network of convolutions, normalizations and activations.
#[derive(Debug, Clone)]
pub struct Network<T> {
    name: String,
    ops: Vec<Op>,
    params: Vec<Param<T>>,
}

/// Builds a [`Network`] layer by layer. Residual blocks are opened with
/// [`NetworkBuilder::begin_residual`] and closed with
/// [`NetworkBuilder::end_residual`].
pub struct NetworkBuilder<T> {
    name: String,
    stack: Vec<Vec<Op>>,
    params: Vec<Param<T>>,
    path: Vec<usize>,
}

impl<T: Scalar> NetworkBuilder<T> {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            stack: vec![Vec::new()],
            params: Vec::new(),
            path: Vec::new(),
        }
    }

    fn push(&mut self, op: Op) {
        self.stack.last_mut().expect("open scope").push(op);
    }

    fn next_name(&self) -> String {
        let mut parts: Vec<String> = vec![self.name.clone()];
        parts.extend(self.path.iter().map(|p| p.to_string()));
        parts.push(self.stack.last().map_or(0, |s| s.len()).to_string());
        parts.join(".")
    }

    fn add_param(&mut self, name: String, shape: Vec<usize>) -> usize {
        let len = shape.iter().product();
        self.params.push(Param {
            name,
            shape,
            data: vec![T::zero(); len],
        });
        self.params.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        mut self,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        padding: Padding,
    ) -> Self {
        let base = self.next_name();
        let weight = self.add_param(format!("{base}.weight"), vec![out_ch, in_ch, kernel, kernel]);
        let bias = self.add_param(format!("{base}.bias"), vec![out_ch]);
        self.push(Op::Conv {
            geom: ConvGeom {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
                padding,
            },
            weight,
            bias,
        });
        self
    }

    pub fn conv_transpose(
        mut self,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Self {
        let base = self.next_name();
        let weight = self.add_param(format!("{base}.weight"), vec![in_ch, out_ch, kernel, kernel]);
        let bias = self.add_param(format!("{base}.bias"), vec![out_ch]);
        self.push(Op::ConvTranspose {
            geom: ConvGeom {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
                padding: Padding::Zero,
            },
            output_pad,
            weight,
            bias,
        });
        self
    }

    pub fn instance_norm(mut self) -> Self {
        self.push(Op::InstanceNorm);
        self
    }

    pub fn relu(mut self) -> Self {
        self.push(Op::Relu);
        self
    }

    pub fn leaky_relu(mut self, slope: f64) -> Self {
        self.push(Op::LeakyRelu(slope));
        self
    }

    pub fn tanh(mut self) -> Self {
        self.push(Op::Tanh);
        self
    }

    pub fn begin_residual(mut self) -> Self {
        let idx = self.stack.last().map_or(0, |s| s.len());
        self.path.push(idx);
        self.stack.push(Vec::new());
        self
    }

    pub fn end_residual(mut self) -> Self {
        let inner = self.stack.pop().expect("residual scope open");
        assert!(!self.stack.is_empty(), "end_residual without begin_residual");
        self.path.pop();
        self.push(Op::Residual(inner));
        self
    }

    pub fn build(mut self) -> Network<T> {
        assert_eq!(self.stack.len(), 1, "unclosed residual block");
        Network {
            name: self.name,
            ops: self.stack.pop().unwrap_or_default(),
            params: self.params,
        }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i.clamp(0, n - 1) as usize
}

/// Source pixel for a (possibly padded) coordinate, `None` for zero padding.
fn source_index(i: isize, n: usize, padding: Padding) -> Option<usize> {
    if i >= 0 && (i as usize) < n {
        return Some(i as usize);
    }
    match padding {
        Padding::Zero => None,
        Padding::Reflect => Some(reflect(i, n)),
    }
}

fn conv_out(len: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - kernel) / stride + 1
}

/// Source coordinate for every (kernel offset, output position) along one
/// axis; `usize::MAX` marks zero padding.
fn axis_map(len: usize, out: usize, geom: &ConvGeom) -> Vec<usize> {
    let k = geom.kernel;
    let mut map = vec![usize::MAX; k * out];
    for ki in 0..k {
        for o in 0..out {
            let i = (o * geom.stride + ki) as isize - geom.pad as isize;
            if let Some(src) = source_index(i, len, geom.padding) {
                map[ki * out + o] = src;
            }
        }
    }
    map
}

/// `cols[(c*k + ki)*k + kj][oh*ow_n + ow] = x[c][oh*s + ki - p][ow*s + kj - p]`.
fn im2col<T: Scalar>(
    x: &[T],
    ch: usize,
    h: usize,
    w: usize,
    geom: &ConvGeom,
    oh_n: usize,
    ow_n: usize,
) -> Vec<T> {
    let k = geom.kernel;
    let rows = axis_map(h, oh_n, geom);
    let cols_map = axis_map(w, ow_n, geom);
    let mut cols = vec![T::zero(); ch * k * k * oh_n * ow_n];
    for c in 0..ch {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh_n * ow_n;
                let cmap = &cols_map[kj * ow_n..(kj + 1) * ow_n];
                for oh in 0..oh_n {
                    let sh = rows[ki * oh_n + oh];
                    if sh == usize::MAX {
                        continue;
                    }
                    let src = &plane[sh * w..(sh + 1) * w];
                    let dst = &mut cols[row + oh * ow_n..row + (oh + 1) * ow_n];
                    for (d, &sw) in dst.iter_mut().zip(cmap) {
                        if sw != usize::MAX {
                            *d = src[sw];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters columns back onto a `ch x h x w` buffer.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    cols: &[T],
    ch: usize,
    h: usize,
    w: usize,
    geom: &ConvGeom,
    oh_n: usize,
    ow_n: usize,
    out: &mut [T],
) {
    let k = geom.kernel;
    let rows = axis_map(h, oh_n, geom);
    let cols_map = axis_map(w, ow_n, geom);
    for c in 0..ch {
        let plane = &mut out[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh_n * ow_n;
                let cmap = &cols_map[kj * ow_n..(kj + 1) * ow_n];
                for oh in 0..oh_n {
                    let sh = rows[ki * oh_n + oh];
                    if sh == usize::MAX {
                        continue;
                    }
                    let src = &cols[row + oh * ow_n..row + (oh + 1) * ow_n];
                    let dst = &mut plane[sh * w..(sh + 1) * w];
                    for (&v, &sw) in src.iter().zip(cmap) {
                        if sw != usize::MAX {
                            dst[sw] = dst[sw] + v;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Network<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Zero-filled gradient buffers matching the parameters.
    pub fn zero_grads(&self) -> Grads<T> {
        self.params
            .iter()
            .map(|p| vec![T::zero(); p.data.len()])
            .collect()
    }

    /// Weights from `N(0, std)`, biases zero.
    pub fn init_normal<R: Rng>(&mut self, std: f64, rng: &mut R) {
        let dist = Normal::new(0.0, std).expect("valid std");
        for p in &mut self.params {
            if p.name.ends_with(".bias") {
                p.data.iter_mut().for_each(|v| *v = T::zero());
            } else {
                p.data
                    .iter_mut()
                    .for_each(|v| *v = T::lit(dist.sample(rng)));
            }
        }
    }

    /// Same architecture and parameter values in another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            name: self.name.clone(),
            ops: self.ops.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p
                        .data
                        .iter()
                        .map(|v| U::lit(v.to_f64().unwrap_or(f64::NAN)))
                        .collect(),
                })
                .collect(),
        }
    }

    /// Forward pass recording everything the backward pass needs.
    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, Tape<T>) {
        let mut caches = Vec::with_capacity(self.ops.len());
        let y = self.run(&self.ops, x.clone(), Some(&mut caches));
        (y, Tape { caches })
    }

    /// Forward pass without recording.
    pub fn predict(&self, x: &Tensor<T>) -> Tensor<T> {
        self.run(&self.ops, x.clone(), None)
    }

    fn run(&self, ops: &[Op], mut x: Tensor<T>, mut tape: Option<&mut Vec<Cache<T>>>) -> Tensor<T> {
        for op in ops {
            let (y, cache) = self.apply(op, x, tape.is_some());
            if let (Some(t), Some(c)) = (tape.as_deref_mut(), cache) {
                t.push(c);
            }
            x = y;
        }
        x
    }

    fn apply(&self, op: &Op, x: Tensor<T>, record: bool) -> (Tensor<T>, Option<Cache<T>>) {
        match op {
            Op::Conv { geom, weight, bias } => {
                let y = self.conv_forward(geom, *weight, *bias, &x);
                (y, record.then_some(Cache::Input(x)))
            }
            Op::ConvTranspose {
                geom,
                output_pad,
                weight,
                bias,
            } => {
                let y = self.conv_t_forward(geom, *output_pad, *weight, *bias, &x);
                (y, record.then_some(Cache::Input(x)))
            }
            Op::InstanceNorm => {
                let (y, inv_std) = instance_norm(&x);
                let cache = record.then(|| Cache::Norm {
                    xhat: y.clone(),
                    inv_std,
                });
                (y, cache)
            }
            Op::Relu => {
                let y = x.map(|v| if v < T::zero() { T::zero() } else { v });
                let cache = record.then(|| Cache::Output(y.clone()));
                (y, cache)
            }
            Op::LeakyRelu(slope) => {
                let s = T::lit(*slope);
                let y = x.map(|v| if v > T::zero() { v } else { v * s });
                (y, record.then_some(Cache::Input(x)))
            }
            Op::Tanh => {
                let y = x.map(|v| v.tanh());
                let cache = record.then(|| Cache::Output(y.clone()));
                (y, cache)
            }
            Op::Residual(inner) => {
                if record {
                    let mut caches = Vec::with_capacity(inner.len());
                    let mut y = self.run(inner, x.clone(), Some(&mut caches));
                    y.add_assign(&x);
                    (y, Some(Cache::Residual(caches)))
                } else {
                    let mut y = self.run(inner, x.clone(), None);
                    y.add_assign(&x);
                    (y, None)
                }
            }
        }
    }

    /// Propagates `grad` (w.r.t. the output) back to the input. Parameter
    /// gradients are accumulated into `grads` when given.
    pub fn backward(&self, tape: &Tape<T>, grad: Tensor<T>, grads: Option<&mut Grads<T>>) -> Tensor<T> {
        self.back_ops(&self.ops, &tape.caches, grad, grads)
    }

    fn back_ops(
        &self,
        ops: &[Op],
        caches: &[Cache<T>],
        mut grad: Tensor<T>,
        mut grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        for (op, cache) in ops.iter().zip(caches).rev() {
            grad = self.back_op(op, cache, grad, grads.as_deref_mut());
        }
        grad
    }

    fn back_op(
        &self,
        op: &Op,
        cache: &Cache<T>,
        grad: Tensor<T>,
        grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        match (op, cache) {
            (Op::Conv { geom, weight, bias }, Cache::Input(x)) => {
                self.conv_backward(geom, *weight, *bias, x, &grad, grads)
            }
            (
                Op::ConvTranspose {
                    geom, weight, bias, ..
                },
                Cache::Input(x),
            ) => self.conv_t_backward(geom, *weight, *bias, x, &grad, grads),
            (Op::InstanceNorm, Cache::Norm { xhat, inv_std }) => {
                instance_norm_backward(xhat, inv_std, &grad)
            }
            (Op::Relu, Cache::Output(y)) => {
                let mut g = grad;
                for (gv, &yv) in g.data.iter_mut().zip(&y.data) {
                    if yv <= T::zero() {
                        *gv = T::zero();
                    }
                }
                g
            }
            (Op::LeakyRelu(slope), Cache::Input(x)) => {
                let s = T::lit(*slope);
                let mut g = grad;
                for (gv, &xv) in g.data.iter_mut().zip(&x.data) {
                    if xv <= T::zero() {
                        *gv = *gv * s;
                    }
                }
                g
            }
            (Op::Tanh, Cache::Output(y)) => {
                let mut g = grad;
                for (gv, &yv) in g.data.iter_mut().zip(&y.data) {
                    *gv = *gv * (T::one() - yv * yv);
                }
                g
            }
            (Op::Residual(inner), Cache::Residual(caches)) => {
                let mut g = self.back_ops(inner, caches, grad.clone(), grads);
                g.add_assign(&grad);
                g
            }
            _ => unreachable!("tape does not match network"),
        }
    }

    fn conv_forward(&self, geom: &ConvGeom, weight: usize, bias: usize, x: &Tensor<T>) -> Tensor<T> {
        debug_assert_eq!(x.channels, geom.in_ch);
        let oh = conv_out(x.height, geom.kernel, geom.stride, geom.pad);
        let ow = conv_out(x.width, geom.kernel, geom.stride, geom.pad);
        let cols = im2col(&x.data, x.channels, x.height, x.width, geom, oh, ow);
        let kk = geom.in_ch * geom.kernel * geom.kernel;
        let b = &self.params[bias].data;
        let mut out = Vec::with_capacity(geom.out_ch * oh * ow);
        for &bv in b {
            out.extend(std::iter::repeat(bv).take(oh * ow));
        }
        matmul(
            Mat::new(&self.params[weight].data, geom.out_ch, kk),
            Mat::new(&cols, kk, oh * ow),
            T::one(),
            &mut out,
        );
        Tensor::from_vec(geom.out_ch, oh, ow, out)
    }

    fn conv_backward(
        &self,
        geom: &ConvGeom,
        weight: usize,
        bias: usize,
        x: &Tensor<T>,
        grad: &Tensor<T>,
        grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        let (oh, ow) = (grad.height, grad.width);
        let kk = geom.in_ch * geom.kernel * geom.kernel;
        let cols = im2col(&x.data, x.channels, x.height, x.width, geom, oh, ow);
        if let Some(g) = grads {
            matmul(
                Mat::new(&grad.data, geom.out_ch, oh * ow),
                Mat::new(&cols, kk, oh * ow).t(),
                T::one(),
                &mut g[weight],
            );
            for (co, gb) in g[bias].iter_mut().enumerate() {
                let s: T = grad.data[co * oh * ow..(co + 1) * oh * ow].iter().copied().sum();
                *gb = *gb + s;
            }
        }
        let mut dcols = vec![T::zero(); kk * oh * ow];
        matmul(
            Mat::new(&self.params[weight].data, geom.out_ch, kk).t(),
            Mat::new(&grad.data, geom.out_ch, oh * ow),
            T::zero(),
            &mut dcols,
        );
        let mut dx = Tensor::zeros(x.channels, x.height, x.width);
        col2im(&dcols, x.channels, x.height, x.width, geom, oh, ow, &mut dx.data);
        dx
    }

    fn conv_t_forward(
        &self,
        geom: &ConvGeom,
        output_pad: usize,
        weight: usize,
        bias: usize,
        x: &Tensor<T>,
    ) -> Tensor<T> {
        let (h, w) = (x.height, x.width);
        let oh = (h - 1) * geom.stride + geom.kernel + output_pad - 2 * geom.pad;
        let ow = (w - 1) * geom.stride + geom.kernel + output_pad - 2 * geom.pad;
        let kk = geom.out_ch * geom.kernel * geom.kernel;
        let mut cols = vec![T::zero(); kk * h * w];
        matmul(
            Mat::new(&self.params[weight].data, geom.in_ch, kk).t(),
            Mat::new(&x.data, geom.in_ch, h * w),
            T::zero(),
            &mut cols,
        );
        let mut out = Tensor::zeros(geom.out_ch, oh, ow);
        col2im(&cols, geom.out_ch, oh, ow, geom, h, w, &mut out.data);
        for (co, &bv) in self.params[bias].data.iter().enumerate() {
            for v in &mut out.data[co * oh * ow..(co + 1) * oh * ow] {
                *v = *v + bv;
            }
        }
        out
    }

    fn conv_t_backward(
        &self,
        geom: &ConvGeom,
        weight: usize,
        bias: usize,
        x: &Tensor<T>,
        grad: &Tensor<T>,
        grads: Option<&mut Grads<T>>,
    ) -> Tensor<T> {
        let (h, w) = (x.height, x.width);
        let kk = geom.out_ch * geom.kernel * geom.kernel;
        let cols = im2col(&grad.data, geom.out_ch, grad.height, grad.width, geom, h, w);
        if let Some(g) = grads {
            matmul(
                Mat::new(&x.data, geom.in_ch, h * w),
                Mat::new(&cols, kk, h * w).t(),
                T::one(),
                &mut g[weight],
            );
            let plane = grad.plane();
            for (co, gb) in g[bias].iter_mut().enumerate() {
                let s: T = grad.data[co * plane..(co + 1) * plane].iter().copied().sum();
                *gb = *gb + s;
            }
        }
        let mut dx = vec![T::zero(); geom.in_ch * h * w];
        matmul(
            Mat::new(&self.params[weight].data, geom.in_ch, kk),
            Mat::new(&cols, kk, h * w),
            T::zero(),
            &mut dx,
        );
        Tensor::from_vec(geom.in_ch, h, w, dx)
    }
}

fn instance_norm<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
    let plane = x.plane();
    let n = T::lit(plane as f64);
    let eps = T::lit(NORM_EPS);
    let mut y = x.clone();
    let mut inv_stds = Vec::with_capacity(x.channels);
    for chunk in y.data.chunks_exact_mut(plane) {
        let mean = chunk.iter().copied().sum::<T>() / n;
        let var = chunk.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv_std = T::one() / (var + eps).sqrt();
        for v in chunk.iter_mut() {
            *v = (*v - mean) * inv_std;
        }
        inv_stds.push(inv_std);
    }
    (y, inv_stds)
}

fn instance_norm_backward<T: Scalar>(xhat: &Tensor<T>, inv_std: &[T], grad: &Tensor<T>) -> Tensor<T> {
    let plane = xhat.plane();
    let n = T::lit(plane as f64);
    let mut dx = grad.clone();
    for (c, chunk) in dx.data.chunks_exact_mut(plane).enumerate() {
        let xh = &xhat.data[c * plane..(c + 1) * plane];
        let sum_g: T = chunk.iter().copied().sum();
        let sum_gx: T = chunk.iter().zip(xh).map(|(&g, &x)| g * x).sum();
        for (g, &x) in chunk.iter_mut().zip(xh) {
            *g = inv_std[c] / n * (n * *g - sum_g - x * sum_gx);
        }
    }
    dx
}

/// ResNet-style generator: 7x7 stem, two stride-2 downsamplings, residual
/// blocks, two transposed-conv upsamplings and a tanh head.
pub fn resnet_generator<T: Scalar>(name: &str, filters: usize, blocks: usize) -> Network<T> {
    let f = filters;
    let mut b = NetworkBuilder::new(name)
        .conv(3, f, 7, 1, 3, Padding::Reflect)
        .instance_norm()
        .relu()
        .conv(f, 2 * f, 3, 2, 1, Padding::Zero)
        .instance_norm()
        .relu()
        .conv(2 * f, 4 * f, 3, 2, 1, Padding::Zero)
        .instance_norm()
        .relu();
    for _ in 0..blocks {
        b = b
            .begin_residual()
            .conv(4 * f, 4 * f, 3, 1, 1, Padding::Reflect)
            .instance_norm()
            .relu()
            .conv(4 * f, 4 * f, 3, 1, 1, Padding::Reflect)
            .instance_norm()
            .end_residual();
    }
    b.conv_transpose(4 * f, 2 * f, 3, 2, 1, 1)
        .instance_norm()
        .relu()
        .conv_transpose(2 * f, f, 3, 2, 1, 1)
        .instance_norm()
        .relu()
        .conv(f, 3, 7, 1, 3, Padding::Reflect)
        .tanh()
        .build()
}

/// Spatial downsampling factor of [`resnet_generator`].
pub const GENERATOR_STRIDE: usize = 4;

/// PatchGAN discriminator; with 3 layers its receptive field is 70x70.
pub fn patch_discriminator<T: Scalar>(name: &str, filters: usize, layers: usize) -> Network<T> {
    let mut b = NetworkBuilder::new(name)
        .conv(3, filters, 4, 2, 1, Padding::Zero)
        .leaky_relu(0.2);
    let mut ch = filters;
    for i in 1..layers {
        let next = filters * (1 << i.min(3));
        b = b
            .conv(ch, next, 4, 2, 1, Padding::Zero)
            .instance_norm()
            .leaky_relu(0.2);
        ch = next;
    }
    let next = filters * (1 << layers.min(3));
    b.conv(ch, next, 4, 1, 1, Padding::Zero)
        .instance_norm()
        .leaky_relu(0.2)
        .conv(next, 1, 4, 1, 1, Padding::Zero)
        .build()
}
