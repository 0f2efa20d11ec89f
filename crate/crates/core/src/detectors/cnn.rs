//! Shallow CNN: two convolution/max-pool stages, a hidden dense layer and
//! a single logit. The 1D variant is the same network with height-1
//! kernels and pools.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTensor};

/// Numeric element of a network. `f32` for training, `f64` for gradient
/// checking.
pub trait Scalar: Float + Send + Sync + std::iter::Sum + std::fmt::Debug + 'static {}
impl<T: Float + Send + Sync + std::iter::Sum + std::fmt::Debug + 'static> Scalar for T {}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] = acc[j] + x[j] * y[j];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * *xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape3 {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Valid (no padding), stride-1 convolution followed by ReLU.
/// Parameters: weights `[out][in][kh][kw]`, then biases `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub input: Shape3,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub params: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    pub fn output(&self) -> Shape3 {
        Shape3 {
            c: self.out_channels,
            h: self.input.h + 1 - self.kh,
            w: self.input.w + 1 - self.kw,
        }
    }

    fn weight_count(&self) -> usize {
        self.out_channels * self.input.c * self.kh * self.kw
    }

    fn forward(&self, x: &[T]) -> Vec<T> {
        let (ins, outs) = (self.input, self.output());
        let (w, b) = self.params.split_at(self.weight_count());
        let mut out = vec![T::zero(); outs.len()];
        for o in 0..outs.c {
            let plane = &mut out[o * outs.h * outs.w..(o + 1) * outs.h * outs.w];
            plane.iter_mut().for_each(|v| *v = b[o]);
            for c in 0..ins.c {
                let src = &x[c * ins.h * ins.w..(c + 1) * ins.h * ins.w];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let wv = w[((o * ins.c + c) * self.kh + ky) * self.kw + kx];
                        for y in 0..outs.h {
                            let row = &src[(y + ky) * ins.w + kx..(y + ky) * ins.w + kx + outs.w];
                            axpy(&mut plane[y * outs.w..(y + 1) * outs.w], wv, row);
                        }
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v = v.max(T::zero()));
        out
    }

    /// `out` is the post-ReLU output; `grad` holds dL/d(out) on entry and
    /// is masked in place.
    fn backward(&self, x: &[T], out: &[T], grad: &mut [T], dparams: &mut [T], want_dx: bool) -> Option<Vec<T>> {
        let (ins, outs) = (self.input, self.output());
        for (g, o) in grad.iter_mut().zip(out) {
            if *o <= T::zero() {
                *g = T::zero();
            }
        }
        let wc = self.weight_count();
        let w = &self.params[..wc];
        let (dw, db) = dparams.split_at_mut(wc);
        let mut dx = want_dx.then(|| vec![T::zero(); ins.len()]);
        let plane_len = outs.h * outs.w;
        for o in 0..outs.c {
            let gplane = &grad[o * plane_len..(o + 1) * plane_len];
            db[o] = db[o] + gplane.iter().copied().sum::<T>();
            for c in 0..ins.c {
                let src = &x[c * ins.h * ins.w..(c + 1) * ins.h * ins.w];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let wi = ((o * ins.c + c) * self.kh + ky) * self.kw + kx;
                        let mut acc = T::zero();
                        for y in 0..outs.h {
                            let start = (y + ky) * ins.w + kx;
                            acc = acc + dot(&gplane[y * outs.w..(y + 1) * outs.w], &src[start..start + outs.w]);
                        }
                        dw[wi] = dw[wi] + acc;
                        if let Some(dx) = dx.as_mut() {
                            let dplane = &mut dx[c * ins.h * ins.w..(c + 1) * ins.h * ins.w];
                            for y in 0..outs.h {
                                let start = (y + ky) * ins.w + kx;
                                axpy(&mut dplane[start..start + outs.w], w[wi], &gplane[y * outs.w..(y + 1) * outs.w]);
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool {
    pub input: Shape3,
    pub ph: usize,
    pub pw: usize,
}

impl MaxPool {
    pub fn output(&self) -> Shape3 {
        Shape3 {
            c: self.input.c,
            h: self.input.h / self.ph,
            w: self.input.w / self.pw,
        }
    }

    fn forward<T: Scalar>(&self, x: &[T]) -> (Vec<T>, Vec<u32>) {
        let (ins, outs) = (self.input, self.output());
        let mut out = Vec::with_capacity(outs.len());
        let mut arg = Vec::with_capacity(outs.len());
        for c in 0..outs.c {
            for y in 0..outs.h {
                for xo in 0..outs.w {
                    let mut best = c * ins.h * ins.w + (y * self.ph) * ins.w + xo * self.pw;
                    for dy in 0..self.ph {
                        for dx in 0..self.pw {
                            let i = c * ins.h * ins.w + (y * self.ph + dy) * ins.w + xo * self.pw + dx;
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                    }
                    out.push(x[best]);
                    arg.push(best as u32);
                }
            }
        }
        (out, arg)
    }

    fn backward<T: Scalar>(&self, arg: &[u32], grad: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.input.len()];
        for (i, g) in arg.iter().zip(grad) {
            dx[*i as usize] = dx[*i as usize] + *g;
        }
        dx
    }
}

/// Fully connected layer. Parameters: weights `[out][in]`, then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub relu: bool,
    pub params: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn forward(&self, x: &[T]) -> Vec<T> {
        let (w, b) = self.params.split_at(self.inputs * self.outputs);
        (0..self.outputs)
            .map(|o| {
                let z = b[o] + dot(&w[o * self.inputs..(o + 1) * self.inputs], x);
                if self.relu {
                    z.max(T::zero())
                } else {
                    z
                }
            })
            .collect()
    }

    fn backward(&self, x: &[T], out: &[T], grad: &mut [T], dparams: &mut [T], want_dx: bool) -> Option<Vec<T>> {
        if self.relu {
            for (g, o) in grad.iter_mut().zip(out) {
                if *o <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        let wc = self.inputs * self.outputs;
        let w = &self.params[..wc];
        let (dw, db) = dparams.split_at_mut(wc);
        let mut dx = want_dx.then(|| vec![T::zero(); self.inputs]);
        for o in 0..self.outputs {
            let g = grad[o];
            if g == T::zero() {
                continue;
            }
            db[o] = db[o] + g;
            axpy(&mut dw[o * self.inputs..(o + 1) * self.inputs], g, x);
            if let Some(dx) = dx.as_mut() {
                axpy(dx, g, &w[o * self.inputs..(o + 1) * self.inputs]);
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv<T>),
    Pool(MaxPool),
    Dense(Dense<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn params(&self) -> &[T] {
        match self {
            Layer::Conv(l) => &l.params,
            Layer::Dense(l) => &l.params,
            Layer::Pool(_) => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        match self {
            Layer::Conv(l) => &mut l.params,
            Layer::Dense(l) => &mut l.params,
            Layer::Pool(_) => &mut [],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Pool(_) => "maxpool",
            Layer::Dense(_) => "dense",
        }
    }

    fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Layer<U> {
        match self {
            Layer::Conv(l) => Layer::Conv(Conv {
                input: l.input,
                out_channels: l.out_channels,
                kh: l.kh,
                kw: l.kw,
                params: l.params.iter().map(|v| f(*v)).collect(),
            }),
            Layer::Pool(p) => Layer::Pool(p.clone()),
            Layer::Dense(l) => Layer::Dense(Dense {
                inputs: l.inputs,
                outputs: l.outputs,
                relu: l.relu,
                params: l.params.iter().map(|v| f(*v)).collect(),
            }),
        }
    }
}

/// Sizes of the two-stage architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: FeatureKind,
    pub input_h: usize,
    pub input_w: usize,
    pub conv_filters: [usize; 2],
    pub kernel: [usize; 2],
    pub pool: [usize; 2],
    pub hidden: usize,
}

impl Architecture {
    /// 8 and 16 filters of 3x3, 2x2 pooling, 32 hidden units.
    pub fn ddp(input_h: usize, input_w: usize) -> Self {
        Self {
            kind: FeatureKind::Ddp,
            input_h,
            input_w,
            conv_filters: [8, 16],
            kernel: [3, 3],
            pool: [2, 2],
            hidden: 32,
        }
    }

    /// Same widths with 1x5 kernels and 1x2 pooling.
    pub fn pdp(len: usize) -> Self {
        Self {
            kind: FeatureKind::Pdp,
            input_h: 1,
            input_w: len,
            conv_filters: [8, 16],
            kernel: [1, 5],
            pool: [1, 2],
            hidden: 32,
        }
    }

    pub fn for_tensor(t: &FeatureTensor) -> Self {
        match t.kind {
            FeatureKind::Ddp => Self::ddp(t.height, t.width),
            FeatureKind::Pdp => Self::pdp(t.width),
        }
    }
}

/// Forward-pass intermediates needed by backprop.
pub struct Trace<T> {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<T>>,
    pool_args: Vec<Vec<u32>>,
}

impl<T: Scalar> Trace<T> {
    pub fn logit(&self) -> T {
        self.acts.last().expect("trace has the input at least")[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub arch: Architecture,
    pub layers: Vec<Layer<T>>,
}

/// `log(1 + e^z) − y·z`, the cross-entropy of `sigmoid(z)` against `y`.
pub fn bce_with_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln()
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights, zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let [f1, f2] = arch.conv_filters;
        let [kh, kw] = arch.kernel;
        let [ph, pw] = arch.pool;
        let input = Shape3 {
            c: 1,
            h: arch.input_h,
            w: arch.input_w,
        };
        let mut layers = Vec::new();
        let mut shape = input;
        for filters in [f1, f2] {
            if shape.h < kh || shape.w < kw {
                return Err(Error::Shape(format!("input {}x{} too small for the kernel", shape.h, shape.w)));
            }
            let conv = Conv {
                input: shape,
                out_channels: filters,
                kh,
                kw,
                params: Vec::new(),
            };
            shape = conv.output();
            layers.push(Layer::Conv(conv));
            let pool = MaxPool { input: shape, ph, pw };
            shape = pool.output();
            if shape.is_empty() {
                return Err(Error::Shape("pooling collapses the feature map".into()));
            }
            layers.push(Layer::Pool(pool));
        }
        layers.push(Layer::Dense(Dense {
            inputs: shape.len(),
            outputs: arch.hidden,
            relu: true,
            params: Vec::new(),
        }));
        layers.push(Layer::Dense(Dense {
            inputs: arch.hidden,
            outputs: 1,
            relu: false,
            params: Vec::new(),
        }));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut layers {
            let (fan_in, weights, biases) = match layer {
                Layer::Conv(c) => (c.input.c * c.kh * c.kw, c.weight_count(), c.out_channels),
                Layer::Dense(d) => (d.inputs, d.inputs * d.outputs, d.outputs),
                Layer::Pool(_) => continue,
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut p: Vec<T> = (0..weights)
                .map(|_| T::from(rng.random_range(-limit..limit)).unwrap())
                .collect();
            p.extend(std::iter::repeat_n(T::zero(), biases));
            match layer {
                Layer::Conv(c) => c.params = p,
                Layer::Dense(d) => d.params = p,
                Layer::Pool(_) => unreachable!(),
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn input_len(&self) -> usize {
        self.arch.input_h * self.arch.input_w
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            layers: self.layers.iter().map(|l| l.map(|v| U::from(v).unwrap())).collect(),
        }
    }

    /// Zeroes the output layer so the logit is 0 for every input.
    pub fn zero_output_layer(&mut self) {
        if let Some(Layer::Dense(d)) = self.layers.last_mut() {
            d.params.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn forward(&self, x: &[T]) -> Trace<T> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_args = Vec::new();
        acts.push(x.to_vec());
        for layer in &self.layers {
            let prev = acts.last().expect("input pushed first");
            let next = match layer {
                Layer::Conv(c) => c.forward(prev),
                Layer::Dense(d) => d.forward(prev),
                Layer::Pool(p) => {
                    let (out, arg) = p.forward(prev);
                    pool_args.push(arg);
                    out
                }
            };
            acts.push(next);
        }
        Trace { acts, pool_args }
    }

    pub fn logit(&self, x: &[T]) -> T {
        self.forward(x).logit()
    }

    /// Adds dL/dθ for one sample into `grads` (one buffer per layer) and
    /// returns the sample loss.
    pub fn accumulate_gradient(&self, x: &[T], label: T, grads: &mut [Vec<T>]) -> T {
        let trace = self.forward(x);
        let z = trace.logit();
        let loss = bce_with_logit(z, label);
        let mut grad = vec![sigmoid(z) - label];
        let mut pool_idx = trace.pool_args.len();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let want_dx = i > 0;
            let (input, output) = (&trace.acts[i], &trace.acts[i + 1]);
            let dx = match layer {
                Layer::Conv(c) => c.backward(input, output, &mut grad, &mut grads[i], want_dx),
                Layer::Dense(d) => d.backward(input, output, &mut grad, &mut grads[i], want_dx),
                Layer::Pool(p) => {
                    pool_idx -= 1;
                    Some(p.backward(&trace.pool_args[pool_idx], &grad))
                }
            };
            match dx {
                Some(dx) => grad = dx,
                None => break,
            }
        }
        loss
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.layers.iter().map(|l| vec![T::zero(); l.params().len()]).collect()
    }
}
