//! Small feed-forward nets: dense, conv2d, relu, maxpool, flatten, softmax.
//!
//! Forward passes keep every intermediate activation so reverse-mode
//! gradients (with respect to the input or to any conv layer's output) come
//! from one backward sweep. Relu uses subgradient 0 at exactly 0; maxpool
//! ties route the gradient to the first row-major argmax.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum Layer {
    /// Fully connected: `weights` is [n_out, n_in].
    Dense { weights: Tensor, bias: Vec<f64> },
    /// 2-D convolution: `kernels` is [out_c, in_c, kh, kw], zero padding.
    Conv2d {
        kernels: Tensor,
        bias: Vec<f64>,
        stride: (usize, usize),
        padding: (usize, usize),
    },
    Relu,
    MaxPool {
        kernel: (usize, usize),
        stride: (usize, usize),
    },
    Flatten,
    Softmax,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv2d { .. } => "conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Flatten => "flatten",
            Layer::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequentialNet {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    /// output_shapes[i] is the shape after layer i.
    output_shapes: Vec<Vec<usize>>,
}

impl SequentialNet {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::schema("input_shape", "dims must be positive"));
        }
        if layers.is_empty() {
            return Err(Error::schema("layers", "need at least one layer"));
        }
        let mut shape = input_shape.clone();
        let mut output_shapes = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let path = |field: &str| format!("layers[{i}].{field}");
            shape = match layer {
                Layer::Dense { weights, bias } => {
                    if shape.len() != 1 {
                        return Err(Error::schema(
                            path("input"),
                            format!("dense needs a 1-d input, got {shape:?}"),
                        ));
                    }
                    if weights.ndim() != 2 || weights.shape()[1] != shape[0] {
                        return Err(Error::schema(
                            path("weights"),
                            format!("expected [*, {}], got {:?}", shape[0], weights.shape()),
                        ));
                    }
                    if bias.len() != weights.shape()[0] {
                        return Err(Error::schema(path("bias"), "bias length != n_out"));
                    }
                    if !weights.all_finite() || !bias.iter().all(|v| v.is_finite()) {
                        return Err(Error::schema(path("weights"), "non-finite parameter"));
                    }
                    vec![weights.shape()[0]]
                }
                Layer::Conv2d {
                    kernels,
                    bias,
                    stride,
                    padding,
                } => {
                    if shape.len() != 3 {
                        return Err(Error::schema(
                            path("input"),
                            format!("conv2d needs a CHW input, got {shape:?}"),
                        ));
                    }
                    if kernels.ndim() != 4 || kernels.shape()[1] != shape[0] {
                        return Err(Error::schema(
                            path("kernels"),
                            format!("expected [*, {}, *, *], got {:?}", shape[0], kernels.shape()),
                        ));
                    }
                    if bias.len() != kernels.shape()[0] {
                        return Err(Error::schema(path("bias"), "bias length != out channels"));
                    }
                    if !kernels.all_finite() || !bias.iter().all(|v| v.is_finite()) {
                        return Err(Error::schema(path("kernels"), "non-finite parameter"));
                    }
                    if stride.0 == 0 || stride.1 == 0 {
                        return Err(Error::schema(path("stride"), "stride must be >= 1"));
                    }
                    let (kh, kw) = (kernels.shape()[2], kernels.shape()[3]);
                    let (h, w) = (shape[1] + 2 * padding.0, shape[2] + 2 * padding.1);
                    if kh == 0 || kw == 0 || kh > h || kw > w {
                        return Err(Error::schema(
                            path("kernels"),
                            "kernel exceeds padded input",
                        ));
                    }
                    vec![
                        kernels.shape()[0],
                        (h - kh) / stride.0 + 1,
                        (w - kw) / stride.1 + 1,
                    ]
                }
                Layer::Relu => shape,
                Layer::MaxPool { kernel, stride } => {
                    if shape.len() != 3 {
                        return Err(Error::schema(
                            path("input"),
                            format!("maxpool needs a CHW input, got {shape:?}"),
                        ));
                    }
                    if stride.0 == 0 || stride.1 == 0 {
                        return Err(Error::schema(path("stride"), "stride must be >= 1"));
                    }
                    if kernel.0 == 0 || kernel.1 == 0 || kernel.0 > shape[1] || kernel.1 > shape[2]
                    {
                        return Err(Error::schema(path("kernel"), "kernel exceeds input"));
                    }
                    vec![
                        shape[0],
                        (shape[1] - kernel.0) / stride.0 + 1,
                        (shape[2] - kernel.1) / stride.1 + 1,
                    ]
                }
                Layer::Flatten => vec![shape.iter().product()],
                Layer::Softmax => {
                    if shape.len() != 1 {
                        return Err(Error::schema(path("input"), "softmax needs a 1-d input"));
                    }
                    if i != layers.len() - 1 {
                        return Err(Error::schema(
                            path("position"),
                            "softmax allowed only as the final layer",
                        ));
                    }
                    shape
                }
            };
            output_shapes.push(shape.clone());
        }
        if shape.len() != 1 {
            return Err(Error::schema(
                "layers",
                format!("final output must be a 1-d score vector, got {shape:?}"),
            ));
        }
        Ok(Self {
            layers,
            input_shape,
            output_shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_classes(&self) -> usize {
        self.output_shapes.last().unwrap()[0]
    }

    pub fn has_softmax(&self) -> bool {
        matches!(self.layers.last(), Some(Layer::Softmax))
    }

    pub fn strip_softmax(&mut self) {
        if self.has_softmax() {
            self.layers.pop();
            self.output_shapes.pop();
        }
    }

    pub fn output_shape(&self, layer_idx: usize) -> &[usize] {
        &self.output_shapes[layer_idx]
    }

    pub fn is_conv_layer(&self, layer_idx: usize) -> bool {
        matches!(self.layers.get(layer_idx), Some(Layer::Conv2d { .. }))
    }

    /// Index of the last conv2d layer, if any (Grad-CAM's default target).
    pub fn last_conv_layer(&self) -> Option<usize> {
        (0..self.layers.len()).rev().find(|&i| self.is_conv_layer(i))
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.clone(),
                got: x.shape().to_vec(),
            });
        }
        if !x.all_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Full forward pass. `result[0]` is the input; `result[i + 1]` is the
    /// output of layer `i`.
    pub fn activations(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.clone());
        for layer in &self.layers {
            let next = forward_layer(layer, trace.last().unwrap());
            trace.push(next);
        }
        Ok(trace)
    }

    pub fn scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().unwrap().into_data())
    }

    /// Gradient of scores[class] with respect to the input.
    pub fn input_gradient(&self, x: &Tensor, class: usize) -> Result<Tensor> {
        let trace = self.activations(x)?;
        self.backward_to(&trace, class, 0)
    }

    /// Gradient of scores[class] with respect to the output of `layer_idx`.
    pub fn gradient_at_layer(&self, x: &Tensor, layer_idx: usize, class: usize) -> Result<Tensor> {
        let trace = self.activations(x)?;
        self.backward_to(&trace, class, layer_idx + 1)
    }

    /// Backpropagate a one-hot seed from the output down to `trace[stop]`.
    fn backward_to(&self, trace: &[Tensor], class: usize, stop: usize) -> Result<Tensor> {
        let out = trace.last().unwrap();
        if class >= out.len() {
            return Err(Error::ClassOutOfRange {
                class,
                n_classes: out.len(),
            });
        }
        let mut grad = Tensor::zeros(out.shape().to_vec());
        grad.data_mut()[class] = 1.0;
        for li in (stop..self.layers.len()).rev() {
            grad = backward_layer(&self.layers[li], &trace[li], &trace[li + 1], &grad);
        }
        Ok(grad)
    }
}

fn forward_layer(layer: &Layer, x: &Tensor) -> Tensor {
    match layer {
        Layer::Dense { weights, bias } => {
            let n_out = weights.shape()[0];
            let n_in = weights.shape()[1];
            let mut out = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &weights.data()[o * n_in..(o + 1) * n_in];
                out[o] = row.iter().zip(x.data()).map(|(w, v)| w * v).sum::<f64>() + bias[o];
            }
            Tensor::from_slice(&out)
        }
        Layer::Conv2d {
            kernels,
            bias,
            stride,
            padding,
        } => {
            let [oc, ic, kh, kw] = [
                kernels.shape()[0],
                kernels.shape()[1],
                kernels.shape()[2],
                kernels.shape()[3],
            ];
            let (h, w) = (x.shape()[1], x.shape()[2]);
            let oh = (h + 2 * padding.0 - kh) / stride.0 + 1;
            let ow = (w + 2 * padding.1 - kw) / stride.1 + 1;
            let mut out = Tensor::zeros(vec![oc, oh, ow]);
            for o in 0..oc {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = bias[o];
                        for c in 0..ic {
                            for u in 0..kh {
                                let y = (i * stride.0 + u) as isize - padding.0 as isize;
                                if y < 0 || y as usize >= h {
                                    continue;
                                }
                                for v in 0..kw {
                                    let z = (j * stride.1 + v) as isize - padding.1 as isize;
                                    if z < 0 || z as usize >= w {
                                        continue;
                                    }
                                    let k = kernels.data()
                                        [((o * ic + c) * kh + u) * kw + v];
                                    acc += k * x.at3(c, y as usize, z as usize);
                                }
                            }
                        }
                        let idx = out.idx3(o, i, j);
                        out.data_mut()[idx] = acc;
                    }
                }
            }
            out
        }
        Layer::Relu => x.map(|v| v.max(0.0)),
        Layer::MaxPool { kernel, stride } => {
            let (c_n, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let oh = (h - kernel.0) / stride.0 + 1;
            let ow = (w - kernel.1) / stride.1 + 1;
            let mut out = Tensor::zeros(vec![c_n, oh, ow]);
            for c in 0..c_n {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        for u in 0..kernel.0 {
                            for v in 0..kernel.1 {
                                let val = x.at3(c, i * stride.0 + u, j * stride.1 + v);
                                if val > best {
                                    best = val;
                                }
                            }
                        }
                        let idx = out.idx3(c, i, j);
                        out.data_mut()[idx] = best;
                    }
                }
            }
            out
        }
        Layer::Flatten => x.clone().reshape(vec![x.len()]).unwrap(),
        Layer::Softmax => Tensor::from_slice(&crate::model::softmax(x.data())),
    }
}

/// Gradient of the layer's input given the gradient of its output.
fn backward_layer(layer: &Layer, input: &Tensor, output: &Tensor, grad_out: &Tensor) -> Tensor {
    match layer {
        Layer::Dense { weights, .. } => {
            let n_out = weights.shape()[0];
            let n_in = weights.shape()[1];
            let mut grad = vec![0.0; n_in];
            for o in 0..n_out {
                let g = grad_out.data()[o];
                if g == 0.0 {
                    continue;
                }
                let row = &weights.data()[o * n_in..(o + 1) * n_in];
                for (gi, wi) in grad.iter_mut().zip(row) {
                    *gi += g * wi;
                }
            }
            Tensor::from_slice(&grad)
        }
        Layer::Conv2d {
            kernels,
            stride,
            padding,
            ..
        } => {
            let [oc, ic, kh, kw] = [
                kernels.shape()[0],
                kernels.shape()[1],
                kernels.shape()[2],
                kernels.shape()[3],
            ];
            let (h, w) = (input.shape()[1], input.shape()[2]);
            let (oh, ow) = (output.shape()[1], output.shape()[2]);
            let mut grad = Tensor::zeros(input.shape().to_vec());
            for o in 0..oc {
                for i in 0..oh {
                    for j in 0..ow {
                        let g = grad_out.at3(o, i, j);
                        if g == 0.0 {
                            continue;
                        }
                        for c in 0..ic {
                            for u in 0..kh {
                                let y = (i * stride.0 + u) as isize - padding.0 as isize;
                                if y < 0 || y as usize >= h {
                                    continue;
                                }
                                for v in 0..kw {
                                    let z = (j * stride.1 + v) as isize - padding.1 as isize;
                                    if z < 0 || z as usize >= w {
                                        continue;
                                    }
                                    let k = kernels.data()
                                        [((o * ic + c) * kh + u) * kw + v];
                                    let idx = grad.idx3(c, y as usize, z as usize);
                                    grad.data_mut()[idx] += g * k;
                                }
                            }
                        }
                    }
                }
            }
            grad
        }
        Layer::Relu => {
            // subgradient 0 at exactly 0
            let mut grad = grad_out.clone();
            for (g, &v) in grad.data_mut().iter_mut().zip(input.data()) {
                if v <= 0.0 {
                    *g = 0.0;
                }
            }
            grad
        }
        Layer::MaxPool { kernel, stride } => {
            let (c_n, oh, ow) = (output.shape()[0], output.shape()[1], output.shape()[2]);
            let mut grad = Tensor::zeros(input.shape().to_vec());
            for c in 0..c_n {
                for i in 0..oh {
                    for j in 0..ow {
                        let g = grad_out.at3(c, i, j);
                        if g == 0.0 {
                            continue;
                        }
                        // first row-major argmax wins ties
                        let (mut by, mut bz) = (i * stride.0, j * stride.1);
                        let mut best = f64::NEG_INFINITY;
                        for u in 0..kernel.0 {
                            for v in 0..kernel.1 {
                                let (y, z) = (i * stride.0 + u, j * stride.1 + v);
                                let val = input.at3(c, y, z);
                                if val > best {
                                    best = val;
                                    by = y;
                                    bz = z;
                                }
                            }
                        }
                        let idx = grad.idx3(c, by, bz);
                        grad.data_mut()[idx] += g;
                    }
                }
            }
            grad
        }
        Layer::Flatten => grad_out.clone().reshape(input.shape().to_vec()).unwrap(),
        Layer::Softmax => {
            // d s_i / d z_j = s_i (delta_ij - s_j)
            let s = output.data();
            let dot: f64 = grad_out.data().iter().zip(s).map(|(g, si)| g * si).sum();
            let grad: Vec<f64> = grad_out
                .data()
                .iter()
                .zip(s)
                .map(|(g, si)| si * (g - dot))
                .collect();
            Tensor::from_slice(&grad)
        }
    }
}
