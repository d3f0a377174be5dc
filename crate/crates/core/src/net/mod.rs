//! Small convolutional classifier whose penultimate activations serve as
//! feature vectors.
//!
//! The network exists to turn an image into a nonnegative vector that can be
//! compared by distance; classification accuracy is secondary. Feature
//! extraction therefore reads the activation feeding the final dense layer,
//! which the architecture contract keeps rectified (so entries are
//! nonnegative) and strictly smaller than the input element count (so the
//! mapping is a reduction and not invertible).

pub mod io;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::FeatureVector;

/// Channel-major 3D activation block; dense layers use shape `(n, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Single-channel tensor from a row-major grayscale image.
    pub fn from_grayscale(pixels: &[f64], height: usize, width: usize) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::LayerShape(format!(
                "image has {} pixels, expected {}x{}",
                pixels.len(),
                height,
                width
            )));
        }
        for (i, &p) in pixels.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidEntry { index: i, value: p });
            }
        }
        Ok(Self {
            channels: 1,
            height,
            width,
            data: pixels.to_vec(),
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One layer. Parameterized layers own their weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        /// `out_channels * in_channels * kernel * kernel`, filter-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    /// Non-overlapping max pooling: stride equals window size.
    MaxPool {
        size: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        /// `outputs * inputs`, row per output neuron.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Softmax,
}

impl Layer {
    fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        match self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                if c != *in_channels {
                    return Err(Error::LayerShape(format!(
                        "conv expects {in_channels} input channels, got {c}"
                    )));
                }
                let oh = conv_output_size(h, *kernel, *stride, *padding)?;
                let ow = conv_output_size(w, *kernel, *stride, *padding)?;
                Ok((*out_channels, oh, ow))
            }
            Layer::Relu => Ok(input),
            Layer::MaxPool { size } => {
                if *size == 0 || h % size != 0 || w % size != 0 {
                    return Err(Error::LayerShape(format!(
                        "pool size {size} must evenly divide {h}x{w}"
                    )));
                }
                Ok((c, h / size, w / size))
            }
            Layer::Dense {
                inputs, outputs, ..
            } => {
                if c * h * w != *inputs {
                    return Err(Error::LayerShape(format!(
                        "dense expects {inputs} inputs, got {c}x{h}x{w}"
                    )));
                }
                Ok((*outputs, 1, 1))
            }
            Layer::Softmax => Ok(input),
        }
    }
}

/// Output size along one axis: `1 + (extent - kernel + 2*padding) / stride`,
/// defined only when the division is exact.
pub fn conv_output_size(
    extent: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::LayerShape(
            "kernel and stride must be positive".into(),
        ));
    }
    let padded = extent + 2 * padding;
    if padded < kernel || (padded - kernel) % stride != 0 {
        return Err(Error::LayerShape(format!(
            "kernel {kernel} stride {stride} padding {padding} does not tile extent {extent}"
        )));
    }
    Ok(1 + (padded - kernel) / stride)
}

/// All intermediate activations of one forward evaluation:
/// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: (usize, usize, usize),
    layers: Vec<Layer>,
    /// Index of the final dense layer; its input is the feature vector.
    head: usize,
    feature_dimension: usize,
    num_classes: usize,
}

impl Network {
    /// Validates the layer stack and wires up feature extraction.
    ///
    /// Contract: shapes must flow, the stack must end `Dense -> Softmax`,
    /// the activation feeding that head must be rectified, and the feature
    /// dimension must be strictly below the input element count.
    pub fn assemble(input_shape: (usize, usize, usize), layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::LayerShape(
                "network needs at least a dense head and softmax".into(),
            ));
        }
        let mut shape = input_shape;
        let mut shapes = vec![shape];
        for layer in &layers {
            shape = layer.output_shape(shape)?;
            shapes.push(shape);
        }
        let last = layers.len() - 1;
        if !matches!(layers[last], Layer::Softmax) {
            return Err(Error::LayerShape("final layer must be softmax".into()));
        }
        let head = last - 1;
        let (inputs, outputs) = match &layers[head] {
            Layer::Dense {
                inputs, outputs, ..
            } => (*inputs, *outputs),
            _ => return Err(Error::LayerShape("softmax must follow a dense head".into())),
        };
        if head == 0 || !matches!(layers[head - 1], Layer::Relu) {
            return Err(Error::LayerShape(
                "the activation feeding the head must be rectified".into(),
            ));
        }
        let input_elements = input_shape.0 * input_shape.1 * input_shape.2;
        if inputs >= input_elements {
            return Err(Error::LayerShape(format!(
                "feature dimension {inputs} must be below the input element count {input_elements}"
            )));
        }
        if outputs < 2 {
            return Err(Error::LayerShape(
                "classifier needs at least two classes".into(),
            ));
        }
        Ok(Self {
            input_shape,
            layers,
            head,
            feature_dimension: inputs,
            num_classes: outputs,
        })
    }

    /// Stock desktop-scale architecture for 16x16 grayscale input: one padded
    /// 3x3 convolution with 4 filters, 2x2 pooling, a 64-unit rectified
    /// feature layer, and a 4-class head.
    pub fn desk_default(seed: u64) -> Self {
        NetworkBuilder::new(16, 16)
            .conv(4, 3, 1, 1)
            .relu()
            .maxpool(2)
            .dense(64)
            .relu()
            .dense(4)
            .softmax()
            .build(seed)
            .expect("stock architecture is valid")
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn feature_dimension(&self) -> usize {
        self.feature_dimension
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Runs the network, keeping every intermediate activation.
    pub fn forward(&self, input: &Tensor) -> Result<ForwardPass> {
        if input.shape() != self.input_shape {
            return Err(Error::LayerShape(format!(
                "input shape {:?} does not match network input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = eval_layer(layer, activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(ForwardPass { activations })
    }

    /// Class probabilities for one image.
    pub fn predict(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output().as_slice().to_vec())
    }

    /// The rectified activation feeding the classifier head, as a feature
    /// vector. Nonnegative by the architecture contract.
    pub fn extract_features(&self, input: &Tensor) -> Result<FeatureVector> {
        let pass = self.forward(input)?;
        self.features_of(&pass)
    }

    pub fn features_of(&self, pass: &ForwardPass) -> Result<FeatureVector> {
        FeatureVector::new(pass.activations[self.head].as_slice().to_vec())
    }

    /// Flat parameter count across all layers (weights then bias, in layer
    /// order). Parameter indexing backs the finite-difference checks.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                    weights.len() + bias.len()
                }
                _ => 0,
            })
            .sum()
    }

    pub fn get_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } = l {
                out.extend_from_slice(weights);
                out.extend_from_slice(bias);
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LayerShape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut cursor = 0;
        for l in &mut self.layers {
            if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } = l {
                let wn = weights.len();
                weights.copy_from_slice(&params[cursor..cursor + wn]);
                cursor += wn;
                let bn = bias.len();
                bias.copy_from_slice(&params[cursor..cursor + bn]);
                cursor += bn;
            }
        }
        Ok(())
    }
}

fn eval_layer(layer: &Layer, input: &Tensor) -> Result<Tensor> {
    let (oc, oh, ow) = layer.output_shape(input.shape())?;
    let mut out = Tensor::zeros(oc, oh, ow);
    match layer {
        Layer::Conv {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weights,
            bias,
        } => {
            let (_, ih, iw) = input.shape();
            for f in 0..*out_channels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias[f];
                        for ic in 0..*in_channels {
                            for ky in 0..*kernel {
                                for kx in 0..*kernel {
                                    let iy = (oy * stride + ky) as isize - *padding as isize;
                                    let ix = (ox * stride + kx) as isize - *padding as isize;
                                    if iy < 0 || ix < 0 || iy >= ih as isize || ix >= iw as isize {
                                        continue;
                                    }
                                    let w = weights
                                        [((f * in_channels + ic) * kernel + ky) * kernel + kx];
                                    acc += w * input.get(ic, iy as usize, ix as usize);
                                }
                            }
                        }
                        out.set(f, oy, ox, acc);
                    }
                }
            }
        }
        Layer::Relu => {
            for (o, &i) in out.as_mut_slice().iter_mut().zip(input.as_slice()) {
                *o = if i > 0.0 { i } else { 0.0 };
            }
        }
        Layer::MaxPool { size } => {
            let (c, _, _) = input.shape();
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        for dy in 0..*size {
                            for dx in 0..*size {
                                let v = input.get(ch, oy * size + dy, ox * size + dx);
                                if v > best {
                                    best = v;
                                }
                            }
                        }
                        out.set(ch, oy, ox, best);
                    }
                }
            }
        }
        Layer::Dense {
            inputs,
            outputs,
            weights,
            bias,
        } => {
            let x = input.as_slice();
            for o in 0..*outputs {
                let mut acc = bias[o];
                let row = &weights[o * inputs..(o + 1) * inputs];
                for i in 0..*inputs {
                    acc += row[i] * x[i];
                }
                out.as_mut_slice()[o] = acc;
            }
        }
        Layer::Softmax => {
            let x = input.as_slice();
            let mut max = f64::NEG_INFINITY;
            for &v in x {
                if v > max {
                    max = v;
                }
            }
            let mut sum = 0.0;
            let o = out.as_mut_slice();
            for (i, &v) in x.iter().enumerate() {
                let e = (v - max).exp();
                o[i] = e;
                sum += e;
            }
            for v in o.iter_mut() {
                *v /= sum;
            }
        }
    }
    Ok(out)
}

enum Op {
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        size: usize,
    },
    Dense {
        outputs: usize,
    },
    Softmax,
}

/// Chainable architecture description; `build` validates shape flow and
/// initializes weights deterministically from the seed.
pub struct NetworkBuilder {
    height: usize,
    width: usize,
    ops: Vec<Op>,
}

impl NetworkBuilder {
    /// Grayscale input of the given extent.
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ops: Vec::new(),
        }
    }

    pub fn conv(mut self, filters: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        self.ops.push(Op::Conv {
            filters,
            kernel,
            stride,
            padding,
        });
        self
    }

    pub fn relu(mut self) -> Self {
        self.ops.push(Op::Relu);
        self
    }

    pub fn maxpool(mut self, size: usize) -> Self {
        self.ops.push(Op::MaxPool { size });
        self
    }

    pub fn dense(mut self, outputs: usize) -> Self {
        self.ops.push(Op::Dense { outputs });
        self
    }

    pub fn softmax(mut self) -> Self {
        self.ops.push(Op::Softmax);
        self
    }

    pub fn build(self, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_shape = (1usize, self.height, self.width);
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let layer = match *op {
                Op::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    let in_channels = shape.0;
                    let fan_in = in_channels * kernel * kernel;
                    let fan_out = filters * kernel * kernel;
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let weights = (0..filters * fan_in)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect();
                    Layer::Conv {
                        in_channels,
                        out_channels: filters,
                        kernel,
                        stride,
                        padding,
                        weights,
                        bias: vec![0.0; filters],
                    }
                }
                Op::Relu => Layer::Relu,
                Op::MaxPool { size } => Layer::MaxPool { size },
                Op::Dense { outputs } => {
                    let inputs = shape.0 * shape.1 * shape.2;
                    let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                    let weights = (0..outputs * inputs)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect();
                    Layer::Dense {
                        inputs,
                        outputs,
                        weights,
                        bias: vec![0.0; outputs],
                    }
                }
                Op::Softmax => Layer::Softmax,
            };
            shape = layer.output_shape(shape)?;
            layers.push(layer);
        }
        Network::assemble(input_shape, layers)
    }
}
