//! Fully-connected ReLU network data model.
//!
//! A [`Network`] is an ordered list of dense layers over `f64`. By convention
//! finished networks apply ReLU on every layer except the last, which is
//! identity-activated (a linear read-out); pieces meant for composition via
//! [`concat`] may end in a ReLU layer instead. Width is the maximal layer
//! output size (input layer excluded), depth is the number of layers
//! (output layer included).
//!
//! Networks are immutable in normal use and safe to share across threads;
//! mutation (training) goes through `&mut` accessors.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise activation applied after a layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

/// A dense layer `y = activation(Wx + b)`.
///
/// Weights are stored flat in row-major order with shape `(out_dim, in_dim)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerJson", into = "LayerJson")]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    /// Builds a layer from row-major flat weights.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape(format!(
                "weight count {} does not match {}x{}",
                weights.len(),
                out_dim,
                in_dim
            )));
        }
        if biases.len() != out_dim {
            return Err(Error::Shape(format!(
                "bias count {} does not match out_dim {}",
                biases.len(),
                out_dim
            )));
        }
        if !weights.iter().chain(biases.iter()).all(|v| v.is_finite()) {
            return Err(Error::Domain("layer parameters must be finite".into()));
        }
        Ok(Layer {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        })
    }

    /// All-zero layer of the given shape.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Layer::new(
            in_dim,
            out_dim,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
            activation,
        )
    }

    /// Builds a layer from weight rows (`rows[r][c]` multiplies input `c`).
    pub fn from_rows(rows: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        let out_dim = rows.len();
        if out_dim == 0 {
            return Err(Error::Shape("layer must have at least one row".into()));
        }
        let in_dim = rows[0].len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != in_dim {
                return Err(Error::Shape(format!(
                    "weight row {} has length {} but row 0 has length {}",
                    r,
                    row.len(),
                    in_dim
                )));
            }
        }
        let weights = rows.into_iter().flatten().collect();
        Layer::new(in_dim, out_dim, weights, biases, activation)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    pub fn set_weight(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * self.in_dim + col] = value;
    }

    pub fn set_bias(&mut self, row: usize, value: f64) {
        self.biases[row] = value;
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Number of scalar parameters (weights plus biases).
    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Single-sample forward pass into a caller-owned buffer.
    #[inline]
    pub(crate) fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        out.reserve(self.out_dim);
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut z = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(self.activation.apply(z));
        }
    }
}

/// JSON wire form of a layer: nested row-major weight matrix.
#[derive(Serialize, Deserialize)]
struct LayerJson {
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl TryFrom<LayerJson> for Layer {
    type Error = String;

    fn try_from(json: LayerJson) -> std::result::Result<Self, String> {
        Layer::from_rows(json.weights, json.biases, json.activation).map_err(|e| e.to_string())
    }
}

impl From<Layer> for LayerJson {
    fn from(layer: Layer) -> Self {
        let rows = (0..layer.out_dim)
            .map(|r| layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim].to_vec())
            .collect();
        LayerJson {
            activation: layer.activation,
            weights: rows,
            biases: layer.biases,
        }
    }
}

/// A layered fully-connected network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkJson", into = "NetworkJson")]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network, checking that adjacent layer widths match.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Shape("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Shape("network must have at least one layer".into()));
        }
        let mut expected = input_dim;
        for (t, layer) in layers.iter().enumerate() {
            if layer.in_dim() != expected {
                return Err(Error::Shape(format!(
                    "layer {} expects input width {} but receives {}",
                    t,
                    layer.in_dim(),
                    expected
                )));
            }
            expected = layer.out_dim();
        }
        Ok(Network { input_dim, layers })
    }

    /// All-zero network over the given layer sizes `[input, h1, ..., out]`.
    ///
    /// Hidden layers use ReLU, the final layer is identity.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(
                "need at least an input and an output size".into(),
            ));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for t in 1..dims.len() {
            let act = if t + 1 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer::zeros(dims[t - 1], dims[t], act)?);
        }
        Network::new(dims[0], layers)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of layers, output layer included.
    #[inline]
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Maximal layer output size (input layer excluded).
    pub fn width(&self) -> usize {
        self.layers.iter().map(Layer::out_dim).max().unwrap_or(0)
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    #[inline]
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        &mut self.layers[index]
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar convenience for networks with a single output node.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.forward(x)?;
        if out.len() != 1 {
            return Err(Error::Shape(format!(
                "expected scalar output, network has output width {}",
                out.len()
            )));
        }
        Ok(out[0])
    }

    /// Activations after the first `layer_index` layers.
    ///
    /// `layer_index` 0 returns the input itself; `layer_index == depth()`
    /// returns the full forward pass.
    pub fn forward_hidden(&self, x: &[f64], layer_index: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if layer_index > self.layers.len() {
            return Err(Error::Invalid(format!(
                "layer index {} out of range (depth {})",
                layer_index,
                self.layers.len()
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[..layer_index] {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Non-allocating forward pass; `cur` and `next` are scratch buffers.
    #[inline]
    pub(crate) fn forward_scratch<'a>(
        &self,
        x: &[f64],
        cur: &'a mut Vec<f64>,
        next: &'a mut Vec<f64>,
    ) -> &'a [f64] {
        cur.clear();
        cur.extend_from_slice(x);
        for layer in &self.layers {
            layer.forward_into(cur, next);
            std::mem::swap(cur, next);
        }
        cur
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has length {} but network input_dim is {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Serializes the network as JSON to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::parse(path, e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Loads a network from a JSON file written by [`Network::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    layers: Vec<LayerJson>,
}

impl TryFrom<NetworkJson> for Network {
    type Error = String;

    fn try_from(json: NetworkJson) -> std::result::Result<Self, String> {
        let layers = json
            .layers
            .into_iter()
            .enumerate()
            .map(|(t, l)| Layer::try_from(l).map_err(|e| format!("layer {}: {}", t, e)))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Network::new(json.input_dim, layers).map_err(|e| e.to_string())
    }
}

impl From<Network> for NetworkJson {
    fn from(net: Network) -> Self {
        NetworkJson {
            input_dim: net.input_dim,
            layers: net.layers.into_iter().map(LayerJson::from).collect(),
        }
    }
}

/// Chains two networks into one computing `second(first(x))`.
///
/// `first`'s output width must equal `second`'s input width. Depths add;
/// the result's width is the max of the two. Whether `first` ends in a ReLU
/// or identity layer is up to the caller and is preserved verbatim.
pub fn concat(first: &Network, second: &Network) -> Result<Network> {
    if first.output_dim() != second.input_dim() {
        return Err(Error::Shape(format!(
            "first network outputs width {} but second expects {}",
            first.output_dim(),
            second.input_dim()
        )));
    }
    let mut layers = first.layers.clone();
    layers.extend(second.layers.iter().cloned());
    Network::new(first.input_dim, layers)
}

/// Closed-form parameter count of a width-`d`, depth-`h` network with scalar
/// input and output: `d^2 (h-2) + d (h-1) + 2 d + 1`.
pub fn param_count(width: usize, depth: usize) -> Result<u64> {
    if width == 0 {
        return Err(Error::Invalid("width must be positive".into()));
    }
    if depth < 2 {
        return Err(Error::Invalid(format!(
            "depth {} unsupported: the formula needs depth >= 2",
            depth
        )));
    }
    let d = width as u64;
    let h = depth as u64;
    Ok(d * d * (h - 2) + d * (h - 1) + 2 * d + 1)
}
