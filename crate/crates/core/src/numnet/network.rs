use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One dense layer: `out = weights * input + bias`, weights stored row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let out_dim = weights.len();
        if out_dim == 0 {
            return Err(Error::invalid("layer must have at least one output"));
        }
        let in_dim = weights[0].len();
        if in_dim == 0 {
            return Err(Error::invalid("layer must have at least one input"));
        }
        if let Some(row) = weights.iter().find(|r| r.len() != in_dim) {
            return Err(Error::DimensionMismatch { expected: in_dim, got: row.len() });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch { expected: out_dim, got: bias.len() });
        }
        let weights: Vec<f64> = weights.into_iter().flatten().collect();
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Layer { in_dim, out_dim, weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    pub fn weights_row_major(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.in_dim).map(<[f64]>::to_vec).collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `out = W x + b`
    pub(crate) fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias)) {
            *o = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
        }
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Parameters of a feed-forward network with ReLU hidden layers and an identity output layer.
///
/// The flat parameter order used by gradients and the optimizer is, per layer
/// in order, the row-major weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(Error::DimensionMismatch { expected: pair[0].out_dim, got: pair[1].in_dim });
            }
        }
        Ok(NetworkParams { layers })
    }

    /// He-initialised network: weights ~ N(0, 2/fan_in), biases zero.
    pub fn init(input_dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<usize> = std::iter::once(input_dim).chain(hidden.iter().copied()).chain([output_dim]).collect();
        let layers = dims
            .windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(NetworkParams { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: flat.len() });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Final-layer logits for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            layer.affine_into(&current, &mut next);
            if i < last {
                relu_in_place(&mut next);
            }
            current = next;
        }
        Ok(current)
    }

    /// Scalar output of a single-output network.
    pub fn predict_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.output_dim() });
        }
        Ok(self.forward(x)?[0])
    }

    /// Class probabilities of a classifier network.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        softmax(&self.forward(x)?)
    }
}

pub(crate) fn relu_in_place(z: &mut [f64]) {
    for v in z {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Elementwise `max(z, 0)`.
pub fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.len() < 2 {
        return Err(Error::invalid("softmax needs at least two classes"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input must be finite"));
    }
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `log softmax(z)_k`, computed through log-sum-exp so it never evaluates `log(0)`.
pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    layers: Vec<LayerRepr>,
}

impl Serialize for NetworkParams {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkRepr {
            layers: self
                .layers
                .iter()
                .map(|l| LayerRepr { weights: l.weight_rows(), bias: l.bias.clone() })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NetworkParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = NetworkRepr::deserialize(deserializer)?;
        let layers = repr
            .layers
            .into_iter()
            .map(|l| Layer::new(l.weights, l.bias))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        NetworkParams::new(layers).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(layers: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> NetworkParams {
        NetworkParams::new(layers.into_iter().map(|(w, b)| Layer::new(w, b).unwrap()).collect()).unwrap()
    }

    #[test]
    fn identity_network() {
        let n = net(vec![(vec![vec![1.0]], vec![0.0])]);
        assert_eq!(n.forward(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn relu_kills_negative_hidden_unit() {
        let n = net(vec![(vec![vec![-1.0]], vec![0.0]), (vec![vec![1.0]], vec![0.0])]);
        assert_eq!(n.forward(&[5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let n = net(vec![(vec![vec![1.0, 2.0]], vec![0.0])]);
        assert!(matches!(n.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn layers_must_chain() {
        let a = Layer::new(vec![vec![1.0, 1.0]; 3], vec![0.0; 3]).unwrap();
        let b = Layer::new(vec![vec![1.0; 2]], vec![0.0]).unwrap();
        assert!(NetworkParams::new(vec![a, b]).is_err());
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[-3.0, -0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_closed_forms() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[1.0]).is_err());
    }

    #[test]
    fn flat_roundtrip_and_serde() {
        let n = NetworkParams::init(3, &[4, 2], 2, 7).unwrap();
        let mut m = NetworkParams::init(3, &[4, 2], 2, 8).unwrap();
        m.set_flat(&n.to_flat()).unwrap();
        assert_eq!(m, n);
        assert_eq!(n.param_count(), 3 * 4 + 4 + 4 * 2 + 2 + 2 * 2 + 2);
        let json = serde_json::to_string(&n).unwrap();
        let back: NetworkParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(NetworkParams::init(5, &[8], 2, 1).unwrap(), NetworkParams::init(5, &[8], 2, 1).unwrap());
        assert_ne!(NetworkParams::init(5, &[8], 2, 1).unwrap(), NetworkParams::init(5, &[8], 2, 2).unwrap());
    }
}
