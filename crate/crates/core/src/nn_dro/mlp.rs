//! Dense network with ELU hidden layers, identity output and logistic loss,
//! differentiated by hand with respect to both parameters and input.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::oracle::seeded_rng;

/// Layer widths, input first. The last width must be 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub sizes: Vec<usize>,
}

impl Arch {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "an architecture needs input and output widths");
        assert_eq!(*sizes.last().unwrap(), 1, "the output layer must be scalar");
        assert!(sizes.iter().all(|&s| s > 0));
        Self { sizes }
    }

    /// `2 → 16 → 16 → 1`.
    pub fn default_dro() -> Self {
        Self::new(vec![2, 16, 16, 1])
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (fan_in, fan_out, offset of the weight block)
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let here = offset;
            offset += w[0] * w[1] + w[1];
            (w[0], w[1], here)
        })
    }

    pub fn label(&self) -> String {
        self.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
    }

    pub fn parse(s: &str) -> Option<Self> {
        let sizes: Option<Vec<usize>> = s.split(['-', ',']).map(|p| p.trim().parse().ok()).collect();
        let sizes = sizes?;
        (sizes.len() >= 2 && sizes.last() == Some(&1) && sizes.iter().all(|&v| v > 0)).then(|| Self::new(sizes))
    }
}

/// Flattened weights and biases. Each layer stores its row-major
/// `fan_out × fan_in` weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub arch: Arch,
    pub values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: Arch) -> Self {
        let n = arch.param_count();
        Self { arch, values: vec![0.0; n] }
    }

    /// Weights `N(0, 1/fan_in)`, zero biases.
    pub fn random(arch: Arch, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut values = vec![0.0; arch.param_count()];
        for (fan_in, fan_out, off) in arch.layers() {
            let dist = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("finite std");
            for w in &mut values[off..off + fan_in * fan_out] {
                *w = dist.sample(&mut rng);
            }
        }
        Self { arch, values }
    }
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// `log(1 + e^{−s·o})`, stable for large `|o|`.
pub fn logistic_loss(output: f64, label: f64) -> f64 {
    let m = -label * output;
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn logistic_dloss(output: f64, label: f64) -> f64 {
    // d/do log(1 + e^{−s o}) = −s σ(−s o)
    let m = -label * output;
    let sig = if m >= 0.0 { 1.0 / (1.0 + (-m).exp()) } else { m.exp() / (1.0 + m.exp()) };
    -label * sig
}

/// Scalar network output.
pub fn forward(arch: &Arch, params: &[f64], input: &[f64]) -> f64 {
    let mut act = input.to_vec();
    let n_layers = arch.sizes.len() - 1;
    for (li, (fan_in, fan_out, off)) in arch.layers().enumerate() {
        let (w, b) = params[off..off + fan_in * fan_out + fan_out].split_at(fan_in * fan_out);
        let last = li + 1 == n_layers;
        act = (0..fan_out)
            .map(|o| {
                let z = b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(&act).map(|(a, b)| a * b).sum::<f64>();
                if last {
                    z
                } else {
                    elu(z)
                }
            })
            .collect();
    }
    act[0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    pub loss: f64,
    pub output: f64,
    pub grad_params: Vec<f64>,
    pub grad_input: Vec<f64>,
}

/// Logistic loss and its exact gradients with respect to parameters and input.
pub fn forward_backward(arch: &Arch, params: &[f64], input: &[f64], label: f64) -> Backprop {
    assert_eq!(input.len(), arch.input_dim(), "input dimension mismatch");
    let layers: Vec<_> = arch.layers().collect();
    let n_layers = layers.len();
    // activations[l] is the input to layer l; pre[l] its pre-activation.
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    activations.push(input.to_vec());
    for (li, &(fan_in, fan_out, off)) in layers.iter().enumerate() {
        let w = &params[off..off + fan_in * fan_out];
        let b = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        let a = &activations[li];
        let z: Vec<f64> = (0..fan_out)
            .map(|o| b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(a).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        let next = if li + 1 == n_layers { z.clone() } else { z.iter().map(|&v| elu(v)).collect() };
        pre.push(z);
        activations.push(next);
    }
    let output = activations[n_layers][0];
    let loss = logistic_loss(output, label);

    let mut grad_params = vec![0.0; params.len()];
    // delta = dℓ/dz for the current layer
    let mut delta = vec![logistic_dloss(output, label)];
    for li in (0..n_layers).rev() {
        let (fan_in, fan_out, off) = layers[li];
        let a = &activations[li];
        let w = &params[off..off + fan_in * fan_out];
        for o in 0..fan_out {
            let d = delta[o];
            for i in 0..fan_in {
                grad_params[off + o * fan_in + i] += d * a[i];
            }
            grad_params[off + fan_in * fan_out + o] += d;
        }
        let mut back = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            for i in 0..fan_in {
                back[i] += w[o * fan_in + i] * d;
            }
        }
        if li > 0 {
            for (bi, z) in back.iter_mut().zip(&pre[li - 1]) {
                *bi *= elu_grad(*z);
            }
        }
        delta = back;
    }
    Backprop { loss, output, grad_params, grad_input: delta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_formula() {
        assert_eq!(Arch::default_dro().param_count(), 2 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
        assert_eq!(Arch::parse("2-16-16-1"), Some(Arch::default_dro()));
        assert_eq!(Arch::parse("2-3"), None);
    }

    #[test]
    fn zero_network_is_constant() {
        let p = MlpParams::zeros(Arch::default_dro());
        let bp = forward_backward(&p.arch, &p.values, &[0.7, -1.2], 1.0);
        assert_eq!(bp.output, 0.0);
        assert!((bp.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(bp.grad_input, vec![0.0, 0.0]);
    }

    #[test]
    fn single_layer_is_logistic_regression() {
        let arch = Arch::new(vec![3, 1]);
        let params = vec![0.4, -1.1, 0.25, 0.3];
        let input = [1.5, 0.2, -0.7];
        for label in [1.0, -1.0] {
            let bp = forward_backward(&arch, &params, &input, label);
            let o: f64 = 0.3 + 0.4 * 1.5 - 1.1 * 0.2 + 0.25 * -0.7;
            let coef = -label / (1.0 + (label * o).exp());
            for i in 0..3 {
                assert!((bp.grad_params[i] - coef * input[i]).abs() < 1e-10);
                assert!((bp.grad_input[i] - coef * params[i]).abs() < 1e-10);
            }
            assert!((bp.grad_params[3] - coef).abs() < 1e-10);
            assert!((bp.loss - (1.0 + (-label * o).exp()).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_loss_is_stable() {
        assert!(logistic_loss(800.0, -1.0).is_finite());
        assert!((logistic_loss(800.0, -1.0) - 800.0).abs() < 1e-9);
        assert!(logistic_loss(800.0, 1.0) >= 0.0);
    }

    #[test]
    fn forward_matches_backprop_output() {
        let p = MlpParams::random(Arch::default_dro(), 3);
        let x = [0.3, -0.9];
        assert_eq!(forward(&p.arch, &p.values, &x), forward_backward(&p.arch, &p.values, &x, 1.0).output);
    }
}
