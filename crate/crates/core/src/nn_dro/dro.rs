//! The penalized distributionally robust objective
//! `f(x, y) = (1/n) Σ_i [ℓ_i(x, y_i) − γ‖y_i − v_i‖²]`
//! with network weights `x` and one perturbed input `y_i` per data point.

use crate::nn_dro::data::Dataset;
use crate::nn_dro::mlp::{forward, forward_backward, Arch};
use crate::problem::MinimaxProblem;
use crate::vecops;

#[derive(Debug, Clone, PartialEq)]
pub struct DroProblem {
    pub data: Dataset,
    pub gamma: f64,
    pub arch: Arch,
}

pub fn make_dro_problem(data: Dataset, gamma: f64, arch: Arch) -> DroProblem {
    assert!(gamma > 0.0, "gamma must be positive");
    assert_eq!(arch.input_dim(), 2, "the synthetic data is two-dimensional");
    DroProblem { data, gamma, arch }
}

impl DroProblem {
    /// Flattened unperturbed inputs, the natural starting `y`.
    pub fn clean_y(&self) -> Vec<f64> {
        self.data.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    /// `ℓ_i(x, y_i) − γ‖y_i − v_i‖²`.
    pub fn point_value(&self, params: &[f64], i: usize, yi: &[f64]) -> f64 {
        let out = forward(&self.arch, params, yi);
        let v = &self.data.points[i];
        crate::nn_dro::mlp::logistic_loss(out, self.data.labels[i]) - self.gamma * vecops::dist(yi, v).powi(2)
    }

    /// Per-point loss value with its parameter gradient and its (unscaled)
    /// ascent direction `∇ℓ_i − 2γ(y_i − v_i)` in `y_i`.
    pub fn point_grads(&self, params: &[f64], i: usize, yi: &[f64]) -> (f64, Vec<f64>, [f64; 2]) {
        let bp = forward_backward(&self.arch, params, yi, self.data.labels[i]);
        let v = &self.data.points[i];
        let gy = [
            bp.grad_input[0] - 2.0 * self.gamma * (yi[0] - v[0]),
            bp.grad_input[1] - 2.0 * self.gamma * (yi[1] - v[1]),
        ];
        let penalty = self.gamma * vecops::dist(yi, v).powi(2);
        (bp.loss - penalty, bp.grad_params, gy)
    }

    /// Average logistic loss on the unperturbed data.
    pub fn clean_loss(&self, params: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        self.data
            .points
            .iter()
            .zip(&self.data.labels)
            .map(|(p, l)| crate::nn_dro::mlp::logistic_loss(forward(&self.arch, params, p), *l))
            .sum::<f64>()
            / n
    }

    /// Largest observed second difference of `ℓ_i` along random input
    /// directions, an empirical curvature estimate to compare with `γ`.
    pub fn input_curvature_probe(&self, params: &[f64], probes: usize, seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = crate::oracle::seeded_rng(seed);
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let i = rng.random_range(0..self.data.len());
            let v = self.data.points[i];
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let d = [th.cos(), th.sin()];
            let at = |s: f64| {
                let p = [v[0] + s * d[0], v[1] + s * d[1]];
                crate::nn_dro::mlp::logistic_loss(forward(&self.arch, params, &p), self.data.labels[i])
            };
            let curv = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            // ℓ has curvature c means ℓ − γ‖·‖² is (2γ − c)-strongly concave.
            worst = worst.max(0.5 * curv);
        }
        worst
    }
}

impl MinimaxProblem for DroProblem {
    fn dim_x(&self) -> usize {
        self.arch.param_count()
    }

    fn dim_y(&self) -> usize {
        2 * self.data.len()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.data.len();
        (0..n).map(|i| self.point_value(x, i, &y[2 * i..2 * i + 2])).sum::<f64>() / n as f64
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grads(x, y).0
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grads(x, y).1
    }

    fn grads(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.data.len();
        let inv = 1.0 / n as f64;
        let mut gx = vec![0.0; x.len()];
        let mut gy = vec![0.0; y.len()];
        for i in 0..n {
            let (_, gp, gyi) = self.point_grads(x, i, &y[2 * i..2 * i + 2]);
            vecops::axpy(inv, &gp, &mut gx);
            gy[2 * i] = inv * gyi[0];
            gy[2 * i + 1] = inv * gyi[1];
        }
        (gx, gy)
    }

    fn name(&self) -> String {
        format!("dro(n={},gamma={},arch={})", self.data.len(), self.gamma, self.arch.label())
    }
}

/// Adversarial accuracy under the fast gradient sign method:
/// each input moves to `v + ε·sign(∇_v ℓ(v))` and is classified by the sign of
/// the output. Zero outputs are assigned the majority label of `test`.
pub fn fgsm_eval(arch: &Arch, params: &[f64], test: &Dataset, epsilon: f64) -> f64 {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if test.is_empty() {
        return 0.0;
    }
    let tie = test.majority_label();
    let correct = test
        .points
        .iter()
        .zip(&test.labels)
        .filter(|(p, &label)| {
            let adv = fgsm_perturb(arch, params, p, label, epsilon);
            let out = forward(arch, params, &adv);
            let pred = if out > 0.0 {
                1.0
            } else if out < 0.0 {
                -1.0
            } else {
                tie
            };
            pred == label
        })
        .count();
    correct as f64 / test.len() as f64
}

/// `v + ε·sign(∇_v ℓ(v, label))`, with `sign(0) = 0`.
pub fn fgsm_perturb(arch: &Arch, params: &[f64], v: &[f64; 2], label: f64, epsilon: f64) -> [f64; 2] {
    if epsilon == 0.0 {
        return *v;
    }
    let g = forward_backward(arch, params, v, label).grad_input;
    fgsm_step(v, &g, epsilon)
}

pub fn fgsm_step(v: &[f64; 2], grad_input: &[f64], epsilon: f64) -> [f64; 2] {
    let sign = |g: f64| if g > 0.0 { 1.0 } else if g < 0.0 { -1.0 } else { 0.0 };
    [v[0] + epsilon * sign(grad_input[0]), v[1] + epsilon * sign(grad_input[1])]
}
