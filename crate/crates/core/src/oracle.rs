//! Gradient oracles seen by the drivers: exact, or Gaussian-perturbed with a
//! seeded generator. Every gradient evaluation is counted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problem::MinimaxProblem;

/// Identifier of the pseudorandom stream, written into run metadata.
/// ChaCha8 is counter-based and produces the same stream on every platform.
pub const RNG_ID: &str = "chacha8(rand_chacha 0.9)+ziggurat-normal(rand_distr 0.5)";

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCalls {
    pub x: u64,
    pub y: u64,
}

impl OracleCalls {
    pub fn total(&self) -> u64 {
        self.x + self.y
    }
}

/// Source of (possibly stochastic) gradients for a fixed problem.
pub trait GradientOracle {
    type Problem: MinimaxProblem + ?Sized;

    fn problem(&self) -> &Self::Problem;

    fn is_deterministic(&self) -> bool;

    /// Both gradients from one shared sample.
    fn sample_grads(&mut self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>);

    /// A single fresh sample of `∇_y F`.
    fn sample_grad_y(&mut self, x: &[f64], y: &[f64]) -> Vec<f64>;

    /// Average of `batch` i.i.d. samples of `∇_x F`.
    fn sample_grad_x_batch(&mut self, x: &[f64], y: &[f64], batch: usize) -> Vec<f64>;

    fn calls(&self) -> OracleCalls;
}

/// Noise-free oracle over a borrowed problem.
pub struct ExactOracle<'a, P: MinimaxProblem + ?Sized> {
    problem: &'a P,
    calls: OracleCalls,
}

impl<'a, P: MinimaxProblem + ?Sized> ExactOracle<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        Self { problem, calls: OracleCalls::default() }
    }
}

impl<P: MinimaxProblem + ?Sized> GradientOracle for ExactOracle<'_, P> {
    type Problem = P;

    fn problem(&self) -> &P {
        self.problem
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn sample_grads(&mut self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.calls.x += 1;
        self.calls.y += 1;
        self.problem.grads(x, y)
    }

    fn sample_grad_y(&mut self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.calls.y += 1;
        self.problem.grad_y(x, y)
    }

    fn sample_grad_x_batch(&mut self, x: &[f64], y: &[f64], batch: usize) -> Vec<f64> {
        self.calls.x += batch as u64;
        self.problem.grad_x(x, y)
    }

    fn calls(&self) -> OracleCalls {
        self.calls
    }
}

/// Isotropic Gaussian gradient noise, added independently to every gradient
/// coordinate on every call.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
}

/// Wraps a problem with additive Gaussian gradient noise of standard deviation
/// `sigma`. With `sigma == 0` no random numbers are drawn and the outputs are
/// exactly the base gradients.
pub struct StochasticOracle<'a, P: MinimaxProblem + ?Sized> {
    base: &'a P,
    sigma: f64,
    rng: Rng,
    calls: OracleCalls,
}

impl<'a, P: MinimaxProblem + ?Sized> StochasticOracle<'a, P> {
    pub fn new(base: &'a P, noise: NoiseSpec, seed: u64) -> Self {
        assert!(noise.sigma >= 0.0, "noise sigma must be nonnegative");
        Self { base, sigma: noise.sigma, rng: seeded_rng(seed), calls: OracleCalls::default() }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn perturb(&mut self, g: &mut [f64], samples: usize) {
        if self.sigma == 0.0 {
            return;
        }
        let scale = self.sigma / samples as f64;
        for gi in g.iter_mut() {
            let mut acc = 0.0;
            for _ in 0..samples {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                acc += z;
            }
            *gi += scale * acc;
        }
    }
}

impl<P: MinimaxProblem + ?Sized> GradientOracle for StochasticOracle<'_, P> {
    type Problem = P;

    fn problem(&self) -> &P {
        self.base
    }

    fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }

    fn sample_grads(&mut self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.calls.x += 1;
        self.calls.y += 1;
        let (mut gx, mut gy) = self.base.grads(x, y);
        self.perturb(&mut gx, 1);
        self.perturb(&mut gy, 1);
        (gx, gy)
    }

    fn sample_grad_y(&mut self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.calls.y += 1;
        let mut g = self.base.grad_y(x, y);
        self.perturb(&mut g, 1);
        g
    }

    fn sample_grad_x_batch(&mut self, x: &[f64], y: &[f64], batch: usize) -> Vec<f64> {
        let batch = batch.max(1);
        self.calls.x += batch as u64;
        let mut g = self.base.grad_x(x, y);
        self.perturb(&mut g, batch);
        g
    }

    fn calls(&self) -> OracleCalls {
        self.calls
    }
}

/// Wraps `problem` with gradient noise drawn from a stream seeded by `seed`.
pub fn add_noise<P: MinimaxProblem + ?Sized>(problem: &P, spec: NoiseSpec, seed: u64) -> StochasticOracle<'_, P> {
    StochasticOracle::new(problem, spec, seed)
}
