//! Analytic test problems.

use crate::problem::MinimaxProblem;

pub use crate::oracle::{add_noise, NoiseSpec, StochasticOracle};

/// `f(x, y) = −½y² + Lxy − (L²/2)x²` on scalars with `Y = ℝ`.
///
/// `∇_x f = −L²x + Ly`, `∇_y f = Lx − y`, `y*(x) = Lx`, and
/// `max_y f(x, y) = 0` for every `x`: the whole line `y = Lx` is stationary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub l: f64,
}

impl Quadratic {
    pub fn new(l: f64) -> Self {
        assert!(l > 0.0, "L must be positive");
        Self { l }
    }
}

pub fn make_quadratic(l: f64) -> Quadratic {
    Quadratic::new(l)
}

impl MinimaxProblem for Quadratic {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let (x, y, l) = (x[0], y[0], self.l);
        -0.5 * y * y + l * x * y - 0.5 * l * l * x * x
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![-self.l * self.l * x[0] + self.l * y[0]]
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![self.l * x[0] - y[0]]
    }

    fn y_star(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.l * x[0]])
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.l * self.l)
    }

    fn strong_concavity(&self) -> Option<f64> {
        Some(1.0)
    }

    fn name(&self) -> String {
        format!("quadratic(L={})", self.l)
    }
}

/// McCormick function in `x ∈ ℝ²`, a bilinear coupling, and `−½‖y‖²`:
///
/// `f = sin(x₁+x₂) + (x₁−x₂)² − 1.5x₁ + 2.5x₂ + 1 + x·y − ½‖y‖²`, `Y = ℝ²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McCormick;

pub fn make_mccormick() -> McCormick {
    McCormick
}

impl McCormick {
    /// The McCormick part alone.
    pub fn mccormick(x: &[f64]) -> f64 {
        (x[0] + x[1]).sin() + (x[0] - x[1]).powi(2) - 1.5 * x[0] + 2.5 * x[1] + 1.0
    }

    /// `Φ(x) = max_y f(x, y) = McCormick(x) + ½‖x‖²`.
    pub fn primal(x: &[f64]) -> f64 {
        Self::mccormick(x) + 0.5 * (x[0] * x[0] + x[1] * x[1])
    }
}

impl MinimaxProblem for McCormick {
    fn dim_x(&self) -> usize {
        2
    }

    fn dim_y(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        Self::mccormick(x) + x[0] * y[0] + x[1] * y[1] - 0.5 * (y[0] * y[0] + y[1] * y[1])
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let c = (x[0] + x[1]).cos();
        let d = 2.0 * (x[0] - x[1]);
        vec![c + d - 1.5 + y[0], c - d + 2.5 + y[1]]
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![x[0] - y[0], x[1] - y[1]]
    }

    fn y_star(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.to_vec())
    }

    fn strong_concavity(&self) -> Option<f64> {
        Some(1.0)
    }

    fn name(&self) -> String {
        "mccormick".into()
    }
}
