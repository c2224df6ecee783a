//! The minimax oracle abstraction and the optimality measures built on it.

use crate::error::{Error, Result};
use crate::subroutine::GenAdaGradState;
use crate::vecops;

/// Closed convex set used for projections. Balls are centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    Unbounded,
    Ball { radius: f64 },
    /// The same `[lo, hi]` interval on every coordinate.
    Box { lo: f64, hi: f64 },
}

impl Domain {
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, v: &mut [f64]) {
        match *self {
            Domain::Unbounded => {}
            Domain::Ball { radius } => {
                let n = vecops::norm(v);
                if n > radius {
                    let s = radius / n;
                    v.iter_mut().for_each(|x| *x *= s);
                }
            }
            Domain::Box { lo, hi } => v.iter_mut().for_each(|x| *x = x.clamp(lo, hi)),
        }
    }

    pub fn is_compact(&self) -> bool {
        match *self {
            Domain::Unbounded => false,
            Domain::Ball { radius } => radius.is_finite(),
            Domain::Box { lo, hi } => lo.is_finite() && hi.is_finite(),
        }
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        match *self {
            Domain::Unbounded => true,
            Domain::Ball { radius } => vecops::norm(v) <= radius * (1.0 + 1e-12),
            Domain::Box { lo, hi } => v.iter().all(|x| (lo..=hi).contains(x)),
        }
    }
}

/// A smooth minimax objective `min_x max_{y in Y} f(x, y)` exposed through its
/// value, both partial gradients and the projection onto `Y`.
///
/// Implementations are immutable after construction and shared freely
/// between runs; stochasticity lives in [`crate::oracle`].
pub trait MinimaxProblem: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;

    /// Both partial gradients at one point. Override when they share work.
    fn grads(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.grad_x(x, y), self.grad_y(x, y))
    }

    fn y_domain(&self) -> Domain {
        Domain::Unbounded
    }

    fn project_y(&self, y: &[f64]) -> Vec<f64> {
        self.y_domain().project(y)
    }

    /// `argmax_y f(x, y)` when it is known in closed form.
    fn y_star(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Joint smoothness constant `l`, if known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Strong concavity modulus `mu` in `y`, if known.
    fn strong_concavity(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String {
        "custom".into()
    }
}

/// `‖y − P_Y(y + ∇_y f(x, y))‖`. Not squared.
pub fn gradient_mapping<P: MinimaxProblem + ?Sized>(problem: &P, x: &[f64], y: &[f64]) -> f64 {
    let g = problem.grad_y(x, y);
    mapping_from_grad(problem, y, &g)
}

/// Gradient mapping evaluated with a caller-provided (possibly noisy) `∇_y`.
pub fn mapping_from_grad<P: MinimaxProblem + ?Sized>(problem: &P, y: &[f64], g: &[f64]) -> f64 {
    if problem.y_domain() == Domain::Unbounded {
        return vecops::norm(g);
    }
    let moved: Vec<f64> = y.iter().zip(g).map(|(a, b)| a + b).collect();
    vecops::dist(y, &problem.project_y(&moved))
}

/// How [`stationarity`] obtains `y*(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YStarSource {
    AnalyticOnly,
    /// Fall back to [`approx_y_star`] at this mapping tolerance.
    Approximate { tol: f64 },
}

/// The two components of ε-stationarity at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub grad_x_norm: f64,
    pub dist_y: f64,
}

impl Stationarity {
    /// The smallest ε for which `(x, y)` is ε-stationary.
    pub fn value(&self) -> f64 {
        self.grad_x_norm.max(self.dist_y)
    }
}

pub fn stationarity<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
    source: YStarSource,
) -> Result<Stationarity> {
    let y_star = match (problem.y_star(x), source) {
        (Some(ys), _) => ys,
        (None, YStarSource::Approximate { tol }) => approx_y_star(problem, x, tol)?,
        (None, YStarSource::AnalyticOnly) => return Err(Error::StationarityUnavailable),
    };
    Ok(Stationarity {
        grad_x_norm: vecops::norm(&problem.grad_x(x, y)),
        dist_y: vecops::dist(y, &y_star),
    })
}

pub const APPROX_Y_STAR_CAP: usize = 1_000_000;

/// High-accuracy `y*(x)` for metrics, from generalized AdaGrad ascent started at
/// the projection of the origin. Drivers never call this.
pub fn approx_y_star<P: MinimaxProblem + ?Sized>(problem: &P, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let y0 = problem.project_y(&vec![0.0; problem.dim_y()]);
    let mut learner = GenAdaGradState::new(1.0, 0.5, 1.0, y0, problem.y_domain())?;
    for _ in 0..APPROX_Y_STAR_CAP {
        let g = problem.grad_y(x, &learner.x);
        if mapping_from_grad(problem, &learner.x, &g) <= tol {
            return Ok(learner.x);
        }
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        learner.step(&neg);
    }
    Err(Error::InnerOracleNonconvergent { tol, cap: APPROX_Y_STAR_CAP })
}
