//! Adaptive minimax optimization for nonconvex-strongly-concave problems.
//!
//! Two families of methods are provided:
//!
//! * [`drivers::nonnested_run`]: simultaneous descent-ascent where each player
//!   uses a ψ-adaptive stepsize (GDA, AdaGrad, Adam, AMSGrad). On the
//!   quadratic family in [`problems`] it fails to converge unless the
//!   learning-rate ratio is tuned to the problem, which [`analysis`] predicts in
//!   closed form.
//! * [`drivers::neada_run`]: the nested adaptive method. An inner adaptive
//!   learner ([`subroutine`]) maximizes `y` until a stopping criterion fires,
//!   then `x` takes one adaptive step. No problem constants are needed.
//!
//! [`nn_dro`] carries a desk-scale robust-training experiment and [`cli`] the
//! CSV-emitting experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::int_plus_one)]

pub mod analysis;
pub mod averagers;
pub mod cli;
pub mod drivers;
pub mod error;
pub mod nn_dro;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod subroutine;
pub mod trajectory;
pub mod vecops;

pub use averagers::{AveragerState, Mode, Psi};
pub use drivers::{neada_run, nonnested_run, Metrics, NeAdaConfig, NonNestedConfig, OuterUpdate};
pub use error::{Error, Result};
pub use oracle::{ExactOracle, GradientOracle, NoiseSpec, StochasticOracle};
pub use problem::{approx_y_star, gradient_mapping, stationarity, Domain, MinimaxProblem, Stationarity, YStarSource};
pub use problems::{make_mccormick, make_quadratic, McCormick, Quadratic};
pub use subroutine::{inner_maximize, regret, GenAdaGradState, InnerConfig, InnerKind, StoppingCriterion};
pub use trajectory::{RunStatus, Trajectory, TrajectoryRow};
