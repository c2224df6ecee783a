//! Outer loops: simultaneous non-nested adaptive descent-ascent, and the nested
//! framework whose inner loop maximizes `y` until a stopping criterion fires.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::averagers::{AveragerState, Mode, Psi};
use crate::error::{check_len, Error, Result};
use crate::oracle::GradientOracle;
use crate::problem::{gradient_mapping, stationarity, MinimaxProblem, YStarSource};
use crate::subroutine::{inner_maximize, InnerConfig, StoppingCriterion};
use crate::trajectory::{RunStatus, Trajectory, TrajectoryRow};
use crate::vecops;

/// What gets measured at each recorded step. Metrics use exact gradients and
/// are not counted as oracle calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub y_star: YStarSource,
    /// Fill `wall_ms`; otherwise it is written as 0 so rows are reproducible.
    pub timing: bool,
}

impl Default for Metrics {
    fn default() -> Self {
        Self { y_star: YStarSource::AnalyticOnly, timing: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonNestedConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub psi_x: Psi,
    pub psi_y: Psi,
    pub v0_x: f64,
    pub v0_y: f64,
    pub steps: u64,
}

impl NonNestedConfig {
    /// Same ψ and momentum on both players, `v0 = 0`.
    pub fn shared(psi: Psi, eta_x: f64, ratio: f64, beta: f64, steps: u64) -> Self {
        Self {
            eta_x,
            eta_y: ratio * eta_x,
            beta_x: beta,
            beta_y: beta,
            psi_x: psi,
            psi_y: psi,
            v0_x: 0.0,
            v0_y: 0.0,
            steps,
        }
    }

    /// Two-time-scale ratio `η^y / η^x`.
    pub fn ratio(&self) -> f64 {
        self.eta_y / self.eta_x
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta_x > 0.0 && self.eta_y > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// How the nested method moves `x` once the inner loop has stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OuterUpdate {
    /// `v ← v + ‖ĝ‖²`, `x ← x − η ĝ / √v`.
    ScalarAdaGrad,
    /// Any per-coordinate ψ with momentum on `x`.
    Generic { psi: Psi, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeAdaConfig {
    pub eta: f64,
    pub v0: f64,
    pub batch: usize,
    pub criterion: StoppingCriterion,
    pub inner: InnerConfig,
    pub outer: OuterUpdate,
    pub outer_steps: u64,
    /// Stop before an outer step once this many gradient evaluations
    /// (x and y together) have been spent.
    #[serde(default)]
    pub max_oracle_calls: Option<u64>,
}

impl NeAdaConfig {
    /// Scalar-AdaGrad outer loop with the default inner learner.
    pub fn adagrad(eta: f64, v0: f64, criterion: StoppingCriterion, outer_steps: u64) -> Self {
        Self {
            eta,
            v0,
            batch: 1,
            criterion,
            inner: InnerConfig::default(),
            outer: OuterUpdate::ScalarAdaGrad,
            outer_steps,
            max_oracle_calls: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        match self.outer {
            OuterUpdate::ScalarAdaGrad if !(self.v0 > 0.0) => {
                return Err(Error::InvalidConfig(format!("v0 must be positive, got {}", self.v0)))
            }
            _ if !(self.v0 >= 0.0) => {
                return Err(Error::InvalidConfig(format!("v0 must be nonnegative, got {}", self.v0)))
            }
            _ => {}
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        self.inner.validate()
    }

    fn outer_state(&self, dim_x: usize) -> Result<AveragerState> {
        match self.outer {
            OuterUpdate::ScalarAdaGrad => AveragerState::new(dim_x, Psi::AdaGrad, Mode::Scalar, 0.0, self.v0),
            OuterUpdate::Generic { psi, beta } => AveragerState::new(dim_x, psi, Mode::PerCoordinate, beta, self.v0),
        }
    }
}

struct Recorder<'m> {
    metrics: &'m Metrics,
    started: Instant,
}

impl Recorder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row<P: MinimaxProblem + ?Sized>(
        &self,
        problem: &P,
        outer_t: u64,
        x: &[f64],
        y: &[f64],
        inner_iters: u64,
        calls: crate::oracle::OracleCalls,
        v_outer: f64,
    ) -> TrajectoryRow {
        let (grad_x_norm, dist_y_star) = match stationarity(problem, x, y, self.metrics.y_star) {
            Ok(s) => (s.grad_x_norm, s.dist_y),
            Err(_) => (vecops::norm(&problem.grad_x(x, y)), f64::NAN),
        };
        let stationarity = if dist_y_star.is_nan() { f64::NAN } else { grad_x_norm.max(dist_y_star) };
        TrajectoryRow {
            outer_t,
            x: x.to_vec(),
            y: y.to_vec(),
            grad_x_norm,
            grad_map_y: gradient_mapping(problem, x, y),
            dist_y_star,
            stationarity,
            value: problem.value(x, y),
            inner_iters,
            oracle_calls_x: calls.x,
            oracle_calls_y: calls.y,
            v_outer,
            wall_ms: if self.metrics.timing { self.started.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        }
    }
}

fn check_start<P: MinimaxProblem + ?Sized>(problem: &P, x0: &[f64], y0: &[f64]) -> Result<()> {
    check_len(problem.dim_x(), x0.len())?;
    check_len(problem.dim_y(), y0.len())?;
    Ok(())
}

/// Simultaneous adaptive descent-ascent: both gradients come from one sample
/// at `(x_t, y_t)`, then `x` descends and `y` ascends (and is projected).
///
/// A non-finite iterate ends the run with [`RunStatus::DivergedNonfinite`].
pub fn nonnested_run<O: GradientOracle>(
    oracle: &mut O,
    cfg: &NonNestedConfig,
    x0: &[f64],
    y0: &[f64],
    metrics: &Metrics,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(oracle.problem(), x0, y0)?;
    let rec = Recorder { metrics, started: Instant::now() };
    let mut ax = AveragerState::new(x0.len(), cfg.psi_x, Mode::PerCoordinate, cfg.beta_x, cfg.v0_x)?;
    let mut ay = AveragerState::new(y0.len(), cfg.psi_y, Mode::PerCoordinate, cfg.beta_y, cfg.v0_y)?;
    let mut x = x0.to_vec();
    let mut y = oracle.problem().project_y(y0);
    let mut traj = Trajectory::new();

    for t in 0..cfg.steps {
        let (gx, gy) = oracle.sample_grads(&x, &y);
        ax.update(&gx)?;
        ay.update(&gy)?;
        traj.rows.push(rec.row(oracle.problem(), t, &x, &y, 0, oracle.calls(), ax.v_mean()));

        let mut nx = x.clone();
        vecops::axpy(-1.0, &ax.effective_step(cfg.eta_x), &mut nx);
        let mut ny = y.clone();
        vecops::axpy(1.0, &ay.effective_step(cfg.eta_y), &mut ny);
        let ny = oracle.problem().project_y(&ny);
        if !(vecops::all_finite(&nx) && vecops::all_finite(&ny)) {
            traj.status = RunStatus::DivergedNonfinite;
            break;
        }
        x = nx;
        y = ny;
    }
    traj.final_x = x;
    traj.final_y = y;
    Ok(traj)
}

/// Nested adaptive method. Each outer step runs the inner learner from the
/// previous `y` (carrying its accumulator unless `cold_start`) until the
/// criterion fires, then takes one adaptive step on `x` with a minibatch
/// gradient at the new `y`.
pub fn neada_run<O: GradientOracle>(
    oracle: &mut O,
    cfg: &NeAdaConfig,
    x0: &[f64],
    y_init: &[f64],
    metrics: &Metrics,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(oracle.problem(), x0, y_init)?;
    let rec = Recorder { metrics, started: Instant::now() };
    let (dim_y, y_domain) = (oracle.problem().dim_y(), oracle.problem().y_domain());
    let mut learner = cfg.inner.learner(dim_y, y_domain)?;
    let mut outer = cfg.outer_state(x0.len())?;
    let mut x = x0.to_vec();
    let mut y = oracle.problem().project_y(y_init);
    let mut traj = Trajectory::new();

    for t in 0..cfg.outer_steps {
        if cfg.max_oracle_calls.is_some_and(|b| oracle.calls().total() >= b) {
            break;
        }
        if cfg.inner.cold_start {
            learner = cfg.inner.learner(dim_y, y_domain)?;
        }
        let inner = inner_maximize(oracle, &x, &y, &mut learner, cfg.criterion, t, cfg.inner.cap);
        if inner.cap_hit {
            traj.inner_cap_hits += 1;
        }
        if !vecops::all_finite(&inner.y) {
            traj.status = RunStatus::DivergedNonfinite;
            break;
        }
        y = inner.y;

        let g = oracle.sample_grad_x_batch(&x, &y, cfg.batch);
        outer.update(&g)?;
        traj.rows.push(rec.row(oracle.problem(), t, &x, &y, inner.iters, oracle.calls(), outer.v_mean()));

        let mut nx = x.clone();
        vecops::axpy(-1.0, &outer.effective_step(cfg.eta), &mut nx);
        if !vecops::all_finite(&nx) {
            traj.status = RunStatus::DivergedNonfinite;
            break;
        }
        x = nx;
    }
    traj.final_x = x;
    traj.final_y = y;
    Ok(traj)
}
