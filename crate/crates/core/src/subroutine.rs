//! Inner maximizers for the nested framework: the generalized AdaGrad learner
//! (stepsize `η / v^α`), the averaged adaptive learners, the stopping
//! criteria that end an inner loop, and online regret measurement.

use serde::{Deserialize, Serialize};

use crate::averagers::{AveragerState, Mode, Psi};
use crate::error::{Error, Result};
use crate::oracle::GradientOracle;
use crate::problem::{mapping_from_grad, Domain};
use crate::vecops;

/// Radius of the ball that stands in for an unbounded `Y`. Inactive on every
/// shipped problem.
pub const UNBOUNDED_BALL_RADIUS: f64 = 1e6;

/// Iteration cap for criterion-I inner loops.
pub const CRITERION_I_CAP: u64 = 1_000_000;

/// The compact set the inner learner projects onto.
pub fn inner_domain(y_domain: Domain) -> Domain {
    match y_domain {
        Domain::Unbounded => Domain::Ball { radius: UNBOUNDED_BALL_RADIUS },
        d => d,
    }
}

/// Generalized AdaGrad: `v ← v + ‖g‖²`, `x ← P(x − η g / v^α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenAdaGradState {
    pub eta: f64,
    pub alpha: f64,
    pub v: f64,
    pub x: Vec<f64>,
    pub domain: Domain,
}

impl GenAdaGradState {
    pub fn new(eta: f64, alpha: f64, v0: f64, x0: Vec<f64>, domain: Domain) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(v0 > 0.0) {
            return Err(Error::InvalidConfig(format!("v0 must be positive, got {v0}")));
        }
        let domain = inner_domain(domain);
        let x = domain.project(&x0);
        Ok(Self { eta, alpha, v: v0, x, domain })
    }

    /// One descent step on the gradient `g` taken at the current iterate.
    /// Maximizers pass the negated ascent direction.
    pub fn step(&mut self, g: &[f64]) {
        self.v += vecops::norm_sq(g);
        let lr = self.eta / self.v.powf(self.alpha);
        vecops::axpy(-lr, g, &mut self.x);
        self.domain.project_in_place(&mut self.x);
    }
}

/// When an inner loop at outer index `t` stops.
/// Serialized as its flag spelling (`i`, `ii`, `grad-or-cap`, `fixed:k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StoppingCriterion {
    /// Squared gradient mapping at most `1/(t+1)`.
    CriterionI,
    /// Exactly `t+1` inner iterations.
    CriterionII,
    /// Mapping from a fresh sample below `1/(t+1)`, or `t+1` iterations done.
    GradOrCap,
    /// Exactly `k` inner iterations.
    FixedCap(u64),
}

impl From<StoppingCriterion> for String {
    fn from(c: StoppingCriterion) -> String {
        c.label()
    }
}

impl TryFrom<String> for StoppingCriterion {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

/// Verdict of one criterion evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Stop,
}

impl StoppingCriterion {
    pub fn threshold(outer_t: u64) -> f64 {
        1.0 / (outer_t as f64 + 1.0)
    }

    /// Pure decision from the outer index, the iterations done so far and the
    /// measured mapping (if this criterion measures one).
    pub fn evaluate(&self, outer_t: u64, iters: u64, mapping: Option<f64>) -> Verdict {
        let thr = Self::threshold(outer_t);
        let stop = match *self {
            StoppingCriterion::CriterionI => mapping.is_some_and(|m| m * m <= thr),
            StoppingCriterion::CriterionII => iters >= outer_t + 1,
            StoppingCriterion::GradOrCap => iters >= outer_t + 1 || mapping.is_some_and(|m| m <= thr),
            StoppingCriterion::FixedCap(k) => iters >= k,
        };
        if stop {
            Verdict::Stop
        } else {
            Verdict::Continue
        }
    }

    pub fn needs_mapping(&self) -> bool {
        matches!(self, StoppingCriterion::CriterionI | StoppingCriterion::GradOrCap)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "i" => Ok(StoppingCriterion::CriterionI),
            "ii" => Ok(StoppingCriterion::CriterionII),
            "grad-or-cap" => Ok(StoppingCriterion::GradOrCap),
            _ => match s.strip_prefix("fixed:").map(str::parse::<u64>) {
                Some(Ok(k)) => Ok(StoppingCriterion::FixedCap(k)),
                _ => Err(Error::Usage(format!("--criterion: expected i|ii|grad-or-cap|fixed:k, got '{s}'"))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            StoppingCriterion::CriterionI => "i".into(),
            StoppingCriterion::CriterionII => "ii".into(),
            StoppingCriterion::GradOrCap => "grad-or-cap".into(),
            StoppingCriterion::FixedCap(k) => format!("fixed:{k}"),
        }
    }
}

/// Which learner runs the inner ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnerKind {
    GenAdaGrad { eta: f64, alpha: f64, v0: f64 },
    /// Per-coordinate ψ learner (Adam, AMSGrad, ...) with momentum `beta`.
    Averaged { eta: f64, psi: Psi, beta: f64, v0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub kind: InnerKind,
    /// Reset the learner state at every outer step instead of carrying it.
    pub cold_start: bool,
    /// Iteration cap applied to criterion-I loops.
    pub cap: u64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            kind: InnerKind::GenAdaGrad { eta: 1.0, alpha: 0.5, v0: 1.0 },
            cold_start: false,
            cap: CRITERION_I_CAP,
        }
    }
}

impl InnerConfig {
    pub fn with_eta(mut self, new_eta: f64) -> Self {
        match &mut self.kind {
            InnerKind::GenAdaGrad { eta, .. } | InnerKind::Averaged { eta, .. } => *eta = new_eta,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.learner(1, Domain::Unbounded).map(|_| ())
    }

    pub fn learner(&self, dim_y: usize, y_domain: Domain) -> Result<InnerLearner> {
        Ok(match self.kind {
            InnerKind::GenAdaGrad { eta, alpha, v0 } => {
                InnerLearner::GenAdaGrad(GenAdaGradState::new(eta, alpha, v0, vec![0.0; dim_y], y_domain)?)
            }
            InnerKind::Averaged { eta, psi, beta, v0 } => {
                if !(eta > 0.0) {
                    return Err(Error::InvalidConfig(format!("inner eta must be positive, got {eta}")));
                }
                InnerLearner::Averaged {
                    state: AveragerState::new(dim_y, psi, Mode::PerCoordinate, beta, v0)?,
                    eta,
                    domain: inner_domain(y_domain),
                }
            }
        })
    }
}

/// Inner learner state carried across outer steps.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerLearner {
    GenAdaGrad(GenAdaGradState),
    Averaged { state: AveragerState, eta: f64, domain: Domain },
}

impl InnerLearner {
    /// Ascent step from `y` along the sampled `∇_y`.
    pub fn ascend(&mut self, y: &[f64], grad_y: &[f64]) -> Vec<f64> {
        match self {
            InnerLearner::GenAdaGrad(s) => {
                s.x.clear();
                s.x.extend_from_slice(y);
                let neg: Vec<f64> = grad_y.iter().map(|g| -g).collect();
                s.step(&neg);
                s.x.clone()
            }
            InnerLearner::Averaged { state, eta, domain } => {
                state.update(grad_y).expect("inner gradient has the y dimension");
                let step = state.effective_step(*eta);
                let mut out = y.to_vec();
                vecops::axpy(1.0, &step, &mut out);
                domain.project_in_place(&mut out);
                out
            }
        }
    }

    /// Scalar summary of the accumulator (for warm-start continuity checks).
    pub fn accumulator(&self) -> f64 {
        match self {
            InnerLearner::GenAdaGrad(s) => s.v,
            InnerLearner::Averaged { state, .. } => state.v_mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub y: Vec<f64>,
    pub iters: u64,
    /// Criterion I ran into its cap; `y` is the best iterate seen.
    pub cap_hit: bool,
}

/// Runs `learner` on `f(x_fixed, ·)` from `y_start` until `criterion` fires
/// for outer index `outer_t`. The criterion is checked before the first step.
pub fn inner_maximize<O: GradientOracle>(
    oracle: &mut O,
    x_fixed: &[f64],
    y_start: &[f64],
    learner: &mut InnerLearner,
    criterion: StoppingCriterion,
    outer_t: u64,
    cap: u64,
) -> InnerOutcome {
    let deterministic = oracle.is_deterministic();
    let mut y = y_start.to_vec();
    let mut iters = 0u64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let mut reusable = None;
        let mapping = if criterion.needs_mapping() {
            let g = oracle.sample_grad_y(x_fixed, &y);
            let m = mapping_from_grad(oracle.problem(), &y, &g);
            if best.as_ref().is_none_or(|(b, _)| m < *b) {
                best = Some((m, y.clone()));
            }
            if deterministic {
                reusable = Some(g);
            }
            Some(m)
        } else {
            None
        };
        if criterion.evaluate(outer_t, iters, mapping) == Verdict::Stop {
            return InnerOutcome { y, iters, cap_hit: false };
        }
        if !vecops::all_finite(&y) {
            return InnerOutcome { y, iters, cap_hit: false };
        }
        if criterion == StoppingCriterion::CriterionI && iters >= cap {
            let y = best.map_or(y, |(_, b)| b);
            return InnerOutcome { y, iters, cap_hit: true };
        }
        let g = match reusable {
            Some(g) => g,
            None => oracle.sample_grad_y(x_fixed, &y),
        };
        y = learner.ascend(&y, &g);
        iters += 1;
    }
}

/// Strongly convex online loss used by [`regret`].
pub trait OnlineLoss {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// `(center, curvature)` when the loss is `½·curvature·‖x − center‖²`.
    fn as_quadratic(&self) -> Option<(&[f64], f64)> {
        None
    }
}

/// `½·curvature·‖x − center‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    pub center: Vec<f64>,
    pub curvature: f64,
}

impl QuadraticLoss {
    pub fn new(center: Vec<f64>, curvature: f64) -> Self {
        Self { center, curvature }
    }
}

impl OnlineLoss for QuadraticLoss {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * vecops::dist(x, &self.center).powi(2)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| self.curvature * (a - c)).collect()
    }

    fn as_quadratic(&self) -> Option<(&[f64], f64)> {
        Some((&self.center, self.curvature))
    }
}

/// Plays `learner` against `losses` and returns the iterate sequence
/// `x_0, …, x_{T−1}` at which each loss was suffered.
pub fn play_online<L: OnlineLoss>(learner: &mut GenAdaGradState, losses: &[L]) -> Vec<Vec<f64>> {
    let mut iterates = Vec::with_capacity(losses.len());
    for loss in losses {
        iterates.push(learner.x.clone());
        let g = loss.grad(&learner.x);
        learner.step(&g);
    }
    iterates
}

/// `Σ f_t(x_t) − min_{x ∈ X} Σ f_t(x)`.
pub fn regret<L: OnlineLoss>(losses: &[L], iterates: &[Vec<f64>], domain: Domain) -> Result<f64> {
    if !domain.is_compact() {
        return Err(Error::CompactDomainRequired);
    }
    if losses.len() != iterates.len() {
        return Err(Error::Shape { expected: losses.len(), got: iterates.len() });
    }
    if losses.is_empty() {
        return Ok(0.0);
    }
    let suffered: f64 = losses.iter().zip(iterates).map(|(l, x)| l.value(x)).sum();
    let total = |x: &[f64]| losses.iter().map(|l| l.value(x)).sum::<f64>();
    let comparator = best_fixed_point(losses, &iterates[0], domain);
    Ok(suffered - total(&comparator))
}

fn best_fixed_point<L: OnlineLoss>(losses: &[L], hint: &[f64], domain: Domain) -> Vec<f64> {
    let dim = hint.len();
    // Sum of quadratics is a quadratic centered at the curvature-weighted mean.
    if let Some(quads) = losses.iter().map(|l| l.as_quadratic()).collect::<Option<Vec<_>>>() {
        let weight: f64 = quads.iter().map(|(_, w)| w).sum();
        let mut mean = vec![0.0; dim];
        for (c, w) in &quads {
            vecops::axpy(w / weight, c, &mut mean);
        }
        return domain.project(&mean);
    }
    let total = |x: &[f64]| losses.iter().map(|l| l.value(x)).sum::<f64>();
    match (dim, domain) {
        (1, Domain::Box { lo, hi }) => vec![golden_section(|t| total(&[t]), lo, hi, 1e-12)],
        (1, Domain::Ball { radius }) => vec![golden_section(|t| total(&[t]), -radius, radius, 1e-12)],
        _ => {
            // Projected gradient descent on the convex sum.
            let mut x = domain.project(hint);
            let mut best = (total(&x), x.clone());
            for k in 1..=20_000u32 {
                let mut g = vec![0.0; dim];
                for l in losses {
                    vecops::axpy(1.0, &l.grad(&x), &mut g);
                }
                let gn = vecops::norm(&g);
                if gn < 1e-14 {
                    break;
                }
                vecops::axpy(-1.0 / (gn * (k as f64).sqrt()), &g, &mut x);
                domain.project_in_place(&mut x);
                let v = total(&x);
                if v < best.0 {
                    best = (v, x.clone());
                }
            }
            best.1
        }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// The `T`-round stream `½(x − c_t)²` with `c_t = +1, −1, +1, …`.
pub fn alternating_quadratic_stream(rounds: usize) -> Vec<QuadraticLoss> {
    (0..rounds)
        .map(|t| QuadraticLoss::new(vec![if t % 2 == 0 { 1.0 } else { -1.0 }], 1.0))
        .collect()
}
