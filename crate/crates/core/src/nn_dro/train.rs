//! Minibatch nested training for the robust objective.
//!
//! Every outer step samples `batch_size` data indices uniformly with
//! replacement, runs the inner ascent on the sampled perturbations only
//! (each point keeps its own perturbation and its own ψ state across the
//! run), then takes one adaptive step on the weights with the minibatch
//! gradient at the updated perturbations.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::averagers::{AveragerState, Mode, Psi};
use crate::error::{Error, Result};
use crate::nn_dro::data::Dataset;
use crate::nn_dro::dro::{fgsm_eval, DroProblem};
use crate::nn_dro::mlp::MlpParams;
use crate::oracle::seeded_rng;
use crate::subroutine::{StoppingCriterion, Verdict};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroTrainConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    pub psi: Psi,
    pub beta: f64,
    pub batch_size: usize,
    pub epochs: u64,
    /// Inner stopping rule; its outer index is the epoch number.
    pub criterion: StoppingCriterion,
    pub seed: u64,
}

impl DroTrainConfig {
    pub fn adam(criterion: StoppingCriterion, epochs: u64, seed: u64) -> Self {
        Self {
            eta_x: 0.01,
            eta_y: 0.08,
            psi: Psi::Adam { gamma: 0.999 },
            beta: 0.9,
            batch_size: 64,
            epochs,
            criterion,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Full robust objective `f(x, y)` at the end of the epoch.
    pub robust_loss: f64,
    pub clean_loss: f64,
    pub inner_iters: u64,
    pub grad_evals: u64,
    /// `(epsilon, accuracy)` pairs, when a test set was supplied.
    pub fgsm: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroTrainResult {
    /// Robust objective at the initial weights with unperturbed inputs.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub params: MlpParams,
    pub perturbations: Vec<f64>,
}

impl DroTrainResult {
    pub fn best_robust_loss(&self) -> f64 {
        self.epochs.iter().map(|e| e.robust_loss).fold(f64::INFINITY, f64::min)
    }
}

/// Trains from weights initialized with `init_seed`. `fgsm_eps` levels are
/// evaluated on `test` after every epoch.
pub fn train_dro(
    problem: &DroProblem,
    cfg: &DroTrainConfig,
    init_seed: u64,
    test: Option<&Dataset>,
    fgsm_eps: &[f64],
) -> Result<DroTrainResult> {
    if cfg.batch_size == 0 || problem.data.is_empty() {
        return Err(Error::InvalidConfig("batch size and dataset must be nonempty".into()));
    }
    if matches!(cfg.criterion, StoppingCriterion::CriterionI) {
        return Err(Error::InvalidConfig(
            "minibatch robust training uses criterion ii, grad-or-cap or fixed:k".into(),
        ));
    }
    let n = problem.data.len();
    let mut params = MlpParams::random(problem.arch.clone(), init_seed);
    let mut y = problem.clean_y();
    let mut inner: Vec<AveragerState> = (0..n)
        .map(|_| AveragerState::new(2, cfg.psi, Mode::PerCoordinate, cfg.beta, 0.0))
        .collect::<Result<_>>()?;
    let mut outer = AveragerState::new(params.values.len(), cfg.psi, Mode::PerCoordinate, cfg.beta, 0.0)?;
    let mut rng = seeded_rng(cfg.seed);
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let initial_loss = crate::problem::MinimaxProblem::value(problem, &params.values, &y);

    let mut history = Vec::with_capacity(cfg.epochs as usize);
    let mut grad_evals = 0u64;
    for epoch in 0..cfg.epochs {
        let mut epoch_inner = 0u64;
        for _ in 0..steps_per_epoch {
            let mut batch: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..n)).collect();
            let mut unique = batch.clone();
            unique.sort_unstable();
            unique.dedup();

            let mut iters = 0u64;
            loop {
                let mapping = if cfg.criterion.needs_mapping() {
                    grad_evals += unique.len() as u64;
                    let sq: f64 = unique
                        .iter()
                        .map(|&i| {
                            let (_, _, g) = problem.point_grads(&params.values, i, &y[2 * i..2 * i + 2]);
                            g[0] * g[0] + g[1] * g[1]
                        })
                        .sum();
                    Some((sq / unique.len() as f64).sqrt())
                } else {
                    None
                };
                if cfg.criterion.evaluate(epoch, iters, mapping) == Verdict::Stop {
                    break;
                }
                for &i in &unique {
                    let (_, _, g) = problem.point_grads(&params.values, i, &y[2 * i..2 * i + 2]);
                    inner[i].update(&g)?;
                    let step = inner[i].effective_step(cfg.eta_y);
                    y[2 * i] += step[0];
                    y[2 * i + 1] += step[1];
                }
                grad_evals += unique.len() as u64;
                iters += 1;
            }
            epoch_inner += iters;

            let mut gx = vec![0.0; params.values.len()];
            batch.sort_unstable();
            for &i in &batch {
                let (_, gp, _) = problem.point_grads(&params.values, i, &y[2 * i..2 * i + 2]);
                vecops::axpy(1.0 / cfg.batch_size as f64, &gp, &mut gx);
            }
            grad_evals += batch.len() as u64;
            outer.update(&gx)?;
            vecops::axpy(-1.0, &outer.effective_step(cfg.eta_x), &mut params.values);
            if !vecops::all_finite(&params.values) || !vecops::all_finite(&y) {
                return Err(Error::InvalidConfig(format!("robust training diverged in epoch {epoch}")));
            }
        }
        let fgsm = match test {
            Some(t) => fgsm_eps.iter().map(|&e| (e, fgsm_eval(&problem.arch, &params.values, t, e))).collect(),
            None => Vec::new(),
        };
        history.push(EpochRecord {
            epoch,
            robust_loss: crate::problem::MinimaxProblem::value(problem, &params.values, &y),
            clean_loss: problem.clean_loss(&params.values),
            inner_iters: epoch_inner,
            grad_evals,
            fgsm,
        });
    }
    Ok(DroTrainResult { initial_loss, epochs: history, params, perturbations: y })
}
