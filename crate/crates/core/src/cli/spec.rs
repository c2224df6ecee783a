//! A fully serialized single run and its execution.

use serde::{Deserialize, Serialize};

use crate::drivers::{neada_run, nonnested_run, Metrics, NeAdaConfig, NonNestedConfig};
use crate::error::Result;
use crate::nn_dro::{make_dro_problem, make_synthetic_dataset_sized, train_dro, Arch, Dataset, DroTrainConfig, MlpParams};
use crate::oracle::{NoiseSpec, StochasticOracle, RNG_ID};
use crate::problem::{Domain, MinimaxProblem};
use crate::problems::{McCormick, Quadratic};
use crate::subroutine::{alternating_quadratic_stream, play_online, regret, GenAdaGradState};
use crate::trajectory::{RunStatus, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Quadratic { l: f64 },
    McCormick,
    Dro { n_train: usize, n_test: usize, data_seed: u64, gamma: f64, arch: Arch },
    /// Alternating `½(x ∓ 1)²` online stream on `[−1, 1]`.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgoSpec {
    Nonnested(NonNestedConfig),
    Neada(NeAdaConfig),
    DroTrain { cfg: DroTrainConfig, init_seed: u64, fgsm_eps: Vec<f64> },
    /// Generalized AdaGrad; one row per entry of `checkpoints`.
    GenAdaGrad { eta: f64, alpha: f64, v0: f64, checkpoints: Vec<u64> },
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub experiment: String,
    pub problem: ProblemSpec,
    pub sigma: f64,
    pub algo: AlgoSpec,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub timing: bool,
    pub rng: String,
    pub version: String,
}

impl RunSpec {
    pub fn header_lines(&self) -> Result<Vec<String>> {
        Ok(vec![
            format!("# runspec: {}", serde_json::to_string(self)?),
            format!("# rng: {}", self.rng),
        ])
    }

    pub fn from_header(text: &str) -> Result<RunSpec> {
        let line = text
            .lines()
            .find_map(|l| l.strip_prefix("# runspec: "))
            .ok_or_else(|| crate::Error::Usage("--replay: file has no '# runspec:' header".into()))?;
        Ok(serde_json::from_str(line)?)
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "run_id",
    "seed",
    "outer_t",
    "inner_iters",
    "oracle_calls_x",
    "oracle_calls_y",
    "grad_x_norm",
    "grad_map_y",
    "dist_y_star",
    "stationarity",
    "value",
    "v_outer",
    "wall_ms",
];

/// Columns of DRO runs; `fgsm_acc@<eps>` columns follow. Epoch 0 is the
/// initial model.
pub const DRO_COLUMNS: [&str; 7] = ["run_id", "seed", "epoch", "inner_iters", "grad_evals", "robust_loss", "clean_loss"];

pub const REGRET_COLUMNS: [&str; 6] = ["run_id", "seed", "rounds", "regret", "regret_over_log_t", "v_final"];

/// Result table of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub columns: Vec<String>,
    /// Data cells, already formatted. The first two columns are run id and seed.
    pub rows: Vec<Vec<String>>,
    pub status: RunStatus,
}

/// Shortest round-trip text; scientific outside `[1e-4, 1e15)`.
pub(crate) fn fmt(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn trajectory_rows(spec: &RunSpec, traj: &Trajectory) -> Vec<Vec<String>> {
    traj.rows
        .iter()
        .map(|r| {
            vec![
                spec.run_id.clone(),
                spec.seed.to_string(),
                r.outer_t.to_string(),
                r.inner_iters.to_string(),
                r.oracle_calls_x.to_string(),
                r.oracle_calls_y.to_string(),
                fmt(r.grad_x_norm),
                fmt(r.grad_map_y),
                fmt(r.dist_y_star),
                fmt(r.stationarity),
                fmt(r.value),
                fmt(r.v_outer),
                fmt(r.wall_ms),
            ]
        })
        .collect()
}

fn run_driver<P: MinimaxProblem>(spec: &RunSpec, problem: &P) -> Result<Trajectory> {
    let metrics = Metrics { timing: spec.timing, ..Default::default() };
    let mut oracle = StochasticOracle::new(problem, NoiseSpec { sigma: spec.sigma }, spec.seed);
    match &spec.algo {
        AlgoSpec::Nonnested(cfg) => nonnested_run(&mut oracle, cfg, &spec.x0, &spec.y0, &metrics),
        AlgoSpec::Neada(cfg) => neada_run(&mut oracle, cfg, &spec.x0, &spec.y0, &metrics),
        _ => unreachable!("driver algorithms only"),
    }
}

/// Datasets of a DRO problem spec: `(train, test)`.
pub fn dro_datasets(problem: &ProblemSpec) -> Option<(Dataset, Dataset)> {
    match problem {
        ProblemSpec::Dro { n_train, n_test, data_seed, .. } => Some((
            make_synthetic_dataset_sized(*n_train, *data_seed),
            make_synthetic_dataset_sized(*n_test, data_seed.wrapping_add(1)),
        )),
        _ => None,
    }
}

pub fn execute(spec: &RunSpec) -> Result<RunOutput> {
    let traj_cols = || TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match (&spec.problem, &spec.algo) {
        (ProblemSpec::Quadratic { l }, AlgoSpec::Nonnested(_) | AlgoSpec::Neada(_)) => {
            let traj = run_driver(spec, &Quadratic::new(*l))?;
            Ok(RunOutput { spec: spec.clone(), columns: traj_cols(), rows: trajectory_rows(spec, &traj), status: traj.status })
        }
        (ProblemSpec::McCormick, AlgoSpec::Nonnested(_) | AlgoSpec::Neada(_)) => {
            let traj = run_driver(spec, &McCormick)?;
            Ok(RunOutput { spec: spec.clone(), columns: traj_cols(), rows: trajectory_rows(spec, &traj), status: traj.status })
        }
        (ProblemSpec::Dro { gamma, arch, .. }, AlgoSpec::DroTrain { cfg, init_seed, fgsm_eps }) => {
            let (train, test) = dro_datasets(&spec.problem).expect("dro problem");
            let problem = make_dro_problem(train, *gamma, arch.clone());
            let res = train_dro(&problem, cfg, *init_seed, Some(&test), fgsm_eps)?;
            let mut columns: Vec<String> = DRO_COLUMNS.iter().map(|s| s.to_string()).collect();
            columns.extend(fgsm_eps.iter().map(|e| format!("fgsm_acc@{e}")));
            let mut rows = vec![{
                let init = MlpParams::random(arch.clone(), *init_seed);
                let mut r = vec![spec.run_id.clone(), spec.seed.to_string(), "0".into(), "0".into(), "0".into()];
                r.push(fmt(res.initial_loss));
                r.push(fmt(problem.clean_loss(&init.values)));
                r.extend(fgsm_eps.iter().map(|_| "NaN".to_string()));
                r
            }];
            rows.extend(res.epochs.iter().map(|e| {
                let mut r = vec![
                    spec.run_id.clone(),
                    spec.seed.to_string(),
                    (e.epoch + 1).to_string(),
                    e.inner_iters.to_string(),
                    e.grad_evals.to_string(),
                    fmt(e.robust_loss),
                    fmt(e.clean_loss),
                ];
                r.extend(e.fgsm.iter().map(|(_, a)| fmt(*a)));
                r
            }));
            Ok(RunOutput { spec: spec.clone(), columns, rows, status: RunStatus::Completed })
        }
        (ProblemSpec::Alternating, AlgoSpec::GenAdaGrad { eta, alpha, v0, checkpoints }) => {
            let domain = Domain::Box { lo: -1.0, hi: 1.0 };
            let rows = checkpoints
                .iter()
                .map(|&t| {
                    let losses = alternating_quadratic_stream(t as usize);
                    let mut learner = GenAdaGradState::new(*eta, *alpha, *v0, spec.x0.clone(), domain)?;
                    let iterates = play_online(&mut learner, &losses);
                    let r = regret(&losses, &iterates, domain)?;
                    Ok(vec![
                        spec.run_id.clone(),
                        spec.seed.to_string(),
                        t.to_string(),
                        fmt(r),
                        fmt(r / (t as f64).ln()),
                        fmt(learner.v),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RunOutput {
                spec: spec.clone(),
                columns: REGRET_COLUMNS.iter().map(|s| s.to_string()).collect(),
                rows,
                status: RunStatus::Completed,
            })
        }
        (p, a) => Err(crate::Error::Usage(format!("algorithm {a:?} does not apply to problem {p:?}"))),
    }
}

pub fn new_spec(run_id: String, experiment: &str, problem: ProblemSpec, sigma: f64, algo: AlgoSpec, seed: u64) -> RunSpec {
    let (dx, dy) = match &problem {
        ProblemSpec::Quadratic { .. } => (1, 1),
        ProblemSpec::McCormick => (2, 2),
        ProblemSpec::Alternating => (1, 0),
        ProblemSpec::Dro { .. } => (0, 0),
    };
    RunSpec {
        run_id,
        experiment: experiment.into(),
        problem,
        sigma,
        algo,
        seed,
        x0: match dx {
            0 => vec![],
            _ if experiment == "regret" => vec![0.0],
            n => vec![1.0; n],
        },
        y0: vec![0.0; dy],
        timing: false,
        rng: RNG_ID.into(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
}
