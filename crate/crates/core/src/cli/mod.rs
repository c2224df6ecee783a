//! Experiment runner: expands flags into run specs, fans the runs out over a
//! worker pool and writes one CSV per (config, seed) plus a per-config mean.

mod output;
mod spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::averagers::Psi;
use crate::drivers::{NeAdaConfig, NonNestedConfig, OuterUpdate};
use crate::error::{Error, Result};
use crate::nn_dro::{Arch, DroTrainConfig};
use crate::subroutine::{InnerConfig, InnerKind, StoppingCriterion};
use crate::trajectory::RunStatus;

pub use output::{aggregate, mean_file, read_table, render, render_mean, run_file, write_atomic};
pub use spec::{
    dro_datasets, execute, new_spec, AlgoSpec, ProblemSpec, RunOutput, RunSpec, DRO_COLUMNS, REGRET_COLUMNS,
    TRAJECTORY_COLUMNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Bilinear-coupled quadratic with a tunable learning-rate ratio.
    Lemma1,
    /// Stochastic McCormick composite.
    Mccormick,
    /// Robust training of a small network on ring data.
    Dro,
    /// Regret of generalized AdaGrad on an alternating quadratic stream.
    Regret,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Lemma1 => "lemma1",
            Experiment::Mccormick => "mccormick",
            Experiment::Dro => "dro",
            Experiment::Regret => "regret",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Nonnested,
    Neada,
    NeadaAdagrad,
    Genadagrad,
}

#[derive(Debug, Parser)]
#[command(name = "neada", version, about = "Adaptive minimax experiments; writes CSV trajectories.")]
pub struct Cli {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Algorithms to run [default: per experiment].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algo: Vec<Algo>,
    /// Averaging functions: gda, adagrad, adam, amsgrad.
    #[arg(long, value_delimiter = ',')]
    pub psi: Vec<String>,
    #[arg(long)]
    pub eta_x: Option<f64>,
    #[arg(long)]
    pub eta_y: Option<f64>,
    /// Learning-rate ratios eta_y / eta_x.
    #[arg(long, alias = "ratios", value_delimiter = ',')]
    pub ratio: Vec<f64>,
    #[arg(long)]
    pub beta_x: Option<f64>,
    #[arg(long)]
    pub beta_y: Option<f64>,
    #[arg(long, default_value_t = 0.999)]
    pub gamma_ema: f64,
    #[arg(long)]
    pub v0: Option<f64>,
    /// Generalized AdaGrad exponent; a list for the regret experiment.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Inner stopping criteria: i, ii, grad-or-cap, fixed:k.
    #[arg(long, value_delimiter = ',')]
    pub criterion: Vec<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker count; NEADA_JOBS overrides.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Coupling constant of the quadratic.
    #[arg(long = "L", default_value_t = 2.0)]
    pub l: f64,
    /// Gradient-evaluation budget per run.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Fill the wall_ms column (rows are then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value_t = 50)]
    pub epochs: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02")]
    pub fgsm_eps: Vec<f64>,
    /// Robustness penalty of the DRO objective.
    #[arg(long, default_value_t = 1.3)]
    pub gamma: f64,
    #[arg(long, default_value = "2-16-16-1")]
    pub arch: String,
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    /// Also write the DRO train/test sets as CSV into this directory.
    #[arg(long)]
    pub dump_dataset: Option<PathBuf>,
    /// Re-execute the run spec stored in an emitted CSV and print the file.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn resolve_etas(cli: &Cli, default_eta_x: f64) -> Result<Vec<(f64, f64, f64)>> {
    let ratios = if cli.ratio.is_empty() { vec![1.0] } else { cli.ratio.clone() };
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(usage(format!("--ratio: ratios must be positive, got {r}")));
    }
    for (flag, v) in [("--eta-x", cli.eta_x), ("--eta-y", cli.eta_y)] {
        if let Some(v) = v.filter(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(usage(format!("{flag}: learning rate must be positive, got {v}")));
        }
    }
    match (cli.eta_x, cli.eta_y) {
        (Some(x), Some(y)) if cli.ratio.is_empty() => Ok(vec![(x, y, y / x)]),
        (Some(_), Some(_)) => Err(usage("--ratio: cannot be combined with both --eta-x and --eta-y")),
        (Some(x), None) => Ok(ratios.iter().map(|&r| (x, r * x, r)).collect()),
        (None, Some(y)) => Ok(ratios.iter().map(|&r| (y / r, y, r)).collect()),
        (None, None) => Ok(ratios.iter().map(|&r| (default_eta_x, r * default_eta_x, r)).collect()),
    }
}

fn default_beta(exp: Experiment, psi: Psi) -> f64 {
    match (exp, psi) {
        (Experiment::Lemma1, _) => 0.0,
        (_, Psi::Adam { .. } | Psi::AmsGrad { .. }) => 0.9,
        _ => 0.0,
    }
}

fn check_unit(flag: &str, v: f64) -> Result<f64> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(usage(format!("{flag}: must lie in [0, 1), got {v}")))
    }
}

fn criteria(cli: &Cli, default: &str) -> Result<Vec<StoppingCriterion>> {
    if cli.criterion.is_empty() {
        default.split(',').map(StoppingCriterion::parse).collect()
    } else {
        cli.criterion.iter().map(|c| StoppingCriterion::parse(c)).collect()
    }
}

fn file_label(c: &StoppingCriterion) -> String {
    c.label().replace(':', "")
}

/// Expands the flags into one spec per (config, seed), configs outermost.
pub fn plan(cli: &Cli) -> Result<Vec<RunSpec>> {
    let exp = cli.experiment.ok_or_else(|| usage("--experiment is required"))?;
    if cli.seeds == 0 {
        return Err(usage("--seeds: need at least one seed"));
    }
    if !(cli.sigma >= 0.0 && cli.sigma.is_finite()) {
        return Err(usage(format!("--sigma: must be nonnegative, got {}", cli.sigma)));
    }
    if !(cli.gamma_ema > 0.0 && cli.gamma_ema < 1.0) {
        return Err(usage(format!("--gamma-ema: must lie in (0, 1), got {}", cli.gamma_ema)));
    }
    let algos = if cli.algo.is_empty() {
        match exp {
            Experiment::Lemma1 => vec![Algo::Nonnested],
            Experiment::Mccormick => vec![Algo::Nonnested, Algo::Neada],
            Experiment::Dro => vec![Algo::Neada],
            Experiment::Regret => vec![Algo::Genadagrad],
        }
    } else {
        cli.algo.clone()
    };
    for a in &algos {
        let ok = match exp {
            Experiment::Lemma1 | Experiment::Mccormick => *a != Algo::Genadagrad,
            Experiment::Dro => *a == Algo::Neada,
            Experiment::Regret => *a == Algo::Genadagrad,
        };
        if !ok {
            return Err(usage(format!("--algo: {a:?} is not available for --experiment {}", exp.name())));
        }
    }
    let psi_names: Vec<String> = if cli.psi.is_empty() {
        match exp {
            Experiment::Lemma1 => ["gda", "adagrad", "adam", "amsgrad"].map(String::from).to_vec(),
            _ => vec!["adam".into()],
        }
    } else {
        cli.psi.clone()
    };
    let psis: Vec<Psi> = psi_names.iter().map(|p| Psi::parse(p, cli.gamma_ema)).collect::<Result<_>>()?;
    if let Some(b) = cli.beta_x {
        check_unit("--beta-x", b)?;
    }
    if let Some(b) = cli.beta_y {
        check_unit("--beta-y", b)?;
    }
    if cli.batch == Some(0) {
        return Err(usage("--batch: must be at least 1"));
    }
    if let Some(v) = cli.v0.filter(|v| !(*v >= 0.0)) {
        return Err(usage(format!("--v0: must be nonnegative, got {v}")));
    }

    let seeds: Vec<u64> = (0..cli.seeds).map(|k| cli.seed_base + k).collect();
    let mut configs: Vec<(String, ProblemSpec, AlgoSpec)> = Vec::new();

    match exp {
        Experiment::Lemma1 | Experiment::Mccormick => {
            let problem = if exp == Experiment::Lemma1 {
                if !(cli.l > 0.0 && cli.l.is_finite()) {
                    return Err(usage(format!("--L: must be positive, got {}", cli.l)));
                }
                ProblemSpec::Quadratic { l: cli.l }
            } else {
                ProblemSpec::McCormick
            };
            let steps = cli.steps.unwrap_or(10_000);
            let etas = resolve_etas(cli, 0.01)?;
            for algo in &algos {
                for &(eta_x, eta_y, r) in &etas {
                    let rtag = fmt_num(r);
                    match algo {
                        Algo::Nonnested => {
                            let steps = cli.budget.map_or(steps, |b| steps.min(b / 2));
                            for &psi in &psis {
                                let v0 = cli.v0.unwrap_or(0.0);
                                let cfg = NonNestedConfig {
                                    eta_x,
                                    eta_y,
                                    beta_x: cli.beta_x.unwrap_or(default_beta(exp, psi)),
                                    beta_y: cli.beta_y.unwrap_or(default_beta(exp, psi)),
                                    psi_x: psi,
                                    psi_y: psi,
                                    v0_x: v0,
                                    v0_y: v0,
                                    steps,
                                };
                                configs.push((
                                    format!("nonnested-{}-r{rtag}", psi.label()),
                                    problem.clone(),
                                    AlgoSpec::Nonnested(cfg),
                                ));
                            }
                        }
                        Algo::Neada => {
                            for crit in criteria(cli, "grad-or-cap")? {
                                for &psi in &psis {
                                    let v0 = cli.v0.unwrap_or(0.0);
                                    let cfg = NeAdaConfig {
                                        eta: eta_x,
                                        v0,
                                        batch: cli.batch.unwrap_or(1),
                                        criterion: crit,
                                        inner: InnerConfig {
                                            kind: InnerKind::Averaged {
                                                eta: eta_y,
                                                psi,
                                                beta: cli.beta_y.unwrap_or(default_beta(exp, psi)),
                                                v0,
                                            },
                                            ..InnerConfig::default()
                                        },
                                        outer: OuterUpdate::Generic {
                                            psi,
                                            beta: cli.beta_x.unwrap_or(default_beta(exp, psi)),
                                        },
                                        outer_steps: steps,
                                        max_oracle_calls: cli.budget,
                                    };
                                    configs.push((
                                        format!("neada-{}-{}-r{rtag}", psi.label(), file_label(&crit)),
                                        problem.clone(),
                                        AlgoSpec::Neada(cfg),
                                    ));
                                }
                            }
                        }
                        Algo::NeadaAdagrad => {
                            let alpha = *cli.alpha.first().unwrap_or(&0.5);
                            for crit in criteria(cli, "grad-or-cap")? {
                                let mut cfg = NeAdaConfig::adagrad(eta_x, cli.v0.unwrap_or(1.0), crit, steps);
                                cfg.batch = cli.batch.unwrap_or(1);
                                cfg.max_oracle_calls = cli.budget;
                                cfg.inner.kind = InnerKind::GenAdaGrad { eta: eta_y, alpha, v0: 1.0 };
                                configs.push((
                                    format!("neada-adagrad-{}-r{rtag}", file_label(&crit)),
                                    problem.clone(),
                                    AlgoSpec::Neada(cfg),
                                ));
                            }
                        }
                        Algo::Genadagrad => unreachable!(),
                    }
                }
            }
        }
        Experiment::Dro => {
            let arch = Arch::parse(&cli.arch)
                .filter(|a| a.input_dim() == 2)
                .ok_or_else(|| usage(format!("--arch: expected widths like 2-16-16-1, got '{}'", cli.arch)))?;
            if cli.n_train == 0 || cli.n_test == 0 {
                return Err(usage("--n-train/--n-test: datasets must be nonempty"));
            }
            if !(cli.gamma > 0.0) {
                return Err(usage(format!("--gamma: must be positive, got {}", cli.gamma)));
            }
            if !cli.ratio.is_empty() {
                return Err(usage("--ratio: not used by --experiment dro; set --eta-x and --eta-y"));
            }
            let problem = ProblemSpec::Dro {
                n_train: cli.n_train,
                n_test: cli.n_test,
                data_seed: cli.data_seed,
                gamma: cli.gamma,
                arch,
            };
            for crit in criteria(cli, "ii,fixed:15")? {
                if crit == StoppingCriterion::CriterionI {
                    return Err(usage("--criterion: robust training supports ii, grad-or-cap and fixed:k"));
                }
                for &psi in &psis {
                    let mut cfg = DroTrainConfig::adam(crit, cli.epochs, 0);
                    cfg.psi = psi;
                    cfg.beta = cli.beta_y.or(cli.beta_x).unwrap_or(default_beta(exp, psi));
                    cfg.eta_x = cli.eta_x.unwrap_or(cfg.eta_x);
                    cfg.eta_y = cli.eta_y.unwrap_or(cfg.eta_y);
                    cfg.batch_size = cli.batch.unwrap_or(cfg.batch_size);
                    configs.push((
                        format!("dro-{}-{}", psi.label(), file_label(&crit)),
                        problem.clone(),
                        AlgoSpec::DroTrain { cfg, init_seed: 0, fgsm_eps: cli.fgsm_eps.clone() },
                    ));
                }
            }
        }
        Experiment::Regret => {
            let steps = cli.steps.unwrap_or(100_000);
            if steps < 10 {
                return Err(usage("--steps: regret needs at least 10 rounds"));
            }
            let mut checkpoints: Vec<u64> = std::iter::successors(Some(10u64), |t| t.checked_mul(10))
                .take_while(|&t| t <= steps)
                .collect();
            if checkpoints.last() != Some(&steps) {
                checkpoints.push(steps);
            }
            let alphas = if cli.alpha.is_empty() { vec![0.5] } else { cli.alpha.clone() };
            for alpha in alphas {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(usage(format!("--alpha: must lie in (0, 1], got {alpha}")));
                }
                configs.push((
                    format!("genadagrad-a{}", fmt_num(alpha)),
                    ProblemSpec::Alternating,
                    AlgoSpec::GenAdaGrad {
                        eta: cli.eta_x.unwrap_or(1.0),
                        alpha,
                        v0: cli.v0.unwrap_or(1.0),
                        checkpoints: checkpoints.clone(),
                    },
                ));
            }
        }
    }

    let mut specs = Vec::with_capacity(configs.len() * seeds.len());
    for (run_id, problem, algo) in configs {
        for &seed in &seeds {
            let mut algo = algo.clone();
            if let AlgoSpec::DroTrain { cfg, init_seed, .. } = &mut algo {
                cfg.seed = seed;
                *init_seed = seed.wrapping_add(1 << 32);
            }
            let mut s = new_spec(run_id.clone(), exp.name(), problem.clone(), cli.sigma, algo, seed);
            s.timing = cli.timing;
            for (flag, given, slot) in [("--x0", &cli.x0, &mut s.x0), ("--y0", &cli.y0, &mut s.y0)] {
                if let Some(v) = given {
                    if v.len() != slot.len() {
                        return Err(usage(format!("{flag}: expected {} values, got {}", slot.len(), v.len())));
                    }
                    *slot = v.clone();
                }
            }
            specs.push(s);
        }
    }
    Ok(specs)
}

fn jobs(cli: &Cli) -> Result<usize> {
    match std::env::var("NEADA_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&j| j > 0)
            .ok_or_else(|| usage(format!("NEADA_JOBS: expected a positive integer, got '{v}'"))),
        Err(_) if cli.jobs == 0 => Err(usage("--jobs: must be at least 1")),
        Err(_) => Ok(cli.jobs),
    }
}

/// Runs every spec on a pool of `jobs` workers; results come back in spec order.
pub fn run_all(specs: &[RunSpec], jobs: usize) -> Result<Vec<RunOutput>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| specs.par_iter().map(execute).collect())
}

/// Writes per-seed files and per-config means. Returns the paths written.
pub fn write_outputs(dir: &Path, outputs: &[RunOutput]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for out in outputs {
        let path = run_file(dir, &out.spec.run_id, out.spec.seed);
        write_atomic(&path, &render(out)?)?;
        written.push(path);
    }
    let mut start = 0;
    while start < outputs.len() {
        let id = &outputs[start].spec.run_id;
        let end = start + outputs[start..].iter().take_while(|o| &o.spec.run_id == id).count();
        let group: Vec<&RunOutput> = outputs[start..end].iter().collect();
        let path = mean_file(dir, id);
        write_atomic(&path, &render_mean(&group)?)?;
        written.push(path);
        start = end;
    }
    Ok(written)
}

fn replay(path: &Path, out_dir: Option<&Path>, stdout: &mut dyn Write) -> Result<RunStatus> {
    let text = std::fs::read_to_string(path)?;
    let spec = RunSpec::from_header(&text)?;
    let out = execute(&spec)?;
    let rendered = render(&out)?;
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_atomic(&run_file(dir, &spec.run_id, spec.seed), &rendered)?;
        }
        None => stdout.write_all(rendered.as_bytes())?,
    }
    Ok(out.status)
}

fn dump_datasets(dir: &Path, specs: &[RunSpec]) -> Result<()> {
    if let Some((train, test)) = specs.first().and_then(|s| dro_datasets(&s.problem)) {
        std::fs::create_dir_all(dir)?;
        train.write_csv(std::fs::File::create(dir.join("train.csv"))?)?;
        test.write_csv(std::fs::File::create(dir.join("test.csv"))?)?;
        Ok(())
    } else {
        Err(usage("--dump-dataset: only available with --experiment dro"))
    }
}

fn out_was_given(args: &[OsString]) -> bool {
    args.iter().any(|a| a.to_str().is_some_and(|s| s == "--out" || s.starts_with("--out=")))
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = (|| -> Result<RunStatus> {
        if let Some(path) = &cli.replay {
            let dir = out_was_given(&args).then_some(cli.out.as_path());
            return replay(path, dir, stdout);
        }
        let specs = plan(&cli)?;
        let jobs = jobs(&cli)?;
        if let Some(dir) = &cli.dump_dataset {
            dump_datasets(dir, &specs)?;
        }
        let outputs = run_all(&specs, jobs)?;
        let written = write_outputs(&cli.out, &outputs)?;
        let _ = writeln!(stdout, "wrote {} files to {}", written.len(), cli.out.display());
        let diverged: Vec<&RunOutput> = outputs.iter().filter(|o| o.status == RunStatus::DivergedNonfinite).collect();
        for o in &diverged {
            let _ = writeln!(stderr, "diverged-nonfinite: {} seed {}", o.spec.run_id, o.spec.seed);
        }
        Ok(if diverged.is_empty() { RunStatus::Completed } else { RunStatus::DivergedNonfinite })
    })();
    match result {
        Ok(RunStatus::Completed) => EXIT_OK,
        Ok(RunStatus::DivergedNonfinite) => EXIT_DIVERGED,
        Err(e @ (Error::Usage(_) | Error::InvalidConfig(_))) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}
