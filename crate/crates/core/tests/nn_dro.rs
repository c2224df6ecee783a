mod common;

use common::{fd_grad, fd_grad_x, fd_grad_y, rel_err, rng, uniform_vec};
use neada::nn_dro::{
    forward_backward, make_dro_problem, make_synthetic_dataset, make_synthetic_dataset_sized, train_dro, Arch, Dataset,
    DroTrainConfig, MlpParams,
};
use neada::{Error, MinimaxProblem, StoppingCriterion};
use rand::Rng as _;

const PROBES: usize = 50;
const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

#[test]
fn backprop_matches_finite_differences() {
    let mut r = rng(21);
    for arch in [Arch::default_dro(), Arch::new(vec![2, 5, 3, 1]), Arch::new(vec![2, 1])] {
        for k in 0..PROBES {
            let params = MlpParams::random(arch.clone(), 100 + k as u64).values;
            let input = uniform_vec(&mut r, 2, 2.5);
            let label = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let bp = forward_backward(&arch, &params, &input, label);
            let loss = |p: &[f64], v: &[f64]| forward_backward(&arch, p, v, label).loss;
            let gp = fd_grad(|p| loss(p, &input), &params, H);
            let gi = fd_grad(|v| loss(&params, v), &input, H);
            assert!(rel_err(&bp.grad_params, &gp, 1e-8) <= TOL, "{} params probe {k}", arch.label());
            assert!(rel_err(&bp.grad_input, &gi, 1e-8) <= TOL, "{} input probe {k}", arch.label());
        }
    }
}

#[test]
fn dro_objective_gradients_match_finite_differences() {
    let data = make_synthetic_dataset_sized(10, 22);
    let p = make_dro_problem(data, 1.3, Arch::new(vec![2, 6, 6, 1]));
    let mut r = rng(23);
    for k in 0..PROBES {
        let x = MlpParams::random(p.arch.clone(), 200 + k as u64).values;
        let y: Vec<f64> = p.clean_y().iter().map(|v| v + r.random_range(-0.3..0.3)).collect();
        assert!(rel_err(&p.grad_x(&x, &y), &fd_grad_x(&p, &x, &y, H), 1e-8) <= TOL, "x probe {k}");
        assert!(rel_err(&p.grad_y(&x, &y), &fd_grad_y(&p, &x, &y, H), 1e-8) <= TOL, "y probe {k}");
    }
}

#[test]
fn zero_network_on_clean_inputs() {
    let data = make_synthetic_dataset_sized(20, 24);
    let p = make_dro_problem(data, 1.3, Arch::default_dro());
    let x = MlpParams::zeros(p.arch.clone()).values;
    assert!((p.value(&x, &p.clean_y()) - 2f64.ln()).abs() < 1e-15);
    assert!(p.grad_y(&x, &p.clean_y()).iter().all(|g| *g == 0.0));
    assert_eq!(p.dim_y(), 40);
}

#[test]
fn strong_concavity_in_y() {
    let data = make_synthetic_dataset_sized(15, 25);
    let n = data.len() as f64;
    let p = make_dro_problem(data, 1.3, Arch::default_dro());
    let mut r = rng(26);
    let check = |x: &[f64], c: f64, r: &mut neada::oracle::Rng| -> usize {
        let mut violations = 0;
        for _ in 0..100 {
            let y1: Vec<f64> = p.clean_y().iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
            let y2: Vec<f64> = p.clean_y().iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
            let d: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
            let rhs = p.value(x, &y2) + neada::vecops::dot(&p.grad_y(x, &y2), &d)
                - (p.gamma - c) / n * neada::vecops::norm_sq(&d);
            if p.value(x, &y1) > rhs + 1e-12 {
                violations += 1;
            }
        }
        violations
    };
    let zero = MlpParams::zeros(p.arch.clone()).values;
    assert_eq!(p.input_curvature_probe(&zero, 200, 1), 0.0);
    assert_eq!(check(&zero, 0.0, &mut r), 0);

    let trained = MlpParams::random(p.arch.clone(), 27).values;
    let c = p.input_curvature_probe(&trained, 500, 2);
    assert!(c < p.gamma, "curvature probe {c} exceeds gamma");
    let v = check(&trained, 0.0, &mut r);
    if v > 0 {
        eprintln!("strong concavity at c=0 violated on {v}/100 probes for a random network (probe c={c})");
    }
}

#[test]
fn datasets_are_deterministic_and_round_trip() {
    assert_eq!(make_synthetic_dataset(500, 3), make_synthetic_dataset(500, 3));
    assert_ne!(make_synthetic_dataset(500, 3), make_synthetic_dataset(500, 4));
    let ds = make_synthetic_dataset_sized(300, 5);
    assert_eq!(ds.len(), 300);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ds.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("v1,v2,label\n"));
    let back = Dataset::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, ds);
    for (v, l) in back.points.iter().zip(&back.labels) {
        let norm = v[0].hypot(v[1]);
        assert!(norm <= 2f64.sqrt() / 1.3 || norm >= 1.3 * 2f64.sqrt());
        assert_eq!(*l, if norm > 2f64.sqrt() { 1.0 } else { -1.0 });
    }
}

#[test]
fn training_reduces_robust_loss_on_a_small_instance() {
    let p = make_dro_problem(make_synthetic_dataset_sized(200, 6), 1.3, Arch::new(vec![2, 8, 8, 1]));
    let test = make_synthetic_dataset_sized(100, 7);
    let cfg = DroTrainConfig::adam(StoppingCriterion::FixedCap(5), 15, 8);
    let res = train_dro(&p, &cfg, 9, Some(&test), &[0.0, 0.1]).unwrap();
    assert_eq!(res.epochs.len(), 15);
    assert!(res.best_robust_loss() < 0.8 * res.initial_loss, "{} vs {}", res.best_robust_loss(), res.initial_loss);
    let last = res.epochs.last().unwrap();
    assert_eq!(last.fgsm.len(), 2);
    assert!(last.fgsm[0].1 >= last.fgsm[1].1 - 0.05);
    for w in res.epochs.windows(2) {
        assert!(w[1].grad_evals > w[0].grad_evals);
    }
    assert_eq!(train_dro(&p, &cfg, 9, Some(&test), &[0.0, 0.1]).unwrap(), res);
}

#[test]
fn training_rejects_criterion_i() {
    let p = make_dro_problem(make_synthetic_dataset_sized(20, 6), 1.3, Arch::default_dro());
    let cfg = DroTrainConfig::adam(StoppingCriterion::CriterionI, 1, 0);
    assert!(matches!(train_dro(&p, &cfg, 0, None, &[]), Err(Error::InvalidConfig(_))));
}
