use std::path::Path;
use std::process::{Command, Output};

use neada::cli::{read_table, run_cli, RunSpec, AlgoSpec, TRAJECTORY_COLUMNS};

fn neada(args: &[&str], jobs: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_neada"));
    c.args(args);
    match jobs {
        Some(j) => c.env("NEADA_JOBS", j),
        None => c.env_remove("NEADA_JOBS"),
    };
    c.output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    let out = dir.to_str().unwrap();
    full.extend(["--out", out]);
    neada(&full, None)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lemma1_sweep_writes_one_file_per_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["--experiment", "lemma1", "--L", "2", "--ratios", "1,2,4,8", "--psi", "gda,adagrad,adam,amsgrad", "--steps", "300", "--eta-x", "0.01"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let n = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(n, 16 * 2);
    let text = read(&dir.path().join("nonnested-gda-r4__seed0.csv"));
    let (cols, rows) = read_table(&text).unwrap();
    assert_eq!(cols, TRAJECTORY_COLUMNS);
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().all(|r| (r[6].parse::<f64>().unwrap() - 4.0).abs() < 1e-9), "gradient should stay at 4 for GDA at r = L²");
    let spec = RunSpec::from_header(&text).unwrap();
    assert_eq!(spec.run_id, "nonnested-gda-r4");
    match spec.algo {
        AlgoSpec::Nonnested(c) => assert_eq!((c.eta_x, c.eta_y), (0.01, 0.04)),
        other => panic!("{other:?}"),
    }
    assert!(text.lines().any(|l| l.starts_with("# rng: chacha8")));
    assert!(text.lines().any(|l| l == "# status: completed"));
}

#[test]
fn eta_y_alone_fixes_eta_x_through_the_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["--experiment", "mccormick", "--algo", "nonnested", "--eta-y", "0.01", "--ratio", "0.05", "--steps", "10"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = RunSpec::from_header(&read(&dir.path().join("nonnested-adam-r0.05__seed0.csv"))).unwrap();
    match spec.algo {
        AlgoSpec::Nonnested(c) => {
            assert!((c.eta_x - 0.2).abs() < 1e-15 && c.eta_y == 0.01);
            assert_eq!((c.beta_x, c.beta_y), (0.9, 0.9));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn aggregate_is_the_mean_of_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["--experiment", "mccormick", "--sigma", "0.01", "--eta-y", "0.01", "--ratios", "0.05", "--seeds", "4", "--steps", "200", "--seed-base", "10"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for id in ["nonnested-adam-r0.05", "neada-adam-grad-or-cap-r0.05"] {
        let seeds: Vec<Vec<Vec<String>>> = (10..14)
            .map(|s| read_table(&read(&dir.path().join(format!("{id}__seed{s}.csv")))).unwrap().1)
            .collect();
        let (cols, mean) = read_table(&read(&dir.path().join(format!("{id}__mean.csv")))).unwrap();
        assert_eq!(cols, TRAJECTORY_COLUMNS);
        let len = seeds.iter().map(Vec::len).min().unwrap();
        assert_eq!(mean.len(), len);
        for (i, row) in mean.iter().enumerate() {
            assert_eq!(row[1], "mean");
            for c in 2..cols.len() {
                let vals: Vec<f64> = seeds.iter().map(|s| s[i][c].parse::<f64>().unwrap()).collect();
                let expect = vals.iter().sum::<f64>() / vals.len() as f64;
                let got: f64 = row[c].parse().unwrap();
                assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{id} row {i} col {}", cols[c]);
            }
        }
    }
}

fn assert_replay_identical(dir: &Path) {
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        if !name.contains("__seed") {
            continue;
        }
        let o = neada(&["--replay", path.to_str().unwrap()], None);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert_eq!(String::from_utf8(o.stdout).unwrap(), read(&path), "{name} differs on replay");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn replay_reproduces_every_experiment_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["--experiment", "lemma1", "--psi", "adam", "--ratios", "1,8", "--steps", "500", "--sigma", "0.1", "--seeds", "2"],
        &["--experiment", "mccormick", "--sigma", "0.01", "--algo", "neada,neada-adagrad", "--criterion", "ii,grad-or-cap", "--steps", "100"],
        &["--experiment", "dro", "--epochs", "2", "--n-train", "100", "--n-test", "50", "--arch", "2-4-1", "--criterion", "fixed:3"],
        &["--experiment", "regret", "--alpha", "0.5,1", "--steps", "1000"],
    ];
    for args in runs {
        let o = run_in(dir.path(), args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    assert_replay_identical(dir.path());
}

#[test]
fn replay_into_directory_rewrites_the_same_file() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), &["--experiment", "mccormick", "--sigma", "0.01", "--steps", "50"]).status.success());
    let src = a.path().join("neada-adam-grad-or-cap-r1__seed0.csv");
    let o = neada(&["--replay", src.to_str().unwrap(), "--out", b.path().to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&b.path().join("neada-adam-grad-or-cap-r1__seed0.csv")), read(&src));
}

#[test]
fn worker_count_does_not_change_results() {
    let args = ["--experiment", "mccormick", "--sigma", "0.01", "--ratios", "0.5,1,2", "--seeds", "3", "--steps", "150"];
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--out", one.path().to_str().unwrap(), "--jobs", "1"]);
    assert!(neada(&a, None).status.success());
    let mut b: Vec<&str> = args.to_vec();
    b.extend(["--out", four.path().to_str().unwrap()]);
    assert!(neada(&b, Some("4")).status.success());
    let mut names: Vec<_> = std::fs::read_dir(one.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 * 3 * 4);
    for n in names {
        assert_eq!(read(&one.path().join(&n)), read(&four.path().join(&n)), "{n:?}");
    }
    let leftovers = std::fs::read_dir(four.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tmp")).count();
    assert_eq!(leftovers, 0);
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let cases: [(&[&str], &str); 9] = [
        (&["--experiment", "lemma1", "--psi", "rmsprop"], "--psi"),
        (&["--experiment", "lemma1", "--eta-x", "0.1", "--eta-y", "0.1", "--ratio", "2"], "--ratio"),
        (&["--steps", "10"], "--experiment"),
        (&["--experiment", "lemma1", "--x0", "1,2"], "--x0"),
        (&["--experiment", "lemma1", "--algo", "genadagrad"], "--algo"),
        (&["--experiment", "mccormick", "--criterion", "sometimes"], "--criterion"),
        (&["--experiment", "lemma1", "--eta-x=-1"], "--eta-x"),
        (&["--experiment", "dro", "--criterion", "i"], "--criterion"),
        (&["--experiment", "lemma1", "--bogus"], "--bogus"),
    ];
    for (args, flag) in cases {
        let dir = tempfile::tempdir().unwrap();
        let o = run_in(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(flag), "{args:?}: message does not name {flag}: {}", stderr(&o));
    }
    let o = neada(&["--experiment", "lemma1", "--steps", "5", "--out", "/tmp/unused-neada"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NEADA_JOBS"));
}

#[test]
fn divergence_exits_3_and_keeps_partial_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--experiment", "lemma1", "--psi", "gda", "--eta-x", "1", "--ratio", "1", "--steps", "100000"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged-nonfinite"));
    let text = read(&dir.path().join("nonnested-gda-r1__seed0.csv"));
    assert!(text.contains("# status: diverged-nonfinite"));
    let rows = read_table(&text).unwrap().1;
    assert!(!rows.is_empty() && rows.len() < 100_000);
}

#[test]
fn in_process_entry_point_and_dataset_dump() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = [
        "neada", "--experiment", "dro", "--epochs", "1", "--n-train", "64", "--n-test", "32", "--arch", "2-4-1",
        "--criterion", "fixed:2", "--out", dir.path().to_str().unwrap(), "--dump-dataset", data.to_str().unwrap(),
    ];
    let code = run_cli(args, &mut out, &mut err);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    let train = read(&data.join("train.csv"));
    assert!(train.starts_with("v1,v2,label\n"));
    assert_eq!(train.lines().count(), 65);
    let (cols, rows) = read_table(&read(&dir.path().join("dro-adam-fixed2__seed0.csv"))).unwrap();
    assert_eq!(cols[..7], ["run_id", "seed", "epoch", "inner_iters", "grad_evals", "robust_loss", "clean_loss"]);
    assert_eq!(cols[7..], ["fgsm_acc@0.1", "fgsm_acc@0.05", "fgsm_acc@0.02"]);
    assert_eq!(rows.len(), 2);
    let code = run_cli(["neada", "--help"], &mut out, &mut err);
    assert_eq!(code, 0);
}

#[test]
fn timing_flag_fills_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["--experiment", "lemma1", "--psi", "gda", "--steps", "20000", "--timing"]).status.success());
    let rows = read_table(&read(&dir.path().join("nonnested-gda-r1__seed0.csv"))).unwrap().1;
    assert!(rows.last().unwrap()[12].parse::<f64>().unwrap() > 0.0);
}
