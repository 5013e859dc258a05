use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[market]
assets = ["a", "b"]
regimes = 2
mu = [[0.010, 0.004], [-0.008, 0.001]]
cov = [[[0.0016, 0.0002], [0.0002, 0.0004]], [[0.0036, 0.0004], [0.0004, 0.0009]]]
trans = [[0.9, 0.1], [0.2, 0.8]]
rf = 0.0005

[run]
horizon = 3
grid_step = 0.25
initial_wealth = 1000.0
seed = 5

[utility]
goal = 1010.0

[dp]
mc_paths = 200

[lmcts]
iterations = 100
pool_paths = 400
smoothing_window = 3

[nn]
hidden = 4
epochs = 1
batch = 32
train_paths = 64
validation_paths = 32

[evaluation]
paths = 300
methods = ["dp", "lmcts", "dp_nn", "lmcts_nn", "adjusted_dp"]
cost_rates = [0.0, 0.01]
"#;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regime-alloc")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cli(dir.path(), &["--help"])), 0);
    assert_eq!(code(&cli(dir.path(), &["--version"])), 0);
    assert_eq!(code(&cli(dir.path(), &["solve-dp", "--bogus"])), 1);
    assert_eq!(code(&cli(dir.path(), &[])), 1);
    let o = cli(dir.path(), &["evaluate", "--method", "nn"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown method"));
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["solve-dp"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--config"));

    fs::write(dir.path().join("bad.toml"), TINY.replace("[0.2, 0.8]", "[0.2, 0.7]")).unwrap();
    let o = cli(dir.path(), &["--config", "bad.toml", "solve-dp"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("market.trans[1]"), "{}", stderr(&o));

    fs::write(dir.path().join("typo.toml"), TINY.replace("horizon = 3", "horizn = 3")).unwrap();
    let o = cli(dir.path(), &["--config", "typo.toml", "solve-dp"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("run"), "{}", stderr(&o));
}

#[test]
fn short_table_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.toml"), TINY).unwrap();
    fs::write(dir.path().join("long.toml"), TINY.replace("horizon = 3", "horizon = 5")).unwrap();
    assert_eq!(code(&cli(dir.path(), &["--config", "m.toml", "--out", "o", "solve-dp"])), 0);
    let o = cli(
        dir.path(),
        &["--config", "long.toml", "--out", "o", "evaluate", "--method", "dp", "--table", "o/dp_policy.table"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("dp"));
}

#[test]
fn every_subcommand_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.toml"), TINY).unwrap();
    let run = |args: &[&str]| {
        let o = cli(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    };
    run(&["--config", "m.toml", "--out", "o", "--threads", "1", "solve-dp"]);
    run(&["--config", "m.toml", "--out", "o", "solve-dp", "--adjusted"]);
    run(&["--config", "m.toml", "--out", "o", "solve-lmcts"]);
    run(&["--config", "m.toml", "--out", "o", "train-nn", "--base", "lmcts", "--table", "o/lmcts_lookup.table"]);
    run(&[
        "--config",
        "m.toml",
        "--out",
        "o",
        "evaluate",
        "--method",
        "lmcts-nn",
        "--table",
        "o/lmcts_lookup.table",
        "--params",
        "o/lmcts_nn.table",
    ]);
    for f in ["dp_policy.table", "adjusted_dp_policy.table", "lmcts_lookup.table", "lmcts_nn.table", "lmcts_nn_training.csv", "lmcts_nn.csv"] {
        assert!(d.join("o").join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(d.join("o/lmcts_nn.csv")).unwrap();
    assert!(csv.starts_with("t,lmcts_nn_mean_utility,"));
    assert_eq!(csv.lines().count(), 1 + 4);

    run(&["--config", "m.toml", "--out", "cmp", "compare"]);
    for f in ["summary.csv", "utility.svg", "goal_probability.svg", "cost_sweep.svg", "dp_c0.csv", "lmcts_nn_c0.01.csv"] {
        assert!(d.join("cmp").join(f).exists(), "{f} missing");
    }

    // synthetic labeled returns with both labels and some switches
    let mut returns = String::from("a,b,regime\n");
    for i in 0..200 {
        let x = (i as f64 * 0.37).sin() * 0.02;
        let y = (i as f64 * 0.11).cos() * 0.01;
        returns.push_str(&format!("{x},{y},{}\n", usize::from(i % 50 >= 35)));
    }
    fs::write(d.join("r.csv"), returns).unwrap();
    run(&["--config", "m.toml", "--out", "cal", "calibrate", "--returns", "r.csv", "--rf", "0.0005"]);
    run(&["--config", "cal/model.toml", "--out", "cal", "solve-dp"]);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.toml"), TINY.replace("\"lmcts\", \"dp_nn\", ", "")).unwrap();
    for (out, seed) in [("a", "9"), ("b", "9"), ("c", "10")] {
        let o = cli(d, &["--config", "m.toml", "--seed", seed, "--out", out, "compare"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let read = |out: &str| fs::read(d.join(out).join("summary.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    for f in fs::read_dir(d.join("a")).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(fs::read(d.join("a").join(&name)).unwrap(), fs::read(d.join("b").join(&name)).unwrap(), "{name:?}");
    }
}
