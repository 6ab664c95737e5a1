//! End-to-end runs of the `nara` binary on a small configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const SMALL: &str = "\
seed = 3
o = 24
M = 6
B = 6
H = 12
hidden = 8
epochs = 2
batch = 4
passes = 1
conf.hidden = 8
conf.epochs = 2
conf.train_windows = 32
conf.val_windows = 16
conf.batch = 8
dataset.length = 60
dataset.count = 10
";

fn nara(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nara"))
        .args(args)
        .env_remove("NARA_SEED")
        .output()
        .expect("spawn nara")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    ckpt: PathBuf,
}

impl Fixture {
    fn trained(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, config).unwrap();
        let ckpt = dir.path().join("m.ckpt");
        let o = nara(&["train", "--config", p(&cfg), "--out", p(&ckpt)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        Self { dir, ckpt }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn context(&self) -> PathBuf {
        let path = self.path("ctx.txt");
        let text: String = (0..30).map(|t| format!("{}\n", (t as f64 * 0.3).sin())).collect();
        std::fs::write(&path, text).unwrap();
        path
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nara(&["train", "--config", p(&dir.path().join("nope.cfg")), "--out", p(&dir.path().join("m.ckpt"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config not found"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "warp = 9\n").unwrap();
    let o = nara(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("m.ckpt"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp"));
}

#[test]
fn zero_epochs_writes_the_initialized_bundle() {
    let f = Fixture::trained(&SMALL.replace("epochs = 2", "epochs = 0"));
    let b = nara_core::checkpoint::load(&f.ckpt).unwrap();
    assert!(!b.trained.ar && !b.trained.prior && !b.trained.confidence);

    let out = f.path("s.csv");
    let o = nara(&["sweep", "--ckpt", p(&f.ckpt), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("confidence predictor untrained"), "{}", stderr(&o));
}

#[test]
fn training_is_reproducible_and_seed_overrides_apply() {
    let a = Fixture::trained(SMALL);
    let b = Fixture::trained(SMALL);
    assert_eq!(std::fs::read(&a.ckpt).unwrap(), std::fs::read(&b.ckpt).unwrap());

    let cfg = a.path("run.cfg");
    let c = a.path("c.ckpt");
    let o = Command::new(env!("CARGO_BIN_EXE_nara"))
        .args(["train", "--config", p(&cfg), "--out", p(&c)])
        .env("NARA_SEED", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d = a.path("d.ckpt");
    let o = nara(&["train", "--config", p(&cfg), "--out", p(&d), "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let (c, d) = (std::fs::read(&c).unwrap(), std::fs::read(&d).unwrap());
    assert_eq!(c, d);
    assert_ne!(c, std::fs::read(&a.ckpt).unwrap());
}

#[test]
fn generate_matches_pure_ar_at_one_and_is_repeatable() {
    let f = Fixture::trained(SMALL);
    let ctx = f.context();
    let run = |extra: &[&str]| {
        let mut args = vec!["generate", "--ckpt", p(&f.ckpt), "--context-file", p(&ctx), "--horizon", "15", "--seed", "9"];
        args.extend_from_slice(extra);
        let o = nara(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let one = run(&["--epsilon", "1.0"]);
    assert_eq!(one, run(&["--pure-ar"]));
    assert_eq!(one.lines().count(), 15);
    let half = run(&["--epsilon", "0.5"]);
    assert_eq!(half, run(&["--epsilon", "0.5"]));
    assert_eq!(half.lines().count(), 15);
}

#[test]
fn generate_edge_cases() {
    let f = Fixture::trained(SMALL);
    let ctx = f.context();
    let o = nara(&["generate", "--ckpt", p(&f.ckpt), "--context-file", p(&ctx), "--horizon", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());

    let bad = f.path("bad.txt");
    std::fs::write(&bad, "0.1\nabc\n").unwrap();
    let o = nara(&["generate", "--ckpt", p(&f.ckpt), "--context-file", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    let o = nara(&["generate", "--ckpt", p(&f.ckpt), "--context-file", p(&ctx), "--epsilon", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let o = nara(&["generate", "--ckpt", p(&f.path("missing.ckpt")), "--context-file", p(&ctx)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checkpoint not found"));
}

#[test]
fn sweep_writes_csv_and_plot() {
    let f = Fixture::trained(SMALL);
    let csv = f.path("s.csv");
    let svg = f.path("s.svg");
    let o = nara(&["sweep", "--ckpt", p(&f.ckpt), "--out", p(&csv), "--plot", p(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("epsilon,acceptance_ratio_pct,mean_l1,sequential_rounds,draft_passes,wall_ms")
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][1], 100.0);
    assert_eq!(rows[10][1], 0.0);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    // 2 validation sequences, H = 12, M = 6
    assert_eq!(rows[0][3], 4.0);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let o = nara(&["sweep", "--ckpt", p(&f.ckpt), "--out", p(&csv), "--grid", "0.2:0.1:0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_plot_does_not_fail_the_sweep() {
    let f = Fixture::trained(SMALL);
    let csv = f.path("s.csv");
    let svg = f.path("no/such/dir/s.svg");
    let o = nara(&["sweep", "--ckpt", p(&f.ckpt), "--out", p(&csv), "--plot", p(&svg), "--grid", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn check_suites_pass_and_injected_fault_names_the_op() {
    let o = nara(&["check", "--what", "all", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let o = nara(&["check", "--what", "grad", "--seeds", "2", "--inject-fault", "lstm_step"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL lstm_step"));
    assert!(stderr(&o).contains("worst: lstm_step"), "{}", stderr(&o));

    let o = nara(&["check", "--inject-fault", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(nara(&[]).status.code(), Some(2));
    assert_eq!(nara(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nara(&["--help"]).status.code(), Some(0));
}
