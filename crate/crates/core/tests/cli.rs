//! End-to-end runs of the `uavnoma` binary on small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavnoma"))
        .args(args)
        .env_remove("UAVNOMA_OUT")
        .output()
        .expect("spawn uavnoma")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_small(out: &Path, extra: &[&str]) {
    let cfg = configs().join("sub6_los.toml");
    let mut args = vec!["train", "--config", s(&cfg), "--episodes", "2", "--steps", "200", "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn train_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train_small(&a, &["--seed", "5"]);
    train_small(&b, &["--seed", "5"]);

    for f in ["episodes.csv", "model.bin", "config.toml", "manifest.json"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert_eq!(
        header(&a.join("episodes.csv")),
        "episode,mean_rate_bps,mean_jain,mean_reward,R_e_tot,J_e_f"
    );
    assert_eq!(data_rows(&a.join("episodes.csv")), 2);
    assert_eq!(fs::read(a.join("episodes.csv")).unwrap(), fs::read(b.join("episodes.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.bin")).unwrap(), fs::read(b.join("model.bin")).unwrap());

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let c = dir.path().join("c");
    train_small(&c, &["--seed", "6"]);
    assert_ne!(fs::read(a.join("model.bin")).unwrap(), fs::read(c.join("model.bin")).unwrap());
}

#[test]
fn train_trace_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    let cfg = configs().join("sub6_los.toml");
    ok(&["train", "--trace", "--config", s(&cfg), "--episodes", "1", "--steps", "5", "--out", s(&t)]);
    let trace = t.join("trace.csv");
    assert_eq!(
        header(&trace),
        "episode,step,x,y,h,alpha_c0,alpha_c1,rate_u0,rate_u1,rate_u2,rate_u3,reward"
    );
    assert_eq!(data_rows(&trace), 5);

    let e = dir.path().join("e");
    let model = t.join("model.bin");
    ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&model), "--steps", "7", "--out", s(&e)]);
    assert_eq!(header(&e.join("eval.csv")), "steps,avg_sum_rate_bps,avg_jain,satisfaction,avg_reward");
    assert_eq!(data_rows(&e.join("eval.csv")), 1);
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    let tiny = configs().join("tiny_oracle.toml");
    ok(&["train", "--config", s(&tiny), "--episodes", "1", "--steps", "3", "--out", s(&t)]);

    let four = configs().join("sub6_los.toml");
    let model = t.join("model.bin");
    let o = run(&["eval", "--config", s(&four), "--checkpoint", s(&model), "--out", s(&dir.path().join("e"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("checkpoint input dim"), "{err}");
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[channel]\nspectrum = \"sub6\"\n[train]\nepisodez = 3\n").unwrap();
    let o = run(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("episodez"));

    let o = run(&["train", "--out", s(&dir.path().join("o")), "train.nope=1"]);
    assert!(!o.status.success());
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mmwave_rmin.toml");
    let out = dir.path().join("s");
    ok(&[
        "sweep",
        "--config",
        s(&cfg),
        "--episodes",
        "1",
        "--steps",
        "3",
        "--out",
        s(&out),
        "sweep.rmin_over_w=[0.0, 1.0, 2.0]",
    ]);
    let f = out.join("sweep.csv");
    assert_eq!(
        header(&f),
        "rmin_over_w,r_min_bps,R_e_tot,J_e_f,satisfaction,final_mean_rate_bps"
    );
    assert_eq!(data_rows(&f), 3);
}

#[test]
fn layouts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mmwave_layouts.toml");
    let t = dir.path().join("t");
    ok(&["train", "--config", s(&cfg), "--episodes", "1", "--steps", "3", "--out", s(&t)]);
    let model = t.join("model.bin");
    let ck_a = format!("layouts.checkpoint_a=\"{}\"", s(&model));
    let ck_b = format!("layouts.checkpoint_b=\"{}\"", s(&model));

    let mut files = Vec::new();
    for name in ["l1", "l2"] {
        let out = dir.path().join(name);
        ok(&[
            "layouts",
            "--config",
            s(&cfg),
            "--steps",
            "4",
            "--out",
            s(&out),
            "layouts.n_layouts=3",
            &ck_a,
            &ck_b,
        ]);
        files.push(fs::read(out.join("layouts.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let f = dir.path().join("l1/layouts.csv");
    assert_eq!(
        header(&f),
        "layout,rate_a_bps,rate_b_bps,ratio_pct,a_wins,u0_x,u0_y,u1_x,u1_y,u2_x,u2_y,u3_x,u3_y"
    );
    assert_eq!(data_rows(&f), 3);
}

#[test]
fn oracle_and_baseline_headers() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = configs().join("tiny_oracle.toml");
    let o = dir.path().join("o");
    ok(&[
        "oracle",
        "--config",
        s(&tiny),
        "--out",
        s(&o),
        "oracle.xy_step=25.0",
        "oracle.h_levels=[10.0, 60.0]",
        "oracle.alpha_step=0.25",
    ]);
    assert_eq!(header(&o.join("oracle.csv")), "x,y,h,alpha_c0,objective,rate_u0_bps,rate_u1_bps");
    assert_eq!(data_rows(&o.join("oracle.csv")), 1);

    let b = dir.path().join("b");
    ok(&["baseline", "--config", s(&tiny), "--steps", "10", "--out", s(&b)]);
    assert_eq!(
        header(&b.join("baseline.csv")),
        "alpha,steps,avg_sum_rate_bps,avg_jain,satisfaction"
    );
}

#[test]
fn missing_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "eval",
        "--checkpoint",
        s(&dir.path().join("nope.bin")),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
