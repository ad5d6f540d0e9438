//! End-to-end tests of the `fdrl` binary: validation fail-fast, bit-exact
//! replay from resolved configs, and the per-subcommand file contracts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdrl::data::{sample_prior, Prior};
use fdrl::io::read_particles_csv;
use fdrl::rng::{stream, StreamRole};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdrl"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fdrl_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn tiny_train_config(seed: u64, k: usize, kappa: usize) -> String {
    format!(
        "[experiment]\nname = tiny\nseed = {seed}\n\n\
         [model]\nhidden = 8,8\n\n\
         [objective]\nbregman = lr\ndivergence = kl\n\n\
         [flow]\neta = 0.05\nnu = 0.01\nk = {k}\nkappa = {kappa}\n\n\
         [train]\nsteps = 30\nbatch = 8\nlr = 1e-3\nlr_milestones = 20,25\nlog_every = 5\n\n\
         [target]\nkind = gaussian\nmean = 1,1\nvar = 0.1\n\n\
         [prior]\nkind = std_gaussian\ndim = 2\n"
    )
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn validation_failure_creates_no_output() {
    let dir = tmp("failfast");
    let cfg = write_config(&dir, "bad.ini", "[experiment]\nname = x\nbogus_key = 1\n");
    let out_dir = dir.join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus_key"), "stderr: {stderr}");
    assert!(!out_dir.exists(), "no files may exist after a validation error");
}

#[test]
fn train_then_replay_from_resolved_config_is_bit_identical() {
    let dir = tmp("replay");
    let cfg = write_config(&dir, "run.ini", &tiny_train_config(5, 3, 1));
    let run1 = dir.join("run1");
    let run2 = dir.join("run2");

    assert_success(&run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run1.to_str().unwrap(),
    ]));
    let resolved = run1.join("resolved.ini");
    assert!(resolved.exists());
    assert_success(&run(&[
        "train",
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        run2.to_str().unwrap(),
    ]));

    for file in [
        "resolved.ini",
        "metrics.csv",
        "checkpoint.json",
        "final_samples.csv",
        "final_samples.json",
        "final_samples.svg",
    ] {
        let a = fs::read(run1.join(file)).unwrap_or_else(|_| panic!("{file} missing in run1"));
        let b = fs::read(run2.join(file)).unwrap_or_else(|_| panic!("{file} missing in run2"));
        assert_eq!(a, b, "{file} differs between the original run and its replay");
    }
}

#[test]
fn sample_with_zero_flow_steps_returns_prior_draws() {
    let dir = tmp("zeroflow");
    let cfg = write_config(&dir, "run.ini", &tiny_train_config(9, 3, 1));
    let train_dir = dir.join("train");
    assert_success(&run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
    ]));

    let sample_dir = dir.join("samples");
    assert_success(&run(&[
        "sample",
        "--config",
        train_dir.join("resolved.ini").to_str().unwrap(),
        "--ckpt",
        train_dir.join("checkpoint.json").to_str().unwrap(),
        "--out",
        sample_dir.to_str().unwrap(),
        "--n",
        "64",
        "--K",
        "0",
        "--kappa",
        "0",
        "--seed",
        "21",
    ]));

    let written = read_particles_csv(&sample_dir.join("samples.csv")).unwrap();
    // With K = kappa = 0 the output is exactly the prior draw stream.
    let prior = Prior::std_gaussian(2).unwrap();
    let mut rng = stream(21, StreamRole::Sampling, 0);
    let expected = sample_prior(&prior, 64, &mut rng).unwrap();
    assert_eq!(written, expected);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sample_dir.join("samples.json")).unwrap())
            .unwrap();
    assert_eq!(meta["steps_taken"], 0);
    assert_eq!(meta["seed"], 21);
}

#[test]
fn eval_of_a_file_against_itself_is_zero() {
    let dir = tmp("evalself");
    let csv = dir.join("points.csv");
    fs::write(&csv, "x0,x1\n0.5,1.5\n-0.25,0.75\n2,0\n").unwrap();
    let out_dir = dir.join("eval");
    let out = run(&[
        "eval",
        "--out",
        out_dir.to_str().unwrap(),
        csv.to_str().unwrap(),
        csv.to_str().unwrap(),
    ]);
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["energy_distance"], 0.0);
    assert_eq!(report["nn_distance_quantiles"][1], 0.0);
}

#[test]
fn numerical_failure_exits_2_and_writes_report() {
    let dir = tmp("numfail");
    // An absurd step size makes the flow-guided run overflow quickly.
    let cfg_text = tiny_train_config(3, 5, 0).replace("eta = 0.05", "eta = 1e308");
    let cfg = write_config(&dir, "run.ini", &cfg_text);
    let out_dir = dir.join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("failure_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["expected_outcome"], false);
    assert!(report["error"].as_str().unwrap().contains("non-finite"));
}

#[test]
fn sweep_k_emits_one_row_per_total() {
    let dir = tmp("sweep");
    let cfg = write_config(&dir, "run.ini", &tiny_train_config(4, 3, 1));
    let train_dir = dir.join("train");
    assert_success(&run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
    ]));
    let sweep_dir = dir.join("sweep");
    assert_success(&run(&[
        "sweep-k",
        "--config",
        train_dir.join("resolved.ini").to_str().unwrap(),
        "--ckpt",
        train_dir.join("checkpoint.json").to_str().unwrap(),
        "--out",
        sweep_dir.to_str().unwrap(),
        "--k-min",
        "2",
        "--k-max",
        "8",
        "--k-step",
        "2",
        "--n",
        "64",
    ]));
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "total_steps,energy_distance");
    assert_eq!(lines.len(), 5, "header plus one row per total: {csv}");
    assert!(lines[1].starts_with("2,"));
    assert!(lines[4].starts_with("8,"));
    assert!(sweep_dir.join("sweep.svg").exists());
}

#[test]
fn conditional_subcommand_writes_report() {
    let dir = tmp("conditional");
    let cfg_text = "[experiment]\nname = cond\nseed = 6\n\n\
         [model]\nhidden = 8,8\n\n\
         [objective]\nbregman = lr\ndivergence = kl\n\n\
         [flow]\neta = 0.05\nnu = 0.01\nk = 4\nkappa = 1\n\n\
         [train]\nsteps = 40\nbatch = 8\nlr = 1e-3\nlr_milestones = 30,35\n\n\
         [target]\nkind = gaussian_mixture\nweights = 0.5,0.5\nmeans = -2,-2; 2,2\nvar = 0.5\n\n\
         [prior]\nkind = std_gaussian\ndim = 2\n";
    let cfg = write_config(&dir, "run.ini", cfg_text);
    let train_dir = dir.join("train");
    assert_success(&run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
    ]));
    let cond_dir = dir.join("cond");
    assert_success(&run(&[
        "conditional",
        "--config",
        train_dir.join("resolved.ini").to_str().unwrap(),
        "--ckpt",
        train_dir.join("checkpoint.json").to_str().unwrap(),
        "--out",
        cond_dir.to_str().unwrap(),
        "--class",
        "1",
        "--phi",
        "0.1",
        "--n",
        "128",
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cond_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["class_index"], 1);
    let fractions = report["fraction_nearest_component"].as_array().unwrap();
    assert_eq!(fractions.len(), 2);
    assert!(cond_dir.join("samples.csv").exists());
}

#[test]
fn translate_requires_empirical_prior() {
    let dir = tmp("transbad");
    let cfg = write_config(&dir, "run.ini", &tiny_train_config(2, 3, 1));
    let out_dir = dir.join("run");
    let out = run(&[
        "translate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn translate_writes_matched_pairs() {
    let dir = tmp("translate");
    // A small source dataset on disk.
    let src = dir.join("source.csv");
    let mut csv = String::from("x0,x1\n");
    for i in 0..32 {
        let t = i as f64 / 32.0;
        csv.push_str(&format!("{},{}\n", t - 0.5, 0.3 * t));
    }
    fs::write(&src, csv).unwrap();

    let cfg_text = format!(
        "[experiment]\nname = trans\nseed = 8\n\n\
         [model]\nhidden = 8,8\n\n\
         [objective]\nbregman = lr\ndivergence = kl\n\n\
         [flow]\neta = 0.02\nnu = 0.005\nk = 4\nkappa = 1\n\n\
         [train]\nsteps = 30\nbatch = 8\nlr = 1e-3\nlr_milestones = 20,25\n\n\
         [target]\nkind = gaussian\nmean = 1,1\nvar = 0.1\n\n\
         [prior]\nkind = empirical\npath = {}\n",
        src.display()
    );
    let cfg = write_config(&dir, "run.ini", &cfg_text);
    let out_dir = dir.join("run");
    assert_success(&run(&[
        "translate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--n",
        "16",
    ]));
    let source = read_particles_csv(&out_dir.join("source.csv")).unwrap();
    let translated = read_particles_csv(&out_dir.join("translated.csv")).unwrap();
    assert_eq!(source.rows(), 16);
    assert_eq!(translated.rows(), 16);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["mean_displacement"].as_f64().unwrap() >= 0.0);
    assert!(report["union_diameter"].as_f64().unwrap() > 0.0);
}

#[test]
fn snapshots_written_at_cadence() {
    let dir = tmp("snapshots");
    let cfg_text = tiny_train_config(12, 3, 1)
        .replace("log_every = 5", "log_every = 5\nsnapshot_every = 10");
    let cfg = write_config(&dir, "run.ini", &cfg_text);
    let out_dir = dir.join("run");
    assert_success(&run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    // Steps 9, 19, 29 hit the cadence in a 30-step run.
    for step in [9, 19, 29] {
        let base = out_dir.join(format!("particles_step{step:06}"));
        assert!(base.with_extension("csv").exists(), "missing snapshot at {step}");
        assert!(base.with_extension("svg").exists());
        assert!(
            out_dir.join(format!("checkpoint_step{step:06}.json")).exists(),
            "missing periodic checkpoint at {step}"
        );
    }
}

/// The full chasm demonstration: the stale estimator succeeds on the near
/// pair, fails on the far pair (reported as the expected outcome, not an
/// error), and flow-guided training crosses.
#[test]
fn chasm_demo_reports_the_three_outcomes() {
    let dir = tmp("chasm");
    let out_dir = dir.join("demo");
    let out = run(&[
        "chasm-demo",
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_success(&out);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let stages = summary.as_array().unwrap();
    assert_eq!(stages.len(), 3);
    assert_eq!(stages[0]["stage"], "near_stale");
    assert_eq!(stages[0]["status"], "converged");
    assert_eq!(stages[1]["stage"], "far_stale");
    let far_status = stages[1]["status"].as_str().unwrap();
    assert!(
        far_status == "expected_non_convergence" || far_status == "expected_divergence",
        "far stale status: {far_status}"
    );
    assert_eq!(stages[2]["stage"], "far_flow_guided");
    assert_eq!(stages[2]["status"], "converged");

    assert!(out_dir.join("resolved.ini").exists());
    for stage in ["near_stale", "far_stale", "far_flow_guided"] {
        let sd = out_dir.join(stage);
        assert!(sd.join("metrics.csv").exists(), "{stage} metrics");
        assert!(sd.join("trajectory.svg").exists(), "{stage} trajectory");
        assert!(sd.join("flowed.csv").exists(), "{stage} particles");
    }
}
