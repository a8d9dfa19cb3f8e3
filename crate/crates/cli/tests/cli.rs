//! Black-box tests of the installed binary: exit codes, file outputs, config
//! expansion, and manifest reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn herovec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herovec"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn assert_exit(output: &Output, expected: i32) {
    let code = output.status.code().expect("no signal");
    assert_eq!(
        code,
        expected,
        "exit {code}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn fixture(patch: &str, file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(patch)
        .join(file)
        .display()
        .to_string()
}

fn alias_map() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/alias_map.csv")
        .display()
        .to_string()
}

fn ingest_fixture(patch: &str, out_dir: &Path) {
    let output = herovec(&[
        "ingest",
        "--patch",
        patch,
        "--hero-abilities",
        &fixture(patch, "hero_abilities.json"),
        "--abilities",
        &fixture(patch, "abilities.json"),
        "--heroes",
        &fixture(patch, "heroes.json"),
        "--alias-map",
        &alias_map(),
        "--out-dir",
        &out_dir.display().to_string(),
    ]);
    assert_exit(&output, 0);
}

/// Writes a tiny synthetic corpus and returns the paths eval/train need.
fn synth_corpus(out_dir: &Path) -> (String, String, String) {
    let out = out_dir.display().to_string();
    let output = herovec(&[
        "synth",
        "--n-matches",
        "80",
        "--n-holdout-matches",
        "16",
        "--k",
        "4",
        "--n-characters",
        "20",
        "--n-new-characters",
        "2",
        "--coefficients",
        "3,-2,1.5,-1",
        "--seed",
        "1",
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);
    (
        format!("{out}/matches.csv"),
        format!("{out}/characters_synth.csv"),
        format!("{out}/hero_ids_synth.csv"),
    )
}

#[test]
fn usage_data_and_network_failures_use_distinct_exit_codes() {
    assert_exit(&herovec(&["--help"]), 0);
    assert_exit(&herovec(&["synth", "--bogus-flag"]), 2);
    assert_exit(&herovec(&["cluster", "--features", "x.csv"]), 2); // no --k selection
    assert_exit(&herovec(&["train", "--variant", "nn1", "--matches", "/does/not/exist.csv"]), 3);
    let dir = tempfile::tempdir().unwrap();
    assert_exit(
        &herovec(&[
            "fetch",
            "--patch",
            "7.31",
            "--base-url",
            "http://127.0.0.1:1",
            "--min-interval-ms",
            "0",
            "--out-dir",
            &dir.path().display().to_string(),
        ]),
        4,
    );
}

#[test]
fn constants_flow_from_ingest_to_drift() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    for patch in ["7.31", "7.32", "7.33"] {
        ingest_fixture(patch, dir.path());
    }
    for patch in ["7.31", "7.32", "7.33"] {
        assert!(dir.path().join(format!("features_{patch}.csv")).exists());
        assert!(dir.path().join(format!("hero_ids_{patch}.csv")).exists());
    }

    // A scan over a K range writes the selection curve next to the model.
    let output = herovec(&[
        "cluster",
        "--features",
        &format!("{out}/features_7.31.csv"),
        "--features",
        &format!("{out}/features_7.32.csv"),
        "--k-min",
        "2",
        "--k-max",
        "5",
        "--restarts",
        "5",
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);
    for file in ["centroids.csv", "cluster_meta.json", "k_selection.csv", "manifest_cluster.json"]
    {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }

    for patch in ["7.31", "7.32", "7.33"] {
        let output = herovec(&[
            "encode",
            "--centroids",
            &format!("{out}/centroids.csv"),
            "--meta",
            &format!("{out}/cluster_meta.json"),
            "--features",
            &format!("{out}/features_{patch}.csv"),
            "--out-dir",
            &out,
        ]);
        assert_exit(&output, 0);
        assert!(dir.path().join(format!("characters_{patch}.csv")).exists());
    }

    let output = herovec(&[
        "drift",
        "--reference",
        &format!("{out}/characters_7.32.csv"),
        "--candidate",
        &format!("{out}/characters_7.33.csv"),
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);
    let drift = std::fs::read_to_string(dir.path().join("drift.json")).unwrap();
    assert!(drift.contains("\"divergence\""), "{drift}");
}

#[test]
fn a_model_frozen_before_new_columns_rejects_them_as_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    ingest_fixture("7.31", dir.path());
    ingest_fixture("7.32", dir.path());

    let output = herovec(&[
        "cluster",
        "--features",
        &format!("{out}/features_7.31.csv"),
        "--k",
        "4",
        "--restarts",
        "5",
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);

    let output = herovec(&[
        "encode",
        "--centroids",
        &format!("{out}/centroids.csv"),
        "--meta",
        &format!("{out}/cluster_meta.json"),
        "--features",
        &format!("{out}/features_7.32.csv"),
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 3);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unseen"), "{stderr}");
}

#[test]
fn synthetic_corpus_trains_and_evaluates_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let (matches, characters, hero_ids) = synth_corpus(dir.path());

    let output = herovec(&[
        "train", "--variant", "nn1", "--matches", &matches, "--epochs", "2", "--hidden", "8,4",
        "--out-dir", &out,
    ]);
    assert_exit(&output, 0);
    let curves = std::fs::read_to_string(dir.path().join("curves_nn1.csv")).unwrap();
    assert_eq!(curves.lines().count(), 3, "header plus one row per epoch:\n{curves}");

    let output = herovec(&[
        "train", "--variant", "nn3", "--matches", &matches, "--characters", &characters,
        "--hero-ids", &hero_ids, "--epochs", "2", "--hidden", "8,4", "--out-dir", &out,
    ]);
    assert_exit(&output, 0);

    let output = herovec(&[
        "eval",
        "--model",
        &format!("{out}/model_nn1.txt"),
        "--model",
        &format!("{out}/model_nn3.txt"),
        "--matches",
        &matches,
        "--characters",
        &characters,
        "--hero-ids",
        &hero_ids,
        "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);
    let summary = std::fs::read_to_string(dir.path().join("auc_summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "model,test_auc,test732_auc,test733_auc");
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(dir.path().join("eval_report.csv").exists());
}

#[test]
fn an_identity_model_sized_to_the_training_split_fails_on_later_patches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let (matches, _, _) = synth_corpus(dir.path());

    let output = herovec(&[
        "train", "--variant", "nn2", "--matches", &matches, "--epochs", "1", "--hidden", "8,4",
        "--out-dir", &out,
    ]);
    assert_exit(&output, 0);
    let output = herovec(&[
        "eval", "--model", &format!("{out}/model_nn2.txt"), "--matches", &matches, "--out-dir",
        &out,
    ]);
    assert_exit(&output, 3);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--id-space"), "{stderr}");

    // Sizing the id space past the newest character at training time is the
    // published workaround; evaluation then covers every patch.
    let output = herovec(&[
        "train", "--variant", "nn2", "--matches", &matches, "--id-space", "22", "--epochs", "1",
        "--hidden", "8,4", "--out-dir", &out,
    ]);
    assert_exit(&output, 0);
    let output = herovec(&[
        "eval", "--model", &format!("{out}/model_nn2.txt"), "--matches", &matches, "--out-dir",
        &out,
    ]);
    assert_exit(&output, 0);
}

#[test]
fn config_files_fill_in_flags_without_overriding_explicit_ones() {
    let dir = tempfile::tempdir().unwrap();
    let direct = dir.path().join("direct");
    let via_config = dir.path().join("via_config");
    let overridden = dir.path().join("overridden");

    let config_path = dir.path().join("synth.conf");
    std::fs::write(
        &config_path,
        "# corpus shape\nn-matches = 30\nn-holdout-matches = 10\nk = 4\n\
         n-characters = 15\nn-new-characters = 2\ncoefficients = 3,-2,1.5,-1\nseed = 5\n",
    )
    .unwrap();
    let config = config_path.display().to_string();

    let run = |args: &[&str]| assert_exit(&herovec(args), 0);
    run(&[
        "synth", "--n-matches", "30", "--n-holdout-matches", "10", "--k", "4",
        "--n-characters", "15", "--n-new-characters", "2", "--coefficients", "3,-2,1.5,-1",
        "--seed", "5", "--out-dir", &direct.display().to_string(),
    ]);
    run(&["synth", "--config", &config, "--out-dir", &via_config.display().to_string()]);
    run(&[
        "synth", "--config", &config, "--seed", "9", "--out-dir",
        &overridden.display().to_string(),
    ]);

    let read = |dir: &PathBuf| std::fs::read(dir.join("matches.csv")).unwrap();
    assert_eq!(read(&direct), read(&via_config), "config values must act like flags");
    assert_ne!(read(&direct), read(&overridden), "explicit --seed must beat the config");
}

#[test]
fn reruns_with_equal_inputs_rewrite_manifests_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path());
    let manifest = dir.path().join("manifest_synth.json");
    let first = std::fs::read(&manifest).unwrap();
    synth_corpus(dir.path());
    let second = std::fs::read(&manifest).unwrap();
    assert_eq!(first, second, "manifest must not change across identical reruns");

    let text = String::from_utf8(first).unwrap();
    for needle in ["\"tool\": \"herovec\"", "\"subcommand\": \"synth\"", "\"sha256\""] {
        assert!(text.contains(needle), "{needle} missing from:\n{text}");
    }
}
