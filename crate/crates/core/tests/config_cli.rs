mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rfinv::config::{apply_overrides, RunConfig, OUTPUT_DIR_ENV};
use rfinv::inversion::{DecoderConfig, LbfgsScope};
use rfinv::Error;

fn rfinv() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rfinv"));
    c.env_remove(OUTPUT_DIR_ENV);
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small, fast configuration on the shoebox writing into `dir`.
fn tiny_config(dir: &Path) -> PathBuf {
    let text = format!(
        r#"scene_path = "{scene}"
output_dir = "{out}"

[simulate]
n_rx = 12
freqs_hz = [2.4e9, 4.1e9, 5.8e9]
seed = 3

[field]
held_out_samples = 100

[field.train]
epochs = 5
n_free_samples = 100

[invert]
preset = "Opt-B"

[invert.decoder]
width = 16
depth = 2
pe_levels = 0
hash_levels = 2
base_resolution = 2
features_per_level = 2
finest_voxel_m = 1.0
table_size_log2 = 10

[invert.train]
epochs = 20

[invert.train.lbfgs]
iters = 5

[baseline]
width = 16
depth = 2
pe_levels = 2
epochs = 5
batch = 256

[eval]
points_per_facet = 8
grid_resolution = 4
"#,
        scene = common::scene_path("shoebox.json").display(),
        out = dir.join("out").display()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn defaults_validate_and_round_trip() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let text = cfg.to_toml_string().unwrap();
    let back = RunConfig::from_toml_str(&text, Path::new("x.toml")).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn desk_config_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let cfg = RunConfig::from_toml_str(&text, Path::new(path)).unwrap();
    cfg.validate().unwrap();
    let r = cfg.invert.resolve().unwrap();
    assert_eq!((r.decoder.width, r.decoder.depth, r.decoder.hash_levels), (128, 4, 8));
    assert!(r.train.lbfgs.enabled);
    assert_eq!(cfg.simulate.n_rx, 200);
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        "bogus = 1\n",
        "[simulate]\nn_receivers = 5\n",
        "[field.train]\nlearning_rate = 0.1\n",
        "[eval]\nformat = \"yaml\"\n",
    ] {
        let e = RunConfig::from_toml_str(text, Path::new("c.toml")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{text}: {e}");
        assert_eq!(e.exit_code(), 2);
    }
    let cfg = RunConfig::from_toml_str("[invert.decoder]\nwidht = 3\n", Path::new("c.toml")).unwrap();
    let e = cfg.validate().unwrap_err();
    assert!(matches!(e, Error::Validation(_)));
}

#[test]
fn overrides_merge_into_the_preset() {
    let base = DecoderConfig::default();
    let t: toml::Table = toml::from_str("width = 64\nactivation = \"tanh\"").unwrap();
    let d = apply_overrides(&base, &t, "decoder").unwrap();
    assert_eq!(d.width, 64);
    assert_eq!(d.depth, base.depth);
    let cfg = RunConfig::from_toml_str(
        "[invert]\npreset = \"Opt-F\"\n[invert.train.lbfgs]\niters = 7\n",
        Path::new("c.toml"),
    )
    .unwrap();
    let r = cfg.invert.resolve().unwrap();
    assert_eq!(r.train.lbfgs.iters, 7);
    assert_eq!(r.train.lbfgs.scope, LbfgsScope::MlpOnly);
    assert!(r.train.lbfgs.enabled);
}

#[test]
fn invalid_values_collect_messages() {
    let cfg = RunConfig::from_toml_str(
        "[simulate]\nn_rx = 0\nfreqs_hz = [5e9, 2e9]\n[invert]\npreset = \"Nope\"\n",
        Path::new("c.toml"),
    )
    .unwrap();
    match cfg.validate().unwrap_err() {
        Error::Validation(v) => assert!(v.len() >= 3, "{v:?}"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn usage_and_validation_errors_exit_2() {
    assert_eq!(code(&run(rfinv().arg("frobnicate"))), 2);
    assert_eq!(code(&run(rfinv().args(["simulate", "--n-rx", "many"]))), 2);
    assert_eq!(code(&run(rfinv().args(["simulate", "--freqs", "2e9:3e9"]))), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = run(rfinv().args(["simulate", "--n-rx", "0", "--config"]).arg(&cfg));
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("out/dataset.jsonl").exists());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[simulate]\nnrx = 3\n").unwrap();
    assert_eq!(code(&run(rfinv().args(["simulate", "--config"]).arg(&bad))), 2);
    assert_eq!(code(&run(rfinv().arg("--help"))), 0);
}

#[test]
fn missing_files_exit_3_and_missing_checkpoints_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(rfinv().args(["simulate", "--config"]).arg(dir.path().join("none.toml")));
    assert_eq!(code(&out), 3);
    assert_eq!(code(&run(rfinv().arg("validate-scene").arg(dir.path().join("none.json")))), 3);

    let cfg = tiny_config(dir.path());
    assert_eq!(code(&run(rfinv().args(["simulate", "--config"]).arg(&cfg))), 0);
    // no field checkpoint yet
    assert_eq!(code(&run(rfinv().args(["invert", "--config"]).arg(&cfg))), 2);
    assert_eq!(code(&run(rfinv().args(["eval", "--oracle-field", "--config"]).arg(&cfg))), 2);
}

#[test]
fn validate_scene_reports_summary() {
    let out = run(rfinv().arg("validate-scene").arg(common::scene_path("shoebox.json")));
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.contains("6 facets"), "{s}");
    assert!(s.contains("concrete") && s.contains("glass") && s.contains("wood"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 3}").unwrap();
    assert_eq!(code(&run(rfinv().arg("validate-scene").arg(&bad))), 2);
}

#[test]
fn env_var_overrides_output_dir_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let env_out = dir.path().join("from-env");
    let out = run(rfinv().env(OUTPUT_DIR_ENV, &env_out).args(["simulate", "--config"]).arg(&cfg));
    assert_eq!(code(&out), 0);
    assert!(env_out.join("dataset.jsonl").exists());
    assert!(!dir.path().join("out").exists());
    let flag_out = dir.path().join("from-flag");
    let out = run(rfinv()
        .env(OUTPUT_DIR_ENV, &env_out)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_out));
    assert_eq!(code(&out), 0);
    assert!(flag_out.join("dataset.jsonl").exists());
}

#[test]
fn simulate_is_reproducible_and_writes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(rfinv()
            .args(["simulate", "--seed", "7", "--freqs", "2.4e9:5.8e9:4", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(d));
        assert_eq!(code(&out), 0);
    }
    let da = std::fs::read(a.join("dataset.jsonl")).unwrap();
    assert_eq!(da, std::fs::read(b.join("dataset.jsonl")).unwrap());
    let prov: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 7);
    assert_eq!(prov["dataset_sha256"].as_str().unwrap(), rfinv::pipeline::sha256_hex(&da));
    let resolved = std::fs::read_to_string(a.join("resolved_config.toml")).unwrap();
    let back = RunConfig::from_toml_str(&resolved, Path::new("r.toml")).unwrap();
    assert_eq!(back.simulate.seed, 7);
    assert_eq!(back.simulate.freqs_hz.len(), 4);
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let step = |args: &[&str]| {
        let out = run(rfinv().args(args).arg("--config").arg(&cfg));
        assert_eq!(code(&out), 0, "{args:?}");
        stdout(&out)
    };
    step(&["simulate"]);

    step(&["train-field", "--lambda-reg", "0"]);
    let hist = std::fs::read_to_string(out_dir.join("field_history.csv")).unwrap();
    let mut rd = csv::Reader::from_reader(hist.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    step(&["train-field", "--resume", "--epochs", "3"]);
    let hist = std::fs::read_to_string(out_dir.join("field_history.csv")).unwrap();
    let first = csv::Reader::from_reader(hist.as_bytes()).records().next().unwrap().unwrap();
    assert_eq!(&first[0], "5");

    step(&["invert"]);
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(out_dir.join("decoder.ckpt.json").exists());
    assert!(out_dir.join("invert_history.csv").exists());
    let grid = std::fs::read_to_string(out_dir.join("report_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 6 * 16);

    step(&["eval"]);
    let eval = std::fs::read_to_string(out_dir.join("eval_report.json")).unwrap();
    let (r, e): (serde_json::Value, serde_json::Value) =
        (serde_json::from_str(&report).unwrap(), serde_json::from_str(&eval).unwrap());
    for k in ["eps_mre", "sigma_mre", "abcd_mae", "resim_error_db", "per_frequency_nmse", "per_material"] {
        assert_eq!(r[k], e[k], "{k}");
    }

    step(&["eval", "--ground-truth"]);
    let gt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(gt["resim_error_db"].as_f64(), Some(0.0));
    assert_eq!(gt["eps_mre"].as_f64(), Some(0.0));

    let ablate = step(&["ablate", "--presets", "Opt-B,Arch-7,Baseline"]);
    let table = std::fs::read_to_string(out_dir.join("ablation.csv")).unwrap();
    assert_eq!(table, ablate);
    let ids: Vec<String> = csv::Reader::from_reader(table.as_bytes())
        .records()
        .map(|r| r.unwrap()[0].to_string())
        .collect();
    assert_eq!(ids, ["Opt-B", "Arch-7", "Baseline"]);
    // single preset row matches the invert report
    let row = csv::Reader::from_reader(table.as_bytes()).records().next().unwrap().unwrap();
    assert_eq!(row[2].parse::<f64>().unwrap(), r["eps_mre"].as_f64().unwrap());

    let bad = run(rfinv().args(["ablate", "--presets", "Opt-B,Nope", "--config"]).arg(&cfg));
    assert_eq!(code(&bad), 0);
    assert!(stdout(&bad).contains("failed"));
}
