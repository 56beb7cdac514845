//! Runs a few ablation presets on shared data with a reduced decoder and
//! prints the resulting ablation table.

use rfinv::config::RunConfig;
use rfinv::pipeline::{ablation_csv, cmd_ablate, cmd_simulate};

fn main() -> rfinv::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let out = std::env::temp_dir().join("rfinv-example-ablation");
    let text = format!(
        r#"
scene_path = "{root}/scenes/shoebox.json"
output_dir = "{out}"

[simulate]
n_rx = 40

[invert]
oracle_field = true

[invert.decoder]
width = 32
depth = 2
hash_levels = 4
table_size_log2 = 12

[invert.train]
epochs = 150

[invert.train.lbfgs]
iters = 30

[baseline]
width = 32
depth = 3
epochs = 60
"#,
        out = out.display()
    );
    let cfg = RunConfig::from_toml_str(&text, "ablation.toml".as_ref())?;
    cfg.validate()?;
    cmd_simulate(&cfg)?;
    let ids: Vec<String> = ["Opt-A", "Opt-B", "Opt-C", "Baseline"].map(String::from).to_vec();
    let rows = cmd_ablate(&cfg, &ids)?;
    print!("{}", ablation_csv(&rows)?);
    println!("wrote {}", out.join("ablation.csv").display());
    Ok(())
}
