//! Command-line entry point. Exit codes: 0 ok, 2 usage or validation,
//! 3 I/O, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfinv::config::RunConfig;
use rfinv::inversion::PRESET_IDS;
use rfinv::metrics::EvalReport;
use rfinv::pipeline;
use rfinv::simulator::linspace;
use rfinv::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rfinv", version, about = "Polarized CSI simulation and surface material inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and RFINV_OUTPUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a CSI dataset and write it with a provenance record.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        n_rx: Option<usize>,
        /// Frequency grid `start:stop:count` in Hz.
        #[arg(long, value_parser = parse_freqs)]
        freqs: Option<FreqGrid>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        noise_snr_db: Option<f64>,
        #[arg(long)]
        max_bounces: Option<usize>,
    },
    /// Train the incident-field network and write its checkpoint.
    TrainField {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Fit the material decoder and write its checkpoint and report.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: Option<String>,
        /// Use the analytic free-space field instead of the field checkpoint.
        #[arg(long)]
        oracle_field: bool,
        /// Decoder initialization and minibatch seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Prior-normal noise, e.g. `2deg` or `2`.
        #[arg(long, value_parser = parse_degrees)]
        normal_std: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run several presets on shared data and write ablation.csv.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated preset ids; `Baseline` adds the entangled MLP.
        #[arg(long, value_delimiter = ',')]
        presets: Option<Vec<String>>,
        #[arg(long)]
        oracle_field: bool,
    },
    /// Evaluate an existing decoder checkpoint, or the ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        decoder_checkpoint: Option<PathBuf>,
        /// Score the scene's own materials (exactness control).
        #[arg(long)]
        ground_truth: bool,
        #[arg(long)]
        oracle_field: bool,
        #[arg(long, value_parser = parse_degrees)]
        normal_std: Option<f64>,
    },
    /// Load and validate a scene file.
    ValidateScene { path: PathBuf },
}

#[derive(Clone, Debug)]
struct FreqGrid(Vec<f64>);

fn parse_freqs(s: &str) -> std::result::Result<FreqGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err("expected start:stop:count".into());
    };
    let a: f64 = a.parse().map_err(|_| format!("bad start frequency `{a}`"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad stop frequency `{b}`"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
    if n == 0 {
        return Err("count must be at least 1".into());
    }
    Ok(FreqGrid(linspace(a, b, n)))
}

fn parse_degrees(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .trim_end_matches("deg")
        .parse()
        .map_err(|_| format!("bad angle `{s}`, expected e.g. `1deg`"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err("angle must be non-negative".into())
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env();
            c
        }
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_report(r: &EvalReport) {
    println!("eps_mre    {:.6}", r.eps_mre);
    println!("sigma_mre  {:.6}", r.sigma_mre);
    println!("abcd_mae   {:.6}", r.abcd_mae);
    if let Some(db) = r.resim_error_db {
        println!("resim_db   {db:.6}");
    }
    for (k, m) in &r.per_material {
        println!("  {k:12} eps {:.6} sigma {:.6}", m.eps_mre, m.sigma_mre);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            scene,
            n_rx,
            freqs,
            seed,
            noise_snr_db,
            max_bounces,
        } => {
            let mut cfg = load(&common)?;
            if let Some(s) = scene {
                cfg.scene_path = s;
            }
            if let Some(n) = n_rx {
                cfg.simulate.n_rx = n;
            }
            if let Some(f) = freqs {
                cfg.simulate.freqs_hz = f.0;
            }
            if let Some(s) = seed {
                cfg.simulate.seed = s;
            }
            if noise_snr_db.is_some() {
                cfg.simulate.noise_snr_db = noise_snr_db;
            }
            if let Some(b) = max_bounces {
                cfg.simulate.max_bounces = b;
            }
            cfg.validate()?;
            let out = pipeline::cmd_simulate(&cfg)?;
            println!(
                "wrote {} ({} records, {} receivers, {} frequencies)",
                out.dataset_path.display(),
                out.dataset.records.len(),
                out.dataset.header.n_rx,
                out.dataset.header.freqs_hz.len()
            );
        }
        Command::TrainField {
            common,
            epochs,
            lambda_reg,
            seed,
            resume,
        } => {
            let mut cfg = load(&common)?;
            if let Some(e) = epochs {
                cfg.field.train.epochs = e;
            }
            if let Some(l) = lambda_reg {
                cfg.field.train.lambda_reg = l;
            }
            if let Some(s) = seed {
                cfg.field.train.seed = s;
            }
            cfg.validate()?;
            let stage = pipeline::cmd_train_field(&cfg, resume)?;
            println!("held-out relative L2 {:.6e}", stage.held_out_rel_l2);
            println!("wrote {}", cfg.field_checkpoint_path().display());
        }
        Command::Invert {
            common,
            preset,
            oracle_field,
            seed,
            normal_std,
            epochs,
        } => {
            let mut cfg = load(&common)?;
            if let Some(p) = preset {
                cfg.invert.preset = p;
            }
            cfg.invert.oracle_field |= oracle_field;
            if let Some(s) = seed {
                cfg.invert.init_seed = s;
                cfg.invert.train.insert("seed".into(), toml::Value::Integer(s as i64));
            }
            if let Some(d) = normal_std {
                cfg.invert.normal_std_deg = d;
            }
            if let Some(e) = epochs {
                cfg.invert.train.insert("epochs".into(), toml::Value::Integer(e as i64));
            }
            cfg.validate()?;
            let out = pipeline::cmd_invert(&cfg)?;
            println!("preset {} final loss {:.6e}", out.resolved.preset, out.train.final_loss.total);
            print_report(&out.report);
        }
        Command::Ablate {
            common,
            presets,
            oracle_field,
        } => {
            let mut cfg = load(&common)?;
            cfg.invert.oracle_field |= oracle_field;
            cfg.validate()?;
            let ids = presets.unwrap_or_else(|| PRESET_IDS.iter().map(|s| s.to_string()).collect());
            if ids.is_empty() {
                return Err(Error::Validation(vec!["--presets needs at least one id".into()]));
            }
            let rows = pipeline::cmd_ablate(&cfg, &ids)?;
            print!("{}", pipeline::ablation_csv(&rows)?);
        }
        Command::Eval {
            common,
            decoder_checkpoint,
            ground_truth,
            oracle_field,
            normal_std,
        } => {
            let mut cfg = load(&common)?;
            cfg.invert.oracle_field |= oracle_field;
            if let Some(d) = normal_std {
                cfg.invert.normal_std_deg = d;
            }
            cfg.validate()?;
            let report = pipeline::cmd_eval(&cfg, decoder_checkpoint.as_deref(), ground_truth)?;
            print_report(&report);
        }
        Command::ValidateScene { path } => {
            let s = pipeline::cmd_validate_scene(&path)?;
            println!(
                "scene {}: {} facets, {:.3} m2, materials {}",
                s.name,
                s.n_facets,
                s.total_area_m2,
                s.materials.join(", ")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfinv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
