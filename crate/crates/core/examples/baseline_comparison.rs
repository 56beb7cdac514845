//! Fits the disentangled decoder and the entangled MLP baseline to the same
//! reflection targets and compares the recovered materials.

use rfinv::config::RunConfig;
use rfinv::inversion::{AnalyticField, BaselineConfig, DecoderConfig};
use rfinv::pipeline::{
    baseline_target_nmse, build_problem, decoder_target_nmse, evaluate_model, fit_decoder, train_baseline_stage,
    ReportContext,
};
use rfinv::scene::load_scene;
use rfinv::simulator::generate_dataset;

fn main() -> rfinv::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let scene = load_scene(format!("{root}/scenes/shoebox.json"))?;
    let mut cfg = RunConfig::default();
    cfg.simulate.n_rx = 60;
    let dataset = generate_dataset(&scene, &cfg.simulate)?;
    let field = AnalyticField::from_dataset(&dataset);

    let mut resolved = cfg.invert.resolve()?;
    resolved.decoder = DecoderConfig {
        width: 64,
        depth: 3,
        hash_levels: 6,
        table_size_log2: 12,
        ..resolved.decoder
    };
    resolved.train.epochs = 300;
    resolved.train.lbfgs.iters = 50;
    let (_, problem) = build_problem(&dataset, &scene, &field, &cfg.invert.targets, &resolved)?;
    let ctx = ReportContext::default();

    let (net, _) = fit_decoder(&problem, &scene, &resolved, 0)?;
    let dec = evaluate_model(&scene, &dataset, &net, decoder_target_nmse(&net, &problem)?, &cfg.eval, &ctx)?;

    let bcfg = BaselineConfig {
        width: 64,
        depth: 4,
        epochs: 100,
        batch: 512,
        ..BaselineConfig::default()
    };
    let (bnet, _) = train_baseline_stage(&problem, &scene, &bcfg)?;
    let base = evaluate_model(&scene, &dataset, &bnet, baseline_target_nmse(&bnet, &problem)?, &cfg.eval, &ctx)?;

    println!("{:10} {:>9} {:>9}", "model", "eps MRE", "sigma MRE");
    println!("{:10} {:9.4} {:9.4}", "decoder", dec.eps_mre, dec.sigma_mre);
    println!("{:10} {:9.4} {:9.4}", "baseline", base.eps_mre, base.sigma_mre);
    Ok(())
}
