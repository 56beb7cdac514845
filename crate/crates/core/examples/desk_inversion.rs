//! Desk-scale round trip on the shoebox with `configs/desk.toml`: simulate,
//! derive reflection targets, fit the decoder, score the recovered
//! materials and re-simulate.
//!
//! Pass `--field` to use the trained field network for the targets instead
//! of the analytic free-space field.

use std::time::Instant;

use rfinv::config::RunConfig;
use rfinv::inversion::{AnalyticField, IncidentField};
use rfinv::pipeline::{build_problem, decoder_target_nmse, evaluate_model, fit_decoder, train_field_stage, ReportContext};
use rfinv::scene::load_scene;
use rfinv::simulator::generate_dataset;

fn main() -> rfinv::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let cfg = RunConfig::load(format!("{root}/configs/desk.toml"))?;
    let scene = load_scene(format!("{root}/scenes/shoebox.json"))?;
    let dataset = generate_dataset(&scene, &cfg.simulate)?;

    let t0 = Instant::now();
    let field: Box<dyn IncidentField> = if std::env::args().any(|a| a == "--field") {
        let stage = train_field_stage(&scene, &dataset, &cfg.field, None)?;
        println!("field held-out L2  {:.3e}", stage.held_out_rel_l2);
        Box::new(stage.net)
    } else {
        Box::new(AnalyticField::from_dataset(&dataset))
    };
    let resolved = cfg.invert.resolve()?;
    let (targets, problem) = build_problem(&dataset, &scene, field.as_ref(), &cfg.invert.targets, &resolved)?;
    println!("bounce points      {}", problem.n_points());
    println!("gamma components   {}", targets.n_components());

    let (net, train) = fit_decoder(&problem, &scene, &resolved, cfg.invert.init_seed)?;
    println!(
        "final loss         {:.3e} after {} L-BFGS iterations ({:.1} s)",
        train.final_loss.total,
        train.lbfgs_iterations,
        t0.elapsed().as_secs_f64()
    );

    let nmse = decoder_target_nmse(&net, &problem)?;
    let report = evaluate_model(&scene, &dataset, &net, nmse, &cfg.eval, &ReportContext::default())?;
    println!("eps / sigma MRE    {:.4} / {:.4}", report.eps_mre, report.sigma_mre);
    for (k, m) in &report.per_material {
        println!("  {k:10} eps {:.4} sigma {:.4}", m.eps_mre, m.sigma_mre);
    }
    if let Some(db) = report.resim_error_db {
        println!("resim error        {db:.4} dB");
    }
    Ok(())
}
