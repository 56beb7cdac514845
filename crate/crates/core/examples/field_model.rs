//! Trains the incident-field network on analytic free-space supervision
//! and reports the held-out relative L2 error.

use std::time::Instant;

use rfinv::field::{field_samples, held_out_relative_l2, train_field, FieldNet, FieldNetConfig, FieldTrainConfig};
use rfinv::scene::load_scene;
use rfinv::simulator::{generate_dataset, SimConfig};

fn main() -> rfinv::Result<()> {
    let scene = load_scene(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/shoebox.json"))?;
    let sim = SimConfig {
        n_rx: 200,
        ..SimConfig::default()
    };
    let dataset = generate_dataset(&scene, &sim)?;
    let train = field_samples(&scene, Some(&dataset), 2000, &sim.freqs_hz, 1);
    let held_out = field_samples(&scene, None, 1000, &sim.freqs_hz, 2);
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let cfg = FieldTrainConfig {
        epochs,
        ..FieldTrainConfig::default()
    };
    let net = FieldNet::new(FieldNetConfig::default(), scene.bounds, scene.tx.position, 7);
    let t0 = Instant::now();
    let (net, report, _) = train_field(net, &train, &cfg, 0, None)?;
    println!("training samples   {}", train.len());
    println!("epochs             {}", report.epochs_completed);
    println!("final field loss   {:.3e}", report.final_field_loss);
    println!("final reg          {:.3e}", report.final_reg);
    println!("held-out rel. L2   {:.3e}", held_out_relative_l2(&net, &held_out)?);
    println!("elapsed            {:.1} s", t0.elapsed().as_secs_f64());
    Ok(())
}
