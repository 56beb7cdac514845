//! Enumerates specular paths in the shoebox, simulates a small CSI dataset
//! and writes it as JSON lines to the system temp directory.

use rfinv::numerics::Vec2c;
use rfinv::scene::{load_scene, Vec3};
use rfinv::simulator::{enumerate_paths, generate_dataset, path_csi, Dataset, SimConfig};

fn main() -> rfinv::Result<()> {
    let scene = load_scene(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/shoebox.json"))?;
    let rx = Vec3::new(3.7, 0.9, 1.1);
    let paths = enumerate_paths(&scene, &scene.tx.position, &rx, 2)?;
    println!("paths to {rx:?} with up to 2 bounces: {}", paths.len());
    let h = Vec2c::new(rfinv::numerics::Complex64::new(1.0, 0.0), rfinv::numerics::Complex64::ZERO);
    for p in paths.iter().take(8) {
        let csi = path_csi(p, &scene, 5.0e9, h)?;
        println!(
            "  {:?} facets {:?} length {:.3} m |h| {:.3e}",
            p.kind,
            p.facet_ids,
            p.total_length,
            csi.abs()
        );
    }

    let cfg = SimConfig {
        n_rx: 20,
        ..SimConfig::default()
    };
    let dataset = generate_dataset(&scene, &cfg)?;
    println!(
        "dataset: {} records, {} receivers, {} frequencies",
        dataset.records.len(),
        dataset.header.n_rx,
        dataset.header.freqs_hz.len()
    );
    let out = std::env::temp_dir().join("rfinv-example-dataset.jsonl");
    dataset.write_jsonl(&out)?;
    let back = Dataset::read_jsonl(&out)?;
    println!("wrote {} and read back {} records", out.display(), back.records.len());
    Ok(())
}
