//! Scores a uniformly biased material model against the shoebox and emits
//! the evaluation report as JSON and CSV plus the per-facet material grid.

use rfinv::config::EvalSection;
use rfinv::em::DispersionParams;
use rfinv::metrics::{emit_grid_csv, emit_report, material_grid, report_to_string, EvalPoint, ReportFormat};
use rfinv::pipeline::{evaluate_model, MaterialModel, ReportContext};
use rfinv::scene::{load_scene, Scene};
use rfinv::simulator::{generate_dataset, SimConfig};

/// Ground truth with permittivity scaled by a constant factor.
struct Biased(f64);

impl MaterialModel for Biased {
    fn materials(&self, scene: &Scene, points: &[EvalPoint]) -> rfinv::Result<Vec<DispersionParams>> {
        Ok(points
            .iter()
            .map(|p| {
                let mut m = scene.material_of(p.facet_id);
                m.a *= self.0;
                m
            })
            .collect())
    }
}

fn main() -> rfinv::Result<()> {
    let scene = load_scene(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/shoebox.json"))?;
    let dataset = generate_dataset(
        &scene,
        &SimConfig {
            n_rx: 20,
            ..SimConfig::default()
        },
    )?;
    let model = Biased(1.05);
    let eval = EvalSection::default();
    let report = evaluate_model(&scene, &dataset, &model, Vec::new(), &eval, &ReportContext::default())?;
    print!("{}", report_to_string(&report, ReportFormat::Json)?);

    let out = std::env::temp_dir().join("rfinv-example-report");
    std::fs::create_dir_all(&out).map_err(|e| rfinv::Error::io(&out, e))?;
    emit_report(&report, out.join("report.json"), ReportFormat::Json)?;
    emit_report(&report, out.join("report.csv"), ReportFormat::Csv)?;
    let grid = material_grid(&scene, 16, 4e9, &|fid, _| {
        let mut m = scene.material_of(fid);
        m.a *= 1.05;
        m
    });
    emit_grid_csv(&grid, out.join("grid.csv"))?;
    println!("wrote report.json, report.csv and grid.csv ({} rows) to {}", grid.len(), out.display());
    Ok(())
}
