//! Sweeps the incidence angle for each shoebox material and prints the
//! co-polar reflection magnitudes at 2.4 GHz and 5.8 GHz, together with the
//! angle where |r_p| is smallest.

use rfinv::em::reflection_jones;
use rfinv::scene::load_scene;

fn main() -> rfinv::Result<()> {
    let scene = load_scene(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/shoebox.json"))?;
    for (name, params) in &scene.materials {
        println!("{name}");
        for f in [2.4e9, 5.8e9] {
            let m = params.eval(f);
            println!("  f {:.1} GHz  eps_r {:.3}  sigma {:.4} S/m", f / 1e9, m.eps_r, m.sigma);
            let mut min_rp = (f64::INFINITY, 0.0);
            for deg in (0..90).step_by(1) {
                let th = (deg as f64).to_radians();
                let j = reflection_jones(params.to_array(), th, f)?;
                let rp = j.pp.abs();
                if rp < min_rp.0 {
                    min_rp = (rp, deg as f64);
                }
                if deg % 15 == 0 {
                    println!("    {deg:2} deg  |r_p| {:.4}  |r_s| {:.4}", rp, j.ss.abs());
                }
            }
            let brewster = m.eps_r.sqrt().atan().to_degrees();
            println!(
                "    min |r_p| {:.4} at {:.0} deg (lossless Brewster {:.1} deg)",
                min_rp.0, min_rp.1, brewster
            );
        }
    }
    Ok(())
}
