//! Free-space path loss and the propagate / inverse-propagate round trip
//! for a polarized field.

use rfinv::em::{fspl_db, inverse_propagate, propagate};
use rfinv::numerics::{Complex64, Vec2c};

fn main() -> rfinv::Result<()> {
    for f in [2.4e9, 5.8e9] {
        for d in [1.0, 3.0, 10.0] {
            println!("f {:.1} GHz  d {d:4.1} m  FSPL {:.2} dB", f / 1e9, fspl_db(d, f)?);
        }
    }
    let e = Vec2c::new(Complex64::new(0.6, -0.2), Complex64::new(0.1, 0.7));
    let d = 4.2;
    let f = 5.0e9;
    let there = propagate(e, d, f)?;
    let back = inverse_propagate(there, d, f)?;
    println!("|E| at source       {:.6}", e.norm());
    println!("|E| after {d} m      {:.6e}", there.norm());
    println!("round-trip error    {:.3e}", (back.p - e.p).abs().hypot((back.s - e.s).abs()));
    Ok(())
}
