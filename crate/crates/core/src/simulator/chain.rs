use super::Path;
use crate::em::{capture, propagate, reflection_jones, DispersionParams};
use crate::error::{Error, Result};
use crate::numerics::{Complex64, Vec2c};
use crate::scene::{canonical_basis, Scene, Transmitter, TransverseBasis, Vec3};

/// Bounces steeper than 89.9999 degrees are treated as grazing and the
/// path is dropped.
pub const GRAZING_CUTOFF: f64 = 89.9999 * std::f64::consts::PI / 180.0;

/// Global complex polarization split into real and imaginary 3-vectors.
pub fn split_polarization(pol: &[Complex64; 3]) -> (Vec3, Vec3) {
    (
        Vec3::new(pol[0].re, pol[1].re, pol[2].re),
        Vec3::new(pol[0].im, pol[1].im, pol[2].im),
    )
}

/// TX field leaving along a direction, expressed in `basis` (unit
/// distance reference, before propagation).
pub fn emitted_field(tx: &Transmitter, pol: &[Complex64; 3], basis: &TransverseBasis) -> Vec2c {
    let (re, im) = split_polarization(pol);
    let e = basis.project(&re, &im);
    let a = tx.amplitude();
    Vec2c::new(e.p.scale(a), e.s.scale(a))
}

/// Free-space field of the transmitter at `x` arriving along `d_hat`, in
/// the canonical transverse basis of `d_hat`. Zero when `d_hat` is not the
/// direct direction from the transmitter (tolerance 1e-6 rad).
pub fn analytic_incident_field(tx: &Transmitter, x: &Vec3, d_hat: &Vec3, f: f64) -> Vec2c {
    analytic_incident_field_pol(tx, &tx.polarization, x, d_hat, f)
}

/// [`analytic_incident_field`] with an explicit TX polarization.
pub fn analytic_incident_field_pol(
    tx: &Transmitter,
    pol: &[Complex64; 3],
    x: &Vec3,
    d_hat: &Vec3,
    f: f64,
) -> Vec2c {
    let delta = x - tx.position;
    let r = delta.norm();
    if r == 0.0 {
        return Vec2c::ZERO;
    }
    let direct = delta / r;
    let angle = direct.cross(d_hat).norm().atan2(direct.dot(d_hat));
    if angle > 1e-6 {
        return Vec2c::ZERO;
    }
    let e = emitted_field(tx, pol, &canonical_basis(d_hat));
    propagate(e, r, f).expect("positive distance")
}

/// Field arriving at the receiver along `path`, with the basis it is
/// expressed in: the outgoing s/p frame of the last bounce, or the
/// canonical frame of the direct direction for line of sight.
pub fn path_field(path: &Path, scene: &Scene, pol: &[Complex64; 3], f: f64) -> Result<(Vec2c, TransverseBasis)> {
    path_field_with(path, scene, pol, f, &|fid, _| scene.material_of(fid))
}

/// [`path_field`] with materials supplied per bounce by `material(facet_id,
/// bounce_point)`, for spatially varying material maps.
pub fn path_field_with(
    path: &Path,
    scene: &Scene,
    pol: &[Complex64; 3],
    f: f64,
    material: &dyn Fn(usize, &Vec3) -> DispersionParams,
) -> Result<(Vec2c, TransverseBasis)> {
    let seg = path.segment_lengths();
    let mut basis = canonical_basis(&path.direction(0));
    let mut e = emitted_field(&scene.tx, pol, &basis);
    for (k, frame) in path.incidence.iter().enumerate() {
        if frame.theta_i > GRAZING_CUTOFF {
            return Err(Error::domain(format!(
                "grazing incidence {:.7} deg on facet {}",
                frame.theta_i.to_degrees(),
                path.facet_ids[k]
            )));
        }
        e = propagate(e, seg[k], f)?;
        let incoming = frame.incoming_basis();
        e = basis.rotation_to(&incoming).apply(e);
        let gamma = reflection_jones(material(path.facet_ids[k], &frame.point).to_array(), frame.theta_i, f)?;
        e = gamma.apply(e);
        basis = frame.outgoing_basis();
    }
    e = propagate(e, seg[seg.len() - 1], f)?;
    Ok((e, basis))
}

/// Scalar CSI of one path: propagate and reflect the TX field, then
/// capture with `h_rx` in the path's receiver basis.
pub fn path_csi(path: &Path, scene: &Scene, f: f64, h_rx: Vec2c) -> Result<Complex64> {
    path_csi_pol(path, scene, &scene.tx.polarization, f, h_rx)
}

pub fn path_csi_pol(path: &Path, scene: &Scene, pol: &[Complex64; 3], f: f64, h_rx: Vec2c) -> Result<Complex64> {
    let (e, _) = path_field(path, scene, pol, f)?;
    capture(e, h_rx)
}

