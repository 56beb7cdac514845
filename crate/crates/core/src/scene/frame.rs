use super::{Facet, Vec3};
use crate::error::{Error, Result};
use crate::numerics::{Complex64, Jones, Vec2c};

/// Unit vectors `(p, s)` spanning the plane transverse to a propagation
/// direction, with `{s, p, dir}` right-handed (`p = dir x s`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransverseBasis {
    pub p: Vec3,
    pub s: Vec3,
}

impl TransverseBasis {
    pub fn from_s(dir: &Vec3, s: Vec3) -> Self {
        Self { p: dir.cross(&s), s }
    }

    /// Real 2x2 change of basis taking `(p, s)` components in `self` to
    /// components in `to`. Both bases must be transverse to the same
    /// direction.
    pub fn rotation_to(&self, to: &TransverseBasis) -> Jones {
        let r = |x: f64| Complex64::new(x, 0.0);
        Jones::new(
            r(self.p.dot(&to.p)),
            r(self.s.dot(&to.p)),
            r(self.p.dot(&to.s)),
            r(self.s.dot(&to.s)),
        )
    }

    /// Components of a global complex vector `(re, im)` in this basis.
    pub fn project(&self, re: &Vec3, im: &Vec3) -> Vec2c {
        Vec2c::new(
            Complex64::new(re.dot(&self.p), im.dot(&self.p)),
            Complex64::new(re.dot(&self.s), im.dot(&self.s)),
        )
    }
}

/// Frame attached to a propagation direction alone: `s` is horizontal
/// (`dir x z`), falling back to `dir x x` when `dir` is vertical.
pub fn canonical_basis(dir: &Vec3) -> TransverseBasis {
    let c = dir.cross(&Vec3::z());
    let s = if c.norm() > 1e-9 {
        c.normalize()
    } else {
        dir.cross(&Vec3::x()).normalize()
    };
    TransverseBasis::from_s(dir, s)
}

/// Specular reflection of `d` about unit normal `n`.
pub fn reflect(d: &Vec3, n: &Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Local reflection geometry at a surface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidenceFrame {
    pub point: Vec3,
    pub theta_i: f64,
    pub normal: Vec3,
    pub incident_dir: Vec3,
    pub reflected_dir: Vec3,
    pub s_hat: Vec3,
    pub p_hat_in: Vec3,
    pub p_hat_out: Vec3,
}

impl IncidenceFrame {
    pub fn incoming_basis(&self) -> TransverseBasis {
        TransverseBasis {
            p: self.p_hat_in,
            s: self.s_hat,
        }
    }

    pub fn outgoing_basis(&self) -> TransverseBasis {
        TransverseBasis {
            p: self.p_hat_out,
            s: self.s_hat,
        }
    }
}

/// Incidence geometry of a unit direction arriving on the front side of
/// `facet` at `point`, using the facet's prior normal.
pub fn incidence_frame(facet: &Facet, point: Vec3, incident_dir: &Vec3) -> Result<IncidenceFrame> {
    let n = facet.normal;
    let cos_i = -incident_dir.dot(&n);
    if cos_i <= 0.0 {
        return Err(Error::domain("incident direction arrives from behind the facet"));
    }
    let theta_i = cos_i.min(1.0).acos();
    let c = incident_dir.cross(&n);
    let s_hat = if c.norm() < 1e-9 {
        // normal incidence: fixed tangent from the first edge
        let e = facet.first_edge();
        (e - n * e.dot(&n)).normalize()
    } else {
        c.normalize()
    };
    let reflected_dir = reflect(incident_dir, &n);
    Ok(IncidenceFrame {
        point,
        theta_i,
        normal: n,
        incident_dir: *incident_dir,
        reflected_dir,
        s_hat,
        p_hat_in: incident_dir.cross(&s_hat),
        p_hat_out: reflected_dir.cross(&s_hat),
    })
}
