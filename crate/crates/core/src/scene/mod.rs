//! Planar-facet scenes: the fixed geometric prior (surface points and
//! normals) that the simulator traces against and the inversion reads
//! incidence geometry from.

mod file;
mod frame;
mod perturb;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::em::DispersionParams;
use crate::numerics::Complex64;

pub use file::{load_scene, parse_scene, save_scene, SceneFile};
pub use frame::{canonical_basis, incidence_frame, reflect, IncidenceFrame, TransverseBasis};
pub use perturb::perturb_normals;

pub type Vec3 = Vector3<f64>;

/// Minimum ray parameter accepted as a hit.
pub const HIT_EPS: f64 = 1e-9;
/// Coplanarity and orthogonality tolerance, metres.
pub const PLANE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn min_v(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    /// Map a point to `[0, 1]^3` coordinates of the box.
    pub fn normalize(&self, p: &Vec3) -> Vec3 {
        let e = self.extent();
        Vec3::new(
            (p.x - self.min[0]) / e.x,
            (p.y - self.min[1]) / e.y,
            (p.z - self.min[2]) / e.z,
        )
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
            p.z.clamp(self.min[2], self.max[2]),
        )
    }
}

/// Isotropic transmitter with a fixed complex polarization (global frame).
#[derive(Clone, Debug, PartialEq)]
pub struct Transmitter {
    pub position: Vec3,
    pub polarization: [Complex64; 3],
    pub power_dbm: f64,
}

impl Transmitter {
    /// Field amplitude scale: 0 dBm corresponds to unit amplitude.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.power_dbm / 20.0)
    }
}

/// A planar convex polygon with 3 or 4 vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub vertices: Vec<Vec3>,
    /// Surface normal of the geometric prior, pointing into the room.
    /// Starts equal to the plane normal; see [`perturb_normals`].
    pub normal: Vec3,
    pub material_id: String,
    plane_normal: Vec3,
}

impl Facet {
    /// Builds a facet whose normal follows the right-hand winding of
    /// `vertices`.
    pub fn new(vertices: Vec<Vec3>, material_id: impl Into<String>) -> Self {
        let n = polygon_normal(&vertices);
        Self {
            vertices,
            normal: n,
            material_id: material_id.into(),
            plane_normal: n,
        }
    }

    /// Normal of the true plane (unaffected by prior perturbation).
    pub fn plane_normal(&self) -> Vec3 {
        self.plane_normal
    }

    pub fn area(&self) -> f64 {
        self.triangles().map(|(a, b, c)| 0.5 * (b - a).cross(&(c - a)).norm()).sum()
    }

    fn triangles(&self) -> impl Iterator<Item = (Vec3, Vec3, Vec3)> + '_ {
        let v0 = self.vertices[0];
        (1..self.vertices.len() - 1).map(move |i| (v0, self.vertices[i], self.vertices[i + 1]))
    }

    pub fn first_edge(&self) -> Vec3 {
        (self.vertices[1] - self.vertices[0]).normalize()
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.vertices[0]).dot(&self.plane_normal)
    }

    /// Point-in-polygon test for a point on (or near) the plane.
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        let n = self.plane_normal;
        let k = self.vertices.len();
        (0..k).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % k];
            let edge = b - a;
            edge.cross(&(p - a)).dot(&n) >= -tol * edge.norm()
        })
    }

    /// Ray-plane hit inside the polygon, any facing.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = dir.dot(&self.plane_normal);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = (self.vertices[0] - origin).dot(&self.plane_normal) / denom;
        if t <= HIT_EPS {
            return None;
        }
        let p = origin + dir * t;
        self.contains(&p, 1e-12).then_some(t)
    }

    /// Euclidean distance from `p` to the polygon.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let h = self.signed_distance(p);
        let q = p - self.plane_normal * h;
        if self.contains(&q, 0.0) {
            return h.abs();
        }
        let k = self.vertices.len();
        (0..k)
            .map(|i| point_segment_distance(p, &self.vertices[i], &self.vertices[(i + 1) % k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Point at parametric coordinates `(u, v)` in `[0, 1]^2`: bilinear
    /// for quads, collapsed-square map for triangles.
    pub fn point_at(&self, u: f64, v: f64) -> Vec3 {
        let vs = &self.vertices;
        if vs.len() == 4 {
            let a = vs[0] + (vs[1] - vs[0]) * u;
            let b = vs[3] + (vs[2] - vs[3]) * u;
            a + (b - a) * v
        } else {
            vs[0] + (vs[1] - vs[0]) * u + (vs[2] - vs[1]) * (u * v)
        }
    }

    /// Uniform sample over the polygon area.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let tris: Vec<_> = self.triangles().collect();
        let areas: Vec<f64> = tris.iter().map(|(a, b, c)| (b - a).cross(&(c - a)).norm()).collect();
        let total: f64 = areas.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut k = tris.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                k = i;
                break;
            }
            pick -= a;
        }
        let (a, b, c) = tris[k];
        let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        a + (b - a) * r1 + (c - a) * r2
    }
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Newell normal of a polygon, normalized.
pub fn polygon_normal(vs: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    pub facet_id: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub bounds: Aabb,
    pub materials: BTreeMap<String, DispersionParams>,
    pub facets: Vec<Facet>,
    pub tx: Transmitter,
}

impl Scene {
    pub fn material_of(&self, facet_id: usize) -> DispersionParams {
        self.materials[&self.facets[facet_id].material_id]
    }

    /// Nearest front-facing facet hit along a unit direction.
    pub fn ray_intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, f) in self.facets.iter().enumerate() {
            if dir.dot(&f.plane_normal) >= 0.0 {
                continue;
            }
            if let Some(t) = f.intersect(origin, dir) {
                if best.map_or(true, |b| t < b.t) {
                    best = Some(Hit {
                        point: origin + dir * t,
                        facet_id: i,
                        t,
                    });
                }
            }
        }
        best
    }

    /// True when some facet (either side, other than `skip`) crosses the
    /// open segment `a -> b`.
    pub fn segment_blocked(&self, a: &Vec3, b: &Vec3, skip: &[usize]) -> bool {
        let delta = b - a;
        let len = delta.norm();
        if len <= 0.0 {
            return false;
        }
        let dir = delta / len;
        let margin = 1e-7;
        self.facets.iter().enumerate().any(|(i, f)| {
            !skip.contains(&i) && f.intersect(a, &dir).is_some_and(|t| t > margin && t < len - margin)
        })
    }

    /// Distance from `p` to the nearest facet.
    pub fn clearance(&self, p: &Vec3) -> f64 {
        self.facets.iter().map(|f| f.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        self.facets.iter().map(Facet::area).sum()
    }
}
