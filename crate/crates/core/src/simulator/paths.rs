use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{incidence_frame, IncidenceFrame, Scene, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Los,
    Single,
    Multi,
}

impl PathKind {
    pub fn from_bounces(n: usize) -> Self {
        match n {
            0 => Self::Los,
            1 => Self::Single,
            _ => Self::Multi,
        }
    }
}

/// A specular propagation path from the transmitter to a receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    /// TX, reflection points in order, RX.
    pub waypoints: Vec<Vec3>,
    pub facet_ids: Vec<usize>,
    pub total_length: f64,
    pub incidence: Vec<IncidenceFrame>,
}

impl Path {
    /// Builds the path and its incidence frames from waypoints, using the
    /// scene's prior normals.
    pub fn new(scene: &Scene, waypoints: Vec<Vec3>, facet_ids: Vec<usize>) -> Result<Self> {
        if waypoints.len() != facet_ids.len() + 2 {
            return Err(Error::domain("path needs exactly one waypoint per bounce plus endpoints"));
        }
        let mut incidence = Vec::with_capacity(facet_ids.len());
        for (k, &fid) in facet_ids.iter().enumerate() {
            let facet = scene
                .facets
                .get(fid)
                .ok_or_else(|| Error::domain(format!("facet id {fid} out of range")))?;
            let d = (waypoints[k + 1] - waypoints[k]).normalize();
            incidence.push(incidence_frame(facet, waypoints[k + 1], &d)?);
        }
        Ok(Self {
            kind: PathKind::from_bounces(facet_ids.len()),
            total_length: waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum(),
            waypoints,
            facet_ids,
            incidence,
        })
    }

    pub fn bounces(&self) -> usize {
        self.facet_ids.len()
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn direction(&self, segment: usize) -> Vec3 {
        (self.waypoints[segment + 1] - self.waypoints[segment]).normalize()
    }

    /// Largest deviation between incident and reflected angles over all
    /// bounces, radians (zero for an exact specular path).
    pub fn specular_error(&self) -> f64 {
        self.incidence
            .iter()
            .enumerate()
            .map(|(k, fr)| {
                let out = self.direction(k + 1);
                let angle_out = out.dot(&fr.normal).clamp(-1.0, 1.0).acos();
                (angle_out - fr.theta_i).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn mirror(p: &Vec3, plane_point: &Vec3, n: &Vec3) -> Vec3 {
    p - n * (2.0 * (p - plane_point).dot(n))
}

/// Point where segment `a -> b` crosses the plane of facet `fid`, if it
/// does so strictly between the endpoints.
fn plane_crossing(scene: &Scene, fid: usize, a: &Vec3, b: &Vec3) -> Option<Vec3> {
    let f = &scene.facets[fid];
    let ha = f.signed_distance(a);
    let hb = f.signed_distance(b);
    if ha * hb >= 0.0 {
        return None;
    }
    let s = ha / (ha - hb);
    Some(a + (b - a) * s)
}

/// All specular paths with up to `max_bounces` reflections (0, 1 or 2),
/// found by image sources and checked for visibility. Ordered by bounce
/// count, then length.
pub fn enumerate_paths(scene: &Scene, tx: &Vec3, rx: &Vec3, max_bounces: usize) -> Result<Vec<Path>> {
    if max_bounces > 2 {
        return Err(Error::domain(format!("max_bounces must be 0, 1 or 2, got {max_bounces}")));
    }
    let mut out = Vec::new();
    if !scene.segment_blocked(tx, rx, &[]) {
        out.push(Path::new(scene, vec![*tx, *rx], vec![])?);
    }
    let nf = scene.facets.len();
    let front = |fid: usize, p: &Vec3| scene.facets[fid].signed_distance(p) > 0.0;
    if max_bounces >= 1 {
        for i in 0..nf {
            if !front(i, tx) || !front(i, rx) {
                continue;
            }
            let f = &scene.facets[i];
            let img = mirror(tx, &f.vertices[0], &f.plane_normal());
            let Some(q) = plane_crossing(scene, i, &img, rx) else { continue };
            if !f.contains(&q, 1e-12) {
                continue;
            }
            if scene.segment_blocked(tx, &q, &[i]) || scene.segment_blocked(&q, rx, &[i]) {
                continue;
            }
            out.push(Path::new(scene, vec![*tx, q, *rx], vec![i])?);
        }
    }
    if max_bounces >= 2 {
        for i in 0..nf {
            if !front(i, tx) {
                continue;
            }
            let fi = &scene.facets[i];
            let img1 = mirror(tx, &fi.vertices[0], &fi.plane_normal());
            for j in 0..nf {
                if j == i || !front(j, rx) {
                    continue;
                }
                let fj = &scene.facets[j];
                let img2 = mirror(&img1, &fj.vertices[0], &fj.plane_normal());
                let Some(q2) = plane_crossing(scene, j, &img2, rx) else { continue };
                if !fj.contains(&q2, 1e-12) {
                    continue;
                }
                let Some(q1) = plane_crossing(scene, i, &img1, &q2) else { continue };
                if !fi.contains(&q1, 1e-12) || !front(j, &q1) || !front(i, &q2) {
                    continue;
                }
                if scene.segment_blocked(tx, &q1, &[i])
                    || scene.segment_blocked(&q1, &q2, &[i, j])
                    || scene.segment_blocked(&q2, rx, &[j])
                {
                    continue;
                }
                out.push(Path::new(scene, vec![*tx, q1, q2, *rx], vec![i, j])?);
            }
        }
    }
    out.sort_by(|a, b| {
        a.bounces()
            .cmp(&b.bounces())
            .then(a.total_length.total_cmp(&b.total_length))
    });
    Ok(out)
}
