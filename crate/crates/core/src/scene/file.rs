use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Aabb, Facet, Scene, Transmitter, Vec3, PLANE_TOL};
use crate::em::DispersionParams;
use crate::error::{Error, Result};
use crate::numerics::Complex64;

/// On-disk scene layout (JSON).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: String,
    pub bounds: Aabb,
    pub materials: BTreeMap<String, DispersionParams>,
    pub facets: Vec<FacetEntry>,
    pub tx: TxEntry,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetEntry {
    pub vertices: Vec<[f64; 3]>,
    pub material: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxEntry {
    pub position: [f64; 3],
    pub polarization: [Complex64; 3],
    pub power_dbm: f64,
}

impl SceneFile {
    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let b = &self.bounds;
        if (0..3).any(|i| !(b.min[i] < b.max[i])) {
            errs.push("bounds: min must be strictly below max on every axis".into());
        }
        for (id, m) in &self.materials {
            if !m.in_bounds() {
                errs.push(format!("materials.{id}: parameters outside the admissible ranges"));
            }
        }
        if self.facets.is_empty() {
            errs.push("facets: at least one facet is required".into());
        }
        for (i, f) in self.facets.iter().enumerate() {
            let k = f.vertices.len();
            if !(3..=4).contains(&k) {
                errs.push(format!("facets[{i}]: expected 3 or 4 vertices, got {k}"));
                continue;
            }
            if !self.materials.contains_key(&f.material) {
                errs.push(format!("facets[{i}]: unknown material `{}`", f.material));
            }
            let vs: Vec<Vec3> = f.vertices.iter().map(|v| Vec3::from(*v)).collect();
            if vs.iter().any(|v| !b.contains(v, PLANE_TOL)) {
                errs.push(format!("facets[{i}]: vertex outside scene bounds"));
            }
            let facet = Facet::new(vs.clone(), f.material.clone());
            if facet.area() < 1e-12 || facet.normal.norm() == 0.0 {
                errs.push(format!("facets[{i}]: degenerate polygon"));
                continue;
            }
            let c = facet.centroid();
            let off = vs.iter().map(|v| (v - c).dot(&facet.normal).abs()).fold(0.0, f64::max);
            if off > PLANE_TOL {
                errs.push(format!("facets[{i}]: vertices not coplanar (deviation {off:e} m)"));
                continue;
            }
            let convex = (0..k).all(|j| {
                let a = vs[j];
                let bb = vs[(j + 1) % k];
                let cc = vs[(j + 2) % k];
                (bb - a).cross(&(cc - bb)).dot(&facet.normal) > 0.0
            });
            if !convex {
                errs.push(format!("facets[{i}]: polygon is not convex"));
            }
        }
        let p = Vec3::from(self.tx.position);
        if !b.contains(&p, 0.0) {
            errs.push("tx.position: outside scene bounds".into());
        }
        if self.tx.polarization.iter().all(|c| c.norm_sqr() == 0.0) {
            errs.push("tx.polarization: must be non-zero".into());
        }
        if !self.tx.power_dbm.is_finite() {
            errs.push("tx.power_dbm: must be finite".into());
        }
        errs
    }

    pub fn into_scene(self) -> Result<Scene> {
        let errs = self.validate();
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let facets = self
            .facets
            .into_iter()
            .map(|f| Facet::new(f.vertices.into_iter().map(Vec3::from).collect(), f.material))
            .collect();
        Ok(Scene {
            name: self.name,
            bounds: self.bounds,
            materials: self.materials,
            facets,
            tx: Transmitter {
                position: Vec3::from(self.tx.position),
                polarization: self.tx.polarization,
                power_dbm: self.tx.power_dbm,
            },
        })
    }

    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            name: scene.name.clone(),
            bounds: scene.bounds,
            materials: scene.materials.clone(),
            facets: scene
                .facets
                .iter()
                .map(|f| FacetEntry {
                    vertices: f.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                    material: f.material_id.clone(),
                })
                .collect(),
            tx: TxEntry {
                position: scene.tx.position.into(),
                polarization: scene.tx.polarization,
                power_dbm: scene.tx.power_dbm,
            },
        }
    }
}

/// Parses and validates scene JSON. `origin` names the source in errors.
pub fn parse_scene(text: &str, origin: &Path) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        msg: e.to_string(),
    })?;
    file.into_scene()
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text, path)
}

/// Writes the scene's geometry (not any normal perturbation) as JSON.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&SceneFile::from_scene(scene)).expect("scene serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
