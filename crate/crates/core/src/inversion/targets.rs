use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::em::inverse_propagate;
use crate::error::{Error, Result};
use crate::field::{field_forward, FieldNet};
use crate::numerics::{solve2x2, Complex64, Jones, Vec2c};
use crate::scene::{canonical_basis, Scene, Transmitter, Vec3};
use crate::simulator::{analytic_incident_field_pol, Dataset, PathKind, RxPol};

/// Source of the incident field at a reflection point, in the canonical
/// transverse frame of the arrival direction.
pub trait IncidentField {
    fn incident(&self, x: &Vec3, d: &Vec3, f: f64, tx_pol: usize) -> Result<Vec2c>;
}

/// The trained field network models the primary TX polarization only.
impl IncidentField for FieldNet {
    fn incident(&self, x: &Vec3, d: &Vec3, f: f64, tx_pol: usize) -> Result<Vec2c> {
        if tx_pol != 0 {
            return Err(Error::domain("the field network models TX polarization 0 only"));
        }
        field_forward(self, x, d, f)
    }
}

/// Exact free-space field of the transmitter, for every TX polarization
/// listed in a dataset header.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    pub tx: Transmitter,
    pub polarizations: Vec<[Complex64; 3]>,
}

impl AnalyticField {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let h = &dataset.header;
        Self {
            tx: Transmitter {
                position: Vec3::from(h.tx.position),
                polarization: h.tx.polarization,
                power_dbm: h.tx.power_dbm,
            },
            polarizations: h.tx_polarizations.clone(),
        }
    }
}

impl IncidentField for AnalyticField {
    fn incident(&self, x: &Vec3, d: &Vec3, f: f64, tx_pol: usize) -> Result<Vec2c> {
        let pol = self
            .polarizations
            .get(tx_pol)
            .ok_or_else(|| Error::domain(format!("unknown TX polarization index {tx_pol}")))?;
        Ok(analytic_incident_field_pol(&self.tx, pol, x, d, f))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// `r_p = E_ref.p / E_inc.p`, `r_s = E_ref.s / E_inc.s`.
    #[default]
    Diagonal,
    /// Full 2x2 solve from two TX polarizations sharing a reflection point.
    FullJones,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub mode: TargetMode,
    /// Incident components below this fraction of the largest one are
    /// dropped.
    pub eps_inc_rel: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            mode: TargetMode::Diagonal,
            eps_inc_rel: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JonesEntry {
    Pp,
    Ps,
    Sp,
    Ss,
}

impl JonesEntry {
    pub fn get(self, j: &Jones) -> Complex64 {
        match self {
            JonesEntry::Pp => j.pp,
            JonesEntry::Ps => j.ps,
            JonesEntry::Sp => j.sp,
            JonesEntry::Ss => j.ss,
        }
    }

    pub fn get_mut(self, j: &mut Jones) -> &mut Complex64 {
        match self {
            JonesEntry::Pp => &mut j.pp,
            JonesEntry::Ps => &mut j.ps,
            JonesEntry::Sp => &mut j.sp,
            JonesEntry::Ss => &mut j.ss,
        }
    }
}

/// One kept Jones component with its weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub entry: JonesEntry,
    pub value: Complex64,
    pub weight: f64,
}

/// Reflection target at one bounce point and frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTarget {
    pub point: Vec3,
    pub facet_id: usize,
    pub theta_i: f64,
    pub f: f64,
    /// Position of `f` in the dataset frequency grid.
    pub freq_index: usize,
    pub rx_index: usize,
    pub path_index: usize,
    pub entries: Vec<GammaEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetDiagnostics {
    pub records_used: usize,
    pub skipped_los: usize,
    pub skipped_multi_bounce: usize,
    pub skipped_no_path: usize,
    pub skipped_unsupported_pol: usize,
    pub failed_paths: usize,
    pub dropped_components: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub targets: Vec<GammaTarget>,
    pub freqs_hz: Vec<f64>,
    pub diagnostics: TargetDiagnostics,
}

impl TargetSet {
    pub fn n_components(&self) -> usize {
        self.targets.iter().map(|t| t.entries.len()).sum()
    }
}

struct Measurement {
    point: Vec3,
    facet_id: usize,
    theta_i: f64,
    f: f64,
    freq_index: usize,
    e_inc: Vec2c,
    e_ref: Vec2c,
    has: [bool; 2],
}

/// Reflection targets from single-bounce records: the incident field at the
/// bounce point (rotated into the facet s/p frame) and the inverse-propagated
/// reflected field give `Gamma` by component-wise division, or by a 2x2
/// solve over two TX polarizations in [`TargetMode::FullJones`]. Incidence
/// frames come from `scene`'s prior normals.
pub fn compute_gamma_targets(
    dataset: &Dataset,
    scene: &Scene,
    field: &dyn IncidentField,
    cfg: &TargetConfig,
) -> Result<TargetSet> {
    if !(cfg.eps_inc_rel >= 0.0) {
        return Err(Error::Validation(vec!["eps_inc_rel must be non-negative".into()]));
    }
    let freqs = &dataset.header.freqs_hz;
    let mut diag = TargetDiagnostics::default();
    // (rx, path, freq index, tx pol) -> (p, s) measured CSI
    type Key = (usize, usize, usize, usize);
    let mut groups: BTreeMap<Key, [Option<Complex64>; 2]> = BTreeMap::new();
    let mut metas = BTreeMap::new();
    for r in &dataset.records {
        let Some(meta) = &r.path else {
            diag.skipped_no_path += 1;
            continue;
        };
        match meta.kind {
            PathKind::Los => {
                diag.skipped_los += 1;
                continue;
            }
            PathKind::Multi => {
                diag.skipped_multi_bounce += 1;
                continue;
            }
            PathKind::Single => {}
        }
        let fi = freqs
            .iter()
            .position(|&f| f == r.f)
            .ok_or_else(|| Error::domain(format!("record frequency {} not on the dataset grid", r.f)))?;
        let slot = match r.pol {
            RxPol::P => 0,
            RxPol::S => 1,
        };
        groups.entry((r.rx_index, r.path_index, fi, r.tx_pol)).or_insert([None, None])[slot] = Some(r.csi);
        metas.entry((r.rx_index, r.path_index)).or_insert(meta);
        diag.records_used += 1;
    }

    let mut paths = BTreeMap::new();
    for (&key, meta) in &metas {
        match meta.to_path(scene) {
            Ok(p) => {
                paths.insert(key, p);
            }
            Err(_) => diag.failed_paths += 1,
        }
    }

    let mut measured: BTreeMap<Key, Measurement> = BTreeMap::new();
    for (&(rx, pi, fi, tp), csi) in &groups {
        let Some(path) = paths.get(&(rx, pi)) else {
            continue;
        };
        let f = freqs[fi];
        let frame = &path.incidence[0];
        let d_in = path.direction(0);
        let q = path.waypoints[1];
        let e_inc = match field.incident(&q, &d_in, f, tp) {
            Ok(e) => canonical_basis(&d_in).rotation_to(&frame.incoming_basis()).apply(e),
            Err(_) => {
                diag.skipped_unsupported_pol += csi.iter().flatten().count();
                continue;
            }
        };
        let e_rx = Vec2c::new(csi[0].unwrap_or(Complex64::ZERO), csi[1].unwrap_or(Complex64::ZERO));
        let e_ref = inverse_propagate(e_rx, path.segment_lengths()[1], f)?;
        measured.insert(
            (rx, pi, fi, tp),
            Measurement {
                point: q,
                facet_id: path.facet_ids[0],
                theta_i: frame.theta_i,
                f,
                freq_index: fi,
                e_inc,
                e_ref,
                has: [csi[0].is_some(), csi[1].is_some()],
            },
        );
    }

    let max_inc = measured
        .values()
        .flat_map(|m| [m.e_inc.p.abs(), m.e_inc.s.abs()])
        .fold(0.0, f64::max);
    let floor = cfg.eps_inc_rel * max_inc;

    let mut targets = Vec::new();
    match cfg.mode {
        TargetMode::Diagonal => {
            for (&(rx, pi, _, _), m) in &measured {
                let mut entries = Vec::new();
                for (c, entry) in [(0, JonesEntry::Pp), (1, JonesEntry::Ss)] {
                    if !m.has[c] {
                        continue;
                    }
                    let (inc, refl) = if c == 0 { (m.e_inc.p, m.e_ref.p) } else { (m.e_inc.s, m.e_ref.s) };
                    if !(inc.abs() > floor) || inc.abs() == 0.0 {
                        diag.dropped_components += 1;
                        continue;
                    }
                    entries.push(GammaEntry {
                        entry,
                        value: refl.checked_div(inc)?,
                        weight: inc.norm_sqr(),
                    });
                }
                if !entries.is_empty() {
                    targets.push(new_target(m, rx, pi, entries));
                }
            }
        }
        TargetMode::FullJones => {
            let mut by_point: BTreeMap<(usize, usize, usize), Vec<&Measurement>> = BTreeMap::new();
            for (&(rx, pi, fi, _), m) in &measured {
                if m.has == [true, true] {
                    by_point.entry((rx, pi, fi)).or_default().push(m);
                } else {
                    diag.dropped_components += 1;
                }
            }
            for ((rx, pi, _), ms) in by_point {
                if ms.len() < 2 {
                    diag.dropped_components += ms.len();
                    continue;
                }
                let (a, b) = (ms[0], ms[1]);
                // Gamma [E1 E2] = [R1 R2]; each row g solves [E1 E2]^T g = row of R
                let mt = Jones::new(a.e_inc.p, a.e_inc.s, b.e_inc.p, b.e_inc.s);
                let scale = a.e_inc.norm() * b.e_inc.norm();
                if !(mt.det().abs() > cfg.eps_inc_rel.max(1e-12) * scale) {
                    diag.dropped_components += 4;
                    continue;
                }
                let row_p = solve2x2(&mt, Vec2c::new(a.e_ref.p, b.e_ref.p))?;
                let row_s = solve2x2(&mt, Vec2c::new(a.e_ref.s, b.e_ref.s))?;
                let w = 0.5 * (a.e_inc.norm_sqr() + b.e_inc.norm_sqr());
                let entries = [
                    (JonesEntry::Pp, row_p.p),
                    (JonesEntry::Ps, row_p.s),
                    (JonesEntry::Sp, row_s.p),
                    (JonesEntry::Ss, row_s.s),
                ]
                .into_iter()
                .map(|(entry, value)| GammaEntry { entry, value, weight: w })
                .collect();
                targets.push(new_target(a, rx, pi, entries));
            }
        }
    }
    let wmax = targets
        .iter()
        .flat_map(|t| t.entries.iter().map(|e| e.weight))
        .fold(0.0, f64::max);
    if wmax > 0.0 {
        for t in &mut targets {
            for e in &mut t.entries {
                e.weight /= wmax;
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::domain("no usable single-bounce records for reflection targets"));
    }
    Ok(TargetSet {
        targets,
        freqs_hz: freqs.clone(),
        diagnostics: diag,
    })
}

fn new_target(m: &Measurement, rx: usize, pi: usize, entries: Vec<GammaEntry>) -> GammaTarget {
    GammaTarget {
        point: m.point,
        facet_id: m.facet_id,
        theta_i: m.theta_i,
        f: m.f,
        freq_index: m.freq_index,
        rx_index: rx,
        path_index: pi,
        entries,
    }
}
