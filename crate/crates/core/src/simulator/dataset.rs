use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{enumerate_paths, path_field, Path, PathKind};
use crate::em::capture;
use crate::error::{Error, Result};
use crate::numerics::{Complex64, Vec2c};
use crate::scene::{Scene, Vec3};

pub const DATASET_FORMAT: &str = "rfinv-dataset/1";
/// Receiver placement gives up after this many rejected draws.
pub const MAX_REJECTIONS: usize = 100_000;

/// Receiver antenna polarization in the path's receiver basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RxPol {
    P,
    S,
}

impl RxPol {
    pub fn h_rx(self) -> Vec2c {
        match self {
            RxPol::P => Vec2c::real(1.0, 0.0),
            RxPol::S => Vec2c::real(0.0, 1.0),
        }
    }
}

/// Serialized path geometry attached to each per-path record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathMeta {
    pub kind: PathKind,
    pub facet_ids: Vec<usize>,
    pub points: Vec<[f64; 3]>,
    pub theta_i: Vec<f64>,
    pub length: f64,
}

impl PathMeta {
    pub fn from_path(p: &Path) -> Self {
        Self {
            kind: p.kind,
            facet_ids: p.facet_ids.clone(),
            points: p.waypoints.iter().map(|v| [v.x, v.y, v.z]).collect(),
            theta_i: p.incidence.iter().map(|f| f.theta_i).collect(),
            length: p.total_length,
        }
    }

    /// Rebuilds the path against `scene`, deriving incidence frames from
    /// the scene's (possibly perturbed) prior normals.
    pub fn to_path(&self, scene: &Scene) -> Result<Path> {
        Path::new(
            scene,
            self.points.iter().map(|p| Vec3::from(*p)).collect(),
            self.facet_ids.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsiRecord {
    pub rx: [f64; 3],
    pub rx_index: usize,
    pub path_index: usize,
    pub f: f64,
    /// Index into the header's TX polarization list.
    pub tx_pol: usize,
    pub pol: RxPol,
    pub csi: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxDescriptor {
    pub position: [f64; 3],
    pub polarization: [Complex64; 3],
    pub power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub scene_name: String,
    pub seed: u64,
    pub freqs_hz: Vec<f64>,
    pub tx: TxDescriptor,
    pub tx_polarizations: Vec<[Complex64; 3]>,
    pub max_bounces: usize,
    pub noise_snr_db: Option<f64>,
    pub dual_pol: bool,
    pub summed: bool,
    pub n_rx: usize,
    pub dropped_paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<CsiRecord>,
}

/// Dataset generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_rx: usize,
    pub freqs_hz: Vec<f64>,
    pub max_bounces: usize,
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
    /// Capture each path with both `h_rx = (1, 0)` and `(0, 1)`.
    pub dual_pol: bool,
    /// Emit one multipath sum per (rx, f) instead of per-path records.
    pub summed: bool,
    pub clearance_m: f64,
    /// Additional TX polarizations, each simulated as a separate pass.
    pub extra_tx_polarizations: Vec<[Complex64; 3]>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_rx: 500,
            freqs_hz: linspace(2.4e9, 5.8e9, 8),
            max_bounces: 1,
            noise_snr_db: None,
            seed: 0,
            dual_pol: true,
            summed: false,
            clearance_m: 0.1,
            extra_tx_polarizations: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_rx == 0 {
            errs.push("n_rx must be at least 1".into());
        }
        if self.freqs_hz.is_empty() {
            errs.push("freqs_hz must be non-empty".into());
        }
        if self.freqs_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            errs.push("freqs_hz must be positive and finite".into());
        }
        if self.freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            errs.push("freqs_hz must be strictly ascending".into());
        }
        if self.max_bounces > 2 {
            errs.push("max_bounces must be 0, 1 or 2".into());
        }
        if self.noise_snr_db.is_some_and(|s| !s.is_finite()) {
            errs.push("noise_snr_db must be finite".into());
        }
        if !(self.clearance_m >= 0.0) {
            errs.push("clearance_m must be non-negative".into());
        }
        errs
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Draws receiver positions uniformly in the scene bounds, at least
/// `clearance` from every facet and from the transmitter.
pub fn sample_receivers<R: Rng>(scene: &Scene, n: usize, clearance: f64, rng: &mut R) -> Result<Vec<Vec3>> {
    let b = scene.bounds;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut found = None;
        for _ in 0..MAX_REJECTIONS {
            let p = Vec3::new(
                rng.gen_range(b.min[0]..b.max[0]),
                rng.gen_range(b.min[1]..b.max[1]),
                rng.gen_range(b.min[2]..b.max[2]),
            );
            if scene.clearance(&p) >= clearance && (p - scene.tx.position).norm() >= clearance {
                found = Some(p);
                break;
            }
        }
        match found {
            Some(p) => out.push(p),
            None => {
                return Err(Error::domain(format!(
                    "no receiver position with clearance {clearance} m after {MAX_REJECTIONS} attempts"
                )))
            }
        }
    }
    Ok(out)
}

/// Circular complex Gaussian noise for a target SNR relative to `signal`.
fn add_noise<R: Rng>(signal: Complex64, snr_db: f64, rng: &mut R) -> Complex64 {
    let var = signal.norm_sqr() / 10f64.powf(snr_db / 10.0);
    let sd = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    signal + Complex64::new(sd * re, sd * im)
}

/// Simulates the sparse CSI dataset. Records are ordered by receiver,
/// path, frequency, TX polarization and receiver polarization.
pub fn generate_dataset(scene: &Scene, cfg: &SimConfig) -> Result<Dataset> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);
    let rxs = sample_receivers(scene, cfg.n_rx, cfg.clearance_m, &mut rng)?;
    let mut pols = vec![scene.tx.polarization];
    pols.extend(cfg.extra_tx_polarizations.iter().copied());
    let rx_pols: &[RxPol] = if cfg.dual_pol { &[RxPol::P, RxPol::S] } else { &[RxPol::P] };

    let mut records = Vec::new();
    let mut dropped = 0;
    for (ri, rx) in rxs.iter().enumerate() {
        let paths = enumerate_paths(scene, &scene.tx.position, rx, cfg.max_bounces)?;
        // fields[path][freq][tx_pol]
        let mut kept = Vec::new();
        for p in paths {
            let fields: Result<Vec<Vec<_>>> = cfg
                .freqs_hz
                .iter()
                .map(|&f| pols.iter().map(|pol| path_field(&p, scene, pol, f).map(|x| x.0)).collect())
                .collect();
            match fields {
                Ok(v) => kept.push((p, v)),
                Err(Error::Domain(_)) => dropped += 1,
                Err(e) => return Err(e),
            }
        }
        let rx_arr = [rx.x, rx.y, rx.z];
        let mut emit = |path_index: usize, f: f64, tp: usize, pol: RxPol, csi: Complex64, meta: Option<PathMeta>| {
            let csi = match cfg.noise_snr_db {
                Some(snr) => add_noise(csi, snr, &mut noise_rng),
                None => csi,
            };
            records.push(CsiRecord {
                rx: rx_arr,
                rx_index: ri,
                path_index,
                f,
                tx_pol: tp,
                pol,
                csi,
                path: meta,
                snr_db: cfg.noise_snr_db,
            });
        };
        if cfg.summed {
            if kept.is_empty() {
                continue;
            }
            for (fi, &f) in cfg.freqs_hz.iter().enumerate() {
                for tp in 0..pols.len() {
                    for &pol in rx_pols {
                        let mut sum = Complex64::ZERO;
                        for (_, fields) in &kept {
                            sum = sum + capture(fields[fi][tp], pol.h_rx())?;
                        }
                        emit(0, f, tp, pol, sum, None);
                    }
                }
            }
        } else {
            for (pi, (p, fields)) in kept.iter().enumerate() {
                let meta = PathMeta::from_path(p);
                for (fi, &f) in cfg.freqs_hz.iter().enumerate() {
                    for tp in 0..pols.len() {
                        for &pol in rx_pols {
                            let csi = capture(fields[fi][tp], pol.h_rx())?;
                            emit(pi, f, tp, pol, csi, Some(meta.clone()));
                        }
                    }
                }
            }
        }
    }
    let tx = &scene.tx;
    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            scene_name: scene.name.clone(),
            seed: cfg.seed,
            freqs_hz: cfg.freqs_hz.clone(),
            tx: TxDescriptor {
                position: tx.position.into(),
                polarization: tx.polarization,
                power_dbm: tx.power_dbm,
            },
            tx_polarizations: pols,
            max_bounces: cfg.max_bounces,
            noise_snr_db: cfg.noise_snr_db,
            dual_pol: cfg.dual_pol,
            summed: cfg.summed,
            n_rx: cfg.n_rx,
            dropped_paths: dropped,
        },
        records,
    })
}

impl Dataset {
    /// JSON Lines: header first, then one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn write_jsonl(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty dataset file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
        if header.format != DATASET_FORMAT {
            return Err(parse_err(1, format!("unsupported format `{}`", header.format)));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e.to_string()))?);
        }
        Ok(Self { header, records })
    }

    pub fn n_freqs(&self) -> usize {
        self.header.freqs_hz.len()
    }
}
