use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::MaterialScores;
use crate::em::DispersionParams;
use crate::error::{Error, Result};
use crate::scene::{Scene, Vec3};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seeds: BTreeMap<String, u64>,
    /// Digest of the inputs and configuration that produced the report.
    pub provenance: String,
    /// Wall-clock stamp; left empty for byte-reproducible reports.
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    pub config_id: String,
    pub eps_mre: f64,
    pub sigma_mre: f64,
    pub abcd_mae: f64,
    pub sigma_floored: usize,
    pub sigma_floored_abs_err: Option<f64>,
    pub n_eval_points: usize,
    pub per_material: BTreeMap<String, MaterialScores>,
    pub freqs_hz: Vec<f64>,
    pub per_frequency_nmse: Vec<Option<f64>>,
    pub resim_error_db: Option<f64>,
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Every metric must be finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut check = |name: &str, v: f64| {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} = {v}"));
            }
        };
        check("eps_mre", self.eps_mre);
        check("sigma_mre", self.sigma_mre);
        check("abcd_mae", self.abcd_mae);
        if let Some(v) = self.resim_error_db {
            check("resim_error_db", v);
        }
        for (k, m) in &self.per_material {
            check(&format!("{k}.eps_mre"), m.eps_mre);
            check(&format!("{k}.sigma_mre"), m.sigma_mre);
            check(&format!("{k}.abcd_mae"), m.abcd_mae);
        }
        for v in self.per_frequency_nmse.iter().flatten() {
            check("per_frequency_nmse", *v);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Numerical(format!("report metrics invalid: {}", bad.join(", "))))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => write!(out, "{u}").unwrap(),
            (_, Some(i), _) if !n.is_f64() => write!(out, "{i}").unwrap(),
            (_, _, Some(f)) => out.push_str(&float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad);
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Number(n) => {
            let text = if n.is_f64() {
                float(n.as_f64().unwrap_or(f64::NAN))
            } else {
                n.to_string()
            };
            rows.push((prefix.to_string(), text));
        }
    }
}

/// Deterministic text of the report: indented JSON, or two-column
/// `metric,value` CSV with dotted keys. Floats carry 17 significant digits.
pub fn report_to_string(report: &EvalReport, format: ReportFormat) -> Result<String> {
    report.validate()?;
    let value = serde_json::to_value(report).map_err(|e| Error::Numerical(e.to_string()))?;
    match format {
        ReportFormat::Json => {
            let mut s = String::new();
            write_json(&value, 0, &mut s);
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", "value"]).map_err(csv_err)?;
            for (k, v) in rows {
                w.write_record([k, v]).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numerical(e.to_string())
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = report_to_string(report, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub facet_id: usize,
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub eps_pred: f64,
    pub sigma_pred: f64,
    pub eps_gt: f64,
    pub sigma_gt: f64,
}

/// Per-facet `n x n` material map at cell centres, evaluated at frequency
/// `f`, for plotting.
pub fn material_grid(
    scene: &Scene,
    n: usize,
    f: f64,
    material: &dyn Fn(usize, &Vec3) -> DispersionParams,
) -> Vec<GridRow> {
    let mut rows = Vec::with_capacity(scene.facets.len() * n * n);
    for (fid, facet) in scene.facets.iter().enumerate() {
        let gt = scene.material_of(fid).eval(f);
        for i in 0..n {
            for j in 0..n {
                let (u, v) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                let x = facet.point_at(u, v);
                let pred = material(fid, &x).eval(f);
                rows.push(GridRow {
                    facet_id: fid,
                    u,
                    v,
                    x: x.x,
                    y: x.y,
                    z: x.z,
                    eps_pred: pred.eps_r,
                    sigma_pred: pred.sigma,
                    eps_gt: gt.eps_r,
                    sigma_gt: gt.sigma,
                });
            }
        }
    }
    rows
}

pub fn emit_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["facet_id", "u", "v", "x", "y", "z", "eps_pred", "sigma_pred", "eps_gt", "sigma_gt"])
        .map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.facet_id.to_string()];
        rec.extend(
            [r.u, r.v, r.x, r.y, r.z, r.eps_pred, r.sigma_pred, r.eps_gt, r.sigma_gt]
                .iter()
                .map(|v| float(*v)),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
