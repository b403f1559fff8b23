use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, ExperimentOutput, ResultRow};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::temodels::{SolutionDump, VerificationReport};

/// Columns that depend on wall-clock time; all others are reproducible.
pub const CSV_TIMING_COLUMNS: [&str; 2] = ["build_time_s", "solver_time_s"];

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub topology: String,
    pub nodes: usize,
    pub links: usize,
    pub demands: usize,
    pub total_demand: f64,
    pub capacity_factor: f64,
    pub points: usize,
    pub failed_points: usize,
}

#[derive(Serialize)]
struct PointDump<'a> {
    solution: SolutionDump,
    metrics: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<&'a VerificationReport>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a sibling temporary file so readers never see a partial
/// file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push(b'\n');
    Ok(text)
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

fn point_file_name(row: &ResultRow) -> String {
    let policy: String = row
        .policy
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    format!("{}_{}_{}.json", row.model, policy, row.scale)
}

/// Writes `results.csv`, `results.json`, `manifest.json`, and per-point
/// solution dumps under `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = out.rows();
    write_atomic(&dir.join("results.csv"), &rows_to_csv(&rows)?)?;
    write_atomic(&dir.join("results.json"), &to_json(&rows)?)?;

    let config_bytes = serde_json::to_vec(cfg).map_err(|e| Error::Parse(e.to_string()))?;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_sha256: hex(&Sha256::digest(&config_bytes)),
        config: cfg.clone(),
        topology: out.topology.name.clone(),
        nodes: out.topology.node_count(),
        links: out.topology.link_count(),
        demands: out.tm.len(),
        total_demand: out.tm.total_volume(),
        capacity_factor: out.capacity_factor,
        points: rows.len(),
        failed_points: out.points.iter().filter(|p| p.solution.is_none()).count(),
    };
    write_atomic(&dir.join("manifest.json"), &to_json(&manifest)?)?;

    if cfg.write_solutions {
        let sol_dir = dir.join("solutions");
        std::fs::create_dir_all(&sol_dir).map_err(|e| Error::io(&sol_dir, e))?;
        for point in &out.points {
            let (Some(sol), Some(metrics)) = (&point.solution, &point.metrics) else {
                continue;
            };
            let dump = PointDump {
                solution: sol.to_dump(&out.tunnel_sets[point.policy_index], &out.topology, point.row.scale),
                metrics,
                verification: point.verification.as_ref(),
            };
            write_atomic(&sol_dir.join(point_file_name(&point.row)), &to_json(&dump)?)?;
        }
    }
    Ok(())
}
