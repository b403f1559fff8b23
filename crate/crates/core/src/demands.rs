//! Traffic matrices: parsing, lognormal fitting and synthesis, scaling.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topo::{NodeIdx, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub id: usize,
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub volume: f64,
}

/// A set of point-to-point demands with at most one entry per ordered pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    demands: Vec<Demand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    /// Mean of ln(volume).
    pub mu: f64,
    /// Standard deviation of ln(volume).
    pub sigma: f64,
    pub n_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TmDoc {
    demands: Vec<DemandDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandDoc {
    src: String,
    dst: String,
    volume: f64,
}

impl TrafficMatrix {
    /// Builds a matrix from `(src, dst, volume)` triples, checking the
    /// invariants against `topo`.
    pub fn new(topo: &Topology, entries: impl IntoIterator<Item = (NodeIdx, NodeIdx, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut demands = Vec::new();
        for (src, dst, volume) in entries {
            if src >= topo.node_count() || dst >= topo.node_count() {
                return Err(Error::Validation(format!("demand ({src},{dst}) references an unknown node")));
            }
            if src == dst {
                return Err(Error::Validation(format!(
                    "demand from '{}' to itself",
                    topo.node_id(src)
                )));
            }
            if !(volume.is_finite() && volume >= 0.0) {
                return Err(Error::Validation(format!(
                    "demand {}->{} has invalid volume {volume}",
                    topo.node_id(src),
                    topo.node_id(dst)
                )));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::Validation(format!(
                    "duplicate demand {}->{}",
                    topo.node_id(src),
                    topo.node_id(dst)
                )));
            }
            demands.push(Demand {
                id: demands.len(),
                src,
                dst,
                volume,
            });
        }
        Ok(TrafficMatrix { demands })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.demands.iter().map(|d| d.volume).sum()
    }

    /// Multiplies every volume by `factor`.
    pub fn scale(&self, factor: f64) -> Result<TrafficMatrix> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "demand scale factor must be nonnegative, got {factor}"
            )));
        }
        let demands = self
            .demands
            .iter()
            .map(|d| Demand {
                volume: d.volume * factor,
                ..d.clone()
            })
            .collect();
        Ok(TrafficMatrix { demands })
    }

    pub fn to_json(&self, topo: &Topology) -> String {
        let doc = TmDoc {
            demands: self
                .demands
                .iter()
                .map(|d| DemandDoc {
                    src: topo.node_id(d.src).to_string(),
                    dst: topo.node_id(d.dst).to_string(),
                    volume: d.volume,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("traffic matrix serializes")
    }
}

/// Parses a traffic matrix in JSON (`{"demands": [...]}`) or CSV
/// (`src,dst,volume` with a header row). The format is chosen by content.
pub fn parse_tm(text: &str, topo: &Topology) -> Result<TrafficMatrix> {
    let rows: Vec<DemandDoc> = if text.trim_start().starts_with('{') {
        serde_json::from_str::<TmDoc>(text)
            .map_err(|e| Error::Parse(e.to_string()))?
            .demands
    } else {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["src", "dst", "volume"] {
            return Err(Error::Parse(format!(
                "expected CSV header 'src,dst,volume', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?
    };
    let mut entries = Vec::with_capacity(rows.len());
    for row in rows {
        let resolve = |id: &str| {
            topo.node_index(id)
                .ok_or_else(|| Error::Validation(format!("demand endpoint '{id}' is not a topology node")))
        };
        entries.push((resolve(&row.src)?, resolve(&row.dst)?, row.volume));
    }
    TrafficMatrix::new(topo, entries)
}

/// Moment fit of ln(volume) over the positive volumes of `tm`.
///
/// `sigma` uses the population divisor, which makes this the lognormal
/// maximum-likelihood estimate.
pub fn fit_lognormal(tm: &TrafficMatrix) -> Result<LognormalFit> {
    let logs: Vec<f64> = tm
        .demands()
        .iter()
        .filter(|d| d.volume > 0.0)
        .map(|d| d.volume.ln())
        .collect();
    if logs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "lognormal fit needs at least 2 positive volumes, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    if sigma.is_nan() || sigma <= 1e-12 {
        return Err(Error::InvalidArgument(
            "lognormal fit is degenerate: all positive volumes are equal".into(),
        ));
    }
    Ok(LognormalFit {
        mu,
        sigma,
        n_samples: logs.len(),
    })
}

/// Draws one demand per ordered node pair, `exp(Normal(mu, sigma))`, from a
/// ChaCha8 stream seeded with `seed`. Pairs are visited in (src, dst) index
/// order.
pub fn generate_lognormal_tm(topo: &Topology, fit: &LognormalFit, seed: u64) -> Result<TrafficMatrix> {
    let dist = LogNormal::new(fit.mu, fit.sigma)
        .ok()
        .filter(|_| fit.sigma > 0.0 && fit.mu.is_finite())
        .ok_or_else(|| Error::InvalidArgument(format!("invalid lognormal parameters {fit:?}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = topo.node_count();
    let mut entries = Vec::with_capacity(n * n.saturating_sub(1));
    for src in 0..n {
        for dst in 0..n {
            if src != dst {
                entries.push((src, dst, dist.sample(&mut rng)));
            }
        }
    }
    TrafficMatrix::new(topo, entries)
}
