//! Directed-arc topology model.
//!
//! Every physical link declared in the input document becomes two directed
//! arcs sharing one `pair_id`, so loads and utilizations are tracked per
//! direction while a physical failure removes both directions at once.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, `0..node_count`.
pub type NodeIdx = usize;
/// Dense directed-arc id, `0..arc_count`.
pub type ArcId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub index: NodeIdx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: ArcId,
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub capacity: f64,
    pub weight: f64,
    /// Shared by the two directions of one physical link.
    pub pair_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    index_by_id: HashMap<String, NodeIdx>,
    /// Outgoing arc ids per node, sorted by destination index.
    out_arcs: Vec<Vec<ArcId>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkDoc {
    src: String,
    dst: String,
    capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// One bidirectional link declaration, used to build a [`Topology`]
/// programmatically.
#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub src: String,
    pub dst: String,
    pub capacity: f64,
    pub weight: f64,
}

impl LinkSpec {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, capacity: f64) -> Self {
        LinkSpec {
            src: src.into(),
            dst: dst.into(),
            capacity,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

impl Topology {
    /// Builds and validates a topology from node ids and bidirectional links.
    pub fn new(name: impl Into<String>, node_ids: &[&str], links: &[LinkSpec]) -> Result<Self> {
        let node_ids: Vec<String> = node_ids.iter().map(|s| s.to_string()).collect();
        Self::build(name.into(), node_ids, links.to_vec())
    }

    fn build(name: String, node_ids: Vec<String>, links: Vec<LinkSpec>) -> Result<Self> {
        let mut index_by_id = HashMap::with_capacity(node_ids.len());
        let mut nodes = Vec::with_capacity(node_ids.len());
        for (index, id) in node_ids.into_iter().enumerate() {
            if index_by_id.insert(id.clone(), index).is_some() {
                return Err(Error::Validation(format!("duplicate node id '{id}'")));
            }
            nodes.push(Node { id, index });
        }

        let mut arcs = Vec::with_capacity(2 * links.len());
        let mut seen_pairs = HashMap::new();
        for (pair_id, link) in links.into_iter().enumerate() {
            let resolve = |id: &str| {
                index_by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("link endpoint '{id}' is not a declared node")))
            };
            let u = resolve(&link.src)?;
            let v = resolve(&link.dst)?;
            if u == v {
                return Err(Error::Validation(format!("self-loop link on node '{}'", link.src)));
            }
            if !(link.capacity.is_finite() && link.capacity > 0.0) {
                return Err(Error::Validation(format!(
                    "link {}-{} has nonpositive capacity {}",
                    link.src, link.dst, link.capacity
                )));
            }
            if !(link.weight.is_finite() && link.weight >= 0.0) {
                return Err(Error::Validation(format!(
                    "link {}-{} has invalid weight {}",
                    link.src, link.dst, link.weight
                )));
            }
            let key = (u.min(v), u.max(v));
            if seen_pairs.insert(key, pair_id).is_some() {
                return Err(Error::Validation(format!(
                    "parallel link between '{}' and '{}'",
                    link.src, link.dst
                )));
            }
            for (src, dst) in [(u, v), (v, u)] {
                arcs.push(Arc {
                    id: arcs.len(),
                    src,
                    dst,
                    capacity: link.capacity,
                    weight: link.weight,
                    pair_id,
                });
            }
        }

        let mut out_arcs = vec![Vec::new(); nodes.len()];
        for arc in &arcs {
            out_arcs[arc.src].push(arc.id);
        }
        for list in &mut out_arcs {
            list.sort_by_key(|&a| arcs[a].dst);
        }

        Ok(Topology {
            name,
            nodes,
            arcs,
            index_by_id,
            out_arcs,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Number of physical (bidirectional) links.
    pub fn link_count(&self) -> usize {
        self.arcs.len() / 2
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.index_by_id.get(id).copied()
    }

    pub fn node_id(&self, index: NodeIdx) -> &str {
        &self.nodes[index].id
    }

    /// Outgoing arcs of `node`, ordered by destination index.
    pub fn out_arcs(&self, node: NodeIdx) -> &[ArcId] {
        &self.out_arcs[node]
    }

    /// The arc `src -> dst`, if the two nodes are adjacent.
    pub fn find_arc(&self, src: NodeIdx, dst: NodeIdx) -> Option<ArcId> {
        self.out_arcs[src].iter().copied().find(|&a| self.arcs[a].dst == dst)
    }

    /// The opposite direction of the same physical link.
    pub fn reverse_arc(&self, arc: ArcId) -> ArcId {
        arc ^ 1
    }

    /// Multiplies every arc capacity by `factor`.
    pub fn scale_capacities(&self, factor: f64) -> Result<Topology> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "capacity scale factor must be positive, got {factor}"
            )));
        }
        let mut scaled = self.clone();
        for arc in &mut scaled.arcs {
            arc.capacity *= factor;
        }
        Ok(scaled)
    }

    pub fn to_json(&self) -> String {
        let doc = TopologyDoc {
            name: self.name.clone(),
            description: None,
            nodes: self.nodes.iter().map(|n| NodeDoc { id: n.id.clone() }).collect(),
            links: self
                .arcs
                .iter()
                .step_by(2)
                .map(|a| LinkDoc {
                    src: self.nodes[a.src].id.clone(),
                    dst: self.nodes[a.dst].id.clone(),
                    capacity: a.capacity,
                    weight: Some(a.weight),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("topology document serializes")
    }
}

/// Parses a topology JSON document.
///
/// Each `links` entry is bidirectional; an absent `weight` defaults to 1.0.
pub fn parse_topology(text: &str) -> Result<Topology> {
    let doc: TopologyDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let node_ids = doc.nodes.into_iter().map(|n| n.id).collect();
    let links = doc
        .links
        .into_iter()
        .map(|l| LinkSpec {
            src: l.src,
            dst: l.dst,
            capacity: l.capacity,
            weight: l.weight.unwrap_or(1.0),
        })
        .collect();
    Topology::build(doc.name, node_ids, links)
}
