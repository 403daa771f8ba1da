//! Directed road-network data model, cordon derivation and network file I/O.
//!
//! The network is immutable after loading and is shared read-only by the
//! router, the mobility simulation and the analysis stage. Links carry the
//! attributes the queue model needs (length, hourly flow capacity, free
//! speed, lanes) plus the set of modes allowed on them.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::Mode;

/// Index of a node in [`Network::nodes`]. Stable for the lifetime of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIdx(pub u32);

/// Index of a link in [`Network::links`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkIdx(pub u32);

impl NodeIdx {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl LinkIdx {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub id: String,
    pub from: NodeIdx,
    pub to: NodeIdx,
    /// meters
    pub length: f64,
    /// vehicles per hour
    pub capacity: f64,
    /// meters per second
    pub free_speed: f64,
    pub lanes: u32,
    pub modes: BTreeSet<Mode>,
}

impl Link {
    /// Exact free-flow traversal time in seconds (length / free_speed).
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.free_speed
    }

    /// Free-flow time rounded up to the 1 s simulation grid, at least 1 s.
    pub fn free_flow_steps(&self) -> u32 {
        (self.free_flow_time().ceil() as u32).max(1)
    }

    pub fn allows(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_index: HashMap<String, NodeIdx>,
    link_index: HashMap<String, LinkIdx>,
    /// Outgoing links per node, sorted by external link id.
    out_links: Vec<Vec<LinkIdx>>,
    /// Optional cordon region shipped with the scenario network.
    pub cordon_nodes: Option<Vec<String>>,
}

impl Network {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, cordon_nodes: Option<Vec<String>>) -> Self {
        let node_index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), NodeIdx(i as u32)))
            .collect();
        let link_index: HashMap<String, LinkIdx> = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), LinkIdx(i as u32)))
            .collect();
        let mut out_links = vec![Vec::new(); nodes.len()];
        for (i, link) in links.iter().enumerate() {
            out_links[link.from.idx()].push(LinkIdx(i as u32));
        }
        for out in &mut out_links {
            out.sort_by(|a, b| links[a.idx()].id.cmp(&links[b.idx()].id));
        }
        Network {
            nodes,
            links,
            node_index,
            link_index,
            out_links,
            cordon_nodes,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.idx()]
    }

    pub fn link(&self, idx: LinkIdx) -> &Link {
        &self.links[idx.idx()]
    }

    pub fn node_idx(&self, id: &str) -> Option<NodeIdx> {
        self.node_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &str) -> Option<LinkIdx> {
        self.link_index.get(id).copied()
    }

    pub fn out_links(&self, node: NodeIdx) -> &[LinkIdx] {
        &self.out_links[node.idx()]
    }

    /// Planar coordinates of a link's downstream node. Activities located on
    /// a link are positioned here; trips start and end at this point.
    pub fn link_endpoint(&self, link: LinkIdx) -> (f64, f64) {
        let n = self.node(self.link(link).to);
        (n.x, n.y)
    }

    pub fn euclidean(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeRecord>,
    links: Vec<LinkRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cordon: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkRecord {
    id: String,
    from: String,
    to: String,
    length: f64,
    capacity: f64,
    freespeed: f64,
    lanes: u32,
    modes: Vec<String>,
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| SimError::parse(path, &e))?;
    network_from_records(file)
}

fn network_from_records(file: NetworkFile) -> Result<Network> {
    let mut node_index: HashMap<String, NodeIdx> = HashMap::new();
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for rec in file.nodes {
        if !rec.x.is_finite() || !rec.y.is_finite() {
            return Err(SimError::InvalidAttribute {
                subject: format!("node \"{}\"", rec.id),
                field: "x/y",
                requirement: "finite",
                value: format!("({}, {})", rec.x, rec.y),
            });
        }
        if node_index
            .insert(rec.id.clone(), NodeIdx(nodes.len() as u32))
            .is_some()
        {
            return Err(SimError::DuplicateId {
                kind: "node",
                id: rec.id,
            });
        }
        nodes.push(Node {
            id: rec.id,
            x: rec.x,
            y: rec.y,
        });
    }

    let mut link_ids: HashSet<String> = HashSet::new();
    let mut links = Vec::with_capacity(file.links.len());
    for rec in file.links {
        if !link_ids.insert(rec.id.clone()) {
            return Err(SimError::DuplicateId {
                kind: "link",
                id: rec.id,
            });
        }
        let resolve = |node_id: &str| -> Result<NodeIdx> {
            node_index.get(node_id).copied().ok_or_else(|| {
                SimError::DanglingReference {
                    context: format!("link \"{}\"", rec.id),
                    kind: "node",
                    id: node_id.to_string(),
                }
            })
        };
        let from = resolve(&rec.from)?;
        let to = resolve(&rec.to)?;
        let subject = || format!("link \"{}\"", rec.id);
        let positive = |field: &'static str, value: f64| -> Result<f64> {
            if value > 0.0 && value.is_finite() {
                Ok(value)
            } else {
                Err(SimError::InvalidAttribute {
                    subject: subject(),
                    field,
                    requirement: "positive and finite",
                    value: value.to_string(),
                })
            }
        };
        if from == to {
            return Err(SimError::InvalidAttribute {
                subject: subject(),
                field: "from/to",
                requirement: "distinct endpoints",
                value: rec.from.clone(),
            });
        }
        if rec.lanes < 1 {
            return Err(SimError::InvalidAttribute {
                subject: subject(),
                field: "lanes",
                requirement: "at least 1",
                value: rec.lanes.to_string(),
            });
        }
        let mut modes = BTreeSet::new();
        for m in &rec.modes {
            modes.insert(m.parse::<Mode>()?);
        }
        if modes.is_empty() {
            modes.insert(Mode::Car);
        }
        let length = positive("length", rec.length)?;
        let capacity = positive("capacity", rec.capacity)?;
        let free_speed = positive("freespeed", rec.freespeed)?;
        links.push(Link {
            id: rec.id,
            from,
            to,
            length,
            capacity,
            free_speed,
            lanes: rec.lanes,
            modes,
        });
    }

    // Cordon node ids must exist.
    if let Some(cordon) = &file.cordon {
        for id in cordon {
            if !node_index.contains_key(id) {
                return Err(SimError::DanglingReference {
                    context: "cordon".to_string(),
                    kind: "node",
                    id: id.clone(),
                });
            }
        }
    }

    Ok(Network::new(nodes, links, file.cordon))
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = NetworkFile {
        nodes: net
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id.clone(),
                x: n.x,
                y: n.y,
            })
            .collect(),
        links: net
            .links
            .iter()
            .map(|l| LinkRecord {
                id: l.id.clone(),
                from: net.node(l.from).id.clone(),
                to: net.node(l.to).id.clone(),
                length: l.length,
                capacity: l.capacity,
                freespeed: l.free_speed,
                lanes: l.lanes,
                modes: l.modes.iter().map(|m| m.to_string()).collect(),
            })
            .collect(),
        cordon: net.cordon_nodes.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("network serialization cannot fail");
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

// ---------------------------------------------------------------------------
// Cordon
// ---------------------------------------------------------------------------

/// A charging region defined by a node set. Crossing links are derived:
/// entry links lead from outside to inside, exit links from inside to
/// outside. Both sets are sorted by external link id so that derivation is
/// independent of file ordering.
#[derive(Debug, Clone)]
pub struct Cordon {
    pub inside_nodes: BTreeSet<NodeIdx>,
    pub entry_links: Vec<LinkIdx>,
    pub exit_links: Vec<LinkIdx>,
}

pub fn build_cordon(net: &Network, inside: &BTreeSet<NodeIdx>) -> Result<Cordon> {
    if inside.is_empty() || inside.len() >= net.nodes.len() {
        return Err(SimError::InvalidCordonRegion);
    }
    let mut entry = Vec::new();
    let mut exit = Vec::new();
    for (i, link) in net.links.iter().enumerate() {
        let from_in = inside.contains(&link.from);
        let to_in = inside.contains(&link.to);
        match (from_in, to_in) {
            (false, true) => entry.push(LinkIdx(i as u32)),
            (true, false) => exit.push(LinkIdx(i as u32)),
            _ => {}
        }
    }
    let by_id = |a: &LinkIdx, b: &LinkIdx| net.link(*a).id.cmp(&net.link(*b).id);
    entry.sort_by(by_id);
    exit.sort_by(by_id);
    Ok(Cordon {
        inside_nodes: inside.clone(),
        entry_links: entry,
        exit_links: exit,
    })
}

pub fn build_cordon_from_ids<'a>(
    net: &Network,
    inside_ids: impl IntoIterator<Item = &'a str>,
) -> Result<Cordon> {
    let mut inside = BTreeSet::new();
    for id in inside_ids {
        let idx = net.node_idx(id).ok_or_else(|| SimError::DanglingReference {
            context: "cordon".to_string(),
            kind: "node",
            id: id.to_string(),
        })?;
        inside.insert(idx);
    }
    build_cordon(net, &inside)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A validation finding. Diagnostics are data, not errors; an empty list
/// means the network holds all invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub subject: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Checks structural invariants. When `activity_nodes` is given, also checks
/// that all of them lie in one strongly connected component of the car
/// subgraph (load errors already rule out dangling references, so this
/// focuses on value ranges and connectivity).
pub fn validate(net: &Network, activity_nodes: Option<&[NodeIdx]>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for node in &net.nodes {
        if !node.x.is_finite() || !node.y.is_finite() {
            out.push(Diagnostic {
                subject: format!("node \"{}\"", node.id),
                message: "coordinates are not finite".to_string(),
            });
        }
    }
    for link in &net.links {
        let subject = format!("link \"{}\"", link.id);
        let mut bad = |field: &str, v: f64| {
            out.push(Diagnostic {
                subject: subject.clone(),
                message: format!("{field} must be positive, got {v}"),
            });
        };
        if link.length <= 0.0 || !link.length.is_finite() {
            bad("length", link.length);
        }
        if link.capacity <= 0.0 || !link.capacity.is_finite() {
            bad("capacity", link.capacity);
        }
        if link.free_speed <= 0.0 || !link.free_speed.is_finite() {
            bad("freespeed", link.free_speed);
        }
        if link.from == link.to {
            out.push(Diagnostic {
                subject: subject.clone(),
                message: "from and to nodes are equal".to_string(),
            });
        }
    }

    if let Some(nodes) = activity_nodes {
        if let Some(diag) = check_car_connectivity(net, nodes) {
            out.push(diag);
        }
    }
    out
}

/// All activity nodes must reach each other on the car subgraph. Forward and
/// backward BFS from one activity node suffices: node `v` belongs to the same
/// SCC as the seed iff it is reachable in both directions.
fn check_car_connectivity(net: &Network, activity_nodes: &[NodeIdx]) -> Option<Diagnostic> {
    let seed = *activity_nodes.first()?;
    let forward = bfs(net, seed, false);
    let backward = bfs(net, seed, true);
    for &n in activity_nodes {
        if !forward.contains(&n) || !backward.contains(&n) {
            return Some(Diagnostic {
                subject: format!("node \"{}\"", net.node(n).id),
                message: format!(
                    "carries activities but is not strongly connected to \"{}\" on the car subgraph",
                    net.node(seed).id
                ),
            });
        }
    }
    None
}

fn bfs(net: &Network, seed: NodeIdx, reverse: bool) -> HashSet<NodeIdx> {
    let mut adjacency = vec![Vec::new(); net.nodes.len()];
    for link in &net.links {
        if !link.modes.contains(&Mode::Car) {
            continue;
        }
        let (tail, head) = if reverse {
            (link.to, link.from)
        } else {
            (link.from, link.to)
        };
        adjacency[tail.idx()].push(head);
    }
    let mut seen = HashSet::new();
    seen.insert(seed);
    let mut queue = VecDeque::from([seed]);
    while let Some(n) = queue.pop_front() {
        for &head in &adjacency[n.idx()] {
            if seen.insert(head) {
                queue.push_back(head);
            }
        }
    }
    seen
}
