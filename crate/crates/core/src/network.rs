//! Radial MV network model in per-unit.
//!
//! Node ids are opaque strings. A [`NetworkModel`] keeps nodes sorted by id and lines sorted by
//! `(from, to)` so every derived output has a deterministic order. Topology checks live in
//! [`NetworkModel::validate_radial`], which yields a [`RadialNetwork`]: the only form the power
//! flow and OPF accept.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("cannot read network file: {0}")]
    Io(String),
    #[error("cannot parse network file: {0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    Units { line: String, message: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("line {line} references unknown node {node}")]
    UnknownNode { line: String, node: String },
    #[error("node {0}: transformer rating must be positive")]
    InvalidRating(String),
    #[error("node {0}: slack node carries no transformer rating")]
    SlackRating(String),
    #[error("line {0}: impedance must be nonnegative and not zero")]
    InvalidImpedance(String),
    #[error("line {0}: squared current limit must be positive")]
    InvalidCurrentLimit(String),
    #[error("invalid operating limits: {0}")]
    InvalidLimits(String),
    #[error("per-unit base must be positive (got {0})")]
    NonPositiveBase(f64),
    #[error("expected exactly one slack node, found {}: [{}]", .0.len(), .0.join(", "))]
    SlackCount(Vec<String>),
    #[error("cycle detected through nodes [{}]", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("disconnected from the slack: [{}]", .0.join(", "))]
    Disconnected(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "slack")]
    Slack,
    #[serde(rename = "transformer-node")]
    Transformer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// MV/LV transformer nameplate rating in kVA; `None` for the slack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_kva: Option<f64>,
}

impl Node {
    pub fn slack(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Slack,
            rating_kva: None,
        }
    }

    pub fn transformer(id: impl Into<String>, rating_kva: f64) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Transformer,
            rating_kva: Some(rating_kva),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Bound on the squared current magnitude `l = |I|^2`, in pu^2.
    pub i_max_pu: f64,
}

impl LineSegment {
    pub fn new(from: impl Into<String>, to: impl Into<String>, r_pu: f64, x_pu: f64, i_max_pu: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            r_pu,
            x_pu,
            i_max_pu,
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

/// Squared voltage magnitude limits, in pu^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingLimits {
    pub v_min_pu2: f64,
    pub v_max_pu2: f64,
    pub v_slack_pu2: f64,
}

impl OperatingLimits {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidLimits(m.to_string()));
        if !(self.v_min_pu2 > 0.0 && self.v_min_pu2 < self.v_max_pu2) {
            return bad("require 0 < v_min_pu2 < v_max_pu2");
        }
        if !(self.v_min_pu2 <= self.v_slack_pu2 && self.v_slack_pu2 <= self.v_max_pu2) {
            return bad("require v_min_pu2 <= v_slack_pu2 <= v_max_pu2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkModel {
    nodes: Vec<Node>,
    lines: Vec<LineSegment>,
    limits: OperatingLimits,
    s_base_mva: f64,
    v_base_kv: f64,
}

/// Converts an impedance in ohms to per-unit on the given voltage and power bases.
pub fn to_per_unit(raw_ohms: f64, raw_kv: f64, s_base_mva: f64) -> Result<f64, NetworkError> {
    if !(raw_kv > 0.0) {
        return Err(NetworkError::NonPositiveBase(raw_kv));
    }
    if !(s_base_mva > 0.0) {
        return Err(NetworkError::NonPositiveBase(s_base_mva));
    }
    Ok(raw_ohms / (raw_kv * raw_kv / s_base_mva))
}

impl NetworkModel {
    /// Checks field invariants and canonicalizes ordering. Topology is checked separately by
    /// [`NetworkModel::validate_radial`].
    pub fn new(
        mut nodes: Vec<Node>,
        mut lines: Vec<LineSegment>,
        limits: OperatingLimits,
        s_base_mva: f64,
        v_base_kv: f64,
    ) -> Result<Self, NetworkError> {
        for base in [s_base_mva, v_base_kv] {
            if !(base > 0.0) {
                return Err(NetworkError::NonPositiveBase(base));
            }
        }
        limits.validate()?;
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(NetworkError::DuplicateNode(pair[0].id.clone()));
            }
        }
        for node in &nodes {
            match (node.kind, node.rating_kva) {
                (NodeKind::Transformer, Some(r)) if r > 0.0 && r.is_finite() => {}
                (NodeKind::Transformer, _) => return Err(NetworkError::InvalidRating(node.id.clone())),
                (NodeKind::Slack, None) => {}
                (NodeKind::Slack, Some(_)) => return Err(NetworkError::SlackRating(node.id.clone())),
            }
        }
        lines.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        for line in &lines {
            for end in [&line.from, &line.to] {
                if nodes.binary_search_by(|n| n.id.as_str().cmp(end)).is_err() {
                    return Err(NetworkError::UnknownNode {
                        line: line.label(),
                        node: end.clone(),
                    });
                }
            }
            let ok = line.r_pu >= 0.0
                && line.x_pu >= 0.0
                && line.r_pu.is_finite()
                && line.x_pu.is_finite()
                && (line.r_pu > 0.0 || line.x_pu > 0.0);
            if !ok {
                return Err(NetworkError::InvalidImpedance(line.label()));
            }
            if !(line.i_max_pu > 0.0) {
                return Err(NetworkError::InvalidCurrentLimit(line.label()));
            }
        }
        Ok(Self {
            nodes,
            lines,
            limits,
            s_base_mva,
            v_base_kv,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn lines(&self) -> &[LineSegment] {
        &self.lines
    }

    pub fn limits(&self) -> &OperatingLimits {
        &self.limits
    }

    pub fn s_base_mva(&self) -> f64 {
        self.s_base_mva
    }

    pub fn v_base_kv(&self) -> f64 {
        self.v_base_kv
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.id.as_str().cmp(id)).ok()
    }

    /// Power in kW (or kvar) to per-unit.
    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw / (1000.0 * self.s_base_mva)
    }

    pub fn pu_to_kw(&self, pu: f64) -> f64 {
        pu * 1000.0 * self.s_base_mva
    }

    /// Accepts iff the graph is a tree containing exactly one slack node.
    pub fn validate_radial(&self) -> Result<RadialNetwork, NetworkError> {
        let slacks: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Slack)
            .collect();
        if slacks.len() != 1 {
            return Err(NetworkError::SlackCount(
                slacks.iter().map(|&i| self.nodes[i].id.clone()).collect(),
            ));
        }
        let slack = slacks[0];
        let n = self.nodes.len();
        let ends: Vec<(usize, usize)> = self
            .lines
            .iter()
            .map(|l| (self.node_index(&l.from).unwrap(), self.node_index(&l.to).unwrap()))
            .collect();

        // Grow a forest line by line; the first line closing a loop identifies the cycle.
        let mut forest: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut uf = UnionFind::new(n);
        for &(a, b) in &ends {
            if a == b || !uf.union(a, b) {
                let mut cycle = forest_path(&forest, a, b);
                cycle.sort_unstable();
                return Err(NetworkError::Cycle(
                    cycle.into_iter().map(|i| self.nodes[i].id.clone()).collect(),
                ));
            }
            forest[a].push(b);
            forest[b].push(a);
        }

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, &(a, b)) in ends.iter().enumerate() {
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let mut parent = vec![None; n];
        let mut parent_line = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([slack]);
        seen[slack] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some(i);
                    parent_line[j] = Some(k);
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        if order.len() != n {
            return Err(NetworkError::Disconnected(
                (0..n)
                    .filter(|&i| !seen[i])
                    .map(|i| self.nodes[i].id.clone())
                    .collect(),
            ));
        }

        let mut children = vec![Vec::new(); n];
        let mut line_child = vec![0; self.lines.len()];
        for j in 0..n {
            if let (Some(i), Some(k)) = (parent[j], parent_line[j]) {
                children[i].push(j);
                line_child[k] = j;
            }
        }
        let line_parent = line_child.iter().map(|&j| parent[j].unwrap()).collect();
        Ok(RadialNetwork {
            model: self.clone(),
            topology: RadialTopology {
                slack,
                parent,
                parent_line,
                children,
                order,
                depth,
                line_parent,
                line_child,
            },
        })
    }

    /// SHA-256 of the canonical per-unit file serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        NetworkFile::from_model(self).to_toml()
    }

    pub fn from_toml(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        file.into_model()
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Nodes on the forest path from `a` to `b` (inclusive).
fn forest_path(forest: &[Vec<usize>], a: usize, b: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; forest.len()];
    prev[a] = a;
    let mut queue = VecDeque::from([a]);
    while let Some(i) = queue.pop_front() {
        if i == b {
            break;
        }
        for &j in &forest[i] {
            if prev[j] == usize::MAX {
                prev[j] = i;
                queue.push_back(j);
            }
        }
    }
    let mut path = vec![b];
    let mut cur = b;
    while cur != a {
        cur = prev[cur];
        path.push(cur);
    }
    path
}

/// Tree structure rooted at the slack. Indices refer to [`NetworkModel::nodes`] and
/// [`NetworkModel::lines`]; every line is oriented parent to child.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTopology {
    pub slack: usize,
    pub parent: Vec<Option<usize>>,
    pub parent_line: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Breadth-first order from the slack: parents precede children.
    pub order: Vec<usize>,
    pub depth: Vec<usize>,
    pub line_parent: Vec<usize>,
    pub line_child: Vec<usize>,
}

/// A network that passed [`NetworkModel::validate_radial`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialNetwork {
    model: NetworkModel,
    topology: RadialTopology,
}

impl std::ops::Deref for RadialNetwork {
    type Target = NetworkModel;

    fn deref(&self) -> &NetworkModel {
        &self.model
    }
}

/// Feeder label per node; the slack belongs to no feeder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeederMap {
    labels: Vec<Option<String>>,
    feeders: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeederLabel(pub usize);

impl fmt::Display for FeederLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

impl FeederMap {
    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels[node].as_deref()
    }

    /// Feeder label to member node indices, members in node order.
    pub fn feeders(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.feeders
    }

    pub fn members(&self, feeder: &str) -> Option<&[usize]> {
        self.feeders.get(feeder).map(Vec::as_slice)
    }
}

impl RadialNetwork {
    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn topology(&self) -> &RadialTopology {
        &self.topology
    }

    pub fn slack(&self) -> usize {
        self.topology.slack
    }

    /// Non-slack nodes in node order.
    pub fn transformer_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes().len()).filter(move |&i| i != self.topology.slack)
    }

    /// Each child subtree of the slack is one feeder. Children of the slack are labeled
    /// `F1`, `F2`, ... in id order.
    pub fn feeder_partition(&self) -> FeederMap {
        let topo = &self.topology;
        let mut labels = vec![None; self.nodes().len()];
        let mut feeders = BTreeMap::new();
        for (k, &root) in topo.children[topo.slack].iter().enumerate() {
            let label = FeederLabel(k + 1).to_string();
            let mut members = Vec::new();
            let mut stack = vec![root];
            while let Some(i) = stack.pop() {
                labels[i] = Some(label.clone());
                members.push(i);
                stack.extend(&topo.children[i]);
            }
            members.sort_unstable();
            feeders.insert(label, members);
        }
        FeederMap { labels, feeders }
    }

    /// Line connecting the slack to the root of each feeder.
    pub fn feeder_head_lines(&self) -> BTreeMap<String, usize> {
        let topo = &self.topology;
        topo.children[topo.slack]
            .iter()
            .enumerate()
            .map(|(k, &root)| (FeederLabel(k + 1).to_string(), topo.parent_line[root].unwrap()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpedanceUnits {
    Ohms,
    Pu,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_ohm: Option<f64>,
    i_max_pu: f64,
}

/// On-disk network document (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    units: ImpedanceUnits,
    s_base_mva: f64,
    v_base_kv: f64,
    limits: OperatingLimits,
    nodes: Vec<Node>,
    lines: Vec<LineRecord>,
}

impl NetworkFile {
    fn from_model(model: &NetworkModel) -> Self {
        Self {
            units: ImpedanceUnits::Pu,
            s_base_mva: model.s_base_mva,
            v_base_kv: model.v_base_kv,
            limits: model.limits,
            nodes: model.nodes.clone(),
            lines: model
                .lines
                .iter()
                .map(|l| LineRecord {
                    from: l.from.clone(),
                    to: l.to.clone(),
                    r_pu: Some(l.r_pu),
                    x_pu: Some(l.x_pu),
                    r_ohm: None,
                    x_ohm: None,
                    i_max_pu: l.i_max_pu,
                })
                .collect(),
        }
    }

    fn to_toml(&self) -> String {
        toml::to_string(self).expect("network serializes")
    }

    fn into_model(self) -> Result<NetworkModel, NetworkError> {
        let mut lines = Vec::with_capacity(self.lines.len());
        for rec in self.lines {
            let label = format!("{}-{}", rec.from, rec.to);
            let units_err = |message: &str| NetworkError::Units {
                line: label.clone(),
                message: message.to_string(),
            };
            let has_pu = rec.r_pu.is_some() || rec.x_pu.is_some();
            let has_ohm = rec.r_ohm.is_some() || rec.x_ohm.is_some();
            let (r, x) = match self.units {
                ImpedanceUnits::Pu => {
                    if has_ohm {
                        return Err(units_err("ohm impedance in a file declared `units = \"pu\"`"));
                    }
                    (
                        rec.r_pu.ok_or_else(|| units_err("missing r_pu"))?,
                        rec.x_pu.ok_or_else(|| units_err("missing x_pu"))?,
                    )
                }
                ImpedanceUnits::Ohms => {
                    if has_pu {
                        return Err(units_err("per-unit impedance in a file declared `units = \"ohms\"`"));
                    }
                    let r = rec.r_ohm.ok_or_else(|| units_err("missing r_ohm"))?;
                    let x = rec.x_ohm.ok_or_else(|| units_err("missing x_ohm"))?;
                    (
                        to_per_unit(r, self.v_base_kv, self.s_base_mva)?,
                        to_per_unit(x, self.v_base_kv, self.s_base_mva)?,
                    )
                }
            };
            lines.push(LineSegment::new(rec.from, rec.to, r, x, rec.i_max_pu));
        }
        NetworkModel::new(self.nodes, lines, self.limits, self.s_base_mva, self.v_base_kv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits() -> OperatingLimits {
        OperatingLimits {
            v_min_pu2: 0.81,
            v_max_pu2: 1.21,
            v_slack_pu2: 1.0,
        }
    }

    fn line(a: &str, b: &str) -> LineSegment {
        LineSegment::new(a, b, 0.01, 0.01, 1.0)
    }

    fn model(nodes: Vec<Node>, lines: Vec<LineSegment>) -> NetworkModel {
        NetworkModel::new(nodes, lines, limits(), 10.0, 20.0).unwrap()
    }

    #[test]
    fn smallest_tree() {
        let m = model(
            vec![Node::slack("n1"), Node::transformer("n2", 100.0)],
            vec![line("n1", "n2")],
        );
        let radial = m.validate_radial().unwrap();
        assert_eq!(radial.topology().parent[1], Some(0));
        assert_eq!(radial.topology().order, vec![0, 1]);
    }

    #[test]
    fn triangle_is_a_cycle() {
        let m = model(
            vec![
                Node::slack("a"),
                Node::transformer("b", 100.0),
                Node::transformer("c", 100.0),
            ],
            vec![line("a", "b"), line("b", "c"), line("c", "a")],
        );
        assert_eq!(
            m.validate_radial(),
            Err(NetworkError::Cycle(vec!["a".into(), "b".into(), "c".into()]))
        );
    }

    #[test]
    fn disconnected_nodes_are_named() {
        let m = model(
            vec![
                Node::slack("a"),
                Node::transformer("b", 100.0),
                Node::transformer("c", 100.0),
                Node::transformer("d", 100.0),
            ],
            vec![line("a", "b"), line("c", "d")],
        );
        assert_eq!(
            m.validate_radial(),
            Err(NetworkError::Disconnected(vec!["c".into(), "d".into()]))
        );
    }

    #[test]
    fn slack_count_is_checked() {
        let none = model(vec![Node::transformer("a", 1.0), Node::transformer("b", 1.0)], vec![line("a", "b")]);
        assert_eq!(none.validate_radial(), Err(NetworkError::SlackCount(vec![])));
        let two = model(vec![Node::slack("a"), Node::slack("b")], vec![line("a", "b")]);
        assert_eq!(
            two.validate_radial(),
            Err(NetworkError::SlackCount(vec!["a".into(), "b".into()]))
        );
    }

    #[test]
    fn field_invariants() {
        let bad_rating = NetworkModel::new(vec![Node::transformer("a", 0.0)], vec![], limits(), 10.0, 20.0);
        assert_eq!(bad_rating, Err(NetworkError::InvalidRating("a".into())));
        let zero_z = NetworkModel::new(
            vec![Node::slack("a"), Node::transformer("b", 1.0)],
            vec![LineSegment::new("a", "b", 0.0, 0.0, 1.0)],
            limits(),
            10.0,
            20.0,
        );
        assert_eq!(zero_z, Err(NetworkError::InvalidImpedance("a-b".into())));
        let bad_limits = OperatingLimits {
            v_min_pu2: 1.1,
            v_max_pu2: 1.0,
            v_slack_pu2: 1.0,
        };
        assert!(NetworkModel::new(vec![], vec![], bad_limits, 1.0, 1.0).is_err());
        let unknown = NetworkModel::new(vec![Node::slack("a")], vec![line("a", "zz")], limits(), 1.0, 1.0);
        assert!(matches!(unknown, Err(NetworkError::UnknownNode { .. })));
    }

    #[test]
    fn per_unit_conversion() {
        assert_eq!(to_per_unit(0.0, 22.0, 10.0).unwrap(), 0.0);
        assert!((to_per_unit(4.84, 22.0, 10.0).unwrap() - 0.1).abs() < 1e-12);
        assert!((to_per_unit(48.4, 22.0, 10.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(to_per_unit(1.0, 0.0, 10.0), Err(NetworkError::NonPositiveBase(0.0)));
        assert_eq!(to_per_unit(1.0, 22.0, -1.0), Err(NetworkError::NonPositiveBase(-1.0)));
    }

    #[test]
    fn feeders_single_chain_and_star() {
        let chain = model(
            vec![
                Node::slack("s"),
                Node::transformer("a", 1.0),
                Node::transformer("b", 1.0),
                Node::transformer("c", 1.0),
            ],
            vec![line("s", "a"), line("a", "b"), line("b", "c")],
        );
        let fm = chain.validate_radial().unwrap().feeder_partition();
        assert_eq!(fm.feeders().len(), 1);
        assert_eq!(fm.members("F1").unwrap().len(), 3);
        assert_eq!(fm.label(chain.node_index("s").unwrap()), None);

        let star = model(
            vec![
                Node::slack("s"),
                Node::transformer("a", 1.0),
                Node::transformer("b", 1.0),
                Node::transformer("c", 1.0),
                Node::transformer("d", 1.0),
            ],
            vec![line("s", "a"), line("s", "b"), line("s", "c"), line("s", "d")],
        );
        let fm = star.validate_radial().unwrap().feeder_partition();
        assert_eq!(fm.feeders().len(), 4);
        assert!(fm.feeders().values().all(|m| m.len() == 1));
        assert_eq!(fm.label(star.node_index("c").unwrap()), Some("F3"));
    }

    #[test]
    fn file_rejects_mixed_units() {
        let text = r#"
units = "pu"
s_base_mva = 10.0
v_base_kv = 20.0
[limits]
v_min_pu2 = 0.81
v_max_pu2 = 1.21
v_slack_pu2 = 1.0
[[nodes]]
id = "a"
kind = "slack"
[[nodes]]
id = "b"
kind = "transformer-node"
rating_kva = 250.0
[[lines]]
from = "a"
to = "b"
r_pu = 0.01
x_ohm = 0.2
i_max_pu = 1.0
"#;
        assert!(matches!(NetworkModel::from_toml(text), Err(NetworkError::Units { .. })));
        let ohms = text
            .replace("units = \"pu\"", "units = \"ohms\"")
            .replace("r_pu = 0.01", "r_ohm = 4.0");
        let m = NetworkModel::from_toml(&ohms).unwrap();
        assert!((m.lines()[0].r_pu - 0.1).abs() < 1e-12);
        assert!((m.lines()[0].x_pu - 0.005).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip_preserves_model() {
        let m = model(
            vec![Node::slack("s"), Node::transformer("a", 400.0)],
            vec![line("s", "a")],
        );
        let back = NetworkModel::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }
}
