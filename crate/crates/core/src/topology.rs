//! Per-time-step feasible-link graphs with operator ownership.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    elevation_deg, geo_position, line_of_sight, propagate_orbit, site_position, EarthFrame,
    EciPosition, GeoSlot, GroundSite, OrbitElements, SiteRole, EARTH_RADIUS_M, SPEED_OF_LIGHT,
};
use crate::linkbudget::{
    link_feasible, Carrier, LinkBudgetParams, LinkClassRules, LinkGeometry, RfNoiseParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OperatorId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Leo,
    Geo,
    User,
    Ogs,
    Dn,
}

impl NodeKind {
    pub fn is_satellite(self) -> bool {
        matches!(self, NodeKind::Leo | NodeKind::Geo)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Leo => "leo",
            NodeKind::Geo => "geo",
            NodeKind::User => "user",
            NodeKind::Ogs => "ogs",
            NodeKind::Dn => "dn",
        }
    }
}

impl From<SiteRole> for NodeKind {
    fn from(r: SiteRole) -> Self {
        match r {
            SiteRole::User => NodeKind::User,
            SiteRole::Ogs => NodeKind::Ogs,
            SiteRole::Dn => NodeKind::Dn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeGeometry {
    Orbit(OrbitElements),
    Geo(GeoSlot),
    Site(GroundSite),
}

/// Position of a satellite in a regular constellation lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSlot {
    pub shell: usize,
    pub plane: usize,
    pub slot: usize,
    pub planes: usize,
    pub per_plane: usize,
}

impl GridSlot {
    /// In-plane ring neighbours or same slot in an adjacent plane.
    pub fn adjacent(&self, o: &GridSlot) -> bool {
        fn ring(a: usize, b: usize, n: usize) -> bool {
            n > 1 && ((a + 1) % n == b || (b + 1) % n == a)
        }
        if self.shell != o.shell {
            return false;
        }
        (self.plane == o.plane && ring(self.slot, o.slot, self.per_plane))
            || (self.slot == o.slot && ring(self.plane, o.plane, self.planes))
    }
}

/// Static description of a node; positions come from `geometry`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: Arc<str>,
    pub kind: NodeKind,
    pub owner: Option<OperatorId>,
    pub geometry: NodeGeometry,
    pub grid: Option<GridSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub name: Arc<str>,
    pub kind: NodeKind,
    pub owner: Option<OperatorId>,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Intra(OperatorId),
    Inter(OperatorId, OperatorId),
    Endpoint,
}

impl EdgeClass {
    pub fn between(a: Option<OperatorId>, b: Option<OperatorId>) -> Self {
        match (a, b) {
            (Some(i), Some(j)) if i == j => EdgeClass::Intra(i),
            (Some(i), Some(j)) => EdgeClass::Inter(i, j),
            _ => EdgeClass::Endpoint,
        }
    }

    pub fn is_inter(self) -> bool {
        matches!(self, EdgeClass::Inter(..))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub latency_s: f64,
    pub class: EdgeClass,
}

/// Transmit/receive terminal characteristics of a node kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TerminalParams {
    #[serde(default)]
    pub transmit_power_dbm: Option<f64>,
    #[serde(default)]
    pub tx_gain_dbi: Option<f64>,
    #[serde(default)]
    pub rx_gain_dbi: Option<f64>,
}

impl TerminalParams {
    fn tx(&self) -> Option<(f64, f64)> {
        Some((self.transmit_power_dbm?, self.tx_gain_dbi?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAttachment {
    /// Edge to every satellite passing visibility and distance checks.
    #[default]
    AllVisible,
    /// Edge to the closest such satellite only.
    Nearest,
}

/// Which LEO-LEO pairs may carry an ISL before feasibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IslPattern {
    /// Every pair.
    #[default]
    Mesh,
    /// Four-neighbour lattice from each satellite's [`GridSlot`].
    Grid,
}

/// RF budget for user links; when absent, users attach geometrically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserRfBudget {
    pub params: LinkBudgetParams,
    pub noise: RfNoiseParams,
    pub required_cnr_db: f64,
}

/// Resolved link model of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub carrier: Carrier,
    pub other_losses_db: f64,
    /// Optical links not involving a GEO node.
    pub leo_rules: LinkClassRules,
    /// Optical links with at least one GEO endpoint.
    pub geo_rules: LinkClassRules,
    pub user_distance_threshold_m: Option<f64>,
    pub user_attachment: UserAttachment,
    pub user_rf: Option<UserRfBudget>,
    pub min_elevation_deg: f64,
    pub occlusion_margin_m: f64,
    pub isl_pattern: IslPattern,
    /// Terminal cap on LEO-LEO links per satellite; `None` is unlimited.
    pub max_isl_degree: Option<usize>,
    /// LEO partners kept per GEO satellite, nearest first; `None` is unlimited.
    pub geo_leo_links: Option<usize>,
    pub leo: TerminalParams,
    pub geo: TerminalParams,
    pub ogs: TerminalParams,
}

impl LinkConfig {
    fn terminal(&self, kind: NodeKind) -> TerminalParams {
        match kind {
            NodeKind::Leo => self.leo,
            NodeKind::Geo => self.geo,
            NodeKind::Ogs => self.ogs,
            _ => TerminalParams::default(),
        }
    }

    /// Budget for the directed optical link `from -> to`, if both terminals
    /// are equipped for it.
    pub fn budget(&self, from: NodeKind, to: NodeKind) -> Option<LinkBudgetParams> {
        let (pt, gt) = self.terminal(from).tx()?;
        let gr = self.terminal(to).rx_gain_dbi?;
        Some(LinkBudgetParams {
            transmit_power_dbm: pt,
            tx_gain_dbi: gt,
            rx_gain_dbi: gr,
            other_losses_db: self.other_losses_db,
            carrier: self.carrier,
        })
    }

    fn rules(&self, a: NodeKind, b: NodeKind) -> &LinkClassRules {
        if a == NodeKind::Geo || b == NodeKind::Geo {
            &self.geo_rules
        } else {
            &self.leo_rules
        }
    }
}

/// Everything needed to build a snapshot at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub frame: EarthFrame,
    pub operators: Vec<String>,
    pub nodes: Vec<NodeSpec>,
    pub links: LinkConfig,
}

impl Network {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| &*n.name == name)
            .map(NodeId)
    }

    pub fn operator_id(&self, name: &str) -> Option<OperatorId> {
        self.operators.iter().position(|o| o == name).map(OperatorId)
    }

    pub fn position(&self, node: &NodeSpec, t: DateTime<Utc>) -> Result<EciPosition> {
        Ok(match &node.geometry {
            NodeGeometry::Orbit(el) => propagate_orbit(el, t)?,
            NodeGeometry::Geo(slot) => geo_position(slot, &self.frame, t),
            NodeGeometry::Site(site) => site_position(site, &self.frame, t),
        })
    }
}

/// The feasible-link graph at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: DateTime<Utc>,
    pub operators: Vec<String>,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    by_name: HashMap<Arc<str>, NodeId>,
}

impl Snapshot {
    /// Assembles a snapshot, validating edge endpoints and rejecting self-loops.
    pub fn new(
        t: DateTime<Utc>,
        operators: Vec<String>,
        nodes: Vec<NodeRecord>,
        edges: Vec<EdgeRecord>,
    ) -> Result<Self> {
        let n = nodes.len();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != NodeId(i) {
                return Err(Error::Config(format!(
                    "node `{}` has id {} at position {i}",
                    node.name, node.id.0
                )));
            }
            if node.kind.is_satellite() && node.owner.is_none() {
                return Err(Error::Config(format!("satellite `{}` has no owner", node.name)));
            }
            if let Some(o) = node.owner {
                if o.0 >= operators.len() {
                    return Err(Error::UnknownOperator(format!("#{}", o.0)));
                }
            }
        }
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.from.0 >= n || e.to.0 >= n {
                return Err(Error::UnknownNode(format!("edge {k} endpoint out of range")));
            }
            if e.from == e.to {
                return Err(Error::Config(format!("self-loop at node {}", e.from.0)));
            }
            if !(e.latency_s >= 0.0) {
                return Err(Error::Config(format!("edge {k} has negative latency")));
            }
            out_edges[e.from.0].push(k);
            in_edges[e.to.0].push(k);
        }
        let mut by_name = HashMap::with_capacity(n);
        for node in &nodes {
            if by_name.insert(node.name.clone(), node.id).is_some() {
                return Err(Error::Config(format!("duplicate node id `{}`", node.name)));
            }
        }
        Ok(Snapshot {
            t,
            operators,
            nodes,
            edges,
            out_edges,
            in_edges,
            by_name,
        })
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn owner(&self, id: NodeId) -> Option<OperatorId> {
        self.nodes[id.0].owner
    }

    /// Outgoing edges of `v`.
    pub fn out_edges(&self, v: NodeId) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.out_edges[v.0].iter().map(move |&k| &self.edges[k])
    }

    /// Incoming edges of `v`.
    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.in_edges[v.0].iter().map(move |&k| &self.edges[k])
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&EdgeRecord> {
        self.out_edges(from).find(|e| e.to == to)
    }

    pub fn operator_count(&self) -> usize {
        self.operators.len()
    }

    pub fn operator_id(&self, name: &str) -> Option<OperatorId> {
        self.operators.iter().position(|o| o == name).map(OperatorId)
    }

    /// Node table as CSV: `id,kind,owner,x,y,z`.
    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("id,kind,owner,x,y,z\n");
        for n in &self.nodes {
            let owner = n.owner.map(|o| self.operators[o.0].as_str()).unwrap_or("");
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.3},{:.3}",
                n.name,
                n.kind.as_str(),
                owner,
                n.position.x,
                n.position.y,
                n.position.z
            );
        }
        s
    }

    /// Edge table as CSV: `from,to,latency_s,class`.
    pub fn edges_csv(&self) -> String {
        let mut s = String::from("from,to,latency_s,class\n");
        for e in &self.edges {
            let class = match e.class {
                EdgeClass::Intra(i) => format!("intra({})", self.operators[i.0]),
                EdgeClass::Inter(i, j) => {
                    format!("inter({};{})", self.operators[i.0], self.operators[j.0])
                }
                EdgeClass::Endpoint => "endpoint".to_string(),
            };
            let _ = writeln!(
                s,
                "{},{},{:.9},{}",
                self.name(e.from),
                self.name(e.to),
                e.latency_s,
                class
            );
        }
        s
    }

    pub fn timestamp(&self) -> String {
        self.t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

fn edge(nodes: &[NodeRecord], from: usize, to: usize) -> EdgeRecord {
    let d = (nodes[from].position - nodes[to].position).norm();
    EdgeRecord {
        from: NodeId(from),
        to: NodeId(to),
        latency_s: d / SPEED_OF_LIGHT,
        class: EdgeClass::between(nodes[from].owner, nodes[to].owner),
    }
}

fn pair_feasible(
    links: &LinkConfig,
    nodes: &[NodeRecord],
    from: usize,
    to: usize,
    visible: bool,
    distance_m: f64,
) -> Result<bool> {
    let (a, b) = (nodes[from].kind, nodes[to].kind);
    let Some(budget) = links.budget(a, b) else {
        return Ok(false);
    };
    link_feasible(
        links.rules(a, b),
        &budget,
        None,
        LinkGeometry {
            visible,
            distance_m,
        },
    )
}

fn eci(nodes: &[NodeRecord], i: usize, t: DateTime<Utc>) -> EciPosition {
    EciPosition {
        r: nodes[i].position,
        t,
    }
}

/// Builds the feasible-link graph of `net` at time `t`.
pub fn build_snapshot(net: &Network, t: DateTime<Utc>) -> Result<Snapshot> {
    let links = &net.links;
    let mut nodes = Vec::with_capacity(net.nodes.len());
    for (i, spec) in net.nodes.iter().enumerate() {
        nodes.push(NodeRecord {
            id: NodeId(i),
            name: spec.name.clone(),
            kind: spec.kind,
            owner: spec.owner,
            position: net.position(spec, t)?.r,
        });
    }
    let sats: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind.is_satellite())
        .collect();
    let occlusion = EARTH_RADIUS_M + links.occlusion_margin_m;

    // Directed satellite-satellite candidates, grouped per unordered pair.
    let mut isl: Vec<(f64, usize, usize, bool, bool)> = Vec::new();
    for (ai, &u) in sats.iter().enumerate() {
        for &v in &sats[ai + 1..] {
            if links.isl_pattern == IslPattern::Grid
                && nodes[u].kind == NodeKind::Leo
                && nodes[v].kind == NodeKind::Leo
            {
                match (&net.nodes[u].grid, &net.nodes[v].grid) {
                    (Some(a), Some(b)) if a.adjacent(b) => {}
                    _ => continue,
                }
            }
            let (pu, pv) = (eci(&nodes, u, t), eci(&nodes, v, t));
            if !line_of_sight(&pu, &pv, occlusion) {
                continue;
            }
            let d = pu.distance_to(&pv);
            let fwd = pair_feasible(links, &nodes, u, v, true, d)?;
            let bwd = pair_feasible(links, &nodes, v, u, true, d)?;
            if fwd || bwd {
                isl.push((d, u, v, fwd, bwd));
            }
        }
    }
    if let Some(cap) = links.max_isl_degree {
        // Nearest-first terminal assignment; only LEO-LEO links use the pool.
        isl.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut degree = vec![0usize; nodes.len()];
        isl.retain(|&(_, u, v, _, _)| {
            if nodes[u].kind != NodeKind::Leo || nodes[v].kind != NodeKind::Leo {
                return true;
            }
            if degree[u] < cap && degree[v] < cap {
                degree[u] += 1;
                degree[v] += 1;
                true
            } else {
                false
            }
        });
        isl.sort_by_key(|&(_, u, v, _, _)| (u, v));
    }
    if let Some(cap) = links.geo_leo_links {
        let is_geo_leo = |u: usize, v: usize| {
            matches!(
                (nodes[u].kind, nodes[v].kind),
                (NodeKind::Geo, NodeKind::Leo) | (NodeKind::Leo, NodeKind::Geo)
            )
        };
        let mut order: Vec<usize> = (0..isl.len()).collect();
        order.sort_by(|&x, &y| isl[x].0.total_cmp(&isl[y].0).then(x.cmp(&y)));
        let mut used = vec![0usize; nodes.len()];
        let mut keep = vec![true; isl.len()];
        for i in order {
            let (_, u, v, _, _) = isl[i];
            if !is_geo_leo(u, v) {
                continue;
            }
            let g = if nodes[u].kind == NodeKind::Geo { u } else { v };
            keep[i] = used[g] < cap;
            used[g] += keep[i] as usize;
        }
        let mut k = keep.into_iter();
        isl.retain(|_| k.next().unwrap_or(true));
    }
    let mut edges = Vec::new();
    for &(_, u, v, fwd, bwd) in &isl {
        if fwd {
            edges.push(edge(&nodes, u, v));
        }
        if bwd {
            edges.push(edge(&nodes, v, u));
        }
    }

    // Ground links.
    let sites: Vec<usize> = (0..nodes.len())
        .filter(|&i| !nodes[i].kind.is_satellite())
        .collect();
    for &g in &sites {
        let pg = eci(&nodes, g, t);
        match nodes[g].kind {
            NodeKind::Ogs => {
                for &s in &sats {
                    let ps = eci(&nodes, s, t);
                    let visible = elevation_deg(&pg, &ps)? >= links.min_elevation_deg;
                    let d = pg.distance_to(&ps);
                    if pair_feasible(links, &nodes, s, g, visible, d)? {
                        edges.push(edge(&nodes, s, g));
                    }
                    if pair_feasible(links, &nodes, g, s, visible, d)? {
                        edges.push(edge(&nodes, g, s));
                    }
                }
            }
            NodeKind::User => {
                let mut attach = Vec::new();
                for &s in &sats {
                    let ps = eci(&nodes, s, t);
                    let d = pg.distance_to(&ps);
                    let visible = elevation_deg(&pg, &ps)? >= links.min_elevation_deg;
                    let within = links.user_distance_threshold_m.map_or(true, |x| d <= x);
                    let ok = match &links.user_rf {
                        None => visible && within,
                        Some(rf) => link_feasible(
                            &LinkClassRules::rf(links.user_distance_threshold_m, rf.required_cnr_db),
                            &rf.params,
                            Some(&rf.noise),
                            LinkGeometry {
                                visible,
                                distance_m: d,
                            },
                        )?,
                    };
                    if ok {
                        attach.push((d, s));
                    }
                }
                if links.user_attachment == UserAttachment::Nearest {
                    attach.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                    attach.truncate(1);
                }
                for (_, s) in attach {
                    edges.push(edge(&nodes, g, s));
                    edges.push(edge(&nodes, s, g));
                }
            }
            NodeKind::Dn => {
                for &o in &sites {
                    if nodes[o].kind == NodeKind::Ogs {
                        edges.push(edge(&nodes, o, g));
                        edges.push(edge(&nodes, g, o));
                    }
                }
            }
            _ => {}
        }
    }
    Snapshot::new(t, net.operators.clone(), nodes, edges)
}

/// Snapshots at `t0 + k*step_s` for `k = 0..count`.
pub fn snapshot_series(
    net: &Network,
    t0: DateTime<Utc>,
    step_s: f64,
    count: usize,
) -> Result<Vec<Snapshot>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be >= 1"));
    }
    if !(step_s > 0.0) {
        return Err(Error::invalid("step_s", "must be > 0"));
    }
    (0..count)
        .into_par_iter()
        .map(|k| build_snapshot(net, step_time(t0, step_s, k)))
        .collect()
}

pub fn step_time(t0: DateTime<Utc>, step_s: f64, k: usize) -> DateTime<Utc> {
    t0 + chrono::Duration::milliseconds((step_s * 1000.0 * k as f64).round() as i64)
}

/// Keeps operator `op`'s satellites plus all un-owned endpoints.
pub fn restrict_to_operator(s: &Snapshot, op: OperatorId) -> Result<Snapshot> {
    if op.0 >= s.operators.len() {
        return Err(Error::UnknownOperator(format!("#{}", op.0)));
    }
    let mut remap = vec![None; s.nodes.len()];
    let mut nodes = Vec::new();
    for n in &s.nodes {
        if n.owner.map_or(true, |o| o == op) {
            remap[n.id.0] = Some(NodeId(nodes.len()));
            let mut r = n.clone();
            r.id = NodeId(nodes.len());
            nodes.push(r);
        }
    }
    let edges = s
        .edges
        .iter()
        .filter_map(|e| {
            Some(EdgeRecord {
                from: remap[e.from.0]?,
                to: remap[e.to.0]?,
                ..*e
            })
        })
        .collect();
    Snapshot::new(s.t, s.operators.clone(), nodes, edges)
}

/// True iff `dst` is reachable from `src`.
pub fn reachable(s: &Snapshot, src: NodeId, dst: NodeId) -> bool {
    let mut seen = vec![false; s.nodes.len()];
    let mut stack = vec![src];
    seen[src.0] = true;
    while let Some(v) = stack.pop() {
        if v == dst {
            return true;
        }
        for e in s.out_edges(v) {
            if !seen[e.to.0] {
                seen[e.to.0] = true;
                stack.push(e.to);
            }
        }
    }
    false
}
