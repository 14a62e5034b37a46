//! Candidate route enumeration and per-operator decomposition.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::{Policy, RouteView, ViewScope};
use crate::topology::{EdgeRecord, NodeId, OperatorId, Snapshot};

/// A simple source-destination path.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeRecord>,
    pub latency_s: f64,
    pub hops: u32,
    pub inter_op: u32,
}

impl Route {
    /// Builds a route from a chain of edges, checking continuity and
    /// simplicity.
    pub fn from_edges(edges: Vec<EdgeRecord>) -> Result<Route> {
        let first = edges
            .first()
            .ok_or_else(|| Error::Config("route has no links".into()))?;
        let mut nodes = vec![first.from];
        for (k, e) in edges.iter().enumerate() {
            if e.from != *nodes.last().unwrap() {
                return Err(Error::Config(format!("link {k} does not continue the route")));
            }
            if nodes.contains(&e.to) {
                return Err(Error::Config(format!("node {} repeated", e.to.0)));
            }
            nodes.push(e.to);
        }
        let latency_s = edges.iter().map(|e| e.latency_s).sum();
        let inter_op = edges.iter().filter(|e| e.class.is_inter()).count() as u32;
        Ok(Route {
            hops: edges.len() as u32,
            nodes,
            edges,
            latency_s,
            inter_op,
        })
    }

    pub fn latency_ms(&self) -> f64 {
        self.latency_s * 1e3
    }

    pub fn names(&self, s: &Snapshot) -> Vec<String> {
        self.nodes.iter().map(|&v| s.name(v).to_string()).collect()
    }

    pub fn satellite_owners(&self, s: &Snapshot) -> BTreeSet<OperatorId> {
        self.nodes.iter().filter_map(|&v| s.owner(v)).collect()
    }
}

/// End-to-end view of a route.
pub fn route_metrics(s: &Snapshot, route: &Route) -> RouteView {
    RouteView {
        latency_s: route.latency_s,
        hops: route.hops,
        inter_op: route.inter_op,
        nodes: route.nodes.iter().map(|&v| s.node(v).name.clone()).collect(),
        scope: ViewScope::EndToEnd,
    }
}

/// Additive objective used for ranking and for the final selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Latency,
    Hops,
    InterOp,
}

impl Objective {
    pub fn from_policy(p: &Policy) -> Result<Objective> {
        match p {
            Policy::MinLatency => Ok(Objective::Latency),
            Policy::MinHops => Ok(Objective::Hops),
            Policy::MinInterOp => Ok(Objective::InterOp),
            other => Err(Error::invalid(
                "objective",
                format!("expected a single Min* leaf, got {other}"),
            )),
        }
    }

    pub fn edge_cost(self, e: &EdgeRecord) -> f64 {
        match self {
            Objective::Latency => e.latency_s,
            Objective::Hops => 1.0,
            Objective::InterOp => e.class.is_inter() as u32 as f64,
        }
    }

    pub fn value(self, r: &Route) -> f64 {
        match self {
            Objective::Latency => r.latency_s,
            Objective::Hops => r.hops as f64,
            Objective::InterOp => r.inter_op as f64,
        }
    }
}

/// Ascending objective, then lexicographic node-id sequence.
pub fn rank_order(obj: Objective, a: &Route, b: &Route) -> Ordering {
    obj.value(a)
        .total_cmp(&obj.value(b))
        .then_with(|| a.nodes.cmp(&b.nodes))
}

/// Constraint leaves of a Step-1 policy collapsed into prunable bounds.
#[derive(Debug, Clone)]
struct Bounds {
    hops: Option<u32>,
    latency_ms: Option<f64>,
    inter_op: Option<u32>,
    avoided: Vec<bool>,
}

impl Bounds {
    fn from_policy(s: &Snapshot, p: &Policy) -> Bounds {
        let mut b = Bounds {
            hops: None,
            latency_ms: None,
            inter_op: None,
            avoided: vec![false; s.nodes.len()],
        };
        for leaf in p.leaves() {
            match leaf {
                Policy::MaxHops(n) => b.hops = Some(b.hops.map_or(*n, |h| h.min(*n))),
                Policy::MaxLatency(ms) => {
                    b.latency_ms = Some(b.latency_ms.map_or(*ms, |x| x.min(*ms)));
                }
                Policy::MaxInterOp(n) => b.inter_op = Some(b.inter_op.map_or(*n, |h| h.min(*n))),
                Policy::AvoidNodes { nodes, .. } => {
                    for n in nodes {
                        if let Some(v) = s.node_by_name(n) {
                            b.avoided[v.0] = true;
                        }
                    }
                }
                _ => {}
            }
        }
        b
    }

    fn bounded(&self) -> bool {
        self.hops.is_some() || self.latency_ms.is_some() || self.inter_op.is_some()
    }
}

/// Admissible per-node lower bounds on the remaining cost to `dst`.
struct LowerBounds {
    hops: Vec<u32>,
    latency_s: Vec<f64>,
    inter_op: Vec<u32>,
}

impl LowerBounds {
    fn new(s: &Snapshot, dst: NodeId) -> LowerBounds {
        let n = s.nodes.len();
        let mut hops = vec![u32::MAX; n];
        hops[dst.0] = 0;
        let mut q = VecDeque::from([dst]);
        while let Some(v) = q.pop_front() {
            for e in s.in_edges(v) {
                if hops[e.from.0] == u32::MAX {
                    hops[e.from.0] = hops[v.0] + 1;
                    q.push_back(e.from);
                }
            }
        }

        let mut latency_s = vec![f64::INFINITY; n];
        latency_s[dst.0] = 0.0;
        let mut heap = BinaryHeap::from([Reverse((OrdF64(0.0), dst))]);
        while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
            if d > latency_s[v.0] {
                continue;
            }
            for e in s.in_edges(v) {
                let nd = d + e.latency_s;
                if nd < latency_s[e.from.0] {
                    latency_s[e.from.0] = nd;
                    heap.push(Reverse((OrdF64(nd), e.from)));
                }
            }
        }

        let mut inter_op = vec![u32::MAX; n];
        inter_op[dst.0] = 0;
        let mut dq = VecDeque::from([dst]);
        while let Some(v) = dq.pop_front() {
            for e in s.in_edges(v) {
                let w = e.class.is_inter() as u32;
                let nd = inter_op[v.0] + w;
                if nd < inter_op[e.from.0] {
                    inter_op[e.from.0] = nd;
                    if w == 0 {
                        dq.push_front(e.from);
                    } else {
                        dq.push_back(e.from);
                    }
                }
            }
        }
        LowerBounds {
            hops,
            latency_s,
            inter_op,
        }
    }

    fn cost(&self, obj: Objective, v: NodeId) -> f64 {
        match obj {
            Objective::Latency => self.latency_s[v.0],
            Objective::Hops => self.hops[v.0] as f64,
            Objective::InterOp => self.inter_op[v.0] as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}

// Tolerance for comparing summed latencies against bounds computed in a
// different summation order.
const LATENCY_SLACK_MS: f64 = 1e-9;

struct Search<'a> {
    s: &'a Snapshot,
    dst: NodeId,
    bounds: Bounds,
    lb: LowerBounds,
    exclude_single_operator: bool,
}

#[derive(Clone, Copy)]
struct Partial {
    latency_s: f64,
    hops: u32,
    inter_op: u32,
}

impl Search<'_> {
    /// False when every completion of the partial path at `v` breaks a bound.
    fn viable(&self, v: NodeId, p: Partial) -> bool {
        if self.bounds.avoided[v.0] || self.lb.hops[v.0] == u32::MAX {
            return false;
        }
        if let Some(h) = self.bounds.hops {
            if p.hops + self.lb.hops[v.0] > h {
                return false;
            }
        }
        if let Some(l) = self.bounds.latency_ms {
            if (p.latency_s + self.lb.latency_s[v.0]) * 1e3 > l + LATENCY_SLACK_MS {
                return false;
            }
        }
        if let Some(o) = self.bounds.inter_op {
            if p.inter_op.saturating_add(self.lb.inter_op[v.0]) > o {
                return false;
            }
        }
        true
    }

    /// Exact bound and exclusion check on a complete route.
    fn accept(&self, r: &Route) -> bool {
        if self.bounds.hops.is_some_and(|h| r.hops > h)
            || self.bounds.inter_op.is_some_and(|o| r.inter_op > o)
            || self.bounds.latency_ms.is_some_and(|l| r.latency_s * 1e3 > l)
        {
            return false;
        }
        !(self.exclude_single_operator && r.satellite_owners(self.s).len() < 2)
    }

    fn step(p: Partial, e: &EdgeRecord) -> Partial {
        Partial {
            latency_s: p.latency_s + e.latency_s,
            hops: p.hops + 1,
            inter_op: p.inter_op + e.class.is_inter() as u32,
        }
    }

    fn dfs(
        &self,
        v: NodeId,
        p: Partial,
        path: &mut Vec<EdgeRecord>,
        on_path: &mut [bool],
        out: &mut Vec<Route>,
    ) {
        if v == self.dst {
            let r = Route::from_edges(path.clone()).expect("search builds simple paths");
            if self.accept(&r) {
                out.push(r);
            }
            return;
        }
        for e in self.s.out_edges(v) {
            if on_path[e.to.0] {
                continue;
            }
            let np = Self::step(p, e);
            if !self.viable(e.to, np) {
                continue;
            }
            on_path[e.to.0] = true;
            path.push(*e);
            self.dfs(e.to, np, path, on_path, out);
            path.pop();
            on_path[e.to.0] = false;
        }
    }

    fn all_paths(&self, src: NodeId) -> Vec<Route> {
        let zero = Partial {
            latency_s: 0.0,
            hops: 0,
            inter_op: 0,
        };
        if !self.viable(src, zero) {
            return Vec::new();
        }
        let first: Vec<&EdgeRecord> = self.s.out_edges(src).collect();
        first
            .par_iter()
            .map(|e| {
                let mut out = Vec::new();
                let np = Self::step(zero, e);
                if self.viable(e.to, np) {
                    let mut on_path = vec![false; self.s.nodes.len()];
                    on_path[src.0] = true;
                    on_path[e.to.0] = true;
                    let mut path = vec![**e];
                    self.dfs(e.to, np, &mut path, &mut on_path, &mut out);
                }
                out
            })
            .flatten()
            .collect()
    }

    /// Best-first search yielding the `k` lowest-objective routes, plus any
    /// routes tied with the k-th.
    fn best_paths(&self, src: NodeId, obj: Objective, k: usize) -> Vec<Route> {
        struct Entry {
            f: f64,
            g: f64,
            p: Partial,
            nodes: Vec<NodeId>,
            edges: Vec<EdgeRecord>,
        }
        impl PartialEq for Entry {
            fn eq(&self, o: &Self) -> bool {
                self.cmp(o) == Ordering::Equal
            }
        }
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Entry {
            // max-heap: reverse so the smallest f (then node sequence) pops first
            fn cmp(&self, o: &Self) -> Ordering {
                o.f.total_cmp(&self.f).then_with(|| o.nodes.cmp(&self.nodes))
            }
        }

        let zero = Partial {
            latency_s: 0.0,
            hops: 0,
            inter_op: 0,
        };
        let mut found: Vec<Route> = Vec::new();
        if k == 0 || !self.viable(src, zero) {
            return found;
        }
        let slack = |x: f64| x + 1e-9 * x.abs().max(1e-3);
        let mut heap = BinaryHeap::from([Entry {
            f: self.lb.cost(obj, src),
            g: 0.0,
            p: zero,
            nodes: vec![src],
            edges: vec![],
        }]);
        let mut kth: Option<f64> = None;
        while let Some(cur) = heap.pop() {
            if kth.is_some_and(|c| cur.f > slack(c)) {
                break;
            }
            let v = *cur.nodes.last().unwrap();
            if v == self.dst {
                let r = Route::from_edges(cur.edges).expect("search builds simple paths");
                if self.accept(&r) {
                    found.push(r);
                    if found.len() == k {
                        kth = Some(obj.value(found.last().unwrap()));
                    }
                }
                continue;
            }
            for e in self.s.out_edges(v) {
                if cur.nodes.contains(&e.to) {
                    continue;
                }
                let np = Self::step(cur.p, e);
                if !self.viable(e.to, np) {
                    continue;
                }
                let g = cur.g + obj.edge_cost(e);
                let mut nodes = cur.nodes.clone();
                nodes.push(e.to);
                let mut edges = cur.edges.clone();
                edges.push(*e);
                heap.push(Entry {
                    f: g + self.lb.cost(obj, e.to),
                    g,
                    p: np,
                    nodes,
                    edges,
                });
            }
        }
        found
    }
}

/// All simple `source -> dest` paths satisfying the constraint leaves of
/// `policy`, ordered by `objective` then node-id sequence. With `cap`, only
/// the `cap` best are kept.
pub fn enumerate_candidates(
    s: &Snapshot,
    source: NodeId,
    dest: NodeId,
    policy: &Policy,
    objective: &Policy,
    cap: Option<usize>,
    exclude_single_operator: bool,
) -> Result<Vec<Route>> {
    let obj = Objective::from_policy(objective)?;
    for v in [source, dest] {
        if v.0 >= s.nodes.len() {
            return Err(Error::UnknownNode(format!("#{}", v.0)));
        }
    }
    if source == dest {
        return Err(Error::invalid("destination", "must differ from the source"));
    }
    let bounds = Bounds::from_policy(s, policy);
    if !bounds.bounded() && cap.is_none() {
        return Err(Error::Unbounded(format!(
            "policy {policy} has no Max* leaf and no candidate cap is set"
        )));
    }
    let search = Search {
        s,
        dst: dest,
        bounds,
        lb: LowerBounds::new(s, dest),
        exclude_single_operator,
    };
    let mut routes = match cap {
        None => search.all_paths(source),
        Some(k) => search.best_paths(source, obj, k),
    };
    routes.sort_by(|a, b| rank_order(obj, a, b));
    if let Some(k) = cap {
        routes.truncate(k);
    }
    Ok(routes)
}

/// One pass of a route through an operator's network.
#[derive(Debug, Clone, PartialEq)]
pub struct Occurrence {
    pub in_link: Option<EdgeRecord>,
    /// Intra-operator links; empty when the pass touches a single node.
    pub links: Vec<EdgeRecord>,
    pub out_link: Option<EdgeRecord>,
    pub nodes: Vec<NodeId>,
}

/// Maximal runs of operator `op` satellites along `route`.
pub fn decompose(s: &Snapshot, route: &Route, op: OperatorId) -> Vec<Occurrence> {
    let owned: Vec<bool> = route.nodes.iter().map(|&v| s.owner(v) == Some(op)).collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < owned.len() {
        if !owned[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < owned.len() && owned[k + 1] {
            k += 1;
        }
        out.push(Occurrence {
            in_link: start.checked_sub(1).map(|j| route.edges[j]),
            links: route.edges[start..k].to_vec(),
            out_link: route.edges.get(k).copied(),
            nodes: route.nodes[start..=k].to_vec(),
        });
        k += 1;
    }
    out
}

/// What an operator sees of one route: its own segments and the boundary
/// links around them. Hops and latency sum over the segments; inter-operator
/// count covers boundary links of class inter.
pub fn operator_view(s: &Snapshot, occurrences: &[Occurrence], op: OperatorId) -> RouteView {
    let mut latency_s = 0.0;
    let mut hops = 0;
    let mut inter_op = 0;
    let mut nodes: Vec<Arc<str>> = Vec::new();
    let touch = |v: NodeId, nodes: &mut Vec<Arc<str>>| {
        let name = &s.node(v).name;
        if !nodes.contains(name) {
            nodes.push(name.clone());
        }
    };
    for q in occurrences {
        for e in &q.links {
            latency_s += e.latency_s;
            hops += 1;
        }
        for b in [q.in_link, q.out_link].into_iter().flatten() {
            inter_op += b.class.is_inter() as u32;
            touch(b.from, &mut nodes);
            touch(b.to, &mut nodes);
        }
        for &v in &q.nodes {
            touch(v, &mut nodes);
        }
    }
    RouteView {
        latency_s,
        hops,
        inter_op,
        nodes,
        scope: ViewScope::OperatorSegment(op),
    }
}

/// Per-operator view of all candidates, aligned by route index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresentationSet {
    pub entries: Vec<Vec<Occurrence>>,
}

impl PresentationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of routes that pass through the operator.
    pub fn plus(&self) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| !self.entries[i].is_empty())
            .collect()
    }
}

/// One presentation set per operator of the snapshot.
pub fn presentation_sets(s: &Snapshot, routes: &[Route]) -> Vec<PresentationSet> {
    (0..s.operator_count())
        .map(|i| PresentationSet {
            entries: routes
                .iter()
                .map(|r| decompose(s, r, OperatorId(i)))
                .collect(),
        })
        .collect()
}

/// Route dump: quoted node list, then `latency_ms,hops,inter_op`.
pub fn routes_csv(s: &Snapshot, routes: &[Route]) -> String {
    let mut out = String::from("route,latency_ms,hops,inter_op\n");
    for r in routes {
        out.push_str(&format!(
            "\"{}\",{:.6},{},{}\n",
            r.names(s).join(","),
            r.latency_ms(),
            r.hops,
            r.inter_op
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::satisfies;
    use crate::topology::{EdgeClass, NodeKind, NodeRecord};
    use chrono::{TimeZone, Utc};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // nodes: (name, owner); edges: (from, to, latency_ms), added both ways
    fn graph(nodes: &[(&str, Option<usize>)], edges: &[(usize, usize, f64)]) -> Snapshot {
        let recs: Vec<NodeRecord> = nodes
            .iter()
            .enumerate()
            .map(|(i, &(n, o))| NodeRecord {
                id: NodeId(i),
                name: n.into(),
                kind: if o.is_some() { NodeKind::Leo } else { NodeKind::User },
                owner: o.map(OperatorId),
                position: Vector3::zeros(),
            })
            .collect();
        let mut es = Vec::new();
        for &(a, b, ms) in edges {
            for (u, v) in [(a, b), (b, a)] {
                es.push(EdgeRecord {
                    from: NodeId(u),
                    to: NodeId(v),
                    latency_s: ms / 1e3,
                    class: EdgeClass::between(recs[u].owner, recs[v].owner),
                });
            }
        }
        Snapshot::new(
            Utc.with_ymd_and_hms(2024, 12, 15, 0, 0, 0).unwrap(),
            vec!["A".into(), "B".into()],
            recs,
            es,
        )
        .unwrap()
    }

    fn diamond() -> Snapshot {
        graph(
            &[("s", None), ("a", Some(0)), ("b", Some(1)), ("d", None)],
            &[(0, 1, 1.0), (0, 2, 1.0), (1, 3, 2.0), (2, 3, 4.0)],
        )
    }

    #[test]
    fn diamond_two_routes() {
        let s = diamond();
        let r = enumerate_candidates(&s, NodeId(0), NodeId(3), &Policy::MaxHops(2), &Policy::MinLatency, None, false)
            .unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].names(&s), ["s", "a", "d"]);
        assert!((r[0].latency_ms() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_operator_routes_excluded() {
        let s = diamond();
        let r = enumerate_candidates(&s, NodeId(0), NodeId(3), &Policy::MaxHops(2), &Policy::MinLatency, None, true)
            .unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn unbounded_refused() {
        let s = diamond();
        let err = enumerate_candidates(&s, NodeId(0), NodeId(3), &Policy::Phi, &Policy::MinLatency, None, false);
        assert!(matches!(err, Err(Error::Unbounded(_))));
        let ok = enumerate_candidates(&s, NodeId(0), NodeId(3), &Policy::Phi, &Policy::MinLatency, Some(1), false)
            .unwrap();
        assert_eq!(ok.len(), 1);
        assert!(enumerate_candidates(&s, NodeId(0), NodeId(0), &Policy::MaxHops(3), &Policy::MinHops, None, false)
            .is_err());
    }

    #[test]
    fn metrics_of_single_edge() {
        let s = graph(&[("s", None), ("d", None)], &[(0, 1, 7.0)]);
        let r = Route::from_edges(vec![*s.edge(NodeId(0), NodeId(1)).unwrap()]).unwrap();
        let v = route_metrics(&s, &r);
        assert_eq!(v.hops, 1);
        assert!((v.latency_s - 0.007).abs() < 1e-15);
    }

    fn path(s: &Snapshot, names: &[&str]) -> Route {
        let ids: Vec<NodeId> = names.iter().map(|n| s.node_by_name(n).unwrap()).collect();
        Route::from_edges(ids.windows(2).map(|w| *s.edge(w[0], w[1]).unwrap()).collect()).unwrap()
    }

    fn chain(names: &[(&str, Option<usize>)]) -> Snapshot {
        let e: Vec<_> = (0..names.len() - 1).map(|i| (i, i + 1, 10.0)).collect();
        graph(names, &e)
    }

    #[test]
    fn decompose_reference_shapes() {
        let s = chain(&[
            ("User", None),
            ("B-25", Some(1)),
            ("A-25", Some(0)),
            ("A-24", Some(0)),
            ("A-23", Some(0)),
            ("OGS", None),
            ("DN", None),
        ]);
        let r = path(&s, &["User", "B-25", "A-25", "A-24", "A-23", "OGS", "DN"]);
        let qa = decompose(&s, &r, OperatorId(0));
        assert_eq!(qa.len(), 1);
        let name = |v: NodeId| s.name(v).to_string();
        let q = &qa[0];
        assert_eq!((name(q.in_link.unwrap().from), name(q.in_link.unwrap().to)), ("B-25".into(), "A-25".into()));
        assert_eq!(q.links.len(), 2);
        assert_eq!((name(q.out_link.unwrap().from), name(q.out_link.unwrap().to)), ("A-23".into(), "OGS".into()));
        let qb = decompose(&s, &r, OperatorId(1));
        assert_eq!(qb.len(), 1);
        assert!(qb[0].links.is_empty());
        let vb = operator_view(&s, &qb, OperatorId(1));
        assert_eq!(vb.hops, 0);
        assert_eq!(vb.inter_op, 1);

        let s = chain(&[
            ("User", None),
            ("A-32", Some(0)),
            ("B-19", Some(1)),
            ("A-19", Some(0)),
            ("B-6", Some(1)),
            ("OGS", None),
        ]);
        let r = path(&s, &["User", "A-32", "B-19", "A-19", "B-6", "OGS"]);
        assert_eq!(decompose(&s, &r, OperatorId(0)).len(), 2);
        assert_eq!(route_metrics(&s, &r).inter_op, 3);
    }

    #[test]
    fn presentation_alignment() {
        let s = diamond();
        let routes = vec![path(&s, &["s", "a", "d"]), path(&s, &["s", "b", "d"])];
        let ps = presentation_sets(&s, &routes);
        assert_eq!(ps[0].len(), 2);
        assert_eq!(ps[0].plus(), vec![0]);
        assert_eq!(ps[1].plus(), vec![1]);
        assert!(presentation_sets(&s, &[]).iter().all(|p| p.is_empty()));
    }

    #[test]
    fn csv_dump() {
        let s = diamond();
        let csv = routes_csv(&s, &[path(&s, &["s", "a", "d"])]);
        assert_eq!(csv, "route,latency_ms,hops,inter_op\n\"s,a,d\",3.000000,2,0\n");
    }

    fn random_graph(rng: &mut ChaCha8Rng) -> Snapshot {
        let n = rng.gen_range(4..=12);
        let density = rng.gen_range(0.3..0.7);
        let nodes: Vec<(String, Option<usize>)> = (0..n)
            .map(|i| {
                let owner = if i == 0 || i == n - 1 { None } else { Some(rng.gen_range(0..2)) };
                (format!("n{i}"), owner)
            })
            .collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(density) {
                    edges.push((a, b, rng.gen_range(1.0..20.0)));
                }
            }
        }
        let refs: Vec<(&str, Option<usize>)> = nodes.iter().map(|(n, o)| (n.as_str(), *o)).collect();
        graph(&refs, &edges)
    }

    // naive oracle: extend every simple path, no pruning
    fn brute_force(s: &Snapshot, src: NodeId, dst: NodeId, p: &Policy) -> BTreeSet<Vec<NodeId>> {
        let mut out = BTreeSet::new();
        let mut stack = vec![vec![src]];
        while let Some(nodes) = stack.pop() {
            let v = *nodes.last().unwrap();
            if v == dst {
                let r = Route::from_edges(
                    nodes.windows(2).map(|w| *s.edge(w[0], w[1]).unwrap()).collect(),
                )
                .unwrap();
                if satisfies(p, &route_metrics(s, &r)) {
                    out.insert(nodes);
                }
                continue;
            }
            for e in s.out_edges(v) {
                if !nodes.contains(&e.to) {
                    let mut next = nodes.clone();
                    next.push(e.to);
                    stack.push(next);
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = random_graph(&mut rng);
            let (src, dst) = (NodeId(0), NodeId(s.nodes.len() - 1));
            let p = Policy::MaxHops(rng.gen_range(3..=6));
            let got: BTreeSet<Vec<NodeId>> =
                enumerate_candidates(&s, src, dst, &p, &Policy::MinLatency, None, false)
                    .unwrap()
                    .into_iter()
                    .map(|r| r.nodes)
                    .collect();
            assert_eq!(got, brute_force(&s, src, dst, &p));
        }
    }

    #[test]
    fn capped_search_returns_best_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_graph(&mut rng);
            let (src, dst) = (NodeId(0), NodeId(s.nodes.len() - 1));
            let p = Policy::MaxHops(5);
            for obj in [Policy::MinLatency, Policy::MinHops, Policy::MinInterOp] {
                let all = enumerate_candidates(&s, src, dst, &p, &obj, None, true).unwrap();
                for k in [1, 3, 10] {
                    let capped = enumerate_candidates(&s, src, dst, &p, &obj, Some(k), true).unwrap();
                    assert_eq!(capped, all[..k.min(all.len())].to_vec());
                }
            }
        }
    }

    #[test]
    fn reconstruction_and_inter_op_accounting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let s = random_graph(&mut rng);
            let (src, dst) = (NodeId(0), NodeId(s.nodes.len() - 1));
            let routes =
                enumerate_candidates(&s, src, dst, &Policy::MaxHops(6), &Policy::MinHops, None, false).unwrap();
            for r in &routes {
                let mut inter: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
                let mut covered: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
                for op in 0..2 {
                    for q in decompose(&s, r, OperatorId(op)) {
                        for e in q.links.iter().chain(q.in_link.iter()).chain(q.out_link.iter()) {
                            covered.insert((e.from, e.to));
                            if e.class.is_inter() {
                                inter.insert((e.from, e.to));
                            }
                        }
                    }
                }
                assert_eq!(inter.len() as u32, r.inter_op);
                // links not covered by any operator join two unowned nodes
                for e in &r.edges {
                    if !covered.contains(&(e.from, e.to)) {
                        assert!(s.owner(e.from).is_none() && s.owner(e.to).is_none());
                    }
                }
            }
        }
    }

    #[test]
    fn larger_hop_bound_keeps_routes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let s = random_graph(&mut rng);
            let (src, dst) = (NodeId(0), NodeId(s.nodes.len() - 1));
            let get = |h| -> BTreeSet<Vec<NodeId>> {
                enumerate_candidates(&s, src, dst, &Policy::MaxHops(h), &Policy::MinLatency, None, true)
                    .unwrap()
                    .into_iter()
                    .map(|r| r.nodes)
                    .collect()
            };
            let (small, big) = (get(3), get(5));
            assert!(small.is_subset(&big));
        }
    }
}
