//! Three-step weak-control orchestration, the centralized baseline and the
//! relaxation loop.
//!
//! The orchestrator enumerates candidates under its Step-1 constraints and
//! presents each operator only its own segments. Operators return the route
//! indices they accept; the orchestrator intersects them and picks the best
//! survivor by its Step-3 objective. An operator never vetoes a route it does
//! not carry.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{filter_candidates, Policy, RelaxAction, RouteView};
use crate::routing::{
    enumerate_candidates, operator_view, presentation_sets, rank_order, Objective, Route,
};
use crate::topology::{NodeId, OperatorId, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorConfig {
    pub step1_policy: Policy,
    pub step3_objective: Policy,
    #[serde(default)]
    pub candidate_cap: Option<usize>,
    #[serde(default = "default_true")]
    pub exclude_single_operator: bool,
}

fn default_true() -> bool {
    true
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.step1_policy.validate()?;
        if self.step1_policy.has_preference() {
            return Err(Error::invalid(
                "orchestrator.step1_policy",
                "must contain constraint leaves only",
            ));
        }
        Objective::from_policy(&self.step3_objective).map_err(|_| {
            Error::invalid(
                "orchestrator.step3_objective",
                "must be exactly one of min_latency, min_hops, min_inter_op",
            )
        })?;
        if self.candidate_cap == Some(0) {
            return Err(Error::invalid("orchestrator.candidate_cap", "must be >= 1"));
        }
        Ok(())
    }
}

/// Private operator policies keyed by operator name. Operators without an
/// entry accept everything.
pub type OperatorPolicies = BTreeMap<String, Policy>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Orchestrator,
    Operator(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAction {
    pub actor: Actor,
    pub action: RelaxAction,
}

pub type RelaxSchedule = Vec<ScheduledAction>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Relaxation applied just before this round.
    pub applied: Option<ScheduledAction>,
    pub step1_policy: Policy,
    pub operator_policies: OperatorPolicies,
    pub n_r: usize,
    /// `|S_i+|` per operator.
    pub presented: BTreeMap<String, usize>,
    /// `|S_i*|` per operator.
    pub selected: BTreeMap<String, usize>,
    pub intersection: usize,
    pub route: Option<Vec<String>>,
    pub hops: Option<u32>,
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Exhausted,
    /// A scheduled action could not be applied; the trace so far is kept.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationOutcome {
    pub status: Status,
    pub rounds: Vec<RoundRecord>,
    pub route: Option<Vec<String>>,
    pub hops: Option<u32>,
    pub latency_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub final_route: Option<Route>,
}

/// Everything computed in one round, for studies that need more than counts.
#[derive(Debug, Clone)]
pub struct RoundDetail {
    pub candidates: Vec<Route>,
    /// `|S_i+|` per operator index.
    pub presented: Vec<usize>,
    /// Accepted route indices per operator index (`S_i*`).
    pub accepted: Vec<Vec<usize>>,
    /// Route indices in `R*`, ascending.
    pub intersection: Vec<usize>,
    /// Index of the selected route.
    pub selected: Option<usize>,
}

impl RoundDetail {
    pub fn route(&self) -> Option<&Route> {
        self.selected.map(|i| &self.candidates[i])
    }
}

fn resolve_policies(s: &Snapshot, ops: &OperatorPolicies) -> Result<Vec<Policy>> {
    let mut out = vec![Policy::Phi; s.operator_count()];
    for (name, p) in ops {
        let id = s
            .operator_id(name)
            .ok_or_else(|| Error::UnknownOperator(name.clone()))?;
        out[id.0] = p.clone();
    }
    Ok(out)
}

/// Candidates with each operator's view of them, built once per candidate
/// list and reusable across operator policy changes.
#[derive(Debug, Clone)]
pub struct Presented {
    pub candidates: Vec<Route>,
    /// Per operator: `(route index, segment view)` for routes in `S_i+`.
    pub views: Vec<Vec<(usize, RouteView)>>,
    /// Per operator: whether each route passes through it.
    pub touches: Vec<Vec<bool>>,
}

impl Presented {
    pub fn new(s: &Snapshot, candidates: Vec<Route>) -> Presented {
        let sets = presentation_sets(s, &candidates);
        let (views, touches) = sets
            .par_iter()
            .enumerate()
            .map(|(i, set)| {
                let views = set
                    .plus()
                    .into_iter()
                    .map(|k| (k, operator_view(s, &set.entries[k], OperatorId(i))))
                    .collect();
                let touches = set.entries.iter().map(|e| !e.is_empty()).collect();
                (views, touches)
            })
            .unzip();
        Presented {
            candidates,
            views,
            touches,
        }
    }

    /// `S_i*` of one operator under `policy`, as route indices.
    pub fn accepted_by(&self, op: OperatorId, policy: &Policy) -> Vec<usize> {
        let (idx, views): (Vec<usize>, Vec<RouteView>) = self.views[op.0].iter().cloned().unzip();
        filter_candidates(policy, &views)
            .into_iter()
            .map(|j| idx[j])
            .collect()
    }

    /// Intersection over operators (untouched routes pass) and the selected
    /// index.
    pub fn resolve(&self, accepted: &[Vec<usize>], objective: Objective) -> (Vec<usize>, Option<usize>) {
        let n = self.candidates.len();
        let mut ok = vec![true; n];
        for (i, acc) in accepted.iter().enumerate() {
            let mut mine = vec![false; n];
            for &k in acc {
                mine[k] = true;
            }
            for k in 0..n {
                if self.touches[i][k] && !mine[k] {
                    ok[k] = false;
                }
            }
        }
        let intersection: Vec<usize> = (0..n).filter(|&k| ok[k]).collect();
        let selected = intersection
            .iter()
            .copied()
            .min_by(|&a, &b| rank_order(objective, &self.candidates[a], &self.candidates[b]));
        (intersection, selected)
    }

    /// Steps 2 and 3 given each operator's accepted set.
    pub fn finish(&self, accepted: Vec<Vec<usize>>, objective: Objective) -> RoundDetail {
        let (intersection, selected) = self.resolve(&accepted, objective);
        RoundDetail {
            candidates: self.candidates.clone(),
            presented: self.views.iter().map(Vec::len).collect(),
            accepted,
            intersection,
            selected,
        }
    }

    /// Steps 2 and 3 under the given operator policies.
    pub fn select(&self, s: &Snapshot, objective: &Policy, ops: &OperatorPolicies) -> Result<RoundDetail> {
        let obj = Objective::from_policy(objective)?;
        let policies = resolve_policies(s, ops)?;
        let accepted = (0..policies.len())
            .into_par_iter()
            .map(|i| self.accepted_by(OperatorId(i), &policies[i]))
            .collect();
        Ok(self.finish(accepted, obj))
    }
}

/// Steps 2 and 3 over an already enumerated candidate list.
pub fn select(
    s: &Snapshot,
    candidates: Vec<Route>,
    objective: &Policy,
    ops: &OperatorPolicies,
) -> Result<RoundDetail> {
    Presented::new(s, candidates).select(s, objective, ops)
}

/// Steps 1 to 3 once.
pub fn run_round_detail(
    s: &Snapshot,
    source: NodeId,
    dest: NodeId,
    oc: &OrchestratorConfig,
    ops: &OperatorPolicies,
) -> Result<RoundDetail> {
    oc.validate()?;
    let candidates = enumerate_candidates(
        s,
        source,
        dest,
        &oc.step1_policy,
        &oc.step3_objective,
        oc.candidate_cap,
        oc.exclude_single_operator,
    )?;
    select(s, candidates, &oc.step3_objective, ops)
}

fn record(
    s: &Snapshot,
    round: usize,
    applied: Option<ScheduledAction>,
    oc: &OrchestratorConfig,
    ops: &OperatorPolicies,
    d: &RoundDetail,
) -> RoundRecord {
    let by_name = |v: &[usize]| -> BTreeMap<String, usize> {
        s.operators.iter().cloned().zip(v.iter().copied()).collect()
    };
    let route = d.route();
    RoundRecord {
        round,
        applied,
        step1_policy: oc.step1_policy.clone(),
        operator_policies: ops.clone(),
        n_r: d.candidates.len(),
        presented: by_name(&d.presented),
        selected: by_name(&d.accepted.iter().map(Vec::len).collect::<Vec<_>>()),
        intersection: d.intersection.len(),
        route: route.map(|r| r.names(s)),
        hops: route.map(|r| r.hops),
        latency_ms: route.map(Route::latency_ms),
    }
}

/// One round; returns its record and the selected route.
pub fn run_round(
    s: &Snapshot,
    source: NodeId,
    dest: NodeId,
    oc: &OrchestratorConfig,
    ops: &OperatorPolicies,
) -> Result<(RoundRecord, Option<Route>)> {
    let d = run_round_detail(s, source, dest, oc, ops)?;
    Ok((record(s, 1, None, oc, ops, &d), d.route().cloned()))
}

/// Baseline: the constraint-satisfying route minimizing `objective` over the
/// whole graph, with the same single-operator exclusion.
pub fn centralized_route(
    s: &Snapshot,
    source: NodeId,
    dest: NodeId,
    objective: &Policy,
    constraints: &Policy,
    exclude_single_operator: bool,
) -> Result<Option<Route>> {
    Ok(enumerate_candidates(
        s,
        source,
        dest,
        constraints,
        objective,
        Some(1),
        exclude_single_operator,
    )?
    .into_iter()
    .next())
}

/// Runs rounds, applying the next scheduled relaxation after each failed
/// round, until a route is found or the schedule runs out.
pub fn orchestrate(
    s: &Snapshot,
    source: NodeId,
    dest: NodeId,
    oc: &OrchestratorConfig,
    ops: &OperatorPolicies,
    schedule: &[ScheduledAction],
) -> Result<OrchestrationOutcome> {
    oc.validate()?;
    resolve_policies(s, ops)?;
    let mut oc = oc.clone();
    let mut ops = ops.clone();
    let mut rounds = Vec::new();
    let mut presented: Option<Presented> = None;
    let mut applied = None;
    let mut pending = schedule.iter();
    loop {
        let p = match presented.take() {
            Some(p) => p,
            None => Presented::new(
                s,
                enumerate_candidates(
                    s,
                    source,
                    dest,
                    &oc.step1_policy,
                    &oc.step3_objective,
                    oc.candidate_cap,
                    oc.exclude_single_operator,
                )?,
            ),
        };
        let d = p.select(s, &oc.step3_objective, &ops)?;
        rounds.push(record(s, rounds.len() + 1, applied.take(), &oc, &ops, &d));
        if let Some(r) = d.route() {
            return Ok(OrchestrationOutcome {
                status: Status::Solved,
                rounds,
                route: Some(r.names(s)),
                hops: Some(r.hops),
                latency_ms: Some(r.latency_ms()),
                error: None,
                final_route: Some(r.clone()),
            });
        }
        let Some(next) = pending.next() else {
            return Ok(unsolved(Status::Exhausted, rounds, None));
        };
        let step = match &next.actor {
            Actor::Orchestrator => oc.step1_policy.relax(&next.action).and_then(|p| {
                let relaxed = OrchestratorConfig {
                    step1_policy: p,
                    ..oc.clone()
                };
                relaxed.validate()?;
                oc = relaxed;
                Ok(())
            }),
            Actor::Operator(name) => {
                if s.operator_id(name).is_none() {
                    Err(Error::UnknownOperator(name.clone()))
                } else {
                    let cur = ops.get(name).cloned().unwrap_or(Policy::Phi);
                    cur.relax(&next.action).map(|p| {
                        ops.insert(name.clone(), p);
                    })
                }
            }
        };
        if let Err(e) = step {
            return Ok(unsolved(Status::Aborted, rounds, Some(e.to_string())));
        }
        if matches!(next.actor, Actor::Operator(_)) {
            presented = Some(p);
        }
        applied = Some(next.clone());
    }
}

fn unsolved(status: Status, rounds: Vec<RoundRecord>, error: Option<String>) -> OrchestrationOutcome {
    OrchestrationOutcome {
        status,
        rounds,
        route: None,
        hops: None,
        latency_ms: None,
        error,
        final_route: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::LeafKind;
    use crate::topology::{EdgeClass, EdgeRecord, NodeKind, NodeRecord};
    use chrono::{TimeZone, Utc};
    use nalgebra::Vector3;

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

    // s - a1 - b1 - d  (fast, uses a1)
    // s - a2 - b1 - d  (slower)
    // s - b2 - a2 - ...
    fn net() -> Snapshot {
        graph(
            &[
                ("s", None),
                ("a1", Some(0)),
                ("a2", Some(0)),
                ("b1", Some(1)),
                ("b2", Some(1)),
                ("d", None),
            ],
            &[
                (0, 1, 1.0),
                (0, 2, 3.0),
                (1, 3, 1.0),
                (2, 3, 1.0),
                (3, 5, 1.0),
                (0, 4, 2.0),
                (4, 2, 2.0),
                (2, 5, 2.0),
            ],
        )
    }

    fn oc(step1: Policy) -> OrchestratorConfig {
        OrchestratorConfig {
            step1_policy: step1,
            step3_objective: Policy::MinLatency,
            candidate_cap: None,
            exclude_single_operator: true,
        }
    }

    #[test]
    fn config_validation() {
        assert!(oc(Policy::MinHops).validate().is_err());
        let mut c = oc(Policy::MaxHops(3));
        c.step3_objective = Policy::and(vec![Policy::MinHops, Policy::MinLatency]);
        assert!(c.validate().is_err());
        let mut c = oc(Policy::MaxHops(3));
        c.candidate_cap = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_phi_matches_centralized() {
        let s = net();
        let (r, route) = run_round(&s, NodeId(0), NodeId(5), &oc(Policy::MaxHops(4)), &OperatorPolicies::new()).unwrap();
        let c = centralized_route(&s, NodeId(0), NodeId(5), &Policy::MinLatency, &Policy::MaxHops(4), true)
            .unwrap()
            .unwrap();
        assert_eq!(route.unwrap(), c);
        assert_eq!(r.intersection, r.n_r);
    }

    #[test]
    fn avoidance_forces_detour() {
        let s = net();
        let ops = OperatorPolicies::from([("A".to_string(), Policy::avoid(["a1"]))]);
        let (r, route) = run_round(&s, NodeId(0), NodeId(5), &oc(Policy::MaxHops(4)), &ops).unwrap();
        let route = route.unwrap();
        assert_eq!(route.names(&s), ["s", "a2", "b1", "d"]);
        assert!(r.intersection <= r.selected["A"].min(r.selected["B"]));
        let c = centralized_route(&s, NodeId(0), NodeId(5), &Policy::MinLatency, &Policy::MaxHops(4), true)
            .unwrap()
            .unwrap();
        assert!(route.latency_s >= c.latency_s);
    }

    #[test]
    fn centralized_diamond_and_disconnected() {
        let s = graph(
            &[("s", None), ("a", Some(0)), ("b", Some(1)), ("d", None), ("x", Some(0))],
            &[(0, 1, 1.0), (0, 2, 1.0), (1, 3, 2.0), (2, 3, 4.0)],
        );
        let r = centralized_route(&s, NodeId(0), NodeId(3), &Policy::MinLatency, &Policy::Phi, false)
            .unwrap()
            .unwrap();
        assert!((r.latency_ms() - 3.0).abs() < 1e-9);
        assert!(centralized_route(&s, NodeId(4), NodeId(3), &Policy::MinLatency, &Policy::Phi, false)
            .unwrap()
            .is_none());
    }

    #[test]
    fn untouched_routes_not_vetoed() {
        // only route passing A is rejected by A; B-only routes excluded
        let s = graph(
            &[("s", None), ("a", Some(0)), ("b", Some(1)), ("c", Some(1)), ("d", None)],
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 4, 1.0), (0, 3, 5.0), (3, 4, 5.0), (0, 2, 12.0)],
        );
        let mut c = oc(Policy::MaxHops(4));
        c.exclude_single_operator = false;
        let ops = OperatorPolicies::from([("A".to_string(), Policy::avoid(["a"]))]);
        let (r, route) = run_round(&s, NodeId(0), NodeId(4), &c, &ops).unwrap();
        assert_eq!(r.selected["A"], 0);
        assert_eq!(route.unwrap().names(&s), ["s", "c", "d"]);
    }

    #[test]
    fn schedule_replay() {
        let s = net();
        let ops = OperatorPolicies::from([
            ("A".to_string(), Policy::avoid(["a1", "a2"])),
            ("B".to_string(), Policy::MinHops),
        ]);
        let schedule = vec![
            ScheduledAction {
                actor: Actor::Operator("B".into()),
                action: RelaxAction::DropLeaf(LeafKind::MinHops),
            },
            ScheduledAction {
                actor: Actor::Operator("A".into()),
                action: RelaxAction::ShrinkAvoidSet(vec!["a2".into()]),
            },
        ];
        let out = orchestrate(&s, NodeId(0), NodeId(5), &oc(Policy::MaxHops(4)), &ops, &schedule).unwrap();
        assert_eq!(out.status, Status::Solved);
        assert_eq!(out.rounds.len(), 3);
        assert_eq!(out.rounds[0].intersection, 0);
        assert_eq!(out.rounds[1].intersection, 0);
        assert!(out.rounds[2].applied.is_some());

        let out = orchestrate(&s, NodeId(0), NodeId(5), &oc(Policy::MaxHops(4)), &ops, &schedule[..1]).unwrap();
        assert_eq!(out.status, Status::Exhausted);

        let bad = vec![ScheduledAction {
            actor: Actor::Orchestrator,
            action: RelaxAction::DropLeaf(LeafKind::MaxLatency),
        }];
        let out = orchestrate(&s, NodeId(0), NodeId(5), &oc(Policy::MaxHops(4)), &ops, &bad).unwrap();
        assert_eq!(out.status, Status::Aborted);
        assert_eq!(out.rounds.len(), 1);
    }

    #[test]
    fn orchestrator_relaxation_re_enumerates() {
        let s = net();
        let mut c = oc(Policy::and(vec![Policy::MaxHops(4), Policy::MaxLatency(3.5)]));
        c.exclude_single_operator = true;
        let ops = OperatorPolicies::from([("A".to_string(), Policy::avoid(["a1"]))]);
        let schedule = vec![ScheduledAction {
            actor: Actor::Orchestrator,
            action: RelaxAction::IncreaseBound {
                leaf: LeafKind::MaxLatency,
                by: 10.0,
            },
        }];
        let out = orchestrate(&s, NodeId(0), NodeId(5), &c, &ops, &schedule).unwrap();
        assert_eq!(out.status, Status::Solved);
        assert!(out.rounds[1].n_r > out.rounds[0].n_r);
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["status"], "solved");
        assert_eq!(json["hops"], 3);
    }

    #[test]
    fn schedule_json() {
        let text = r#"[{"actor":{"operator":"B"},"action":{"drop_leaf":"min_hops"}},
                       {"actor":"orchestrator","action":{"increase_bound":{"leaf":"max_latency","by":10.0}}}]"#;
        let sched: RelaxSchedule = serde_json::from_str(text).unwrap();
        assert_eq!(sched[0].actor, Actor::Operator("B".into()));
        assert_eq!(
            sched[1].action,
            RelaxAction::IncreaseBound {
                leaf: LeafKind::MaxLatency,
                by: 10.0
            }
        );
    }
}
