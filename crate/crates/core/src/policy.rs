//! Route policies: preference (`Min*`) and constraint (`Max*`, avoidance)
//! leaves combined by conjunction.
//!
//! Constraint leaves are boolean tests on a [`RouteView`]. Preference leaves
//! carry an evaluation function; when an operator filters a presented set
//! they act as argmin filters over the constraint survivors.
//!
//! Literal syntax (JSON):
//!
//! ```text
//! "phi" | "min_latency" | "min_hops" | "min_inter_op"
//! {"max_latency_ms": 50} | {"max_hops": 10} | {"max_inter_op": 2}
//! {"avoid": ["LEO-A-34", "LEO-A-43"]}
//! {"avoid": ["LEO-A-34"], "weights": {"LEO-A-34": 2.0}}
//! {"and": [ ... ]}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::topology::OperatorId;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Phi,
    MinLatency,
    /// Upper bound on end-to-end latency, milliseconds.
    MaxLatency(f64),
    MinHops,
    MaxHops(u32),
    MinInterOp,
    MaxInterOp(u32),
    AvoidNodes {
        nodes: Vec<String>,
        weights: Option<BTreeMap<String, f64>>,
    },
    And(Vec<Policy>),
}

/// Leaf selector used by relaxation actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    MinLatency,
    MaxLatency,
    MinHops,
    MaxHops,
    MinInterOp,
    MaxInterOp,
    Avoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxAction {
    /// Add `by` to the bound of a `Max*` leaf (ms for latency).
    IncreaseBound { leaf: LeafKind, by: f64 },
    DropLeaf(LeafKind),
    ShrinkAvoidSet(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewScope {
    EndToEnd,
    OperatorSegment(OperatorId),
}

/// The route quantities a policy is evaluated over.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteView {
    pub latency_s: f64,
    pub hops: u32,
    pub inter_op: u32,
    pub nodes: Vec<Arc<str>>,
    pub scope: ViewScope,
}

impl RouteView {
    pub fn uses(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| &**n == name)
    }
}

impl Policy {
    pub fn avoid<I, S>(nodes: I) -> Policy
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Policy::AvoidNodes {
            nodes: nodes.into_iter().map(Into::into).collect(),
            weights: None,
        }
    }

    pub fn and(parts: Vec<Policy>) -> Policy {
        Policy::And(parts).normalized()
    }

    pub fn kind(&self) -> Option<LeafKind> {
        Some(match self {
            Policy::MinLatency => LeafKind::MinLatency,
            Policy::MaxLatency(_) => LeafKind::MaxLatency,
            Policy::MinHops => LeafKind::MinHops,
            Policy::MaxHops(_) => LeafKind::MaxHops,
            Policy::MinInterOp => LeafKind::MinInterOp,
            Policy::MaxInterOp(_) => LeafKind::MaxInterOp,
            Policy::AvoidNodes { .. } => LeafKind::Avoid,
            Policy::Phi | Policy::And(_) => return None,
        })
    }

    pub fn is_preference(&self) -> bool {
        matches!(self, Policy::MinLatency | Policy::MinHops | Policy::MinInterOp)
    }

    pub fn is_bound(&self) -> bool {
        matches!(
            self,
            Policy::MaxLatency(_) | Policy::MaxHops(_) | Policy::MaxInterOp(_)
        )
    }

    /// All leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&Policy> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Policy, out: &mut Vec<&'a Policy>) {
            match p {
                Policy::And(parts) => parts.iter().for_each(|q| walk(q, out)),
                leaf => out.push(leaf),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn has_preference(&self) -> bool {
        self.leaves().iter().any(|l| l.is_preference())
    }

    /// Flattens nested conjunctions, removes `Phi` members and collapses
    /// single-member conjunctions.
    pub fn normalized(self) -> Policy {
        match self {
            Policy::And(parts) => {
                let mut flat = Vec::new();
                for p in parts {
                    match p.normalized() {
                        Policy::And(inner) => flat.extend(inner),
                        Policy::Phi => {}
                        leaf => flat.push(leaf),
                    }
                }
                match flat.len() {
                    0 => Policy::Phi,
                    1 => flat.pop().unwrap(),
                    _ => Policy::And(flat),
                }
            }
            leaf => leaf,
        }
    }

    /// Checks leaf parameter invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::MaxLatency(ms) if !(ms.is_finite() && *ms > 0.0) => {
                Err(Error::invalid("max_latency_ms", "must be > 0"))
            }
            Policy::MaxHops(0) => Err(Error::invalid("max_hops", "must be >= 1")),
            Policy::AvoidNodes { nodes, weights } => {
                if nodes.is_empty() {
                    return Err(Error::invalid("avoid", "node set must be nonempty"));
                }
                if let Some(w) = weights {
                    for (k, v) in w {
                        if !(v.is_finite() && *v > 0.0) {
                            return Err(Error::invalid(
                                format!("weights.{k}"),
                                "weights must be > 0",
                            ));
                        }
                        if !nodes.contains(k) {
                            return Err(Error::invalid(
                                format!("weights.{k}"),
                                "weighted node is not in the avoid set",
                            ));
                        }
                    }
                }
                Ok(())
            }
            Policy::And(parts) => parts.iter().try_for_each(Policy::validate),
            _ => Ok(()),
        }
    }

    /// Applies one relaxation step.
    pub fn relax(&self, action: &RelaxAction) -> Result<Policy> {
        let mut out = self.clone();
        let target = match action {
            RelaxAction::IncreaseBound { leaf, .. } | RelaxAction::DropLeaf(leaf) => *leaf,
            RelaxAction::ShrinkAvoidSet(_) => LeafKind::Avoid,
        };
        let leaf = out
            .find_leaf_mut(target)
            .ok_or_else(|| Error::RelaxTarget(format!("{target:?} not present in {self}")))?;
        match action {
            RelaxAction::IncreaseBound { by, .. } => {
                if !(by.is_finite() && *by > 0.0) {
                    return Err(Error::invalid("by", "relaxation margin must be > 0"));
                }
                match leaf {
                    Policy::MaxLatency(ms) => *ms += by,
                    Policy::MaxHops(n) | Policy::MaxInterOp(n) => {
                        if by.fract() != 0.0 {
                            return Err(Error::invalid("by", "count bounds relax by whole steps"));
                        }
                        *n += *by as u32;
                    }
                    other => {
                        return Err(Error::RelaxTarget(format!("{other} has no bound")));
                    }
                }
            }
            RelaxAction::DropLeaf(_) => *leaf = Policy::Phi,
            RelaxAction::ShrinkAvoidSet(remove) => {
                let Policy::AvoidNodes { nodes, weights } = leaf else {
                    unreachable!()
                };
                for r in remove {
                    let Some(pos) = nodes.iter().position(|n| n == r) else {
                        return Err(Error::RelaxTarget(format!("{r} is not avoided")));
                    };
                    nodes.remove(pos);
                    if let Some(w) = weights {
                        w.remove(r);
                    }
                }
                if nodes.is_empty() {
                    *leaf = Policy::Phi;
                }
            }
        }
        Ok(out.normalized())
    }

    fn find_leaf_mut(&mut self, kind: LeafKind) -> Option<&mut Policy> {
        match self {
            Policy::And(parts) => parts.iter_mut().find_map(|p| p.find_leaf_mut(kind)),
            leaf if leaf.kind() == Some(kind) => Some(leaf),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Policy::Phi => json!("phi"),
            Policy::MinLatency => json!("min_latency"),
            Policy::MinHops => json!("min_hops"),
            Policy::MinInterOp => json!("min_inter_op"),
            Policy::MaxLatency(ms) => json!({ "max_latency_ms": ms }),
            Policy::MaxHops(n) => json!({ "max_hops": n }),
            Policy::MaxInterOp(n) => json!({ "max_inter_op": n }),
            Policy::AvoidNodes { nodes, weights } => {
                let mut m = Map::new();
                m.insert("avoid".into(), json!(nodes));
                if let Some(w) = weights {
                    m.insert("weights".into(), json!(w));
                }
                Value::Object(m)
            }
            Policy::And(parts) => json!({ "and": parts.iter().map(Policy::to_json).collect::<Vec<_>>() }),
        }
    }

    /// Parses the literal syntax; `path` prefixes error keys.
    pub fn from_json(v: &Value, path: &str) -> Result<Policy> {
        let bad = |reason: &str| Error::invalid(path.to_string(), reason.to_string());
        let p = match v {
            Value::String(s) => match s.as_str() {
                "phi" => Policy::Phi,
                "min_latency" => Policy::MinLatency,
                "min_hops" => Policy::MinHops,
                "min_inter_op" => Policy::MinInterOp,
                other => return Err(bad(&format!("unknown policy `{other}`"))),
            },
            Value::Object(m) => {
                let keys: Vec<&str> = m.keys().map(String::as_str).collect();
                let count = |key: &str| -> Result<u32> {
                    m[key]
                        .as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| Error::invalid(format!("{path}.{key}"), "expected a non-negative integer"))
                };
                match keys.as_slice() {
                    ["and"] => {
                        let arr = m["and"]
                            .as_array()
                            .ok_or_else(|| Error::invalid(format!("{path}.and"), "expected an array"))?;
                        Policy::And(
                            arr.iter()
                                .enumerate()
                                .map(|(i, x)| Policy::from_json(x, &format!("{path}.and[{i}]")))
                                .collect::<Result<_>>()?,
                        )
                    }
                    ["max_latency_ms"] => Policy::MaxLatency(m["max_latency_ms"].as_f64().ok_or_else(
                        || Error::invalid(format!("{path}.max_latency_ms"), "expected a number"),
                    )?),
                    ["max_hops"] => Policy::MaxHops(count("max_hops")?),
                    ["max_inter_op"] => Policy::MaxInterOp(count("max_inter_op")?),
                    ["avoid"] | ["avoid", "weights"] | ["weights", "avoid"] => {
                        let nodes = m["avoid"]
                            .as_array()
                            .and_then(|a| {
                                a.iter()
                                    .map(|x| x.as_str().map(String::from))
                                    .collect::<Option<Vec<_>>>()
                            })
                            .ok_or_else(|| {
                                Error::invalid(format!("{path}.avoid"), "expected an array of node ids")
                            })?;
                        let weights = match m.get("weights") {
                            None => None,
                            Some(w) => Some(
                                serde_json::from_value::<BTreeMap<String, f64>>(w.clone()).map_err(
                                    |_| {
                                        Error::invalid(
                                            format!("{path}.weights"),
                                            "expected an object of node id -> number",
                                        )
                                    },
                                )?,
                            ),
                        };
                        Policy::AvoidNodes { nodes, weights }
                    }
                    _ => return Err(bad(&format!("unrecognized policy keys {keys:?}"))),
                }
            }
            _ => return Err(bad("expected a policy string or object")),
        };
        p.validate().map_err(|e| match e {
            Error::Invalid { key, reason } => Error::invalid(format!("{path}.{key}"), reason),
            other => other,
        })?;
        Ok(p)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Policy::from_json(&v, "policy").map_err(serde::de::Error::custom)
    }
}

/// Evaluation function of a preference or weighted-avoidance leaf.
pub fn evaluate(leaf: &Policy, view: &RouteView) -> Result<f64> {
    match leaf {
        Policy::MinLatency => Ok(view.latency_s),
        Policy::MinHops => Ok(view.hops as f64),
        Policy::MinInterOp => Ok(view.inter_op as f64),
        Policy::AvoidNodes { nodes, weights } => Ok(nodes
            .iter()
            .filter(|n| view.uses(n))
            .map(|n| weights.as_ref().and_then(|w| w.get(n)).copied().unwrap_or(1.0))
            .sum()),
        other => Err(Error::NotAnEvaluation(other.to_string())),
    }
}

/// Constraint check. Preference leaves are always satisfied here.
pub fn satisfies(policy: &Policy, view: &RouteView) -> bool {
    match policy {
        Policy::Phi | Policy::MinLatency | Policy::MinHops | Policy::MinInterOp => true,
        Policy::MaxLatency(ms) => view.latency_s * 1e3 <= *ms,
        Policy::MaxHops(n) => view.hops <= *n,
        Policy::MaxInterOp(n) => view.inter_op <= *n,
        Policy::AvoidNodes { nodes, .. } => !nodes.iter().any(|n| view.uses(n)),
        Policy::And(parts) => parts.iter().all(|p| satisfies(p, view)),
    }
}

/// Positions in `presented` that pass every constraint leaf.
pub fn survivors(policy: &Policy, presented: &[RouteView]) -> Vec<usize> {
    (0..presented.len())
        .filter(|&i| satisfies(policy, &presented[i]))
        .collect()
}

/// Positions in `presented` accepted by `policy`: constraint survivors that
/// also attain the minimum of every preference leaf (ties kept).
pub fn filter_candidates(policy: &Policy, presented: &[RouteView]) -> Vec<usize> {
    let mut keep = survivors(policy, presented);
    let prefs: Vec<&Policy> = policy.leaves().into_iter().filter(|l| l.is_preference()).collect();
    if keep.is_empty() || prefs.is_empty() {
        return keep;
    }
    let mut accept = vec![true; keep.len()];
    for leaf in prefs {
        let scores: Vec<f64> = keep
            .iter()
            .map(|&i| evaluate(leaf, &presented[i]).expect("preference leaf"))
            .collect();
        let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
        for (a, s) in accept.iter_mut().zip(&scores) {
            *a &= *s == best;
        }
    }
    let mut it = accept.into_iter();
    keep.retain(|_| it.next().unwrap());
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn view(latency_ms: f64, hops: u32, inter: u32, nodes: &[&str]) -> RouteView {
        RouteView {
            latency_s: latency_ms / 1e3,
            hops,
            inter_op: inter,
            nodes: nodes.iter().map(|&n| Arc::from(n)).collect(),
            scope: ViewScope::EndToEnd,
        }
    }

    fn c1() -> RouteView {
        view(45.54, 5, 1, &["User", "LEO-A-43", "LEO-B-24", "LEO-B-23", "OGS", "DN"])
    }

    #[test]
    fn evaluation_functions() {
        assert_eq!(evaluate(&Policy::MinHops, &c1()).unwrap(), 5.0);
        let v = view(10.0 + 20.0 + 15.54, 3, 0, &[]);
        assert!((evaluate(&Policy::MinLatency, &v).unwrap() - 0.04554).abs() < 1e-12);
        let w = Policy::AvoidNodes {
            nodes: vec!["X".into()],
            weights: Some([("X".to_string(), 2.0)].into()),
        };
        assert_eq!(evaluate(&w, &c1()).unwrap(), 0.0);
        assert_eq!(evaluate(&w, &view(1.0, 1, 0, &["X"])).unwrap(), 2.0);
        assert!(matches!(
            evaluate(&Policy::MaxHops(3), &c1()),
            Err(Error::NotAnEvaluation(_))
        ));
    }

    #[test]
    fn constraint_checks() {
        assert!(satisfies(&Policy::MaxHops(10), &view(65.49, 6, 1, &[])));
        assert!(!satisfies(&Policy::avoid(["LEO-A-43"]), &c1()));
        assert!(satisfies(&Policy::Phi, &c1()));
        assert!(satisfies(&Policy::MaxLatency(45.54), &c1()));
        assert!(!satisfies(&Policy::MaxLatency(45.5), &c1()));
        assert!(satisfies(&Policy::MaxInterOp(1), &c1()));
        assert!(!satisfies(
            &Policy::and(vec![Policy::MaxHops(10), Policy::avoid(["LEO-A-43"])]),
            &c1()
        ));
    }

    #[test]
    fn argmin_keeps_ties() {
        let views: Vec<_> = [3, 1, 2, 1].iter().map(|&h| view(10.0, h, 0, &[])).collect();
        assert_eq!(filter_candidates(&Policy::MinHops, &views), vec![1, 3]);
        assert_eq!(filter_candidates(&Policy::Phi, &views), vec![0, 1, 2, 3]);
        assert!(filter_candidates(&Policy::MinHops, &[]).is_empty());
    }

    #[test]
    fn constraints_apply_before_argmin() {
        let views = vec![
            view(10.0, 1, 0, &["X"]),
            view(10.0, 2, 0, &["Y"]),
            view(10.0, 2, 0, &["Z"]),
        ];
        let p = Policy::and(vec![Policy::avoid(["X"]), Policy::MinHops]);
        assert_eq!(filter_candidates(&p, &views), vec![1, 2]);
    }

    #[test]
    fn relax_actions() {
        let p = Policy::MaxHops(8)
            .relax(&RelaxAction::IncreaseBound {
                leaf: LeafKind::MaxHops,
                by: 1.0,
            })
            .unwrap();
        assert_eq!(p, Policy::MaxHops(9));

        let p = Policy::MaxLatency(50.0)
            .relax(&RelaxAction::IncreaseBound {
                leaf: LeafKind::MaxLatency,
                by: 10.0,
            })
            .unwrap();
        assert_eq!(p, Policy::MaxLatency(60.0));

        let p = Policy::avoid(["LEO-A-34", "LEO-A-43"])
            .relax(&RelaxAction::ShrinkAvoidSet(vec!["LEO-A-43".into()]))
            .unwrap();
        assert_eq!(p, Policy::avoid(["LEO-A-34"]));

        let p = Policy::and(vec![Policy::avoid(["a"]), Policy::MinHops])
            .relax(&RelaxAction::DropLeaf(LeafKind::MinHops))
            .unwrap();
        assert_eq!(p, Policy::avoid(["a"]));
        let p = p.relax(&RelaxAction::DropLeaf(LeafKind::Avoid)).unwrap();
        assert_eq!(p, Policy::Phi);

        assert!(matches!(
            Policy::MinHops.relax(&RelaxAction::DropLeaf(LeafKind::MaxHops)),
            Err(Error::RelaxTarget(_))
        ));
        assert!(Policy::MaxHops(3)
            .relax(&RelaxAction::IncreaseBound {
                leaf: LeafKind::MaxHops,
                by: 0.5
            })
            .is_err());
        assert!(Policy::avoid(["a"])
            .relax(&RelaxAction::ShrinkAvoidSet(vec!["b".into()]))
            .is_err());
    }

    #[test]
    fn literal_syntax() {
        let text = r#"{"and":[{"max_hops":10},{"avoid":["LEO-A-34","LEO-A-43"]}]}"#;
        let p: Policy = serde_json::from_str(text).unwrap();
        assert_eq!(
            p,
            Policy::And(vec![Policy::MaxHops(10), Policy::avoid(["LEO-A-34", "LEO-A-43"])])
        );
        assert_eq!(serde_json::to_string(&p).unwrap(), text);

        let err = Policy::from_json(&json!({"max_hops": 0}), "policies.A").unwrap_err();
        assert!(err.to_string().contains("policies.A.max_hops"), "{err}");
        let err = Policy::from_json(&json!({"and":[{"avoid": []}]}), "p").unwrap_err();
        assert!(err.to_string().contains("p.and[0].avoid"), "{err}");
        assert!(Policy::from_json(&json!("fastest"), "p").is_err());
        assert!(Policy::from_json(&json!({"max_hops": 3, "extra": 1}), "p").is_err());
    }

    fn arb_leaf() -> impl Strategy<Value = Policy> {
        prop_oneof![
            Just(Policy::Phi),
            Just(Policy::MinLatency),
            Just(Policy::MinHops),
            Just(Policy::MinInterOp),
            (1.0f64..100.0).prop_map(Policy::MaxLatency),
            (1u32..8).prop_map(Policy::MaxHops),
            (0u32..4).prop_map(Policy::MaxInterOp),
            proptest::sample::subsequence(vec!["a", "b", "c", "d", "e"], 1..3)
                .prop_map(Policy::avoid),
        ]
    }

    fn arb_constraint_leaf() -> impl Strategy<Value = Policy> {
        prop_oneof![
            (1.0f64..100.0).prop_map(Policy::MaxLatency),
            (1u32..8).prop_map(Policy::MaxHops),
            (0u32..4).prop_map(Policy::MaxInterOp),
            proptest::sample::subsequence(vec!["a", "b", "c", "d", "e"], 1..3)
                .prop_map(Policy::avoid),
        ]
    }

    fn arb_views() -> impl Strategy<Value = Vec<RouteView>> {
        proptest::collection::vec(
            (
                1u32..100,
                1u32..8,
                0u32..4,
                proptest::sample::subsequence(vec!["a", "b", "c", "d", "e"], 0..4),
            )
                .prop_map(|(l, h, o, n)| view(l as f64, h, o, &n)),
            0..20,
        )
    }

    proptest! {
        #[test]
        fn literal_round_trip(leaves in proptest::collection::vec(arb_leaf(), 1..4)) {
            let p = Policy::And(leaves);
            let text = serde_json::to_string(&p).unwrap();
            let back: Policy = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn conjunction_commutes_and_associates(
            a in arb_leaf(), b in arb_leaf(), c in arb_leaf(), views in arb_views()
        ) {
            let abc = filter_candidates(&Policy::And(vec![a.clone(), b.clone(), c.clone()]), &views);
            let cba = filter_candidates(&Policy::And(vec![c.clone(), b.clone(), a.clone()]), &views);
            let nested = filter_candidates(
                &Policy::And(vec![Policy::And(vec![a.clone(), b.clone()]), c.clone()]), &views);
            prop_assert_eq!(&abc, &cba);
            prop_assert_eq!(&abc, &nested);
        }

        #[test]
        fn relaxing_constraints_only_grows_the_accepted_set(
            leaves in proptest::collection::vec(arb_constraint_leaf(), 1..4),
            pick in 0usize..3,
            views in arb_views(),
        ) {
            let p = Policy::And(leaves.clone());
            let kind = leaves[pick % leaves.len()].kind();
            let leaf = leaves.iter().find(|l| l.kind() == kind).unwrap();
            let action = match leaf {
                Policy::MaxLatency(_) => RelaxAction::IncreaseBound { leaf: LeafKind::MaxLatency, by: 10.0 },
                Policy::MaxHops(_) => RelaxAction::IncreaseBound { leaf: LeafKind::MaxHops, by: 1.0 },
                Policy::MaxInterOp(_) => RelaxAction::DropLeaf(LeafKind::MaxInterOp),
                Policy::AvoidNodes { nodes, .. } => RelaxAction::ShrinkAvoidSet(vec![nodes[0].clone()]),
                _ => unreachable!(),
            };
            let relaxed = p.relax(&action).unwrap();
            let before = filter_candidates(&p, &views);
            let after = filter_candidates(&relaxed, &views);
            prop_assert!(before.iter().all(|i| after.contains(i)));
        }

        #[test]
        fn survivor_set_monotone_with_preferences(
            leaves in proptest::collection::vec(arb_constraint_leaf(), 1..3),
            views in arb_views(),
        ) {
            let mut all = leaves.clone();
            all.push(Policy::MinHops);
            let p = Policy::And(all);
            let relaxed = match &leaves[0] {
                Policy::MaxLatency(_) => p.relax(&RelaxAction::IncreaseBound { leaf: LeafKind::MaxLatency, by: 5.0 }),
                Policy::MaxHops(_) => p.relax(&RelaxAction::IncreaseBound { leaf: LeafKind::MaxHops, by: 2.0 }),
                Policy::MaxInterOp(_) => p.relax(&RelaxAction::IncreaseBound { leaf: LeafKind::MaxInterOp, by: 1.0 }),
                _ => p.relax(&RelaxAction::DropLeaf(LeafKind::Avoid)),
            }.unwrap();
            let before = survivors(&p, &views);
            let after = survivors(&relaxed, &views);
            prop_assert!(before.iter().all(|i| after.contains(i)));
        }

        #[test]
        fn argmin_invariant_under_latency_rescaling(
            views in arb_views(), scale in 0.5f64..4.0
        ) {
            let p = Policy::and(vec![Policy::MinLatency, Policy::MinHops]);
            let scaled: Vec<_> = views.iter().cloned().map(|mut v| { v.latency_s *= scale; v }).collect();
            prop_assert_eq!(filter_candidates(&p, &views), filter_candidates(&p, &scaled));
        }
    }
}
