use std::path::PathBuf;

use ntnorch::experiments::{run_study, Study};
use ntnorch::scenario::Scenario;
use ntnorch::topology::{NodeKind, OperatorId};
use ntnorch::Error;

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn counts(scn: &Scenario, kind: NodeKind) -> Vec<usize> {
    (0..scn.network.operators.len())
        .map(|i| {
            scn.network
                .nodes
                .iter()
                .filter(|n| n.kind == kind && n.owner == Some(OperatorId(i)))
                .count()
        })
        .collect()
}

#[test]
fn two_operator_has_hundred_leo() {
    let scn = Scenario::load(&path("two_operator.json")).unwrap();
    assert_eq!(scn.network.operators, ["A", "B"]);
    assert_eq!(counts(&scn, NodeKind::Leo), [50, 50]);
    assert_eq!(scn.steps, 61);
}

#[test]
fn multilayer_node_counts() {
    let scn = Scenario::load(&path("multilayer.json")).unwrap();
    assert_eq!(counts(&scn, NodeKind::Leo), [39, 39]);
    assert_eq!(counts(&scn, NodeKind::Geo), [0, 3]);
    for name in ["LEO-A-39", "LEO-B-1", "GEO-B-3"] {
        assert!(scn.network.node_id(name).is_some(), "{name}");
    }
}

#[test]
fn bad_inclination_names_key() {
    let text = std::fs::read_to_string(path("two_operator.json")).unwrap();
    let bad = text.replace("\"inclination_deg\": 55.0", "\"inclination_deg\": 200.0");
    assert_ne!(bad, text);
    match Scenario::parse_str(&bad) {
        Err(Error::Invalid { key, .. }) => assert!(key.contains("inclination_deg"), "{key}"),
        other => panic!("expected invalid key, got {other:?}"),
    }
}

#[test]
fn resolved_echo_reproduces_outputs() {
    let scn = Scenario::load(&path("conflict.json")).unwrap();
    let again = Scenario::parse_str(&scn.resolved_json()).unwrap();
    assert_eq!(again.resolved_json(), scn.resolved_json());
    for study in [Study::Negotiate, Study::Single] {
        assert_eq!(run_study(&scn, study, None).unwrap(), run_study(&again, study, None).unwrap());
    }
}

#[test]
fn geo_free_cdf_matches_single_round() {
    let scn = Scenario::load(&path("two_operator.json")).unwrap();
    let cdf = ntnorch::experiments::run_multilayer_cdf(&scn, None).unwrap();
    let single = ntnorch::experiments::run_single(&scn).unwrap();
    let p = &cdf.passes[0];
    assert_eq!(p.n_r, single.detail.candidates.len());
    assert_eq!(p.intersection, single.detail.intersection.len());
    assert_eq!(p.selected_ms, single.detail.route().map(|r| r.latency_ms()));
    assert_eq!(p.geo_candidates, 0);
    // nesting: intersection within candidates, selected within intersection
    assert!(p.intersection_ms.iter().all(|x| p.candidates_ms.contains(x)));
    assert!(p.intersection_ms.contains(&p.selected_ms.unwrap()));
}
