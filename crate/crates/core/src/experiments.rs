//! Study drivers: time series, autonomy sweep, availability, operator count,
//! latency CDF, negotiation replay and single-step runs.
//!
//! Each driver returns a typed result; [`run_study`] renders results to CSV
//! and JSON file contents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::orchestration::{
    centralized_route, orchestrate, OperatorPolicies, OrchestrationOutcome, OrchestratorConfig,
    Presented, RelaxSchedule, RoundDetail, Status,
};
use crate::policy::Policy;
use crate::routing::{enumerate_candidates, routes_csv, Objective, Route};
use crate::scenario::Scenario;
use crate::topology::{
    build_snapshot, reachable, restrict_to_operator, step_time, NodeKind, OperatorId, Snapshot,
};

fn iso(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Mean of `(p - c) / c` over paired latencies.
pub fn conditional_optimality_gap(proposed_ms: &[f64], centralized_ms: &[f64]) -> Result<f64> {
    if proposed_ms.len() != centralized_ms.len() {
        return Err(Error::invalid("centralized_ms", "length differs from proposed_ms"));
    }
    if proposed_ms.is_empty() {
        return Err(Error::invalid("proposed_ms", "must be nonempty"));
    }
    if centralized_ms.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("centralized_ms", "baseline latencies must be > 0"));
    }
    let sum: f64 = proposed_ms
        .iter()
        .zip(centralized_ms)
        .map(|(p, c)| (p - c) / c)
        .sum();
    Ok(sum / proposed_ms.len() as f64)
}

fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}

fn snapshot_at(scn: &Scenario, t: DateTime<Utc>) -> Result<Snapshot> {
    build_snapshot(&scn.network, t)
}

fn baseline(scn: &Scenario, s: &Snapshot, oc: &OrchestratorConfig) -> Result<Option<Route>> {
    centralized_route(
        s,
        scn.source,
        scn.destination,
        &oc.step3_objective,
        &oc.step1_policy,
        oc.exclude_single_operator,
    )
}

fn presented(scn: &Scenario, s: &Snapshot, oc: &OrchestratorConfig) -> Result<Presented> {
    oc.validate()?;
    let c = enumerate_candidates(
        s,
        scn.source,
        scn.destination,
        &oc.step1_policy,
        &oc.step3_objective,
        oc.candidate_cap,
        oc.exclude_single_operator,
    )?;
    Ok(Presented::new(s, c))
}

// ---------------------------------------------------------------- time series

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeseriesRow {
    pub t: DateTime<Utc>,
    pub centralized_ms: Option<f64>,
    pub centralized_hops: Option<u32>,
    pub proposed_ms: Option<f64>,
    pub proposed_hops: Option<u32>,
    pub feasible: bool,
    pub n_r: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeseries {
    pub rows: Vec<TimeseriesRow>,
}

impl Timeseries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t_iso,centralized_ms,centralized_hops,proposed_ms,proposed_hops,feasible\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                iso(r.t),
                ms(r.centralized_ms),
                opt(r.centralized_hops),
                ms(r.proposed_ms),
                opt(r.proposed_hops),
                r.feasible
            );
        }
        out
    }

    /// Rows where the proposed route beats the centralized one (should be none).
    pub fn order_violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!((r.proposed_ms, r.centralized_ms), (Some(p), Some(c)) if p < c))
            .count()
    }

    /// Rows whose extra hop count falls outside `0..=2`.
    pub fn hop_band_violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| match (r.proposed_hops, r.centralized_hops) {
                (Some(p), Some(c)) => !(c..=c + 2).contains(&p),
                _ => false,
            })
            .count()
    }

    pub fn summary(&self) -> Value {
        let cen: Vec<f64> = self.rows.iter().filter_map(|r| r.centralized_ms).collect();
        let pro: Vec<f64> = self.rows.iter().filter_map(|r| r.proposed_ms).collect();
        let range = |v: &[f64]| {
            json!({
                "min_ms": v.iter().copied().reduce(f64::min),
                "max_ms": v.iter().copied().reduce(f64::max),
            })
        };
        json!({
            "steps": self.rows.len(),
            "feasible_steps": self.rows.iter().filter(|r| r.feasible).count(),
            "centralized": range(&cen),
            "proposed": range(&pro),
            "order_violations": self.order_violations(),
            "hop_band_violations": self.hop_band_violations(),
        })
    }
}

/// Centralized and proposed routes at every step of the scenario.
pub fn run_timeseries(scn: &Scenario) -> Result<Timeseries> {
    let rows = (0..scn.steps)
        .into_par_iter()
        .map(|k| {
            let t = step_time(scn.epoch, scn.step_s, k);
            let s = snapshot_at(scn, t)?;
            let c = baseline(scn, &s, &scn.orchestrator)?;
            let d = presented(scn, &s, &scn.orchestrator)?.select(
                &s,
                &scn.orchestrator.step3_objective,
                &scn.operator_policies,
            )?;
            let p = d.route();
            Ok(TimeseriesRow {
                t,
                centralized_ms: c.as_ref().map(Route::latency_ms),
                centralized_hops: c.as_ref().map(|r| r.hops),
                proposed_ms: p.map(Route::latency_ms),
                proposed_hops: p.map(|r| r.hops),
                feasible: p.is_some(),
                n_r: d.candidates.len(),
                intersection: d.intersection.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Timeseries { rows })
}

// -------------------------------------------------------------- autonomy sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub size: usize,
    pub trials: usize,
    /// Trials with a route (`N_s`).
    pub feasible: usize,
    pub feasibility_rate: f64,
    pub gap_mean: Option<f64>,
    pub gap_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub operator: String,
    pub seed: u64,
    pub centralized_ms: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("size,trials,feasible,feasibility_rate,gap_mean,gap_std\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{},{}",
                r.size,
                r.trials,
                r.feasible,
                r.feasibility_rate,
                r.gap_mean.map(|x| format!("{x:.6}")).unwrap_or_default(),
                r.gap_std.map(|x| format!("{x:.6}")).unwrap_or_default(),
            );
        }
        out
    }

    pub fn row(&self, size: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.size == size)
    }
}

/// Per-trial RNG: stream selected by `(size, trial)` under the root seed.
pub fn trial_rng(root: u64, size: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((size as u64) << 32) | trial as u64);
    rng
}

/// Varies the avoid set of one operator at the scenario epoch.
pub fn run_autonomy_sweep(scn: &Scenario, sizes: &[usize], trials: usize, seed: u64) -> Result<SweepResult> {
    let op_name = scn
        .studies
        .sweep
        .operator
        .clone()
        .unwrap_or_else(|| scn.network.operators[0].clone());
    let op = scn
        .network
        .operator_id(&op_name)
        .ok_or_else(|| Error::UnknownOperator(op_name.clone()))?;
    let pool = scn.operator_nodes(op);
    if let Some(&bad) = sizes.iter().find(|&&k| k > pool.len()) {
        return Err(Error::invalid(
            "studies.sweep.sizes",
            format!("{bad} exceeds the {} satellites of operator {op_name}", pool.len()),
        ));
    }
    let s = snapshot_at(scn, scn.epoch)?;
    let oc = &scn.orchestrator;
    let obj = Objective::from_policy(&oc.step3_objective)?;
    let central = baseline(scn, &s, oc)?.map(|r| r.latency_ms());
    let pres = presented(scn, &s, oc)?;
    let mut fixed = Vec::new();
    for i in 0..s.operator_count() {
        let p = if i == op.0 {
            Policy::Phi
        } else {
            scn.operator_policies
                .get(&s.operators[i])
                .cloned()
                .unwrap_or(Policy::Phi)
        };
        fixed.push(pres.accepted_by(OperatorId(i), &p));
    }

    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&k| (0..trials).map(move |t| (k, t)))
        .collect();
    let outcomes: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(k, t)| {
            let mut rng = trial_rng(seed, k, t);
            let chosen: Vec<String> = pool
                .choose_multiple(&mut rng, k)
                .map(|n| n.to_string())
                .collect();
            let policy = if chosen.is_empty() {
                Policy::Phi
            } else {
                Policy::avoid(chosen)
            };
            let mut accepted = fixed.clone();
            accepted[op.0] = pres.accepted_by(op, &policy);
            let (_, sel) = pres.resolve(&accepted, obj);
            sel.map(|i| pres.candidates[i].latency_ms())
        })
        .collect();

    let mut rows = Vec::new();
    for (si, &k) in sizes.iter().enumerate() {
        let chunk = &outcomes[si * trials..(si + 1) * trials];
        let found: Vec<f64> = chunk.iter().flatten().copied().collect();
        let gaps: Vec<f64> = match central {
            Some(c) if c > 0.0 => found.iter().map(|p| (p - c) / c).collect(),
            _ => Vec::new(),
        };
        let stats = mean_std(&gaps);
        rows.push(SweepRow {
            size: k,
            trials,
            feasible: found.len(),
            feasibility_rate: found.len() as f64 / trials as f64,
            gap_mean: stats.map(|x| x.0),
            gap_std: stats.map(|x| x.1),
        });
    }
    Ok(SweepResult {
        operator: op_name,
        seed,
        centralized_ms: central,
        rows,
    })
}

// ---------------------------------------------------------------- availability

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityResult {
    pub operators: Vec<String>,
    pub per_operator: Vec<f64>,
    pub all: f64,
    pub snapshots: usize,
    /// Per snapshot: time, reachability per operator, reachability overall.
    #[serde(skip)]
    pub series: Vec<(DateTime<Utc>, Vec<bool>, bool)>,
}

impl AvailabilityResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_iso");
        for o in &self.operators {
            let _ = write!(out, ",{o}");
        }
        out.push_str(",all\n");
        for (t, per, all) in &self.series {
            out.push_str(&iso(*t));
            for &b in per {
                let _ = write!(out, ",{}", b as u8);
            }
            let _ = writeln!(out, ",{}", *all as u8);
        }
        out
    }

    pub fn summary(&self) -> Value {
        let per: BTreeMap<&str, f64> = self
            .operators
            .iter()
            .map(String::as_str)
            .zip(self.per_operator.iter().copied())
            .collect();
        json!({ "snapshots": self.snapshots, "per_operator": per, "all": self.all })
    }
}

/// Share of snapshots in which each operator alone, and all together,
/// connect source to destination.
pub fn run_availability(scn: &Scenario, duration_s: f64, step_s: f64) -> Result<AvailabilityResult> {
    if !(duration_s > 0.0 && step_s > 0.0) {
        return Err(Error::invalid("availability", "duration and step must be > 0"));
    }
    let count = (duration_s / step_s + 1e-9).floor() as usize + 1;
    let ops = scn.network.operators.clone();
    let series = (0..count)
        .into_par_iter()
        .map(|k| {
            let t = step_time(scn.epoch, step_s, k);
            let s = snapshot_at(scn, t)?;
            let all = reachable(&s, scn.source, scn.destination);
            let per = (0..ops.len())
                .map(|i| {
                    let r = restrict_to_operator(&s, OperatorId(i))?;
                    let src = r.node_by_name(s.name(scn.source)).expect("endpoint kept");
                    let dst = r.node_by_name(s.name(scn.destination)).expect("endpoint kept");
                    Ok(reachable(&r, src, dst))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((t, per, all))
        })
        .collect::<Result<Vec<_>>>()?;
    let frac = |f: &dyn Fn(&(DateTime<Utc>, Vec<bool>, bool)) -> bool| {
        series.iter().filter(|x| f(x)).count() as f64 / count as f64
    };
    let per_operator = (0..ops.len()).map(|i| frac(&|x| x.1[i])).collect();
    let all = frac(&|x| x.2);
    Ok(AvailabilityResult {
        operators: ops,
        per_operator,
        all,
        snapshots: count,
        series,
    })
}

// -------------------------------------------------------------- operator count

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCountOperator {
    pub name: String,
    pub policy: Policy,
    pub selected: usize,
    pub presented: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCountRow {
    pub n_p: usize,
    pub n_r: usize,
    pub operators: Vec<OpCountOperator>,
    pub intersection: usize,
    pub route: Option<Vec<String>>,
    pub hops: Option<u32>,
    pub latency_ms: Option<f64>,
}

impl OpCountRow {
    /// Mean `|S_i*| / |S_i+|` over operators at even (`parity` 0) or odd
    /// positions, skipping operators with nothing presented.
    pub fn mean_acceptance(&self, parity: usize) -> Option<f64> {
        let rates: Vec<f64> = self
            .operators
            .iter()
            .enumerate()
            .filter(|(i, o)| i % 2 == parity && o.presented > 0)
            .map(|(_, o)| o.selected as f64 / o.presented as f64)
            .collect();
        mean_std(&rates).map(|x| x.0)
    }
}

pub fn opcount_csv(rows: &[OpCountRow]) -> String {
    let mut out = String::from("n_p,n_r,operator,policy,selected,presented,intersection,hops,latency_ms\n");
    for r in rows {
        for o in &r.operators {
            let _ = writeln!(
                out,
                "{},{},{},\"{}\",{},{},{},{},{}",
                r.n_p,
                r.n_r,
                o.name,
                o.policy.to_string().replace('"', "\"\""),
                o.selected,
                o.presented,
                r.intersection,
                opt(r.hops),
                ms(r.latency_ms)
            );
        }
    }
    out
}

/// The `k` own satellites appearing in the most presented routes of an
/// operator; ties broken by name.
pub fn most_frequent_nodes(s: &Snapshot, pres: &Presented, op: OperatorId, k: usize) -> Vec<String> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, _) in &pres.views[op.0] {
        let mut seen: Vec<&str> = pres.candidates[*idx]
            .nodes
            .iter()
            .filter(|&&v| s.owner(v) == Some(op))
            .map(|&v| s.name(v))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        for n in seen {
            *count.entry(n).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = count.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(n, _)| n.to_string()).collect()
}

/// Runs one round per operator count, alternating the avoid-most-frequent
/// policy (first, third, ... operator) with `second`.
pub fn run_operator_count_study(
    base: &Scenario,
    partitions: &[usize],
    avoid_top: usize,
    second: &Policy,
) -> Result<Vec<OpCountRow>> {
    let mut rows = Vec::new();
    let parts: Vec<Option<usize>> = if partitions.is_empty() {
        vec![None]
    } else {
        partitions.iter().copied().map(Some).collect()
    };
    for part in parts {
        let scn = match part {
            Some(n) => base.repartition(n)?,
            None => base.clone(),
        };
        let s = snapshot_at(&scn, scn.epoch)?;
        let oc = &scn.orchestrator;
        let pres = presented(&scn, &s, oc)?;
        let mut policies = OperatorPolicies::new();
        for (i, name) in s.operators.iter().enumerate() {
            let p = if i % 2 == 0 {
                let top = most_frequent_nodes(&s, &pres, OperatorId(i), avoid_top);
                if top.is_empty() {
                    Policy::Phi
                } else {
                    Policy::avoid(top)
                }
            } else {
                second.clone()
            };
            policies.insert(name.clone(), p);
        }
        let d = pres.select(&s, &oc.step3_objective, &policies)?;
        let route = d.route();
        rows.push(OpCountRow {
            n_p: s.operator_count(),
            n_r: d.candidates.len(),
            operators: s
                .operators
                .iter()
                .enumerate()
                .map(|(i, name)| OpCountOperator {
                    name: name.clone(),
                    policy: policies[name].clone(),
                    selected: d.accepted[i].len(),
                    presented: d.presented[i],
                })
                .collect(),
            intersection: d.intersection.len(),
            route: route.map(|r| r.names(&s)),
            hops: route.map(|r| r.hops),
            latency_ms: route.map(Route::latency_ms),
        });
    }
    Ok(rows)
}

// ------------------------------------------------------------ multilayer CDF

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfPass {
    pub label: String,
    pub step1_policy: Policy,
    pub n_r: usize,
    pub selected_counts: BTreeMap<String, usize>,
    pub intersection: usize,
    /// Candidates using at least one GEO node.
    pub geo_candidates: usize,
    /// Highest latency among GEO-free candidates.
    pub leo_max_ms: Option<f64>,
    pub candidates_ms: Vec<f64>,
    pub intersection_ms: Vec<f64>,
    pub selected_ms: Option<f64>,
    pub route: Option<Vec<String>>,
    pub hops: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfResult {
    pub centralized_ms: Option<f64>,
    pub centralized_route: Option<Vec<String>>,
    pub passes: Vec<CdfPass>,
}

impl CdfResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pass,series,latency_ms,cdf\n");
        for p in &self.passes {
            for (series, v) in [
                ("candidates", &p.candidates_ms),
                ("intersection", &p.intersection_ms),
            ] {
                let n = v.len() as f64;
                for (i, x) in v.iter().enumerate() {
                    let _ = writeln!(out, "{},{series},{x:.6},{:.6}", p.label, (i + 1) as f64 / n);
                }
            }
            if let Some(x) = p.selected_ms {
                let rank = p.candidates_ms.iter().filter(|&&c| c <= x).count() as f64;
                let _ = writeln!(
                    out,
                    "{},selected,{x:.6},{:.6}",
                    p.label,
                    rank / p.candidates_ms.len() as f64
                );
            }
        }
        out
    }

    pub fn summary(&self) -> Value {
        let passes: Vec<Value> = self
            .passes
            .iter()
            .map(|p| {
                json!({
                    "label": p.label,
                    "step1_policy": p.step1_policy,
                    "n_r": p.n_r,
                    "selected": p.selected_counts,
                    "intersection": p.intersection,
                    "geo_candidates": p.geo_candidates,
                    "leo_max_ms": p.leo_max_ms,
                    "max_candidate_ms": p.candidates_ms.last(),
                    "gaps_ms": latency_gaps(&p.candidates_ms, DEFAULT_GAP_MS),
                    "route": p.route,
                    "hops": p.hops,
                    "latency_ms": p.selected_ms,
                })
            })
            .collect();
        json!({
            "centralized": { "route": self.centralized_route, "latency_ms": self.centralized_ms },
            "passes": passes,
        })
    }
}

/// Minimum spacing between consecutive sorted latencies reported as a gap.
pub const DEFAULT_GAP_MS: f64 = 50.0;

/// Intervals `(lo, hi)` between consecutive sorted values further apart
/// than `min_gap_ms`.
pub fn latency_gaps(sorted_ms: &[f64], min_gap_ms: f64) -> Vec<(f64, f64)> {
    sorted_ms
        .windows(2)
        .filter(|w| w[1] - w[0] > min_gap_ms)
        .map(|w| (w[0], w[1]))
        .collect()
}

fn cdf_pass(scn: &Scenario, s: &Snapshot, label: &str, oc: &OrchestratorConfig) -> Result<CdfPass> {
    let pres = presented(scn, s, oc)?;
    let d = pres.select(s, &oc.step3_objective, &scn.operator_policies)?;
    let uses_geo = |r: &Route| r.nodes.iter().any(|&v| s.node(v).kind == NodeKind::Geo);
    let mut candidates_ms: Vec<f64> = d.candidates.iter().map(Route::latency_ms).collect();
    candidates_ms.sort_by(f64::total_cmp);
    let mut intersection_ms: Vec<f64> = d
        .intersection
        .iter()
        .map(|&i| d.candidates[i].latency_ms())
        .collect();
    intersection_ms.sort_by(f64::total_cmp);
    let route = d.route();
    Ok(CdfPass {
        label: label.into(),
        step1_policy: oc.step1_policy.clone(),
        n_r: d.candidates.len(),
        selected_counts: s
            .operators
            .iter()
            .cloned()
            .zip(d.accepted.iter().map(Vec::len))
            .collect(),
        intersection: d.intersection.len(),
        geo_candidates: d.candidates.iter().filter(|r| uses_geo(r)).count(),
        leo_max_ms: d
            .candidates
            .iter()
            .filter(|r| !uses_geo(r))
            .map(Route::latency_ms)
            .reduce(f64::max),
        candidates_ms,
        intersection_ms,
        selected_ms: route.map(Route::latency_ms),
        route: route.map(|r| r.names(s)),
        hops: route.map(|r| r.hops),
    })
}

/// Candidate, intersection and selected latencies at the epoch; with
/// `latency_cap_ms`, a second pass adds that bound to Step 1.
pub fn run_multilayer_cdf(scn: &Scenario, latency_cap_ms: Option<f64>) -> Result<CdfResult> {
    let s = snapshot_at(scn, scn.epoch)?;
    let c = baseline(scn, &s, &scn.orchestrator)?;
    let mut passes = vec![cdf_pass(scn, &s, "base", &scn.orchestrator)?];
    if let Some(cap) = latency_cap_ms {
        let oc = OrchestratorConfig {
            step1_policy: Policy::and(vec![
                scn.orchestrator.step1_policy.clone(),
                Policy::MaxLatency(cap),
            ]),
            ..scn.orchestrator.clone()
        };
        passes.push(cdf_pass(scn, &s, "latency_cap", &oc)?);
    }
    Ok(CdfResult {
        centralized_ms: c.as_ref().map(Route::latency_ms),
        centralized_route: c.as_ref().map(|r| r.names(&s)),
        passes,
    })
}

// ------------------------------------------------------ negotiation / single

pub fn rounds_csv(outcome: &OrchestrationOutcome) -> String {
    let ops: Vec<&String> = outcome
        .rounds
        .first()
        .map(|r| r.selected.keys().collect())
        .unwrap_or_default();
    let mut out = String::from("round,actor,action,n_r");
    for o in &ops {
        let _ = write!(out, ",selected_{o}");
    }
    out.push_str(",intersection,hops,latency_ms\n");
    for r in &outcome.rounds {
        let (actor, action) = match &r.applied {
            Some(a) => (
                serde_json::to_string(&a.actor).unwrap_or_default(),
                serde_json::to_string(&a.action).unwrap_or_default(),
            ),
            None => (String::new(), String::new()),
        };
        let q = |x: String| format!("\"{}\"", x.replace('"', "\"\""));
        let _ = write!(out, "{},{},{},{}", r.round, q(actor), q(action), r.n_r);
        for o in &ops {
            let _ = write!(out, ",{}", r.selected[*o]);
        }
        let _ = writeln!(out, ",{},{},{}", r.intersection, opt(r.hops), ms(r.latency_ms));
    }
    out
}

/// Replays `schedule` at the scenario epoch.
pub fn run_negotiation(scn: &Scenario, schedule: &RelaxSchedule) -> Result<OrchestrationOutcome> {
    let s = snapshot_at(scn, scn.epoch)?;
    orchestrate(
        &s,
        scn.source,
        scn.destination,
        &scn.orchestrator,
        &scn.operator_policies,
        schedule,
    )
}

#[derive(Debug, Clone)]
pub struct SingleResult {
    pub snapshot: Snapshot,
    pub centralized: Option<Route>,
    pub detail: RoundDetail,
}

/// One round plus the centralized baseline at the epoch.
pub fn run_single(scn: &Scenario) -> Result<SingleResult> {
    let s = snapshot_at(scn, scn.epoch)?;
    let centralized = baseline(scn, &s, &scn.orchestrator)?;
    let detail = presented(scn, &s, &scn.orchestrator)?.select(
        &s,
        &scn.orchestrator.step3_objective,
        &scn.operator_policies,
    )?;
    Ok(SingleResult {
        snapshot: s,
        centralized,
        detail,
    })
}

// ------------------------------------------------------------------- dispatch

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Timeseries,
    Negotiate,
    Sweep,
    Opcount,
    Availability,
    Cdf,
    Single,
}

impl Study {
    pub const ALL: [Study; 7] = [
        Study::Timeseries,
        Study::Negotiate,
        Study::Sweep,
        Study::Opcount,
        Study::Availability,
        Study::Cdf,
        Study::Single,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Study::Timeseries => "timeseries",
            Study::Negotiate => "negotiate",
            Study::Sweep => "sweep",
            Study::Opcount => "opcount",
            Study::Availability => "availability",
            Study::Cdf => "cdf",
            Study::Single => "single",
        }
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Study> {
        Study::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid("study", format!("unknown study `{s}`")))
    }
}

/// Rendered study results.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    /// False when a route was required but none was found.
    pub solved: bool,
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("results serialize");
    s.push('\n');
    s
}

fn outcome_summary(o: &OrchestrationOutcome) -> Value {
    serde_json::to_value(o).expect("outcome serializes")
}

/// Runs a study and renders its files. `schedule` overrides the scenario's
/// relaxation schedule.
pub fn run_study(scn: &Scenario, study: Study, schedule: Option<&RelaxSchedule>) -> Result<StudyOutput> {
    let name = study.as_str();
    let header = json!({ "scenario": scn.name, "study": name, "seed": scn.seed });
    let with = |mut body: Value| {
        if let (Value::Object(m), Value::Object(h)) = (&mut body, &header) {
            for (k, v) in h {
                m.insert(k.clone(), v.clone());
            }
        }
        pretty(&body)
    };
    let mut solved = true;
    let files = match study {
        Study::Timeseries => {
            let r = run_timeseries(scn)?;
            solved = r.rows.iter().all(|x| x.feasible);
            vec![
                ("timeseries.csv".into(), r.to_csv()),
                ("summary.json".into(), with(r.summary())),
            ]
        }
        Study::Sweep => {
            let sw = &scn.studies.sweep;
            let r = run_autonomy_sweep(scn, &sw.sizes, sw.trials, scn.seed)?;
            vec![
                ("sweep.csv".into(), r.to_csv()),
                ("summary.json".into(), with(serde_json::to_value(&r).expect("serializes"))),
            ]
        }
        Study::Availability => {
            let a = &scn.studies.availability;
            let parts: Vec<Option<usize>> = if a.partitions.is_empty() {
                vec![None]
            } else {
                a.partitions.iter().copied().map(Some).collect()
            };
            let mut files = Vec::new();
            let mut summary = serde_json::Map::new();
            for p in parts {
                let mut s = match p {
                    Some(n) => scn.repartition(n)?,
                    None => scn.clone(),
                };
                if let Some(pattern) = a.isl_pattern {
                    s.network.links.isl_pattern = pattern;
                }
                let r = run_availability(&s, a.duration_s, a.step_s)?;
                let n = s.network.operators.len();
                files.push((format!("availability_{n}.csv"), r.to_csv()));
                summary.insert(n.to_string(), r.summary());
            }
            files.push((
                "summary.json".into(),
                with(json!({ "partitions": Value::Object(summary) })),
            ));
            files
        }
        Study::Opcount => {
            let rows = run_operator_count_study(
                scn,
                &scn.studies.opcount_partitions,
                scn.studies.opcount_avoid_top,
                &scn.studies.opcount_second_policy,
            )?;
            solved = rows.iter().all(|r| r.route.is_some());
            vec![
                ("opcount.csv".into(), opcount_csv(&rows)),
                ("summary.json".into(), with(json!({ "rows": rows }))),
            ]
        }
        Study::Cdf => {
            let r = run_multilayer_cdf(scn, scn.studies.cdf_latency_cap_ms)?;
            solved = r.passes.iter().all(|p| p.selected_ms.is_some());
            vec![
                ("cdf.csv".into(), r.to_csv()),
                ("summary.json".into(), with(r.summary())),
            ]
        }
        Study::Negotiate | Study::Single => {
            let empty = RelaxSchedule::new();
            let sched = match study {
                Study::Negotiate => schedule.unwrap_or(&scn.studies.schedule),
                _ => &empty,
            };
            let o = run_negotiation(scn, sched)?;
            if o.status == Status::Aborted {
                return Err(Error::Config(format!(
                    "relaxation schedule: {}",
                    o.error.clone().unwrap_or_default()
                )));
            }
            solved = o.status == Status::Solved;
            let mut files = vec![(format!("{name}_rounds.csv"), rounds_csv(&o))];
            let mut body = outcome_summary(&o);
            if study == Study::Single {
                let r = run_single(scn)?;
                let c = r.centralized.as_ref();
                body["centralized"] = json!({
                    "route": c.map(|x| x.names(&r.snapshot)),
                    "hops": c.map(|x| x.hops),
                    "latency_ms": c.map(Route::latency_ms),
                });
                files.push(("candidates.csv".into(), routes_csv(&r.snapshot, &r.detail.candidates)));
            }
            files.push(("summary.json".into(), with(body)));
            files
        }
    };
    Ok(StudyOutput { files, solved })
}
