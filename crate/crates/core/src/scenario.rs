//! Scenario files: constellation, sites, link model, policies and study
//! settings, validated into a [`Scenario`].
//!
//! Satellites are named `<prefix>-<operator>-<k>`, with `k` counting from 1
//! over the operator's planes in ascending plane order, slot by slot. GEO
//! satellites are named `GEO-<operator>-<k>` in listing order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{EarthFrame, GeoSlot, GroundSite, OrbitElements, SiteRole};
use crate::linkbudget::{Carrier, LinkClassRules};
use crate::orchestration::{OperatorPolicies, OrchestratorConfig, RelaxSchedule};
use crate::policy::Policy;
use crate::topology::{
    GridSlot, IslPattern, LinkConfig, Network, NodeGeometry, NodeId, NodeKind, NodeSpec,
    OperatorId, TerminalParams, UserAttachment, UserRfBudget,
};

fn default_step() -> f64 {
    60.0
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn leo_prefix() -> String {
    "LEO".into()
}
fn wavelength() -> f64 {
    1550.0
}
fn d_req() -> Option<f64> {
    Some(10_000.0)
}
fn p_req() -> f64 {
    -50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSpec {
    #[serde(default = "leo_prefix")]
    pub prefix: String,
    pub planes: usize,
    pub sats_per_plane: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_spacing_deg: f64,
    #[serde(default)]
    pub raan0_deg: f64,
    /// Mean anomaly of slot 0 in plane 0.
    #[serde(default)]
    pub mean_anomaly0_deg: f64,
    /// Extra mean anomaly added per plane index.
    #[serde(default)]
    pub phase_offset_deg: f64,
    /// Plane `p` belongs to `plane_operators[p % len]`.
    pub plane_operators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoSpec {
    pub operator: String,
    pub longitude_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub name: String,
    pub role: SiteRole,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinksSpec {
    #[serde(default = "wavelength")]
    pub wavelength_nm: f64,
    #[serde(default)]
    pub other_losses_db: f64,
    /// Distance threshold of links without a GEO endpoint; null is unlimited.
    #[serde(default = "d_req")]
    pub distance_threshold_km: Option<f64>,
    #[serde(default)]
    pub geo_distance_threshold_km: Option<f64>,
    #[serde(default = "p_req")]
    pub required_rx_power_dbm: f64,
    #[serde(default = "d_req")]
    pub user_distance_threshold_km: Option<f64>,
    #[serde(default)]
    pub user_attachment: UserAttachment,
    #[serde(default)]
    pub user_rf: Option<UserRfBudget>,
    #[serde(default)]
    pub min_elevation_deg: f64,
    #[serde(default)]
    pub occlusion_margin_km: f64,
    #[serde(default)]
    pub isl_pattern: IslPattern,
    #[serde(default)]
    pub max_isl_degree: Option<usize>,
    /// LEO terminals per GEO satellite, nearest first; null is unlimited.
    #[serde(default)]
    pub geo_leo_links: Option<usize>,
    pub leo: TerminalParams,
    #[serde(default)]
    pub geo: TerminalParams,
    pub ogs: TerminalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorSpec {
    pub step1_policy: Value,
    pub step3_objective: Value,
    #[serde(default)]
    pub candidate_cap: Option<usize>,
    #[serde(default = "yes")]
    pub exclude_single_operator: bool,
}

fn default_sizes() -> Vec<usize> {
    let mut v = vec![0, 1];
    v.extend((2..=30).step_by(2));
    v.extend((35..=50).step_by(5));
    v
}
fn hundred() -> usize {
    100
}
fn day() -> f64 {
    86_400.0
}
fn top3() -> usize {
    3
}
fn pi2() -> Value {
    serde_json::json!({ "max_hops": 10 })
}
fn cap120() -> Option<f64> {
    Some(120.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "hundred")]
    pub trials: usize,
    /// Operator whose satellites are drawn into the avoid set.
    #[serde(default)]
    pub operator: Option<String>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            sizes: default_sizes(),
            trials: hundred(),
            operator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilitySpec {
    #[serde(default = "day")]
    pub duration_s: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
    /// Operator counts to repartition the planes into; empty keeps the file's.
    #[serde(default)]
    pub partitions: Vec<usize>,
    /// ISL pattern for this study only; null keeps `links.isl_pattern`.
    #[serde(default)]
    pub isl_pattern: Option<IslPattern>,
}

impl Default for AvailabilitySpec {
    fn default() -> Self {
        AvailabilitySpec {
            duration_s: day(),
            step_s: default_step(),
            partitions: Vec::new(),
            isl_pattern: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpCountSpec {
    #[serde(default)]
    pub partitions: Vec<usize>,
    /// Size of the avoid set of the first alternating policy.
    #[serde(default = "top3")]
    pub avoid_top: usize,
    /// Second alternating policy.
    #[serde(default = "pi2")]
    pub second_policy: Value,
}

impl Default for OpCountSpec {
    fn default() -> Self {
        OpCountSpec {
            partitions: Vec::new(),
            avoid_top: top3(),
            second_policy: pi2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdfSpec {
    /// Latency bound added to Step 1 for the second pass; null skips it.
    #[serde(default = "cap120")]
    pub latency_cap_ms: Option<f64>,
}

impl Default for CdfSpec {
    fn default() -> Self {
        CdfSpec {
            latency_cap_ms: cap120(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesSpec {
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub availability: AvailabilitySpec,
    #[serde(default)]
    pub opcount: OpCountSpec,
    #[serde(default)]
    pub cdf: CdfSpec,
    /// Relaxation schedule for the negotiation study.
    #[serde(default)]
    pub schedule: RelaxSchedule,
}

/// On-disk scenario document. Serializing a parsed value gives the resolved
/// form with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub epoch: DateTime<Utc>,
    #[serde(default)]
    pub gmst0_deg: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
    #[serde(default = "one")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub operators: Vec<String>,
    #[serde(default)]
    pub constellations: Vec<ConstellationSpec>,
    #[serde(default)]
    pub geo: Vec<GeoSpec>,
    pub sites: Vec<SiteSpec>,
    pub source: String,
    pub destination: String,
    pub links: LinksSpec,
    pub orchestrator: OrchestratorSpec,
    #[serde(default)]
    pub operator_policies: BTreeMap<String, Value>,
    #[serde(default)]
    pub studies: StudiesSpec,
}

/// Parsed study settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Studies {
    pub sweep: SweepSpec,
    pub availability: AvailabilitySpec,
    pub opcount_partitions: Vec<usize>,
    pub opcount_avoid_top: usize,
    pub opcount_second_policy: Policy,
    pub cdf_latency_cap_ms: Option<f64>,
    pub schedule: RelaxSchedule,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: Network,
    pub source: NodeId,
    pub destination: NodeId,
    pub epoch: DateTime<Utc>,
    pub step_s: f64,
    pub steps: usize,
    pub seed: u64,
    pub orchestrator: OrchestratorConfig,
    pub operator_policies: OperatorPolicies,
    pub studies: Studies,
    /// Resolved document, policies in canonical form.
    pub file: ScenarioFile,
}

fn keyed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Invalid { key, reason } => Error::invalid(format!("{prefix}.{key}"), reason),
        other => other,
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, "must be > 0"))
    }
}

/// Operator names used by repartitioned scenarios: `A`, `B`, ...
pub fn operator_letters(n: usize) -> Result<Vec<String>> {
    if n == 0 || n > 26 {
        return Err(Error::invalid("partitions", "operator count must be in 1..=26"));
    }
    Ok((0..n).map(|i| char::from(b'A' + i as u8).to_string()).collect())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Scenario> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        Scenario::from_file(file)
    }

    /// Validates a document and builds the network.
    pub fn from_file(mut file: ScenarioFile) -> Result<Scenario> {
        if file.operators.is_empty() {
            return Err(Error::invalid("operators", "at least one operator is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, o) in file.operators.iter().enumerate() {
            if o.is_empty() || !seen.insert(o.as_str()) {
                return Err(Error::invalid(format!("operators[{i}]"), "names must be unique and nonempty"));
            }
        }
        positive("step_s", file.step_s)?;
        if file.steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        if !file.gmst0_deg.is_finite() {
            return Err(Error::invalid("gmst0_deg", "must be finite"));
        }
        let op_index = |key: String, name: &str| -> Result<OperatorId> {
            file.operators
                .iter()
                .position(|o| o == name)
                .map(OperatorId)
                .ok_or_else(|| Error::invalid(key, format!("unknown operator `{name}`")))
        };

        let mut nodes: Vec<NodeSpec> = Vec::new();
        for (ci, c) in file.constellations.iter().enumerate() {
            let key = format!("constellations[{ci}]");
            if c.planes == 0 {
                return Err(Error::invalid(format!("{key}.planes"), "must be >= 1"));
            }
            if c.sats_per_plane == 0 {
                return Err(Error::invalid(format!("{key}.sats_per_plane"), "must be >= 1"));
            }
            if c.plane_operators.is_empty() {
                return Err(Error::invalid(format!("{key}.plane_operators"), "must be nonempty"));
            }
            for (k, v) in [
                ("raan_spacing_deg", c.raan_spacing_deg),
                ("raan0_deg", c.raan0_deg),
                ("mean_anomaly0_deg", c.mean_anomaly0_deg),
                ("phase_offset_deg", c.phase_offset_deg),
            ] {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("{key}.{k}"), "must be finite"));
                }
            }
            let mut counter: BTreeMap<usize, usize> = BTreeMap::new();
            let owners: Vec<OperatorId> = (0..c.planes)
                .map(|p| {
                    let name = &c.plane_operators[p % c.plane_operators.len()];
                    op_index(format!("{key}.plane_operators"), name)
                })
                .collect::<Result<_>>()?;
            for (p, &owner) in owners.iter().enumerate() {
                for slot in 0..c.sats_per_plane {
                    let el = OrbitElements {
                        altitude_km: c.altitude_km,
                        inclination_deg: c.inclination_deg,
                        raan_deg: c.raan0_deg + p as f64 * c.raan_spacing_deg,
                        eccentricity: 0.0,
                        mean_anomaly_at_epoch_deg: c.mean_anomaly0_deg
                            + slot as f64 * 360.0 / c.sats_per_plane as f64
                            + p as f64 * c.phase_offset_deg,
                        epoch: file.epoch,
                    };
                    el.validate().map_err(|e| keyed(&key, e))?;
                    let k = counter.entry(owner.0).or_insert(0);
                    *k += 1;
                    nodes.push(NodeSpec {
                        name: format!("{}-{}-{}", c.prefix, file.operators[owner.0], k).into(),
                        kind: NodeKind::Leo,
                        owner: Some(owner),
                        geometry: NodeGeometry::Orbit(el),
                        grid: Some(GridSlot {
                            shell: ci,
                            plane: p,
                            slot,
                            planes: c.planes,
                            per_plane: c.sats_per_plane,
                        }),
                    });
                }
            }
        }
        let mut geo_count: BTreeMap<usize, usize> = BTreeMap::new();
        for (gi, g) in file.geo.iter().enumerate() {
            let key = format!("geo[{gi}]");
            let owner = op_index(format!("{key}.operator"), &g.operator)?;
            let slot = GeoSlot {
                longitude_deg: g.longitude_deg,
            };
            slot.validate().map_err(|e| keyed(&key, e))?;
            let k = geo_count.entry(owner.0).or_insert(0);
            *k += 1;
            nodes.push(NodeSpec {
                name: format!("GEO-{}-{}", g.operator, k).into(),
                kind: NodeKind::Geo,
                owner: Some(owner),
                geometry: NodeGeometry::Geo(slot),
                grid: None,
            });
        }
        for (si, s) in file.sites.iter().enumerate() {
            let key = format!("sites[{si}]");
            let site = GroundSite {
                latitude_deg: s.latitude_deg,
                longitude_deg: s.longitude_deg,
                altitude_m: s.altitude_m,
                role: s.role,
            };
            site.validate().map_err(|e| keyed(&key, e))?;
            if s.name.is_empty() {
                return Err(Error::invalid(format!("{key}.name"), "must be nonempty"));
            }
            nodes.push(NodeSpec {
                name: s.name.as_str().into(),
                kind: s.role.into(),
                owner: None,
                geometry: NodeGeometry::Site(site),
                grid: None,
            });
        }
        let mut names = BTreeSet::new();
        for n in &nodes {
            if !names.insert(n.name.clone()) {
                return Err(Error::invalid("sites", format!("duplicate node id `{}`", n.name)));
            }
        }
        let find = |key: &str, name: &str| -> Result<NodeId> {
            nodes
                .iter()
                .position(|n| &*n.name == name)
                .map(NodeId)
                .ok_or_else(|| Error::invalid(key, format!("unknown node `{name}`")))
        };
        let source = find("source", &file.source)?;
        let destination = find("destination", &file.destination)?;
        if source == destination {
            return Err(Error::invalid("destination", "must differ from the source"));
        }

        let links = resolve_links(&file.links)?;
        let network = Network {
            frame: EarthFrame {
                epoch: file.epoch,
                gmst0_deg: file.gmst0_deg,
            },
            operators: file.operators.clone(),
            nodes,
            links,
        };

        let check_nodes = |key: &str, p: &Policy| -> Result<()> {
            for leaf in p.leaves() {
                if let Policy::AvoidNodes { nodes, .. } = leaf {
                    for n in nodes {
                        if network.node_id(n).is_none() {
                            return Err(Error::invalid(key, format!("unknown node `{n}`")));
                        }
                    }
                }
            }
            Ok(())
        };
        let orch = &file.orchestrator;
        let orchestrator = OrchestratorConfig {
            step1_policy: Policy::from_json(&orch.step1_policy, "orchestrator.step1_policy")?,
            step3_objective: Policy::from_json(&orch.step3_objective, "orchestrator.step3_objective")?,
            candidate_cap: orch.candidate_cap,
            exclude_single_operator: orch.exclude_single_operator,
        };
        orchestrator.validate()?;
        check_nodes("orchestrator.step1_policy", &orchestrator.step1_policy)?;

        let mut operator_policies = OperatorPolicies::new();
        for (name, v) in &file.operator_policies {
            let key = format!("operator_policies.{name}");
            op_index(key.clone(), name)?;
            let p = Policy::from_json(v, &key)?;
            check_nodes(&key, &p)?;
            operator_policies.insert(name.clone(), p);
        }

        let st = &file.studies;
        if st.sweep.trials == 0 {
            return Err(Error::invalid("studies.sweep.trials", "must be >= 1"));
        }
        if let Some(o) = &st.sweep.operator {
            op_index("studies.sweep.operator".into(), o)?;
        }
        positive("studies.availability.duration_s", st.availability.duration_s)?;
        positive("studies.availability.step_s", st.availability.step_s)?;
        for &n in st.availability.partitions.iter().chain(&st.opcount.partitions) {
            operator_letters(n).map_err(|e| keyed("studies", e))?;
        }
        let second = Policy::from_json(&st.opcount.second_policy, "studies.opcount.second_policy")?;
        if let Some(c) = st.cdf.latency_cap_ms {
            positive("studies.cdf.latency_cap_ms", c)?;
        }
        for (i, a) in st.schedule.iter().enumerate() {
            if let crate::orchestration::Actor::Operator(name) = &a.actor {
                op_index(format!("studies.schedule[{i}].actor"), name)?;
            }
        }
        let studies = Studies {
            sweep: st.sweep.clone(),
            availability: st.availability.clone(),
            opcount_partitions: st.opcount.partitions.clone(),
            opcount_avoid_top: st.opcount.avoid_top,
            opcount_second_policy: second.clone(),
            cdf_latency_cap_ms: st.cdf.latency_cap_ms,
            schedule: st.schedule.clone(),
        };

        // canonical echo
        file.orchestrator.step1_policy = orchestrator.step1_policy.to_json();
        file.orchestrator.step3_objective = orchestrator.step3_objective.to_json();
        file.operator_policies = operator_policies
            .iter()
            .map(|(k, p)| (k.clone(), p.to_json()))
            .collect();
        file.studies.opcount.second_policy = second.to_json();

        Ok(Scenario {
            name: file.name.clone(),
            network,
            source,
            destination,
            epoch: file.epoch,
            step_s: file.step_s,
            steps: file.steps,
            seed: file.seed,
            orchestrator,
            operator_policies,
            studies,
            file,
        })
    }

    /// Resolved configuration as pretty JSON.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serializes")
    }

    /// Same scenario with planes dealt round-robin to `n` operators named
    /// `A`, `B`, ... Operator policies are cleared; GEO owners must exist in
    /// the new set.
    pub fn repartition(&self, n: usize) -> Result<Scenario> {
        let ops = operator_letters(n)?;
        let mut file = self.file.clone();
        file.operators = ops.clone();
        for c in &mut file.constellations {
            c.plane_operators = ops.clone();
        }
        file.operator_policies.clear();
        file.studies.schedule.clear();
        file.studies.sweep.operator = None;
        Scenario::from_file(file)
    }

    pub fn operator_nodes(&self, op: OperatorId) -> Vec<Arc<str>> {
        self.network
            .nodes
            .iter()
            .filter(|n| n.owner == Some(op))
            .map(|n| n.name.clone())
            .collect()
    }
}

fn resolve_links(l: &LinksSpec) -> Result<LinkConfig> {
    let key = |k: &str| format!("links.{k}");
    positive(&key("wavelength_nm"), l.wavelength_nm)?;
    for (k, v) in [
        ("distance_threshold_km", l.distance_threshold_km),
        ("geo_distance_threshold_km", l.geo_distance_threshold_km),
        ("user_distance_threshold_km", l.user_distance_threshold_km),
    ] {
        if let Some(v) = v {
            positive(&key(k), v)?;
        }
    }
    if !(l.min_elevation_deg.is_finite() && (-90.0..=90.0).contains(&l.min_elevation_deg)) {
        return Err(Error::invalid(key("min_elevation_deg"), "must lie in [-90, 90]"));
    }
    if !(l.occlusion_margin_km.is_finite() && l.occlusion_margin_km >= 0.0) {
        return Err(Error::invalid(key("occlusion_margin_km"), "must be >= 0"));
    }
    if l.max_isl_degree == Some(0) {
        return Err(Error::invalid(key("max_isl_degree"), "must be >= 1"));
    }
    if l.geo_leo_links == Some(0) {
        return Err(Error::invalid(key("geo_leo_links"), "must be >= 1"));
    }
    if l.leo.transmit_power_dbm.is_none() || l.leo.tx_gain_dbi.is_none() || l.leo.rx_gain_dbi.is_none() {
        return Err(Error::invalid(key("leo"), "transmit_power_dbm, tx_gain_dbi and rx_gain_dbi are required"));
    }
    if l.ogs.rx_gain_dbi.is_none() {
        return Err(Error::invalid(key("ogs.rx_gain_dbi"), "is required"));
    }
    if let Some(rf) = &l.user_rf {
        rf.params.validate().map_err(|e| keyed("links.user_rf.params", e))?;
        rf.noise.validate().map_err(|e| keyed("links.user_rf.noise", e))?;
    }
    let rules = |d: Option<f64>| LinkClassRules::optical(d.map(|x| x * 1e3), l.required_rx_power_dbm);
    let links = LinkConfig {
        carrier: Carrier::WavelengthM(l.wavelength_nm * 1e-9),
        other_losses_db: l.other_losses_db,
        leo_rules: rules(l.distance_threshold_km),
        geo_rules: rules(l.geo_distance_threshold_km),
        user_distance_threshold_m: l.user_distance_threshold_km.map(|x| x * 1e3),
        user_attachment: l.user_attachment,
        user_rf: l.user_rf,
        min_elevation_deg: l.min_elevation_deg,
        occlusion_margin_m: l.occlusion_margin_km * 1e3,
        isl_pattern: l.isl_pattern,
        max_isl_degree: l.max_isl_degree,
        geo_leo_links: l.geo_leo_links,
        leo: l.leo,
        geo: l.geo,
        ogs: l.ogs,
    };
    links.leo_rules.validate().map_err(|e| keyed("links", e))?;
    Ok(links)
}
