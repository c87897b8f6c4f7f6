//! Scenario files: a strict TOML document describing one scenario and an
//! optional strategy menu.
//!
//! ```toml
//! label = "linear"
//! route = [1, 5, 2, 6, 3, 7, 4]
//!
//! [material]
//! name = "beta"
//! mass_kg = 10.0
//! renewable_fraction = 0.0
//!
//! [[nodes]]
//! id = 1
//! role = "nonrenewable_reservoir"
//!
//! [[arcs]]
//! id = 5
//! from = 1
//! to = 2
//! length_m = 1.0e4
//! carrier_mass_kg = 9990.0
//! propulsion_N = 5000.0
//! resist_const_N = 2000.0
//!
//! [sim]
//! dt_s = 1e-3
//! horizon_s = "unbounded"
//!
//! [[strategies]]
//! options = [{ kind = "reduce_renewable", fraction = 0.5 }]
//! ```
//!
//! Every key is in SI units and carries a unit suffix. Unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circularity::{Horizon, DEFAULT_DELTA};
use crate::mechanics::{ForceModel, IntegratorConfig, STANDARD_GRAVITY};
use crate::network::{
    build_network, ArcDynamics, ArcGeometry, Compartment, CompartmentId, CompartmentRole, FrameAxis,
};
use crate::optimize::{OptimizeError, Scenario, SimSettings, Strategy};
use crate::simulate::{MaterialElement, Route};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioFileError {
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error("{}unknown key `{key}`", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },
    #[error("invalid scenario: {0}")]
    Validation(#[from] OptimizeError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ScenarioFileError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioFileError::Parse { .. } => "ParseError",
            ScenarioFileError::UnknownKey { .. } => "UnknownKey",
            ScenarioFileError::Validation(e) => e.code(),
            ScenarioFileError::Io { .. } => "IoError",
        }
    }

    fn parse(message: impl Into<String>) -> Self {
        ScenarioFileError::Parse {
            line: None,
            message: message.into(),
        }
    }
}

impl From<crate::network::NetworkError> for ScenarioFileError {
    fn from(e: crate::network::NetworkError) -> Self {
        ScenarioFileError::Validation(e.into())
    }
}

impl From<crate::simulate::SimulateError> for ScenarioFileError {
    fn from(e: crate::simulate::SimulateError) -> Self {
        ScenarioFileError::Validation(e.into())
    }
}

/// A parsed scenario plus the strategy menu that defines its design space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub menu: Vec<Vec<Strategy>>,
}

pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile, ScenarioFileError> {
    let doc: Document = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    doc.into_scenario_file()
}

impl ScenarioFile {
    /// Reads and parses a file; a missing `label` defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioFileError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let doc: Document = toml::from_str(&text).map_err(|e| toml_error(&text, &e))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        let mut file = doc.into_scenario_file()?;
        if let (None, Some(stem)) = (label_of(&text), stem) {
            file.scenario.label = stem;
        }
        Ok(file)
    }

    /// Canonical TOML rendering; parsing it yields an equal value.
    pub fn to_toml(&self) -> String {
        let doc = Document::from_scenario(&self.scenario, &self.menu);
        toml::to_string(&doc).expect("scenario documents always serialise")
    }
}

fn label_of(text: &str) -> Option<String> {
    toml::from_str::<toml::Table>(text)
        .ok()?
        .get("label")?
        .as_str()
        .map(str::to_owned)
}

fn toml_error(text: &str, err: &toml::de::Error) -> ScenarioFileError {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
    let message = err.message().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or_default().to_string();
        return ScenarioFileError::UnknownKey { key, line };
    }
    ScenarioFileError::Parse { line, message }
}

const DEFAULT_LABEL: &str = "scenario";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    route: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    applied: Vec<Strategy>,
    material: MaterialSection,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    arcs: Vec<ArcEntry>,
    #[serde(default)]
    sim: SimSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    strategies: Vec<MenuSlot>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialSection {
    name: String,
    mass_kg: f64,
    #[serde(default)]
    renewable_fraction: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: u32,
    role: CompartmentRole,
    #[serde(default)]
    dwell_s: f64,
}

fn batch_role() -> CompartmentRole {
    CompartmentRole::TransportBatch
}

fn default_axis() -> FrameAxis {
    FrameAxis::XzIncline
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ArcEntry {
    id: u32,
    from: u32,
    to: u32,
    #[serde(default = "batch_role")]
    role: CompartmentRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    incline_rad: Option<f64>,
    #[serde(default = "default_axis")]
    axis: FrameAxis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elevation_m: Option<f64>,
    #[serde(default)]
    carrier_mass_kg: f64,
    #[serde(default)]
    propulsion_N: f64,
    #[serde(default)]
    resist_const_N: f64,
    #[serde(default)]
    resist_linear_Ns_per_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow_kg_per_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum HorizonSpec {
    Seconds(f64),
    Keyword(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimSection {
    dt_s: f64,
    g: f64,
    delta_s: f64,
    horizon_s: HorizonSpec,
    max_time_s: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let integrator = IntegratorConfig::default();
        SimSection {
            dt_s: integrator.dt,
            g: STANDARD_GRAVITY,
            delta_s: DEFAULT_DELTA,
            horizon_s: HorizonSpec::Keyword("unbounded".into()),
            max_time_s: integrator.max_time,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MenuSlot {
    options: Vec<Strategy>,
}

impl SimSection {
    fn to_settings(&self) -> Result<SimSettings, ScenarioFileError> {
        let horizon = match &self.horizon_s {
            HorizonSpec::Seconds(phi) => {
                Horizon::bounded(*phi).map_err(|e| ScenarioFileError::Validation(e.into()))?
            }
            HorizonSpec::Keyword(k) if k == "unbounded" => Horizon::Unbounded,
            HorizonSpec::Keyword(k) => {
                return Err(ScenarioFileError::parse(format!(
                    "sim.horizon_s must be a number of seconds or \"unbounded\", got {k:?}"
                )))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(ScenarioFileError::parse(format!(
                    "sim.{name} must be positive, got {v}"
                )))
            }
        };
        Ok(SimSettings {
            dt: positive("dt_s", self.dt_s)?,
            gravity: self.g,
            delta: positive("delta_s", self.delta_s)?,
            horizon,
            max_time: positive("max_time_s", self.max_time_s)?,
        })
    }

    fn from_settings(s: &SimSettings) -> Self {
        SimSection {
            dt_s: s.dt,
            g: s.gravity,
            delta_s: s.delta,
            horizon_s: match s.horizon {
                Horizon::Bounded(phi) => HorizonSpec::Seconds(phi),
                Horizon::Unbounded => HorizonSpec::Keyword("unbounded".into()),
            },
            max_time_s: s.max_time,
        }
    }
}

impl ArcEntry {
    fn to_compartment(&self, gravity: f64) -> Compartment {
        let dynamics = self.length_m.map(|length| {
            let incline = self.incline_rad.unwrap_or(0.0);
            let geometry = match self.axis {
                FrameAxis::XzIncline => ArcGeometry::incline(length, incline),
                axis => ArcGeometry {
                    incline,
                    ..ArcGeometry::level(length, axis)
                },
            };
            let geometry = match self.elevation_m {
                Some(h) => geometry.with_elevation(h),
                None => geometry,
            };
            ArcDynamics {
                geometry,
                carrier_mass: self.carrier_mass_kg,
                forces: ForceModel::new(
                    self.propulsion_N,
                    self.resist_const_N,
                    self.resist_linear_Ns_per_m,
                )
                .with_gravity(gravity),
            }
        });
        Compartment::arc(self.id, self.from, self.to, self.role, dynamics)
    }

    fn from_compartment(c: &Compartment, flow: Option<f64>) -> Self {
        let d = c.dynamics;
        ArcEntry {
            id: c.id.0,
            from: c.origin.0,
            to: c.destination.0,
            role: c.role,
            length_m: d.map(|d| d.geometry.length),
            incline_rad: d.map(|d| d.geometry.incline),
            axis: d.map_or(FrameAxis::XzIncline, |d| d.geometry.axis),
            elevation_m: d.map(|d| d.geometry.elevation),
            carrier_mass_kg: d.map_or(0.0, |d| d.carrier_mass),
            propulsion_N: d.map_or(0.0, |d| d.forces.propulsion),
            resist_const_N: d.map_or(0.0, |d| d.forces.resist_const),
            resist_linear_Ns_per_m: d.map_or(0.0, |d| d.forces.resist_linear),
            flow_kg_per_s: flow,
        }
    }
}

impl Document {
    fn into_scenario_file(self) -> Result<ScenarioFile, ScenarioFileError> {
        let settings = self.sim.to_settings()?;
        let mut compartments = Vec::with_capacity(self.nodes.len() + self.arcs.len());
        let mut dwell = BTreeMap::new();
        for n in &self.nodes {
            compartments.push(Compartment::node(n.id, n.role));
            dwell.insert(CompartmentId(n.id), n.dwell_s);
        }
        let mut flows = BTreeMap::new();
        for a in &self.arcs {
            if a.from == a.to {
                return Err(crate::network::NetworkError::IndexRuleViolation {
                    id: CompartmentId(a.id),
                    reason: format!("arc must have from != to, got {} -> {}", a.from, a.to),
                }
                .into());
            }
            compartments.push(a.to_compartment(settings.gravity));
            if let Some(rate) = a.flow_kg_per_s {
                flows.insert(CompartmentId(a.id), rate);
            }
        }
        let network = build_network(compartments, self.material.name.clone())?;
        let element = MaterialElement::new(
            self.material.mass_kg,
            self.material.name,
            self.material.renewable_fraction,
        )?;
        let route = Route::new(self.route, dwell);
        let mut scenario = Scenario::new(
            self.label.unwrap_or_else(|| DEFAULT_LABEL.into()),
            network,
            element,
            route,
            flows,
            settings,
        )?;
        scenario.applied = self.applied;

        let menu: Vec<Vec<Strategy>> = self.strategies.into_iter().map(|s| s.options).collect();
        for strategy in menu.iter().flatten() {
            strategy.validate()?;
        }
        Ok(ScenarioFile { scenario, menu })
    }

    fn from_scenario(s: &Scenario, menu: &[Vec<Strategy>]) -> Self {
        let nodes = s
            .network
            .nodes()
            .map(|n| NodeEntry {
                id: n.id.0,
                role: n.role,
                dwell_s: s.route.dwell_at(n.id),
            })
            .collect();
        let arcs = s
            .network
            .arcs()
            .map(|a| ArcEntry::from_compartment(a, s.flows.get(&a.id).copied()))
            .collect();
        Document {
            label: Some(s.label.clone()),
            route: s.route.ids.iter().map(|c| c.0).collect(),
            applied: s.applied.clone(),
            material: MaterialSection {
                name: s.element.material.clone(),
                mass_kg: s.element.mass,
                renewable_fraction: s.element.renewable_fraction,
            },
            nodes,
            arcs,
            sim: SimSection::from_settings(&s.settings),
            strategies: menu
                .iter()
                .map(|options| MenuSlot {
                    options: options.clone(),
                })
                .collect(),
        }
    }
}
