//! Scenario variants built from circular-economy strategies, and the search
//! for the variant with maximum circularity over a finite scenario set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circularity::{
    circularity, unsustainable_continuous_flow, CircularityError, CircularityReport, Horizon,
    DEFAULT_DELTA,
};
use crate::mechanics::{IntegratorConfig, STANDARD_GRAVITY};
use crate::network::{
    build_network, Compartment, CompartmentId, CompartmentRole, NetworkError, TMNetwork,
};
use crate::simulate::{run_journey, JourneyLog, MaterialElement, Route, SimulateError};

/// Where a repair-and-reuse stage is spliced into a route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairInsertion {
    pub repair_node: CompartmentId,
    /// Arc from the last use node to the repair node.
    pub inbound_arc: CompartmentId,
    /// Arc from the repair node to the disposal node.
    pub outbound_arc: CompartmentId,
    /// Time spent in repair and second use, seconds.
    #[serde(rename = "second_use_dwell_s")]
    pub second_use_dwell: f64,
    /// Inbound path length; defaults to the replaced arc's length.
    #[serde(
        rename = "inbound_length_m",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub inbound_length: Option<f64>,
    #[serde(
        rename = "outbound_length_m",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub outbound_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// Draw this share of the material from renewable sources.
    ReduceRenewable { fraction: f64 },
    /// Scale the material mass by `factor`.
    ReduceMaterial { factor: f64 },
    /// Route the used product through repair and a second use before disposal.
    InsertRepair(RepairInsertion),
}

impl Strategy {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        match *self {
            Strategy::ReduceRenewable { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(OptimizeError::InvalidFraction {
                        name: "fraction",
                        value: fraction,
                    });
                }
            }
            Strategy::ReduceMaterial { factor } => {
                if !(factor > 0.0 && factor <= 1.0) {
                    return Err(OptimizeError::InvalidFraction {
                        name: "factor",
                        value: factor,
                    });
                }
            }
            Strategy::InsertRepair(r) => {
                if !(r.second_use_dwell.is_finite() && r.second_use_dwell >= 0.0) {
                    return Err(OptimizeError::RewireConflict(format!(
                        "second-use dwell must be non-negative, got {}",
                        r.second_use_dwell
                    )));
                }
                for len in [r.inbound_length, r.outbound_length].into_iter().flatten() {
                    if !(len.is_finite() && len > 0.0) {
                        return Err(OptimizeError::RewireConflict(format!(
                            "repair arc length must be positive, got {len}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Short label appended to scenario names.
    pub fn label(&self) -> String {
        match self {
            Strategy::ReduceRenewable { fraction } => format!("renewable({fraction})"),
            Strategy::ReduceMaterial { factor } => format!("material({factor})"),
            Strategy::InsertRepair(r) => format!("repair({})", r.repair_node),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Numerical settings shared by simulation and circularity evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub gravity: f64,
    pub delta: f64,
    pub horizon: Horizon,
    pub max_time: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let integrator = IntegratorConfig::default();
        SimSettings {
            dt: integrator.dt,
            gravity: STANDARD_GRAVITY,
            delta: DEFAULT_DELTA,
            horizon: Horizon::Unbounded,
            max_time: integrator.max_time,
        }
    }
}

impl SimSettings {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            max_time: self.max_time,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub network: TMNetwork,
    pub element: MaterialElement,
    pub route: Route,
    /// Continuous-arc flow rates, kg/s.
    pub flows: BTreeMap<CompartmentId, f64>,
    pub applied: Vec<Strategy>,
    pub settings: SimSettings,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        network: TMNetwork,
        element: MaterialElement,
        route: Route,
        flows: BTreeMap<CompartmentId, f64>,
        settings: SimSettings,
    ) -> Result<Self, OptimizeError> {
        let scenario = Scenario {
            label: label.into(),
            network,
            element,
            route,
            flows,
            applied: Vec::new(),
            settings,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        self.element.validate()?;
        self.route.validate(&self.network)?;
        unsustainable_continuous_flow(&self.network, &self.flows)?;
        Ok(())
    }

    pub fn simulate(&self, config: &IntegratorConfig) -> Result<JourneyLog, SimulateError> {
        run_journey(&self.network, &self.element, &self.route, config)
    }

    /// Simulates the scenario and computes `λ_φ` at the given horizon and `Δ`.
    pub fn evaluate(
        &self,
        horizon: Horizon,
        delta: f64,
        config: &IntegratorConfig,
    ) -> Result<(JourneyLog, CircularityReport), OptimizeError> {
        let log = self.simulate(config)?;
        let report = circularity(&log, &self.network, &self.flows, horizon, delta)?;
        Ok((log, report))
    }

    /// Evaluates with the scenario's own settings.
    pub fn evaluate_default(&self) -> Result<(JourneyLog, CircularityReport), OptimizeError> {
        self.evaluate(
            self.settings.horizon,
            self.settings.delta,
            &self.settings.integrator(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("{name} = {value} is outside its allowed range")]
    InvalidFraction { name: &'static str, value: f64 },
    #[error("cannot insert repair stage: {0}")]
    RewireConflict(String),
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("duplicate scenario label {0:?}")]
    DuplicateLabel(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Circularity(#[from] CircularityError),
    #[error("scenario {label:?}: {source}")]
    Scenario {
        label: String,
        source: Box<OptimizeError>,
    },
}

impl OptimizeError {
    pub fn code(&self) -> &'static str {
        match self {
            OptimizeError::InvalidFraction { .. } => "InvalidFraction",
            OptimizeError::RewireConflict(_) => "RewireConflict",
            OptimizeError::EmptyScenarioSet => "EmptyScenarioSet",
            OptimizeError::DuplicateLabel(_) => "DuplicateLabel",
            OptimizeError::Network(e) => e.code(),
            OptimizeError::Simulate(e) => e.code(),
            OptimizeError::Circularity(e) => e.code(),
            OptimizeError::Scenario { source, .. } => source.code(),
        }
    }
}

/// Returns `base` transformed by `strategy`, labelled `"<base>+<strategy>"`.
pub fn apply_strategy(base: &Scenario, strategy: &Strategy) -> Result<Scenario, OptimizeError> {
    strategy.validate()?;
    let mut next = base.clone();
    match *strategy {
        Strategy::ReduceRenewable { fraction } => next.element.renewable_fraction = fraction,
        Strategy::ReduceMaterial { factor } => next.element.mass *= factor,
        Strategy::InsertRepair(r) => insert_repair(&mut next, &r)?,
    }
    next.label = format!("{}+{}", base.label, strategy.label());
    next.applied.push(*strategy);
    next.validate()?;
    Ok(next)
}

/// Replaces the final arc of the route (the collection arc into disposal)
/// with `last node -> repair node -> disposal node`. The new arcs copy the
/// replaced arc's carrier and force model.
fn insert_repair(scenario: &mut Scenario, r: &RepairInsertion) -> Result<(), OptimizeError> {
    let conflict = |msg: String| Err(OptimizeError::RewireConflict(msg));
    let ids = [r.repair_node, r.inbound_arc, r.outbound_arc];
    if ids.iter().collect::<BTreeSet<_>>().len() != 3 {
        return conflict("repair node and arcs need distinct ids".into());
    }
    for id in ids {
        if scenario.network.contains(id) {
            return conflict(format!("{id} already exists in the network"));
        }
    }
    let Some(last) = scenario.route.legs().last() else {
        return conflict("route has no arc to replace".into());
    };
    let replaced = scenario
        .network
        .get(last.arc)
        .and_then(|c| c.dynamics)
        .ok_or_else(|| OptimizeError::RewireConflict(format!("{} has no dynamics", last.arc)))?;

    let resized = |length: Option<f64>| {
        let mut d = replaced;
        if let Some(len) = length {
            // Keep the end elevation of the replaced path.
            let drop = d.geometry.gravity_factor();
            d.geometry.elevation += (len - d.geometry.length) * drop;
            d.geometry.length = len;
        }
        d
    };

    let mut compartments: Vec<Compartment> = scenario
        .network
        .clone()
        .into_compartments()
        .into_iter()
        .filter(|c| c.id != last.arc)
        .collect();
    compartments.push(Compartment::node(
        r.repair_node,
        CompartmentRole::RepairStage,
    ));
    compartments.push(Compartment::batch_arc(
        r.inbound_arc,
        last.from,
        r.repair_node,
        resized(r.inbound_length),
    ));
    compartments.push(Compartment::batch_arc(
        r.outbound_arc,
        r.repair_node,
        last.to,
        resized(r.outbound_length),
    ));
    scenario.network = build_network(compartments, scenario.network.material())?;

    let keep = scenario.route.ids.len() - 2;
    scenario.route.ids.truncate(keep);
    scenario
        .route
        .ids
        .extend([r.inbound_arc, r.repair_node, r.outbound_arc, last.to]);
    scenario
        .route
        .dwell
        .insert(r.repair_node, r.second_use_dwell);
    Ok(())
}

/// Builds the finite design space: each menu slot is either skipped or
/// contributes one of its strategies, slots compose left to right.
///
/// The base scenario is always first; duplicates (by label) are dropped.
pub fn enumerate_scenarios(
    base: &Scenario,
    menu: &[Vec<Strategy>],
) -> Result<Vec<Scenario>, OptimizeError> {
    for slot in menu {
        for s in slot {
            s.validate()?;
        }
    }
    let mut scenarios = vec![base.clone()];
    for slot in menu {
        let mut extended = Vec::with_capacity(scenarios.len() * (slot.len() + 1));
        for scenario in &scenarios {
            extended.push(scenario.clone());
            for strategy in slot {
                extended.push(apply_strategy(scenario, strategy)?);
            }
        }
        scenarios = extended;
    }
    let mut seen = BTreeSet::new();
    scenarios.retain(|s| seen.insert(s.label.clone()));
    Ok(scenarios)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedScenario {
    pub scenario: Scenario,
    pub report: CircularityReport,
    pub log: JourneyLog,
}

/// Total order used for ranking: higher `λ` first, then ascending label.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Evaluates every scenario at a shared horizon and `Δ` and ranks them by
/// circularity. The head of the result is the maximiser `N*`.
pub fn argmax_circularity(
    scenarios: &[Scenario],
    horizon: Horizon,
    delta: f64,
    config: &IntegratorConfig,
) -> Result<Vec<RankedScenario>, OptimizeError> {
    if scenarios.is_empty() {
        return Err(OptimizeError::EmptyScenarioSet);
    }
    let mut labels = BTreeSet::new();
    for s in scenarios {
        if !labels.insert(s.label.as_str()) {
            return Err(OptimizeError::DuplicateLabel(s.label.clone()));
        }
    }

    let evaluated: Vec<Result<RankedScenario, OptimizeError>> = scenarios
        .par_iter()
        .map(|s| {
            s.evaluate(horizon, delta, config)
                .map(|(log, report)| RankedScenario {
                    scenario: s.clone(),
                    report,
                    log,
                })
                .map_err(|e| OptimizeError::Scenario {
                    label: s.label.clone(),
                    source: Box::new(e),
                })
        })
        .collect();
    let mut ranked = evaluated.into_iter().collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| {
        rank_order(
            (&a.scenario.label, a.report.lambda),
            (&b.scenario.label, b.report.lambda),
        )
    });
    Ok(ranked)
}
