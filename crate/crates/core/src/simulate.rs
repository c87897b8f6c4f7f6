//! Material journeys: arc segments chained with node dwells into a
//! timestamped event log.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanics::{
    integrate_segment, IntegratorConfig, MechanicsError, SegmentState, Trajectory,
};
use crate::network::{CompartmentId, CompartmentRole, TMNetwork};

/// The tracked element of target material.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialElement {
    /// Mass in kilograms.
    pub mass: f64,
    pub material: String,
    /// Share of the mass drawn from renewable sources, in `[0, 1]`.
    pub renewable_fraction: f64,
}

impl MaterialElement {
    pub fn new(
        mass: f64,
        material: impl Into<String>,
        renewable_fraction: f64,
    ) -> Result<Self, SimulateError> {
        let element = MaterialElement {
            mass,
            material: material.into(),
            renewable_fraction,
        };
        element.validate()?;
        Ok(element)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(SimulateError::InvalidElement(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !(0.0..=1.0).contains(&self.renewable_fraction) {
            return Err(SimulateError::InvalidElement(format!(
                "renewable fraction must lie in [0, 1], got {}",
                self.renewable_fraction
            )));
        }
        Ok(())
    }

    /// Mass drawn from nonrenewable sources.
    pub fn nonrenewable_mass(&self) -> f64 {
        (1.0 - self.renewable_fraction) * self.mass
    }
}

/// Alternating node, arc, node, ... sequence with per-node dwell times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Route {
    pub ids: Vec<CompartmentId>,
    /// Seconds spent at each node before departing; missing entries are zero.
    pub dwell: BTreeMap<CompartmentId, f64>,
}

/// One `(node, arc, node)` step of a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leg {
    pub from: CompartmentId,
    pub arc: CompartmentId,
    pub to: CompartmentId,
}

impl Route {
    pub fn new(
        ids: impl IntoIterator<Item = impl Into<CompartmentId>>,
        dwell: impl IntoIterator<Item = (CompartmentId, f64)>,
    ) -> Self {
        Route {
            ids: ids.into_iter().map(Into::into).collect(),
            dwell: dwell.into_iter().collect(),
        }
    }

    pub fn dwell_at(&self, node: CompartmentId) -> f64 {
        self.dwell.get(&node).copied().unwrap_or(0.0)
    }

    pub fn legs(&self) -> impl Iterator<Item = Leg> + '_ {
        self.ids
            .chunks(2)
            .zip(self.ids.iter().skip(2).step_by(2))
            .map(|(pair, &to)| Leg {
                from: pair[0],
                arc: pair[1],
                to,
            })
    }

    pub fn first_node(&self) -> Option<CompartmentId> {
        self.ids.first().copied()
    }

    pub fn last_node(&self) -> Option<CompartmentId> {
        self.ids.last().copied()
    }

    /// Checks that the route alternates nodes and batch arcs of `net`, each
    /// arc leading from the node before it to the node after it.
    pub fn validate(&self, net: &TMNetwork) -> Result<(), SimulateError> {
        let mismatch = |reason: String| Err(SimulateError::RouteMismatch(reason));
        if self.ids.is_empty() {
            return mismatch("route is empty".into());
        }
        if self.ids.len().is_multiple_of(2) {
            return mismatch("route must start and end at nodes".into());
        }
        for (pos, &id) in self.ids.iter().enumerate() {
            let Some(c) = net.get(id) else {
                return mismatch(format!("{id} is not in the network"));
            };
            let want_node = pos % 2 == 0;
            if want_node && c.role.is_transport() {
                return mismatch(format!("position {pos} must be a node, {id} is an arc"));
            }
            if !want_node && c.role != CompartmentRole::TransportBatch {
                return mismatch(format!(
                    "position {pos} must be a batch arc, {id} has role {}",
                    c.role
                ));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for leg in self.legs() {
            let arc = net.get(leg.arc).expect("checked above");
            if arc.origin != leg.from || arc.destination != leg.to {
                return mismatch(format!(
                    "arc {} runs {} -> {}, route uses it as {} -> {}",
                    leg.arc, arc.origin, arc.destination, leg.from, leg.to
                ));
            }
            if !seen.insert(leg.arc) {
                return mismatch(format!("arc {} traversed twice", leg.arc));
            }
        }
        for (&node, &d) in &self.dwell {
            if !(d.is_finite() && d >= 0.0) {
                return mismatch(format!("dwell at {node} must be non-negative, got {d}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JourneyEventKind {
    ExitNode,
    EnterNode,
    ExitReservoirNonrenewable,
    EnterLandfill,
    EnterIncinerator,
    EnterEnvironment,
}

impl JourneyEventKind {
    /// Whether the event moves unsustainable mass.
    pub fn is_unsustainable(self) -> bool {
        !matches!(
            self,
            JourneyEventKind::ExitNode | JourneyEventKind::EnterNode
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JourneyEventKind::ExitNode => "exit_node",
            JourneyEventKind::EnterNode => "enter_node",
            JourneyEventKind::ExitReservoirNonrenewable => "exit_reservoir_nonrenewable",
            JourneyEventKind::EnterLandfill => "enter_landfill",
            JourneyEventKind::EnterIncinerator => "enter_incinerator",
            JourneyEventKind::EnterEnvironment => "enter_environment",
        }
    }
}

impl fmt::Display for JourneyEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JourneyEvent {
    pub time: f64,
    pub compartment: CompartmentId,
    pub kind: JourneyEventKind,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JourneyLog {
    pub events: Vec<JourneyEvent>,
    /// Per-arc trajectories in journey time and cumulative path coordinate.
    pub trajectories: BTreeMap<CompartmentId, Trajectory>,
    pub milestone_times: BTreeMap<String, f64>,
}

impl JourneyLog {
    /// Time of the final event, or zero for an empty log.
    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("route mismatch: {0}")]
    RouteMismatch(String),
    #[error("invalid material element: {0}")]
    InvalidElement(String),
    #[error("time step must be positive, got {0}")]
    NonpositiveStep(f64),
    #[error("arc {arc}: {source}")]
    Segment {
        arc: CompartmentId,
        source: MechanicsError,
    },
    #[error("journey has no milestone {0}")]
    MissingMilestone(String),
}

impl SimulateError {
    pub fn code(&self) -> &'static str {
        match self {
            SimulateError::RouteMismatch(_) => "RouteMismatch",
            SimulateError::InvalidElement(_) => "InvalidElement",
            SimulateError::NonpositiveStep(_) => "NonpositiveStep",
            SimulateError::Segment { source, .. } => source.code(),
            SimulateError::MissingMilestone(_) => "MissingMilestone",
        }
    }
}

fn classify_exit(role: CompartmentRole) -> Option<JourneyEventKind> {
    (role == CompartmentRole::NonrenewableReservoir)
        .then_some(JourneyEventKind::ExitReservoirNonrenewable)
}

fn classify_entry(role: CompartmentRole) -> Option<JourneyEventKind> {
    match role {
        CompartmentRole::Landfill => Some(JourneyEventKind::EnterLandfill),
        CompartmentRole::Incinerator => Some(JourneyEventKind::EnterIncinerator),
        CompartmentRole::Environment => Some(JourneyEventKind::EnterEnvironment),
        _ => None,
    }
}

/// Milestone label of the `n`-th departure/arrival instant, if labelled.
fn sequence_label(n: usize) -> Option<String> {
    (n <= 4).then(|| format!("t{n}"))
}

/// Simulates the element travelling along `route`, one compartment at a time.
///
/// Each arc starts from rest at its origin node; the element arrives at rest
/// and waits out the node's dwell before the next arc departs. The clock
/// starts at `t0 = 0` when the element leaves the first node.
pub fn run_journey(
    net: &TMNetwork,
    element: &MaterialElement,
    route: &Route,
    config: &IntegratorConfig,
) -> Result<JourneyLog, SimulateError> {
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(SimulateError::NonpositiveStep(config.dt));
    }
    element.validate()?;
    route.validate(net)?;

    let mut log = JourneyLog::default();
    let mut clock = 0.0;
    let mut path_offset = 0.0;
    let mut position = [0.0, 0.0];
    let mut instants = 0usize;
    let push = |log: &mut JourneyLog, time, compartment, kind, mass| {
        log.events.push(JourneyEvent {
            time,
            compartment,
            kind,
            mass,
        })
    };

    let legs: Vec<Leg> = route.legs().collect();
    for (q, leg) in legs.iter().enumerate() {
        if q > 0 {
            clock += route.dwell_at(leg.from);
        }
        let from_role = net.role_of(leg.from).expect("validated route");
        push(
            &mut log,
            clock,
            leg.from,
            JourneyEventKind::ExitNode,
            element.mass,
        );
        if let Some(kind) = classify_exit(from_role) {
            let mass = element.nonrenewable_mass();
            if mass > 0.0 {
                push(&mut log, clock, leg.from, kind, mass);
            }
        }
        if let Some(label) = sequence_label(instants) {
            log.milestone_times.insert(label, clock);
        }
        instants += 1;

        let arc = net.get(leg.arc).expect("validated route");
        let dynamics = arc.dynamics.as_ref().expect("batch arcs carry dynamics");
        let total_mass = dynamics.carrier_mass + element.mass;
        let mut trajectory = integrate_segment(
            &SegmentState::at_rest(clock),
            total_mass,
            &dynamics.geometry,
            &dynamics.forces,
            config,
        )
        .map_err(|source| SimulateError::Segment {
            arc: leg.arc,
            source,
        })?;
        trajectory.offset(path_offset, position[0], position[1]);
        let last = *trajectory.samples.last().expect("trajectory has samples");
        position = [last.x, last.y];
        path_offset += dynamics.geometry.length;
        clock = trajectory.exit_time;
        log.trajectories.insert(leg.arc, trajectory);

        let to_role = net.role_of(leg.to).expect("validated route");
        push(
            &mut log,
            clock,
            leg.to,
            JourneyEventKind::EnterNode,
            element.mass,
        );
        let sink = classify_entry(to_role);
        if let Some(kind) = sink {
            push(&mut log, clock, leg.to, kind, element.mass);
        }
        let is_final = q + 1 == legs.len();
        if sink.is_some() || is_final {
            log.milestone_times.entry("t5".into()).or_insert(clock);
        }
        if !is_final {
            if let Some(label) = sequence_label(instants) {
                log.milestone_times.insert(label, clock);
            }
            instants += 1;
        }
    }
    Ok(log)
}

/// Departure and arrival instants `t0..t5` of a finished journey.
///
/// `t0` is the first departure, `t1..t4` alternate arrival and departure at
/// the first two intermediate nodes, and `t5` is the entry into the first
/// disposal sink (landfill, incinerator, environment), or the final arrival
/// when the route reaches none.
pub fn milestone_times(log: &JourneyLog) -> Result<&BTreeMap<String, f64>, SimulateError> {
    if log.milestone_times.contains_key("t5") {
        Ok(&log.milestone_times)
    } else {
        Err(SimulateError::MissingMilestone("t5".into()))
    }
}

/// Looks up one milestone by label.
pub fn milestone(log: &JourneyLog, label: &str) -> Result<f64, SimulateError> {
    log.milestone_times
        .get(label)
        .copied()
        .ok_or_else(|| SimulateError::MissingMilestone(label.into()))
}
