//! Compartments, material networks, and their weighted mass-flow digraphs.
//!
//! A compartment `c^k_{i,j}` is a node when `i = j = k` (it stores, transforms
//! or uses material) and an arc when `i != j` (it moves material from node `i`
//! to node `j`). A [`TMNetwork`] is a validated, weakly connected set of
//! compartments sharing one target material.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanics::ForceModel;

/// Caller-assigned compartment identifier (the `k` superscript).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompartmentId(pub u32);

impl fmt::Display for CompartmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl From<u32> for CompartmentId {
    fn from(k: u32) -> Self {
        CompartmentId(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompartmentRole {
    NonrenewableReservoir,
    RenewableReservoir,
    Manufacturer,
    UseStage,
    RepairStage,
    Landfill,
    Incinerator,
    Environment,
    TransportBatch,
    TransportContinuous,
}

impl CompartmentRole {
    pub fn is_transport(self) -> bool {
        matches!(
            self,
            CompartmentRole::TransportBatch | CompartmentRole::TransportContinuous
        )
    }

    /// Landfill, incinerator or natural environment: entering one is unsustainable.
    pub fn is_disposal_sink(self) -> bool {
        matches!(
            self,
            CompartmentRole::Landfill | CompartmentRole::Incinerator | CompartmentRole::Environment
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CompartmentRole::NonrenewableReservoir => "nonrenewable_reservoir",
            CompartmentRole::RenewableReservoir => "renewable_reservoir",
            CompartmentRole::Manufacturer => "manufacturer",
            CompartmentRole::UseStage => "use_stage",
            CompartmentRole::RepairStage => "repair_stage",
            CompartmentRole::Landfill => "landfill",
            CompartmentRole::Incinerator => "incinerator",
            CompartmentRole::Environment => "environment",
            CompartmentRole::TransportBatch => "transport_batch",
            CompartmentRole::TransportContinuous => "transport_continuous",
        }
    }
}

impl fmt::Display for CompartmentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the path acceleration maps into the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameAxis {
    /// Straight incline in the x-z plane, descending by `sin(alpha)` per metre.
    XzIncline,
    XAxis,
    YAxis,
}

impl FrameAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameAxis::XzIncline => "xz_incline",
            FrameAxis::XAxis => "x_axis",
            FrameAxis::YAxis => "y_axis",
        }
    }
}

/// Path geometry of an arc compartment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcGeometry {
    /// Path length `l_k` in metres.
    pub length: f64,
    /// Incline angle in radians; only meaningful on [`FrameAxis::XzIncline`].
    pub incline: f64,
    /// Elevation `h` at the start of the path, in metres.
    pub elevation: f64,
    pub axis: FrameAxis,
}

impl ArcGeometry {
    /// An x-z incline whose end sits at elevation zero (`h = l sin(alpha)`).
    pub fn incline(length: f64, incline: f64) -> Self {
        ArcGeometry {
            length,
            incline,
            elevation: length * incline.sin(),
            axis: FrameAxis::XzIncline,
        }
    }

    /// A level path along a world axis at elevation zero.
    pub fn level(length: f64, axis: FrameAxis) -> Self {
        ArcGeometry {
            length,
            incline: 0.0,
            elevation: 0.0,
            axis,
        }
    }

    pub fn with_elevation(mut self, elevation: f64) -> Self {
        self.elevation = elevation;
        self
    }

    /// Unit direction of travel in world coordinates.
    pub fn direction(&self) -> [f64; 3] {
        match self.axis {
            FrameAxis::XzIncline => [self.incline.cos(), 0.0, -self.incline.sin()],
            FrameAxis::XAxis => [1.0, 0.0, 0.0],
            FrameAxis::YAxis => [0.0, 1.0, 0.0],
        }
    }

    /// Component of gravity along the path per unit `g` (`sin(alpha)` on inclines).
    pub fn gravity_factor(&self) -> f64 {
        match self.axis {
            FrameAxis::XzIncline => self.incline.sin(),
            FrameAxis::XAxis | FrameAxis::YAxis => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(format!("path length must be positive, got {}", self.length));
        }
        if !self.elevation.is_finite() {
            return Err(format!("elevation must be finite, got {}", self.elevation));
        }
        match self.axis {
            FrameAxis::XzIncline => {
                if !(self.incline.is_finite() && self.incline.abs() < FRAC_PI_2) {
                    return Err(format!(
                        "incline must satisfy |alpha| < pi/2, got {}",
                        self.incline
                    ));
                }
            }
            FrameAxis::XAxis | FrameAxis::YAxis => {
                if self.incline != 0.0 {
                    return Err(format!(
                        "axis {} requires zero incline, got {}",
                        self.axis.as_str(),
                        self.incline
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to integrate the motion along a batch-transport arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcDynamics {
    pub geometry: ArcGeometry,
    /// Mass of the empty carrier (truck, ship) in kilograms.
    pub carrier_mass: f64,
    pub forces: ForceModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compartment {
    pub id: CompartmentId,
    pub origin: CompartmentId,
    pub destination: CompartmentId,
    pub role: CompartmentRole,
    /// Present on arcs that carry batches; `None` on nodes.
    pub dynamics: Option<ArcDynamics>,
}

impl Compartment {
    pub fn node(id: impl Into<CompartmentId>, role: CompartmentRole) -> Self {
        let id = id.into();
        Compartment {
            id,
            origin: id,
            destination: id,
            role,
            dynamics: None,
        }
    }

    pub fn arc(
        id: impl Into<CompartmentId>,
        origin: impl Into<CompartmentId>,
        destination: impl Into<CompartmentId>,
        role: CompartmentRole,
        dynamics: Option<ArcDynamics>,
    ) -> Self {
        Compartment {
            id: id.into(),
            origin: origin.into(),
            destination: destination.into(),
            role,
            dynamics,
        }
    }

    /// Batch-transport arc with full dynamics.
    pub fn batch_arc(
        id: impl Into<CompartmentId>,
        origin: impl Into<CompartmentId>,
        destination: impl Into<CompartmentId>,
        dynamics: ArcDynamics,
    ) -> Self {
        Self::arc(
            id,
            origin,
            destination,
            CompartmentRole::TransportBatch,
            Some(dynamics),
        )
    }

    pub fn is_node(&self) -> bool {
        self.origin == self.id && self.destination == self.id
    }

    pub fn is_arc(&self) -> bool {
        self.origin != self.destination
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no compartments")]
    EmptyNetwork,
    #[error("compartment id must be positive")]
    InvalidId,
    #[error("duplicate compartment id {0}")]
    DuplicateId(CompartmentId),
    #[error("arc {arc} references missing node {endpoint}")]
    ArcEndpointMissing {
        arc: CompartmentId,
        endpoint: CompartmentId,
    },
    #[error("compartment {id} violates the index rule: {reason}")]
    IndexRuleViolation { id: CompartmentId, reason: String },
    #[error("network is not connected: {0} unreachable from the first node")]
    DisconnectedNetwork(CompartmentId),
    #[error("compartment {id} has role {role} which does not fit its shape")]
    RoleMismatch {
        id: CompartmentId,
        role: CompartmentRole,
    },
    #[error("batch arc {0} has no dynamics (geometry, carrier mass, forces)")]
    MissingDynamics(CompartmentId),
    #[error("arc {id} has invalid parameters: {reason}")]
    InvalidArc { id: CompartmentId, reason: String },
    #[error("unknown compartment {0}")]
    UnknownCompartment(CompartmentId),
    #[error("weight on {id} must be non-negative and finite, got {value}")]
    NegativeWeight { id: CompartmentId, value: f64 },
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::EmptyNetwork => "EmptyNetwork",
            NetworkError::InvalidId => "InvalidId",
            NetworkError::DuplicateId(_) => "DuplicateId",
            NetworkError::ArcEndpointMissing { .. } => "ArcEndpointMissing",
            NetworkError::IndexRuleViolation { .. } => "IndexRuleViolation",
            NetworkError::DisconnectedNetwork(_) => "DisconnectedNetwork",
            NetworkError::RoleMismatch { .. } => "RoleMismatch",
            NetworkError::MissingDynamics(_) => "MissingDynamics",
            NetworkError::InvalidArc { .. } => "InvalidArc",
            NetworkError::UnknownCompartment(_) => "UnknownCompartment",
            NetworkError::NegativeWeight { .. } => "NegativeWeight",
        }
    }
}

/// A validated thermodynamical material network.
#[derive(Debug, Clone, PartialEq)]
pub struct TMNetwork {
    compartments: BTreeMap<CompartmentId, Compartment>,
    material: String,
}

/// Validates `compartments` and assembles them into a network.
pub fn build_network(
    compartments: impl IntoIterator<Item = Compartment>,
    material: impl Into<String>,
) -> Result<TMNetwork, NetworkError> {
    let mut map = BTreeMap::new();
    for c in compartments {
        if c.id.0 == 0 {
            return Err(NetworkError::InvalidId);
        }
        let id = c.id;
        if map.insert(id, c).is_some() {
            return Err(NetworkError::DuplicateId(id));
        }
    }
    if map.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }

    for c in map.values() {
        check_shape(c)?;
    }
    for c in map.values().filter(|c| c.role.is_transport()) {
        for endpoint in [c.origin, c.destination] {
            match map.get(&endpoint) {
                Some(n) if !n.role.is_transport() => {}
                _ => {
                    return Err(NetworkError::ArcEndpointMissing {
                        arc: c.id,
                        endpoint,
                    })
                }
            }
        }
    }
    check_connected(&map)?;

    let net = TMNetwork {
        compartments: map,
        material: material.into(),
    };
    debug_assert_eq!(net.n_c(), net.n_v() + net.n_a());
    Ok(net)
}

fn check_shape(c: &Compartment) -> Result<(), NetworkError> {
    let k = c.id;
    if c.role.is_transport() {
        if c.origin == c.destination {
            if c.origin == k {
                return Err(NetworkError::RoleMismatch {
                    id: k,
                    role: c.role,
                });
            }
            return Err(NetworkError::IndexRuleViolation {
                id: k,
                reason: format!("arc must have i != j, got i = j = {}", c.origin.0),
            });
        }
        match (&c.dynamics, c.role) {
            (None, CompartmentRole::TransportBatch) => {
                return Err(NetworkError::MissingDynamics(k));
            }
            (Some(d), _) => validate_dynamics(k, d)?,
            (None, _) => {}
        }
    } else {
        if c.origin != k || c.destination != k {
            return Err(NetworkError::IndexRuleViolation {
                id: k,
                reason: format!(
                    "node must have i = j = k, got i = {}, j = {}, k = {}",
                    c.origin.0, c.destination.0, k.0
                ),
            });
        }
        if c.dynamics.is_some() {
            return Err(NetworkError::RoleMismatch {
                id: k,
                role: c.role,
            });
        }
    }
    Ok(())
}

fn validate_dynamics(id: CompartmentId, d: &ArcDynamics) -> Result<(), NetworkError> {
    let invalid = |reason: String| NetworkError::InvalidArc { id, reason };
    d.geometry.validate().map_err(invalid)?;
    if !(d.carrier_mass.is_finite() && d.carrier_mass >= 0.0) {
        return Err(invalid(format!(
            "carrier mass must be non-negative, got {}",
            d.carrier_mass
        )));
    }
    d.forces.validate().map_err(|e| invalid(e.to_string()))
}

fn check_connected(map: &BTreeMap<CompartmentId, Compartment>) -> Result<(), NetworkError> {
    let nodes: Vec<CompartmentId> = map
        .values()
        .filter(|c| !c.role.is_transport())
        .map(|c| c.id)
        .collect();
    let index: BTreeMap<CompartmentId, usize> =
        nodes.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for arc in map.values().filter(|c| c.role.is_transport()) {
        let a = find(&mut parent, index[&arc.origin]);
        let b = find(&mut parent, index[&arc.destination]);
        parent[a] = b;
    }
    if nodes.is_empty() {
        return Ok(());
    }
    let root = find(&mut parent, 0);
    for (i, id) in nodes.iter().enumerate() {
        if find(&mut parent, i) != root {
            return Err(NetworkError::DisconnectedNetwork(*id));
        }
    }
    Ok(())
}

impl TMNetwork {
    pub fn material(&self) -> &str {
        &self.material
    }

    pub fn get(&self, id: CompartmentId) -> Option<&Compartment> {
        self.compartments.get(&id)
    }

    pub fn contains(&self, id: CompartmentId) -> bool {
        self.compartments.contains_key(&id)
    }

    /// All compartments in ascending id order.
    pub fn compartments(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments.values()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments
            .values()
            .filter(|c| !c.role.is_transport())
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments.values().filter(|c| c.role.is_transport())
    }

    pub fn n_v(&self) -> usize {
        self.nodes().count()
    }

    pub fn n_a(&self) -> usize {
        self.arcs().count()
    }

    pub fn n_c(&self) -> usize {
        self.compartments.len()
    }

    /// Splits the network into node (R) and arc (T) compartment ids.
    pub fn partition(&self) -> (BTreeSet<CompartmentId>, BTreeSet<CompartmentId>) {
        let nodes = self.nodes().map(|c| c.id).collect();
        let arcs = self.arcs().map(|c| c.id).collect();
        (nodes, arcs)
    }

    pub fn role_of(&self, id: CompartmentId) -> Option<CompartmentRole> {
        self.get(id).map(|c| c.role)
    }

    /// Consumes the network, returning its compartments for rewiring.
    pub fn into_compartments(self) -> Vec<Compartment> {
        self.compartments.into_values().collect()
    }

    /// Projects the network onto its weighted mass-flow digraph.
    ///
    /// `stocks` weights nodes (kg); `flows` weights arcs, read as a batch mass
    /// (kg) on batch arcs and a flow rate (kg/s) on continuous arcs. Missing
    /// entries default to zero.
    pub fn mass_flow_digraph(
        &self,
        stocks: &BTreeMap<CompartmentId, f64>,
        flows: &BTreeMap<CompartmentId, f64>,
    ) -> Result<MassFlowDigraph, NetworkError> {
        for (&id, &value) in stocks {
            match self.get(id) {
                Some(c) if !c.role.is_transport() => {}
                _ => return Err(NetworkError::UnknownCompartment(id)),
            }
            check_weight(id, value)?;
        }
        for (&id, &value) in flows {
            match self.get(id) {
                Some(c) if c.role.is_transport() => {}
                _ => return Err(NetworkError::UnknownCompartment(id)),
            }
            check_weight(id, value)?;
        }

        let node_weights = self
            .nodes()
            .map(|n| (n.id, stocks.get(&n.id).copied().unwrap_or(0.0)))
            .collect();
        let arcs = self
            .arcs()
            .map(|a| {
                let w = flows.get(&a.id).copied().unwrap_or(0.0);
                let weight = match a.role {
                    CompartmentRole::TransportContinuous => ArcWeight::FlowRate(w),
                    _ => ArcWeight::BatchMass(w),
                };
                (
                    a.id,
                    WeightedArc {
                        from: a.origin,
                        to: a.destination,
                        weight,
                    },
                )
            })
            .collect();
        Ok(MassFlowDigraph { node_weights, arcs })
    }
}

fn check_weight(id: CompartmentId, value: f64) -> Result<(), NetworkError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(NetworkError::NegativeWeight { id, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcWeight {
    /// Mass moved per batch, kg.
    BatchMass(f64),
    /// Continuous mass flow rate, kg/s.
    FlowRate(f64),
}

impl ArcWeight {
    pub fn value(self) -> f64 {
        match self {
            ArcWeight::BatchMass(v) | ArcWeight::FlowRate(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedArc {
    pub from: CompartmentId,
    pub to: CompartmentId,
    pub weight: ArcWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassFlowDigraph {
    pub node_weights: BTreeMap<CompartmentId, f64>,
    pub arcs: BTreeMap<CompartmentId, WeightedArc>,
}

impl MassFlowDigraph {
    /// Outgoing arcs of `node`, in ascending arc-id order.
    pub fn successors(
        &self,
        node: CompartmentId,
    ) -> impl Iterator<Item = (CompartmentId, &WeightedArc)> {
        self.arcs
            .iter()
            .filter(move |(_, a)| a.from == node)
            .map(|(id, a)| (*id, a))
    }
}
