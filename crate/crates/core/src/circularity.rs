//! Circularity `λ = -(m_ub + ṁ_uc Δ)` and its horizon-limited form `λ_φ`.
//!
//! Batch contributions come from the classification events of a journey
//! log (mass leaving a nonrenewable reservoir, mass entering a landfill,
//! incinerator or the environment); only events at or before the horizon
//! count. Continuous contributions come from the configured flow rate of
//! each continuous-transport arc touching one of those compartments.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::network::{CompartmentId, CompartmentRole, TMNetwork};
use crate::simulate::{milestone, JourneyEvent, JourneyLog};

pub const DEFAULT_DELTA: f64 = 1.0;

/// Memory window `φ` over which unsustainable events are counted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Horizon {
    Bounded(f64),
    #[default]
    Unbounded,
}

impl Horizon {
    pub fn bounded(phi: f64) -> Result<Self, CircularityError> {
        if phi.is_finite() && phi > 0.0 {
            Ok(Horizon::Bounded(phi))
        } else {
            Err(CircularityError::InvalidHorizon(phi))
        }
    }

    /// Closed boundary: an event exactly at `φ` is inside.
    pub fn includes(self, time: f64) -> bool {
        match self {
            Horizon::Bounded(phi) => time <= phi,
            Horizon::Unbounded => true,
        }
    }

    pub fn seconds(self) -> Option<f64> {
        match self {
            Horizon::Bounded(phi) => Some(phi),
            Horizon::Unbounded => None,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Bounded(phi) => write!(f, "{phi:e} s"),
            Horizon::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Horizon::Bounded(phi) => serializer.serialize_f64(*phi),
            Horizon::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircularityError {
    #[error("delta must be positive, got {0}")]
    NonpositiveDelta(f64),
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("flow on {id} must be non-negative and finite, got {value}")]
    NegativeWeight { id: CompartmentId, value: f64 },
    #[error("{0} is not a continuous-transport arc of the network")]
    UnknownCompartment(CompartmentId),
    #[error("journey has no milestone {0}")]
    MissingMilestone(String),
}

impl CircularityError {
    pub fn code(&self) -> &'static str {
        match self {
            CircularityError::NonpositiveDelta(_) => "NonpositiveDelta",
            CircularityError::InvalidHorizon(_) => "InvalidHorizon",
            CircularityError::NegativeWeight { .. } => "NegativeWeight",
            CircularityError::UnknownCompartment(_) => "UnknownCompartment",
            CircularityError::MissingMilestone(_) => "MissingMilestone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchContribution {
    pub event: JourneyEvent,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircularityReport {
    /// `λ_φ` in kilograms; never positive.
    pub lambda: f64,
    pub horizon: Horizon,
    pub batch_contributions: Vec<BatchContribution>,
    /// Unsustainable continuous flow `ṁ_uc`, kg/s.
    pub continuous_flow: f64,
    /// `ṁ_uc Δ`, kg.
    pub continuous_contribution: f64,
    pub delta: f64,
}

impl CircularityReport {
    pub fn batch_mass(&self) -> f64 {
        self.batch_contributions.iter().map(|c| c.mass).sum()
    }
}

/// Classification events of `log` that fall inside `horizon`.
pub fn batch_contributions(log: &JourneyLog, horizon: Horizon) -> Vec<BatchContribution> {
    log.events
        .iter()
        .filter(|e| e.kind.is_unsustainable() && horizon.includes(e.time))
        .map(|e| BatchContribution {
            event: *e,
            mass: e.mass,
        })
        .collect()
}

/// Total unsustainable batch mass `m_ub` within the horizon.
pub fn unsustainable_batch_mass(log: &JourneyLog, horizon: Horizon) -> f64 {
    batch_contributions(log, horizon)
        .iter()
        .map(|c| c.mass)
        .sum()
}

/// Total unsustainable continuous flow `ṁ_uc`.
///
/// An arc contributes its rate once if it leaves a nonrenewable reservoir or
/// enters a disposal sink.
pub fn unsustainable_continuous_flow(
    net: &TMNetwork,
    flows: &BTreeMap<CompartmentId, f64>,
) -> Result<f64, CircularityError> {
    let mut total = 0.0;
    for (&id, &rate) in flows {
        let arc = match net.get(id) {
            Some(c) if c.role == CompartmentRole::TransportContinuous => c,
            _ => return Err(CircularityError::UnknownCompartment(id)),
        };
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(CircularityError::NegativeWeight { id, value: rate });
        }
        let leaves_reservoir =
            net.role_of(arc.origin) == Some(CompartmentRole::NonrenewableReservoir);
        let enters_sink = net
            .role_of(arc.destination)
            .is_some_and(CompartmentRole::is_disposal_sink);
        if leaves_reservoir || enters_sink {
            total += rate;
        }
    }
    Ok(total)
}

/// Horizon-limited circularity `λ_φ` of one simulated journey.
pub fn circularity(
    log: &JourneyLog,
    net: &TMNetwork,
    flows: &BTreeMap<CompartmentId, f64>,
    horizon: Horizon,
    delta: f64,
) -> Result<CircularityReport, CircularityError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(CircularityError::NonpositiveDelta(delta));
    }
    let batch = batch_contributions(log, horizon);
    let continuous_flow = unsustainable_continuous_flow(net, flows)?;
    let continuous_contribution = continuous_flow * delta;
    let batch_mass: f64 = batch.iter().map(|c| c.mass).sum();
    Ok(CircularityReport {
        lambda: 0.0 - (batch_mass + continuous_contribution),
        horizon,
        batch_contributions: batch,
        continuous_flow,
        continuous_contribution,
        delta,
    })
}

/// Extra time `t5(b) - t5(a)` that journey `b` keeps the material out of
/// disposal compared with journey `a`.
pub fn life_extension(log_a: &JourneyLog, log_b: &JourneyLog) -> Result<f64, CircularityError> {
    let t5 = |log: &JourneyLog| {
        milestone(log, "t5").map_err(|_| CircularityError::MissingMilestone("t5".into()))
    };
    Ok(t5(log_b)? - t5(log_a)?)
}
