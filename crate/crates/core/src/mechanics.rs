//! Point-mass dynamics along the 1-D path coordinate of an arc compartment.
//!
//! The equation of motion is Lagrange's equation with `T = m ṡ²/2`,
//! `V = m g (h - s sin α)` and a nonconservative term `ξ` made of constant
//! propulsion minus an affine velocity-dependent resistance:
//!
//! ```text
//! m s̈ = m g sin α + F - (c0 + c1 |ṡ|) sign(ṡ)
//! ```
//!
//! On level axes the gravity term vanishes. At rest the resistance acts as
//! static friction: it cancels the driving force up to `c0` and the element
//! stays put if the driving force cannot overcome it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ArcGeometry, FrameAxis};

pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Constant propulsion with affine resistance `ξ_r(v) = c0 + c1 v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceModel {
    /// Propulsion `F` in newtons.
    pub propulsion: f64,
    /// Constant resistance `c0` in newtons.
    pub resist_const: f64,
    /// Linear resistance coefficient `c1` in N·s/m.
    pub resist_linear: f64,
    /// Gravitational acceleration in m/s².
    pub gravity: f64,
}

impl Default for ForceModel {
    fn default() -> Self {
        ForceModel {
            propulsion: 0.0,
            resist_const: 0.0,
            resist_linear: 0.0,
            gravity: STANDARD_GRAVITY,
        }
    }
}

impl ForceModel {
    pub fn new(propulsion: f64, resist_const: f64, resist_linear: f64) -> Self {
        ForceModel {
            propulsion,
            resist_const,
            resist_linear,
            gravity: STANDARD_GRAVITY,
        }
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn validate(&self) -> Result<(), MechanicsError> {
        let fields = [
            ("propulsion", self.propulsion),
            ("resist_const", self.resist_const),
            ("resist_linear", self.resist_linear),
            ("gravity", self.gravity),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MechanicsError::InvalidForce { name, value });
            }
        }
        Ok(())
    }

    /// Magnitude of the resistance at speed `v`.
    pub fn resistance(&self, v: f64) -> f64 {
        self.resist_const + self.resist_linear * v.abs()
    }

    /// Gravity plus propulsion along the path, before resistance.
    fn driving(&self, mass: f64, geometry: &ArcGeometry) -> f64 {
        mass * self.gravity * geometry.gravity_factor() + self.propulsion
    }

    /// Net force along the path at speed `v`, including static friction at rest.
    fn net_force(&self, mass: f64, geometry: &ArcGeometry, v: f64) -> f64 {
        self.net_force_given(self.driving(mass, geometry), v)
    }

    fn net_force_given(&self, driving: f64, v: f64) -> f64 {
        if v > 0.0 {
            driving - self.resistance(v)
        } else if v < 0.0 {
            driving + self.resistance(v)
        } else if driving > self.resist_const {
            driving - self.resist_const
        } else if driving < -self.resist_const {
            driving + self.resist_const
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentState {
    pub t: f64,
    pub s: f64,
    pub s_dot: f64,
}

impl SegmentState {
    pub fn at_rest(t: f64) -> Self {
        SegmentState {
            t,
            s: 0.0,
            s_dot: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub lagrangian: f64,
    /// Sum of nonconservative forces `ξ` along the path, N.
    pub nonconservative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Time at which the boundary `s = l_k` is crossed.
    pub exit_time: f64,
    pub exit_velocity: f64,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.samples.first().map_or(self.exit_time, |p| p.t)
    }

    pub fn duration(&self) -> f64 {
        self.exit_time - self.start_time()
    }

    /// Shifts path coordinate and horizontal world position, e.g. to chain arcs.
    pub fn offset(&mut self, ds: f64, dx: f64, dy: f64) {
        for p in &mut self.samples {
            p.s += ds;
            p.x += dx;
            p.y += dy;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Fixed step, seconds.
    pub dt: f64,
    /// Simulated-time budget per segment before declaring a stall.
    pub max_time: f64,
    /// Upper bound on stored samples; longer runs are thinned by halving.
    pub max_samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            max_time: 1e6,
            max_samples: 1 << 17,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanicsError {
    #[error("total mass must be positive, got {0}")]
    NonpositiveMass(f64),
    #[error("time step must be positive, got {0}")]
    NonpositiveStep(f64),
    #[error("force parameter {name} must be non-negative and finite, got {value}")]
    InvalidForce { name: &'static str, value: f64 },
    #[error("segment stalled at t = {t} s, s = {s} m of {length} m")]
    StalledSegment { t: f64, s: f64, length: f64 },
    #[error("segment end is unreachable under constant net force")]
    UnreachableEnd,
    #[error("closed-form solution requires zero linear resistance")]
    NonConstantForce,
    #[error("initial state invalid: {0}")]
    InvalidInitialState(String),
}

impl MechanicsError {
    pub fn code(&self) -> &'static str {
        match self {
            MechanicsError::NonpositiveMass(_) => "NonpositiveMass",
            MechanicsError::NonpositiveStep(_) => "NonpositiveStep",
            MechanicsError::InvalidForce { .. } => "InvalidForce",
            MechanicsError::StalledSegment { .. } => "StalledSegment",
            MechanicsError::UnreachableEnd => "UnreachableEnd",
            MechanicsError::NonConstantForce => "NonConstantForce",
            MechanicsError::InvalidInitialState(_) => "InvalidInitialState",
        }
    }
}

fn check_mass(mass: f64) -> Result<(), MechanicsError> {
    if mass.is_finite() && mass > 0.0 {
        Ok(())
    } else {
        Err(MechanicsError::NonpositiveMass(mass))
    }
}

/// Path acceleration `s̈` from Lagrange's equation.
pub fn lagrange_accel(
    state: &SegmentState,
    mass: f64,
    geometry: &ArcGeometry,
    forces: &ForceModel,
) -> Result<f64, MechanicsError> {
    check_mass(mass)?;
    Ok(forces.net_force(mass, geometry, state.s_dot) / mass)
}

pub fn energy_breakdown(
    state: &SegmentState,
    mass: f64,
    geometry: &ArcGeometry,
    forces: &ForceModel,
) -> Result<EnergyBreakdown, MechanicsError> {
    check_mass(mass)?;
    let kinetic = 0.5 * mass * state.s_dot * state.s_dot;
    let elevation = match geometry.axis {
        FrameAxis::XzIncline => geometry.elevation - state.s * geometry.incline.sin(),
        FrameAxis::XAxis | FrameAxis::YAxis => geometry.elevation,
    };
    let potential = mass * forces.gravity * elevation;
    let gravity_along = mass * forces.gravity * geometry.gravity_factor();
    Ok(EnergyBreakdown {
        kinetic,
        potential,
        lagrangian: kinetic - potential,
        nonconservative: forces.net_force(mass, geometry, state.s_dot) - gravity_along,
    })
}

/// World-frame acceleration `(ẍ, ÿ, z̈)` for a path acceleration `s̈`.
pub fn frame_kinematics(s_ddot: f64, geometry: &ArcGeometry) -> [f64; 3] {
    geometry.direction().map(|d| d * s_ddot)
}

/// World position of path coordinate `s`, with the path starting at
/// `(0, 0, h)`.
pub fn frame_position(s: f64, geometry: &ArcGeometry) -> [f64; 3] {
    let [dx, dy, dz] = geometry.direction();
    [dx * s, dy * s, geometry.elevation + dz * s]
}

/// Integrates one segment with fixed-step classical RK4 until `s` reaches
/// the path length, then bisects the last step for the crossing instant.
pub fn integrate_segment(
    initial: &SegmentState,
    mass: f64,
    geometry: &ArcGeometry,
    forces: &ForceModel,
    config: &IntegratorConfig,
) -> Result<Trajectory, MechanicsError> {
    check_mass(mass)?;
    let dt = config.dt;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MechanicsError::NonpositiveStep(dt));
    }
    forces.validate()?;
    let length = geometry.length;
    if !(initial.s >= 0.0 && initial.s < length) {
        return Err(MechanicsError::InvalidInitialState(format!(
            "need 0 <= s < {length}, got s = {}",
            initial.s
        )));
    }

    // Hoisted: the gravity term needs a sine and is constant on the segment.
    let driving = forces.driving(mass, geometry);
    // At rest or moving backwards with this, the element can never advance.
    let cannot_start = driving <= forces.resist_const;
    // Off rest the acceleration is affine in v, a = a0 - b v, with a0 taking
    // the sign of the kinetic friction. Keeping the RK4 stages to one
    // multiply-subtract shortens the step's dependency chain.
    let inv_mass = mass.recip();
    let b = forces.resist_linear * inv_mass;
    let a_fwd = (driving - forces.resist_const) * inv_mass;
    let a_bwd = (driving + forces.resist_const) * inv_mass;
    let a_rest = forces.net_force_given(driving, 0.0) * inv_mass;
    let accel = |v: f64| {
        if v > 0.0 {
            a_fwd - b * v
        } else if v < 0.0 {
            a_bwd - b * v
        } else {
            a_rest
        }
    };
    let sample = |t: f64, s: f64, v: f64| {
        let [x, y, z] = frame_position(s, geometry);
        TrajectorySample {
            t,
            s,
            s_dot: v,
            s_ddot: accel(v),
            x,
            y,
            z,
        }
    };
    let stalled = |t: f64, s: f64| MechanicsError::StalledSegment { t, s, length };

    // With a = a0 - b v on every stage, one RK4 step collapses to
    //   dv = h F (1 - x/2 + x²/6 - x³/24),  ds = h v + h² F/2 (1 - x/3 + x²/12)
    // where F = a0 - b v and x = b h. Valid while no stage velocity changes
    // sign, which v > 0, F >= 0 and x <= 1 guarantee.
    let x = b * dt;
    let collapsed = x <= 1.0;
    let pv = dt * (1.0 + x * (-0.5 + x * (1.0 / 6.0 - x / 24.0)));
    let ps = 0.5 * dt * dt * (1.0 + x * (-1.0 / 3.0 + x / 12.0));
    let step = |v: f64| {
        if collapsed && v > 0.0 {
            let f = a_fwd - b * v;
            if f >= 0.0 {
                return (dt * v + ps * f, pv * f);
            }
        }
        rk4_increment(&accel, v, dt)
    };

    let t0 = initial.t;
    let mut s = Compensated::new(initial.s);
    let mut v = Compensated::new(initial.s_dot);
    let mut steps: u64 = 0;
    let mut stride: u64 = 1;
    let mut until_sample = stride;
    let mut samples = vec![sample(t0, initial.s, initial.s_dot)];
    let max_samples = config.max_samples.max(2);

    loop {
        let t = t0 + steps as f64 * dt;
        if v.value() <= 0.0 && cannot_start {
            return Err(stalled(t, s.value()));
        }
        if t - t0 > config.max_time {
            return Err(stalled(t, s.value()));
        }

        let (ds, dv) = step(v.value());
        if s.value() + ds >= length {
            let (tau, s_end, v_end) = locate_crossing(&accel, s.value(), v.value(), dt, length);
            let exit_time = t + tau;
            samples.push(sample(exit_time, s_end, v_end));
            return Ok(Trajectory {
                samples,
                exit_time,
                exit_velocity: v_end,
            });
        }
        s.add(ds);
        v.add(dv);
        steps += 1;

        until_sample -= 1;
        if until_sample == 0 {
            samples.push(sample(t0 + steps as f64 * dt, s.value(), v.value()));
            if samples.len() > max_samples {
                thin(&mut samples);
                stride *= 2;
            }
            until_sample = stride - steps % stride;
        }
    }
}

/// Keeps every other sample; the first sample is always retained.
fn thin(samples: &mut Vec<TrajectorySample>) {
    let mut i = 0;
    samples.retain(|_| {
        let keep = i % 2 == 0;
        i += 1;
        keep
    });
}

/// Classical RK4 increments `(Δs, Δv)` for `s̈ = a(ṡ)` over a step `h`.
fn rk4_increment(accel: &impl Fn(f64) -> f64, v: f64, h: f64) -> (f64, f64) {
    let k1v = accel(v);
    let k1s = v;
    let k2v = accel(v + 0.5 * h * k1v);
    let k2s = v + 0.5 * h * k1v;
    let k3v = accel(v + 0.5 * h * k2v);
    let k3s = v + 0.5 * h * k2v;
    let k4v = accel(v + h * k3v);
    let k4s = v + h * k3v;
    (
        h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Bisects the sub-step `τ ∈ (0, dt]` at which an RK4 step from `(s, v)`
/// lands on `length`.
fn locate_crossing(
    accel: &impl Fn(f64) -> f64,
    s: f64,
    v: f64,
    dt: f64,
    length: f64,
) -> (f64, f64, f64) {
    let (mut lo, mut hi) = (0.0_f64, dt);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ds, _) = rk4_increment(accel, v, mid);
        if s + ds >= length {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (ds, dv) = rk4_increment(accel, v, hi);
    debug_assert!((s + ds - length).abs() <= 1e-9 * length);
    (hi, s + ds, v + dv)
}

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn new(value: f64) -> Self {
        Compensated {
            sum: value,
            carry: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Closed-form exit time and velocity for a segment with constant net force
/// (`c1 = 0`).
pub fn analytic_segment_solution(
    mass: f64,
    geometry: &ArcGeometry,
    forces: &ForceModel,
    initial: &SegmentState,
) -> Result<(f64, f64), MechanicsError> {
    check_mass(mass)?;
    if forces.resist_linear != 0.0 {
        return Err(MechanicsError::NonConstantForce);
    }
    if initial.s_dot < 0.0 {
        return Err(MechanicsError::InvalidInitialState(
            "negative initial velocity".into(),
        ));
    }
    let remaining = geometry.length - initial.s;
    if remaining <= 0.0 {
        return Err(MechanicsError::InvalidInitialState(format!(
            "need s < {}, got s = {}",
            geometry.length, initial.s
        )));
    }
    let v0 = initial.s_dot;
    let a = if v0 > 0.0 {
        (forces.driving(mass, geometry) - forces.resist_const) / mass
    } else {
        forces.net_force(mass, geometry, 0.0) / mass
    };
    let disc = v0 * v0 + 2.0 * a * remaining;
    if disc < 0.0 || (v0 == 0.0 && a <= 0.0) {
        return Err(MechanicsError::UnreachableEnd);
    }
    let v_exit = disc.sqrt();
    let elapsed = 2.0 * remaining / (v0 + v_exit);
    Ok((initial.t + elapsed, v_exit))
}
