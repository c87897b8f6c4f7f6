//! Test-side oracles and random scenario generators shared by the
//! integration suites. The oracles are written from the equations of motion
//! directly and never call into the integrator under test.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use tmn_core::circularity::Horizon;
use tmn_core::mechanics::TrajectorySample;
use tmn_core::optimize;
use tmn_core::{
    build_network, energy_breakdown, integrate_segment, ArcDynamics, ArcGeometry, Compartment,
    CompartmentId, CompartmentRole, ForceModel, FrameAxis, IntegratorConfig, MaterialElement,
    RepairInsertion, Route, Scenario, ScenarioFile, SegmentState, SimSettings,
};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

pub fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const BUNDLED: [&str; 4] = [
    "example1.scn",
    "example2_renewable.scn",
    "example2_material.scn",
    "example3.scn",
];

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Along-path gravity component for a geometry, m/s².
fn gravity_along(g: f64, geom: &ArcGeometry) -> f64 {
    match geom.axis {
        FrameAxis::XzIncline => g * geom.incline.sin(),
        FrameAxis::XAxis | FrameAxis::YAxis => 0.0,
    }
}

/// Time to cover `l` from rest under constant acceleration `a`.
pub fn time_from_rest(l: f64, a: f64) -> f64 {
    (2.0 * l / a).sqrt()
}

/// Exit time from rest for `m s'' = D - c1 s'`, `D > 0`, solved by Newton on
/// `s(t) = v_inf (t - tau (1 - e^{-t/tau}))`.
pub fn linear_drag_exit_time(mass: f64, driving: f64, c1: f64, l: f64) -> f64 {
    let tau = mass / c1;
    let v_inf = driving / c1;
    let s = |t: f64| v_inf * (t - tau * (-(-t / tau).exp_m1()));
    let v = |t: f64| v_inf * (-(-t / tau).exp_m1());
    // Start past the point where the terminal-velocity line gives l.
    let mut t = l / v_inf + tau;
    for _ in 0..100 {
        let step = (s(t) - l) / v(t);
        t -= step;
        if step.abs() <= 1e-15 * t {
            break;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Fine-step reference integrator
// ---------------------------------------------------------------------------

/// Forward motion `v >= 0` with `a(v) = (D - c0 - c1 v) / M`, the regime of
/// every segment that starts from rest with driving force above `c0`.
pub struct ForwardMotion {
    pub mass: f64,
    pub driving: f64,
    pub c0: f64,
    pub c1: f64,
}

impl ForwardMotion {
    pub fn new(total_mass: f64, geom: &ArcGeometry, f: &ForceModel) -> Self {
        ForwardMotion {
            mass: total_mass,
            driving: f.propulsion + total_mass * gravity_along(f.gravity, geom),
            c0: f.resist_const,
            c1: f.resist_linear,
        }
    }

    fn accel(&self, v: f64) -> f64 {
        (self.driving - self.c0 - self.c1 * v) / self.mass
    }

    fn step(&self, v: f64, h: f64) -> (f64, f64) {
        let (k1s, k1v) = (v, self.accel(v));
        let v2 = v + 0.5 * h * k1v;
        let (k2s, k2v) = (v2, self.accel(v2));
        let v3 = v + 0.5 * h * k2v;
        let (k3s, k3v) = (v3, self.accel(v3));
        let v4 = v + h * k3v;
        let (k4s, k4v) = (v4, self.accel(v4));
        (
            h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
            h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    /// Exit time from rest over length `l` with fixed step `h`. Sums are
    /// compensated, and the crossing inside the last step comes from the
    /// cubic Hermite interpolant of `s`, whose error is `O(h^4)`.
    pub fn exit_time(&self, l: f64, h: f64) -> f64 {
        let (mut s, mut s_c) = (0.0f64, 0.0f64);
        let (mut v, mut v_c) = (0.0f64, 0.0f64);
        let mut n: u64 = 0;
        loop {
            let (ds, dv) = self.step(v, h);
            if s + ds >= l {
                let (s0, v0, s1, v1) = (s, v, s + ds, v + dv);
                let hermite = |u: f64| {
                    let u2 = u * u;
                    let u3 = u2 * u;
                    (2.0 * u3 - 3.0 * u2 + 1.0) * s0
                        + (u3 - 2.0 * u2 + u) * h * v0
                        + (-2.0 * u3 + 3.0 * u2) * s1
                        + (u3 - u2) * h * v1
                };
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if hermite(mid) >= l {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return n as f64 * h + hi * h;
            }
            let y = ds - s_c;
            let t = s + y;
            s_c = (t - s) - y;
            s = t;
            let y = dv - v_c;
            let t = v + y;
            v_c = (t - v) - y;
            v = t;
            n += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Checks against the integrator under test
// ---------------------------------------------------------------------------

pub fn exit_time(mass: f64, geom: &ArcGeometry, forces: &ForceModel, dt: f64) -> f64 {
    integrate_segment(
        &SegmentState::at_rest(0.0),
        mass,
        geom,
        forces,
        &IntegratorConfig::with_dt(dt),
    )
    .unwrap()
    .exit_time
}

/// Relative exit-time errors at dt = 1e-2, 5e-3, 2.5e-3 against the
/// fine-step reference. Linear drag with tau = 0.2 s, exiting mid-transient:
/// once the velocity has settled RK4 is exact, so a longer path would hide
/// the error.
pub fn convergence_errors() -> [f64; 3] {
    let geom = ArcGeometry::level(0.3, FrameAxis::XAxis);
    let forces = ForceModel::new(10.0, 0.0, 5.0);
    let oracle = ForwardMotion::new(1.0, &geom, &forces).exit_time(0.3, 1e-6);
    [1e-2, 5e-3, 2.5e-3].map(|dt| (exit_time(1.0, &geom, &forces, dt) - oracle).abs() / oracle)
}

/// For every simulated arc of a bundled scenario at dt = 1e-3: the path work
/// of gravity and the nonconservative forces (trapezoid over the logged
/// samples) and the kinetic energy gained, as `(arc, work, delta_T)`.
pub fn work_energy(name: &str) -> Vec<(CompartmentId, f64, f64)> {
    let f = load(name);
    let s = &f.scenario;
    let log = s.simulate(&IntegratorConfig::with_dt(1e-3)).unwrap();
    let mut out = Vec::new();
    for (arc, tr) in &log.trajectories {
        let d = s.network.get(*arc).unwrap().dynamics.unwrap();
        let mass = d.carrier_mass + s.element.mass;
        let s0 = tr.samples[0].s;
        let force = |p: &TrajectorySample| {
            let state = SegmentState {
                t: p.t,
                s: p.s - s0,
                s_dot: p.s_dot,
            };
            let e = energy_breakdown(&state, mass, &d.geometry, &d.forces).unwrap();
            mass * gravity_along(d.forces.gravity, &d.geometry) + e.nonconservative
        };
        let work: f64 = tr
            .samples
            .windows(2)
            .map(|w| 0.5 * (force(&w[0]) + force(&w[1])) * (w[1].s - w[0].s))
            .sum();
        let last = tr.samples.last().unwrap();
        assert!((last.s - s0 - d.geometry.length).abs() <= 1e-9 * d.geometry.length);
        out.push((*arc, work, 0.5 * mass * tr.exit_velocity * tr.exit_velocity));
    }
    out
}

// ---------------------------------------------------------------------------
// Random scenario generators
// ---------------------------------------------------------------------------

pub const DISPOSAL: [CompartmentRole; 3] = [
    CompartmentRole::Landfill,
    CompartmentRole::Incinerator,
    CompartmentRole::Environment,
];

#[derive(Debug, Clone)]
pub struct ArcSpec {
    pub length: f64,
    pub axis: FrameAxis,
    pub incline: f64,
    pub carrier: f64,
    pub propulsion: f64,
    pub c0: f64,
    pub c1: f64,
}

fn arc_spec() -> impl Strategy<Value = ArcSpec> {
    (
        5.0..400.0f64,
        prop_oneof![
            Just(FrameAxis::XzIncline),
            Just(FrameAxis::XAxis),
            Just(FrameAxis::YAxis)
        ],
        -0.05..0.05f64,
        100.0..5_000.0f64,
        1.0..4.0f64,
        0.0..0.8f64,
        prop_oneof![Just(0.0), 0.0..20.0f64],
    )
        .prop_map(|(length, axis, incline, carrier, accel, c0_share, c1)| {
            // Propulsion comfortably beats gravity and c0, so every arc gets moving.
            let propulsion = carrier * (accel + 0.5);
            ArcSpec {
                length,
                axis,
                incline: if axis == FrameAxis::XzIncline {
                    incline
                } else {
                    0.0
                },
                carrier,
                propulsion,
                c0: c0_share * carrier * 0.5,
                c1,
            }
        })
}

impl ArcSpec {
    pub fn dynamics(&self) -> ArcDynamics {
        let geometry = match self.axis {
            FrameAxis::XzIncline => ArcGeometry::incline(self.length, self.incline),
            axis => ArcGeometry::level(self.length, axis),
        };
        ArcDynamics {
            geometry,
            carrier_mass: self.carrier,
            forces: ForceModel::new(self.propulsion, self.c0, self.c1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub mass: f64,
    pub renewable: f64,
    pub source: CompartmentRole,
    pub sink: CompartmentRole,
    pub arcs: Vec<ArcSpec>,
    pub dwell: Vec<f64>,
    /// Continuous arcs as (origin index, destination index, rate).
    pub continuous: Vec<(usize, usize, f64)>,
}

pub fn chain_spec() -> impl Strategy<Value = ChainSpec> {
    (
        0.5..50.0f64,
        prop_oneof![Just(0.0), 0.0..1.0f64, Just(1.0)],
        prop_oneof![
            3 => Just(CompartmentRole::NonrenewableReservoir),
            1 => Just(CompartmentRole::RenewableReservoir),
        ],
        prop_oneof![
            Just(CompartmentRole::Landfill),
            Just(CompartmentRole::Incinerator),
            Just(CompartmentRole::Environment),
            Just(CompartmentRole::UseStage),
        ],
        prop::collection::vec(arc_spec(), 1..5),
    )
        .prop_flat_map(|(mass, renewable, source, sink, arcs)| {
            let n_nodes = arcs.len() + 1;
            (
                Just((mass, renewable, source, sink, arcs)),
                prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e4f64], n_nodes),
                prop::collection::vec((0..n_nodes, 0..n_nodes, 0.0..3.0f64), 0..3),
            )
        })
        .prop_map(
            |((mass, renewable, source, sink, arcs), dwell, cont)| ChainSpec {
                mass,
                renewable,
                source,
                sink,
                arcs,
                dwell,
                continuous: cont.into_iter().filter(|(a, b, _)| a != b).collect(),
            },
        )
}

impl ChainSpec {
    pub fn n_nodes(&self) -> usize {
        self.arcs.len() + 1
    }

    /// Node ids are `1..=n`, batch arcs follow, continuous arcs after that.
    pub fn node_id(&self, i: usize) -> u32 {
        i as u32 + 1
    }

    pub fn batch_arc_id(&self, i: usize) -> u32 {
        (self.n_nodes() + i) as u32 + 1
    }

    pub fn node_role(&self, i: usize) -> CompartmentRole {
        if i == 0 {
            self.source
        } else if i + 1 == self.n_nodes() {
            self.sink
        } else if i == 1 {
            CompartmentRole::Manufacturer
        } else {
            CompartmentRole::UseStage
        }
    }

    pub fn compartments(&self) -> Vec<Compartment> {
        let n = self.n_nodes();
        let mut out: Vec<Compartment> = (0..n)
            .map(|i| Compartment::node(self.node_id(i), self.node_role(i)))
            .collect();
        for (i, a) in self.arcs.iter().enumerate() {
            out.push(Compartment::batch_arc(
                self.batch_arc_id(i),
                self.node_id(i),
                self.node_id(i + 1),
                a.dynamics(),
            ));
        }
        let first_cont = (2 * n) as u32;
        for (k, &(a, b, _)) in self.continuous.iter().enumerate() {
            out.push(Compartment::arc(
                first_cont + k as u32,
                self.node_id(a),
                self.node_id(b),
                CompartmentRole::TransportContinuous,
                None,
            ));
        }
        out
    }

    pub fn flows(&self) -> BTreeMap<CompartmentId, f64> {
        let first_cont = (2 * self.n_nodes()) as u32;
        self.continuous
            .iter()
            .enumerate()
            .map(|(k, &(_, _, rate))| (CompartmentId(first_cont + k as u32), rate))
            .collect()
    }

    pub fn route(&self) -> Route {
        let n = self.n_nodes();
        let mut ids = vec![self.node_id(0)];
        for i in 0..self.arcs.len() {
            ids.push(self.batch_arc_id(i));
            ids.push(self.node_id(i + 1));
        }
        let dwell = (0..n).map(|i| (CompartmentId(self.node_id(i)), self.dwell[i]));
        Route::new(ids, dwell)
    }

    pub fn scenario(&self, label: &str) -> Scenario {
        let net = build_network(self.compartments(), "m").expect("generated network is valid");
        let element = MaterialElement::new(self.mass, "m", self.renewable).unwrap();
        let settings = SimSettings {
            dt: 1e-2,
            ..SimSettings::default()
        };
        Scenario::new(label, net, element, self.route(), self.flows(), settings)
            .expect("generated scenario is valid")
    }

    /// Independent count of the unsustainable batch mass over the whole journey.
    pub fn expected_batch_mass(&self) -> f64 {
        let mut total = 0.0;
        if self.source == CompartmentRole::NonrenewableReservoir {
            total += (1.0 - self.renewable) * self.mass;
        }
        if DISPOSAL.contains(&self.sink) {
            total += self.mass;
        }
        total
    }

    pub fn expected_continuous_flow(&self) -> f64 {
        self.continuous
            .iter()
            .filter(|&&(a, b, _)| {
                self.node_role(a) == CompartmentRole::NonrenewableReservoir
                    || DISPOSAL.contains(&self.node_role(b))
            })
            .map(|&(_, _, rate)| rate)
            .sum()
    }
}

/// A strategy menu over a generated chain: renewable and material options in
/// separate slots, plus an optional repair slot.
pub fn menu_for(spec: &ChainSpec) -> impl Strategy<Value = Vec<Vec<optimize::Strategy>>> {
    let base = (2 * spec.n_nodes() + spec.continuous.len()) as u32 + 10;
    (
        prop::collection::vec(0.0..1.0f64, 0..3),
        prop::collection::vec(0.1..1.0f64, 0..3),
        prop::option::of((0.0..1e4f64, prop::option::of(5.0..300.0f64))),
    )
        .prop_map(move |(fractions, factors, repair)| {
            let mut menu = Vec::new();
            if !fractions.is_empty() {
                menu.push(
                    fractions
                        .into_iter()
                        .map(|fraction| optimize::Strategy::ReduceRenewable { fraction })
                        .collect(),
                );
            }
            if !factors.is_empty() {
                menu.push(
                    factors
                        .into_iter()
                        .map(|factor| optimize::Strategy::ReduceMaterial { factor })
                        .collect(),
                );
            }
            if let Some((dwell, length)) = repair {
                menu.push(vec![optimize::Strategy::InsertRepair(RepairInsertion {
                    repair_node: CompartmentId(base),
                    inbound_arc: CompartmentId(base + 1),
                    outbound_arc: CompartmentId(base + 2),
                    second_use_dwell: dwell,
                    inbound_length: length,
                    outbound_length: length,
                })]);
            }
            menu
        })
}

pub fn chain_with_menu() -> impl Strategy<Value = (ChainSpec, Vec<Vec<optimize::Strategy>>)> {
    chain_spec().prop_flat_map(|spec| {
        let menu = menu_for(&spec);
        (Just(spec), menu)
    })
}

/// A random weakly connected graph: a random spanning tree over `n` nodes
/// plus extra (possibly parallel) arcs. Returns compartments and (n_v, n_a).
pub fn random_graph() -> impl Strategy<Value = (Vec<Compartment>, usize, usize)> {
    (1usize..12)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(any::<prop::sample::Index>(), n.saturating_sub(1)),
                prop::collection::vec(
                    (
                        any::<prop::sample::Index>(),
                        any::<prop::sample::Index>(),
                        any::<bool>(),
                    ),
                    0..10,
                ),
            )
        })
        .prop_map(|(n, parents, extra)| {
            let mut comps: Vec<Compartment> = (1..=n as u32)
                .map(|k| Compartment::node(k, CompartmentRole::UseStage))
                .collect();
            let mut next = n as u32 + 1;
            let mut push_arc = |comps: &mut Vec<Compartment>, a: u32, b: u32, batch: bool| {
                let c = if batch {
                    Compartment::batch_arc(
                        next,
                        a,
                        b,
                        ArcDynamics {
                            geometry: ArcGeometry::level(10.0, FrameAxis::XAxis),
                            carrier_mass: 1.0,
                            forces: ForceModel::new(1.0, 0.0, 0.0),
                        },
                    )
                } else {
                    Compartment::arc(next, a, b, CompartmentRole::TransportContinuous, None)
                };
                comps.push(c);
                next += 1;
            };
            for (i, p) in parents.iter().enumerate() {
                let child = i as u32 + 2;
                let parent = p.index(i + 1) as u32 + 1;
                push_arc(&mut comps, parent, child, i % 2 == 0);
            }
            for (a, b, batch) in extra {
                let (a, b) = (a.index(n) as u32 + 1, b.index(n) as u32 + 1);
                if a != b {
                    push_arc(&mut comps, a, b, batch);
                }
            }
            let n_a = comps.len() - n;
            (comps, n, n_a)
        })
}

pub fn horizon_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

// ---------------------------------------------------------------------------
// Property bodies, shared between the proptest suite and the acceptance run
// ---------------------------------------------------------------------------

pub fn check_sign_and_accounting(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let scenario = spec.scenario("p");
    let (_, report) = scenario
        .evaluate_default()
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(report.lambda <= 0.0, "lambda = {}", report.lambda);
    let expected = -(spec.expected_batch_mass() + spec.expected_continuous_flow());
    prop_assert!(
        (report.lambda - expected).abs() <= 1e-12 * (1.0 + expected.abs()),
        "lambda {} vs {}",
        report.lambda,
        expected
    );
    Ok(())
}

pub fn check_monotone_memory(spec: &ChainSpec, (u1, u2): (f64, f64)) -> Result<(), TestCaseError> {
    let scenario = spec.scenario("p");
    let log = scenario
        .simulate(&scenario.settings.integrator())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let end = log.end_time();
    let (phi1, phi2) = ((u1 * 1.1 * end).max(1e-9), (u2 * 1.1 * end).max(1e-9));
    let lam = |phi: f64| {
        tmn_core::circularity(
            &log,
            &scenario.network,
            &scenario.flows,
            Horizon::bounded(phi).unwrap(),
            1.0,
        )
        .unwrap()
        .lambda
    };
    let unbounded = tmn_core::circularity(
        &log,
        &scenario.network,
        &scenario.flows,
        Horizon::Unbounded,
        1.0,
    )
    .unwrap()
    .lambda;
    let (l1, l2) = (lam(phi1), lam(phi2));
    prop_assert!(l1 >= l2, "lambda({phi1}) = {l1} < lambda({phi2}) = {l2}");
    prop_assert!(l2 >= unbounded);
    prop_assert!(l1 <= 0.0 && l2 <= 0.0);
    Ok(())
}

pub fn check_frame_consistency(spec: &ArcSpec, s_ddot: f64) -> Result<(), TestCaseError> {
    let d = spec.dynamics();
    let [ax, ay, az] = tmn_core::frame_kinematics(s_ddot, &d.geometry);
    let lhs = ax * ax + ay * ay + az * az;
    let rhs = s_ddot * s_ddot;
    prop_assert!(
        (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300),
        "{lhs} vs {rhs}"
    );
    Ok(())
}

/// Trajectory positions are consistent with the path coordinate: the
/// distance between consecutive samples equals the advance in `s`.
pub fn check_trajectory_frame(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let scenario = spec.scenario("p");
    let log = scenario
        .simulate(&scenario.settings.integrator())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (arc, tr) in &log.trajectories {
        let d = scenario.network.get(*arc).unwrap().dynamics.unwrap();
        let dir = d.geometry.direction();
        for p in &tr.samples {
            let a = tmn_core::frame_kinematics(p.s_ddot, &d.geometry);
            let norm2: f64 = a.iter().map(|c| c * c).sum();
            prop_assert!(
                (norm2 - p.s_ddot * p.s_ddot).abs() <= 1e-12 * (1.0 + p.s_ddot * p.s_ddot)
            );
        }
        for w in tr.samples.windows(2) {
            let (p, q) = (w[0], w[1]);
            let ds = q.s - p.s;
            let (dx, dy, dz) = (q.x - p.x, q.y - p.y, q.z - p.z);
            let tol = 1e-9 * (1.0 + q.s.abs());
            prop_assert!(((dx * dx + dy * dy + dz * dz).sqrt() - ds.abs()).abs() <= tol);
            prop_assert!((dx - dir[0] * ds).abs() <= tol);
            prop_assert!((dy - dir[1] * ds).abs() <= tol);
            prop_assert!((dz - dir[2] * ds).abs() <= tol);
            prop_assert!(q.t > p.t && q.s >= p.s);
        }
    }
    Ok(())
}

pub fn check_counts(comps: Vec<Compartment>, n_v: usize, n_a: usize) -> Result<(), TestCaseError> {
    let net = build_network(comps, "m").map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(net.n_v(), n_v);
    prop_assert_eq!(net.n_a(), n_a);
    prop_assert_eq!(net.n_c(), net.n_v() + net.n_a());
    let (nodes, arcs) = net.partition();
    prop_assert_eq!(nodes.len() + arcs.len(), net.n_c());
    prop_assert!(nodes.is_disjoint(&arcs));
    Ok(())
}

fn evaluate_all(
    spec: &ChainSpec,
    menu: &[Vec<optimize::Strategy>],
) -> Result<(Vec<Scenario>, Vec<tmn_core::RankedScenario>), TestCaseError> {
    let base = spec.scenario("base");
    let scenarios = tmn_core::enumerate_scenarios(&base, menu)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let ranked = tmn_core::argmax_circularity(
        &scenarios,
        Horizon::Unbounded,
        1.0,
        &base.settings.integrator(),
    )
    .map_err(|e| TestCaseError::fail(e.to_string()))?;
    Ok((scenarios, ranked))
}

pub fn check_argmax_head(
    spec: &ChainSpec,
    menu: &[Vec<optimize::Strategy>],
) -> Result<(), TestCaseError> {
    let (scenarios, ranked) = evaluate_all(spec, menu)?;
    prop_assert_eq!(ranked.len(), scenarios.len());
    let head = ranked[0].report.lambda;
    for s in &scenarios {
        let (_, r) = s
            .evaluate(Horizon::Unbounded, 1.0, &s.settings.integrator())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(head >= r.lambda, "head {head} < {} ({})", r.lambda, s.label);
    }
    for w in ranked.windows(2) {
        prop_assert!(w[0].report.lambda >= w[1].report.lambda);
    }
    Ok(())
}

pub fn check_permutation_invariance(
    spec: &ChainSpec,
    menu: &[Vec<optimize::Strategy>],
    keys: &[u64],
) -> Result<(), TestCaseError> {
    let (scenarios, ranked) = evaluate_all(spec, menu)?;
    let mut order: Vec<usize> = (0..scenarios.len()).collect();
    order.sort_by_key(|&i| (keys[i % keys.len()].wrapping_mul(i as u64 + 1), i));
    let shuffled: Vec<Scenario> = order.iter().map(|&i| scenarios[i].clone()).collect();
    let reranked = tmn_core::argmax_circularity(
        &shuffled,
        Horizon::Unbounded,
        1.0,
        &scenarios[0].settings.integrator(),
    )
    .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let a: Vec<(&str, f64)> = ranked
        .iter()
        .map(|r| (r.scenario.label.as_str(), r.report.lambda))
        .collect();
    let b: Vec<(&str, f64)> = reranked
        .iter()
        .map(|r| (r.scenario.label.as_str(), r.report.lambda))
        .collect();
    prop_assert_eq!(a, b);
    Ok(())
}
