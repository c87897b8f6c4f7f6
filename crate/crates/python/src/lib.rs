//! Python bindings: scenarios, strategies, journeys and the segment
//! integrator. Errors surface as `tmn.TmnError` (a `ValueError`) with the
//! machine-readable code in its `code` attribute.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tmn_core::circularity::{self, Horizon};
use tmn_core::mechanics::{self, IntegratorConfig, SegmentState, STANDARD_GRAVITY};
use tmn_core::optimize::{self, RepairInsertion};
use tmn_core::simulate::JourneyLog;
use tmn_core::{ArcGeometry, CompartmentId, ForceModel, FrameAxis, ScenarioFile};

create_exception!(tmn, TmnError, PyValueError);

fn raise(code: &str, message: impl std::fmt::Display) -> PyErr {
    let err = TmnError::new_err(format!("{code}: {message}"));
    Python::attach(|py| {
        let _ = err.value(py).setattr("code", code);
    });
    err
}

macro_rules! coded {
    ($e:expr) => {
        $e.map_err(|e| raise(e.code(), &e))
    };
}

fn horizon(phi: Option<f64>) -> PyResult<Horizon> {
    match phi {
        None => Ok(Horizon::Unbounded),
        Some(phi) => coded!(Horizon::bounded(phi)),
    }
}

/// A strategy that transforms a scenario.
#[pyclass(frozen, skip_from_py_object, module = "tmn")]
#[derive(Clone)]
struct Strategy(optimize::Strategy);

#[pymethods]
impl Strategy {
    /// Source the given fraction of the material from renewables.
    #[staticmethod]
    fn reduce_renewable(fraction: f64) -> PyResult<Self> {
        let s = optimize::Strategy::ReduceRenewable { fraction };
        coded!(s.validate())?;
        Ok(Strategy(s))
    }

    /// Scale the element mass by `factor`.
    #[staticmethod]
    fn reduce_material(factor: f64) -> PyResult<Self> {
        let s = optimize::Strategy::ReduceMaterial { factor };
        coded!(s.validate())?;
        Ok(Strategy(s))
    }

    /// Route the final leg through a new repair node with a second use.
    #[staticmethod]
    #[pyo3(signature = (repair_node, inbound_arc, outbound_arc, second_use_dwell_s, inbound_length_m=None, outbound_length_m=None))]
    fn insert_repair(
        repair_node: u32,
        inbound_arc: u32,
        outbound_arc: u32,
        second_use_dwell_s: f64,
        inbound_length_m: Option<f64>,
        outbound_length_m: Option<f64>,
    ) -> PyResult<Self> {
        let s = optimize::Strategy::InsertRepair(RepairInsertion {
            repair_node: CompartmentId(repair_node),
            inbound_arc: CompartmentId(inbound_arc),
            outbound_arc: CompartmentId(outbound_arc),
            second_use_dwell: second_use_dwell_s,
            inbound_length: inbound_length_m,
            outbound_length: outbound_length_m,
        });
        coded!(s.validate())?;
        Ok(Strategy(s))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn __repr__(&self) -> String {
        format!("Strategy({})", self.0.label())
    }
}

/// The simulated journey of one material element.
#[pyclass(frozen, module = "tmn")]
struct Journey(JourneyLog);

#[pymethods]
impl Journey {
    /// Milestone label (`t0`..`t5`) to time in seconds.
    #[getter]
    fn milestones<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in &self.0.milestone_times {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Events as `(time_s, compartment, kind, mass_kg)` tuples.
    #[getter]
    fn events(&self) -> Vec<(f64, u32, &'static str, f64)> {
        self.0
            .events
            .iter()
            .map(|e| (e.time, e.compartment.0, e.kind.as_str(), e.mass))
            .collect()
    }

    #[getter]
    fn end_time(&self) -> f64 {
        self.0.end_time()
    }

    /// Arc ids with a recorded trajectory.
    #[getter]
    fn arcs(&self) -> Vec<u32> {
        self.0.trajectories.keys().map(|k| k.0).collect()
    }

    /// Trajectory columns `t, s, s_dot, s_ddot, x, y, z` of one arc.
    fn trajectory<'py>(&self, py: Python<'py>, arc: u32) -> PyResult<Bound<'py, PyDict>> {
        let tr = self
            .0
            .trajectories
            .get(&CompartmentId(arc))
            .ok_or_else(|| raise("UnknownCompartment", format!("no trajectory for c{arc}")))?;
        let d = PyDict::new(py);
        let col = |f: fn(&mechanics::TrajectorySample) -> f64| -> Vec<f64> {
            tr.samples.iter().map(f).collect()
        };
        d.set_item("t", col(|p| p.t))?;
        d.set_item("s", col(|p| p.s))?;
        d.set_item("s_dot", col(|p| p.s_dot))?;
        d.set_item("s_ddot", col(|p| p.s_ddot))?;
        d.set_item("x", col(|p| p.x))?;
        d.set_item("y", col(|p| p.y))?;
        d.set_item("z", col(|p| p.z))?;
        Ok(d)
    }

    /// Extra time `other` keeps the material out of disposal: `t5(other) - t5(self)`.
    fn life_extension(&self, other: &Journey) -> PyResult<f64> {
        coded!(circularity::life_extension(&self.0, &other.0))
    }
}

fn report_dict<'py>(
    py: Python<'py>,
    label: &str,
    r: &circularity::CircularityReport,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("label", label)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("horizon", r.horizon.seconds())?;
    d.set_item("delta", r.delta)?;
    d.set_item("batch_mass", r.batch_mass())?;
    d.set_item("continuous_flow", r.continuous_flow)?;
    d.set_item("continuous_contribution", r.continuous_contribution)?;
    let events: Vec<(f64, u32, &str, f64)> = r
        .batch_contributions
        .iter()
        .map(|c| {
            (
                c.event.time,
                c.event.compartment.0,
                c.event.kind.as_str(),
                c.mass,
            )
        })
        .collect();
    d.set_item("contributions", events)?;
    Ok(d)
}

/// A validated scenario: network, element, route, flows and strategy menu.
#[pyclass(frozen, module = "tmn")]
struct Scenario {
    inner: optimize::Scenario,
    menu: Vec<Vec<optimize::Strategy>>,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let f = coded!(ScenarioFile::load(path))?;
        Ok(Scenario {
            inner: f.scenario,
            menu: f.menu,
        })
    }

    #[staticmethod]
    #[pyo3(name = "from_str")]
    fn from_text(text: &str) -> PyResult<Self> {
        let f = coded!(tmn_core::parse_scenario_file(text))?;
        Ok(Scenario {
            inner: f.scenario,
            menu: f.menu,
        })
    }

    fn to_toml(&self) -> String {
        ScenarioFile {
            scenario: self.inner.clone(),
            menu: self.menu.clone(),
        }
        .to_toml()
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn material(&self) -> &str {
        &self.inner.element.material
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.element.mass
    }

    #[getter]
    fn renewable_fraction(&self) -> f64 {
        self.inner.element.renewable_fraction
    }

    #[getter]
    fn route(&self) -> Vec<u32> {
        self.inner.route.ids.iter().map(|c| c.0).collect()
    }

    #[getter]
    fn n_v(&self) -> usize {
        self.inner.network.n_v()
    }

    #[getter]
    fn n_a(&self) -> usize {
        self.inner.network.n_a()
    }

    #[getter]
    fn n_c(&self) -> usize {
        self.inner.network.n_c()
    }

    /// Labels of the strategies applied so far.
    #[getter]
    fn applied(&self) -> Vec<String> {
        self.inner.applied.iter().map(|s| s.label()).collect()
    }

    /// The strategy menu from the scenario file, one list per slot.
    #[getter]
    fn menu(&self) -> Vec<Vec<Strategy>> {
        self.menu
            .iter()
            .map(|slot| slot.iter().copied().map(Strategy).collect())
            .collect()
    }

    fn apply(&self, strategy: &Strategy) -> PyResult<Self> {
        Ok(Scenario {
            inner: coded!(optimize::apply_strategy(&self.inner, &strategy.0))?,
            menu: self.menu.clone(),
        })
    }

    #[pyo3(signature = (dt=None))]
    fn simulate(&self, py: Python<'_>, dt: Option<f64>) -> PyResult<Journey> {
        let mut cfg = self.inner.settings.integrator();
        if let Some(dt) = dt {
            cfg.dt = dt;
        }
        let log = py.detach(|| self.inner.simulate(&cfg));
        Ok(Journey(coded!(log)?))
    }

    /// Circularity report; `phi=None` uses the file's horizon.
    #[pyo3(signature = (phi=None, delta=None))]
    fn circularity<'py>(
        &self,
        py: Python<'py>,
        phi: Option<f64>,
        delta: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let h = match phi {
            None => self.inner.settings.horizon,
            Some(_) => horizon(phi)?,
        };
        let delta = delta.unwrap_or(self.inner.settings.delta);
        let cfg = self.inner.settings.integrator();
        let result = py.detach(|| self.inner.evaluate(h, delta, &cfg));
        let (_, report) = coded!(result)?;
        report_dict(py, &self.inner.label, &report)
    }

    /// Every scenario of the menu ranked by circularity, best first.
    #[pyo3(signature = (phi=None))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        phi: Option<f64>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let h = match phi {
            None => self.inner.settings.horizon,
            Some(_) => horizon(phi)?,
        };
        let settings = self.inner.settings;
        let ranked = py.detach(|| {
            let scenarios = optimize::enumerate_scenarios(&self.inner, &self.menu)?;
            optimize::argmax_circularity(&scenarios, h, settings.delta, &settings.integrator())
        });
        coded!(ranked)?
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d = report_dict(py, &r.scenario.label, &r.report)?;
                d.set_item("rank", i + 1)?;
                let applied: Vec<String> = r.scenario.applied.iter().map(|s| s.label()).collect();
                d.set_item("strategies", applied)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, n_c={}, mass={} kg)",
            self.inner.label,
            self.inner.network.n_c(),
            self.inner.element.mass
        )
    }
}

fn segment(
    length: f64,
    incline: f64,
    axis: &str,
    propulsion: f64,
    resist_const: f64,
    resist_linear: f64,
    gravity: f64,
) -> PyResult<(ArcGeometry, ForceModel)> {
    let geometry = match axis {
        "xz_incline" => ArcGeometry::incline(length, incline),
        "x_axis" => ArcGeometry::level(length, FrameAxis::XAxis),
        "y_axis" => ArcGeometry::level(length, FrameAxis::YAxis),
        other => return Err(raise("InvalidArc", format!("unknown axis {other:?}"))),
    };
    geometry
        .validate()
        .map_err(|reason| raise("InvalidArc", reason))?;
    let forces = ForceModel::new(propulsion, resist_const, resist_linear).with_gravity(gravity);
    Ok((geometry, forces))
}

/// Integrates one arc from speed `v0` and returns `(exit_time_s, exit_velocity)`.
#[pyfunction]
#[pyo3(signature = (mass, length, propulsion, resist_const=0.0, resist_linear=0.0, incline=0.0, axis="xz_incline", gravity=STANDARD_GRAVITY, v0=0.0, dt=1e-3))]
#[allow(clippy::too_many_arguments)]
fn integrate_segment(
    py: Python<'_>,
    mass: f64,
    length: f64,
    propulsion: f64,
    resist_const: f64,
    resist_linear: f64,
    incline: f64,
    axis: &str,
    gravity: f64,
    v0: f64,
    dt: f64,
) -> PyResult<(f64, f64)> {
    let (geometry, forces) = segment(
        length,
        incline,
        axis,
        propulsion,
        resist_const,
        resist_linear,
        gravity,
    )?;
    let initial = SegmentState {
        t: 0.0,
        s: 0.0,
        s_dot: v0,
    };
    let cfg = IntegratorConfig::with_dt(dt);
    let tr = py.detach(|| mechanics::integrate_segment(&initial, mass, &geometry, &forces, &cfg));
    let tr = coded!(tr)?;
    Ok((tr.exit_time, tr.exit_velocity))
}

/// Closed-form `(exit_time_s, exit_velocity)` for constant net force.
#[pyfunction]
#[pyo3(signature = (mass, length, propulsion, resist_const=0.0, incline=0.0, axis="xz_incline", gravity=STANDARD_GRAVITY, v0=0.0))]
#[allow(clippy::too_many_arguments)]
fn analytic_segment(
    mass: f64,
    length: f64,
    propulsion: f64,
    resist_const: f64,
    incline: f64,
    axis: &str,
    gravity: f64,
    v0: f64,
) -> PyResult<(f64, f64)> {
    let (geometry, forces) = segment(
        length,
        incline,
        axis,
        propulsion,
        resist_const,
        0.0,
        gravity,
    )?;
    let initial = SegmentState {
        t: 0.0,
        s: 0.0,
        s_dot: v0,
    };
    coded!(mechanics::analytic_segment_solution(
        mass, &geometry, &forces, &initial
    ))
}

#[pymodule]
fn tmn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TmnError", m.py().get_type::<TmnError>())?;
    m.add("STANDARD_GRAVITY", STANDARD_GRAVITY)?;
    m.add_class::<Scenario>()?;
    m.add_class::<Strategy>()?;
    m.add_class::<Journey>()?;
    m.add_function(wrap_pyfunction!(integrate_segment, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_segment, m)?)?;
    Ok(())
}
