//! Thermodynamical material networks: simulate how a batch of material
//! travels through a network of compartments, measure the circularity of
//! the network, and pick the most circular variant from a scenario set.

pub mod circularity;
pub mod cli;
pub mod mechanics;
pub mod network;
pub mod optimize;
pub mod scenario_file;
pub mod simulate;

pub use circularity::{
    circularity, life_extension, unsustainable_batch_mass, unsustainable_continuous_flow,
    CircularityError, CircularityReport, Horizon,
};
pub use mechanics::{
    analytic_segment_solution, energy_breakdown, frame_kinematics, integrate_segment,
    lagrange_accel, ForceModel, IntegratorConfig, MechanicsError, SegmentState, Trajectory,
};
pub use network::{
    build_network, ArcDynamics, ArcGeometry, Compartment, CompartmentId, CompartmentRole,
    FrameAxis, MassFlowDigraph, NetworkError, TMNetwork,
};
pub use optimize::{
    apply_strategy, argmax_circularity, enumerate_scenarios, OptimizeError, RankedScenario,
    RepairInsertion, Scenario, SimSettings, Strategy,
};
pub use scenario_file::{parse_scenario_file, ScenarioFile, ScenarioFileError};
pub use simulate::{
    milestone_times, run_journey, JourneyEvent, JourneyEventKind, JourneyLog, MaterialElement,
    Route, SimulateError,
};
