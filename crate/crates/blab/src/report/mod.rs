//! Report emission: deterministic JSON/CSV writers and scenario orchestration.

pub mod jsonfmt;
pub mod scenario;

pub use jsonfmt::to_json_string;
pub use scenario::{
    orbit_to_csv, run_scenario, Action, RegimeReport, Scenario, ScenarioOptions, ScenarioOutcome,
    SearchReport,
};
