//! One-off generator for the bundled scenario presets.

use blab::model::params::{ref1, ref1_type2, ref2, ref_df, ref_sf};
use blab::report::{to_json_string, Scenario, ScenarioOptions};

fn write(name: &str, scenario: &Scenario) {
    let text = format!("{}\n", to_json_string(scenario).unwrap());
    std::fs::write(format!("presets/{name}.json"), text).unwrap();
    println!("wrote presets/{name}.json");
}

fn main() {
    let mut opts = ScenarioOptions::default();
    opts.trials = 100;
    opts.depth = 30;
    opts.tol = 1e-10;
    opts.mu_range = (-0.04, 0.04);
    opts.resolution = 81;
    write(
        "ref1-type1",
        &Scenario {
            params: ref1(),
            actions: vec!["classify".into(), "covering".into(), "verify-blender".into(), "sweep-mu".into()],
            options: opts.clone(),
        },
    );
    let mut o2 = ScenarioOptions::default();
    o2.k_max = 100_000;
    write(
        "ref1-typeII",
        &Scenario {
            params: ref1_type2(),
            actions: vec!["classify".into(), "search".into()],
            options: o2.clone(),
        },
    );
    write(
        "ref2-rational",
        &Scenario { params: ref2(), actions: vec!["classify".into()], options: ScenarioOptions::default() },
    );
    let mut osf = ScenarioOptions::default();
    osf.k_max = 100_000;
    osf.bound = 10_000;
    write(
        "ref-sf",
        &Scenario {
            params: ref_sf(),
            actions: vec!["classify".into(), "search".into()],
            options: osf.clone(),
        },
    );
    write(
        "ref-df",
        &Scenario {
            params: ref_df(),
            actions: vec!["classify".into(), "search".into()],
            options: osf,
        },
    );
}
