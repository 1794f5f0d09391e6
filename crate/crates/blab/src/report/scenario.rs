//! Scenario orchestration: configuration ingestion, the analysis /
//! certification pipeline, and deterministic report emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    activation_intervals, compute_moduli, focus_sequences, rational_theta_check,
    secondary_cycle_mu, sweep_mu, theta_prime_estimate, CycleType, DEFAULT_KAPPA,
};
use crate::blender::{verify_blender, BlenderCertificate};
use crate::covering::{
    build_covering_set_oriented, build_p_n, search_km, search_simultaneous, verify_covering,
    Orientation, Parity,
};
use crate::error::{BlabError, Result};
use crate::model::{validate_nondegeneracy, CycleParams, MultiplierCase};
use crate::retmap::{coeffs::focus_phases, BoxPoint, Coding, ReturnMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Classify,
    Covering,
    VerifyBlender,
    SweepMu,
    Search,
    ReportAll,
}

impl Action {
    pub fn parse(name: &str) -> Option<Action> {
        match name {
            "classify" => Some(Action::Classify),
            "covering" => Some(Action::Covering),
            "verify-blender" => Some(Action::VerifyBlender),
            "sweep-mu" => Some(Action::SweepMu),
            "search" => Some(Action::Search),
            "report-all" => Some(Action::ReportAll),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioOptions {
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_mu_range")]
    pub mu_range: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_den")]
    pub max_den: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_bound")]
    pub bound: u32,
    #[serde(default = "default_seq_tol")]
    pub seq_tol: f64,
    /// "cs", "cu", or "auto" (pick from the sign of |alpha| - 1).
    #[serde(default = "default_orientation")]
    pub orientation: String,
}

fn default_k_max() -> u64 {
    1_000_000
}
fn default_trials() -> usize {
    100
}
fn default_depth() -> usize {
    30
}
fn default_tol() -> f64 {
    1e-10
}
fn default_mu_range() -> (f64, f64) {
    (-0.04, 0.04)
}
fn default_resolution() -> usize {
    81
}
fn default_max_den() -> u64 {
    1_000_000
}
fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn default_bound() -> u32 {
    10_000
}
fn default_seq_tol() -> f64 {
    1e-2
}
fn default_orientation() -> String {
    "auto".into()
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

/// One run configuration: the cycle parameters, the requested actions, and
/// the per-action options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub params: CycleParams,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub options: ScenarioOptions,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.params.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub seed: u64,
    pub mu: f64,
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_type: Option<CycleType>,
    pub nondegeneracy: crate::model::NondegeneracyReport,
    pub rational: crate::analysis::RareReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<crate::analysis::ActivationIntervals>,
    pub predicted: String,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balanced_pairs: Option<Vec<(u32, u32)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub km_search: Option<crate::covering::SearchOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary_mu: Option<Vec<crate::analysis::SecondaryMu>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_prime: Option<crate::analysis::ThetaPrime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focus: Option<crate::analysis::FocusSequences>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simultaneous: Option<crate::covering::SimultaneousOutcome>,
}

pub struct ScenarioOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub all_certified: bool,
}

fn write_text(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut text = crate::report::to_json_string(value)?;
    text.push('\n');
    write_text(dir, name, &text, files)
}

fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Orbit CSV for a solved coding: columns `s,k,m,X,Y..,Z..`.
pub fn orbit_to_csv(coding: &Coding, points: &[BoxPoint]) -> String {
    let d1 = points.first().map(|p| p.y.len()).unwrap_or(0);
    let dz = points.first().map(|p| p.z.len()).unwrap_or(0);
    let mut out = String::from("s,k,m,X");
    for i in 0..d1 {
        out.push_str(&format!(",Y{}", i + 1));
    }
    for i in 0..dz {
        out.push_str(&format!(",Z{}", i + 1));
    }
    out.push('\n');
    for (s, p) in points.iter().enumerate() {
        let (k, m) = coding.window[s % coding.window.len()];
        out.push_str(&format!("{s},{k},{m},{}", fmt(p.x)));
        for v in p.y.iter() {
            out.push_str(&format!(",{}", fmt(*v)));
        }
        for v in p.z.iter() {
            out.push_str(&format!(",{}", fmt(*v)));
        }
        out.push('\n');
    }
    out
}

fn pick_orientation(params: &CycleParams, requested: &str) -> Result<Orientation> {
    match requested {
        "cs" => Ok(Orientation::Cs),
        "cu" => Ok(Orientation::Cu),
        "auto" => {
            let m = compute_moduli(params)?;
            match m.alpha {
                Some(a) if a.abs() > 1.0 => Ok(Orientation::Cu),
                Some(_) => Ok(Orientation::Cs),
                None => Ok(Orientation::Cs),
            }
        }
        other => Err(BlabError::Precondition(format!(
            "unknown orientation {other:?} (expected cs, cu, or auto)"
        ))),
    }
}

/// Validate every requested action's options against its operation
/// preconditions before any work starts.
fn validate_actions(scenario: &Scenario, actions: &[Action]) -> Result<()> {
    let o = &scenario.options;
    for action in actions {
        match action {
            Action::VerifyBlender => {
                if o.trials == 0 {
                    return Err(BlabError::Precondition("verify-blender needs trials >= 1".into()));
                }
                if !(o.tol > 0.0) {
                    return Err(BlabError::Precondition("verify-blender needs tol > 0".into()));
                }
                pick_orientation(&scenario.params, &o.orientation)?;
            }
            Action::Covering => {
                pick_orientation(&scenario.params, &o.orientation)?;
            }
            Action::SweepMu => {
                if o.resolution < 2 {
                    return Err(BlabError::Precondition("sweep-mu needs resolution >= 2".into()));
                }
                if !(o.mu_range.0 < o.mu_range.1) {
                    return Err(BlabError::Precondition("sweep-mu needs a nonempty mu range".into()));
                }
                if scenario.params.case == MultiplierCase::DoubleFocus {
                    return Err(BlabError::Precondition(
                        "sweep-mu needs a real central multiplier at the crossing point".into(),
                    ));
                }
            }
            Action::Search => {
                if o.k_max == 0 {
                    return Err(BlabError::Precondition("search needs k_max >= 1".into()));
                }
            }
            Action::Classify | Action::ReportAll => {}
        }
    }
    Ok(())
}

/// Execute the requested actions in dependency order and write one report
/// per action plus a combined index. Exit code 0 when every certification
/// passed, 2 on certification failure.
pub fn run_scenario(scenario: &Scenario, actions: &[Action], out_dir: &Path) -> Result<ScenarioOutcome> {
    let mut actions: Vec<Action> = actions.to_vec();
    if actions.contains(&Action::ReportAll) {
        let from_scenario: Vec<Action> = scenario
            .actions
            .iter()
            .filter_map(|s| Action::parse(s))
            .filter(|a| *a != Action::ReportAll)
            .collect();
        if from_scenario.is_empty() {
            return Err(BlabError::Precondition("no actions requested".into()));
        }
        actions = from_scenario;
    }
    if actions.is_empty() {
        return Err(BlabError::Precondition("no actions requested".into()));
    }
    validate_actions(scenario, &actions)?;
    fs::create_dir_all(out_dir)?;
    let params = &scenario.params;
    let o = &scenario.options;
    let mut files = Vec::new();
    let mut all_certified = true;
    // Dependency order: classify, covering, verify-blender; the rest follow.
    let mut ordered = Vec::new();
    for a in [Action::Classify, Action::Covering, Action::VerifyBlender, Action::SweepMu, Action::Search] {
        if actions.contains(&a) {
            ordered.push(a);
        }
    }
    let mut covering = None;
    let mut blender_pass: Option<bool> = None;
    let mut regime: Option<RegimeReport> = None;
    for action in &ordered {
        match action {
            Action::Classify => {
                regime = Some(classify(params, o)?);
            }
            Action::Covering => {
                let orientation = pick_orientation(params, &o.orientation)?;
                let ret = ReturnMap::new(params)?;
                let set = build_covering_set_oriented(&ret, orientation)?;
                let report = verify_covering(&set)?;
                if !(report.covered && report.overlap_ok) {
                    all_certified = false;
                }
                #[derive(Serialize)]
                struct CoveringOut<'a> {
                    seed: u64,
                    set: &'a crate::covering::CoveringSet,
                    verification: &'a crate::covering::CoverReport,
                }
                write_json(
                    out_dir,
                    "covering.json",
                    &CoveringOut { seed: o.seed, set: &set, verification: &report },
                    &mut files,
                )?;
                covering = Some(set);
            }
            Action::VerifyBlender => {
                let orientation = pick_orientation(params, &o.orientation)?;
                let ret = ReturnMap::new(params)?;
                let set = match &covering {
                    Some(s) if s.orientation == orientation => s.clone(),
                    _ => build_covering_set_oriented(&ret, orientation)?,
                };
                let cert = verify_blender(&ret, &set, orientation, o.trials, o.depth, o.tol, o.seed)?;
                if !cert.pass {
                    all_certified = false;
                }
                blender_pass = Some(cert.pass);
                write_json(out_dir, "blender_certificate.json", &cert, &mut files)?;
                write_text(out_dir, "blender_diameters.csv", &diameters_csv(&cert), &mut files)?;
            }
            Action::SweepMu => {
                let rows = sweep_mu(params, o.mu_range.0, o.mu_range.1, o.resolution, o.kappa)?;
                let mut csv = String::from("mu,hit_family,index,rescaled_value,label\n");
                for r in &rows {
                    let fam = match r.hit_family {
                        crate::analysis::HitFamily::U => "u",
                        crate::analysis::HitFamily::S => "s",
                        crate::analysis::HitFamily::None => "none",
                    };
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt(r.mu),
                        fam,
                        r.index,
                        fmt(r.rescaled),
                        r.label
                    ));
                }
                write_text(out_dir, "sweep.csv", &csv, &mut files)?;
            }
            Action::Search => {
                let report = search_report(params, o)?;
                write_json(out_dir, "search.json", &report, &mut files)?;
            }
            Action::ReportAll => unreachable!(),
        }
    }
    // Certified upgrade of the regime label.
    if let Some(mut r) = regime.take() {
        if blender_pass == Some(true) {
            r.certified = true;
            r.predicted = format!("{} (certified)", r.predicted);
        }
        write_json(out_dir, "regime.json", &r, &mut files)?;
    }
    #[derive(Serialize)]
    struct Index<'a> {
        seed: u64,
        actions: Vec<String>,
        files: Vec<String>,
        all_certified: bool,
        params: &'a CycleParams,
    }
    let index = Index {
        seed: o.seed,
        actions: ordered.iter().map(|a| format!("{a:?}")).collect(),
        files: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        all_certified,
        params,
    };
    write_json(out_dir, "index.json", &index, &mut files)?;
    Ok(ScenarioOutcome {
        exit_code: if all_certified { 0 } else { 2 },
        files,
        all_certified,
    })
}

fn diameters_csv(cert: &BlenderCertificate) -> String {
    let mut out = String::from("trial,level,diameter\n");
    for (t, rec) in cert.trials.iter().enumerate() {
        for (level, d) in rec.diameters.iter().enumerate() {
            out.push_str(&format!("{t},{level},{}\n", fmt(*d)));
        }
    }
    out
}

fn classify(params: &CycleParams, o: &ScenarioOptions) -> Result<RegimeReport> {
    let nondeg = validate_nondegeneracy(params)?;
    let rational = rational_theta_check(params, o.max_den)?;
    let (alpha, cycle_type) = if nondeg.all_pass {
        match compute_moduli(params) {
            Ok(m) => (m.alpha, m.cycle_type),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    let activation = if params.case != MultiplierCase::DoubleFocus && nondeg.all_pass {
        Some(activation_intervals(params, (1, 40), (1, 40), o.kappa)?)
    } else {
        None
    };
    let predicted = if !nondeg.all_pass {
        "degenerate".to_string()
    } else if rational.treated_rational {
        "hyperbolic-trivial".to_string()
    } else {
        let hit_u = activation
            .as_ref()
            .map(|a| a.u_family.iter().any(|i| i.contains_mu))
            .unwrap_or(false);
        let hit_s = activation
            .as_ref()
            .map(|a| a.s_family.iter().any(|i| i.contains_mu))
            .unwrap_or(false);
        if hit_u {
            "O1-related".to_string()
        } else if hit_s {
            "O2-related".to_string()
        } else {
            "robust-heterodimensional-candidate".to_string()
        }
    };
    Ok(RegimeReport {
        seed: o.seed,
        mu: params.mu,
        theta: rational.theta,
        alpha,
        cycle_type,
        nondegeneracy: nondeg,
        rational,
        activation,
        predicted,
        certified: false,
    })
}

fn search_report(params: &CycleParams, o: &ScenarioOptions) -> Result<SearchReport> {
    let mut report = SearchReport {
        seed: o.seed,
        balanced_pairs: None,
        km_search: None,
        secondary_mu: None,
        theta_prime: None,
        focus: None,
        simultaneous: None,
    };
    match params.case {
        MultiplierCase::Saddle => {
            let model = crate::model::Model::new(params)?;
            let pairs = build_p_n(&model, 10, o.k_max.min(2000) as u32)?;
            report.balanced_pairs = Some(pairs.iter().map(|p| (p.k, p.m)).collect());
            let theta = crate::analysis::regime::theta(params);
            let target = (params.u_minus[0] / (params.a * params.x_plus[0])).abs().ln()
                / params.gamma.ln();
            let parity = if params.needs_even_pairs() { Parity::Even } else { Parity::Any };
            report.km_search = Some(search_km(
                theta,
                target,
                0.05,
                params.gamma.ln(),
                o.k_max,
                parity,
            ));
            let moduli = compute_moduli(params)?;
            if moduli.cycle_type == Some(CycleType::II) {
                // Secondary cycles live on the flipped balance
                // a b lambda^k gamma^m -> -alpha, not on the type-I band.
                let alpha = moduli.alpha.unwrap();
                let band = 2.0 / 3.0 * (1.0 - alpha.abs()).abs() * params.delta;
                let mut selected = Vec::new();
                let theta = crate::analysis::regime::theta(params);
                for k in 11u32..=o.k_max.min(4000) as u32 {
                    let ideal = k as f64 * theta
                        + (params.u_minus[0] / (params.a * params.x_plus[0])).abs().ln()
                            / params.gamma.ln();
                    let m0 = ideal.round() as i64;
                    for m in (m0 - 1).max(11)..=m0 + 1 {
                        let m = m as u32;
                        let scale =
                            crate::retmap::lambda_k_gamma_m(&model, k, m);
                        let balance = (params.a * params.b * scale * params.x_plus[0]
                            + params.b * params.u_minus[0])
                            .abs();
                        if balance <= band {
                            selected.push((k, m));
                        }
                    }
                    if selected.len() >= 8 {
                        break;
                    }
                }
                if !selected.is_empty() {
                    report.secondary_mu = Some(secondary_cycle_mu(params, &selected)?);
                }
                report.theta_prime = Some(theta_prime_estimate(params, 10)?);
            }
        }
        MultiplierCase::SaddleFocus => {
            report.focus = Some(focus_sequences(params, o.bound, o.seq_tol)?);
            let model = crate::model::Model::new(params)?;
            let (_, eta2) = focus_phases(&model);
            let theta = crate::analysis::regime::theta(params);
            let w = params.omega.unwrap() / (2.0 * std::f64::consts::PI);
            // Targets balancing the central offset: the scale matches the
            // heteroclinic coordinate at the phase where the rotating
            // amplitude peaks.
            let b11 = model.b_x[(0, 0)];
            let amp_b = b11.abs() * model.x_plus.norm()
                * (model.a_u[(0, 0)].powi(2) + model.a_u[(0, 1)].powi(2)).sqrt();
            let t = ((b11 * model.u_minus[0]).abs() / amp_b).ln() / params.gamma.ln();
            let s = (std::f64::consts::FRAC_PI_2 - eta2) / (2.0 * std::f64::consts::PI);
            report.simultaneous = Some(search_simultaneous(
                &[(theta, -t), (w, s.rem_euclid(1.0))],
                0.02,
                o.k_max,
            )?);
        }
        MultiplierCase::DoubleFocus => {
            report.focus = Some(focus_sequences(params, o.bound, o.seq_tol)?);
            let model = crate::model::Model::new(params)?;
            let (_, eta2) = focus_phases(&model);
            let eta3 = crate::retmap::coeffs::df_eta3(&model);
            let theta = crate::analysis::regime::theta(params);
            let w1 = params.omega1.unwrap() / (2.0 * std::f64::consts::PI);
            let w2 = params.omega2.unwrap();
            let a14 = model.a_u[(0, model.d_cs)];
            let amp_d = model.x_plus.norm()
                * (model.a_u[(0, 0)].powi(2) + model.a_u[(0, 1)].powi(2)).sqrt()
                / (1.0 + a14 * a14).sqrt();
            let t = (model.u_minus[0].abs() / ((1.0 + a14 * a14).sqrt() * amp_d)).ln()
                / params.gamma.ln();
            let s = (std::f64::consts::FRAC_PI_2 - eta2) / (2.0 * std::f64::consts::PI);
            let third = (theta * w2 / std::f64::consts::PI, -(t * w2 + eta3) / std::f64::consts::PI);
            report.simultaneous = Some(search_simultaneous(
                &[(theta, -t), (w1, s.rem_euclid(1.0)), third],
                0.05,
                o.k_max,
            )?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref2};
    use crate::retmap::solve_coding;

    #[test]
    fn classify_ref1() {
        let r = classify(&ref1(), &ScenarioOptions::default()).unwrap();
        assert_eq!(r.cycle_type, Some(CycleType::I));
        assert_eq!(r.predicted, "robust-heterodimensional-candidate");
        assert!(!r.rational.treated_rational);
    }

    #[test]
    fn classify_ref2_rational() {
        let r = classify(&ref2(), &ScenarioOptions::default()).unwrap();
        assert!(r.rational.treated_rational);
        assert_eq!(r.predicted, "hyperbolic-trivial");
        assert!(!r.rational.rare1.as_ref().unwrap().pass);
    }

    #[test]
    fn orbit_csv_shape() {
        let ret = ReturnMap::new(&ref1()).unwrap();
        let coding = Coding::periodic(vec![(20, 12), (22, 13)]);
        let pts = solve_coding(&ret, &coding, 1e-12).unwrap();
        let csv = orbit_to_csv(&coding, &pts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,k,m,X,Y1,Z1");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,20,12,"));
        assert!(lines[2].starts_with("1,22,13,"));
    }
}
