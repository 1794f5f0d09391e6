//! Homoclinic index sequences for the focus cases: iterates at which the
//! rotating invariant-manifold images cross the activating domain.

use serde::{Deserialize, Serialize};

use crate::covering::contfrac;
use crate::error::{BlabError, Result};
use crate::model::{CycleParams, Model, MultiplierCase};
use crate::retmap::coeffs::{df_eta3, focus_phases};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FocusSequences {
    /// Saddle-focus: iterates `k` with
    /// `|B sin(k w + eta2) / (A sin(k w + eta1))| < q delta / 2`.
    pub k_sequence: Vec<u32>,
    /// Double-focus: iterates `m` with `tan(m w2 + eta3)` at the
    /// heteroclinic direction `-u1-/u2-` (or `cot` at zero when `u2- = 0`).
    pub m_sequence: Vec<u32>,
    /// Set when the search ran through the reciprocal (pole) formulation.
    pub reciprocal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advisory: Option<String>,
}

/// Denominators closer to zero than this are skipped (the construction
/// needs the companion phase bounded away from its own zero).
const DENOM_FLOOR: f64 = 0.05;

pub fn focus_sequences(params: &CycleParams, bound: u32, tol: f64) -> Result<FocusSequences> {
    let model = Model::new(params)?;
    match params.case {
        MultiplierCase::Saddle => Err(BlabError::Precondition(
            "focus sequences are defined for complex central multipliers".into(),
        )),
        MultiplierCase::SaddleFocus => {
            let (eta1, eta2) = focus_phases(&model);
            let a11 = model.a_u[(0, 0)];
            let a12 = model.a_u[(0, 1)];
            let b11 = model.b_x[(0, 0)];
            let b21 = model.b_x[(1, 0)];
            let amp_a = ((a11 * a11 + a12 * a12) * (b11 * b11 + b21 * b21)).sqrt();
            let amp_b = b11.abs() * model.x_plus.norm() * (a11 * a11 + a12 * a12).sqrt();
            let w = params.omega.unwrap();
            let threshold = params.q * params.delta / 2.0;
            let mut k_sequence = Vec::new();
            for k in 1..=bound {
                let kf = k as f64;
                let denom = amp_a * (kf * w + eta1).sin();
                if denom.abs() < DENOM_FLOOR * amp_a {
                    continue;
                }
                let ratio = amp_b * (kf * w + eta2).sin() / denom;
                if ratio.abs() < threshold {
                    k_sequence.push(k);
                }
            }
            let advisory = contfrac::rational_at_precision(
                w / (2.0 * std::f64::consts::PI),
                1_000_000,
                0.0,
            )
            .map(|(p, q)| {
                format!("omega/2pi is rational at working precision ({p}/{q}); the phase orbit has finitely many residues")
            });
            Ok(FocusSequences { k_sequence, m_sequence: vec![], reciprocal: false, advisory })
        }
        MultiplierCase::DoubleFocus => {
            let eta3 = df_eta3(&model);
            let w2 = params.omega2.unwrap();
            let u1 = model.u_minus[0];
            let u2 = model.u_minus[1];
            let reciprocal = u2 == 0.0;
            let mut m_sequence = Vec::new();
            for m in 1..=bound {
                let phase = m as f64 * w2 + eta3;
                if reciprocal {
                    // tan -> infinity: search |cot| < tol with a sine guard.
                    if phase.sin().abs() < DENOM_FLOOR {
                        continue;
                    }
                    if (phase.cos() / phase.sin()).abs() < tol {
                        m_sequence.push(m);
                    }
                } else {
                    if phase.cos().abs() < DENOM_FLOOR {
                        continue;
                    }
                    if (phase.tan() + u1 / u2).abs() < tol {
                        m_sequence.push(m);
                    }
                }
            }
            let advisory = contfrac::rational_at_precision(
                w2 / (2.0 * std::f64::consts::PI),
                1_000_000,
                0.0,
            )
            .map(|(p, q)| {
                format!("omega2/2pi is rational at working precision ({p}/{q}); the phase orbit has finitely many residues")
            });
            Ok(FocusSequences { k_sequence: vec![], m_sequence, reciprocal, advisory })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref_df, ref_sf};

    #[test]
    fn saddle_focus_k_sequence_re_verified() {
        let params = ref_sf();
        let seq = focus_sequences(&params, 10_000, 1e-2).unwrap();
        assert!(!seq.k_sequence.is_empty(), "no activation iterates below 10^4");
        // Re-verify each index by direct sine evaluation.
        let model = Model::new(&params).unwrap();
        let (eta1, eta2) = focus_phases(&model);
        let w = params.omega.unwrap();
        let amp_a = 1.25f64.sqrt();
        let amp_b = 1.04f64.sqrt();
        for &k in &seq.k_sequence {
            let kf = k as f64;
            let ratio = amp_b * (kf * w + eta2).sin() / (amp_a * (kf * w + eta1).sin());
            assert!(ratio.abs() < 0.005, "k = {k}: ratio = {ratio}");
        }
        assert!(seq.advisory.is_none());
    }

    #[test]
    fn double_focus_m_sequence_re_verified() {
        let params = ref_df();
        let seq = focus_sequences(&params, 100_000, 1e-2).unwrap();
        assert!(!seq.m_sequence.is_empty());
        let model = Model::new(&params).unwrap();
        let eta3 = df_eta3(&model);
        for &m in &seq.m_sequence {
            let t = (m as f64 * 1.0 + eta3).tan();
            assert!((t + 0.5 / 0.2).abs() < 1e-2, "m = {m}: tan = {t}");
        }
    }

    #[test]
    fn pole_reformulation_when_u2_vanishes() {
        let mut params = ref_df();
        params.u_minus = vec![0.5, 0.0];
        let seq = focus_sequences(&params, 100_000, 1e-2).unwrap();
        assert!(seq.reciprocal);
        assert!(!seq.m_sequence.is_empty());
    }

    #[test]
    fn rational_rotation_advisory() {
        let mut params = ref_sf();
        params.omega = Some(std::f64::consts::PI / 2.0); // omega/2pi = 1/4
        let seq = focus_sequences(&params, 1000, 1e-3).unwrap();
        assert!(seq.advisory.is_some());
    }
}
