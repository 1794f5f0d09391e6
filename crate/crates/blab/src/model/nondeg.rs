//! Evaluation of the four geometric non-degeneracy conditions.
//!
//! Degenerate inputs produce a failing report, never an error. The fourth
//! condition comes in two variants: the central-invariant check `|alpha| != 1`
//! for real central multipliers (labelled C4.1), and the phase condition
//! `tan eta1 != tan eta2` (plus its `u`-side analogue in the double-focus
//! case) when a central multiplier is complex (labelled C4.2).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CycleParams, Model, MultiplierCase};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    /// C1: simplicity of the fragile heteroclinic (central F12 coefficient
    /// non-zero, solved block of `a_ij` invertible).
    pub c1: bool,
    /// C2: simplicity of the robust heteroclinic (central F21 coefficient
    /// non-zero, solved block of `b_ij` invertible).
    pub c2: bool,
    /// C3: the robust heteroclinic avoids the strong invariant manifolds
    /// (`x+ != 0` and `u- != 0`).
    pub c3: bool,
    /// C4, in the variant named by `c4_variant`.
    pub c4: bool,
    /// "C4.1" for the saddle case, "C4.2" for the focus cases.
    pub c4_variant: String,
    pub all_pass: bool,
    pub witnesses: NondegeneracyWitnesses,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyWitnesses {
    pub a: f64,
    pub b: f64,
    /// Determinant of the solved block of `a_ij` (C1).
    pub det_a_solved: f64,
    /// Determinant of the solved block of `b_ij` (C2).
    pub det_b_solved: f64,
    pub x_plus_norm: f64,
    pub u_minus_norm: f64,
    /// Central invariant `alpha = b * u- / x+` (real central multipliers only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tan_eta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tan_eta2: Option<f64>,
    /// `b11 x2+ - b21 x1+`; C4.2 requires this to be non-zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4_parallel_det_x: Option<f64>,
    /// `u2- - b41 u1-`; the u-side C4.2 witness in the double-focus case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4_parallel_det_u: Option<f64>,
}

/// Evaluate conditions C1-C4 and return the per-condition verdicts together
/// with the witnessing quantities.
pub fn validate_nondegeneracy(params: &CycleParams) -> Result<NondegeneracyReport> {
    let model = Model::new(params)?;
    Ok(nondegeneracy_of_model(&model))
}

pub(crate) fn nondegeneracy_of_model(model: &Model) -> NondegeneracyReport {
    let p = &model.params;
    let a = p.a;
    let b = p.b;
    let det_a_solved = model.a_y_s.clone().determinant();
    let det_b_solved = model.b_s_y.clone().determinant();
    let central_a_ok = match p.case {
        MultiplierCase::Saddle => a != 0.0,
        _ => {
            let a11 = model.a_u[(0, 0)];
            let a12 = model.a_u[(0, 1)];
            a11 * a11 + a12 * a12 != 0.0
        }
    };
    let c1 = central_a_ok && det_a_solved != 0.0 && det_a_solved.is_finite();
    let c2 = b != 0.0 && det_b_solved != 0.0 && det_b_solved.is_finite();
    let x_plus_norm = model.x_plus.norm();
    let u_minus_norm = model.u_minus.norm();
    let c3 = x_plus_norm != 0.0 && u_minus_norm != 0.0;

    let mut alpha = None;
    let mut tan_eta1 = None;
    let mut tan_eta2 = None;
    let mut c4_parallel_det_x = None;
    let mut c4_parallel_det_u = None;
    let (c4, c4_variant) = match p.case {
        MultiplierCase::Saddle => {
            let al = b * model.u_minus[0] / model.x_plus[0];
            alpha = Some(al);
            ((al.abs() - 1.0) != 0.0 && al.is_finite(), "C4.1")
        }
        MultiplierCase::SaddleFocus | MultiplierCase::DoubleFocus => {
            let a11 = model.a_u[(0, 0)];
            let a12 = model.a_u[(0, 1)];
            let b11 = model.b_x[(0, 0)];
            let b21 = model.b_x[(1, 0)];
            let x1 = model.x_plus[0];
            let x2 = model.x_plus[1];
            tan_eta1 = Some((a11 * b11 + a12 * b21) / (a11 * b21 - a12 * b11));
            tan_eta2 = Some((a11 * x1 + a12 * x2) / (a11 * x2 - a12 * x1));
            let det_x = b11 * x2 - b21 * x1;
            c4_parallel_det_x = Some(det_x);
            let mut ok = det_x != 0.0;
            if p.case == MultiplierCase::DoubleFocus {
                // u-side: tangent of the robust heteroclinic in the u-plane
                // must not be parallel to u-.
                let b41 = model.b_s[(0, 0)];
                let det_u = model.u_minus[1] - b41 * model.u_minus[0];
                c4_parallel_det_u = Some(det_u);
                ok = ok && det_u != 0.0;
            }
            (ok, "C4.2")
        }
    };
    let all_pass = c1 && c2 && c3 && c4;
    NondegeneracyReport {
        c1,
        c2,
        c3,
        c4,
        c4_variant: c4_variant.to_string(),
        all_pass,
        witnesses: NondegeneracyWitnesses {
            a,
            b,
            det_a_solved,
            det_b_solved,
            x_plus_norm,
            u_minus_norm,
            alpha,
            tan_eta1,
            tan_eta2,
            c4_parallel_det_x,
            c4_parallel_det_u,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref_df, ref_sf};

    #[test]
    fn ref1_passes_all() {
        let r = validate_nondegeneracy(&ref1()).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.c4_variant, "C4.1");
        assert_eq!(r.witnesses.alpha, Some(0.5));
    }

    #[test]
    fn c3_fails_when_x_plus_vanishes() {
        let mut p = ref1();
        p.x_plus = vec![0.0];
        let r = validate_nondegeneracy(&p).unwrap();
        assert!(!r.c3);
        assert!(!r.all_pass);
    }

    #[test]
    fn c4_2_fails_for_parallel_vectors() {
        // b11/b21 = x1+/x2+ makes the robust-heteroclinic tangent parallel to x+.
        let mut p = ref_sf();
        p.b_ij[0][0] = 1.0;
        p.b_ij[1][0] = 0.2; // b21/b11 = x2+/x1+ = 0.2
        let r = validate_nondegeneracy(&p).unwrap();
        assert_eq!(r.c4_variant, "C4.2");
        assert!(!r.c4);
    }

    #[test]
    fn df_passes() {
        let r = validate_nondegeneracy(&ref_df()).unwrap();
        assert!(r.all_pass, "{r:?}");
    }

    #[test]
    fn alpha_equal_one_fails_c4_1() {
        let mut p = ref1();
        p.u_minus = vec![1.0];
        let r = validate_nondegeneracy(&p).unwrap();
        assert!(!r.c4);
    }
}
