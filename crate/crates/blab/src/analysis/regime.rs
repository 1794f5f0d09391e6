//! Conjugacy moduli and the sign classification of the cycle.

use serde::{Deserialize, Serialize};

use crate::error::{BlabError, Result};
use crate::model::{CycleParams, MultiplierCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleType {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Moduli {
    /// `theta = -ln|lambda| / ln|gamma|`, the central conjugacy modulus.
    pub theta: f64,
    /// Central invariant `alpha = b u- / x+` (real central multipliers only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Sign class of `a x+ u-`; negative central multipliers force type III.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_type: Option<CycleType>,
}

pub fn theta(params: &CycleParams) -> f64 {
    -params.lambda.ln() / params.gamma.ln()
}

/// Exact formula evaluation of `(theta, alpha, type)`.
pub fn compute_moduli(params: &CycleParams) -> Result<Moduli> {
    let th = theta(params);
    match params.case {
        MultiplierCase::Saddle => {
            let x_plus = params.x_plus[0];
            let u_minus = params.u_minus[0];
            if x_plus == 0.0 {
                return Err(BlabError::Precondition(
                    "alpha undefined: x+ vanishes (C3 fails)".into(),
                ));
            }
            let alpha = params.b * u_minus / x_plus;
            let sign = params.a * x_plus * u_minus;
            if sign == 0.0 {
                return Err(BlabError::Precondition(
                    "cycle type undefined: a x+ u- vanishes".into(),
                ));
            }
            let cycle_type = if params.lambda_negative || params.gamma_negative {
                CycleType::III
            } else if sign > 0.0 {
                CycleType::I
            } else {
                CycleType::II
            };
            Ok(Moduli { theta: th, alpha: Some(alpha), cycle_type: Some(cycle_type) })
        }
        _ => Ok(Moduli { theta: th, alpha: None, cycle_type: None }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref1_type2, ref_sf};
    use approx::assert_relative_eq;

    #[test]
    fn ref1_moduli() {
        let m = compute_moduli(&ref1()).unwrap();
        assert_relative_eq!(m.theta, 2.0f64.ln() / 3.0f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(m.theta, 0.6309298, epsilon = 1e-7);
        assert_eq!(m.alpha, Some(0.5));
        assert_eq!(m.cycle_type, Some(CycleType::I));
    }

    #[test]
    fn sign_flip_gives_type_ii_and_iii() {
        let m = compute_moduli(&ref1_type2()).unwrap();
        assert_eq!(m.cycle_type, Some(CycleType::II));
        let mut p = ref1();
        p.lambda_negative = true;
        let m = compute_moduli(&p).unwrap();
        assert_eq!(m.cycle_type, Some(CycleType::III));
    }

    #[test]
    fn focus_cases_have_no_saddle_invariants() {
        let m = compute_moduli(&ref_sf()).unwrap();
        assert!(m.alpha.is_none());
        assert!(m.cycle_type.is_none());
    }

    #[test]
    fn alpha_bit_identical_under_dyadic_rescaling() {
        // Scaling u by c_u and x by c_x maps b -> b c_x/c_u, x+ -> c_x x+,
        // u- -> c_u u-; for powers of two the f64 arithmetic is exact.
        let base = ref1();
        let alpha0 = compute_moduli(&base).unwrap().alpha.unwrap();
        for (c_x, c_u) in [(2.0, 0.25), (0.5, 8.0), (4.0, 4.0)] {
            let mut p = base.clone();
            p.b *= c_x / c_u;
            p.b_ij[0][0] = p.b;
            p.x_plus[0] *= c_x;
            p.u_minus[0] *= c_u;
            let alpha = compute_moduli(&p).unwrap().alpha.unwrap();
            assert_eq!(alpha.to_bits(), alpha0.to_bits());
        }
        // Generic scalings agree to rounding.
        let mut p = base.clone();
        let (c_x, c_u) = (1.7, 0.3);
        p.b *= c_x / c_u;
        p.b_ij[0][0] = p.b;
        p.x_plus[0] *= c_x;
        p.u_minus[0] *= c_u;
        let alpha = compute_moduli(&p).unwrap().alpha.unwrap();
        assert_relative_eq!(alpha, alpha0, max_relative = 1e-14);
    }

    #[test]
    fn type_invariance_under_heteroclinic_point_shifts() {
        // Replacing (M1+, M2-) by their local-map images multiplies x+ by
        // lambda and u- by gamma (signed); the type is stable for positive
        // central multipliers and flips I <-> II per step otherwise.
        let base = ref1();
        let t0 = compute_moduli(&base).unwrap().cycle_type.unwrap();
        let mut p = base.clone();
        p.x_plus[0] *= p.lambda_signed();
        p.u_minus[0] *= p.gamma_signed();
        assert_eq!(compute_moduli(&p).unwrap().cycle_type.unwrap(), t0);

        let mut neg = base.clone();
        neg.lambda_negative = true;
        let t_neg = compute_moduli(&neg).unwrap().cycle_type.unwrap();
        assert_eq!(t_neg, CycleType::III);
        // The sign of a x+ u- itself flips under one step.
        let s0 = neg.a * neg.x_plus[0] * neg.u_minus[0];
        let mut shifted = neg.clone();
        shifted.x_plus[0] *= shifted.lambda_signed();
        let s1 = shifted.a * shifted.x_plus[0] * shifted.u_minus[0];
        assert!(s0 * s1 < 0.0);
    }
}
