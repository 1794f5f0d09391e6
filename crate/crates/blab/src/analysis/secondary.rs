//! Secondary-cycle parameter estimates for type-II cycles: the leading-order
//! splitting values at which a new fragile heteroclinic appears, and the
//! conjugacy modulus of the induced cycle pair.

use serde::{Deserialize, Serialize};

use crate::error::{BlabError, Result};
use crate::model::CycleParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondaryMu {
    pub k: u32,
    pub m: u32,
    /// `-a x+ lambda^k`, the k-side leading expression.
    pub mu_from_k: f64,
    /// `u- gamma^-m`, the m-side leading expression.
    pub mu_from_m: f64,
    /// `|mu_from_k - mu_from_m|`; vanishes as the pair balance sharpens.
    pub discrepancy_abs: f64,
    pub discrepancy_rel: f64,
}

/// Leading-order secondary-cycle parameter values for balanced pairs of a
/// type-II cycle. Pairs must satisfy the balance
/// `a b lambda^k gamma^m -> -alpha` (checked against the hyperbolicity band).
pub fn secondary_cycle_mu(params: &CycleParams, pairs: &[(u32, u32)]) -> Result<Vec<SecondaryMu>> {
    let moduli = super::regime::compute_moduli(params)?;
    let Some(super::regime::CycleType::II) = moduli.cycle_type else {
        return Err(BlabError::Precondition(
            "secondary-cycle estimates require a type-II cycle (a x+ u- < 0)".into(),
        ));
    };
    let alpha = moduli.alpha.unwrap();
    let a = params.a;
    let b = params.b;
    let x_plus = params.x_plus[0];
    let u_minus = params.u_minus[0];
    let lam = params.lambda_signed();
    let gam = params.gamma_signed();
    let band = 2.0 / 3.0 * (1.0 - alpha.abs()).abs() * params.delta;
    let mut out = Vec::with_capacity(pairs.len());
    for &(k, m) in pairs {
        let scale = crate::retmap::lambda_k_gamma_m(
            &crate::model::Model::new(params)?,
            k,
            m,
        );
        let balance = (a * b * scale * x_plus + b * u_minus).abs();
        if balance > band {
            return Err(BlabError::Precondition(format!(
                "pair ({k},{m}) violates the balance: |a b l^k g^m x+ + b u-| = {balance:.3e} > {band:.3e}"
            )));
        }
        let mu_from_k = -a * x_plus * lam.powi(k as i32);
        let mu_from_m = u_minus * gam.powi(-(m as i32));
        let d = (mu_from_k - mu_from_m).abs();
        out.push(SecondaryMu {
            k,
            m,
            mu_from_k,
            mu_from_m,
            discrepancy_abs: d,
            discrepancy_rel: d / mu_from_k.abs().max(mu_from_m.abs()),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaPrime {
    pub m_star: u32,
    /// Leading term `theta / m*`.
    pub leading: f64,
    /// Leading central multiplier of the induced periodic point:
    /// `gamma' = -(b u- / x+) gamma^{m*}`.
    pub gamma_prime: f64,
    /// `-ln|lambda| / ln|gamma'|` with the leading `gamma'`.
    pub direct: f64,
}

/// Modulus estimate for the cycle pair induced at `m* = m - m_j`.
pub fn theta_prime_estimate(params: &CycleParams, m_star: u32) -> Result<ThetaPrime> {
    if m_star == 0 {
        return Err(BlabError::Precondition("m* must be at least 1".into()));
    }
    let moduli = super::regime::compute_moduli(params)?;
    let alpha = moduli.alpha.ok_or_else(|| {
        BlabError::Precondition("theta' estimates need a real central multiplier".into())
    })?;
    let gamma_prime = -alpha * params.gamma_signed().powi(m_star as i32);
    if gamma_prime.abs() <= 1.0 {
        return Err(BlabError::Precondition(format!(
            "|gamma'| = {:.6} <= 1: m* too small for an expanding induced multiplier",
            gamma_prime.abs()
        )));
    }
    Ok(ThetaPrime {
        m_star,
        leading: moduli.theta / m_star as f64,
        gamma_prime,
        direct: -params.lambda.ln() / gamma_prime.abs().ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref1_type2};
    use approx::assert_relative_eq;

    #[test]
    fn two_leading_expressions_agree_at_20_12() {
        let out = secondary_cycle_mu(&ref1_type2(), &[(20, 12), (39, 24)]).unwrap();
        let first = &out[0];
        assert_relative_eq!(first.mu_from_k, 0.5f64.powi(20), epsilon = 1e-18);
        assert_relative_eq!(first.mu_from_m, 0.5 / 531441.0, epsilon = 1e-18);
        assert!(first.discrepancy_rel < 0.02, "rel = {}", first.discrepancy_rel);
        // The absolute discrepancy shrinks along the sequence.
        assert!(out[1].discrepancy_abs < first.discrepancy_abs);
    }

    #[test]
    fn type_i_input_is_rejected() {
        assert!(secondary_cycle_mu(&ref1(), &[(20, 12)]).is_err());
    }

    #[test]
    fn unbalanced_pair_is_rejected() {
        let e = secondary_cycle_mu(&ref1_type2(), &[(3, 2)]);
        assert!(matches!(e, Err(BlabError::Precondition(_))), "{e:?}");
    }

    #[test]
    fn theta_prime_values() {
        let t = theta_prime_estimate(&ref1_type2(), 10).unwrap();
        assert_relative_eq!(t.leading, 2.0f64.ln() / 3.0f64.ln() / 10.0, epsilon = 1e-15);
        assert!((t.leading - 0.06309).abs() < 1e-5);
        // m* = 1: |alpha gamma| = 1.5 > 1, both values reported.
        let t = theta_prime_estimate(&ref1_type2(), 1).unwrap();
        assert_relative_eq!(t.gamma_prime.abs(), 1.5, epsilon = 1e-15);
        assert!(t.direct > 0.0);
        // m* = 0 errors.
        assert!(theta_prime_estimate(&ref1_type2(), 0).is_err());
    }
}
