//! The rational-theta trichotomy conditions: when `theta = p/q` at working
//! precision, trivial local dynamics are predicted provided `|ab|` avoids the
//! lattice `{|gamma|^{s/q}}` and `|u-/(a x+)|` avoids the closure of
//! `{|gamma|^{s/q} (1 - lambda^l)/(1 - gamma^-n)}`.

use serde::{Deserialize, Serialize};

use crate::covering::contfrac;
use crate::error::Result;
use crate::model::{CycleParams, MultiplierCase};

/// Distances below this are reported as violated at tolerance.
pub const RARE_TOL: f64 = 1e-9;
/// Truncation of the (l, n) grid; the analytic limit families cover the
/// accumulation points beyond it.
pub const RARE_LN_CAP: u32 = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rare1 {
    pub pass: bool,
    /// Exponent of the nearest excluded value.
    pub nearest_s: i64,
    /// Distance of `|ab|` to the nearest excluded value.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rare2 {
    pub pass: bool,
    pub distance: f64,
    /// `(s, l, n)` of the nearest excluded value; `l = 0` / `n = 0` encode
    /// the analytic limit families.
    pub nearest: (i64, u32, u32),
    pub ln_cap: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RareReport {
    pub theta: f64,
    /// Best rational approximation within the denominator bound.
    pub p: i64,
    pub q: u64,
    pub approx_error: f64,
    /// Whether theta is rational at working precision (the branch taken).
    pub treated_rational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rare1: Option<Rare1>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rare2: Option<Rare2>,
}

/// Evaluate the rational-theta conditions. For irrational-at-precision
/// theta the rare conditions are marked not applicable and only the best
/// approximant is reported.
pub fn rational_theta_check(params: &CycleParams, max_den: u64) -> Result<RareReport> {
    let theta = super::regime::theta(params);
    let (p, q, err) = contfrac::best_rational(theta, max_den);
    let treated_rational = contfrac::rational_at_precision(theta, max_den, 0.0).is_some();
    if !treated_rational {
        return Ok(RareReport {
            theta,
            p,
            q,
            approx_error: err,
            treated_rational,
            rare1: None,
            rare2: None,
        });
    }
    let gamma = params.gamma; // modulus
    let lambda_s = params.lambda_signed();
    let gamma_s = params.gamma_signed();
    let (a, b, x_plus, u_minus) = match params.case {
        MultiplierCase::Saddle => (params.a, params.b, params.x_plus[0], params.u_minus[0]),
        // The trichotomy is a real-central-multiplier statement; reuse the
        // central coefficients for the focus cases.
        _ => (params.a, params.b, params.x_plus[0], params.u_minus[0]),
    };
    // rare1: |ab| != gamma^{s/q}.
    let ab = (a * b).abs();
    let qf = q as f64;
    let s_star = qf * ab.ln() / gamma.ln();
    let mut rare1 = Rare1 { pass: true, nearest_s: 0, distance: f64::INFINITY };
    for s in (s_star.floor() as i64 - 1)..=(s_star.ceil() as i64 + 1) {
        let value = (s as f64 / qf * gamma.ln()).exp();
        let d = (ab - value).abs();
        if d < rare1.distance {
            rare1 = Rare1 { pass: d >= RARE_TOL, nearest_s: s, distance: d };
        }
    }
    // rare2: |u-/(a x+)| avoids the closure set.
    let target = (u_minus / (a * x_plus)).abs();
    let mut rare2 = Rare2 { pass: true, distance: f64::INFINITY, nearest: (0, 0, 0), ln_cap: RARE_LN_CAP };
    let mut consider = |factor: f64, l: u32, n: u32, rare2: &mut Rare2| {
        if !(factor > 0.0) || !factor.is_finite() {
            return;
        }
        let s_star = qf * (target / factor).ln() / gamma.ln();
        for s in (s_star.floor() as i64 - 1)..=(s_star.ceil() as i64 + 1) {
            let value = (s as f64 / qf * gamma.ln()).exp() * factor;
            let d = (target - value).abs();
            if d < rare2.distance {
                *rare2 = Rare2 {
                    pass: d >= RARE_TOL,
                    distance: d,
                    nearest: (s, l, n),
                    ln_cap: RARE_LN_CAP,
                };
            }
        }
    };
    for l in 1..=RARE_LN_CAP {
        for n in 1..=RARE_LN_CAP {
            let factor = (1.0 - lambda_s.powi(l as i32)) / (1.0 - gamma_s.powi(-(n as i32)));
            consider(factor, l, n, &mut rare2);
        }
        // n -> infinity limit family.
        consider(1.0 - lambda_s.powi(l as i32), l, 0, &mut rare2);
    }
    for n in 1..=RARE_LN_CAP {
        // l -> infinity limit family.
        consider(1.0 / (1.0 - gamma_s.powi(-(n as i32))), 0, n, &mut rare2);
    }
    // Double limit: the pure lattice gamma^{s/q}.
    consider(1.0, 0, 0, &mut rare2);
    Ok(RareReport {
        theta,
        p,
        q,
        approx_error: err,
        treated_rational,
        rare1: Some(rare1),
        rare2: Some(rare2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref2};

    #[test]
    fn ref2_rare1_fails_at_s_zero() {
        // theta = 1/2 exactly, |ab| = 1 = gamma^{0/2}.
        let r = rational_theta_check(&ref2(), 1_000_000).unwrap();
        assert!(r.treated_rational);
        assert_eq!((r.p, r.q), (1, 2));
        let rare1 = r.rare1.unwrap();
        assert!(!rare1.pass);
        assert_eq!(rare1.nearest_s, 0);
        assert!(rare1.distance < RARE_TOL);
    }

    #[test]
    fn ref2_with_ab_1_3_passes_with_distance() {
        let mut p = ref2();
        p.a = 1.3;
        p.a_ij[0][0] = 1.3;
        let r = rational_theta_check(&p, 1_000_000).unwrap();
        let rare1 = r.rare1.unwrap();
        assert!(rare1.pass);
        // Excluded lattice is 2^s; nearest are 1 and 2.
        assert!((rare1.distance - 0.3).abs() < 1e-12, "distance = {}", rare1.distance);
    }

    #[test]
    fn ref1_is_irrational_at_precision() {
        let r = rational_theta_check(&ref1(), 20).unwrap();
        assert!(!r.treated_rational);
        assert!(r.rare1.is_none() && r.rare2.is_none());
        assert_eq!((r.p, r.q), (12, 19));
        assert!((r.approx_error - 6.4919e-4).abs() < 1e-7);
    }

    #[test]
    fn rare2_detects_excluded_ratio() {
        // Put u-/(a x+) exactly on the double-limit lattice: gamma^{0/q} = 1.
        let mut p = ref2();
        p.u_minus = vec![1.0]; // u-/(a x+) = 1 -> excluded at (s,l,n) = (0,0,0)
        let r = rational_theta_check(&p, 1_000_000).unwrap();
        let rare2 = r.rare2.unwrap();
        assert!(!rare2.pass);
        assert!(rare2.distance < RARE_TOL);
    }
}
