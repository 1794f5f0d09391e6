//! The covering set: a finite family of return-map labels whose affine
//! images of `[-delta', delta']` cover `[-delta', delta']` with quantified
//! overlaps. The construction follows the grid
//!
//! ```text
//! n = ceil(4/|alpha| + 1),    rho_j = -delta'/delta + (j-1) 2 delta' / ((n-1) delta)
//! ```
//!
//! realizing for each `rho_j` a pair with
//! `(A_km x+ - ...)/delta ~ rho_j`, and certifies itself: a construction
//! whose intervals do not verifiably cover fails loudly.
//!
//! Verification is performed in exact rational arithmetic whenever the
//! skeleton endpoints are rational functions of the (exactly rational) f64
//! inputs — always the case for real central multipliers. Focus-case
//! endpoints involve sines of rotation phases and are checked in floating
//! point with a guard band instead.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::covering::search::{search_km, KmPair, Parity};
use crate::error::{BlabError, Result};
use crate::model::{Model, MultiplierCase};
use crate::retmap::ReturnMap;

/// Which central orientation the covering certifies: `Cs` uses the forward
/// skeleton (`|alpha| < 1`), `Cu` the inverse skeleton (`|alpha| > 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Cs,
    Cu,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringInterval {
    pub k: u32,
    pub m: u32,
    /// Target grid point `rho_j`.
    pub rho: f64,
    /// Affine skeleton (oriented) of this label.
    pub slope: f64,
    pub offset: f64,
    /// Interval `E_j` endpoints (floating approximations; the exact values
    /// are carried as rational strings when available).
    pub lo: f64,
    pub hi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_exact: Option<String>,
}

/// A self-certifying covering family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringSet {
    pub orientation: Orientation,
    pub n: usize,
    pub delta: f64,
    pub delta_prime: f64,
    /// Central contraction bound used by the overlap requirement
    /// (`|alpha|` for the saddle case, the lower `|A|` band bound for the
    /// focus cases).
    pub alpha: f64,
    pub n_min: u32,
    pub intervals: Vec<CoveringInterval>,
    /// True when the endpoint checks ran in exact rational arithmetic.
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverReport {
    pub covered: bool,
    /// Smallest consecutive overlap (not-applicable for a single interval).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_overlap: Option<f64>,
    pub overlap_ok: bool,
    /// Largest uncovered gap, zero when covered.
    pub max_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_location: Option<f64>,
    pub required_overlap: f64,
    pub exact_arithmetic: bool,
}

fn rat(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite f64")
}

fn rat_pow(base: &BigRational, exp: u32) -> BigRational {
    let mut out = BigRational::one();
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            out *= &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    out
}

/// Exact oriented skeleton for real central multipliers:
/// returns `(slope, offset)` as rationals.
fn exact_skeleton(model: &Model, orientation: Orientation, k: u32, m: u32) -> (BigRational, BigRational) {
    let p = &model.params;
    let lam = rat(p.lambda_signed());
    let gam = rat(p.gamma_signed());
    let scale = rat_pow(&lam, k) * rat_pow(&gam, m);
    let a = rat(p.a);
    let b = rat(p.b);
    let xp = rat(model.x_plus[0]);
    let um = rat(model.u_minus[0]);
    let a_km = &a * &b * &scale;
    let b_km = &a_km * &xp - &b * &um;
    match orientation {
        Orientation::Cs => (a_km, b_km),
        Orientation::Cu => {
            let inv = BigRational::one() / &a_km;
            let off = -&b_km * &inv;
            (inv, off)
        }
    }
}

fn oriented_coeffs(ret: &ReturnMap, orientation: Orientation, k: u32, m: u32) -> Result<(f64, f64)> {
    let (a, b) = ret.effective_coeffs(k, m)?;
    Ok(match orientation {
        Orientation::Cs => (a, b),
        Orientation::Cu => (1.0 / a, -b / a),
    })
}

/// The oriented central invariant: `alpha` for `Cs`, `1/alpha` for `Cu`
/// (saddle case), or the focus-band placeholder.
fn oriented_alpha(model: &Model, orientation: Orientation) -> Result<f64> {
    match model.params.case {
        MultiplierCase::Saddle => {
            let alpha = model.params.b * model.u_minus[0] / model.x_plus[0];
            let a = match orientation {
                Orientation::Cs => alpha,
                Orientation::Cu => 1.0 / alpha,
            };
            if !(a.abs() < 1.0) {
                return Err(BlabError::Precondition(format!(
                    "covering orientation requires the oriented |alpha| < 1, got {}",
                    a.abs()
                )));
            }
            Ok(a)
        }
        // Focus cases: certify against a fixed |A| band.
        _ => Ok(FOCUS_A_BAND.0),
    }
}

/// `|A|` band used to admit focus-case labels into covering families.
pub const FOCUS_A_BAND: (f64, f64) = (0.25, 0.9);

const DEFAULT_N_MIN: u32 = 10;

/// Build the covering family for the center-stable orientation (`|alpha|<1`).
pub fn build_covering_set(params: &crate::model::CycleParams) -> Result<CoveringSet> {
    build_covering_set_oriented(&ReturnMap::new(params)?, Orientation::Cs)
}

pub fn build_covering_set_oriented(ret: &ReturnMap, orientation: Orientation) -> Result<CoveringSet> {
    let model = &ret.model;
    let p = &model.params;
    let alpha = oriented_alpha(model, orientation)?;
    let delta = p.delta;
    let dp = p.delta_prime();
    let n = (4.0 / alpha.abs() + 1.0).ceil() as usize;
    // Realization budget for the offset targets: with n - 1 >= 4/|alpha| the
    // ideal consecutive overlap is >= 1.5 |alpha| delta', so a 0.4 |alpha|
    // delta' miss per interval still leaves > 0.7 |alpha| delta' overlap,
    // comfortably above the required |alpha| delta' / 2.
    let tol_b = 0.4 * alpha.abs() * dp;
    let parity = if p.needs_even_pairs() { Parity::Even } else { Parity::Any };
    let mut intervals: Vec<CoveringInterval> = Vec::with_capacity(n);
    let mut used: Vec<(u32, u32)> = Vec::new();
    for j in 1..=n {
        let rho = -dp / delta + (j - 1) as f64 * 2.0 * dp / ((n - 1) as f64 * delta);
        let (k, m) = realize_target(ret, orientation, rho, tol_b, parity, &used)?;
        used.push((k, m));
        let (slope, offset) = oriented_coeffs(ret, orientation, k, m)?;
        let half = slope.abs() * dp;
        intervals.push(CoveringInterval {
            k,
            m,
            rho,
            slope,
            offset,
            lo: offset - half,
            hi: offset + half,
            lo_exact: None,
            hi_exact: None,
        });
    }
    let exact = p.case == MultiplierCase::Saddle;
    if exact {
        for iv in &mut intervals {
            let (s, o) = exact_skeleton(model, orientation, iv.k, iv.m);
            let half = s.abs() * rat(dp);
            let lo = &o - &half;
            let hi = &o + &half;
            iv.lo = lo.to_f64().unwrap();
            iv.hi = hi.to_f64().unwrap();
            iv.lo_exact = Some(lo.to_string());
            iv.hi_exact = Some(hi.to_string());
        }
    }
    let set = CoveringSet {
        orientation,
        n,
        delta,
        delta_prime: dp,
        alpha,
        n_min: DEFAULT_N_MIN,
        intervals,
        exact,
    };
    let report = verify_covering(&set)?;
    if !report.covered || !report.overlap_ok {
        return Err(BlabError::CoveringMargin {
            lo: -dp,
            hi: dp,
            margin: report.min_overlap.unwrap_or(f64::NAN),
        });
    }
    Ok(set)
}

/// Find `(k, m)` whose oriented constant term is within `tol_b` of
/// `rho * delta`, avoiding labels already used.
fn realize_target(
    ret: &ReturnMap,
    orientation: Orientation,
    rho: f64,
    tol_b: f64,
    parity: Parity,
    used: &[(u32, u32)],
) -> Result<(u32, u32)> {
    let model = &ret.model;
    let p = &model.params;
    let theta = p.lambda.ln().abs() / p.gamma.ln();
    let delta = p.delta;
    match p.case {
        MultiplierCase::Saddle => {
            // Solve the affine skeleton for the lambda^k gamma^m target.
            let v = match orientation {
                Orientation::Cs => (p.b * model.u_minus[0] + delta * rho) / (p.a * p.b * model.x_plus[0]),
                Orientation::Cu => model.u_minus[0] / (p.a * (model.x_plus[0] + rho * delta)),
            };
            if v <= 0.0 && (p.needs_even_pairs() || (!p.lambda_negative && !p.gamma_negative)) {
                return Err(BlabError::NoRealization { rho, k_max: 0, best_miss: f64::INFINITY });
            }
            // Tolerance window in scale units, from the |dB| budget:
            // Cs offset is a b x+ s - b u-, Cu offset is u-/(a s) - x+.
            let db_dv = match orientation {
                Orientation::Cs => (p.a * p.b * model.x_plus[0]).abs(),
                Orientation::Cu => (model.u_minus[0] / (p.a * v * v)).abs(),
            };
            let tol_t = tol_b / (db_dv * v.abs() * p.gamma.ln());
            let target = v.abs().ln() / p.gamma.ln();
            let mut k_max = 20_000u64;
            let n_min = DEFAULT_N_MIN;
            loop {
                let out = search_km(theta, target, tol_t * p.gamma.ln(), p.gamma.ln(), k_max, parity);
                let hit = out.hits.iter().find(|&&(k, m)| {
                    k > n_min && m > n_min && !used.contains(&(k, m))
                });
                if let Some(&(k, m)) = hit {
                    return Ok((k, m));
                }
                if k_max >= 100_000_000 {
                    return Err(BlabError::NoRealization {
                        rho,
                        k_max,
                        best_miss: out.best_miss.map(|b| b.2).unwrap_or(f64::NAN),
                    });
                }
                k_max *= 10;
            }
        }
        _ => {
            // Focus cases: enumerate k, completing m from the magnitude
            // balance, and admit pairs whose effective skeleton lands the
            // offset in the window with |A| inside the band.
            let mut k = DEFAULT_N_MIN + 1;
            let mut best = f64::INFINITY;
            while k <= 2_000_000 {
                if parity.admits(k as u64, 0) || parity == Parity::Any {
                    let ideal = k as f64 * theta;
                    let m0 = ideal.round() as i64;
                    for m in (m0 - 8).max(DEFAULT_N_MIN as i64 + 1)..=m0 + 8 {
                        let m = m as u32;
                        if !parity.admits(k as u64, m as u64) {
                            continue;
                        }
                        let Ok((a, b)) = oriented_coeffs(ret, orientation, k, m) else { continue };
                        if a.abs() < FOCUS_A_BAND.0 || a.abs() > FOCUS_A_BAND.1 {
                            continue;
                        }
                        let miss = (b - rho * delta).abs();
                        if miss < tol_b && !used.contains(&(k, m)) {
                            return Ok((k, m));
                        }
                        best = best.min(miss);
                    }
                }
                k += 1;
            }
            Err(BlabError::NoRealization { rho, k_max: 2_000_000, best_miss: best })
        }
    }
}

/// Exact endpoint check of the covering and overlap invariants.
pub fn verify_covering(set: &CoveringSet) -> Result<CoverReport> {
    let required_overlap = set.delta_prime * set.alpha.abs() / 2.0;
    if set.exact {
        verify_exact(set, required_overlap)
    } else {
        verify_float(set, required_overlap)
    }
}

fn verify_exact(set: &CoveringSet, required_overlap: f64) -> Result<CoverReport> {
    let dp = rat(set.delta_prime);
    let req = rat(set.alpha).abs() * &dp / rat(2.0);
    let endpoints: Vec<(BigRational, BigRational)> = set
        .intervals
        .iter()
        .map(|iv| {
            let lo = iv
                .lo_exact
                .as_ref()
                .map(|s| parse_rat(s))
                .transpose()?
                .unwrap_or_else(|| rat(iv.lo));
            let hi = iv
                .hi_exact
                .as_ref()
                .map(|s| parse_rat(s))
                .transpose()?
                .unwrap_or_else(|| rat(iv.hi));
            Ok((lo, hi))
        })
        .collect::<Result<_>>()?;
    // Consecutive overlaps in construction order.
    let mut min_overlap: Option<BigRational> = None;
    let mut overlap_ok = true;
    if endpoints.len() >= 2 {
        for w in endpoints.windows(2) {
            let lo = if w[0].0 > w[1].0 { w[0].0.clone() } else { w[1].0.clone() };
            let hi = if w[0].1 < w[1].1 { w[0].1.clone() } else { w[1].1.clone() };
            let ov = &hi - &lo;
            if ov <= req {
                overlap_ok = false;
            }
            if min_overlap.as_ref().map(|m| &ov < m).unwrap_or(true) {
                min_overlap = Some(ov);
            }
        }
    }
    // Sweep for interior coverage of [-dp, dp].
    let mut order: Vec<usize> = (0..endpoints.len()).collect();
    order.sort_by(|&i, &j| endpoints[i].0.cmp(&endpoints[j].0));
    let mut frontier = -dp.clone();
    let mut max_gap = BigRational::zero();
    let mut gap_location = None;
    let mut covered = true;
    loop {
        if frontier > dp {
            break;
        }
        let mut best: Option<BigRational> = None;
        for &i in &order {
            let (lo, hi) = &endpoints[i];
            if lo < &frontier && best.as_ref().map(|b| hi > b).unwrap_or(true) {
                best = Some(hi.clone());
            }
        }
        match best {
            Some(b) if b > frontier => frontier = b,
            _ => {
                covered = false;
                gap_location = Some(frontier.to_f64().unwrap());
                // Width of the gap: distance to the next interval start.
                let next = order
                    .iter()
                    .filter_map(|&i| {
                        let lo = &endpoints[i].0;
                        (lo >= &frontier).then(|| lo.clone())
                    })
                    .min();
                let end = next.unwrap_or_else(|| dp.clone());
                max_gap = (&end - &frontier).max(BigRational::zero());
                break;
            }
        }
    }
    Ok(CoverReport {
        covered,
        min_overlap: if endpoints.len() >= 2 {
            min_overlap.map(|m| m.to_f64().unwrap())
        } else {
            None
        },
        overlap_ok: overlap_ok || endpoints.len() < 2,
        max_gap: max_gap.to_f64().unwrap(),
        gap_location,
        required_overlap,
        exact_arithmetic: true,
    })
}

fn verify_float(set: &CoveringSet, required_overlap: f64) -> Result<CoverReport> {
    // Guard band of 2 ulps on every comparison.
    let guard = 2.0 * f64::EPSILON * (1.0 + set.delta_prime.abs());
    let dp = set.delta_prime;
    let mut min_overlap: Option<f64> = None;
    let mut overlap_ok = true;
    if set.intervals.len() >= 2 {
        for w in set.intervals.windows(2) {
            let ov = w[0].hi.min(w[1].hi) - w[0].lo.max(w[1].lo);
            if !(ov > required_overlap + guard) {
                overlap_ok = false;
            }
            if min_overlap.map(|m| ov < m).unwrap_or(true) {
                min_overlap = Some(ov);
            }
        }
    }
    let mut order: Vec<usize> = (0..set.intervals.len()).collect();
    order.sort_by(|&i, &j| set.intervals[i].lo.total_cmp(&set.intervals[j].lo));
    let mut frontier = -dp;
    let mut covered = true;
    let mut max_gap = 0.0f64;
    let mut gap_location = None;
    loop {
        if frontier > dp {
            break;
        }
        let mut best: Option<f64> = None;
        for &i in &order {
            let iv = &set.intervals[i];
            if iv.lo + guard < frontier {
                best = Some(best.map(|b: f64| b.max(iv.hi)).unwrap_or(iv.hi));
            }
        }
        match best {
            Some(b) if b - guard > frontier => frontier = b - guard,
            _ => {
                covered = false;
                gap_location = Some(frontier);
                let next = order
                    .iter()
                    .map(|&i| set.intervals[i].lo)
                    .filter(|lo| *lo >= frontier)
                    .fold(f64::INFINITY, f64::min);
                max_gap = (next.min(dp) - frontier).max(0.0);
                break;
            }
        }
    }
    Ok(CoverReport {
        covered,
        min_overlap: if set.intervals.len() >= 2 { min_overlap } else { None },
        overlap_ok: overlap_ok || set.intervals.len() < 2,
        max_gap,
        gap_location,
        required_overlap,
        exact_arithmetic: false,
    })
}

fn parse_rat(s: &str) -> Result<BigRational> {
    s.parse::<BigRational>().map_err(|e| {
        BlabError::InvalidParams(format!("bad rational literal {s:?}: {e}"))
    })
}

/// Convenience: pairs of the covering family.
impl CoveringSet {
    pub fn pairs(&self) -> Vec<KmPair> {
        self.intervals
            .iter()
            .map(|iv| KmPair {
                k: iv.k,
                m: iv.m,
                value: f64::NAN,
                even: iv.k % 2 == 0 && iv.m % 2 == 0,
            })
            .collect()
    }
}

#[allow(dead_code)]
fn unused_bigint_guard(_: BigInt) {}
