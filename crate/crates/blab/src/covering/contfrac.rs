//! Continued fractions: convergents, best rational approximation, and
//! near-rational detection for conjugacy moduli.

/// Continued-fraction convergents `p/q` of `x` with `q <= max_den`,
/// in increasing order of `q`.
pub fn convergents(x: f64, max_den: u64) -> Vec<(i64, u64)> {
    let mut out = Vec::new();
    let (mut p_prev, mut q_prev): (i128, i128) = (1, 0);
    let (mut p, mut q): (i128, i128) = (x.floor() as i128, 1);
    out.push((p as i64, 1u64));
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if frac.abs() < 1e-18 {
            break;
        }
        let recip = 1.0 / frac;
        let a = recip.floor();
        if !a.is_finite() || a >= 1e18 {
            break;
        }
        frac = recip - a;
        let a = a as i128;
        let p_next = a * p + p_prev;
        let q_next = a * q + q_prev;
        if q_next as u128 > max_den as u128 {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        out.push((p as i64, q as u64));
    }
    out
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (first kind: smallest absolute error), found among convergents and
/// semiconvergents. Returns `(p, q, |x - p/q|)`.
pub fn best_rational(x: f64, max_den: u64) -> (i64, u64, f64) {
    let mut best = (x.round() as i64, 1u64, (x - x.round()).abs());
    let conv = convergents(x, u64::MAX);
    for w in conv.windows(2) {
        let (p0, q0) = (w[0].0 as i128, w[0].1 as i128);
        let (p1, q1) = (w[1].0 as i128, w[1].1 as i128);
        // Semiconvergents (p0 + t p1')/(q0 + t q1') interpolate between
        // consecutive convergents; enumerate the ones within the bound.
        for t in 0..=((max_den as i128 - q0).max(0) / q1.max(1)) {
            let q = q0 + t * q1;
            let p = p0 + t * p1;
            if q == 0 || q as u64 > max_den {
                continue;
            }
            let err = (x - p as f64 / q as f64).abs();
            if err < best.2 {
                best = (p as i64, q as u64, err);
            }
        }
        if q1 as u64 <= max_den {
            let err = (x - p1 as f64 / q1 as f64).abs();
            if err < best.2 {
                best = (p1 as i64, q1 as u64, err);
            }
        }
    }
    best
}

/// Treat `x` as rational when some `p/q` with `q <= max_den` matches it to
/// within float noise; floating inputs cannot certify irrationality, so this
/// is always a statement at working precision.
///
/// The threshold is relative to the representation error of `x` itself
/// rather than a fixed absolute tolerance: an exactly rational value stored
/// as f64 matches its fraction to ~`eps`, while genuinely irrational moduli
/// (e.g. `ln 2 / ln 3`, whose best approximation below denominator 10^6 is
/// still ~1e-13 away) stay two orders of magnitude above it.
pub fn rational_at_precision(x: f64, max_den: u64, tol: f64) -> Option<(i64, u64)> {
    let (p, q, err) = best_rational(x, max_den);
    let noise = tol.max(16.0 * f64::EPSILON * x.abs().max(1.0));
    (err <= noise).then_some((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta_ref1() -> f64 {
        2.0f64.ln() / 3.0f64.ln()
    }

    #[test]
    fn convergents_of_log2_base3() {
        let c = convergents(theta_ref1(), 100);
        // 0/1, 1/1, 1/2, 2/3, 5/8, 12/19, 41/65, 53/84 ...
        assert!(c.contains(&(12, 19)));
        assert!(c.contains(&(53, 84)));
    }

    #[test]
    fn best_rational_den_20() {
        let (p, q, err) = best_rational(theta_ref1(), 20);
        assert_eq!((p, q), (12, 19));
        assert!((err - 6.4919e-4).abs() < 1e-7, "err = {err}");
    }

    #[test]
    fn rational_detection() {
        assert_eq!(rational_at_precision(0.5, 1_000_000, 0.0), Some((1, 2)));
        assert_eq!(rational_at_precision(theta_ref1(), 1_000_000, 0.0), None);
    }
}
