//! One refinement step of the covering construction: pick the covering label
//! whose interval contains the disc's central range with margin, and pull
//! the disc back through that return map.

use nalgebra::DVector;

use crate::blender::disc::{Disc, DiscOrientation};
use crate::covering::{CoveringSet, Orientation};
use crate::error::{BlabError, Result};
use crate::retmap::ReturnMap;

/// Margin required between the disc's central range and the interior of the
/// selected interval, as a fraction of `delta' |alpha|`.
pub fn selection_margin(covering: &CoveringSet) -> f64 {
    covering.delta_prime * covering.alpha.abs() / 8.0
}

/// Select the pair whose interval contains `[lo, hi]` with the largest
/// margin; ties break to smaller `k`, then smaller `m`. The intervals are
/// recomputed from the live parameters, so a perturbed system is judged by
/// its own skeleton while keeping the covering family's labels.
pub fn select_pair(ret: &ReturnMap, covering: &CoveringSet, lo: f64, hi: f64) -> Result<(u32, u32)> {
    let need = selection_margin(covering);
    let dp = covering.delta_prime;
    let mut best: Option<(f64, u32, u32)> = None;
    for iv in &covering.intervals {
        let (a, b) = match covering.orientation {
            Orientation::Cs => ret.effective_coeffs(iv.k, iv.m)?,
            Orientation::Cu => {
                let (a, b) = ret.effective_coeffs(iv.k, iv.m)?;
                (1.0 / a, -b / a)
            }
        };
        let (e_lo, e_hi) = (b - a.abs() * dp, b + a.abs() * dp);
        let margin = (lo - e_lo).min(e_hi - hi);
        if margin >= need {
            let better = match best {
                None => true,
                Some((bm, bk, bmm)) => {
                    margin > bm || (margin == bm && (iv.k, iv.m) < (bk, bmm))
                }
            };
            if better {
                best = Some((margin, iv.k, iv.m));
            }
        }
    }
    best.map(|(_, k, m)| (k, m)).ok_or(BlabError::CoveringMargin { lo, hi, margin: need })
}

/// Evaluate the image data of a horizontal disc point: given the preimage
/// `(X, Z)`, iterate the image-side graph coupling to a fixed point and
/// return `(X', Y_pre, Z', Y'_used)`.
fn horizontal_image(
    ret: &ReturnMap,
    disc: &Disc,
    k: u32,
    m: u32,
    x: f64,
    z: &DVector<f64>,
    zbar_warm: &mut DVector<f64>,
) -> Result<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> {
    let mut last = None;
    for _ in 0..6 {
        let (_, ybar) = disc.eval(zbar_warm);
        let img = ret.cross_relaxed(k, m, x, &ybar, z)?;
        let change = (&img.zbar - &*zbar_warm).amax();
        zbar_warm.copy_from(&img.zbar);
        let done = change < 1e-15;
        last = Some((img.xbar, img.y, img.zbar, ybar));
        if done {
            break;
        }
    }
    let (xbar, y, zbar, ybar) = last.unwrap();
    Ok((xbar, y, zbar, ybar))
}

/// Pull a horizontal disc back through `T_{k,m}`: per base node, solve
/// `X'(X) = s_X(Z'(X))` for `X` in `[-delta', delta']` by bisection.
fn preimage_horizontal(
    ret: &ReturnMap,
    disc: &Disc,
    k: u32,
    m: u32,
) -> Result<Disc> {
    let dp = ret.model.params.delta_prime();
    let mut out = disc.clone();
    let mut zbar_warm = DVector::zeros(disc.base_dim);
    for index in 0..disc.node_count() {
        let z = disc.node_coord(index);
        let warm = std::cell::RefCell::new(zbar_warm.clone());
        let g = |x: f64| -> Result<f64> {
            let mut w = warm.borrow_mut();
            let (xbar, _, zbar, _) = horizontal_image(ret, disc, k, m, x, &z, &mut w)?;
            let (sx, _) = disc.eval(&zbar);
            Ok(xbar - sx)
        };
        let root = bracketed_root(&g, -dp, dp, 1e-14)?;
        zbar_warm = warm.into_inner();
        let (_, y, _, _) = horizontal_image(ret, disc, k, m, root, &z, &mut zbar_warm)?;
        out.values_x[index] = root;
        out.values_other[index] = y.iter().cloned().collect();
    }
    out.lipschitz = out.max_difference_quotient();
    Ok(out)
}

/// Bracket-preserving root solve (Illinois false position with a bisection
/// safeguard): guaranteed convergence on a sign change, near-secant speed on
/// the almost-affine residuals of the covering construction.
fn bracketed_root<G>(g: &G, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(BlabError::BracketingFailed { lo, hi });
    }
    let mut last_side = 0i8;
    for iter in 0..200 {
        let mut x = (lo * ghi - hi * glo) / (ghi - glo);
        // Safeguard: fall back to bisection when false position stalls near
        // an edge or every fourth iteration.
        if !(x > lo && x < hi) || iter % 4 == 3 {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x)?;
        if gx == 0.0 || hi - lo <= tol {
            return Ok(x);
        }
        if gx.signum() == glo.signum() {
            lo = x;
            glo = gx;
            if last_side == -1 {
                ghi *= 0.5; // Illinois trick against one-sided stalling
            }
            last_side = -1;
        } else {
            hi = x;
            ghi = gx;
            if last_side == 1 {
                glo *= 0.5;
            }
            last_side = 1;
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(BlabError::NoConvergence { iterations: 200, residual: hi - lo })
}

/// Pull a vertical disc back through `T^{-1}_{k,m}` — equivalently, refine it
/// by the forward images: per base node `Y'`, find the disc point whose image
/// has that `Y'`, and record the image.
fn preimage_vertical(ret: &ReturnMap, disc: &Disc, k: u32, m: u32) -> Result<Disc> {
    let mut out = disc.clone();
    for index in 0..disc.node_count() {
        let ybar = disc.node_coord(index);
        // Solve Y = cross(s_X(Y), Y', s_Z(Y)).y — a strong contraction in Y.
        let mut y = DVector::zeros(disc.base_dim);
        let mut img = None;
        for _ in 0..50 {
            let (sx, sz) = disc.eval(&y);
            let im = ret.cross_relaxed(k, m, sx, &ybar, &sz)?;
            let change = (&im.y - &y).amax();
            y = im.y.clone();
            let done = change < 1e-15;
            img = Some(im);
            if done {
                break;
            }
        }
        let img = img.unwrap();
        out.values_x[index] = img.xbar;
        out.values_other[index] = img.zbar.iter().cloned().collect();
    }
    out.lipschitz = out.max_difference_quotient();
    Ok(out)
}

/// One refinement step: selects the pair and returns it with the refined
/// disc. The covering intervals are consulted for the selection; the actual
/// pullback always uses the live parameters.
pub fn preimage_step(
    ret: &ReturnMap,
    disc: &Disc,
    covering: &CoveringSet,
) -> Result<((u32, u32), Disc)> {
    let (lo, hi) = disc.central_range();
    let (k, m) = select_pair(ret, covering, lo, hi)?;
    let refined = match disc.orientation {
        DiscOrientation::Horizontal => {
            debug_assert_eq!(covering.orientation, Orientation::Cs);
            preimage_horizontal(ret, disc, k, m)?
        }
        DiscOrientation::Vertical => {
            debug_assert_eq!(covering.orientation, Orientation::Cu);
            preimage_vertical(ret, disc, k, m)?
        }
    };
    Ok(((k, m), refined))
}
