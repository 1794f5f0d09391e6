//! Sampled certification of the four invariant cone fields of the
//! first-return maps.
//!
//! Tangent vectors are transported with the cross-form Jacobian
//! `J = d(X', Y, Z') / d(X, Y', Z)`: forward transport solves the middle row
//! for the image `Y`-component, backward transport solves the `(X, Z)` rows
//! for the preimage; both directions are numerically benign, unlike the raw
//! forward derivative whose `Y`-rows explode with `k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::fd::fd_jacobian;
use crate::cone::sobol::Sobol;
use crate::error::{BlabError, Result};
use crate::retmap::{box_z_dim, ReturnMap};

/// Which pair of blocks the cone surrounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeOrientation {
    /// `|dZ| <= K (|dX| + |dY|)` — center-unstable, forward-invariant.
    Cu,
    /// `max(|dX|, |dZ|) <= K |dY|` — strong-unstable, forward-invariant.
    Uu,
    /// `|dY| <= K (|dX| + |dZ|)` — center-stable, backward-invariant.
    Cs,
    /// `max(|dX|, |dY|) <= K |dZ|` — strong-stable, backward-invariant.
    Ss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportDirection {
    Forward,
    Backward,
}

/// A cone field on the return box: an orientation, an opening `K < 1`, and
/// the block split (central is always the single coordinate `X`; the focus
/// cases fold their second central coordinate into the `Z` block).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConeSpec {
    pub orientation: ConeOrientation,
    pub opening: f64,
    pub d1: usize,
    pub dz: usize,
}

impl ConeSpec {
    pub fn new(ret: &ReturnMap, orientation: ConeOrientation, opening: f64) -> Result<Self> {
        if !(opening > 0.0 && opening < 1.0) {
            return Err(BlabError::Precondition(format!(
                "cone opening K = {opening} must lie in (0,1)"
            )));
        }
        Ok(ConeSpec { orientation, opening, d1: ret.model.d1, dz: box_z_dim(&ret.model) })
    }

    fn split<'a>(&self, v: &'a DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        (v[0], v.rows(1, self.d1).into(), v.rows(1 + self.d1, self.dz).into())
    }

    /// `LHS / (K * RHS)` of the defining inequality; in-cone iff <= 1.
    pub fn ratio(&self, v: &DVector<f64>) -> f64 {
        let (x, y, z) = self.split(v);
        let x = x.abs();
        let ny = y.norm();
        let nz = z.norm();
        let (lhs, rhs) = match self.orientation {
            ConeOrientation::Cu => (nz, x + ny),
            ConeOrientation::Uu => (x.max(nz), ny),
            ConeOrientation::Cs => (ny, x + nz),
            ConeOrientation::Ss => (x.max(ny), nz),
        };
        if rhs == 0.0 {
            return if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        }
        lhs / (self.opening * rhs)
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        self.ratio(v) <= 1.0
    }

    /// A unit vector of the cone from sample coordinates in `[0,1)`:
    /// the dominant block on its unit sphere, the constrained blocks filling
    /// the opening allowance.
    pub fn sample_vector(&self, coords: &[f64]) -> DVector<f64> {
        let d = 1 + self.d1 + self.dz;
        let mut v = DVector::zeros(d);
        let mut idx = 0;
        let mut take = |n: usize| -> Vec<f64> {
            let out = coords[idx..idx + n].to_vec();
            idx += n;
            out
        };
        let unit = |c: Vec<f64>| -> DVector<f64> {
            let raw: Vec<f64> = c.iter().map(|t| 2.0 * t - 1.0).collect();
            let v = DVector::from_vec(raw);
            let n = v.norm();
            if n == 0.0 { DVector::from_element(v.len(), 1.0) / (v.len() as f64).sqrt() } else { v / n }
        };
        match self.orientation {
            ConeOrientation::Cu => {
                // Dominant (X, Y) with a signed mixing weight (so boundary
                // rays, pure-central included, get sampled), constrained Z.
                let mut x = 2.0 * take(1)[0] - 1.0;
                let s = 2.0 * take(1)[0] - 1.0;
                let ydir = unit(take(self.d1));
                let frac = take(1)[0];
                let zdir = unit(take(self.dz));
                if x * x + s * s < 1e-18 {
                    x = 1.0;
                }
                let norm = (x * x + s * s).sqrt();
                let budget = self.opening * (x.abs() + s.abs()) / norm;
                v[0] = x / norm;
                v.rows_mut(1, self.d1).copy_from(&(ydir * (s / norm)));
                v.rows_mut(1 + self.d1, self.dz).copy_from(&(zdir * (frac * budget)));
            }
            ConeOrientation::Uu => {
                let dom = unit(take(self.d1));
                let fx = take(1)[0];
                let fz = take(1)[0];
                let zdir = unit(take(self.dz));
                let budget = self.opening;
                v[0] = (2.0 * fx - 1.0) * budget;
                v.rows_mut(1, self.d1).copy_from(&dom);
                v.rows_mut(1 + self.d1, self.dz).copy_from(&(zdir * ((2.0 * fz - 1.0) * budget)));
            }
            ConeOrientation::Cs => {
                // Dominant (X, Z) with a signed mixing weight, constrained Y.
                let mut x = 2.0 * take(1)[0] - 1.0;
                let s = 2.0 * take(1)[0] - 1.0;
                let zdir = unit(take(self.dz));
                let frac = take(1)[0];
                let ydir = unit(take(self.d1));
                if x * x + s * s < 1e-18 {
                    x = 1.0;
                }
                let norm = (x * x + s * s).sqrt();
                let budget = self.opening * (x.abs() + s.abs()) / norm;
                v[0] = x / norm;
                v.rows_mut(1 + self.d1, self.dz).copy_from(&(zdir * (s / norm)));
                v.rows_mut(1, self.d1).copy_from(&(ydir * (frac * budget)));
            }
            ConeOrientation::Ss => {
                let zdir = unit(take(self.dz));
                let fx = take(1)[0];
                let fy = take(1)[0];
                let ydir = unit(take(self.d1));
                v[0] = (2.0 * fx - 1.0) * self.opening;
                v.rows_mut(1, self.d1).copy_from(&(ydir * ((2.0 * fy - 1.0) * self.opening)));
                v.rows_mut(1 + self.d1, self.dz).copy_from(&zdir);
            }
        }
        let n = v.norm();
        v / n
    }

    /// The cone's axis ray (pure dominant block): the extremal direction for
    /// central growth tracking.
    pub fn axis_vector(&self) -> DVector<f64> {
        let d = 1 + self.d1 + self.dz;
        let mut v = DVector::zeros(d);
        match self.orientation {
            ConeOrientation::Cu | ConeOrientation::Cs => v[0] = 1.0,
            ConeOrientation::Uu => v[1] = 1.0,
            ConeOrientation::Ss => v[1 + self.d1] = 1.0,
        }
        v
    }

    /// Number of `[0,1)` coordinates consumed by `sample_vector`.
    pub fn sample_dims(&self) -> usize {
        match self.orientation {
            ConeOrientation::Cu => 2 + self.d1 + 1 + self.dz,
            ConeOrientation::Uu => self.d1 + 2 + self.dz,
            ConeOrientation::Cs => 2 + self.dz + 1 + self.d1,
            ConeOrientation::Ss => self.dz + 2 + self.d1,
        }
    }
}

/// Sampled invariance/growth report. Reports merge monoidally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeReport {
    pub pass_fraction: f64,
    pub worst_margin: f64,
    pub growth_min: f64,
    pub growth_max: f64,
    pub samples: usize,
}

impl ConeReport {
    pub fn merge(&self, other: &ConeReport) -> ConeReport {
        let total = self.samples + other.samples;
        ConeReport {
            pass_fraction: (self.pass_fraction * self.samples as f64
                + other.pass_fraction * other.samples as f64)
                / total as f64,
            worst_margin: self.worst_margin.min(other.worst_margin),
            growth_min: self.growth_min.min(other.growth_min),
            growth_max: self.growth_max.max(other.growth_max),
            samples: total,
        }
    }
}

/// Cross-form Jacobian `d(X', Y, Z') / d(X, Y', Z)` by central differences.
/// Valid only where every block is resolvable above the output rounding;
/// prefer [`cross_jacobian_exact`] for certification.
pub fn cross_jacobian(ret: &ReturnMap, k: u32, m: u32, args: &DVector<f64>, step: f64) -> Result<DMatrix<f64>> {
    let d1 = ret.model.d1;
    let dz = box_z_dim(&ret.model);
    let f = |p: &DVector<f64>| -> Result<DVector<f64>> {
        let x = p[0];
        let ybar: DVector<f64> = p.rows(1, d1).into();
        let z: DVector<f64> = p.rows(1 + d1, dz).into();
        let img = ret.cross_relaxed(k, m, x, &ybar, &z)?;
        let mut out = DVector::zeros(1 + d1 + dz);
        out[0] = img.xbar;
        out.rows_mut(1, d1).copy_from(&img.y);
        out.rows_mut(1 + d1, dz).copy_from(&img.zbar);
        Ok(out)
    };
    fd_jacobian(&f, args, step)
}

/// Cross-form Jacobian with the exponentially small blocks intact: analytic
/// tangent propagation where available (real and saddle-focus central
/// multipliers), finite differences otherwise.
pub fn cross_jacobian_exact(
    ret: &ReturnMap,
    k: u32,
    m: u32,
    args: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let d1 = ret.model.d1;
    let dz = box_z_dim(&ret.model);
    match ret.model.params.case {
        crate::model::MultiplierCase::DoubleFocus => cross_jacobian(ret, k, m, args, step),
        _ => crate::retmap::tangent::cross_jacobian_analytic_o1(
            &ret.model,
            k,
            m,
            args[0],
            &args.rows(1, d1).into_owned(),
            &args.rows(1 + d1, dz).into_owned(),
        ),
    }
}

struct CrossBlocks {
    xx: DMatrix<f64>,
    xy: DMatrix<f64>,
    xz: DMatrix<f64>,
    yx: DMatrix<f64>,
    yy: DMatrix<f64>,
    yz: DMatrix<f64>,
    zx: DMatrix<f64>,
    zy: DMatrix<f64>,
    zz: DMatrix<f64>,
}

fn blocks(j: &DMatrix<f64>, d1: usize, dz: usize) -> CrossBlocks {
    CrossBlocks {
        xx: j.view((0, 0), (1, 1)).into(),
        xy: j.view((0, 1), (1, d1)).into(),
        xz: j.view((0, 1 + d1), (1, dz)).into(),
        yx: j.view((1, 0), (d1, 1)).into(),
        yy: j.view((1, 1), (d1, d1)).into(),
        yz: j.view((1, 1 + d1), (d1, dz)).into(),
        zx: j.view((1 + d1, 0), (dz, 1)).into(),
        zy: j.view((1 + d1, 1), (dz, d1)).into(),
        zz: j.view((1 + d1, 1 + d1), (dz, dz)).into(),
    }
}

/// Forward tangent transport `v -> DT v` through the cross Jacobian.
pub fn transport_forward(
    j: &DMatrix<f64>,
    d1: usize,
    dz: usize,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let b = blocks(j, d1, dz);
    let vx = DVector::from_element(1, v[0]);
    let vy: DVector<f64> = v.rows(1, d1).into();
    let vz: DVector<f64> = v.rows(1 + d1, dz).into();
    let rhs = vy - &b.yx * &vx - &b.yz * &vz;
    let vbar_y = b
        .yy
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| BlabError::Precondition("singular Y block in cross Jacobian".into()))?;
    let vbar_x = &b.xx * &vx + &b.xy * &vbar_y + &b.xz * &vz;
    let vbar_z = &b.zx * &vx + &b.zy * &vbar_y + &b.zz * &vz;
    let mut out = DVector::zeros(1 + d1 + dz);
    out[0] = vbar_x[0];
    out.rows_mut(1, d1).copy_from(&vbar_y);
    out.rows_mut(1 + d1, dz).copy_from(&vbar_z);
    Ok(out)
}

/// Backward tangent transport `v' -> DT^{-1} v'`.
pub fn transport_backward(
    j: &DMatrix<f64>,
    d1: usize,
    dz: usize,
    vbar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let b = blocks(j, d1, dz);
    let vbar_x = DVector::from_element(1, vbar[0]);
    let vbar_y: DVector<f64> = vbar.rows(1, d1).into();
    let vbar_z: DVector<f64> = vbar.rows(1 + d1, dz).into();
    let n = 1 + dz;
    let mut sys = DMatrix::zeros(n, n);
    sys.view_mut((0, 0), (1, 1)).copy_from(&b.xx);
    sys.view_mut((0, 1), (1, dz)).copy_from(&b.xz);
    sys.view_mut((1, 0), (dz, 1)).copy_from(&b.zx);
    sys.view_mut((1, 1), (dz, dz)).copy_from(&b.zz);
    let mut rhs = DVector::zeros(n);
    rhs[0] = (&vbar_x - &b.xy * &vbar_y)[0];
    rhs.rows_mut(1, dz).copy_from(&(&vbar_z - &b.zy * &vbar_y));
    // Row-equilibrate: the Z rows live at an exponentially smaller scale.
    for r in 0..n {
        let s = sys.row(r).amax().max(1e-300);
        for c in 0..n {
            sys[(r, c)] /= s;
        }
        rhs[r] /= s;
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| BlabError::Precondition("singular (X,Z) block in cross Jacobian".into()))?;
    let vx = sol[0];
    let vz: DVector<f64> = sol.rows(1, dz).into();
    let vy = &b.yx * DVector::from_element(1, vx) + &b.yy * &vbar_y + &b.yz * &vz;
    let mut out = DVector::zeros(1 + d1 + dz);
    out[0] = vx;
    out.rows_mut(1, d1).copy_from(&vy);
    out.rows_mut(1 + d1, dz).copy_from(&vz);
    Ok(out)
}

/// Sampled invariance check: draws `(point, vector)` pairs from a Sobol
/// sequence over the box times the cone, transports each vector, and
/// reports the in-cone fraction, the worst margin, and the growth range
/// (always measured forward: image norm over preimage norm).
pub fn check_cone_invariance(
    ret: &ReturnMap,
    k: u32,
    m: u32,
    cone_in: &ConeSpec,
    cone_out: &ConeSpec,
    direction: TransportDirection,
    samples: usize,
    seed: u64,
) -> Result<ConeReport> {
    let model = &ret.model;
    let d1 = model.d1;
    let dz = box_z_dim(model);
    let d = 1 + d1 + dz;
    let delta = model.params.delta;
    let vec_dims = match direction {
        TransportDirection::Forward => cone_in.sample_dims(),
        TransportDirection::Backward => cone_out.sample_dims(),
    };
    let mut sobol = Sobol::new(d + vec_dims, seed);
    let step = 1e-6 * delta;
    let mut pass = 0usize;
    let mut used = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut growth_min = f64::INFINITY;
    let mut growth_max = f64::NEG_INFINITY;
    let mut failures = 0usize;
    while used < samples {
        let coords = sobol.next_point();
        let mut args = DVector::zeros(d);
        for i in 0..d {
            args[i] = (2.0 * coords[i] - 1.0) * delta * 0.98;
        }
        let j = match cross_jacobian_exact(ret, k, m, &args, step) {
            Ok(j) => j,
            Err(_) => {
                failures += 1;
                if failures > 10 * samples {
                    return Err(BlabError::NoSamples(
                        "return map never maps sampled points back to the box".into(),
                    ));
                }
                continue;
            }
        };
        let vcoords = &coords[d..];
        // Every eighth draw probes the cone axis exactly; the central growth
        // extremes are attained on that boundary ray.
        let axis_probe = used % 8 == 7;
        let (v_from, v_to, cone_check) = match direction {
            TransportDirection::Forward => {
                let v = if axis_probe {
                    cone_in.axis_vector()
                } else {
                    cone_in.sample_vector(vcoords)
                };
                let vbar = transport_forward(&j, d1, dz, &v)?;
                (v, vbar, cone_out)
            }
            TransportDirection::Backward => {
                let vbar = if axis_probe {
                    cone_out.axis_vector()
                } else {
                    cone_out.sample_vector(vcoords)
                };
                let v = transport_backward(&j, d1, dz, &vbar)?;
                (v, vbar, cone_in)
            }
        };
        let (checked, growth) = match direction {
            TransportDirection::Forward => (&v_to, v_to.norm() / v_from.norm()),
            TransportDirection::Backward => (&v_from, v_to.norm() / v_from.norm()),
        };
        let ratio = cone_check.ratio(checked);
        let margin = 1.0 - ratio;
        if ratio <= 1.0 {
            pass += 1;
        }
        worst_margin = worst_margin.min(margin);
        growth_min = growth_min.min(growth);
        growth_max = growth_max.max(growth);
        used += 1;
    }
    Ok(ConeReport {
        pass_fraction: pass as f64 / samples as f64,
        worst_margin,
        growth_min,
        growth_max,
        samples,
    })
}
