//! Box coordinates for the return domain `Pi`.
//!
//! In every multiplier case the box coordinates have the same shape: a scalar
//! central coordinate `X`, a `d1`-dimensional `Y` block, and a
//! `(d - d1 - 1)`-dimensional `Z` block, with
//! `Pi = [-delta, delta] x [-delta, delta]^{d1} x [-delta, delta]^{d-d1-1}`.
//!
//! For the saddle and saddle-focus cases the box sits at `M1+`; `{Y = 0}` is
//! `W^s_loc(O1)` and `{Z = 0}` is the image `F21(W^u_loc(O2))`, straightened
//! exactly by subtracting the graph of that image. In the saddle-focus case
//! the second central coordinate is folded into the `Z` block with a
//! `delta^{-1/2}` rescale. In the double-focus case the box sits at `M2-`
//! with `Y = (U2, W)` and `Z = V` (again with `delta^{1/2}` scalings on the
//! second central coordinate and on `v`).

use nalgebra::DVector;

use crate::error::{BlabError, Result};
use crate::model::{Model, MultiplierCase, O1Point, O2Point};

/// A point of the return box in `(X, Y, Z)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPoint {
    pub x: f64,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl BoxPoint {
    pub fn origin(model: &Model) -> Self {
        BoxPoint {
            x: 0.0,
            y: DVector::zeros(model.d1),
            z: DVector::zeros(box_z_dim(model)),
        }
    }

    pub fn sup_distance(&self, other: &BoxPoint) -> f64 {
        let mut d = (self.x - other.x).abs();
        if self.y.len() > 0 {
            d = d.max((&self.y - &other.y).amax());
        }
        if self.z.len() > 0 {
            d = d.max((&self.z - &other.z).amax());
        }
        d
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_distance(&BoxPoint {
            x: 0.0,
            y: DVector::zeros(self.y.len()),
            z: DVector::zeros(self.z.len()),
        })
    }
}

/// Dimension of the box `Z` block (strong-stable block plus, in the focus
/// cases, the folded second central coordinate).
pub fn box_z_dim(model: &Model) -> usize {
    model.params.d - model.params.d1 - 1
}

/// Check `(x, y, z)` against the box bounds, with a small tolerance.
pub fn check_in_box(model: &Model, p: &BoxPoint, tol: f64) -> Result<()> {
    let delta = model.params.delta;
    let bound = delta + tol;
    if p.x.abs() > bound {
        return Err(BlabError::BoxViolation { coord: "X", value: p.x.abs(), bound: delta });
    }
    if p.y.len() > 0 && p.y.amax() > bound {
        return Err(BlabError::BoxViolation { coord: "Y", value: p.y.amax(), bound: delta });
    }
    if p.z.len() > 0 && p.z.amax() > bound {
        return Err(BlabError::BoxViolation { coord: "Z", value: p.z.amax(), bound: delta });
    }
    Ok(())
}

/// Graph of `F21(W^u_loc(O2))` over the central coordinate and `y`: returns
/// the remaining coordinates (`z`, plus `x2` in the focus cases) of the point
/// of that surface with the given `x1` and `y`.
pub(crate) struct WuImageGraph {
    /// `x2` value (focus cases only).
    pub x2: f64,
    pub z: DVector<f64>,
    /// The parameter `u~1 - u1-` realizing the graph point.
    pub du: f64,
}

pub(crate) fn wu_image_graph(model: &Model, x1: f64, y: &DVector<f64>) -> Result<WuImageGraph> {
    let c = model.params.tails.c_t;
    let b11 = model.b_x[(0, 0)];
    // eta = (du, 0, y); solve the first x-row for du.
    let b13_dot = model.b_x.row(0).columns(1 + model.dv, model.d1).transpose().dot(y);
    let y_sq = y.norm_squared();
    let target = x1 - model.x_plus[0];
    let mut du = (target - b13_dot) / b11;
    if c != 0.0 {
        for it in 0..80 {
            let r = b11 * du + b13_dot + c * (du * du + y_sq) - target;
            if r.abs() < 1e-15 {
                break;
            }
            let dr = b11 + 2.0 * c * du;
            if dr == 0.0 {
                return Err(BlabError::Precondition("degenerate graph slope".into()));
            }
            du -= r / dr;
            if it == 79 {
                return Err(BlabError::NoConvergence { iterations: 80, residual: r.abs() });
            }
        }
    }
    let mut eta = DVector::zeros(model.params.d);
    eta[0] = du;
    for i in 0..model.d1 {
        eta[1 + model.dv + i] = y[i];
    }
    let t = c * eta.norm_squared();
    let x2 = if model.d_cs == 2 {
        model.x_plus[1] + model.b_x.row(1).transpose().dot(&eta) + t
    } else {
        0.0
    };
    let z = &model.z_plus + &model.b_z * &eta + DVector::from_element(model.dz, t);
    Ok(WuImageGraph { x2, z, du })
}

/// Box point to model coordinates (`O1` chart for the saddle and
/// saddle-focus cases, `O2` chart for the double-focus case).
pub fn box_to_o1(model: &Model, p: &BoxPoint) -> Result<O1Point> {
    debug_assert_ne!(model.params.case, MultiplierCase::DoubleFocus);
    let b13_dot = model.b_x.row(0).columns(1 + model.dv, model.d1).transpose().dot(&p.y);
    let x1 = model.x_plus[0] + p.x + b13_dot;
    let graph = wu_image_graph(model, x1, &p.y)?;
    let sqrt_delta = model.params.delta.sqrt();
    let (x, z) = if model.d_cs == 2 {
        let x2 = graph.x2 + sqrt_delta * p.z[0];
        let z = graph.z + p.z.rows(1, model.dz);
        (DVector::from_vec(vec![x1, x2]), z)
    } else {
        (DVector::from_element(1, x1), graph.z + &p.z)
    };
    Ok(O1Point { x, y: p.y.clone(), z })
}

pub fn o1_to_box(model: &Model, p: &O1Point) -> Result<BoxPoint> {
    debug_assert_ne!(model.params.case, MultiplierCase::DoubleFocus);
    let b13_dot = model.b_x.row(0).columns(1 + model.dv, model.d1).transpose().dot(&p.y);
    let x = p.x[0] - model.x_plus[0] - b13_dot;
    let graph = wu_image_graph(model, p.x[0], &p.y)?;
    let sqrt_delta = model.params.delta.sqrt();
    let z = if model.d_cs == 2 {
        let mut z = DVector::zeros(1 + model.dz);
        z[0] = (p.x[1] - graph.x2) / sqrt_delta;
        z.rows_mut(1, model.dz).copy_from(&(&p.z - &graph.z));
        z
    } else {
        &p.z - &graph.z
    };
    Ok(BoxPoint { x, y: p.y.clone(), z })
}

/// Double-focus box point to the `O2` chart.
pub fn box_to_o2(model: &Model, p: &BoxPoint) -> Result<O2Point> {
    debug_assert_eq!(model.params.case, MultiplierCase::DoubleFocus);
    let sqrt_delta = model.params.delta.sqrt();
    let x = p.x;
    let vtil = sqrt_delta * &p.z;
    let b41 = model.b_s[(0, 0)];
    let b42_dot = model.b_s.row(0).columns(1, model.dv).transpose().dot(&vtil);
    let u2 = model.u_minus[1] + sqrt_delta * p.y[0] + b41 * x + b42_dot;
    let mut w = DVector::zeros(model.dw);
    for i in 0..model.dw {
        let b5_row = model.b_s.row(1 + i);
        let b51 = b5_row[0];
        let b52_dot = b5_row.columns(1, model.dv).transpose().dot(&vtil);
        w[i] = model.w_minus[i] + p.y[1 + i] + b51 * x + b52_dot;
    }
    Ok(O2Point {
        u: DVector::from_vec(vec![model.u_minus[0] + x, u2]),
        v: vtil,
        w,
    })
}

pub fn o2_to_box(model: &Model, p: &O2Point) -> Result<BoxPoint> {
    debug_assert_eq!(model.params.case, MultiplierCase::DoubleFocus);
    let sqrt_delta = model.params.delta.sqrt();
    let x = p.u[0] - model.u_minus[0];
    let b41 = model.b_s[(0, 0)];
    let b42_dot = model.b_s.row(0).columns(1, model.dv).transpose().dot(&p.v);
    let mut y = DVector::zeros(model.d1);
    y[0] = (p.u[1] - model.u_minus[1] - b41 * x - b42_dot) / sqrt_delta;
    for i in 0..model.dw {
        let b5_row = model.b_s.row(1 + i);
        let b51 = b5_row[0];
        let b52_dot = b5_row.columns(1, model.dv).transpose().dot(&p.v);
        y[1 + i] = p.w[i] - model.w_minus[i] - b51 * x - b52_dot;
    }
    Ok(BoxPoint { x, y, z: &p.v / sqrt_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref_df, ref_sf};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn box_transforms_round_trip() {
        for params in [ref1(), ref_sf(), ref_df()] {
            let mut params = params;
            params.tails.c_t = 0.02;
            let model = Model::new(&params).unwrap();
            let mut rng = StdRng::seed_from_u64(3);
            for _ in 0..200 {
                let p = BoxPoint {
                    x: rng.random_range(-0.1..0.1),
                    y: DVector::from_fn(model.d1, |_, _| rng.random_range(-0.1..0.1)),
                    z: DVector::from_fn(box_z_dim(&model), |_, _| rng.random_range(-0.1..0.1)),
                };
                let back = match params.case {
                    MultiplierCase::DoubleFocus => {
                        o2_to_box(&model, &box_to_o2(&model, &p).unwrap()).unwrap()
                    }
                    _ => o1_to_box(&model, &box_to_o1(&model, &p).unwrap()).unwrap(),
                };
                assert!(back.sup_distance(&p) < 1e-12, "{:?} vs {:?}", p, back);
            }
        }
    }

    #[test]
    fn origin_maps_to_m1_plus() {
        let model = Model::new(&ref1()).unwrap();
        let p = box_to_o1(&model, &BoxPoint::origin(&model)).unwrap();
        assert!((p.as_vec() - model.m1_plus().as_vec()).amax() < 1e-14);
    }

    #[test]
    fn df_origin_maps_to_m2_minus() {
        let model = Model::new(&ref_df()).unwrap();
        let p = box_to_o2(&model, &BoxPoint::origin(&model)).unwrap();
        assert!((p.as_vec() - model.m2_minus().as_vec()).amax() < 1e-14);
    }
}
