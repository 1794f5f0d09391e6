//! The two local first-return maps `F1` (near `O1`) and `F2` (near `O2`).
//!
//! Both are block maps: a central scaling/rotation, strong linear blocks, and
//! polynomial tails chosen so that the local invariant manifolds are exactly
//! straight for every tail coefficient:
//!
//! ```text
//! F1: x' = L1 x + c_g |x|^2 y_1 * 1,   y' = P1 y + c_g |x|^2 y,   z' = P2 z + c_g |x|^2 y_1 * 1
//! F2: u' = L2 u + c_g |u|^2 v_1 * 1,   v' = Q1 v + c_g |u|^2 v,   w' = Q2 w + c_g |u|^2 v_1 * 1
//! ```
//!
//! The tails vanish on `{y=0}` / `{v=0}` and on `{x=0}` / `{u=0}`, and their
//! central `x`-derivative vanishes on the unstable manifold, so
//! `W^s_loc(O1) = {y=0}`, `W^u_loc(O1) = {x=0, z=0}`, `W^u_loc(O2) = {v=0}`,
//! `W^s_loc(O2) = {u=0, w=0}` hold exactly, and the restriction of each map to
//! its central invariant manifold is exactly linear.

use nalgebra::{DMatrix, DVector};

use crate::error::{BlabError, Result};
use crate::model::Model;

/// A point in the chart near `O1`.
#[derive(Debug, Clone, PartialEq)]
pub struct O1Point {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

/// A point in the chart near `O2`.
#[derive(Debug, Clone, PartialEq)]
pub struct O2Point {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

impl O1Point {
    pub fn zero(model: &Model) -> Self {
        O1Point {
            x: DVector::zeros(model.d_cs),
            y: DVector::zeros(model.d1),
            z: DVector::zeros(model.dz),
        }
    }

    pub fn as_vec(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.x.len() + self.y.len() + self.z.len());
        out.rows_mut(0, self.x.len()).copy_from(&self.x);
        out.rows_mut(self.x.len(), self.y.len()).copy_from(&self.y);
        out.rows_mut(self.x.len() + self.y.len(), self.z.len()).copy_from(&self.z);
        out
    }

    pub fn from_vec(model: &Model, v: &DVector<f64>) -> Self {
        O1Point {
            x: v.rows(0, model.d_cs).into(),
            y: v.rows(model.d_cs, model.d1).into(),
            z: v.rows(model.d_cs + model.d1, model.dz).into(),
        }
    }
}

impl O2Point {
    pub fn zero(model: &Model) -> Self {
        O2Point {
            u: DVector::zeros(model.d_cu),
            v: DVector::zeros(model.dv),
            w: DVector::zeros(model.dw),
        }
    }

    pub fn as_vec(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.u.len() + self.v.len() + self.w.len());
        out.rows_mut(0, self.u.len()).copy_from(&self.u);
        out.rows_mut(self.u.len(), self.v.len()).copy_from(&self.v);
        out.rows_mut(self.u.len() + self.v.len(), self.w.len()).copy_from(&self.w);
        out
    }

    pub fn from_vec(model: &Model, v: &DVector<f64>) -> Self {
        O2Point {
            u: v.rows(0, model.d_cu).into(),
            v: v.rows(model.d_cu, model.dv).into(),
            w: v.rows(model.d_cu + model.dv, model.dw).into(),
        }
    }
}

/// Rotation-scaling matrix acting on a central block: `s * I` for dimension 1,
/// `s * R(omega)` for dimension 2 with `R = [[cos, sin], [-sin, cos]]`.
pub fn central_block(scale: f64, omega: Option<f64>, dim: usize) -> DMatrix<f64> {
    match dim {
        1 => DMatrix::from_element(1, 1, scale),
        2 => {
            let w = omega.expect("rotation angle required for a 2d central block");
            DMatrix::from_row_slice(2, 2, &[
                scale * w.cos(),
                scale * w.sin(),
                -scale * w.sin(),
                scale * w.cos(),
            ])
        }
        _ => unreachable!("central blocks have dimension 1 or 2"),
    }
}

impl Model {
    /// One application of the local map near `O1`.
    pub fn f1(&self, p: &O1Point) -> Result<O1Point> {
        self.check_o1_dims(p)?;
        let c = self.params.tails.c_g;
        let x2 = p.x.norm_squared();
        let y1 = if p.y.is_empty() { 0.0 } else { p.y[0] };
        let tail = c * x2 * y1;
        let x = &self.l1 * &p.x + DVector::from_element(self.d_cs, tail);
        let y = &self.p1 * &p.y + &p.y * (c * x2);
        let z = &self.p2 * &p.z + DVector::from_element(self.dz, tail);
        Ok(O1Point { x, y, z })
    }

    /// One application of the local map near `O2`.
    pub fn f2(&self, p: &O2Point) -> Result<O2Point> {
        self.check_o2_dims(p)?;
        let c = self.params.tails.c_g;
        let u2 = p.u.norm_squared();
        let v1 = if p.v.is_empty() { 0.0 } else { p.v[0] };
        let tail = c * u2 * v1;
        let u = &self.l2 * &p.u + DVector::from_element(self.d_cu, tail);
        let v = &self.q1 * &p.v + &p.v * (c * u2);
        let w = &self.q2 * &p.w + DVector::from_element(self.dw, tail);
        Ok(O2Point { u, v, w })
    }

    /// Jacobian of `f1` at `p`, blocks ordered `(x, y, z)`.
    pub fn f1_jacobian(&self, p: &O1Point) -> DMatrix<f64> {
        let c = self.params.tails.c_g;
        let d = self.params.d;
        let (nx, ny, nz) = (self.d_cs, self.d1, self.dz);
        let x2 = p.x.norm_squared();
        let y1 = if ny == 0 { 0.0 } else { p.y[0] };
        let mut j = DMatrix::zeros(d, d);
        j.view_mut((0, 0), (nx, nx)).copy_from(&self.l1);
        for i in 0..nx {
            for k in 0..nx {
                j[(i, k)] += 2.0 * c * p.x[k] * y1;
            }
            if ny > 0 {
                j[(i, nx)] += c * x2;
            }
        }
        for i in 0..ny {
            for k in 0..nx {
                j[(nx + i, k)] = 2.0 * c * p.x[k] * p.y[i];
            }
            for k in 0..ny {
                j[(nx + i, nx + k)] = self.p1[(i, k)] + if i == k { c * x2 } else { 0.0 };
            }
        }
        for i in 0..nz {
            for k in 0..nx {
                j[(nx + ny + i, k)] = 2.0 * c * p.x[k] * y1;
            }
            if ny > 0 {
                j[(nx + ny + i, nx)] = c * x2;
            }
            for k in 0..nz {
                j[(nx + ny + i, nx + ny + k)] = self.p2[(i, k)];
            }
        }
        j
    }

    /// Jacobian of `f2` at `p`, blocks ordered `(u, v, w)`.
    pub fn f2_jacobian(&self, p: &O2Point) -> DMatrix<f64> {
        let c = self.params.tails.c_g;
        let d = self.params.d;
        let (nu, nv, nw) = (self.d_cu, self.dv, self.dw);
        let u2 = p.u.norm_squared();
        let v1 = if nv == 0 { 0.0 } else { p.v[0] };
        let mut j = DMatrix::zeros(d, d);
        j.view_mut((0, 0), (nu, nu)).copy_from(&self.l2);
        for i in 0..nu {
            for k in 0..nu {
                j[(i, k)] += 2.0 * c * p.u[k] * v1;
            }
            if nv > 0 {
                j[(i, nu)] += c * u2;
            }
        }
        for i in 0..nv {
            for k in 0..nu {
                j[(nu + i, k)] = 2.0 * c * p.u[k] * p.v[i];
            }
            for k in 0..nv {
                j[(nu + i, nu + k)] = self.q1[(i, k)] + if i == k { c * u2 } else { 0.0 };
            }
        }
        for i in 0..nw {
            for k in 0..nu {
                j[(nu + nv + i, k)] = 2.0 * c * p.u[k] * v1;
            }
            if nv > 0 {
                j[(nu + nv + i, nu)] = c * u2;
            }
            for k in 0..nw {
                j[(nu + nv + i, nu + nv + k)] = self.q2[(i, k)];
            }
        }
        j
    }

    /// Newton inverse of `f1`: the point `p` with `f1(p) = target`.
    pub fn f1_inverse(&self, target: &O1Point) -> Result<O1Point> {
        let mut p = O1Point {
            x: &self.l1_inv * &target.x,
            y: &self.p1_inv * &target.y,
            z: &self.p2_inv * &target.z,
        };
        for _ in 0..60 {
            let img = self.f1(&p)?;
            let res = img.as_vec() - target.as_vec();
            if res.amax() < 1e-14 {
                return Ok(p);
            }
            let j = self.f1_jacobian(&p);
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F1 Jacobian".into()))?;
            let v = p.as_vec() - step;
            p = O1Point::from_vec(self, &v);
        }
        Err(BlabError::NoConvergence { iterations: 60, residual: f64::NAN })
    }

    /// Newton inverse of `f2`.
    pub fn f2_inverse(&self, target: &O2Point) -> Result<O2Point> {
        let mut p = O2Point {
            u: &self.l2_inv * &target.u,
            v: &self.q1_inv * &target.v,
            w: &self.q2_inv * &target.w,
        };
        for _ in 0..60 {
            let img = self.f2(&p)?;
            let res = img.as_vec() - target.as_vec();
            if res.amax() < 1e-14 {
                return Ok(p);
            }
            let j = self.f2_jacobian(&p);
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F2 Jacobian".into()))?;
            let v = p.as_vec() - step;
            p = O2Point::from_vec(self, &v);
        }
        Err(BlabError::NoConvergence { iterations: 60, residual: f64::NAN })
    }

    fn check_o1_dims(&self, p: &O1Point) -> Result<()> {
        if p.x.len() != self.d_cs || p.y.len() != self.d1 || p.z.len() != self.dz {
            return Err(BlabError::DimensionMismatch {
                what: "O1 point",
                expected: self.params.d,
                got: p.x.len() + p.y.len() + p.z.len(),
            });
        }
        Ok(())
    }

    fn check_o2_dims(&self, p: &O2Point) -> Result<()> {
        if p.u.len() != self.d_cu || p.v.len() != self.dv || p.w.len() != self.dw {
            return Err(BlabError::DimensionMismatch {
                what: "O2 point",
                expected: self.params.d,
                got: p.u.len() + p.v.len() + p.w.len(),
            });
        }
        Ok(())
    }
}
