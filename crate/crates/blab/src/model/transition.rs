//! The transition maps `F12` (neighborhood of `M1-` to neighborhood of `M2+`)
//! and `F21` (neighborhood of `M2-` to neighborhood of `M1+`).
//!
//! Both are defined directly by their cross-form relations, which therefore
//! hold exactly for the model. For `F12` the cross arguments are
//! `xi = (x~, s, z~)` where `s` is the "solved" block (`w` in the saddle and
//! saddle-focus cases, `(u2, w)` in the double-focus case), and the relations
//! read, with `t(xi) = c_t * |xi|^2`,
//!
//! ```text
//! u1        = mu + A_u.xi + t(xi)
//! v  - v+   =      A_v.xi + t(xi) * 1
//! y~ - y-   =      A_y.xi + t(xi) * 1
//! ```
//!
//! `A_u`, `A_v`, `A_y` are the row blocks of the cross coefficient matrix
//! `a_ij` (rows ordered `u1, v, y~`; columns ordered `x~, s, z~`). For `F21`
//! the arguments are `eta = (u~1 - u1-, v~, y)` and the rows `x - x+`,
//! `S` (the solved block `w~ - w-`, resp. `(u~2 - u2-, w~ - w-)`), `z - z+`
//! are the row blocks `B_x`, `B_s`, `B_z` of `b_ij`.
//!
//! Evaluating a transition as a point map solves the relevant rows for the
//! solved block by Newton iteration; with `c_t = 0` everything is affine and
//! a single linear solve is exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{BlabError, Result};
use crate::model::local::{O1Point, O2Point};
use crate::model::Model;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_CAP: usize = 60;

fn stack3(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len() + c.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out.rows_mut(a.len() + b.len(), c.len()).copy_from(c);
    out
}

impl Model {
    /// Split of the `F12` solved block into `O2` coordinates: `(u2-part, w)`.
    fn split_f12_solved(&self, u1: f64, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        if self.d_cu == 2 {
            let u = DVector::from_vec(vec![u1, s[0]]);
            (u, s.rows(1, s.len() - 1).into())
        } else {
            (DVector::from_element(1, u1), s.clone())
        }
    }

    /// `F12` cross rows evaluated at `xi`, returning `(u1, v, y~)`.
    fn f12_rows(&self, xi: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        let t = self.params.tails.c_t * xi.norm_squared();
        let u1 = self.params.mu + (&self.a_u * xi)[0] + t;
        let v = &self.v_plus + &self.a_v * xi + DVector::from_element(self.dv, t);
        let ytil = &self.y_minus + &self.a_y * xi + DVector::from_element(self.d1, t);
        (u1, v, ytil)
    }

    /// `F21` cross rows evaluated at `eta`, returning `(x, S, z)` where `S`
    /// is the solved-block deviation.
    fn f21_rows(&self, eta: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let t = self.params.tails.c_t * eta.norm_squared();
        let x = &self.x_plus + &self.b_x * eta + DVector::from_element(self.d_cs, t);
        let s = &self.b_s * eta + DVector::from_element(self.d1, t);
        let z = &self.z_plus + &self.b_z * eta + DVector::from_element(self.dz, t);
        (x, s, z)
    }

    /// Forward transition `F12` as a point map.
    pub fn f12(&self, p: &O1Point) -> Result<O2Point> {
        let s = self.f12_solve_s(&p.x, &p.y, &p.z)?;
        let xi = stack3(&p.x, &s, &p.z);
        let (u1, v, _) = self.f12_rows(&xi);
        let (u, w) = self.split_f12_solved(u1, &s);
        Ok(O2Point { u, v, w })
    }

    /// Solve the `y~`-rows of the `F12` cross form for the solved block `s`.
    pub(crate) fn f12_solve_s(
        &self,
        xtil: &DVector<f64>,
        ytil: &DVector<f64>,
        ztil: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let c = self.params.tails.c_t;
        let mut s = DVector::zeros(self.d1);
        // Affine seed: A_y_s * s = ytil - y- - A_y_x x~ - A_y_z z~.
        let rhs0 = ytil - &self.y_minus
            - &self.a_y_x * xtil
            - &self.a_y_z * ztil;
        s = self
            .a_y_s_lu
            .solve(&rhs0)
            .ok_or_else(|| BlabError::Precondition("solved block of a_ij is singular".into()))?;
        if c == 0.0 {
            return Ok(s);
        }
        for _ in 0..NEWTON_CAP {
            let xi = stack3(xtil, &s, ztil);
            let (_, _, yt) = self.f12_rows(&xi);
            let res = yt - ytil;
            if res.amax() < NEWTON_TOL {
                return Ok(s);
            }
            // d(res)/ds = A_y_s + 2 c_t * 1 s^T
            let mut j = self.a_y_s.clone();
            for i in 0..self.d1 {
                for k in 0..self.d1 {
                    j[(i, k)] += 2.0 * c * s[k];
                }
            }
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F12 Newton system".into()))?;
            s -= step;
        }
        Err(BlabError::NoConvergence { iterations: NEWTON_CAP, residual: f64::NAN })
    }

    /// Forward transition `F21` as a point map.
    pub fn f21(&self, p: &O2Point) -> Result<O1Point> {
        let du = p.u[0] - self.u_minus[0];
        let starget = self.f21_solved_target(p);
        let y = self.f21_solve_y(du, &p.v, &starget)?;
        let eta = stack3(&DVector::from_element(1, du), &p.v, &y);
        let (x, _, z) = self.f21_rows(&eta);
        Ok(O1Point { x, y, z })
    }

    /// Deviation of the `F21` solved block for an input point:
    /// `w~ - w-`, or `(u~2 - u2-, w~ - w-)` in the double-focus case.
    pub(crate) fn f21_solved_target(&self, p: &O2Point) -> DVector<f64> {
        if self.d_cu == 2 {
            let mut t = DVector::zeros(self.d1);
            t[0] = p.u[1] - self.u_minus[1];
            t.rows_mut(1, self.dw).copy_from(&(&p.w - &self.w_minus));
            t
        } else {
            &p.w - &self.w_minus
        }
    }

    /// Solve the solved-block rows of the `F21` cross form for `y`.
    pub(crate) fn f21_solve_y(
        &self,
        du: f64,
        vtil: &DVector<f64>,
        starget: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let c = self.params.tails.c_t;
        let du_v = DVector::from_element(1, du);
        let rhs0 = starget - &self.b_s_u * &du_v - &self.b_s_v * vtil;
        let mut y = self
            .b_s_y_lu
            .solve(&rhs0)
            .ok_or_else(|| BlabError::Precondition("solved block of b_ij is singular".into()))?;
        if c == 0.0 {
            return Ok(y);
        }
        for _ in 0..NEWTON_CAP {
            let eta = stack3(&du_v, vtil, &y);
            let (_, s, _) = self.f21_rows(&eta);
            let res = s - starget;
            if res.amax() < NEWTON_TOL {
                return Ok(y);
            }
            let mut j = self.b_s_y.clone();
            for i in 0..self.d1 {
                for k in 0..self.d1 {
                    j[(i, k)] += 2.0 * c * y[k];
                }
            }
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F21 Newton system".into()))?;
            y -= step;
        }
        Err(BlabError::NoConvergence { iterations: NEWTON_CAP, residual: f64::NAN })
    }

    /// Inverse of `F12`: recover `(x~, y~, z~)` from an `O2` point.
    pub fn f12_inverse(&self, p: &O2Point) -> Result<O1Point> {
        let u1 = p.u[0];
        let s = if self.d_cu == 2 {
            let mut s = DVector::zeros(self.d1);
            s[0] = p.u[1];
            s.rows_mut(1, self.dw).copy_from(&p.w);
            s
        } else {
            p.w.clone()
        };
        // Unknowns (x~, z~) from the u1-row and v-rows.
        let n = self.d_cs + self.dz;
        let mut xz = DVector::zeros(n);
        for it in 0..NEWTON_CAP + 1 {
            let xtil: DVector<f64> = xz.rows(0, self.d_cs).into();
            let ztil: DVector<f64> = xz.rows(self.d_cs, self.dz).into();
            let xi = stack3(&xtil, &s, &ztil);
            let (u1_val, v_val, ytil) = self.f12_rows(&xi);
            let mut res = DVector::zeros(n);
            res[0] = u1_val - u1;
            res.rows_mut(1, self.dv).copy_from(&(v_val - &p.v));
            if res.amax() < NEWTON_TOL {
                return Ok(O1Point { x: xtil, y: ytil, z: ztil });
            }
            if it == NEWTON_CAP {
                break;
            }
            let mut j = DMatrix::zeros(n, n);
            let c = self.params.tails.c_t;
            for (row_out, row_in) in (0..1).chain(0..self.dv).enumerate() {
                let a_row = if row_out == 0 {
                    self.a_u.row(0)
                } else {
                    self.a_v.row(row_in)
                };
                for col in 0..self.d_cs {
                    j[(row_out, col)] = a_row[col] + 2.0 * c * xi[col];
                }
                for col in 0..self.dz {
                    let xi_idx = self.d_cs + self.d1 + col;
                    j[(row_out, self.d_cs + col)] = a_row[xi_idx] + 2.0 * c * xi[xi_idx];
                }
            }
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F12 inverse system".into()))?;
            xz -= step;
        }
        Err(BlabError::NoConvergence { iterations: NEWTON_CAP, residual: f64::NAN })
    }

    /// Inverse of `F21`: recover `(u~, v~, w~)` from an `O1` point.
    pub fn f21_inverse(&self, p: &O1Point) -> Result<O2Point> {
        // Unknowns (du, v~) from the x-rows and z-rows.
        let n = 1 + self.dv;
        let mut dv_un = DVector::zeros(n);
        for it in 0..NEWTON_CAP + 1 {
            let du = dv_un[0];
            let vtil: DVector<f64> = dv_un.rows(1, self.dv).into();
            let eta = stack3(&DVector::from_element(1, du), &vtil, &p.y);
            let (x_val, s_val, z_val) = self.f21_rows(&eta);
            let mut res = DVector::zeros(n);
            res.rows_mut(0, self.d_cs).copy_from(&(&x_val - &p.x));
            res.rows_mut(self.d_cs, self.dz).copy_from(&(&z_val - &p.z));
            if res.amax() < NEWTON_TOL {
                let u = if self.d_cu == 2 {
                    DVector::from_vec(vec![self.u_minus[0] + du, self.u_minus[1] + s_val[0]])
                } else {
                    DVector::from_element(1, self.u_minus[0] + du)
                };
                let w = if self.d_cu == 2 {
                    &self.w_minus + s_val.rows(1, self.dw)
                } else {
                    &self.w_minus + s_val
                };
                return Ok(O2Point { u, v: vtil, w });
            }
            if it == NEWTON_CAP {
                break;
            }
            let c = self.params.tails.c_t;
            let mut j = DMatrix::zeros(n, n);
            for row_out in 0..self.d_cs + self.dz {
                let b_row = if row_out < self.d_cs {
                    self.b_x.row(row_out)
                } else {
                    self.b_z.row(row_out - self.d_cs)
                };
                j[(row_out, 0)] = b_row[0] + 2.0 * c * eta[0];
                for col in 0..self.dv {
                    j[(row_out, 1 + col)] = b_row[1 + col] + 2.0 * c * eta[1 + col];
                }
            }
            let step = j
                .lu()
                .solve(&res)
                .ok_or_else(|| BlabError::Precondition("singular F21 inverse system".into()))?;
            dv_un -= step;
        }
        Err(BlabError::NoConvergence { iterations: NEWTON_CAP, residual: f64::NAN })
    }

    /// Jacobian of the forward map `F12` at `p`, via the implicit function
    /// theorem on the cross rows. Blocks ordered `(u, v, w)` x `(x~, y~, z~)`.
    pub fn f12_jacobian(&self, p: &O1Point) -> Result<DMatrix<f64>> {
        let s = self.f12_solve_s(&p.x, &p.y, &p.z)?;
        let xi = stack3(&p.x, &s, &p.z);
        let c = self.params.tails.c_t;
        let d = self.params.d;
        // M_row = A_row + 2 c_t 1 xi^T for each row block.
        let m = |a: &DMatrix<f64>| -> DMatrix<f64> {
            let mut out = a.clone();
            for i in 0..out.nrows() {
                for k in 0..d {
                    out[(i, k)] += 2.0 * c * xi[k];
                }
            }
            out
        };
        let mu_ = m(&self.a_u);
        let mv = m(&self.a_v);
        let my = m(&self.a_y);
        // ds = My_s^{-1} (dy~ - My_x dx~ - My_z dz~)
        let my_s: DMatrix<f64> = my.columns(self.d_cs, self.d1).into();
        let my_s_inv = my_s
            .try_inverse()
            .ok_or_else(|| BlabError::Precondition("singular F12 solved block".into()))?;
        let my_x: DMatrix<f64> = my.columns(0, self.d_cs).into();
        let my_z: DMatrix<f64> = my.columns(self.d_cs + self.d1, self.dz).into();
        // Rows of ds as a function of the input (x~, y~, z~).
        let mut ds = DMatrix::zeros(self.d1, d);
        ds.view_mut((0, 0), (self.d1, self.d_cs)).copy_from(&(-&my_s_inv * &my_x));
        ds.view_mut((0, self.d_cs), (self.d1, self.d1)).copy_from(&my_s_inv);
        ds.view_mut((0, self.d_cs + self.d1), (self.d1, self.dz))
            .copy_from(&(-&my_s_inv * &my_z));
        let dxi = {
            let mut dxi = DMatrix::zeros(d, d);
            for i in 0..self.d_cs {
                dxi[(i, i)] = 1.0;
            }
            dxi.view_mut((self.d_cs, 0), (self.d1, d)).copy_from(&ds);
            for i in 0..self.dz {
                dxi[(self.d_cs + self.d1 + i, self.d_cs + self.d1 + i)] = 1.0;
            }
            dxi
        };
        let du1 = mu_ * &dxi;
        let dv = mv * &dxi;
        let mut j = DMatrix::zeros(d, d);
        // Output order (u, v, w); u = (u1, s[0]) and w = s[1..] in the
        // double-focus case, else u = u1 and w = s.
        j.view_mut((0, 0), (1, d)).copy_from(&du1.rows(0, 1));
        if self.d_cu == 2 {
            j.view_mut((1, 0), (1, d)).copy_from(&ds.rows(0, 1));
            j.view_mut((self.d_cu, 0), (self.dv, d)).copy_from(&dv);
            j.view_mut((self.d_cu + self.dv, 0), (self.dw, d)).copy_from(&ds.rows(1, self.dw));
        } else {
            j.view_mut((1, 0), (self.dv, d)).copy_from(&dv);
            j.view_mut((1 + self.dv, 0), (self.dw, d)).copy_from(&ds);
        }
        Ok(j)
    }

    /// Jacobian of the forward map `F21` at `p`, blocks `(x, y, z)` x `(u~, v~, w~)`.
    pub fn f21_jacobian(&self, p: &O2Point) -> Result<DMatrix<f64>> {
        let du = p.u[0] - self.u_minus[0];
        let starget = self.f21_solved_target(p);
        let y = self.f21_solve_y(du, &p.v, &starget)?;
        let eta = stack3(&DVector::from_element(1, du), &p.v, &y);
        let c = self.params.tails.c_t;
        let d = self.params.d;
        let m = |b: &DMatrix<f64>| -> DMatrix<f64> {
            let mut out = b.clone();
            for i in 0..out.nrows() {
                for k in 0..d {
                    out[(i, k)] += 2.0 * c * eta[k];
                }
            }
            out
        };
        let mx = m(&self.b_x);
        let ms = m(&self.b_s);
        let mz = m(&self.b_z);
        let ms_y: DMatrix<f64> = ms.columns(1 + self.dv, self.d1).into();
        let ms_y_inv = ms_y
            .try_inverse()
            .ok_or_else(|| BlabError::Precondition("singular F21 solved block".into()))?;
        let ms_u: DMatrix<f64> = ms.columns(0, 1).into();
        let ms_v: DMatrix<f64> = ms.columns(1, self.dv).into();
        // dS-target as a function of the input (u~, v~, w~).
        let mut dst = DMatrix::zeros(self.d1, d);
        if self.d_cu == 2 {
            dst[(0, 1)] = 1.0; // u~2 component
            for i in 0..self.dw {
                dst[(1 + i, self.d_cu + self.dv + i)] = 1.0;
            }
        } else {
            for i in 0..self.d1 {
                dst[(i, self.d_cu + self.dv + i)] = 1.0;
            }
        }
        // du as a row, dv~ as rows.
        let mut d_du = DMatrix::zeros(1, d);
        d_du[(0, 0)] = 1.0;
        let mut d_v = DMatrix::zeros(self.dv, d);
        for i in 0..self.dv {
            d_v[(i, self.d_cu + i)] = 1.0;
        }
        let dy = &ms_y_inv * (dst - &ms_u * &d_du - &ms_v * &d_v);
        let mut deta = DMatrix::zeros(d, d);
        deta.view_mut((0, 0), (1, d)).copy_from(&d_du);
        deta.view_mut((1, 0), (self.dv, d)).copy_from(&d_v);
        deta.view_mut((1 + self.dv, 0), (self.d1, d)).copy_from(&dy);
        let dx = mx * &deta;
        let dz = mz * &deta;
        let mut j = DMatrix::zeros(d, d);
        j.view_mut((0, 0), (self.d_cs, d)).copy_from(&dx);
        j.view_mut((self.d_cs, 0), (self.d1, d)).copy_from(&dy);
        j.view_mut((self.d_cs + self.d1, 0), (self.dz, d)).copy_from(&dz);
        Ok(j)
    }
}
