//! Analytic Jacobian of the cross map by tangent propagation along the
//! converged orbit.
//!
//! Finite differences cannot resolve the exponentially small blocks of the
//! cross Jacobian (e.g. `dZ'/dZ ~ P2^k Q1^m`): their contribution to the
//! output sits far below the rounding of the output's leading part. The
//! tangent sweep propagates derivatives with the same forward/backward
//! splitting as the value sweep, so every factor stays well scaled and each
//! block comes out with full relative accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{BlabError, Result};
use crate::model::{Model, MultiplierCase};
use crate::retmap::boxcoords::{box_to_o1, BoxPoint};

/// `d(X', Y, Z') / d(X, Y', Z)` for the saddle and saddle-focus cases,
/// evaluated at the converged cross orbit.
pub fn cross_jacobian_analytic_o1(
    model: &Model,
    k: u32,
    m: u32,
    x: f64,
    ybar: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    debug_assert_ne!(model.params.case, MultiplierCase::DoubleFocus);
    let d1 = model.d1;
    let dz_box = model.params.d - d1 - 1;
    let d = 1 + d1 + dz_box;
    let c_g = model.params.tails.c_g;
    let c_t = model.params.tails.c_t;
    let ks = k as usize;
    let ms = m as usize;

    // ----- converge the value orbit, storing the pass arrays -----
    let mut y = DVector::zeros(d1);
    let mut ytil = model.y_minus.clone();
    let mut w_req = DVector::zeros(model.dw);
    let mut s_dev = DVector::zeros(d1);
    let mut orbit: Option<Orbit> = None;
    let mut prev_change = f64::INFINITY;
    for sweep in 0..300 {
        let o1 = box_to_o1(model, &BoxPoint { x, y: y.clone(), z: z.clone() })?;
        let pass1 = super::cross::f1_pass(model, &o1.x, &ytil, &o1.z, k)?;
        let (xs, ys, zs) = f1_arrays(model, &o1.x, &ytil, &o1.z, ks)?;
        let xi = stack3(&pass1.xtil, &w_req, &pass1.ztil);
        let t = c_t * xi.norm_squared();
        let u1 = model.params.mu + (&model.a_u * &xi)[0] + t;
        let v = &model.v_plus + &model.a_v * &xi + DVector::from_element(model.dv, t);
        let wtil = &model.w_minus + &s_dev;
        let pass2 = super::cross::f2_pass(model, &DVector::from_element(1, u1), &v, &wtil, m)?;
        let (us, vs, ws) = f2_arrays(model, u1, &v, &wtil, ms)?;
        let eta = stack3(
            &DVector::from_element(1, pass2.util[0] - model.u_minus[0]),
            &pass2.vtil,
            ybar,
        );
        let te = c_t * eta.norm_squared();
        let xbar = &model.x_plus + &model.b_x * &eta + DVector::from_element(model.d_cs, te);
        let s_new = &model.b_s * &eta + DVector::from_element(d1, te);
        let zbar = &model.z_plus + &model.b_z * &eta + DVector::from_element(model.dz, te);
        let xi_new = stack3(&pass1.xtil, &pass2.w0, &pass1.ztil);
        let tn = c_t * xi_new.norm_squared();
        let ytil_new = &model.y_minus + &model.a_y * &xi_new + DVector::from_element(d1, tn);
        let change = (&pass1.y0 - &y)
            .amax()
            .max((&ytil_new - &ytil).amax())
            .max((&s_new - &s_dev).amax())
            .max((&pass2.w0 - &w_req).amax());
        y = pass1.y0;
        ytil = ytil_new;
        s_dev = s_new;
        w_req = pass2.w0;
        let scale = 1.0 + ytil.amax();
        if change <= 1e-16 * scale || (change >= prev_change && change < 1e-10 && sweep >= 3) {
            orbit = Some(Orbit { xs, ys, zs, us, vs, ws, xi: xi_new, eta, xbar, zbar });
            break;
        }
        prev_change = change;
    }
    let orbit = orbit.ok_or(BlabError::NoConvergence { iterations: 300, residual: prev_change })?;

    // ----- tangent sweep: d columns for the basis of (X, Y', Z) -----
    // Basis layout: column 0 = X, 1..1+d1 = Y', rest = Z.
    let e_x = basis_row(d, 0, 1);
    let e_ybar = basis_row(d, 1, d1);
    let e_z = basis_row(d, 1 + d1, dz_box);

    let mut t_y = DMatrix::zeros(d1, d);
    let mut t_ytil = DMatrix::zeros(d1, d);
    let mut t_sdev = DMatrix::zeros(d1, d);
    let mut t_wreq = DMatrix::zeros(model.dw, d);
    let mut out = None;
    for _ in 0..60 {
        // Box -> model tangents.
        let b13 = b13_row(model);
        // dx1 = dX + b13 dy.
        let dx1 = &e_x + &b13 * &t_y;
        let x1 = orbit.xs[0][0];
        let graph = graph_gradients(model, x1, &y)?;
        let (dx0, dz0) = match model.params.case {
            MultiplierCase::Saddle => {
                let dz0 = &graph.dz_dx1 * &dx1 + &graph.dz_dy * &t_y + &e_z;
                (dx1.clone(), dz0)
            }
            MultiplierCase::SaddleFocus => {
                let sqrt_delta = model.params.delta.sqrt();
                // Z block = (X2, z): x2 = graph_x2 + sqrt(delta) Z[0].
                let e_z0 = e_z.rows(0, 1).into_owned();
                let e_zrest: DMatrix<f64> = e_z.rows(1, model.dz).into_owned();
                let dx2 =
                    &graph.dx2_dx1 * &dx1 + &graph.dx2_dy * &t_y + sqrt_delta * &e_z0;
                let mut dx0 = DMatrix::zeros(2, d);
                dx0.row_mut(0).copy_from(&dx1.row(0));
                dx0.row_mut(1).copy_from(&dx2.row(0));
                let dz0 = &graph.dz_dx1 * &dx1 + &graph.dz_dy * &t_y + e_zrest;
                (dx0, dz0)
            }
            MultiplierCase::DoubleFocus => unreachable!(),
        };
        // F1^k pass tangents.
        let (tx_k, ty_0, tz_k) = f1_pass_tangent(model, &orbit, &dx0, &t_ytil, &dz0, ks, c_g);
        // F12 rows.
        let t_xi = stack_rows(&tx_k, &t_wreq, &tz_k);
        let xi_dot = dot_rows(&orbit.xi, &t_xi);
        let du1 = &model.a_u * &t_xi + 2.0 * c_t * &xi_dot;
        let dv = &model.a_v * &t_xi + ones_times(model.dv, &(2.0 * c_t * &xi_dot));
        // F2^m pass tangents.
        let dwtil = &t_sdev;
        let (tu_m, tv_m, tw_0) = f2_pass_tangent(model, &orbit, &du1, &dv, dwtil, ms, c_g);
        // F21 rows.
        let t_eta = stack_rows(&tu_m, &tv_m, &DMatrix::zeros(d1, d)) + stack_rows(
            &DMatrix::zeros(1, d),
            &DMatrix::zeros(model.dv, d),
            &e_ybar,
        );
        let eta_dot = dot_rows(&orbit.eta, &t_eta);
        let dxbar = &model.b_x * &t_eta + ones_times(model.d_cs, &(2.0 * c_t * &eta_dot));
        let dsnew = &model.b_s * &t_eta + ones_times(d1, &(2.0 * c_t * &eta_dot));
        let dzbar = &model.b_z * &t_eta + ones_times(model.dz, &(2.0 * c_t * &eta_dot));
        // Updated ytil tangent.
        let t_xi_new = stack_rows(&tx_k, &tw_0, &tz_k);
        let xi_new_dot = dot_rows(&orbit.xi, &t_xi_new);
        let t_ytil_new = &model.a_y * &t_xi_new + ones_times(d1, &(2.0 * c_t * &xi_new_dot));

        let change = (&ty_0 - &t_y)
            .amax()
            .max((&t_ytil_new - &t_ytil).amax())
            .max((&dsnew - &t_sdev).amax())
            .max((&tw_0 - &t_wreq).amax());
        t_y = ty_0.clone();
        t_ytil = t_ytil_new;
        t_sdev = dsnew;
        t_wreq = tw_0;
        if change <= 1e-15 * (1.0 + t_y.amax().max(t_ytil.amax())) {
            // Output tangents.
            let dxbar1: DMatrix<f64> = dxbar.rows(0, 1).into_owned();
            let d_xbar_box = &dxbar1 - &b13 * &e_ybar;
            let graph_bar = graph_gradients(model, orbit.xbar[0], ybar)?;
            let d_zbar_box = match model.params.case {
                MultiplierCase::Saddle => {
                    &dzbar - &graph_bar.dz_dx1 * &dxbar1 - &graph_bar.dz_dy * &e_ybar
                }
                MultiplierCase::SaddleFocus => {
                    let sqrt_delta = model.params.delta.sqrt();
                    let dxbar2: DMatrix<f64> = dxbar.rows(1, 1).into_owned();
                    let dx2c = (&dxbar2
                        - &graph_bar.dx2_dx1 * &dxbar1
                        - &graph_bar.dx2_dy * &e_ybar)
                        / sqrt_delta;
                    let dzc = &dzbar - &graph_bar.dz_dx1 * &dxbar1 - &graph_bar.dz_dy * &e_ybar;
                    stack_rows(&dx2c, &dzc, &DMatrix::zeros(0, d))
                }
                MultiplierCase::DoubleFocus => unreachable!(),
            };
            let mut j = DMatrix::zeros(d, d);
            j.view_mut((0, 0), (1, d)).copy_from(&d_xbar_box);
            j.view_mut((1, 0), (d1, d)).copy_from(&t_y);
            j.view_mut((1 + d1, 0), (dz_box, d)).copy_from(&d_zbar_box);
            out = Some(j);
            break;
        }
    }
    out.ok_or(BlabError::NoConvergence { iterations: 60, residual: f64::NAN })
}

struct Orbit {
    xs: Vec<DVector<f64>>,
    ys: Vec<DVector<f64>>,
    zs: Vec<DVector<f64>>,
    us: Vec<DVector<f64>>,
    vs: Vec<DVector<f64>>,
    ws: Vec<DVector<f64>>,
    xi: DVector<f64>,
    eta: DVector<f64>,
    xbar: DVector<f64>,
    zbar: DVector<f64>,
}

fn stack3(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len() + c.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out.rows_mut(a.len() + b.len(), c.len()).copy_from(c);
    out
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols().max(b.ncols()).max(c.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows() + c.nrows(), d);
    out.view_mut((0, 0), (a.nrows(), d)).copy_from(a);
    out.view_mut((a.nrows(), 0), (b.nrows(), d)).copy_from(b);
    out.view_mut((a.nrows() + b.nrows(), 0), (c.nrows(), d)).copy_from(c);
    out
}

fn basis_row(d: usize, start: usize, len: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(len, d);
    for i in 0..len {
        out[(i, start + i)] = 1.0;
    }
    out
}

/// `xi . d(xi)` as a 1 x d row.
fn dot_rows(xi: &DVector<f64>, t_xi: &DMatrix<f64>) -> DMatrix<f64> {
    let r = xi.transpose() * t_xi;
    DMatrix::from_fn(1, r.ncols(), |_, j| r[(0, j)])
}

fn ones_times(rows: usize, row: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, row.ncols());
    for r in 0..rows {
        out.row_mut(r).copy_from(&row.row(0));
    }
    out
}

fn b13_row(model: &Model) -> DMatrix<f64> {
    let r = model.b_x.row(0).columns(1 + model.dv, model.d1).into_owned();
    DMatrix::from_fn(1, r.ncols(), |_, j| r[(0, j)])
}

struct GraphGradients {
    dx2_dx1: DMatrix<f64>,
    dx2_dy: DMatrix<f64>,
    dz_dx1: DMatrix<f64>,
    dz_dy: DMatrix<f64>,
}

/// Gradients of the `F21(W^u_loc(O2))` graph used by the box transforms.
fn graph_gradients(model: &Model, x1: f64, y: &DVector<f64>) -> Result<GraphGradients> {
    let g = crate::retmap::boxcoords::wu_image_graph(model, x1, y)?;
    let c = model.params.tails.c_t;
    let b11 = model.b_x[(0, 0)];
    let d1 = model.d1;
    // x1 = x1+ + b11 du + b13.y + c_t (du^2 + |y|^2) defines du(x1, y).
    let denom = b11 + 2.0 * c * g.du;
    let b13 = b13_row(model);
    let ddu_dx1 = 1.0 / denom;
    let ddu_dy = -(b13.clone() + 2.0 * c * y.transpose()) / denom;
    // Row gradients of any F21 row r(eta) = B_row.eta + c_t |eta|^2 at
    // eta = (du, 0, y): d r = (B_du + 2 c du) d du + (B_y + 2 c y^T) dy.
    let row_grad = |b_block: &DMatrix<f64>| -> (DMatrix<f64>, DMatrix<f64>) {
        let nb = b_block.nrows();
        let b_du: DMatrix<f64> = b_block.columns(0, 1).into_owned();
        let b_y: DMatrix<f64> = b_block.columns(1 + model.dv, d1).into_owned();
        let coef_du = &b_du + DMatrix::from_element(nb, 1, 2.0 * c * g.du);
        let coef_y = &b_y + ones_times(nb, &DMatrix::from_fn(1, d1, |_, j| 2.0 * c * y[j]));
        let d_dx1 = &coef_du * ddu_dx1;
        let d_dy = &coef_du * &ddu_dy + coef_y;
        (d_dx1, d_dy)
    };
    let (dz_dx1, dz_dy) = row_grad(&model.b_z.clone());
    let (dx2_dx1, dx2_dy) = if model.d_cs == 2 {
        row_grad(&model.b_x.rows(1, 1).into_owned())
    } else {
        (DMatrix::zeros(0, 1), DMatrix::zeros(0, d1))
    };
    Ok(GraphGradients { dx2_dx1, dx2_dy, dz_dx1, dz_dy })
}

fn f1_arrays(
    model: &Model,
    x0: &DVector<f64>,
    ytil: &DVector<f64>,
    z0: &DVector<f64>,
    k: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let c = model.params.tails.c_g;
    let mut xs = vec![x0.clone()];
    for j in 0..k {
        let next = &model.l1 * &xs[j];
        xs.push(next);
    }
    let mut ys = vec![DVector::zeros(model.d1); k + 1];
    ys[k] = ytil.clone();
    let solve_back = |xs: &[DVector<f64>], ys: &mut [DVector<f64>]| -> Result<()> {
        for j in (0..k).rev() {
            let x2 = xs[j].norm_squared();
            if c == 0.0 {
                ys[j] = &model.p1_inv * &ys[j + 1];
            } else {
                let mut mm = model.p1.clone();
                for i in 0..model.d1 {
                    mm[(i, i)] += c * x2;
                }
                ys[j] = mm
                    .lu()
                    .solve(&ys[j + 1])
                    .ok_or_else(|| BlabError::Precondition("singular local y-step".into()))?;
            }
        }
        Ok(())
    };
    solve_back(&xs, &mut ys)?;
    if c != 0.0 {
        for _ in 0..80 {
            let mut change = 0.0f64;
            for j in 0..k {
                let tail = c * xs[j].norm_squared() * ys[j].get(0).copied().unwrap_or(0.0);
                let next = &model.l1 * &xs[j] + DVector::from_element(model.d_cs, tail);
                change = change.max((&next - &xs[j + 1]).amax());
                xs[j + 1] = next;
            }
            solve_back(&xs, &mut ys)?;
            if change < 1e-16 {
                break;
            }
        }
    }
    let mut zs = vec![z0.clone()];
    for j in 0..k {
        let tail = c * xs[j].norm_squared() * ys[j].get(0).copied().unwrap_or(0.0);
        zs.push(&model.p2 * &zs[j] + DVector::from_element(model.dz, tail));
    }
    Ok((xs, ys, zs))
}

fn f2_arrays(
    model: &Model,
    u1: f64,
    v0: &DVector<f64>,
    wtil: &DVector<f64>,
    m: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let c = model.params.tails.c_g;
    let mut us = vec![DVector::from_element(1, u1)];
    let mut vs = vec![v0.clone()];
    for j in 0..m {
        let u2 = us[j].norm_squared();
        let v1 = vs[j].get(0).copied().unwrap_or(0.0);
        let tail = c * u2 * v1;
        us.push(&model.l2 * &us[j] + DVector::from_element(model.d_cu, tail));
        vs.push(&model.q1 * &vs[j] + &vs[j] * (c * u2));
    }
    let mut ws = vec![DVector::zeros(model.dw); m + 1];
    ws[m] = wtil.clone();
    for j in (0..m).rev() {
        let u2 = us[j].norm_squared();
        let v1 = vs[j].get(0).copied().unwrap_or(0.0);
        let tail = c * u2 * v1;
        ws[j] = &model.q2_inv * (&ws[j + 1] - DVector::from_element(model.dw, tail));
    }
    Ok((us, vs, ws))
}

/// Tangents through `F1^k`: `dx`, `dz` forward, `dy` backward.
fn f1_pass_tangent(
    model: &Model,
    orbit: &Orbit,
    dx0: &DMatrix<f64>,
    dytil: &DMatrix<f64>,
    dz0: &DMatrix<f64>,
    k: usize,
    c: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = dx0.ncols();
    let d1 = model.d1;
    let mut txs = vec![DMatrix::zeros(model.d_cs, d); k + 1];
    let mut tys = vec![DMatrix::zeros(d1, d); k + 1];
    txs[0] = dx0.clone();
    tys[k] = dytil.clone();
    let sweeps = if c == 0.0 { 1 } else { 4 };
    for _ in 0..sweeps {
        // Backward y: y_j = M_j^{-1} y_{j+1}, M_j = P1 + c|x_j|^2 I.
        for j in (0..k).rev() {
            let x2 = orbit.xs[j].norm_squared();
            let xtx = dot_rows(&orbit.xs[j], &txs[j]);
            let rhs = &tys[j + 1] - 2.0 * c * &orbit.ys[j] * &xtx;
            if c == 0.0 {
                tys[j] = &model.p1_inv * rhs;
            } else {
                let mut mm = model.p1.clone();
                for i in 0..d1 {
                    mm[(i, i)] += c * x2;
                }
                let lu = mm.lu();
                let mut out = DMatrix::zeros(d1, d);
                for col in 0..d {
                    let col_v: DVector<f64> = rhs.column(col).into_owned();
                    out.set_column(col, &lu.solve(&col_v).unwrap());
                }
                tys[j] = out;
            }
        }
        // Forward x with the current y-tangents.
        for j in 0..k {
            let x2 = orbit.xs[j].norm_squared();
            let y1 = orbit.ys[j].get(0).copied().unwrap_or(0.0);
            let xtx = dot_rows(&orbit.xs[j], &txs[j]);
            let dy1: DMatrix<f64> = if d1 > 0 {
                tys[j].rows(0, 1).into_owned()
            } else {
                DMatrix::zeros(1, d)
            };
            let tail_row = 2.0 * c * y1 * &xtx + c * x2 * &dy1;
            txs[j + 1] = &model.l1 * &txs[j] + ones_times(model.d_cs, &tail_row);
        }
        if c == 0.0 {
            break;
        }
    }
    // Forward z.
    let mut tz = dz0.clone();
    for j in 0..k {
        let x2 = orbit.xs[j].norm_squared();
        let y1 = orbit.ys[j].get(0).copied().unwrap_or(0.0);
        let xtx = dot_rows(&orbit.xs[j], &txs[j]);
        let dy1: DMatrix<f64> = if d1 > 0 {
            tys[j].rows(0, 1).into_owned()
        } else {
            DMatrix::zeros(1, d)
        };
        let tail_row = 2.0 * c * y1 * &xtx + c * x2 * &dy1;
        tz = &model.p2 * &tz + ones_times(model.dz, &tail_row);
    }
    (txs[k].clone(), tys[0].clone(), tz)
}

/// Tangents through `F2^m`: `du`, `dv` forward, `dw` backward.
fn f2_pass_tangent(
    model: &Model,
    orbit: &Orbit,
    du1: &DMatrix<f64>,
    dv0: &DMatrix<f64>,
    dwtil: &DMatrix<f64>,
    m: usize,
    c: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = du1.ncols();
    let mut tu = du1.clone();
    let mut tv = dv0.clone();
    let mut tus = vec![DMatrix::zeros(model.d_cu, d); m + 1];
    let mut tvs = vec![DMatrix::zeros(model.dv, d); m + 1];
    tus[0] = tu.clone();
    tvs[0] = tv.clone();
    for j in 0..m {
        let u2 = orbit.us[j].norm_squared();
        let v1 = orbit.vs[j].get(0).copied().unwrap_or(0.0);
        let utu = dot_rows(&orbit.us[j], &tu);
        let dv1: DMatrix<f64> = if model.dv > 0 {
            tv.rows(0, 1).into_owned()
        } else {
            DMatrix::zeros(1, d)
        };
        let tail_row = 2.0 * c * v1 * &utu + c * u2 * &dv1;
        let tu_next = &model.l2 * &tu + ones_times(model.d_cu, &tail_row);
        let tv_next = &model.q1 * &tv + c * u2 * &tv + 2.0 * c * &orbit.vs[j] * &utu;
        tu = tu_next;
        tv = tv_next;
        tus[j + 1] = tu.clone();
        tvs[j + 1] = tv.clone();
    }
    let mut tw = dwtil.clone();
    for j in (0..m).rev() {
        let u2 = orbit.us[j].norm_squared();
        let v1 = orbit.vs[j].get(0).copied().unwrap_or(0.0);
        let utu = dot_rows(&orbit.us[j], &tus[j]);
        let dv1: DMatrix<f64> = if model.dv > 0 {
            tvs[j].rows(0, 1).into_owned()
        } else {
            DMatrix::zeros(1, d)
        };
        let tail_row = 2.0 * c * v1 * &utu + c * u2 * &dv1;
        tw = &model.q2_inv * (&tw - ones_times(model.dw, &tail_row));
    }
    (tu, tv, tw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ref1, ref_sf, TailSpec};
    use crate::retmap::ReturnMap;

    #[test]
    fn matches_fd_in_well_conditioned_blocks() {
        for base in [ref1(), ref_sf()] {
            let mut params = base;
            params.tails = TailSpec { c_g: 1e-3, c_t: 1e-3 };
            let ret = ReturnMap::new(&params).unwrap();
            let d1 = ret.model.d1;
            let dzb = ret.model.params.d - d1 - 1;
            let x = 0.03;
            let ybar = DVector::from_element(d1, -0.02);
            let z = DVector::from_element(dzb, 0.05);
            // (7, 4) is small enough that every block is FD-visible and
            // balanced enough (3^4/2^7 = 0.63) that the orbit stays in chart.
            let aj = cross_jacobian_analytic_o1(&ret.model, 7, 4, x, &ybar, &z).unwrap();
            let args = {
                let mut a = DVector::zeros(1 + d1 + dzb);
                a[0] = x;
                a.rows_mut(1, d1).copy_from(&ybar);
                a.rows_mut(1 + d1, dzb).copy_from(&z);
                a
            };
            let fj = crate::cone::check::cross_jacobian(&ret, 7, 4, &args, 1e-6).unwrap();
            // At small (k, m) every block is FD-visible; the two must agree.
            for r in 0..aj.nrows() {
                for c in 0..aj.ncols() {
                    let scale = 1.0 + aj[(r, c)].abs();
                    assert!(
                        (aj[(r, c)] - fj[(r, c)]).abs() / scale < 1e-4,
                        "block ({r},{c}): analytic {} vs fd {}",
                        aj[(r, c)],
                        fj[(r, c)]
                    );
                }
            }
        }
    }

    #[test]
    fn exact_diagonal_blocks_at_ref1() {
        let ret = ReturnMap::new(&ref1()).unwrap();
        let j = cross_jacobian_analytic_o1(&ret.model, 20, 12, 0.0, &DVector::zeros(1), &DVector::zeros(1))
            .unwrap();
        let a = 531441.0 / 1048576.0;
        assert!((j[(0, 0)] - a).abs() < 1e-12);
        // dY/dY' = P1^-k Q2^-m (pure chain at zero tails).
        let expect_yy = 4.0f64.powi(-20) * 4.0f64.powi(-12);
        assert!((j[(1, 1)] - expect_yy).abs() < 1e-6 * expect_yy, "{}", j[(1, 1)]);
        // dZ'/dZ = P2^k Q1^m.
        let expect_zz = 0.25f64.powi(20) * 0.25f64.powi(12);
        assert!((j[(2, 2)] - expect_zz).abs() < 1e-6 * expect_zz, "{}", j[(2, 2)]);
        // Off-diagonal blocks vanish for the decoupled reference set.
        assert!(j[(0, 1)].abs() < 1e-15 && j[(0, 2)].abs() < 1e-15);
    }
}
