//! Cross-form evaluation of the first-return maps.
//!
//! The cross evaluator takes `(X, Y', Z)` — the central and `Z` coordinates
//! of a point together with the `Y` coordinate of its image — and returns
//! `(X', Y, Z')`. Internally each local-map pass marches the contracting
//! coordinates forward and the expanding ones backward, which is both how the
//! return maps are controlled analytically and the only numerically stable
//! direction of evaluation: a forward march through `k` expansions would
//! amplify rounding by the full unstable factor.

use nalgebra::DVector;

use crate::error::{BlabError, Result};
use crate::model::{Model, MultiplierCase, O1Point, O2Point};
use crate::retmap::boxcoords::{box_to_o1, o2_to_box, BoxPoint};

/// Output of a cross evaluation: image `X`/`Z`, preimage `Y`.
#[derive(Debug, Clone)]
pub struct CrossImage {
    pub xbar: f64,
    pub y: DVector<f64>,
    pub zbar: DVector<f64>,
    /// Sweeps used by the outer fixed-point iteration.
    pub sweeps: usize,
}

const SWEEP_CAP: usize = 300;
const STALL_FLOOR: f64 = 1e-10;

/// `F1^k` solved in cross form: `x`, `z` march forward from the input, `y`
/// marches backward from the prescribed `y~` at the far end.
pub(crate) struct F1Pass {
    pub xtil: DVector<f64>,
    pub y0: DVector<f64>,
    pub ztil: DVector<f64>,
}

pub(crate) fn f1_pass(
    model: &Model,
    x0: &DVector<f64>,
    ytil: &DVector<f64>,
    z0: &DVector<f64>,
    k: u32,
) -> Result<F1Pass> {
    let k = k as usize;
    let c = model.params.tails.c_g;
    if c == 0.0 {
        // Tail-free: pure linear chains, no orbit storage needed.
        let [bx, by, bz] = model.o1_chart_bounds();
        let mut x = x0.clone();
        let mut z = z0.clone();
        let mut y = ytil.clone();
        for j in 0..k {
            if x.amax() > bx || z.amax() > bz {
                return Err(BlabError::ChartEscape {
                    map: "F1",
                    iterate: j,
                    coord: "x/z",
                    value: x.amax().max(z.amax()),
                    radius: bx.max(bz),
                });
            }
            x = &model.l1 * &x;
            z = &model.p2 * &z;
            y = &model.p1_inv * &y;
            if y.amax() > by {
                return Err(BlabError::ChartEscape {
                    map: "F1",
                    iterate: k - j,
                    coord: "y",
                    value: y.amax(),
                    radius: by,
                });
            }
        }
        return Ok(F1Pass { xtil: x, y0: y, ztil: z });
    }
    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(k + 1);
    xs.push(x0.clone());
    for j in 0..k {
        let next = &model.l1 * &xs[j];
        xs.push(next);
    }
    let mut ys: Vec<DVector<f64>> = vec![DVector::zeros(model.d1); k + 1];
    ys[k] = ytil.clone();
    let backward_y = |xs: &[DVector<f64>], ys: &mut [DVector<f64>]| -> Result<()> {
        for j in (0..k).rev() {
            let x2 = xs[j].norm_squared();
            if c == 0.0 {
                ys[j] = &model.p1_inv * &ys[j + 1];
            } else {
                let mut m = model.p1.clone();
                for i in 0..model.d1 {
                    m[(i, i)] += c * x2;
                }
                ys[j] = m
                    .lu()
                    .solve(&ys[j + 1])
                    .ok_or_else(|| BlabError::Precondition("singular local y-step".into()))?;
            }
        }
        Ok(())
    };
    backward_y(&xs, &mut ys)?;
    if c != 0.0 {
        for _ in 0..80 {
            let mut change = 0.0f64;
            for j in 0..k {
                let tail = c * xs[j].norm_squared() * ys[j].get(0).copied().unwrap_or(0.0);
                let next = &model.l1 * &xs[j] + DVector::from_element(model.d_cs, tail);
                change = change.max((&next - &xs[j + 1]).amax());
                xs[j + 1] = next;
            }
            backward_y(&xs, &mut ys)?;
            if change < 1e-16 {
                break;
            }
        }
    }
    let mut z = z0.clone();
    let [bx, by, bz] = model.o1_chart_bounds();
    for j in 0..=k {
        if xs[j].amax() > bx || ys[j].amax() > by || (j == 0 && z.amax() > bz) {
            return Err(BlabError::ChartEscape {
                map: "F1",
                iterate: j,
                coord: "x/y",
                value: xs[j].amax().max(ys[j].amax()),
                radius: bx.max(by),
            });
        }
        if j < k {
            let tail = c * xs[j].norm_squared() * ys[j].get(0).copied().unwrap_or(0.0);
            z = &model.p2 * &z + DVector::from_element(model.dz, tail);
            if z.amax() > bz {
                return Err(BlabError::ChartEscape {
                    map: "F1",
                    iterate: j + 1,
                    coord: "z",
                    value: z.amax(),
                    radius: bz,
                });
            }
        }
    }
    Ok(F1Pass { xtil: xs[k].clone(), y0: ys[0].clone(), ztil: z })
}

/// `F2^m` solved in cross form for real central multiplier: `u`, `v` march
/// forward, `w` marches backward from the prescribed `w~` at the far end.
pub(crate) struct F2Pass {
    pub util: DVector<f64>,
    pub vtil: DVector<f64>,
    pub w0: DVector<f64>,
}

pub(crate) fn f2_pass(
    model: &Model,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    wtil: &DVector<f64>,
    m: u32,
) -> Result<F2Pass> {
    let m = m as usize;
    let c = model.params.tails.c_g;
    let [bu, bv, bw] = model.o2_chart_bounds();
    if c == 0.0 {
        let mut u = u0.clone();
        let mut v = v0.clone();
        let mut w = wtil.clone();
        for j in 0..m {
            u = &model.l2 * &u;
            v = &model.q1 * &v;
            w = &model.q2_inv * &w;
            if u.amax() > bu || v.amax() > bv || w.amax() > bw {
                return Err(BlabError::ChartEscape {
                    map: "F2",
                    iterate: j + 1,
                    coord: "u/v/w",
                    value: u.amax().max(v.amax()).max(w.amax()),
                    radius: bu.max(bv).max(bw),
                });
            }
        }
        return Ok(F2Pass { util: u, vtil: v, w0: w });
    }
    let mut us: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
    us.push(u0.clone());
    vs.push(v0.clone());
    for j in 0..m {
        let u2 = us[j].norm_squared();
        let v1 = vs[j].get(0).copied().unwrap_or(0.0);
        let tail = c * u2 * v1;
        let u = &model.l2 * &us[j] + DVector::from_element(model.d_cu, tail);
        let v = &model.q1 * &vs[j] + &vs[j] * (c * u2);
        if u.amax() > bu || v.amax() > bv {
            return Err(BlabError::ChartEscape {
                map: "F2",
                iterate: j + 1,
                coord: "u/v",
                value: u.amax().max(v.amax()),
                radius: bu.max(bv),
            });
        }
        us.push(u);
        vs.push(v);
    }
    let mut w = wtil.clone();
    for j in (0..m).rev() {
        let u2 = us[j].norm_squared();
        let v1 = vs[j].get(0).copied().unwrap_or(0.0);
        let tail = c * u2 * v1;
        w = &model.q2_inv * (&w - DVector::from_element(model.dw, tail));
        if w.amax() > bw {
            return Err(BlabError::ChartEscape {
                map: "F2",
                iterate: j,
                coord: "w",
                value: w.amax(),
                radius: bw,
            });
        }
    }
    Ok(F2Pass { util: us[m].clone(), vtil: vs[m].clone(), w0: w })
}

fn stack3(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len() + c.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out.rows_mut(a.len() + b.len(), c.len()).copy_from(c);
    out
}

/// Cross evaluation for the saddle and saddle-focus cases (box at `M1+`).
pub(crate) fn cross_o1(
    model: &Model,
    k: u32,
    m: u32,
    x: f64,
    ybar: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<CrossImage> {
    let mut y = DVector::zeros(model.d1);
    let mut ytil = model.y_minus.clone();
    let mut w_req = DVector::zeros(model.dw);
    let mut s_dev = DVector::zeros(model.d1); // w~ - w- target at F21 entry
    let mut xbar_model: DVector<f64> = model.x_plus.clone();
    let mut zbar_model: DVector<f64> = model.z_plus.clone();
    let mut prev_change = f64::INFINITY;
    for sweep in 0..SWEEP_CAP {
        let o1 = box_to_o1(model, &BoxPoint { x, y: y.clone(), z: z.clone() })?;
        let pass1 = f1_pass(model, &o1.x, &ytil, &o1.z, k)?;
        let xi = stack3(&pass1.xtil, &w_req, &pass1.ztil);
        let t = model.params.tails.c_t * xi.norm_squared();
        let u1 = model.params.mu + (&model.a_u * &xi)[0] + t;
        let v = &model.v_plus + &model.a_v * &xi + DVector::from_element(model.dv, t);
        let wtil = &model.w_minus + &s_dev;
        let pass2 = f2_pass(model, &DVector::from_element(1, u1), &v, &wtil, m)?;
        let eta = stack3(
            &DVector::from_element(1, pass2.util[0] - model.u_minus[0]),
            &pass2.vtil,
            ybar,
        );
        let te = model.params.tails.c_t * eta.norm_squared();
        xbar_model = &model.x_plus + &model.b_x * &eta + DVector::from_element(model.d_cs, te);
        let s_new = &model.b_s * &eta + DVector::from_element(model.d1, te);
        zbar_model = &model.z_plus + &model.b_z * &eta + DVector::from_element(model.dz, te);
        let xi_new = stack3(&pass1.xtil, &pass2.w0, &pass1.ztil);
        let tn = model.params.tails.c_t * xi_new.norm_squared();
        let ytil_new = &model.y_minus + &model.a_y * &xi_new + DVector::from_element(model.d1, tn);

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
        if change <= 1e-16 * scale || (change >= prev_change && change < STALL_FLOOR && sweep >= 3)
        {
            let out = O1Point { x: xbar_model, y: ybar.clone(), z: zbar_model };
            let out_box = crate::retmap::boxcoords::o1_to_box(model, &out)?;
            return Ok(CrossImage { xbar: out_box.x, y, zbar: out_box.z, sweeps: sweep + 1 });
        }
        prev_change = change;
    }
    let _ = (xbar_model, zbar_model);
    Err(BlabError::NoConvergence { iterations: SWEEP_CAP, residual: prev_change })
}

/// Cross evaluation for the double-focus case (box at `M2-`, return map
/// `F2^m . F12 . F1^k . F21`).
pub(crate) fn cross_o2(
    model: &Model,
    k: u32,
    m: u32,
    x: f64,
    ybar: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<CrossImage> {
    let p = &model.params;
    let w2 = p.omega2.unwrap();
    let mf = m as f64;
    let eta3 = crate::retmap::coeffs::df_eta3(model);
    let threshold = 1e-8;
    let cos_m = (mf * w2).cos();
    let cos_m_eta3 = (mf * w2 + eta3).cos();
    if cos_m.abs() < threshold {
        return Err(BlabError::TangentSingularity { value: cos_m.abs(), threshold });
    }
    if cos_m_eta3.abs() < threshold {
        return Err(BlabError::TangentSingularity { value: cos_m_eta3.abs(), threshold });
    }

    let sqrt_delta = p.delta.sqrt();
    let u1til = model.u_minus[0] + x;
    let vtil = z * sqrt_delta;
    let b41 = model.b_s[(0, 0)];

    let mut y = DVector::zeros(model.d1);
    let mut ytil = model.y_minus.clone();
    let mut u2_entry = 0.0f64;
    let mut w_entry = DVector::zeros(model.dw);
    let mut u1_exit = model.u_minus[0];
    let mut v_exit = DVector::zeros(model.dv);
    let mut s_inp = DVector::zeros(model.d1);
    let mut prev_change = f64::INFINITY;
    for sweep in 0..SWEEP_CAP {
        let eta = stack3(&DVector::from_element(1, x), &vtil, &y);
        let te = p.tails.c_t * eta.norm_squared();
        let x_vec = &model.x_plus + &model.b_x * &eta + DVector::from_element(model.d_cs, te);
        s_inp = &model.b_s * &eta + DVector::from_element(model.d1, te);
        let z_vec = &model.z_plus + &model.b_z * &eta + DVector::from_element(model.dz, te);
        let pass1 = f1_pass(model, &x_vec, &ytil, &z_vec, k)?;
        let mut s_args = DVector::zeros(model.d1);
        s_args[0] = u2_entry;
        s_args.rows_mut(1, model.dw).copy_from(&w_entry);
        let xi = stack3(&pass1.xtil, &s_args, &pass1.ztil);
        let t = p.tails.c_t * xi.norm_squared();
        let u1_entry = p.mu + (&model.a_u * &xi)[0] + t;
        let v_entry = &model.v_plus + &model.a_v * &xi + DVector::from_element(model.dv, t);
        let ytil_new = &model.y_minus + &model.a_y * &xi + DVector::from_element(model.d1, t);

        // Exit targets from the box-Y arguments and the current exit estimate.
        let b42_dot = model.b_s.row(0).columns(1, model.dv).transpose().dot(&v_exit);
        let u2_exit_target =
            model.u_minus[1] + sqrt_delta * ybar[0] + b41 * (u1_exit - model.u_minus[0]) + b42_dot;
        let mut w_exit_target = DVector::zeros(model.dw);
        for i in 0..model.dw {
            let row = model.b_s.row(1 + i);
            let b52_dot = row.columns(1, model.dv).transpose().dot(&v_exit);
            w_exit_target[i] =
                model.w_minus[i] + ybar[1 + i] + row[0] * (u1_exit - model.u_minus[0]) + b52_dot;
        }
        let pass2 = df_f2_pass(model, u1_entry, &v_entry, u2_exit_target, &w_exit_target, m)?;

        let change = (&pass1.y0 - &y)
            .amax()
            .max((&ytil_new - &ytil).amax())
            .max((pass2.u2_entry - u2_entry).abs())
            .max((&pass2.w_entry - &w_entry).amax())
            .max((pass2.u_exit[0] - u1_exit).abs())
            .max((&pass2.v_exit - &v_exit).amax());
        y = pass1.y0;
        ytil = ytil_new;
        u2_entry = pass2.u2_entry;
        w_entry = pass2.w_entry;
        u1_exit = pass2.u_exit[0];
        v_exit = pass2.v_exit.clone();
        let scale = 1.0 + ytil.amax();
        if change <= 1e-16 * scale || (change >= prev_change && change < STALL_FLOOR && sweep >= 3)
        {
            // Output point in box coordinates.
            let exit = O2Point {
                u: DVector::from_vec(vec![pass2.u_exit[0], pass2.u_exit[1]]),
                v: pass2.v_exit.clone(),
                w: pass2.w_exit.clone(),
            };
            let out_box = o2_to_box(model, &exit)?;
            // Input solved coordinates give the returned Y block.
            let u2til = model.u_minus[1] + s_inp[0];
            let wtil: DVector<f64> = &model.w_minus + s_inp.rows(1, model.dw);
            let inp = O2Point {
                u: DVector::from_vec(vec![u1til, u2til]),
                v: vtil.clone(),
                w: wtil,
            };
            let inp_box = o2_to_box(model, &inp)?;
            return Ok(CrossImage {
                xbar: out_box.x,
                y: inp_box.y,
                zbar: out_box.z,
                sweeps: sweep + 1,
            });
        }
        prev_change = change;
    }
    Err(BlabError::NoConvergence { iterations: SWEEP_CAP, residual: prev_change })
}

pub(crate) struct DfF2Pass {
    pub u_exit: DVector<f64>,
    pub v_exit: DVector<f64>,
    pub w_exit: DVector<f64>,
    pub u2_entry: f64,
    pub w_entry: DVector<f64>,
}

/// Double-focus `F2^m` pass: `u1`-entry and `v`-entry are prescribed, the
/// second central exit coordinate and the strong-unstable exit block are
/// prescribed, and the matching `u2`-entry / `w`-entry are solved (scalar
/// Newton on `u2`, linear backward march for `w`).
pub(crate) fn df_f2_pass(
    model: &Model,
    u1_entry: f64,
    v_entry: &DVector<f64>,
    u2_exit_target: f64,
    w_exit_target: &DVector<f64>,
    m: u32,
) -> Result<DfF2Pass> {
    let steps = m as usize;
    let c = model.params.tails.c_g;
    let [bu, bv, bw] = model.o2_chart_bounds();
    // March (u, v) forward from a candidate u2 and return the exit state.
    let march = |u2: f64| -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let mut us = Vec::with_capacity(steps + 1);
        let mut vs = Vec::with_capacity(steps + 1);
        us.push(DVector::from_vec(vec![u1_entry, u2]));
        vs.push(v_entry.clone());
        for j in 0..steps {
            let u2n = us[j].norm_squared();
            let v1 = vs[j].get(0).copied().unwrap_or(0.0);
            let tail = c * u2n * v1;
            let u = &model.l2 * &us[j] + DVector::from_element(2, tail);
            let v = &model.q1 * &vs[j] + &vs[j] * (c * u2n);
            if u.amax() > bu || v.amax() > bv {
                return Err(BlabError::ChartEscape {
                    map: "F2",
                    iterate: j + 1,
                    coord: "u/v",
                    value: u.amax().max(v.amax()),
                    radius: bu.max(bv),
                });
            }
            us.push(u);
            vs.push(v);
        }
        Ok((us, vs))
    };
    // Zero-tail tangent of the exit u2 with respect to the entry u2.
    let mut tangent = DVector::from_vec(vec![0.0, 1.0]);
    for _ in 0..steps {
        tangent = &model.l2 * &tangent;
    }
    let dres = tangent[1];
    if dres.abs() < 1e-12 {
        return Err(BlabError::TangentSingularity { value: dres.abs(), threshold: 1e-12 });
    }
    let mut u2 = 0.0f64;
    let mut result = None;
    for it in 0..60 {
        let (us, vs) = march(u2)?;
        let res = us[steps][1] - u2_exit_target;
        if res.abs() <= 1e-13 * (1.0 + u2_exit_target.abs()) || it == 59 {
            if res.abs() > 1e-10 * (1.0 + u2_exit_target.abs()) {
                return Err(BlabError::NoConvergence { iterations: it, residual: res.abs() });
            }
            result = Some((us, vs));
            break;
        }
        u2 -= res / dres;
    }
    let (us, vs) = result.unwrap();
    // Backward march for w.
    let mut w = w_exit_target.clone();
    for j in (0..steps).rev() {
        let u2n = us[j].norm_squared();
        let v1 = vs[j].get(0).copied().unwrap_or(0.0);
        let tail = c * u2n * v1;
        w = &model.q2_inv * (&w - DVector::from_element(model.dw, tail));
        if w.amax() > bw {
            return Err(BlabError::ChartEscape {
                map: "F2",
                iterate: j,
                coord: "w",
                value: w.amax(),
                radius: bw,
            });
        }
    }
    Ok(DfF2Pass {
        u_exit: us[steps].clone(),
        v_exit: vs[steps].clone(),
        w_exit: w_exit_target.clone(),
        u2_entry: us[0][1],
        w_entry: w,
    })
}

/// Case dispatch for the cross evaluator.
pub(crate) fn cross_eval(
    model: &Model,
    k: u32,
    m: u32,
    x: f64,
    ybar: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<CrossImage> {
    match model.params.case {
        MultiplierCase::DoubleFocus => cross_o2(model, k, m, x, ybar, z),
        _ => cross_o1(model, k, m, x, ybar, z),
    }
}
