//! Literal composition of the model maps: the brute-force oracle against
//! which the cross form is checked.
//!
//! The forward composition is numerically faithful in the central and
//! contracting directions; its `Y`-output amplifies input rounding by the
//! full unstable factor, which is the honest behavior of the map itself (the
//! domain of `T_{k,m}` is an exponentially thin strip around `W^s_loc(O1)`).
//! The backward composition plays the mirror role for the `X`/`Y` directions.

use crate::error::Result;
use crate::model::{Model, MultiplierCase, O1Point, O2Point};
use crate::retmap::boxcoords::{box_to_o1, box_to_o2, o1_to_box, o2_to_box, BoxPoint};

/// Literal forward composition in box coordinates.
pub(crate) fn compose_forward(model: &Model, k: u32, m: u32, p: &BoxPoint) -> Result<BoxPoint> {
    match model.params.case {
        MultiplierCase::DoubleFocus => {
            let o2 = box_to_o2(model, p)?;
            model.check_chart_o2(&o2, &model.m2_minus(), "F21", 0)?;
            let o1 = model.f21(&o2)?;
            model.check_chart_o1(&o1, &model.m1_plus(), "F21", 0)?;
            let o1 = iterate_f1(model, o1, k)?;
            model.check_chart_o1(&o1, &model.m1_minus(), "F12", 0)?;
            let q = model.f12(&o1)?;
            model.check_chart_o2(&q, &model.m2_plus(), "F12", 0)?;
            let q = iterate_f2(model, q, m)?;
            model.check_chart_o2(&q, &model.m2_minus(), "return", k as usize + m as usize)?;
            o2_to_box(model, &q)
        }
        _ => {
            let o1 = box_to_o1(model, p)?;
            model.check_chart_o1(&o1, &model.m1_plus(), "F1", 0)?;
            let o1 = iterate_f1(model, o1, k)?;
            model.check_chart_o1(&o1, &model.m1_minus(), "F12", 0)?;
            let q = model.f12(&o1)?;
            model.check_chart_o2(&q, &model.m2_plus(), "F12", 0)?;
            let q = iterate_f2(model, q, m)?;
            model.check_chart_o2(&q, &model.m2_minus(), "F21", 0)?;
            let out = model.f21(&q)?;
            model.check_chart_o1(&out, &model.m1_plus(), "F21", 0)?;
            o1_to_box(model, &out)
        }
    }
}

/// Literal backward composition (inverse return map) in box coordinates.
pub(crate) fn compose_backward(model: &Model, k: u32, m: u32, pbar: &BoxPoint) -> Result<BoxPoint> {
    match model.params.case {
        MultiplierCase::DoubleFocus => {
            let o2 = box_to_o2(model, pbar)?;
            model.check_chart_o2(&o2, &model.m2_minus(), "F2^-1", 0)?;
            let q = iterate_f2_inv(model, o2, m)?;
            model.check_chart_o2(&q, &model.m2_plus(), "F12^-1", 0)?;
            let o1 = model.f12_inverse(&q)?;
            model.check_chart_o1(&o1, &model.m1_minus(), "F12^-1", 0)?;
            let o1 = iterate_f1_inv(model, o1, k)?;
            model.check_chart_o1(&o1, &model.m1_plus(), "F21^-1", 0)?;
            let p = model.f21_inverse(&o1)?;
            model.check_chart_o2(&p, &model.m2_minus(), "F21^-1", 0)?;
            o2_to_box(model, &p)
        }
        _ => {
            let o1 = box_to_o1(model, pbar)?;
            model.check_chart_o1(&o1, &model.m1_plus(), "F21^-1", 0)?;
            let q = model.f21_inverse(&o1)?;
            model.check_chart_o2(&q, &model.m2_minus(), "F21^-1", 0)?;
            let q = iterate_f2_inv(model, q, m)?;
            model.check_chart_o2(&q, &model.m2_plus(), "F12^-1", 0)?;
            let o1 = model.f12_inverse(&q)?;
            model.check_chart_o1(&o1, &model.m1_minus(), "F12^-1", 0)?;
            let p = iterate_f1_inv(model, o1, k)?;
            model.check_chart_o1(&p, &model.m1_plus(), "F1^-1", 0)?;
            o1_to_box(model, &p)
        }
    }
}

fn iterate_f1(model: &Model, mut p: O1Point, k: u32) -> Result<O1Point> {
    for j in 1..=k {
        p = model.f1(&p)?;
        model.check_chart_o1(&p, &O1Point::zero(model), "F1", j as usize)?;
    }
    Ok(p)
}

fn iterate_f2(model: &Model, mut p: O2Point, m: u32) -> Result<O2Point> {
    for j in 1..=m {
        p = model.f2(&p)?;
        model.check_chart_o2(&p, &O2Point::zero(model), "F2", j as usize)?;
    }
    Ok(p)
}

fn iterate_f1_inv(model: &Model, mut p: O1Point, k: u32) -> Result<O1Point> {
    for j in 1..=k {
        p = model.f1_inverse(&p)?;
        model.check_chart_o1(&p, &O1Point::zero(model), "F1^-1", j as usize)?;
    }
    Ok(p)
}

fn iterate_f2_inv(model: &Model, mut p: O2Point, m: u32) -> Result<O2Point> {
    for j in 1..=m {
        p = model.f2_inverse(&p)?;
        model.check_chart_o2(&p, &O2Point::zero(model), "F2^-1", j as usize)?;
    }
    Ok(p)
}
