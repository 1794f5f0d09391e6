//! The parametric model diffeomorphism: local maps near the two periodic
//! points and the two heteroclinic transition maps.

pub mod local;
pub mod nondeg;
pub mod params;
pub mod transition;

use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{BlabError, Result};
pub use local::{central_block, O1Point, O2Point};
pub use nondeg::{validate_nondegeneracy, NondegeneracyReport};
pub use params::{
    ref1, ref1_cu, ref1_type2, ref2, ref_df, ref_sf, spectral_radius, CycleParams,
    MultiplierCase, TailSpec, CHART_RADIUS, CHART_SLACK,
};

type Lu = nalgebra::linalg::LU<f64, Dyn, Dyn>;

/// A validated parameter set with all derived matrices precomputed.
#[derive(Clone)]
pub struct Model {
    pub params: CycleParams,
    pub d_cs: usize,
    pub d_cu: usize,
    pub d1: usize,
    pub dz: usize,
    pub dv: usize,
    pub dw: usize,
    /// Central blocks of the local maps (scaling or rotation-scaling).
    pub l1: DMatrix<f64>,
    pub l1_inv: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l2_inv: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub p1_inv: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub p2_inv: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q1_inv: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub q2_inv: DMatrix<f64>,
    /// Row blocks of the F12 cross coefficients (u1-row, v-rows, y~-rows).
    pub a_u: DMatrix<f64>,
    pub a_v: DMatrix<f64>,
    pub a_y: DMatrix<f64>,
    pub(crate) a_y_x: DMatrix<f64>,
    pub(crate) a_y_s: DMatrix<f64>,
    pub(crate) a_y_z: DMatrix<f64>,
    pub(crate) a_y_s_lu: Lu,
    /// Row blocks of the F21 cross coefficients (x-rows, solved rows, z-rows).
    pub b_x: DMatrix<f64>,
    pub b_s: DMatrix<f64>,
    pub b_z: DMatrix<f64>,
    pub(crate) b_s_u: DMatrix<f64>,
    pub(crate) b_s_v: DMatrix<f64>,
    pub(crate) b_s_y: DMatrix<f64>,
    pub(crate) b_s_y_lu: Lu,
    pub x_plus: DVector<f64>,
    pub z_plus: DVector<f64>,
    pub y_minus: DVector<f64>,
    pub v_plus: DVector<f64>,
    pub u_minus: DVector<f64>,
    pub w_minus: DVector<f64>,
}

impl Model {
    pub fn new(params: &CycleParams) -> Result<Self> {
        let params = params.validate()?;
        let d_cs = params.d_cs();
        let d_cu = params.d_cu();
        let d1 = params.d1;
        let dz = params.dz();
        let dv = params.dv();
        let dw = params.dw();
        let l1 = central_block(
            params.lambda_signed(),
            params.omega.or(params.omega1),
            d_cs,
        );
        let l2 = central_block(params.gamma_signed(), params.omega2, d_cu);
        let inv = |m: &DMatrix<f64>, name: &str| -> Result<DMatrix<f64>> {
            m.clone().try_inverse().ok_or_else(|| {
                BlabError::InvalidParams(format!("{name} must be invertible"))
            })
        };
        let p1 = params.p1_mat();
        let p2 = params.p2_mat();
        let q1 = params.q1_mat();
        let q2 = params.q2_mat();
        let a = params.a_mat();
        let b = params.b_mat();
        let a_u: DMatrix<f64> = a.rows(0, 1).into();
        let a_v: DMatrix<f64> = a.rows(1, dv).into();
        let a_y: DMatrix<f64> = a.rows(1 + dv, d1).into();
        let a_y_x: DMatrix<f64> = a_y.columns(0, d_cs).into();
        let a_y_s: DMatrix<f64> = a_y.columns(d_cs, d1).into();
        let a_y_z: DMatrix<f64> = a_y.columns(d_cs + d1, dz).into();
        let b_x: DMatrix<f64> = b.rows(0, d_cs).into();
        let b_s: DMatrix<f64> = b.rows(d_cs, d1).into();
        let b_z: DMatrix<f64> = b.rows(d_cs + d1, dz).into();
        let b_s_u: DMatrix<f64> = b_s.columns(0, 1).into();
        let b_s_v: DMatrix<f64> = b_s.columns(1, dv).into();
        let b_s_y: DMatrix<f64> = b_s.columns(1 + dv, d1).into();
        Ok(Model {
            l1_inv: inv(&l1, "central block of F1")?,
            l2_inv: inv(&l2, "central block of F2")?,
            p1_inv: inv(&p1, "P1")?,
            p2_inv: inv(&p2, "P2")?,
            q1_inv: inv(&q1, "Q1")?,
            q2_inv: inv(&q2, "Q2")?,
            a_y_s_lu: a_y_s.clone().lu(),
            b_s_y_lu: b_s_y.clone().lu(),
            l1,
            l2,
            p1,
            p2,
            q1,
            q2,
            a_u,
            a_v,
            a_y,
            a_y_x,
            a_y_s,
            a_y_z,
            b_x,
            b_s,
            b_z,
            b_s_u,
            b_s_v,
            b_s_y,
            x_plus: DVector::from_vec(params.x_plus.clone()),
            z_plus: DVector::from_vec(params.z_plus.clone()),
            y_minus: DVector::from_vec(params.y_minus.clone()),
            v_plus: DVector::from_vec(params.v_plus.clone()),
            u_minus: DVector::from_vec(params.u_minus.clone()),
            w_minus: DVector::from_vec(params.w_minus.clone()),
            d_cs,
            d_cu,
            d1,
            dz,
            dv,
            dw,
            params,
        })
    }

    pub fn m1_plus(&self) -> O1Point {
        O1Point {
            x: self.x_plus.clone(),
            y: DVector::zeros(self.d1),
            z: self.z_plus.clone(),
        }
    }

    pub fn m1_minus(&self) -> O1Point {
        O1Point {
            x: DVector::zeros(self.d_cs),
            y: self.y_minus.clone(),
            z: DVector::zeros(self.dz),
        }
    }

    pub fn m2_plus(&self) -> O2Point {
        O2Point {
            u: DVector::zeros(self.d_cu),
            v: self.v_plus.clone(),
            w: DVector::zeros(self.dw),
        }
    }

    pub fn m2_minus(&self) -> O2Point {
        O2Point {
            u: self.u_minus.clone(),
            v: DVector::zeros(self.dv),
            w: self.w_minus.clone(),
        }
    }

    /// Per-block chart bounds for the `O1` chart: the nominal radius,
    /// enlarged to keep every reference point and its return box inside.
    pub fn o1_chart_bounds(&self) -> [f64; 3] {
        let head = CHART_RADIUS;
        let pad = params::MAX_DELTA + CHART_SLACK;
        [
            head.max(empty_safe_amax(&self.x_plus)) + pad,
            head.max(empty_safe_amax(&self.y_minus)) + pad,
            head.max(empty_safe_amax(&self.z_plus)) + pad,
        ]
    }

    /// Per-block chart bounds for the `O2` chart.
    pub fn o2_chart_bounds(&self) -> [f64; 3] {
        let head = CHART_RADIUS;
        let pad = params::MAX_DELTA + CHART_SLACK;
        [
            head.max(empty_safe_amax(&self.u_minus)) + pad,
            head.max(empty_safe_amax(&self.v_plus)) + pad,
            head.max(empty_safe_amax(&self.w_minus)) + pad,
        ]
    }

    /// Chart membership around a reference point in the `O1` chart.
    pub fn check_chart_o1(
        &self,
        p: &O1Point,
        center: &O1Point,
        map: &'static str,
        iterate: usize,
    ) -> Result<()> {
        let bounds = self.o1_chart_bounds();
        for (i, (coord, dev)) in [
            ("x", (&p.x - &center.x).amax()),
            ("y", (&p.y - &center.y).amax()),
            ("z", (&p.z - &center.z).amax()),
        ]
        .into_iter()
        .enumerate()
        {
            if !(dev <= bounds[i]) {
                return Err(BlabError::ChartEscape {
                    map,
                    iterate,
                    coord,
                    value: dev,
                    radius: bounds[i],
                });
            }
        }
        Ok(())
    }

    /// Chart membership around a reference point in the `O2` chart.
    pub fn check_chart_o2(
        &self,
        p: &O2Point,
        center: &O2Point,
        map: &'static str,
        iterate: usize,
    ) -> Result<()> {
        let bounds = self.o2_chart_bounds();
        for (i, (coord, dev)) in [
            ("u", (&p.u - &center.u).amax()),
            ("v", (&p.v - &center.v).amax()),
            ("w", (&p.w - &center.w).amax()),
        ]
        .into_iter()
        .enumerate()
        {
            if !(dev <= bounds[i]) {
                return Err(BlabError::ChartEscape {
                    map,
                    iterate,
                    coord,
                    value: dev,
                    radius: bounds[i],
                });
            }
        }
        Ok(())
    }
}

fn amax_or_zero(v: &DVector<f64>) -> f64 {
    if v.is_empty() { 0.0 } else { v.amax() }
}

pub(crate) fn empty_safe_amax(v: &DVector<f64>) -> f64 {
    amax_or_zero(v)
}
