//! First-return maps `T_{k,m}` in box coordinates: exact composition of the
//! model maps, the cross-form normal form, affine skeleton coefficients, and
//! coding solvers.

pub mod boxcoords;
pub mod coding;
pub mod coeffs;
pub(crate) mod compose;
pub(crate) mod cross;
pub mod tangent;

use nalgebra::DVector;

use crate::error::Result;
use crate::model::{CycleParams, Model};
pub use boxcoords::{box_z_dim, BoxPoint};
pub use coding::{fixed_point, solve_coding, Coding};
pub use coeffs::{lambda_k_gamma_m, return_coeffs, ReturnCoeffs};
pub use cross::CrossImage;

/// Return-map evaluators for one parameter set.
#[derive(Clone)]
pub struct ReturnMap {
    pub model: Model,
}

impl ReturnMap {
    pub fn new(params: &CycleParams) -> Result<Self> {
        Ok(ReturnMap { model: Model::new(params)? })
    }

    pub fn from_model(model: Model) -> Self {
        ReturnMap { model }
    }

    /// Closed-form affine skeleton of `T_{k,m}`.
    pub fn coeffs(&self, k: u32, m: u32) -> Result<ReturnCoeffs> {
        return_coeffs(&self.model, k, m)
    }

    /// Exact affine skeleton `(A, B)` of the central box relation. Equals
    /// `(A_km, B_km)` except in the double-focus case, where the tangent
    /// corrections of the rotating denominator are folded in.
    pub fn effective_coeffs(&self, k: u32, m: u32) -> Result<(f64, f64)> {
        match self.model.params.case {
            crate::model::MultiplierCase::DoubleFocus => {
                coeffs::df_effective_affine(&self.model, k, m)
            }
            _ => {
                let c = self.coeffs(k, m)?;
                Ok((c.a_km, c.b_km))
            }
        }
    }

    /// Cross-form evaluation `(X, Y', Z) -> (X', Y, Z')` with the box
    /// precondition enforced on the arguments.
    pub fn cross(&self, k: u32, m: u32, x: f64, ybar: &DVector<f64>, z: &DVector<f64>) -> Result<CrossImage> {
        boxcoords::check_in_box(
            &self.model,
            &BoxPoint { x, y: ybar.clone(), z: z.clone() },
            1e-12,
        )?;
        cross::cross_eval(&self.model, k, m, x, ybar, z)
    }

    /// Cross-form evaluation without the box check (chart checks still
    /// apply). Coding orbits may legitimately leave the nominal box while
    /// staying well inside the charts.
    pub fn cross_relaxed(
        &self,
        k: u32,
        m: u32,
        x: f64,
        ybar: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<CrossImage> {
        cross::cross_eval(&self.model, k, m, x, ybar, z)
    }

    /// Literal forward composition of the model maps; the brute-force oracle.
    /// Errors name the first iterate that leaves its chart.
    pub fn compose(&self, k: u32, m: u32, p: &BoxPoint) -> Result<BoxPoint> {
        compose::compose_forward(&self.model, k, m, p)
    }

    /// Literal backward composition (the inverse return map).
    pub fn compose_backward(&self, k: u32, m: u32, pbar: &BoxPoint) -> Result<BoxPoint> {
        compose::compose_backward(&self.model, k, m, pbar)
    }

    /// Reconstruct the full domain point with given `(X, Z)` and image `Y'`:
    /// the unique strip point the cross form solves for.
    pub fn strip_point(
        &self,
        k: u32,
        m: u32,
        x: f64,
        ybar: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<(BoxPoint, BoxPoint)> {
        let img = self.cross_relaxed(k, m, x, ybar, z)?;
        let p = BoxPoint { x, y: img.y.clone(), z: z.clone() };
        let q = BoxPoint { x: img.xbar, y: ybar.clone(), z: img.zbar.clone() };
        Ok((p, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::BlabError;
    use crate::model::params::{ref1, ref_df, ref_sf, TailSpec};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cross_matches_affine_skeleton_exactly_at_ref1() {
        let ret = ReturnMap::new(&ref1()).unwrap();
        let c = ret.coeffs(20, 12).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let x = rng.random_range(-0.1..0.1);
            let ybar = DVector::from_vec(vec![rng.random_range(-0.1..0.1)]);
            let z = DVector::from_vec(vec![rng.random_range(-0.1..0.1)]);
            let img = ret.cross(20, 12, x, &ybar, &z).unwrap();
            assert_relative_eq!(img.xbar, c.r_km(x), epsilon = 1e-13);
            assert!(img.y.amax() < 1e-11);
            assert!(img.zbar.amax() < 1e-6);
        }
    }

    #[test]
    fn cross_example_values() {
        // (k,m) = (20,12), (X, Y', Z) = (0.01, 0, 0):
        // X' = A*0.01 + B ~ 0.011891.
        let ret = ReturnMap::new(&ref1()).unwrap();
        let img = ret
            .cross(20, 12, 0.01, &DVector::zeros(1), &DVector::zeros(1))
            .unwrap();
        let a = 531441.0 / 1048576.0;
        assert_relative_eq!(img.xbar, a * 0.01 + (a - 0.5), epsilon = 1e-12);
        // Affine root: X = -B/A maps to X' = 0.
        let c = ret.coeffs(20, 12).unwrap();
        let img = ret.cross(20, 12, c.root(), &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!(img.xbar.abs() < 1e-15);
    }

    #[test]
    fn compose_agrees_with_cross_on_strip_points() {
        for (params, pairs) in [
            (ref1(), vec![(20u32, 12u32), (39, 24)]),
            (ref_sf(), vec![(20, 12), (17, 10)]),
        ] {
            let ret = ReturnMap::new(&params).unwrap();
            let mut rng = StdRng::seed_from_u64(2);
            for (k, m) in pairs {
                for _ in 0..20 {
                    let x = rng.random_range(-0.1..0.1);
                    let ybar = DVector::from_fn(ret.model.d1, |_, _| rng.random_range(-0.1..0.1));
                    let z = DVector::from_fn(box_z_dim(&ret.model), |_, _| {
                        rng.random_range(-0.1..0.1)
                    });
                    let (p, q) = ret.strip_point(k, m, x, &ybar, &z).unwrap();
                    let fwd = ret.compose(k, m, &p).unwrap();
                    assert!((fwd.x - q.x).abs() < 1e-9, "X mismatch {} vs {}", fwd.x, q.x);
                    if fwd.z.len() > 0 {
                        assert!((&fwd.z - &q.z).amax() < 1e-9);
                    }
                    // The backward composition re-checks the components that
                    // are contracting in that direction: Y always, X only in
                    // the saddle case (the focus cases bury the second
                    // central coordinate under v+ at depth Q1^m lambda^k,
                    // below f64 resolution for a pointwise inverse).
                    let back = ret.compose_backward(k, m, &q).unwrap();
                    if ret.model.d_cs == 1 {
                        assert!((back.x - p.x).abs() < 1e-9);
                    }
                    assert!((&back.y - &p.y).amax() < 1e-9);
                }
            }
        }
    }

    /// Double-focus cross form against the full normal-form relation
    ///
    /// ```text
    /// (1 + b41 t) X' = (A_km X + B_km)/cos(th) + u1-(1/(sqrt(1+a14^2) cos th) - 1) - t u2-
    /// ```
    ///
    /// with `th = m w2 + eta3`, `t = tan(th)`, exact at `Y' = Z = 0`, zero
    /// tails, up to the exponentially small pass couplings.
    #[test]
    fn df_cross_matches_effective_skeleton() {
        let ret = ReturnMap::new(&ref_df()).unwrap();
        let theta = 0.5f64.ln().abs() / 3.0f64.ln();
        let mut found = 0;
        for k in 5u32..1500 {
            for dm in -1i64..=1 {
                let m0 = (k as f64 * theta).round() as i64 + dm;
                if m0 < 3 {
                    continue;
                }
                let m = m0 as u32;
                let Ok((a_eff, b_eff)) = ret.effective_coeffs(k, m) else { continue };
                if b_eff.abs() > 0.03 || a_eff.abs() < 0.05 || a_eff.abs() > 0.95 {
                    continue;
                }
                for x in [-0.05, 0.0, 0.05] {
                    let img = ret.cross(k, m, x, &DVector::zeros(1), &DVector::zeros(2)).unwrap();
                    assert!(
                        (img.xbar - (a_eff * x + b_eff)).abs() < 1e-6,
                        "({k},{m}) X={x}: {} vs {}",
                        img.xbar,
                        a_eff * x + b_eff
                    );
                }
                // Consistency with the literal composition, within what each
                // direction can resolve: the second central coordinate is
                // part of the solved block, so the forward X' degrades like
                // gamma^m P1^k eps and the backward X like lambda^-k eps.
                let (p, q) =
                    ret.strip_point(k, m, 0.01, &DVector::zeros(1), &DVector::zeros(2)).unwrap();
                if k <= 8 {
                    let fwd = ret.compose(k, m, &p).unwrap();
                    assert!((fwd.x - q.x).abs() < 1e-9);
                }
                let back = ret.compose_backward(k, m, &q).unwrap();
                assert!((back.x - p.x).abs() < 1e-9 + 2f64.powi(k as i32) * 1e-15);
                assert!((&back.y - &p.y).amax() < 1e-8);
                found += 1;
            }
            if found >= 3 {
                break;
            }
        }
        assert!(found >= 3, "no balanced double-focus pairs found in the scan");
    }

    #[test]
    fn chart_escape_for_far_points() {
        let ret = ReturnMap::new(&ref1()).unwrap();
        let e = ret.compose(
            1,
            1,
            &BoxPoint { x: 2.0, y: DVector::zeros(1), z: DVector::zeros(1) },
        );
        assert!(matches!(e, Err(BlabError::ChartEscape { .. })), "{e:?}");
    }

    #[test]
    fn tails_respect_phi_bounds() {
        let mut params = ref1();
        params.tails = TailSpec { c_g: 1e-3, c_t: 1e-3 };
        let ret = ReturnMap::new(&params).unwrap();
        let c = ret.coeffs(20, 12).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let x = rng.random_range(-0.1..0.1);
            let ybar = DVector::from_vec(vec![rng.random_range(-0.1..0.1)]);
            let z = DVector::from_vec(vec![rng.random_range(-0.1..0.1)]);
            let img = ret.cross(20, 12, x, &ybar, &z).unwrap();
            assert!((img.xbar - c.r_km(x)).abs() < 1e-4, "residual too large");
        }
    }

    #[test]
    fn compose_at_box_origin_gives_b_km() {
        // The strip point with (X, Y', Z) = (0, 0, 0) has |Y| < 1e-12 at
        // (k, m) = (20, 12) and its literal composition returns exactly B_km
        // in the central coordinate.
        let ret = ReturnMap::new(&ref1()).unwrap();
        let (p, _) = ret.strip_point(20, 12, 0.0, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!(p.y.amax() < 1e-12);
        let fwd = ret.compose(20, 12, &p).unwrap();
        let c = ret.coeffs(20, 12).unwrap();
        assert_relative_eq!(fwd.x, c.b_km, epsilon = 1e-12);
        assert_relative_eq!(fwd.x, 531441.0 / 1048576.0 - 0.5, epsilon = 1e-12);
    }
}
