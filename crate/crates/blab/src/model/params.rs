use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BlabError, Result};

/// Which of the three central-multiplier configurations the cycle has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiplierCase {
    Saddle,
    SaddleFocus,
    DoubleFocus,
}

/// Coefficients of the polynomial tails added to the otherwise affine model maps.
///
/// `c_g` scales the local-map tails (`g1 = c_g * |x|^2 * y_1` and analogues),
/// `c_t` scales the quadratic tails of the transition maps. Both default to 0,
/// in which case every model map is exactly block-linear / affine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    #[serde(default)]
    pub c_g: f64,
    #[serde(default)]
    pub c_t: f64,
}

impl Default for TailSpec {
    fn default() -> Self {
        TailSpec { c_g: 0.0, c_t: 0.0 }
    }
}

fn default_sign() -> bool {
    false
}

/// All scalar/matrix data defining a model heterodimensional cycle.
///
/// Coordinates near `O1` are `(x, y, z)` with `x` the central–stable block
/// (dimension 1 or 2), `y` the unstable block (dimension `d1`) and `z` the
/// strong-stable block. Coordinates near `O2` are `(u, v, w)` with `u` the
/// central–unstable block, `v` the stable block and `w` the strong-unstable
/// block. `a_ij` and `b_ij` are the full cross-form coefficient matrices of
/// the transition maps; see [`crate::model::transition`] for the block layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleParams {
    pub case: MultiplierCase,
    pub d: usize,
    pub d1: usize,
    /// Modulus of the central stable multiplier, in (0,1).
    pub lambda: f64,
    #[serde(default = "default_sign")]
    pub lambda_negative: bool,
    /// Modulus of the central unstable multiplier, > 1.
    pub gamma: f64,
    #[serde(default = "default_sign")]
    pub gamma_negative: bool,
    /// Rotation angle at `O1` (saddle-focus case), in (0, pi).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Rotation angles at `O1` / `O2` (double-focus case), in (0, pi).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    /// Strong blocks, row-major. Spectra: P1, Q2 outside the unit circle;
    /// P2, Q1 inside.
    pub p1: Vec<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
    pub q1: Vec<Vec<f64>>,
    pub q2: Vec<Vec<f64>>,
    /// Central transition coefficient of F12 (equals `a_ij[0][0]`).
    pub a: f64,
    pub a_ij: Vec<Vec<f64>>,
    /// Central transition coefficient of F21 (equals `b_ij[0][0]`).
    pub b: f64,
    pub b_ij: Vec<Vec<f64>>,
    pub x_plus: Vec<f64>,
    pub z_plus: Vec<f64>,
    pub y_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub w_minus: Vec<f64>,
    /// Splitting parameter of the fragile heteroclinic (the model identifies
    /// the u-offset of `F12(W^u_loc(O1))` with `mu` exactly).
    pub mu: f64,
    /// Half-width of the return box, 0 < delta <= 0.25.
    pub delta: f64,
    /// Activation fraction, 0 < q < 1; `delta' = q * delta`.
    pub q: f64,
    #[serde(default)]
    pub tails: TailSpec,
}

/// Fixed radius of every model chart, in model coordinates.
pub const CHART_RADIUS: f64 = 1.0;
/// Slack allowed on chart membership checks (points on the boundary pass).
pub const CHART_SLACK: f64 = 1e-9;
pub const MAX_DELTA: f64 = 0.25;

impl CycleParams {
    /// Dimension of the central block at `O1` (1 or 2).
    pub fn d_cs(&self) -> usize {
        match self.case {
            MultiplierCase::Saddle => 1,
            _ => 2,
        }
    }

    /// Dimension of the central block at `O2` (1 or 2).
    pub fn d_cu(&self) -> usize {
        match self.case {
            MultiplierCase::DoubleFocus => 2,
            _ => 1,
        }
    }

    /// Dimension of the strong-stable block `z` at `O1`.
    pub fn dz(&self) -> usize {
        self.d - self.d1 - self.d_cs()
    }

    /// Dimension of the stable block `v` at `O2`.
    pub fn dv(&self) -> usize {
        self.d - self.d1 - 1
    }

    /// Dimension of the strong-unstable block `w` at `O2`.
    pub fn dw(&self) -> usize {
        self.d1 + 1 - self.d_cu()
    }

    /// Signed central stable multiplier.
    pub fn lambda_signed(&self) -> f64 {
        if self.lambda_negative { -self.lambda } else { self.lambda }
    }

    /// Signed central unstable multiplier.
    pub fn gamma_signed(&self) -> f64 {
        if self.gamma_negative { -self.gamma } else { self.gamma }
    }

    /// `delta' = q * delta`, the half-width of the activating domain.
    pub fn delta_prime(&self) -> f64 {
        self.q * self.delta
    }

    /// Whether negative central multipliers force even (k, m) pairs.
    pub fn needs_even_pairs(&self) -> bool {
        self.lambda_negative || self.gamma_negative
    }

    pub fn p1_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.p1)
    }
    pub fn p2_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.p2)
    }
    pub fn q1_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.q1)
    }
    pub fn q2_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.q2)
    }
    pub fn a_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.a_ij)
    }
    pub fn b_mat(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.b_ij)
    }

    pub fn x_plus_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.x_plus.clone())
    }
    pub fn u_minus_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.u_minus.clone())
    }

    /// Contraction bound for the `y`-direction of `F1^-1`: geometric mean of
    /// the inner spectral bound of `P1` and 1 (an interior witness for the
    /// existence constant `gamma_hat`).
    pub fn gamma_hat(&self) -> f64 {
        let m = min_modulus_eigenvalue(&self.p1_mat());
        if m <= 1.0 { 1.0 } else { m.sqrt() }
    }

    /// Interior witness for the existence constant `lambda_hat` in
    /// `(rho(Q1), 1)`: geometric mean of the spectral radius of `Q1` and 1.
    pub fn lambda_hat(&self) -> f64 {
        let r = spectral_radius(&self.q1_mat());
        if r >= 1.0 { 1.0 } else { r.sqrt() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: CycleParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::report::to_json_string(self)?)
    }

    /// Check every structural invariant; returns a descriptive error on the
    /// first violation. Non-degeneracy conditions C1-C4 are *not* checked
    /// here (degenerate cycles are valid inputs and produce failing
    /// [`crate::model::NondegeneracyReport`]s instead).
    pub fn validate(&self) -> Result<Self> {
        let fail = |msg: String| Err(BlabError::InvalidParams(msg));
        if self.d < 3 {
            return fail(format!("d = {} must be >= 3", self.d));
        }
        if self.d1 < 1 || self.d1 > self.d - 2 {
            return fail(format!("d1 = {} must satisfy 1 <= d1 <= d-2", self.d1));
        }
        if self.d_cs() + self.d1 > self.d {
            return fail("central + unstable blocks exceed the total dimension at O1".into());
        }
        if self.d_cu() > self.d1 + 1 {
            return fail("central unstable block exceeds the unstable dimension at O2".into());
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail(format!("lambda modulus {} must lie in (0,1)", self.lambda));
        }
        if !(self.gamma > 1.0) {
            return fail(format!("gamma modulus {} must exceed 1", self.gamma));
        }
        match self.case {
            MultiplierCase::Saddle => {
                if self.omega.is_some() || self.omega1.is_some() || self.omega2.is_some() {
                    return fail("rotation angles are not allowed in the saddle case".into());
                }
            }
            MultiplierCase::SaddleFocus => {
                let w = self
                    .omega
                    .ok_or_else(|| BlabError::InvalidParams("omega required".into()))?;
                if !(w > 0.0 && w < std::f64::consts::PI) {
                    return fail(format!("omega = {w} must lie in (0, pi)"));
                }
                if self.lambda_negative || self.gamma_negative {
                    return fail("sign flags are only meaningful in the saddle case".into());
                }
            }
            MultiplierCase::DoubleFocus => {
                let w1 = self
                    .omega1
                    .ok_or_else(|| BlabError::InvalidParams("omega1 required".into()))?;
                let w2 = self
                    .omega2
                    .ok_or_else(|| BlabError::InvalidParams("omega2 required".into()))?;
                for (name, w) in [("omega1", w1), ("omega2", w2)] {
                    if !(w > 0.0 && w < std::f64::consts::PI) {
                        return fail(format!("{name} = {w} must lie in (0, pi)"));
                    }
                }
                if self.lambda_negative || self.gamma_negative {
                    return fail("sign flags are only meaningful in the saddle case".into());
                }
            }
        }
        check_square(&self.p1, self.d1, "P1")?;
        check_square(&self.p2, self.dz(), "P2")?;
        check_square(&self.q1, self.dv(), "Q1")?;
        check_square(&self.q2, self.dw(), "Q2")?;
        check_shape(&self.a_ij, self.d, self.d, "a_ij")?;
        check_shape(&self.b_ij, self.d, self.d, "b_ij")?;
        check_len(&self.x_plus, self.d_cs(), "x_plus")?;
        check_len(&self.z_plus, self.dz(), "z_plus")?;
        check_len(&self.y_minus, self.d1, "y_minus")?;
        check_len(&self.v_plus, self.dv(), "v_plus")?;
        check_len(&self.u_minus, self.d_cu(), "u_minus")?;
        check_len(&self.w_minus, self.dw(), "w_minus")?;
        if (self.a - self.a_ij[0][0]).abs() > 0.0 {
            return fail(format!(
                "a = {} must equal the central cross coefficient a_ij[0][0] = {}",
                self.a, self.a_ij[0][0]
            ));
        }
        if (self.b - self.b_ij[0][0]).abs() > 0.0 {
            return fail(format!(
                "b = {} must equal the central cross coefficient b_ij[0][0] = {}",
                self.b, self.b_ij[0][0]
            ));
        }
        // Multiplier ordering: strong blocks strictly dominated by / dominating
        // the central multipliers.
        let rp2 = spectral_radius(&self.p2_mat());
        if self.dz() > 0 && rp2 >= self.lambda {
            return fail(format!(
                "spectral radius of P2 ({rp2:.6}) must be < |lambda| = {}",
                self.lambda
            ));
        }
        let mp1 = min_modulus_eigenvalue(&self.p1_mat());
        if mp1 <= 1.0 {
            return fail(format!("P1 eigenvalues must lie outside the unit circle (min modulus {mp1:.6})"));
        }
        let rq1 = spectral_radius(&self.q1_mat());
        if self.dv() > 0 && rq1 >= 1.0 {
            return fail(format!("Q1 eigenvalues must lie inside the unit circle (radius {rq1:.6})"));
        }
        let mq2 = min_modulus_eigenvalue(&self.q2_mat());
        if self.dw() > 0 && mq2 <= self.gamma {
            return fail(format!(
                "Q2 eigenvalues must dominate |gamma| = {} (min modulus {mq2:.6})",
                self.gamma
            ));
        }
        if !(self.delta > 0.0 && self.delta <= MAX_DELTA) {
            return fail(format!("delta = {} must lie in (0, {MAX_DELTA}]", self.delta));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return fail(format!("q = {} must lie in (0,1)", self.q));
        }
        if self.tails.c_g < 0.0 || self.tails.c_t < 0.0 {
            return fail("tail coefficients must be non-negative".into());
        }
        Ok(self.clone())
    }
}

fn check_square(m: &[Vec<f64>], n: usize, name: &str) -> Result<()> {
    check_shape(m, n, n, name)
}

fn check_shape(m: &[Vec<f64>], rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(BlabError::InvalidParams(format!(
            "{name} must be {rows}x{cols}, got {}x{}",
            m.len(),
            m.first().map(|r| r.len()).unwrap_or(0)
        )));
    }
    Ok(())
}

fn check_len(v: &[f64], n: usize, name: &str) -> Result<()> {
    if v.len() != n {
        return Err(BlabError::DimensionMismatch {
            what: Box::leak(name.to_string().into_boxed_str()),
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn min_modulus_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(f64::INFINITY, f64::min)
}

fn diag(vals: &[f64]) -> Vec<Vec<f64>> {
    let n = vals.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { vals[i] } else { 0.0 }).collect())
        .collect()
}

fn zeros(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; cols]; rows]
}

/// Reference parameter set used throughout the tests: d = 3 saddle with
/// lambda = 1/2, gamma = 3, a = b = 1, x+ = 1, u- = 1/2, so theta = ln2/ln3
/// is irrational, alpha = 1/2 and every return-map quantity has a closed form.
pub fn ref1() -> CycleParams {
    // a_ij rows (u, v, y~) x cols (x~, w, z~); b_ij rows (x, w~, z) x cols (u~, v~, y).
    let mut a_ij = zeros(3, 3);
    a_ij[0][0] = 1.0; // a: u <- x~
    a_ij[1][2] = 1.0; // v <- z~
    a_ij[2][1] = 1.0; // y~ <- w (invertible solved block)
    let mut b_ij = zeros(3, 3);
    b_ij[0][0] = 1.0; // b: x <- u~
    b_ij[1][2] = 1.0; // w~ <- y (invertible solved block)
    b_ij[2][1] = 1.0; // z <- v~
    CycleParams {
        case: MultiplierCase::Saddle,
        d: 3,
        d1: 1,
        lambda: 0.5,
        lambda_negative: false,
        gamma: 3.0,
        gamma_negative: false,
        omega: None,
        omega1: None,
        omega2: None,
        p1: diag(&[4.0]),
        p2: diag(&[0.25]),
        q1: diag(&[0.25]),
        q2: diag(&[4.0]),
        a: 1.0,
        a_ij,
        b: 1.0,
        b_ij,
        x_plus: vec![1.0],
        z_plus: vec![0.2],
        y_minus: vec![1.0],
        v_plus: vec![1.0],
        u_minus: vec![0.5],
        w_minus: vec![0.3],
        mu: 0.0,
        delta: 0.1,
        q: 0.1,
        tails: TailSpec::default(),
    }
}

/// REF1 with the fragile-transition sign flipped: a type-II cycle.
pub fn ref1_type2() -> CycleParams {
    let mut p = ref1();
    p.a = -1.0;
    p.a_ij[0][0] = -1.0;
    p
}

/// REF1 with `u- = 2.5`, so alpha = 2.5 and the blender is center-unstable.
pub fn ref1_cu() -> CycleParams {
    let mut p = ref1();
    p.u_minus = vec![2.5];
    p
}

/// Rational-theta reference: lambda = 1/2, gamma = 4, so theta = 1/2 exactly.
pub fn ref2() -> CycleParams {
    let mut p = ref1();
    p.gamma = 4.0;
    p.q2 = diag(&[8.0]);
    p
}

/// Saddle-focus reference: d = 3, complex central-stable multiplier
/// 0.5 * exp(i * 2pi(sqrt2 - 1)), real gamma = 3.
pub fn ref_sf() -> CycleParams {
    // a_ij rows (u, v, y~) x cols (x~1, x~2, w, z~[empty]);
    // b_ij rows (x1, x2, w~, z[empty]) x cols (u~, v~, y).
    let mut a_ij = zeros(3, 3);
    a_ij[0][0] = 1.0; // a11: u <- x~1
    a_ij[1][1] = 1.0; // a22: v <- x~2
    a_ij[2][2] = 1.0; // y~ <- w
    let mut b_ij = zeros(3, 3);
    b_ij[0][0] = 1.0; // b11
    b_ij[1][0] = 0.5; // b21
    b_ij[1][1] = 1.0; // b22: x2 <- v~
    b_ij[2][2] = 1.0; // w~ <- y
    CycleParams {
        case: MultiplierCase::SaddleFocus,
        d: 3,
        d1: 1,
        lambda: 0.5,
        lambda_negative: false,
        gamma: 3.0,
        gamma_negative: false,
        omega: Some(2.0 * std::f64::consts::PI * (std::f64::consts::SQRT_2 - 1.0)),
        omega1: None,
        omega2: None,
        p1: diag(&[4.0]),
        p2: zeros(0, 0),
        q1: diag(&[0.25]),
        q2: diag(&[4.0]),
        a: 1.0,
        a_ij,
        b: 1.0,
        b_ij,
        x_plus: vec![1.0, 0.2],
        z_plus: vec![],
        y_minus: vec![1.0],
        v_plus: vec![1.0],
        u_minus: vec![0.5],
        w_minus: vec![0.3],
        mu: 0.0,
        delta: 0.1,
        q: 0.1,
        tails: TailSpec::default(),
    }
}

/// Double-focus reference: d = 4, complex multipliers on both sides.
pub fn ref_df() -> CycleParams {
    // a_ij rows (u1, v1, v2, y~) x cols (x~1, x~2, u2, z~);
    // b_ij rows (x1, x2, u~2, z) x cols (u~1, v~1, v~2, y).
    let mut a_ij = zeros(4, 4);
    a_ij[0][0] = 1.0; // a11: u1 <- x~1
    a_ij[0][2] = 0.2; // a14: u1 <- u2 (sets eta3 = -atan(0.2))
    a_ij[1][1] = 1.0; // v1 <- x~2
    a_ij[2][3] = 1.0; // v2 <- z~
    a_ij[3][2] = 1.0; // y~ <- u2 (invertible solved block)
    let mut b_ij = zeros(4, 4);
    b_ij[0][0] = 1.0; // b11
    b_ij[1][0] = 0.5; // b21
    b_ij[1][1] = 1.0; // x2 <- v~1
    b_ij[2][0] = 0.3; // b41: u~2 <- u~1
    b_ij[2][3] = 1.0; // u~2 <- y (invertible solved block)
    b_ij[3][2] = 1.0; // z <- v~2
    CycleParams {
        case: MultiplierCase::DoubleFocus,
        d: 4,
        d1: 1,
        lambda: 0.5,
        lambda_negative: false,
        gamma: 3.0,
        gamma_negative: false,
        omega: None,
        omega1: Some(2.0 * std::f64::consts::PI * (std::f64::consts::SQRT_2 - 1.0)),
        omega2: Some(1.0),
        p1: diag(&[4.0]),
        p2: diag(&[0.25]),
        q1: diag(&[0.25, 0.25]),
        q2: zeros(0, 0),
        a: 1.0,
        a_ij,
        b: 1.0,
        b_ij,
        x_plus: vec![1.0, 0.2],
        z_plus: vec![0.2],
        y_minus: vec![1.0],
        v_plus: vec![1.0, 1.0],
        u_minus: vec![0.5, 0.2],
        w_minus: vec![],
        mu: 0.0,
        delta: 0.1,
        q: 0.1,
        tails: TailSpec::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sets_validate() {
        for p in [ref1(), ref1_type2(), ref1_cu(), ref2(), ref_sf(), ref_df()] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn block_dimensions() {
        let p = ref1();
        assert_eq!((p.d_cs(), p.d1, p.dz()), (1, 1, 1));
        assert_eq!((p.d_cu(), p.dv(), p.dw()), (1, 1, 1));
        let p = ref_sf();
        assert_eq!((p.d_cs(), p.d1, p.dz()), (2, 1, 0));
        assert_eq!((p.d_cu(), p.dv(), p.dw()), (1, 1, 1));
        let p = ref_df();
        assert_eq!((p.d_cs(), p.d1, p.dz()), (2, 1, 1));
        assert_eq!((p.d_cu(), p.dv(), p.dw()), (2, 2, 0));
    }

    #[test]
    fn rejects_bad_multipliers() {
        let mut p = ref1();
        p.lambda = 1.5;
        assert!(p.validate().is_err());
        let mut p = ref1();
        p.gamma = 0.5;
        assert!(p.validate().is_err());
        let mut p = ref1();
        p.p2 = vec![vec![0.9]]; // not dominated by lambda = 0.5
        assert!(p.validate().is_err());
    }

    #[test]
    fn delta_prime() {
        let p = ref1();
        assert_eq!(p.delta_prime(), 0.1 * 0.1);
    }
}
