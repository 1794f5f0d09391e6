//! Graph-represented test discs for blender activation.
//!
//! A disc is a codimension-matching graph over the box's `Z`-cube
//! (horizontal, crossing the strong-stable direction) or `Y`-cube (vertical),
//! sampled on a tensor grid with a certified Lipschitz bound. Grids keep the
//! preimage-refinement step closed without symbolic function types.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BlabError, Result};
use crate::retmap::{box_z_dim, ReturnMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscOrientation {
    /// Graph over the `Z`-cube (the cs-blender test object).
    Horizontal,
    /// Graph over the `Y`-cube (the cu-blender test object).
    Vertical,
}

pub const DEFAULT_GRID: usize = 17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Disc {
    pub orientation: DiscOrientation,
    /// Half-width of the base cube.
    pub half_width: f64,
    pub grid_per_axis: usize,
    pub base_dim: usize,
    /// Dimension of the non-central graph block (`Y` for horizontal discs,
    /// `Z` for vertical ones).
    pub other_dim: usize,
    /// Central coordinate per node, row-major over the tensor grid.
    pub values_x: Vec<f64>,
    /// Non-central graph values per node.
    pub values_other: Vec<Vec<f64>>,
    /// Measured bound on the difference quotients of the graph.
    pub lipschitz: f64,
}

pub struct ProperCrossing {
    pub proper: bool,
    /// Worst slack of the sampled difference quotients against the cone
    /// budget (negative when a quotient violates the budget).
    pub margin: f64,
    pub max_central: f64,
    pub max_other: f64,
}

impl Disc {
    pub fn node_count(&self) -> usize {
        self.grid_per_axis.pow(self.base_dim as u32)
    }

    /// Base-cube coordinates of a node.
    pub fn node_coord(&self, index: usize) -> DVector<f64> {
        let n = self.grid_per_axis;
        let mut out = DVector::zeros(self.base_dim);
        let mut rest = index;
        for axis in 0..self.base_dim {
            let i = rest % n;
            rest /= n;
            out[axis] = -self.half_width + 2.0 * self.half_width * i as f64 / (n - 1) as f64;
        }
        out
    }

    fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.grid_per_axis - 1) as f64
    }

    /// Multilinear interpolation of the graph at a base point (clamped to
    /// the cube).
    pub fn eval(&self, base: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.grid_per_axis;
        let h = self.spacing();
        let mut lo_idx = vec![0usize; self.base_dim];
        let mut frac = vec![0.0f64; self.base_dim];
        for axis in 0..self.base_dim {
            let t = ((base[axis] + self.half_width) / h).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            lo_idx[axis] = i;
            frac[axis] = t - i as f64;
        }
        let corners = 1usize << self.base_dim;
        let mut x = 0.0;
        let mut other = DVector::zeros(self.other_dim);
        for corner in 0..corners {
            let mut weight = 1.0;
            let mut index = 0usize;
            let mut stride = 1usize;
            for axis in 0..self.base_dim {
                let hi = (corner >> axis) & 1 == 1;
                weight *= if hi { frac[axis] } else { 1.0 - frac[axis] };
                index += (lo_idx[axis] + if hi { 1 } else { 0 }) * stride;
                stride *= n;
            }
            x += weight * self.values_x[index];
            for c in 0..self.other_dim {
                other[c] += weight * self.values_other[index][c];
            }
        }
        (x, other)
    }

    /// Largest difference quotient `max(|dX|, |dOther|) / |dBase|` over all
    /// grid-adjacent node pairs.
    pub fn max_difference_quotient(&self) -> f64 {
        let n = self.grid_per_axis;
        let h = self.spacing();
        let mut worst = 0.0f64;
        for index in 0..self.node_count() {
            let mut stride = 1usize;
            let mut rest = index;
            for _axis in 0..self.base_dim {
                let i = rest % n;
                rest /= n;
                if i + 1 < n {
                    let neighbor = index + stride;
                    let dx = (self.values_x[neighbor] - self.values_x[index]).abs();
                    let mut dother = 0.0f64;
                    for c in 0..self.other_dim {
                        dother +=
                            (self.values_other[neighbor][c] - self.values_other[index][c]).powi(2);
                    }
                    worst = worst.max(dx.max(dother.sqrt()) / h);
                }
                stride *= n;
            }
        }
        worst
    }

    pub fn central_range(&self) -> (f64, f64) {
        let lo = self.values_x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Proper-crossing test: the graph covers the full base, its central values
/// stay within the activating region `[-delta', delta']`, its non-central
/// values stay in the cube, and the sampled difference quotients respect the
/// cone budget `max(|dX|, |dY|) < budget * |dZ|`.
pub fn is_proper_crossing(disc: &Disc, delta: f64, delta_prime: f64, budget: f64) -> ProperCrossing {
    let (lo, hi) = disc.central_range();
    let max_central = lo.abs().max(hi.abs());
    let max_other = disc
        .values_other
        .iter()
        .flat_map(|v| v.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max);
    let quot = disc.max_difference_quotient();
    let margin = budget - quot;
    ProperCrossing {
        proper: max_central <= delta_prime && max_other <= delta && margin > 0.0,
        margin,
        max_central,
        max_other,
    }
}

/// A random disc inside the proper-crossing budget: an affine graph with a
/// bounded constant part and slopes at a fraction of the cone budget.
pub fn random_proper_disc<R: Rng>(
    ret: &ReturnMap,
    orientation: DiscOrientation,
    budget: f64,
    rng: &mut R,
) -> Result<Disc> {
    let model = &ret.model;
    let delta = model.params.delta;
    let dp = model.params.delta_prime();
    let (base_dim, other_dim) = match orientation {
        DiscOrientation::Horizontal => (box_z_dim(model), model.d1),
        DiscOrientation::Vertical => (model.d1, box_z_dim(model)),
    };
    if base_dim == 0 {
        return Err(BlabError::Precondition("disc base is zero-dimensional".into()));
    }
    let c_x = rng.random_range(-0.5 * dp..0.5 * dp);
    let slope_x: Vec<f64> = (0..base_dim)
        .map(|_| rng.random_range(-0.3 * budget..0.3 * budget) / base_dim as f64)
        .collect();
    let c_other: Vec<f64> = (0..other_dim).map(|_| rng.random_range(-0.4 * delta..0.4 * delta)).collect();
    let slope_other: Vec<Vec<f64>> = (0..other_dim)
        .map(|_| {
            (0..base_dim)
                .map(|_| rng.random_range(-0.3 * budget..0.3 * budget) / (base_dim + other_dim) as f64)
                .collect()
        })
        .collect();
    let mut disc = Disc {
        orientation,
        half_width: delta,
        grid_per_axis: DEFAULT_GRID,
        base_dim,
        other_dim,
        values_x: vec![0.0; DEFAULT_GRID.pow(base_dim as u32)],
        values_other: vec![vec![0.0; other_dim]; DEFAULT_GRID.pow(base_dim as u32)],
        lipschitz: 0.0,
    };
    for index in 0..disc.node_count() {
        let base = disc.node_coord(index);
        let mut x = c_x;
        for axis in 0..base_dim {
            x += slope_x[axis] * base[axis];
        }
        disc.values_x[index] = x;
        for c in 0..other_dim {
            let mut val = c_other[c];
            for axis in 0..base_dim {
                val += slope_other[c][axis] * base[axis];
            }
            disc.values_other[index][c] = val;
        }
    }
    disc.lipschitz = disc.max_difference_quotient();
    Ok(disc)
}
