//! The operational blender certificate: iterate the preimage refinement on
//! random properly-crossing discs, certify the nested forward images down to
//! a witness point, and re-check each witness's backward orbit against the
//! covering strips.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::blender::disc::{is_proper_crossing, random_proper_disc, Disc, DiscOrientation};
use crate::blender::refine::preimage_step;
use crate::covering::{CoveringSet, Orientation};
use crate::error::{BlabError, Result};
use crate::model::CycleParams;
use crate::retmap::{box_z_dim, BoxPoint, ReturnMap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub pairs: Vec<(u32, u32)>,
    /// Sup-norm diameters of the nested forward images, one per depth level.
    pub diameters: Vec<f64>,
    /// Witness point in box coordinates `(X, Y.., Z..)`.
    pub witness: Vec<f64>,
    /// Distance of the witness from the initial disc graph.
    pub witness_graph_residual: f64,
    /// Backward-orbit depth re-verified for strip containment.
    pub wu_depth: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlenderCertificate {
    pub orientation: Orientation,
    pub covering_pairs: Vec<(u32, u32)>,
    pub cone_budget: f64,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub pass: bool,
}

/// Proper-crossing slope budget for the activating cone:
/// `q |alpha| / 4` in the oriented sense (`alpha` is already inverted for
/// the center-unstable orientation).
pub fn cone_budget(ret: &ReturnMap, covering: &CoveringSet) -> f64 {
    ret.model.params.q * covering.alpha.abs() / 4.0
}

/// Walk a sample point one level toward the initial disc.
///
/// For the center-stable chain the refined discs are preimages, so the step
/// is the forward image landing on `lower`; for the center-unstable chain
/// the refined discs are forward images, so the step recovers the preimage on
/// `lower` by the contraction in the returned `Y`.
fn chain_step_to_initial(
    ret: &ReturnMap,
    upper_point: &BoxPoint,
    lower: &Disc,
    k: u32,
    m: u32,
) -> Result<BoxPoint> {
    match lower.orientation {
        DiscOrientation::Horizontal => {
            let mut zbar = DVector::zeros(lower.base_dim);
            let mut out = None;
            for _ in 0..30 {
                let (_, ybar) = lower.eval(&zbar);
                let img = ret.cross_relaxed(k, m, upper_point.x, &ybar, &upper_point.z)?;
                let change = (&img.zbar - &zbar).amax();
                zbar = img.zbar.clone();
                let done = change < 1e-16;
                out = Some(BoxPoint { x: img.xbar, y: ybar, z: img.zbar });
                if done {
                    break;
                }
            }
            Ok(out.unwrap())
        }
        DiscOrientation::Vertical => {
            // Preimage on the lower disc: y solves the contraction
            // y = cross(s_X(y), Y'_upper, s_Z(y)).y.
            let mut y = DVector::zeros(lower.base_dim);
            let mut out = None;
            for _ in 0..60 {
                let (sx, sz) = lower.eval(&y);
                let img = ret.cross_relaxed(k, m, sx, &upper_point.y, &sz)?;
                let change = (&img.y - &y).amax();
                y = img.y.clone();
                let done = change < 1e-16;
                out = Some(BoxPoint { x: sx, y: img.y, z: sz });
                if done {
                    break;
                }
            }
            Ok(out.unwrap())
        }
    }
}

/// Full box point of a disc node.
fn disc_point(disc: &Disc, base: &DVector<f64>) -> BoxPoint {
    let (x, other) = disc.eval(base);
    match disc.orientation {
        DiscOrientation::Horizontal => BoxPoint { x, y: other, z: base.clone() },
        DiscOrientation::Vertical => BoxPoint { x, y: base.clone(), z: other },
    }
}

fn sup_distance(a: &BoxPoint, b: &BoxPoint) -> f64 {
    a.sup_distance(b)
}

/// Sample bases: the corners plus the center of the base cube.
fn sample_bases(dim: usize, half: f64) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for corner in 0..(1usize << dim) {
        let mut v = DVector::zeros(dim);
        for axis in 0..dim {
            v[axis] = if (corner >> axis) & 1 == 1 { half } else { -half };
        }
        out.push(v);
    }
    out.push(DVector::zeros(dim));
    out
}

/// Re-verify a recorded witness chain (deepest point first) as a genuine
/// confined orbit: every point inside the box, every consecutive pair
/// related by its return map through one well-conditioned cross evaluation.
fn chain_consistency(
    ret: &ReturnMap,
    chain: &[BoxPoint],
    pairs: &[(u32, u32)],
    orientation: DiscOrientation,
    depth: usize,
    tol: f64,
) -> Result<bool> {
    let delta = ret.model.params.delta;
    let bound = delta + 1e-9;
    let consistency_tol = 1e-9_f64.max(10.0 * tol);
    for p in chain {
        if p.x.abs() > bound
            || (p.y.len() > 0 && p.y.amax() > bound)
            || (p.z.len() > 0 && p.z.amax() > bound)
        {
            return Ok(false);
        }
    }
    for j in 0..chain.len().saturating_sub(1) {
        let pair = pairs[depth - 1 - j];
        let (from, to) = match orientation {
            DiscOrientation::Horizontal => (&chain[j], &chain[j + 1]),
            DiscOrientation::Vertical => (&chain[j + 1], &chain[j]),
        };
        let img = ret.cross_relaxed(pair.0, pair.1, from.x, &to.y, &from.z)?;
        let ok = (img.xbar - to.x).abs() <= consistency_tol
            && (from.y.len() == 0 || (&img.y - &from.y).amax() <= consistency_tol)
            && (to.z.len() == 0 || (&img.zbar - &to.z).amax() <= consistency_tol);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Membership of a point's backward orbit in the covering strips: each
/// backward image must stay inside the box, with the backward dynamics
/// solved through the cross form (the `Z` coordinate of a preimage is
/// unobservable at double precision behind the strong contraction, so its
/// realizability is checked through the image-side residual instead).
pub fn wu_membership(
    ret: &ReturnMap,
    point: &BoxPoint,
    pairs: &[(u32, u32)],
    depth: usize,
    tol: f64,
) -> Result<bool> {
    let model = &ret.model;
    let delta = model.params.delta;
    let dz = box_z_dim(model);
    let mut current = point.clone();
    let box_tol = 1e-9 + tol;
    for i in 0..depth.min(pairs.len()) {
        let (k, m) = pairs[i];
        if current.x.abs() > delta + box_tol
            || (current.y.len() > 0 && current.y.amax() > delta + box_tol)
            || (current.z.len() > 0 && current.z.amax() > delta + box_tol)
        {
            return Ok(false);
        }
        // Backward central solve: find X with cross-X'(X, Y_cur, 0) = X_cur.
        let zp = DVector::zeros(dz);
        let mut x = current.x;
        let (a_eff, _) = ret.effective_coeffs(k, m)?;
        let mut solved = None;
        for _ in 0..80 {
            let img = ret.cross_relaxed(k, m, x, &current.y, &zp)?;
            let res = img.xbar - current.x;
            if res.abs() < 1e-13 {
                solved = Some(img);
                break;
            }
            x -= res / a_eff;
        }
        let Some(img) = solved else {
            return Err(BlabError::NoConvergence { iterations: 80, residual: f64::NAN });
        };
        // Image-side consistency: the current Z must be realizable as the
        // image of some in-box preimage.
        if current.z.len() > 0 && (&img.zbar - &current.z).amax() > 1e-6_f64.max(100.0 * tol) {
            return Ok(false);
        }
        current = BoxPoint { x, y: img.y, z: zp };
    }
    let inside = current.x.abs() <= delta + box_tol
        && (current.y.len() == 0 || current.y.amax() <= delta + box_tol);
    Ok(inside)
}

/// Run the full certification: `trials` random properly crossing discs, each
/// refined `depth` times, nested diameters contracted below `tol`, witnesses
/// extracted and their backward orbits re-verified.
pub fn verify_blender(
    ret: &ReturnMap,
    covering: &CoveringSet,
    orientation: Orientation,
    trials: usize,
    depth: usize,
    tol: f64,
    seed: u64,
) -> Result<BlenderCertificate> {
    if covering.orientation != orientation {
        return Err(BlabError::Precondition(
            "covering set orientation does not match the requested blender orientation".into(),
        ));
    }
    let budget = cone_budget(ret, covering);
    let disc_orientation = match orientation {
        Orientation::Cs => DiscOrientation::Horizontal,
        Orientation::Cu => DiscOrientation::Vertical,
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(trials);
    let mut all_pass = true;
    for _trial in 0..trials {
        let disc = random_proper_disc(ret, disc_orientation, budget, &mut rng)?;
        let pc = is_proper_crossing(
            &disc,
            ret.model.params.delta,
            ret.model.params.delta_prime(),
            budget,
        );
        if !pc.proper {
            return Err(BlabError::Precondition(
                "generated trial disc is not properly crossing".into(),
            ));
        }
        if depth == 0 {
            records.push(TrialRecord {
                pairs: vec![],
                diameters: vec![],
                witness: vec![],
                witness_graph_residual: f64::NAN,
                wu_depth: 0,
                pass: false,
                note: Some("no refinement requested (depth = 0)".into()),
            });
            all_pass = false;
            continue;
        }
        // Refinement chain.
        let mut discs = vec![disc];
        let mut pairs = Vec::with_capacity(depth);
        for _ in 0..depth {
            let (pair, refined) = preimage_step(ret, discs.last().unwrap(), covering)?;
            pairs.push(pair);
            discs.push(refined);
        }
        // Nested diameters: walk sample points of each level to the initial
        // disc and measure the sup-norm spread there.
        let bases = sample_bases(discs[0].base_dim, ret.model.params.delta);
        let mut diameters = Vec::with_capacity(depth + 1);
        let mut witness = None;
        let mut witness_chain: Vec<BoxPoint> = Vec::new();
        for level in 0..=depth {
            let mut landed: Vec<BoxPoint> = Vec::with_capacity(bases.len());
            for (bi, base) in bases.iter().enumerate() {
                let mut p = disc_point(&discs[level], base);
                let mut trail = vec![p.clone()];
                for i in (0..level).rev() {
                    p = chain_step_to_initial(ret, &p, &discs[i], pairs[i].0, pairs[i].1)?;
                    trail.push(p.clone());
                }
                if level == depth && bi == bases.len() - 1 {
                    witness_chain = trail;
                }
                landed.push(p);
            }
            let mut diam = 0.0f64;
            for a in 0..landed.len() {
                for b in a + 1..landed.len() {
                    diam = diam.max(sup_distance(&landed[a], &landed[b]));
                }
            }
            diameters.push(diam);
            if level == depth {
                witness = Some(landed.pop().unwrap()); // center sample
            }
        }
        let witness = witness.unwrap();
        // Certification per trial.
        let strictly_decreasing = diameters.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0);
        if !strictly_decreasing {
            return Err(BlabError::Precondition(
                "nested diameters failed to decrease (refinement bug guard)".into(),
            ));
        }
        let final_ok = *diameters.last().unwrap() < tol;
        let base0 = match disc_orientation {
            DiscOrientation::Horizontal => witness.z.clone(),
            DiscOrientation::Vertical => witness.y.clone(),
        };
        let (gx, gother) = discs[0].eval(&base0);
        let graph_residual = match disc_orientation {
            DiscOrientation::Horizontal => {
                (witness.x - gx).abs().max(if witness.y.len() > 0 { (&witness.y - &gother).amax() } else { 0.0 })
            }
            DiscOrientation::Vertical => {
                (witness.x - gx).abs().max(if witness.z.len() > 0 { (&witness.z - &gother).amax() } else { 0.0 })
            }
        };
        // Orbit re-verification: the witness chain must be a genuine orbit
        // confined to the box. For the center-stable orientation the
        // backward orbit is additionally re-derived from the witness alone.
        let chain_ok = chain_consistency(ret, &witness_chain, &pairs, disc_orientation, depth, tol)?;
        let wu_ok = match orientation {
            Orientation::Cs => wu_membership(ret, &witness, &pairs, depth, tol)?,
            Orientation::Cu => true,
        };
        let trial_pass = final_ok && graph_residual < tol.max(1e-9) && wu_ok && chain_ok;
        all_pass &= trial_pass;
        let mut w = vec![witness.x];
        w.extend(witness.y.iter());
        w.extend(witness.z.iter());
        records.push(TrialRecord {
            pairs,
            diameters,
            witness: w,
            witness_graph_residual: graph_residual,
            wu_depth: depth,
            pass: trial_pass,
            note: None,
        });
    }
    Ok(BlenderCertificate {
        orientation,
        covering_pairs: covering.intervals.iter().map(|iv| (iv.k, iv.m)).collect(),
        cone_budget: budget,
        depth,
        tol,
        seed,
        trials: records,
        pass: all_pass,
    })
}

/// Additive uniform noise on every transition coefficient (the operational
/// shadow of a C1-small perturbation of the transition maps).
pub fn perturb_transition_coefficients(
    params: &CycleParams,
    magnitude: f64,
    seed: u64,
) -> CycleParams {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = params.clone();
    for row in out.a_ij.iter_mut() {
        for entry in row.iter_mut() {
            *entry += rng.random_range(-magnitude..magnitude);
        }
    }
    for row in out.b_ij.iter_mut() {
        for entry in row.iter_mut() {
            *entry += rng.random_range(-magnitude..magnitude);
        }
    }
    out.a = out.a_ij[0][0];
    out.b = out.b_ij[0][0];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::{build_covering_set, build_covering_set_oriented};
    use crate::model::params::{ref1, ref1_cu};

    #[test]
    fn small_cs_certificate_passes() {
        let params = ref1();
        let ret = ReturnMap::new(&params).unwrap();
        let covering = build_covering_set(&params).unwrap();
        let cert = verify_blender(&ret, &covering, Orientation::Cs, 5, 8, 1e-10, 0).unwrap();
        assert!(cert.pass, "{:?}", cert.trials.iter().map(|t| t.pass).collect::<Vec<_>>());
        for t in &cert.trials {
            assert!(t.diameters.last().unwrap() < &1e-10);
            assert!(t.witness_graph_residual < 1e-9);
        }
    }

    #[test]
    fn depth_zero_flags_no_refinement() {
        let params = ref1();
        let ret = ReturnMap::new(&params).unwrap();
        let covering = build_covering_set(&params).unwrap();
        let cert = verify_blender(&ret, &covering, Orientation::Cs, 2, 0, 1e-10, 0).unwrap();
        assert!(!cert.pass);
        assert!(cert.trials[0].note.as_deref().unwrap().contains("no refinement"));
    }

    #[test]
    fn certificates_are_deterministic() {
        let params = ref1();
        let ret = ReturnMap::new(&params).unwrap();
        let covering = build_covering_set(&params).unwrap();
        let a = verify_blender(&ret, &covering, Orientation::Cs, 3, 6, 1e-10, 42).unwrap();
        let b = verify_blender(&ret, &covering, Orientation::Cs, 3, 6, 1e-10, 42).unwrap();
        assert_eq!(
            crate::report::to_json_string(&a).unwrap(),
            crate::report::to_json_string(&b).unwrap()
        );
    }

    #[test]
    fn small_cu_certificate_passes() {
        let params = ref1_cu();
        let ret = ReturnMap::new(&params).unwrap();
        let covering = build_covering_set_oriented(&ret, Orientation::Cu).unwrap();
        let cert = verify_blender(&ret, &covering, Orientation::Cu, 3, 6, 1e-8, 0).unwrap();
        assert!(cert.pass, "{:#?}", cert.trials);
    }

    #[test]
    fn wu_membership_of_fixed_point() {
        let params = ref1();
        let ret = ReturnMap::new(&params).unwrap();
        let (p, _) = crate::retmap::fixed_point(&ret, 20, 12, 1e-9).unwrap();
        let pairs = vec![(20, 12); 10];
        assert!(wu_membership(&ret, &p, &pairs, 10, 1e-10).unwrap());
        // Point far outside the box fails at the first step.
        let mut q = p.clone();
        q.x += 0.2;
        assert!(!wu_membership(&ret, &q, &pairs, 1, 1e-10).unwrap());
    }
}
