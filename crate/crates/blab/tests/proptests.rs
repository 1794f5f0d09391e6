//! Property tests for the structural invariants: serialization round-trips,
//! search monotonicity, covering self-certification, and the scaling
//! invariance of the conjugacy moduli.

use blab::analysis::{activation_intervals, compute_moduli};
use blab::covering::{build_covering_set, search_km, verify_covering, Parity};
use blab::model::params::ref1;
use blab::model::CycleParams;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn params_json_round_trip(
        lambda in 0.05f64..0.95,
        gamma in 1.1f64..9.0,
        a in prop_oneof![(-3.0f64..-0.05), (0.05f64..3.0)],
        b in prop_oneof![(-3.0f64..-0.05), (0.05f64..3.0)],
        x_plus in prop_oneof![(-2.0f64..-0.1), (0.1f64..2.0)],
        u_minus in prop_oneof![(-2.0f64..-0.1), (0.1f64..2.0)],
        mu in -0.01f64..0.01,
        c_g in 0.0f64..0.05,
    ) {
        let mut p = ref1();
        p.lambda = lambda;
        p.gamma = gamma;
        p.a = a;
        p.a_ij[0][0] = a;
        p.b = b;
        p.b_ij[0][0] = b;
        p.x_plus = vec![x_plus];
        p.u_minus = vec![u_minus];
        p.mu = mu;
        p.tails.c_g = c_g;
        // Keep the strong spectra compatible with the sampled multipliers.
        p.p2 = vec![vec![lambda * 0.5]];
        p.q2 = vec![vec![gamma * 2.0]];
        let text = p.to_json().unwrap();
        let back = CycleParams::from_json(&text).unwrap();
        prop_assert_eq!(&p, &back);
        prop_assert_eq!(p.lambda.to_bits(), back.lambda.to_bits());
        prop_assert_eq!(p.mu.to_bits(), back.mu.to_bits());
    }

    #[test]
    fn search_is_monotone_in_k_max(
        theta in 0.1f64..0.95,
        target in -1.0f64..1.0,
        tol in 0.001f64..0.2,
        k_small in 10u64..400,
        extra in 1u64..400,
    ) {
        let small = search_km(theta, target, tol, 3.0f64.ln(), k_small, Parity::Any);
        let large = search_km(theta, target, tol, 3.0f64.ln(), k_small + extra, Parity::Any);
        for hit in &small.hits {
            prop_assert!(large.hits.contains(hit), "hit {hit:?} lost when k_max grew");
        }
    }

    #[test]
    fn alpha_invariant_under_central_rescaling(
        c_x in 0.1f64..8.0,
        c_u in 0.1f64..8.0,
    ) {
        let base = ref1();
        let alpha0 = compute_moduli(&base).unwrap().alpha.unwrap();
        let mut p = base;
        p.b *= c_x / c_u;
        p.b_ij[0][0] = p.b;
        p.x_plus[0] *= c_x;
        p.u_minus[0] *= c_u;
        let alpha = compute_moduli(&p).unwrap().alpha.unwrap();
        prop_assert!((alpha - alpha0).abs() <= 1e-13 * alpha0.abs());
    }
}

/// The covering construction is self-certifying across the admissible
/// contraction range: building never yields an unverifiable family.
#[test]
fn covering_self_certifies_across_alpha() {
    for u_minus in [0.3, 0.5, 0.7, 0.9] {
        let mut p = ref1();
        p.u_minus = vec![u_minus];
        let set = build_covering_set(&p).unwrap();
        let report = verify_covering(&set).unwrap();
        assert!(report.covered && report.overlap_ok, "alpha = {u_minus}");
        assert_eq!(set.n, (4.0 / u_minus + 1.0).ceil() as usize);
    }
}

/// Activation intervals of each family are pairwise disjoint at REF1 scales
/// (centers separate geometrically faster than the widths grow).
#[test]
fn activation_families_are_disjoint() {
    let iv = activation_intervals(&ref1(), (1, 40), (1, 40), 0.0).unwrap();
    for family in [&iv.u_family, &iv.s_family] {
        for a in family.iter() {
            for b in family.iter() {
                if a.index != b.index {
                    assert!(
                        a.hi < b.lo || b.hi < a.lo,
                        "intervals {} and {} overlap",
                        a.index,
                        b.index
                    );
                }
            }
        }
    }
}
