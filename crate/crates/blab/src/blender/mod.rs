//! Operational blender certification: properly crossing discs, the covering
//! preimage refinement, witness extraction, and strip-membership re-checks.

pub mod disc;
pub mod refine;
pub mod verify;

pub use disc::{is_proper_crossing, random_proper_disc, Disc, DiscOrientation, ProperCrossing};
pub use refine::{preimage_step, select_pair};
pub use verify::{
    cone_budget, perturb_transition_coefficients, verify_blender, wu_membership,
    BlenderCertificate, TrialRecord,
};
