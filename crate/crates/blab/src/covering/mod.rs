//! The arithmetic core: Diophantine searches over `(k, m)` labels and the
//! self-certifying covering families behind the blender construction.

pub mod contfrac;
pub mod cover;
pub mod search;

pub use contfrac::{best_rational, convergents, rational_at_precision};
pub use cover::{
    build_covering_set, build_covering_set_oriented, verify_covering, CoverReport,
    CoveringInterval, CoveringSet, Orientation,
};
pub use search::{build_p_n, search_km, search_simultaneous, KmPair, Parity, SearchOutcome, SimultaneousOutcome};
