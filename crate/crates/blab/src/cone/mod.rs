//! Cone fields on the return box and their sampled invariance certification.

pub mod check;
pub mod fd;
pub mod sobol;

pub use check::{
    check_cone_invariance, cross_jacobian, cross_jacobian_exact, transport_backward, transport_forward, ConeOrientation,
    ConeReport, ConeSpec, TransportDirection,
};
pub use fd::{fd_jacobian, fd_jacobian_checked};
pub use sobol::Sobol;
