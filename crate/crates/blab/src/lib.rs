//! Numerical laboratory for coindex-1 heterodimensional cycles.
//!
//! The crate instantiates explicit model diffeomorphisms around a
//! heterodimensional cycle, composes and analyzes their first-return maps,
//! certifies blenders via a covering construction, and classifies parameter
//! regimes into machine-checkable reports.

pub mod analysis;
pub mod blender;
pub mod cone;
pub mod covering;
pub mod error;
pub mod model;
pub mod report;
pub mod retmap;

pub use error::{BlabError, Result};
pub use model::{CycleParams, Model, MultiplierCase, TailSpec};
