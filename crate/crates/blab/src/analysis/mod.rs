//! Cycle invariants and regime predictions: conjugacy moduli, type
//! classification, rational-theta conditions, activation intervals, and the
//! focus-case homoclinic sequences.

pub mod activation;
pub mod focus;
pub mod rational;
pub mod regime;
pub mod secondary;

pub use activation::{activation_intervals, sweep_mu, ActivationIntervals, HitFamily, SweepRow, DEFAULT_KAPPA};
pub use focus::{focus_sequences, FocusSequences};
pub use rational::{rational_theta_check, RareReport};
pub use regime::{compute_moduli, CycleType, Moduli};
pub use secondary::{secondary_cycle_mu, theta_prime_estimate, SecondaryMu, ThetaPrime};
