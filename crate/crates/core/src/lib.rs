//! Numerical simulator for continuous-variable teleportation with a finite
//! two-mode squeezed resource.
//!
//! The central object is the measurement-conditioned transfer operator
//! `T̂(β)`: for an input `|ψ⟩` and joint-quadrature outcome `β`, the teleported
//! output is `T̂(β)|ψ⟩` and its squared norm is the outcome density. Everything
//! is evaluated in a truncated photon-number basis with exact displacement
//! matrix elements.
//!
//! - [`fock`]: states, displacement and quadrature operators
//! - [`channel`]: the resource, `T̂(β)`, probabilities and fidelities
//! - [`quad`]: deterministic quadrature over the complex plane
//! - [`sampler`]: Monte Carlo teleportation shots
//! - [`verify`]: homodyne, eight-port and number-basis verification statistics

pub mod channel;
pub mod error;
pub mod fock;
pub mod quad;
pub mod sampler;
pub mod verify;

pub use channel::{ChannelParams, SchmidtCoefficients, TeleportResult};
pub use error::{Error, Result};
pub use fock::{ComplexPoint, FockVector, OperatorMatrix};
pub use quad::{make_grid, Integral, QuadGrid};
pub use sampler::{SamplerConfig, ShotRecord};
