//! Tamed explicit Euler schemes for SDEs driven by Levy noise.
//!
//! The library simulates jump diffusions of the form
//!
//! ```text
//! dx_t = b(t, x_t) dt + sigma(t, x_t) dw_t + integral gamma(t, x_t, z) Ntilde(dt, dz)
//! ```
//!
//! where `w` is a Brownian motion and `Ntilde` a compensated Poisson random
//! measure with finite intensity, together with the delay variant whose
//! coefficients also read past states `y_t = (x_{delta_1(t)}, ..., x_{delta_k(t)})`.
//!
//! Explicit Euler steps diverge when the drift grows super-linearly; the
//! stepper here replaces the drift by its tamed version
//! `b / (1 + n^-theta * |b|)`, which is bounded by `n^theta` per step while
//! leaving diffusion and jump coefficients untouched.
//!
//! Everything in this crate is deterministic given a [`StreamKey`]: noise is
//! generated from counter-derived ChaCha streams, and a coarse-grid path is a
//! view onto the fine-grid increments, so simulations at different resolutions
//! share one noise realization bit-for-bit. The crate is `no_std` (with
//! `alloc`); IO, CSV and the Monte Carlo experiment harness live in the
//! companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod delay;
pub mod error;
pub mod grid;
pub mod model;
pub mod noise;
pub mod scheme;

pub use delay::{resolve_delay, simulate_delay, History};
pub use error::Error;
pub use grid::{kappa, GridSpec};
pub use model::{
    builtin, builtin_names, AnyProblem, DelayLag, DelayProblem, LevyModel, MarkLaw, Problem,
};
pub use noise::{
    derive_stream, sample_brownian, sample_jumps, JumpEvent, Lane, NoisePath, Stream, StreamKey,
};
pub use scheme::{simulate, step, tame, SchemeConfig, Taming, Trajectory};

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
