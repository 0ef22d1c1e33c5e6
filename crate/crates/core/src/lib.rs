//! Local stability analysis for random fixed points of discrete-time random
//! dynamical systems driven by a finite-state ergodic Markov environment.
//!
//! The crate is `no_std` (it needs `alloc`). It is organised in three layers:
//!
//! * [`env`]: the environment chain, the shift-realising [`env::OmegaStream`],
//!   laws of motion ([`env::RandomSystem`]), paths and cocycle composition.
//! * [`stability`]: ergodic averages, contraction certificates, basin radii,
//!   linearisation search, Hölder checks and Furstenberg–Kesten ladders.
//! * [`kelly`]: the evolutionary asset-market model, its generalised Kelly
//!   strategy and the wealth-ratio dynamics around the zero fixed point.
#![no_std]

extern crate alloc;

pub mod env;
pub mod error;
pub mod kelly;
pub mod linalg;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
