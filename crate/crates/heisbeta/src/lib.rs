//! Numerics for intrinsic Lipschitz graphs in the first Heisenberg group.
//!
//! The crate is organised bottom-up:
//!
//! * [`heis`]: group law, Korányi metric, dilations, the projection `Π`.
//! * [`graph`]: intrinsic graphs `Γ_ψ`, the parametrization `Ψ_ψ`, Lipschitz certification
//!   and the generator zoo (planes, parabolas, random perturbations, bump families).
//! * [`flow`]: characteristic curves `g' = -ψ(t, g)`.
//! * [`quad`]: parabolic rectangles and pseudoquads.
//! * [`fit`] and [`beta`]: `L_p` affine fits, the regions `V(p, r)`, and the `γ_p` / `β_p` numbers.
//! * [`patchwork`]: foliated patchwork trees, coherent slices and the piecewise-affine `g_S`.
//! * [`multiscale`]: discretized Carleson integrals and exponent sweeps.
//! * [`config`], [`manifest`], [`cli`]: reproducible command-line runs.

pub mod beta;
pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod flow;
pub mod graph;
pub mod heis;
pub mod manifest;
pub mod multiscale;
pub mod patchwork;
pub mod quad;

pub use error::{Error, Result};
pub use heis::HPoint;
