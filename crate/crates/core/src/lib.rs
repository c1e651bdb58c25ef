//! Event-triggered backstepping boundary control of the reaction-diffusion
//! equation `u_t = ε u_xx + λ(x) u` on [0, 1] with `u_x(0) = 0` and
//! `u_x(1) + q u(1) = U(t)`.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fd;
pub mod kernel;
pub mod plant;
pub mod profile;
pub mod provider;
pub mod quad;
pub mod scenario;
pub mod trigger;

pub use error::{Error, Result};
pub use kernel::{GainTable, KernelGrid, KernelKind};
pub use profile::{ProfileFamily, ReactionProfile};
