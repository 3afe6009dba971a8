//! Construction and numerical verification of Lagrangian submanifolds of the
//! nearly Kähler S³×S³ built from minimal surfaces in S³.

// NaN-rejecting `!(x > y)` guards and index loops are deliberate in the numeric kernels.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod builder;
pub mod cli;
pub mod error;
pub mod field;
pub mod nk;
pub mod pde;
pub mod quat;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use quat::{ImQuat, Quat};
