//! Multirate TR-BDF2 integration for stiff ODE systems.

pub mod benchmarks;
pub mod controller;
pub mod interp;
pub mod linalg;
pub mod multirate;
pub mod problem;
pub mod reference;
pub mod stability;
pub mod trbdf2;
