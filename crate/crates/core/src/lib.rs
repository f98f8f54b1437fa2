//! Phase-plane analysis of radial solutions to `M±(D²u) + |x|^a u^p = 0`.

pub mod classify;
pub mod field;
pub mod flow;
pub mod ode;
pub mod params;
pub mod radial;
pub mod stationary;
