//! Plane-wave discontinuous Galerkin (PWDG) solver for time-harmonic
//! sound-soft scattering by a disc, with the exterior truncated by a
//! Fourier-series Dirichlet-to-Neumann condition on a circle.

pub mod assembly;
pub mod basis;
pub mod dtn;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod selftest;
pub mod specfun;
