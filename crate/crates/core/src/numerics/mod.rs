//! Numerical building blocks shared by the physics modules.

pub mod linalg;
pub mod quadrature;
pub mod roots;
pub mod spectral;
