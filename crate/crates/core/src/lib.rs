//! Numerical laboratory for area-minimizing Lipschitz graphs: excess
//! functionals, Lipschitz approximation, and the dyadic center-manifold
//! interpolation with its estimate checks.

pub mod area;
pub mod cm;
pub mod error;
pub mod field;
pub mod geom;
pub mod linalg;
pub mod lipapprox;
pub mod minimize;
pub mod optim;
pub mod verify;

pub use error::{Error, Result};
pub use field::{GridField, Region};
pub use geom::NearHorizontalPlane;
