//! Normal surfaces, Neumann–Zagier forms and circle-valued angle structures
//! on closed oriented triangulated pseudo 3-manifolds.

pub mod angles;
pub mod complex;
pub mod error;
pub mod exact;
pub mod haken;
pub mod nzform;
pub mod thurston;
pub mod volopt;
pub mod z2taut;

pub use complex::{fixture, GluingSpec, Triangulation};
pub use error::{Error, Result};
pub use exact::{QMatrix, Rational};
