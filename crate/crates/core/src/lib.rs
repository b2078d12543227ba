//! Multiple deterministic extremal paths of a free particle moving among
//! inequality constraints, and the quantum amplitudes carried along them.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: walls lowered to inequality constraints, corners, visibility.
//! - [`dynamics`]: event-driven forward integration with collision impulses
//!   and corner branching.
//! - [`paths`]: boundary-value enumeration of polygonal extremals and their action.
//! - [`propagator`]: free-particle kernel, polygon amplitudes, screen profiles.
//! - [`oracle`]: time-sliced lattice path integral used as an independent check.
//! - [`scenario`], [`output`], [`run`]: scenario files, artifacts and orchestration.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod output;
pub mod paths;
pub mod propagator;
pub mod run;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, ConstraintSet, Corner, Vec2, Wall};
