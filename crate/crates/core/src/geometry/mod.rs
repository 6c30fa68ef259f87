//! Exact polyhedral geometry for closed and semi-open convex sets.

pub mod bitset;
pub mod dd;
pub mod ops;
pub mod polyhedron;
pub mod semi_open;

pub use ops::{
    caratheodory_decompose, conv_union, decompose_semi_open_sum, decompose_sum, flat, intersect, minkowski_sum, polar_cone, separate_cones,
    sharp, sharp_core, sharp_flat, Witness,
};
pub use polyhedron::{ClosedPolyhedron, Face, FaceId, Halfspace, Hyperplane};
pub use semi_open::SemiOpenPolyhedron;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("point is not a member of the set")]
    NotMember,
    #[error("polyhedron is not a cone")]
    NotACone,
    #[error("set is empty")]
    Empty,
    #[error("the sets cannot be properly separated")]
    NoSeparator,
    #[error("dimension mismatch: expected {0}, got {1}")]
    DimensionMismatch(usize, usize),
    #[error("result is not a convex union of relatively open faces: {0}")]
    ClosureViolation(String),
}
