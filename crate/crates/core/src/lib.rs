pub mod contour;
pub mod edge;
pub mod evaluation;
pub mod geometry;
pub mod grabcut;
pub mod protocol;
pub mod synthetic;
