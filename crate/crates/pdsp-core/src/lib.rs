//! Solver for point distance satisfaction problems guided by a sketch.
//!
//! Given a set of points constrained by pairwise distances and a sketch of
//! the intended shape, the homotopy path through the sketch is tracked until
//! it loops, collecting every real solution it carries. Tracking happens in
//! the small space of the driving parameters of a reparameterized
//! construction plan, which is mutated on the fly whenever the construction
//! approaches a tangent (boundary) configuration.

pub mod cplan;
pub mod geometry;
pub mod homotopy;
pub mod model;
pub mod tracker;

#[cfg(test)]
pub(crate) mod testfix;
