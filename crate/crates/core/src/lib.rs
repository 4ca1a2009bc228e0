//! Wulff and Winterbottom shapes for anisotropic capillarity on a flat substrate, with
//! energy evaluation, numerical minimizers and stability diagnostics.

pub mod anisotropy;
pub mod convex;
pub mod geom;
pub mod io;
pub mod optimizer;
pub mod shape;
pub mod stability;
