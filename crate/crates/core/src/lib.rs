//! Rigidity laboratory for perturbations of partially hyperbolic toral automorphisms.

pub mod cone;
pub mod conjugacy;
pub mod cyclotomic;
pub mod diffeo;
pub mod error;
pub mod examples;
pub mod experiment;
pub mod foliation;
pub mod factor;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod lyapunov;
pub mod matrix;
pub mod mollifier;
pub mod par;
pub mod poly;
pub mod spectral;
pub mod sturm;
pub mod trig;

pub use error::{Error, Result};
