//! Variational laboratory for the destruction of invariant circles of twist
//! maps under compactly supported Gevrey perturbations.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: the generating-function family and the induced map;
//! * [`gevrey`]: derivative sups, Gevrey and `C^r` norms, the Cauchy bound;
//! * [`variational`]: configurations, actions, and minimizers;
//! * [`barrier`]: Peierls barriers and the destruction certificate;
//! * [`arithmetic`]: continued fractions and Diophantine witnesses;
//! * [`harness`]: experiment pipelines, file formats, and the CLI driver.

pub mod arithmetic;
pub mod barrier;
pub mod dd;
pub mod gevrey;
pub mod harness;
pub mod model;
pub mod numfmt;
pub mod variational;
