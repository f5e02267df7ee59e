//! Networks of coupled elementary catastrophes.
//!
//! The crate evaluates Thom's seven elementary normal forms, assembles them
//! into a weakly coupled network potential, drives the controls along ramps
//! or elliptic Itô diffusions, and watches the occupied equilibrium for
//! basin reconfigurations. Synchronized multi-sector catastrophes are
//! collected into cascade reports, and their intensities can be summarised
//! with Archimedean copulas.
//!
//! Module map:
//!
//! - [`catastrophe`]: normal forms, derivatives, critical points.
//! - [`network`]: coupled potential `V_ε`, its Hessian, Newton and gradient flow.
//! - [`control`]: control trajectories (ramps, Euler–Maruyama diffusions).
//! - [`diagnostics`]: coranks, projection codimension, discriminant normals.
//! - [`cascade`]: scenario runner, catastrophe graph, order parameter.
//! - [`copula`]: Clayton/Gumbel/independence copulas and Kendall-tau fits.
//! - [`runner`]: JSON scenarios, ensembles and persisted outputs.

pub mod cascade;
pub mod catastrophe;
pub mod control;
pub mod copula;
pub mod diagnostics;
mod error;
pub mod linalg;
pub mod network;
pub mod poly;
pub mod runner;

pub use error::{Error, Result};
