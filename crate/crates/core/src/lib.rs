//! Grasp analysis and motion planning for a boom-propelled climbing robot.
//!
//! The crate is organised by subsystem:
//!
//! - [`model`]: robot geometry, boom kinematics, grasp map, collision and
//!   static pose feasibility.
//! - [`tension`]: tension-preserving allocation of boom efforts for a
//!   desired body wrench.
//! - [`grasp`]: microspine no-slip test and the compliant three-finger grasp
//!   system.
//! - [`limit_surface`]: Monte Carlo estimation of pull-force limit surfaces.
//! - [`footstep`]: stance-graph (contact-before-motion) planning.
//! - [`scp`]: sequential convex programming for body and end-effector moves.
//! - [`perception`]: point-cloud grasp-site identification.
//! - [`reach`]: single-finger reachability on triangle meshes.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel`
//! feature disabled everything runs sequentially and produces identical
//! results.

pub mod exec;
pub mod footstep;
pub mod geometry;
pub mod grasp;
pub mod limit_surface;
pub mod lp;
pub mod model;
pub mod perception;
pub mod reach;
pub mod rng;
pub mod scp;
pub mod synthetic;
pub mod tension;

pub use nalgebra;
