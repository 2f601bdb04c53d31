//! Trajectory optimization by sequential convex programming.
//!
//! Each iteration linearizes the rigid-body dynamics about the current
//! trajectory (central differences on [`nonlinear_step`]) and solves a
//! second-order cone program: minimum control effort plus trust penalties on
//! the change in states and controls, subject to the linearized dynamics,
//! boundary states, control bounds and linearized joint limits. Iterates are
//! accepted when they pass an exact joint-limit check and do not increase an
//! effort-plus-defect merit.

mod dynamics;
mod seed;
mod solver;

pub use dynamics::{joints_at, nonlinear_step, BodyState, ErrorState, ERR_DIM};
pub use seed::{seed_gripper_path, seed_path, seed_trajectory, SeedConfig};
pub use solver::{max_position_jump, scp_solve_body, scp_solve_end_effector};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::model::{BoomState, KinematicError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScpConfig {
    #[serde(default = "default_lambda")]
    pub lambda_state: f64,
    #[serde(default = "default_lambda")]
    pub lambda_control: f64,
    /// Floor for the trust weights as they halve on accepted steps.
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Converged once an iteration changes no state or control component by
    /// more than this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest acceptable position (m) and rotation (rad) rollout defect.
    #[serde(default = "default_defect_tolerance")]
    pub defect_tolerance: f64,
    /// Weight of the summed dynamics defects in the acceptance merit.
    #[serde(default = "default_defect_penalty")]
    pub defect_penalty: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_lambda() -> f64 {
    10.0
}
fn default_lambda_min() -> f64 {
    1e-3
}
fn default_max_iterations() -> usize {
    40
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_defect_tolerance() -> f64 {
    1e-3
}
fn default_defect_penalty() -> f64 {
    1e3
}
fn default_dt() -> f64 {
    0.5
}

impl Default for ScpConfig {
    fn default() -> Self {
        Self {
            lambda_state: default_lambda(),
            lambda_control: default_lambda(),
            lambda_min: default_lambda_min(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            defect_tolerance: default_defect_tolerance(),
            defect_penalty: default_defect_penalty(),
            dt: default_dt(),
        }
    }
}

impl ScpConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        let positive = [
            self.lambda_state,
            self.lambda_control,
            self.lambda_min,
            self.tolerance,
            self.defect_tolerance,
            self.defect_penalty,
            self.dt,
        ];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && self.max_iterations > 0 {
            Ok(())
        } else {
            Err("SCP weights, tolerances and time step must be positive")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Body,
    EndEffector { boom: usize, path: Vec<Point3> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScpDiagnostics {
    pub iterations: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub converged: bool,
    /// Merit of the seed followed by each accepted iterate.
    pub objective_trace: Vec<f64>,
    pub final_step: f64,
    pub max_position_defect: f64,
    pub max_rotation_defect: f64,
    pub max_momentum_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub phase: Phase,
    pub states: Vec<BodyState>,
    /// `controls[k]` drives `states[k]` to `states[k + 1]`.
    pub controls: Vec<Vec<f64>>,
    /// Boom targets at each timestep.
    pub booms: Vec<Vec<BoomState>>,
    pub diagnostics: ScpDiagnostics,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ScpError {
    #[error("{end} pose is infeasible: {reason}")]
    InfeasibleEndpoint { end: &'static str, reason: String },
    #[error("seed search exhausted its budget after {waypoints} waypoints")]
    SeedFailed { waypoints: usize },
    #[error("no static allocation for seed step {step}: {reason}")]
    SeedControls { step: usize, reason: String },
    #[error(transparent)]
    Kinematic(KinematicError),
    #[error("convex subproblem failed at iteration {iteration}: {status}")]
    SubproblemInfeasible { iteration: usize, status: String },
    #[error("SCP did not converge; best iterate attached")]
    NotConverged(Box<Trajectory>),
}
