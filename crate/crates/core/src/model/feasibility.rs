use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{collision_check, grasp_map, inverse_joint_solve, BodyPose, BoomJoint, BoomState, CollisionGeometry, KinematicError, RobotModel};
use crate::tension::{allocate_wrench, AllocationError, ControlVector, Wrench};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Violation {
    #[error("kinematic: {0}")]
    Kinematic(KinematicError),
    #[error("collision")]
    Collision,
    #[error("static: {0}")]
    Static(AllocationError),
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Kinematic(_) => "kinematic",
            Violation::Collision => "collision",
            Violation::Static(_) => "static",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub joints: Vec<BoomJoint>,
    pub controls: ControlVector,
}

/// Wrench the booms must supply to hold the body still: cancels body gravity
/// and the weight of every held (detached) gripper, which hangs off its
/// shoulder at the gripper position.
pub fn gravity_wrench(model: &RobotModel, pose: &BodyPose, booms: &[BoomState]) -> Wrench {
    let mut w = Wrench::new(Vector3::new(0.0, 0.0, model.mass_body * model.gravity), Vector3::zeros());
    for b in booms {
        if let BoomState::Held(p) = b {
            let weight = Vector3::new(0.0, 0.0, -model.mass_gripper * model.gravity);
            w = w + Wrench::new(-weight, -(p - pose.position).cross(&weight));
        }
    }
    w
}

/// Allocation for holding `pose` statically with the given joints.
pub fn static_equilibrium_controls(
    model: &RobotModel,
    pose: &BodyPose,
    booms: &[BoomState],
    joints: &[BoomJoint],
) -> Result<ControlVector, Violation> {
    let attached: Vec<bool> = booms.iter().map(|b| b.is_attached()).collect();
    let g = grasp_map(model, pose, joints, &attached).map_err(Violation::Kinematic)?;
    let w = gravity_wrench(model, pose, booms);
    let mut cv = allocate_wrench(&g, &w, &model.actuation_limits, model.min_tension, model.body_length)
        .map_err(Violation::Static)?;
    cv.booms = (0..booms.len()).filter(|&i| attached[i]).collect();
    Ok(cv)
}

/// Checks that every boom reaches its target within joint limits, nothing
/// collides, and a tension-consistent static allocation exists.
pub fn pose_feasible(
    model: &RobotModel,
    pose: &BodyPose,
    booms: &[BoomState],
    env: &CollisionGeometry,
) -> Result<FeasibilityCertificate, Violation> {
    let joints = booms
        .iter()
        .enumerate()
        .map(|(i, b)| inverse_joint_solve(model, pose, &b.target(), i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Violation::Kinematic)?;
    if collision_check(model, pose, &joints, env) {
        return Err(Violation::Collision);
    }
    let controls = static_equilibrium_controls(model, pose, booms, &joints)?;
    Ok(FeasibilityCertificate { joints, controls })
}
