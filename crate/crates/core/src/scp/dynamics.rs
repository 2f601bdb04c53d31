use nalgebra::{DVector, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::model::{boom_joint, grasp_map, gravity_wrench, BodyPose, BoomJoint, BoomState, KinematicError, RobotModel};

/// Dimension of the local error state `[δX, δθ, δP, δL]`.
pub const ERR_DIM: usize = 12;
pub type ErrorState = SVector<f64, ERR_DIM>;

/// Rigid-body state: position, orientation, linear and angular momentum
/// (world frame).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub momentum: Vector3<f64>,
    pub angular_momentum: Vector3<f64>,
}

impl BodyState {
    pub fn at_rest(pose: &BodyPose) -> Self {
        Self {
            position: pose.position,
            orientation: pose.orientation,
            momentum: Vector3::zeros(),
            angular_momentum: Vector3::zeros(),
        }
    }

    pub fn pose(&self) -> BodyPose {
        BodyPose::new(self.position, self.orientation)
    }

    /// `self ⊕ δ`; the rotation part is applied on the world side.
    pub fn retract(&self, d: &ErrorState) -> Self {
        let rot = UnitQuaternion::from_scaled_axis(Vector3::new(d[3], d[4], d[5]));
        Self {
            position: self.position + Vector3::new(d[0], d[1], d[2]),
            orientation: rot * self.orientation,
            momentum: self.momentum + Vector3::new(d[6], d[7], d[8]),
            angular_momentum: self.angular_momentum + Vector3::new(d[9], d[10], d[11]),
        }
    }

    /// `other ⊖ self`, the inverse of [`retract`](Self::retract).
    pub fn local(&self, other: &Self) -> ErrorState {
        let dr = (other.orientation * self.orientation.inverse()).scaled_axis();
        let dx = other.position - self.position;
        let dp = other.momentum - self.momentum;
        let dl = other.angular_momentum - self.angular_momentum;
        ErrorState::from_iterator(dx.iter().chain(dr.iter()).chain(dp.iter()).chain(dl.iter()).copied())
    }
}

/// Joint values of every boom at `state` (no limit checks).
pub fn joints_at(model: &RobotModel, state: &BodyState, booms: &[BoomState]) -> Vec<BoomJoint> {
    let pose = state.pose();
    booms.iter().enumerate().map(|(i, b)| boom_joint(model, &pose, &b.target(), i)).collect()
}

/// One semi-implicit Euler step under controls `tau` (three per attached
/// boom, in boom order). Momenta are updated from the wrench at the current
/// pose, then the pose advances with the new velocities.
pub fn nonlinear_step(
    model: &RobotModel,
    state: &BodyState,
    tau: &DVector<f64>,
    dt: f64,
    booms: &[BoomState],
) -> Result<BodyState, KinematicError> {
    let pose = state.pose();
    let joints = joints_at(model, state, booms);
    let attached: Vec<bool> = booms.iter().map(|b| b.is_attached()).collect();
    let g = grasp_map(model, &pose, &joints, &attached)?;
    let w = &g * tau;
    let load = gravity_wrench(model, &pose, booms);
    let force = Vector3::new(w[0], w[1], w[2]) - load.force;
    let moment = Vector3::new(w[3], w[4], w[5]) - load.moment;

    let momentum = state.momentum + dt * force;
    let angular_momentum = state.angular_momentum + dt * moment;
    let position = state.position + dt * momentum / model.mass_body;
    let inertia = model.inertia_world(&state.orientation);
    let omega = inertia.try_inverse().expect("validated inertia") * angular_momentum;
    let orientation = UnitQuaternion::new_normalize(
        (UnitQuaternion::from_scaled_axis(omega * dt) * state.orientation).into_inner(),
    );
    Ok(BodyState { position, orientation, momentum, angular_momentum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn retract_and_local_are_inverse(v in proptest::collection::vec(-0.5..0.5f64, 12), w in proptest::collection::vec(-1.0..1.0f64, 12)) {
            let base = BodyState::at_rest(&BodyPose::new(
                Vector3::new(w[0], w[1], w[2]),
                UnitQuaternion::from_scaled_axis(Vector3::new(w[3], w[4], w[5])),
            ));
            let d = ErrorState::from_column_slice(&v);
            let back = base.local(&base.retract(&d));
            prop_assert!((back - d).norm() < 1e-12);
        }
    }
}
