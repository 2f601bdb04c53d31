//! Robot geometry, boom kinematics, grasp map, collision and static pose
//! feasibility.

mod collision;
mod feasibility;
mod kinematics;

pub use collision::{body_capsule, boom_segment, collision_check, CollisionGeometry, SphereObstacle, Tunnel};
pub use feasibility::{gravity_wrench, pose_feasible, static_equilibrium_controls, FeasibilityCertificate, Violation};
pub use kinematics::{
    boom_joint,
    boom_direction_mount, boom_frame_world, forward_kinematics, grasp_map, inverse_joint_solve,
    shoulder_world, KinematicError,
};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

pub const N_BOOMS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShoulderMount {
    pub position_body: Point3,
    /// Columns are the mount axes in the body frame; the first column is the
    /// boresight (pan = tilt = 0), pan turns about the third column and tilt
    /// raises the boom toward it.
    pub frame_body: Rotation3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub pan_range: (f64, f64),
    pub tilt_range: (f64, f64),
    pub extension_range: (f64, f64),
}

impl Default for JointLimits {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            pan_range: (-pi, pi),
            tilt_range: (0.0, pi / 2.0),
            extension_range: (0.2, 10.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuationLimits {
    pub prismatic_force_range: (f64, f64),
    pub moment_range: (f64, f64),
}

impl Default for ActuationLimits {
    fn default() -> Self {
        Self {
            prismatic_force_range: (0.0, 40.0),
            moment_range: (-10.0, 10.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub body_length: f64,
    pub body_diameter: f64,
    pub mass_body: f64,
    pub mass_gripper: f64,
    pub inertia_body: Matrix3<f64>,
    /// Magnitude of gravitational acceleration, acting along world −z.
    pub gravity: f64,
    pub shoulders: Vec<ShoulderMount>,
    pub joint_limits: JointLimits,
    pub actuation_limits: ActuationLimits,
    pub min_tension: f64,
    /// Clearance added to every collision distance.
    pub collision_margin: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {N_BOOMS} shoulders, got {0}")]
    ShoulderCount(usize),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("body inertia must be symmetric positive definite")]
    Inertia,
    #[error("shoulder {0} lies outside the body envelope")]
    ShoulderOutsideBody(usize),
    #[error("invalid range for {0}")]
    Range(&'static str),
}

impl Default for RobotModel {
    fn default() -> Self {
        let (length, diameter, mass) = (0.8, 0.4, 10.0);
        let radius = diameter / 2.0;
        // solid cylinder about its own axis (body x)
        let ixx = 0.5 * mass * radius * radius;
        let iyy = mass * (3.0 * radius * radius + length * length) / 12.0;
        Self {
            body_length: length,
            body_diameter: diameter,
            mass_body: mass,
            mass_gripper: 1.0,
            inertia_body: Matrix3::from_diagonal(&Vector3::new(ixx, iyy, iyy)),
            gravity: 3.721,
            shoulders: default_shoulders(radius),
            joint_limits: JointLimits::default(),
            actuation_limits: ActuationLimits::default(),
            min_tension: 1.0,
            collision_margin: 0.02,
        }
    }
}

/// Three mounts per side at x ∈ {−0.3, 0, 0.3} looking outward, two on top at
/// x = ±0.2 looking up. Side booms pan about body z and tilt upward; top
/// booms pan about body x and tilt fore (front) or aft (rear).
pub fn default_shoulders(radius: f64) -> Vec<ShoulderMount> {
    let (ex, ey, ez) = (Vector3::x(), Vector3::y(), Vector3::z());
    let frame = |x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>| {
        Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
    };
    let mut out = Vec::with_capacity(N_BOOMS);
    for &x in &[-0.3, 0.0, 0.3] {
        out.push(ShoulderMount {
            position_body: Vector3::new(x, radius, 0.0),
            frame_body: frame(ey, -ex, ez),
        });
    }
    for &x in &[-0.3, 0.0, 0.3] {
        out.push(ShoulderMount {
            position_body: Vector3::new(x, -radius, 0.0),
            frame_body: frame(-ey, ex, ez),
        });
    }
    out.push(ShoulderMount {
        position_body: Vector3::new(0.2, 0.0, radius),
        frame_body: frame(ez, -ey, ex),
    });
    out.push(ShoulderMount {
        position_body: Vector3::new(-0.2, 0.0, radius),
        frame_body: frame(ez, ey, -ex),
    });
    out
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.shoulders.len() != N_BOOMS {
            return Err(ModelError::ShoulderCount(self.shoulders.len()));
        }
        for (name, v) in [
            ("body_length", self.body_length),
            ("body_diameter", self.body_diameter),
            ("mass_body", self.mass_body),
            ("mass_gripper", self.mass_gripper),
            ("gravity", self.gravity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::NonPositive(name));
            }
        }
        if self.min_tension < 0.0 || self.collision_margin < 0.0 {
            return Err(ModelError::NonPositive("min_tension/collision_margin"));
        }
        let i = &self.inertia_body;
        if (i - i.transpose()).abs().max() > 1e-12 * i.abs().max()
            || i.symmetric_eigenvalues().min() <= 0.0
        {
            return Err(ModelError::Inertia);
        }
        let (half_len, radius) = (self.body_length / 2.0, self.body_diameter / 2.0);
        for (k, s) in self.shoulders.iter().enumerate() {
            let p = s.position_body;
            let radial = (p.y * p.y + p.z * p.z).sqrt();
            if p.x.abs() > half_len + 1e-9 || radial > radius + 1e-9 {
                return Err(ModelError::ShoulderOutsideBody(k));
            }
        }
        let jl = &self.joint_limits;
        for (name, (lo, hi)) in [
            ("pan", jl.pan_range),
            ("tilt", jl.tilt_range),
            ("extension", jl.extension_range),
            ("force", self.actuation_limits.prismatic_force_range),
            ("moment", self.actuation_limits.moment_range),
        ] {
            if !(lo <= hi) {
                return Err(ModelError::Range(name));
            }
        }
        if jl.extension_range.0 <= 0.0 {
            return Err(ModelError::Range("extension"));
        }
        Ok(())
    }

    pub fn inertia_world(&self, q: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = q.to_rotation_matrix();
        r.matrix() * self.inertia_body * r.matrix().transpose()
    }

    /// Body capsule radius (without collision margin).
    pub fn body_radius(&self) -> f64 {
        self.body_diameter / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    pub position: Point3,
    pub orientation: UnitQuaternion<f64>,
}

impl BodyPose {
    pub fn new(position: Point3, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn at(position: Point3) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    pub fn to_world(&self, p_body: &Point3) -> Point3 {
        self.position + self.orientation * p_body
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoomJoint {
    pub pan: f64,
    pub tilt: f64,
    pub extension: f64,
}

impl BoomJoint {
    pub fn new(pan: f64, tilt: f64, extension: f64) -> Self {
        Self { pan, tilt, extension }
    }
}

/// What a boom is doing at a given pose. `Held` is a detached gripper carried
/// at a position: the boom reaches it kinematically and carries its weight,
/// but contributes no tension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoomState {
    Attached(Point3),
    Held(Point3),
}

impl BoomState {
    pub fn target(&self) -> Point3 {
        match *self {
            BoomState::Attached(p) | BoomState::Held(p) => p,
        }
    }

    pub fn is_attached(&self) -> bool {
        matches!(self, BoomState::Attached(_))
    }
}

pub type AnchorId = u32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: AnchorId,
    pub position: Point3,
    #[serde(default)]
    pub limit_surface_ref: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Environment {
    pub anchors: Vec<Anchor>,
    pub collision: CollisionGeometry,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvironmentError {
    #[error("duplicate anchor id {0}")]
    DuplicateAnchor(AnchorId),
}

impl Environment {
    pub fn new(anchors: Vec<Anchor>, collision: CollisionGeometry) -> Result<Self, EnvironmentError> {
        let mut ids: Vec<AnchorId> = anchors.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnvironmentError::DuplicateAnchor(w[0]));
        }
        Ok(Self { anchors, collision })
    }

    pub fn anchor(&self, id: AnchorId) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let m = RobotModel::default();
        m.validate().unwrap();
        assert_eq!(m.gravity, 3.721);
        assert_eq!((m.body_length, m.body_diameter), (0.8, 0.4));
        assert_eq!((m.mass_body, m.mass_gripper), (10.0, 1.0));
        assert_eq!(m.joint_limits.extension_range, (0.2, 10.0));
        assert_eq!(m.actuation_limits.prismatic_force_range, (0.0, 40.0));
        assert_eq!(m.actuation_limits.moment_range, (-10.0, 10.0));
        assert_eq!(m.min_tension, 1.0);
    }

    #[test]
    fn mount_frames_are_proper_rotations() {
        for s in default_shoulders(0.2) {
            let r = s.frame_body.matrix();
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-15);
            assert!((r.determinant() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_rejects_bad_models() {
        let mut m = RobotModel::default();
        m.shoulders.pop();
        assert_eq!(m.validate(), Err(ModelError::ShoulderCount(7)));
        let mut m = RobotModel::default();
        m.inertia_body[(0, 1)] = 0.1;
        assert_eq!(m.validate(), Err(ModelError::Inertia));
        let mut m = RobotModel::default();
        m.shoulders[0].position_body.x = 1.0;
        assert_eq!(m.validate(), Err(ModelError::ShoulderOutsideBody(0)));
    }

    #[test]
    fn duplicate_anchor_ids_rejected() {
        let a = Anchor { id: 3, position: Vector3::zeros(), limit_surface_ref: None };
        assert!(Environment::new(vec![a.clone(), a], CollisionGeometry::default()).is_err());
    }
}
