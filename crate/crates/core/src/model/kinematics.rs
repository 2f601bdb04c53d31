use nalgebra::{DMatrix, Rotation3, Vector3};
use thiserror::Error;

use super::{BodyPose, BoomJoint, RobotModel};
use crate::geometry::Point3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum KinematicError {
    #[error("boom {boom}: anchor at {distance:.4} m is outside the extension range")]
    Unreachable { boom: usize, distance: f64 },
    #[error("boom {boom}: {joint} angle {value:.4} rad outside its range")]
    LimitViolation { boom: usize, joint: &'static str, value: f64 },
    #[error("boom {boom}: extension {extension:.4} m below the minimum")]
    DegenerateBoom { boom: usize, extension: f64 },
}

/// Unit boom direction in the mount frame.
pub fn boom_direction_mount(pan: f64, tilt: f64) -> Vector3<f64> {
    let (sp, cp) = pan.sin_cos();
    let (st, ct) = tilt.sin_cos();
    Vector3::new(ct * cp, ct * sp, st)
}

pub fn shoulder_world(model: &RobotModel, pose: &BodyPose, boom: usize) -> Point3 {
    pose.to_world(&model.shoulders[boom].position_body)
}

/// Mount-to-world rotation for one boom.
pub fn boom_frame_world(model: &RobotModel, pose: &BodyPose, boom: usize) -> Rotation3<f64> {
    pose.orientation.to_rotation_matrix() * model.shoulders[boom].frame_body
}

pub fn forward_kinematics(model: &RobotModel, pose: &BodyPose, joints: &[BoomJoint]) -> Vec<Point3> {
    joints
        .iter()
        .enumerate()
        .map(|(i, j)| {
            shoulder_world(model, pose, i)
                + boom_frame_world(model, pose, i) * (j.extension * boom_direction_mount(j.pan, j.tilt))
        })
        .collect()
}

const ANGLE_TOL: f64 = 1e-12;

/// Joint values pointing boom `boom` at `target`, without limit checks.
pub fn boom_joint(model: &RobotModel, pose: &BodyPose, target: &Point3, boom: usize) -> BoomJoint {
    let v = boom_frame_world(model, pose, boom).inverse() * (target - shoulder_world(model, pose, boom));
    let b = v.norm();
    if b == 0.0 {
        return BoomJoint::new(0.0, 0.0, 0.0);
    }
    let tilt = (v.z / b).clamp(-1.0, 1.0).asin();
    let pan = if v.x == 0.0 && v.y == 0.0 { 0.0 } else { v.y.atan2(v.x) };
    BoomJoint::new(pan, tilt, b)
}

pub fn inverse_joint_solve(
    model: &RobotModel,
    pose: &BodyPose,
    anchor: &Point3,
    boom: usize,
) -> Result<BoomJoint, KinematicError> {
    let j = boom_joint(model, pose, anchor, boom);
    let (bmin, bmax) = model.joint_limits.extension_range;
    if j.extension < bmin || j.extension > bmax {
        return Err(KinematicError::Unreachable { boom, distance: j.extension });
    }
    let lim = &model.joint_limits;
    if j.tilt < lim.tilt_range.0 - ANGLE_TOL || j.tilt > lim.tilt_range.1 + ANGLE_TOL {
        return Err(KinematicError::LimitViolation { boom, joint: "tilt", value: j.tilt });
    }
    if j.pan < lim.pan_range.0 - ANGLE_TOL || j.pan > lim.pan_range.1 + ANGLE_TOL {
        return Err(KinematicError::LimitViolation { boom, joint: "pan", value: j.pan });
    }
    Ok(j)
}

/// Maps stacked controls `[F, M_pan, M_tilt]` of the attached booms to the
/// body wrench `[force; moment about the COM]` in the world frame.
///
/// The wrist is free, so each boom transmits a pure force through its anchor
/// point: the prismatic channel pulls along the boom, and a unit pan or tilt
/// moment is balanced by a reaction force of magnitude `1/b` perpendicular to
/// the boom.
pub fn grasp_map(
    model: &RobotModel,
    pose: &BodyPose,
    joints: &[BoomJoint],
    attached: &[bool],
) -> Result<DMatrix<f64>, KinematicError> {
    let active: Vec<usize> = (0..joints.len()).filter(|&i| attached[i]).collect();
    let mut g = DMatrix::zeros(6, 3 * active.len());
    let bmin = model.joint_limits.extension_range.0;
    for (col, &i) in active.iter().enumerate() {
        let j = &joints[i];
        if !(j.extension >= bmin - 1e-12) {
            return Err(KinematicError::DegenerateBoom { boom: i, extension: j.extension });
        }
        let frame = boom_frame_world(model, pose, i);
        let u = frame * boom_direction_mount(j.pan, j.tilt);
        let (sp, cp) = j.pan.sin_cos();
        let (st, ct) = j.tilt.sin_cos();
        let e_pan = frame * Vector3::new(-sp, cp, 0.0);
        let e_tilt = frame * Vector3::new(-st * cp, -st * sp, ct);
        let arm = shoulder_world(model, pose, i) + j.extension * u - pose.position;
        let forces = [u, -e_pan / j.extension, -e_tilt / j.extension];
        for (k, f) in forces.iter().enumerate() {
            let c = 3 * col + k;
            g.fixed_view_mut::<3, 1>(0, c).copy_from(f);
            g.fixed_view_mut::<3, 1>(3, c).copy_from(&arm.cross(f));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::N_BOOMS;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, UnitQuaternion};
    use proptest::prelude::*;

    fn homogeneous(r: &nalgebra::Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
        m
    }

    fn rot_z(a: f64) -> nalgebra::Matrix3<f64> {
        let (s, c) = a.sin_cos();
        nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    fn rot_y(a: f64) -> nalgebra::Matrix3<f64> {
        let (s, c) = a.sin_cos();
        nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
    }

    /// Gripper position by chaining 4×4 transforms:
    /// world←body←mount←pan(z)←tilt(−y)←extension(x).
    fn fk_oracle(model: &RobotModel, pose: &BodyPose, i: usize, j: &BoomJoint) -> Vector3<f64> {
        let t_body = homogeneous(pose.orientation.to_rotation_matrix().matrix(), &pose.position);
        let s = &model.shoulders[i];
        let t_mount = homogeneous(s.frame_body.matrix(), &s.position_body);
        let t_pan = homogeneous(&rot_z(j.pan), &Vector3::zeros());
        let t_tilt = homogeneous(&rot_y(-j.tilt), &Vector3::zeros());
        let tip = t_body * t_mount * t_pan * t_tilt * nalgebra::Vector4::new(j.extension, 0.0, 0.0, 1.0);
        tip.xyz()
    }

    #[test]
    fn zero_angles_extend_along_boresight() {
        let m = RobotModel::default();
        let pose = BodyPose::at(Vector3::zeros());
        for b in [1.0, 0.2] {
            let joints = vec![BoomJoint::new(0.0, 0.0, b); N_BOOMS];
            let tips = forward_kinematics(&m, &pose, &joints);
            for (i, tip) in tips.iter().enumerate() {
                let s = &m.shoulders[i];
                let expected = s.position_body + b * s.frame_body.matrix().column(0);
                assert_relative_eq!(*tip, expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ik_on_boresight_and_out_of_range() {
        let m = RobotModel::default();
        let pose = BodyPose::at(Vector3::new(1.0, 2.0, 3.0));
        let s = shoulder_world(&m, &pose, 0);
        let bore = boom_frame_world(&m, &pose, 0) * Vector3::x();
        let j = inverse_joint_solve(&m, &pose, &(s + 3.0 * bore), 0).unwrap();
        assert_relative_eq!(j.pan, 0.0, epsilon = 1e-15);
        assert_relative_eq!(j.tilt, 0.0, epsilon = 1e-15);
        assert_relative_eq!(j.extension, 3.0, epsilon = 1e-12);
        assert!(matches!(
            inverse_joint_solve(&m, &pose, &(s + 11.0 * bore), 0),
            Err(KinematicError::Unreachable { .. })
        ));
        assert!(matches!(
            inverse_joint_solve(&m, &pose, &(s + 0.1 * bore), 0),
            Err(KinematicError::Unreachable { .. })
        ));
        // straight down from a side mount needs negative tilt
        let down = s - Vector3::z() * 2.0;
        assert!(matches!(
            inverse_joint_solve(&m, &pose, &down, 0),
            Err(KinematicError::LimitViolation { joint: "tilt", .. })
        ));
    }

    #[test]
    fn grasp_map_axis_aligned_and_lever_scaling() {
        let mut m = RobotModel::default();
        m.shoulders[0].position_body = Vector3::zeros();
        m.shoulders[0].frame_body = Rotation3::identity();
        let pose = BodyPose::at(Vector3::zeros());
        let mut joints = vec![BoomJoint::new(0.0, 0.3, 2.0); N_BOOMS];
        joints[0] = BoomJoint::new(0.0, 0.0, 2.0);
        let mut attached = [false; N_BOOMS];
        attached[0] = true;
        let g = grasp_map(&m, &pose, &joints, &attached).unwrap();
        assert_eq!(g.shape(), (6, 3));
        assert_relative_eq!(g.column(0).into_owned(), nalgebra::DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        joints[0].extension = 4.0;
        let g2 = grasp_map(&m, &pose, &joints, &attached).unwrap();
        for c in 1..3 {
            let f1 = g.fixed_view::<3, 1>(0, c).norm();
            let f2 = g2.fixed_view::<3, 1>(0, c).norm();
            assert_relative_eq!(f2, f1 / 2.0, epsilon = 1e-15);
        }
        joints[0].extension = 0.1;
        assert!(matches!(
            grasp_map(&m, &pose, &joints, &attached),
            Err(KinematicError::DegenerateBoom { boom: 0, .. })
        ));
    }

    /// Body free-body summation. The motors apply torque `T` to each boom
    /// about the axes that actually swing it (the pan axis projected off the
    /// boom, and the pan-rotated tilt axis); the pinned boom balances `T`
    /// with an anchor force `u × T / b`, which reaches the body at the
    /// shoulder together with the prismatic pull, while the body feels `−T`.
    fn wrench_oracle(m: &RobotModel, pose: &BodyPose, joints: &[BoomJoint], tau: &[f64]) -> [f64; 6] {
        let mut f = Vector3::zeros();
        let mut n = Vector3::zeros();
        for (i, j) in joints.iter().enumerate() {
            let (fp, mp, mt) = (tau[3 * i], tau[3 * i + 1], tau[3 * i + 2]);
            let r = pose.orientation.to_rotation_matrix() * m.shoulders[i].frame_body;
            let shoulder = pose.to_world(&m.shoulders[i].position_body);
            let u = (fk_oracle(m, pose, i, j) - shoulder) / j.extension;
            let pan_axis = r * Vector3::z();
            let k_pan = (pan_axis - u * pan_axis.dot(&u)).normalize();
            let k_tilt = r * (rot_z(j.pan) * -Vector3::y());
            let torque = mp * k_pan + mt * k_tilt;
            let force = fp * u + u.cross(&torque) / j.extension;
            f += force;
            n += (shoulder - pose.position).cross(&force) - torque;
        }
        [f.x, f.y, f.z, n.x, n.y, n.z]
    }

    proptest! {
        #[test]
        fn fk_matches_transform_chain(
            px in -3.0..3.0f64, py in -3.0..3.0f64, pz in -3.0..3.0f64,
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, ang in 0.0..3.1f64,
            pans in proptest::collection::vec(-3.1..3.1f64, N_BOOMS),
            tilts in proptest::collection::vec(0.0..1.57f64, N_BOOMS),
            exts in proptest::collection::vec(0.2..10.0f64, N_BOOMS),
        ) {
            let m = RobotModel::default();
            let axis = Vector3::new(ax, ay, az + 2.0);
            let pose = BodyPose::new(Vector3::new(px, py, pz), UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), ang));
            let joints: Vec<BoomJoint> = (0..N_BOOMS).map(|i| BoomJoint::new(pans[i], tilts[i], exts[i])).collect();
            let tips = forward_kinematics(&m, &pose, &joints);
            for i in 0..N_BOOMS {
                let oracle = fk_oracle(&m, &pose, i, &joints[i]);
                prop_assert!((tips[i] - oracle).norm() < 1e-12);
                let back = inverse_joint_solve(&m, &pose, &tips[i], i).unwrap();
                prop_assert!((back.pan - joints[i].pan).abs() < 1e-9);
                prop_assert!((back.tilt - joints[i].tilt).abs() < 1e-9);
                prop_assert!((back.extension - joints[i].extension).abs() < 1e-9);
            }
        }

        #[test]
        fn grasp_map_matches_free_body_sum(
            ang in 0.0..3.1f64,
            pans in proptest::collection::vec(-3.1..3.1f64, N_BOOMS),
            tilts in proptest::collection::vec(0.0..1.5f64, N_BOOMS),
            exts in proptest::collection::vec(0.2..10.0f64, N_BOOMS),
            tau in proptest::collection::vec(-10.0..40.0f64, 3 * N_BOOMS),
        ) {
            let m = RobotModel::default();
            let pose = BodyPose::new(Vector3::new(0.5, -1.0, 2.0), UnitQuaternion::from_axis_angle(&Vector3::y_axis(), ang));
            let joints: Vec<BoomJoint> = (0..N_BOOMS).map(|i| BoomJoint::new(pans[i], tilts[i], exts[i])).collect();
            let g = grasp_map(&m, &pose, &joints, &[true; N_BOOMS]).unwrap();
            for c in (0..3 * N_BOOMS).step_by(3) {
                prop_assert!((g.fixed_view::<3, 1>(0, c).norm() - 1.0).abs() < 1e-12);
            }
            let w = &g * nalgebra::DVector::from_column_slice(&tau);
            let oracle = wrench_oracle(&m, &pose, &joints, &tau);
            for k in 0..6 {
                prop_assert!((w[k] - oracle[k]).abs() < 1e-12 * (1.0 + oracle[k].abs()), "row {} {} vs {}", k, w[k], oracle[k]);
            }
        }
    }
}
