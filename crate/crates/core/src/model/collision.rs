use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{forward_kinematics, shoulder_world, BodyPose, BoomJoint, RobotModel};
use crate::geometry::{point_segment_distance, segment_segment_distance, segment_triangle_distance, MeshGrid, Point3, TriMesh};

/// Infinite circular tunnel: everything must stay strictly inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tunnel {
    pub axis_point: Point3,
    pub axis_direction: Point3,
    pub radius: f64,
}

impl Tunnel {
    pub fn distance_from_axis(&self, p: &Point3) -> f64 {
        let d = self.axis_direction.normalize();
        let v = p - self.axis_point;
        (v - d * v.dot(&d)).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereObstacle {
    pub center: Point3,
    pub radius: f64,
}

#[derive(Clone, Debug, Default)]
pub struct CollisionGeometry {
    pub tunnel: Option<Tunnel>,
    pub spheres: Vec<SphereObstacle>,
    pub mesh: Option<(TriMesh, MeshGrid)>,
}

impl CollisionGeometry {
    pub fn with_mesh(mut self, mesh: TriMesh) -> Self {
        let cell = mesh
            .bounds()
            .map(|(lo, hi)| ((hi - lo).max() / 32.0).max(0.05))
            .unwrap_or(1.0);
        let grid = MeshGrid::new(&mesh, cell);
        self.mesh = Some((mesh, grid));
        self
    }
}

/// Body capsule axis segment (world frame) and radius. The capsule's overall
/// length equals the body length.
pub fn body_capsule(model: &RobotModel, pose: &BodyPose) -> (Point3, Point3, f64) {
    let r = model.body_radius();
    let half = (model.body_length / 2.0 - r).max(0.0);
    (
        pose.to_world(&Vector3::new(-half, 0.0, 0.0)),
        pose.to_world(&Vector3::new(half, 0.0, 0.0)),
        r,
    )
}

/// Distances within this of the clearance count as contact, so touching the
/// boundary is a collision despite rounding.
pub const CONTACT_TOL: f64 = 1e-9;

/// Gripper-side trim so a boom touching its anchor on a wall is not reported
/// as hitting that wall.
pub const BOOM_TIP_TRIM: f64 = 0.05;

/// Collision segment of a boom: from the shoulder to just short of the
/// gripper.
pub fn boom_segment(shoulder: &Point3, gripper: &Point3) -> (Point3, Point3) {
    let v = gripper - shoulder;
    let len = v.norm();
    if len <= BOOM_TIP_TRIM {
        return (*shoulder, *shoulder);
    }
    (*shoulder, gripper - v * (BOOM_TIP_TRIM / len))
}

/// True if the body capsule or any boom touches the environment, two booms
/// come within the margin of each other, or a boom cuts through the body.
/// Contact exactly at the margin counts as a collision. Booms are not tested
/// against the tunnel wall, since they end on it.
pub fn collision_check(
    model: &RobotModel,
    pose: &BodyPose,
    joints: &[BoomJoint],
    env: &CollisionGeometry,
) -> bool {
    let margin = model.collision_margin;
    let (c0, c1, cr) = body_capsule(model, pose);
    let body_reach = cr + margin + CONTACT_TOL;
    if let Some(t) = &env.tunnel {
        // distance from the axis is convex along a segment, so the ends bound it
        if t.distance_from_axis(&c0).max(t.distance_from_axis(&c1)) + body_reach >= t.radius {
            return true;
        }
    }
    for s in &env.spheres {
        if point_segment_distance(&s.center, &c0, &c1) <= s.radius + body_reach {
            return true;
        }
    }
    let tips = forward_kinematics(model, pose, joints);
    let booms: Vec<(Point3, Point3)> = (0..joints.len())
        .map(|i| boom_segment(&shoulder_world(model, pose, i), &tips[i]))
        .collect();
    let mut candidates = Vec::new();
    if let Some((mesh, grid)) = &env.mesh {
        let mut segments = vec![(c0, c1, body_reach)];
        segments.extend(booms.iter().map(|&(a, b)| (a, b, margin + CONTACT_TOL)));
        for (a, b, reach) in segments {
            grid.candidates(&a.inf(&b), &a.sup(&b), reach, &mut candidates);
            for &f in &candidates {
                let [p, q, r] = mesh.corners(f);
                if segment_triangle_distance(&a, &b, &p, &q, &r) <= reach {
                    return true;
                }
            }
        }
    }
    for (a, b) in &booms {
        for s in &env.spheres {
            if point_segment_distance(&s.center, a, b) <= s.radius + margin + CONTACT_TOL {
                return true;
            }
        }
        // leave the first few centimetres where the boom exits the hull
        let len = (b - a).norm();
        if len > BOOM_TIP_TRIM {
            let start = a + (b - a) * (BOOM_TIP_TRIM / len);
            if segment_segment_distance(&start, b, &c0, &c1) < cr - 1e-3 {
                return true;
            }
        }
    }
    for i in 0..booms.len() {
        for j in i + 1..booms.len() {
            if segment_segment_distance(&booms[i].0, &booms[i].1, &booms[j].0, &booms[j].1) <= margin + CONTACT_TOL {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{inverse_joint_solve, N_BOOMS};

    fn tunnel(radius: f64) -> CollisionGeometry {
        CollisionGeometry {
            tunnel: Some(Tunnel { axis_point: Vector3::zeros(), axis_direction: Vector3::x(), radius }),
            ..Default::default()
        }
    }

    /// Booms pointing straight out at 1 m from every mount.
    fn short_booms() -> Vec<BoomJoint> {
        vec![BoomJoint::new(0.0, 0.3, 1.0); N_BOOMS]
    }

    #[test]
    fn centred_in_tunnel_is_clear_and_wall_hits() {
        let m = RobotModel::default();
        let env = tunnel(2.0);
        assert!(!collision_check(&m, &BodyPose::at(Vector3::zeros()), &short_booms(), &env));
        assert!(collision_check(&m, &BodyPose::at(Vector3::new(0.0, 0.0, 2.0)), &short_booms(), &env));
    }

    #[test]
    fn grazing_sphere_at_exact_margin_collides() {
        let m = RobotModel::default();
        let pose = BodyPose::at(Vector3::zeros());
        let joints = short_booms();
        // boom 0 leaves the left mid-shoulder; put a bead beside it
        let tips = forward_kinematics(&m, &pose, &joints);
        let s = shoulder_world(&m, &pose, 1);
        let u = (tips[1] - s).normalize();
        let side = u.cross(&Vector3::x()).normalize();
        let mid = s + u * 0.5;
        let radius = 0.1;
        // distance to boom computed analytically: |offset| − 0 along perpendicular
        let gap = radius + m.collision_margin;
        let mut env = CollisionGeometry::default();
        env.spheres.push(SphereObstacle { center: mid + side * gap, radius });
        assert!(collision_check(&m, &pose, &joints, &env));
        env.spheres[0].center = mid + side * (gap + 1e-6);
        assert!(!collision_check(&m, &pose, &joints, &env));
    }

    #[test]
    fn boom_through_body_detected() {
        let m = RobotModel::default();
        let pose = BodyPose::at(Vector3::zeros());
        let mut joints = short_booms();
        joints[1] = BoomJoint::new(std::f64::consts::PI, 0.0, 1.0);
        assert!(collision_check(&m, &pose, &joints, &CollisionGeometry::default()));
    }

    #[test]
    fn mesh_wall_matches_tunnel_like_plane() {
        let m = RobotModel::default();
        let plate = TriMesh::plate(3.0, -0.5, 6);
        let env = CollisionGeometry::default().with_mesh(plate);
        let pose = BodyPose::at(Vector3::zeros());
        assert!(!collision_check(&m, &pose, &short_booms(), &env));
        // body bottom at −0.2, margin 0.02 → touching when floor is at −0.22
        let low = BodyPose::at(Vector3::new(0.0, 0.0, -0.28));
        assert!(collision_check(&m, &low, &short_booms(), &env));
        // a boom aimed at an anchor on the floor is trimmed near the tip
        let anchor = Vector3::new(0.0, 0.8, -0.5);
        let mut joints = short_booms();
        let mut down = m.clone();
        down.joint_limits.tilt_range = (-1.5, 1.5);
        joints[1] = inverse_joint_solve(&down, &pose, &anchor, 1).unwrap();
        assert!(!collision_check(&down, &pose, &joints, &env));
    }
}
