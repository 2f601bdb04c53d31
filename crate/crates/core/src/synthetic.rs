//! Synthetic tunnel scenes used by tests, benchmarks and the CLI demos.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::footstep::Stance;
use crate::geometry::Point3;
use crate::perception::PointCloud;
use crate::rng::rng_for;
use crate::model::{boom_direction_mount, boom_frame_world, shoulder_world, Anchor, AnchorId, BodyPose, RobotModel, Tunnel, N_BOOMS};

/// Tunnel of the given radius running along world x through the origin.
pub fn tunnel_along_x(radius: f64) -> Tunnel {
    Tunnel {
        axis_point: Vector3::zeros(),
        axis_direction: Vector3::x(),
        radius,
    }
}

/// First point where the ray `origin + t·dir` (t > 0) meets the tunnel wall.
/// `origin` must be inside the tunnel.
pub fn ray_to_wall(origin: &Point3, dir: &Point3, tunnel: &Tunnel) -> Option<Point3> {
    let axis = tunnel.axis_direction.normalize();
    let o = origin - tunnel.axis_point;
    let o_perp = o - axis * o.dot(&axis);
    let d_perp = dir - axis * dir.dot(&axis);
    let a = d_perp.norm_squared();
    if a < 1e-15 {
        return None;
    }
    let b = 2.0 * o_perp.dot(&d_perp);
    let c = o_perp.norm_squared() - tunnel.radius * tunnel.radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b + disc.sqrt()) / (2.0 * a);
    (t > 0.0).then(|| origin + dir * t)
}

/// Default mount-frame (pan, tilt) used to place one anchor per boom: side
/// booms splay fore/aft and rise 35°, top booms lean 40° fore/aft.
pub fn default_boom_angles() -> [(f64, f64); N_BOOMS] {
    let d = std::f64::consts::PI / 180.0;
    [
        // left side: boom frame y points to −body x, so positive pan leans aft
        (30.0 * d, 35.0 * d),
        (0.0, 35.0 * d),
        (-30.0 * d, 35.0 * d),
        // right side: boom frame y points to +body x; the outer booms splay outward
        (-30.0 * d, 35.0 * d),
        (0.0, 35.0 * d),
        (30.0 * d, 35.0 * d),
        (0.0, 40.0 * d),
        (0.0, 40.0 * d),
    ]
}

/// Places one wall anchor per boom by casting the given joint directions
/// from `pose`. Ids are `first_id..first_id + 8` in boom order.
pub fn wall_anchors(
    model: &RobotModel,
    pose: &BodyPose,
    tunnel: &Tunnel,
    angles: &[(f64, f64); N_BOOMS],
    first_id: AnchorId,
) -> Option<Vec<Anchor>> {
    (0..N_BOOMS)
        .map(|i| {
            let (pan, tilt) = angles[i];
            let dir = boom_frame_world(model, pose, i) * boom_direction_mount(pan, tilt);
            ray_to_wall(&shoulder_world(model, pose, i), &dir, tunnel).map(|p| Anchor {
                id: first_id + i as AnchorId,
                position: p,
                limit_surface_ref: None,
            })
        })
        .collect()
}

/// A straight tunnel with the default stance anchored around the origin plus
/// spare anchors. Each `(boom, dx)` adds the anchor that boom would take from
/// the default angles with the body moved `dx` along the tunnel; spare ids
/// follow the home ids in order. Returns the anchors and the home stance.
pub fn corridor(
    model: &RobotModel,
    tunnel: &Tunnel,
    spares: &[(usize, f64)],
) -> Option<(Vec<Anchor>, Stance)> {
    let pose = BodyPose::at(Vector3::zeros());
    let angles = default_boom_angles();
    let mut anchors = wall_anchors(model, &pose, tunnel, &angles, 0)?;
    for (k, &(boom, dx)) in spares.iter().enumerate() {
        let shifted = BodyPose::at(tunnel.axis_direction.normalize() * dx);
        let (pan, tilt) = angles[boom];
        let dir = boom_frame_world(model, &shifted, boom) * boom_direction_mount(pan, tilt);
        let p = ray_to_wall(&shoulder_world(model, &shifted, boom), &dir, tunnel)?;
        anchors.push(Anchor {
            id: (N_BOOMS + k) as AnchorId,
            position: p,
            limit_surface_ref: None,
        });
    }
    let assignment = std::array::from_fn(|i| i as AnchorId);
    Some((anchors, Stance { assignment, pose }))
}

/// Default robot with narrow joint cones (pan ±40°, tilt ≤ 50°, extension
/// ≤ 2.5 m), so each boom reaches only anchors near its own slot and stance
/// graphs stay small enough to enumerate.
pub fn short_reach_model() -> RobotModel {
    let mut m = RobotModel::default();
    let d = std::f64::consts::PI / 180.0;
    m.joint_limits.pan_range = (-40.0 * d, 40.0 * d);
    m.joint_limits.tilt_range = (0.0, 50.0 * d);
    m.joint_limits.extension_range = (0.2, 2.5);
    m
}

/// Fibonacci-spiral samples of the cap of a sphere within polar angle
/// `max_polar` of +z. Nearly uniform in area.
pub fn sphere_cap(center: &Point3, radius: f64, max_polar: f64, n: usize) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z_min = max_polar.cos();
    (0..n)
        .map(|k| {
            let z = 1.0 - (1.0 - z_min) * (k as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * k as f64;
            center + Vector3::new(s * t.cos(), s * t.sin(), z) * radius
        })
        .collect()
}

/// Depth-sensor view of a spherical rock: `n_sphere` points uniform over the
/// half facing the origin with isotropic Gaussian noise `sigma`, plus
/// uniform outliers in the box `center ± 2r` making up `outlier_fraction` of
/// the cloud.
pub fn noisy_sphere_scene(center: &Point3, radius: f64, n_sphere: usize, sigma: f64, outlier_fraction: f64, seed: u64) -> PointCloud {
    assert!((0.0..1.0).contains(&outlier_fraction));
    let mut rng = rng_for(seed, &[]);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let view = -center.normalize();
    let mut points = Vec::new();
    while points.len() < n_sphere {
        let d = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let d = d.normalize();
        if d.dot(&view) < 0.0 {
            continue;
        }
        let jitter = if sigma > 0.0 { Vector3::from_fn(|_, _| noise.sample(&mut rng)) } else { Vector3::zeros() };
        points.push(center + d * radius + jitter);
    }
    let n_out = (n_sphere as f64 * outlier_fraction / (1.0 - outlier_fraction)).round() as usize;
    for _ in 0..n_out {
        points.push(center + Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0) * radius));
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stance_is_left_right_mirror() {
        let m = RobotModel::default();
        let pose = BodyPose::at(Vector3::zeros());
        let a = wall_anchors(&m, &pose, &tunnel_along_x(2.0), &default_boom_angles(), 0).unwrap();
        for (l, r) in [(0, 3), (1, 4), (2, 5)] {
            let p = a[l].position;
            let q = a[r].position;
            assert!((p - Vector3::new(q.x, -q.y, q.z)).norm() < 1e-12, "{p:?} {q:?}");
        }
        // fore/aft: leading side booms lean forward, top booms split
        assert!(a[0].position.x < a[2].position.x);
        assert!(a[6].position.x > 0.2 && a[7].position.x < -0.2);
        for anchor in &a {
            let r = (anchor.position.y.powi(2) + anchor.position.z.powi(2)).sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }
}
