//! Single-finger reachability on triangle meshes.
//!
//! A finger is mounted at a base pose a little above the rock. Each of the
//! five mobility cases adds degrees of freedom to the previous one, so a
//! case's state grid embeds in the next case's grid and the set of faces its
//! spine can engage only grows. A face is good when some collision-free
//! state drives the spine through it at an attack angle inside the window.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geometry::{segment_triangle_intersection, MeshGrid, Point3, TriMesh};

const DEG: f64 = PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerCase {
    /// One rigid phalange on a base revolute joint, spine fixed at the tip.
    Rigid = 1,
    /// Two phalanges joined by a revolute joint.
    Revolute = 2,
    /// Two phalanges joined by a ball joint.
    Ball = 3,
    /// Ball joint plus spine rotation relative to the distal phalange.
    SpineRotation = 4,
    /// Spine rotation plus tangential and normal spine travel.
    SpineTravel = 5,
}

impl FingerCase {
    pub const ALL: [FingerCase; 5] = [Self::Rigid, Self::Revolute, Self::Ball, Self::SpineRotation, Self::SpineTravel];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get((id as usize).checked_sub(1)?).copied()
    }

    fn has_bend(self) -> bool {
        self >= Self::Revolute
    }
    fn has_ball(self) -> bool {
        self >= Self::Ball
    }
    fn has_spine_rotation(self) -> bool {
        self >= Self::SpineRotation
    }
    fn has_travel(self) -> bool {
        self >= Self::SpineTravel
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReachError {
    #[error("invalid reachability parameter: {0}")]
    InvalidConfig(&'static str),
}

/// Finger geometry, joint ranges (degrees) and sampling fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReachConfig {
    pub proximal_length: f64,
    pub distal_length: f64,
    /// Length of the spine segment beyond the fingertip, m.
    pub spine_length: f64,
    pub angle_step_deg: f64,
    pub travel_step: f64,
    pub travel_max: f64,
    pub base_range_deg: [f64; 2],
    /// Inter-phalange bend; also the bend axis of the ball joint.
    pub bend_range_deg: [f64; 2],
    /// Ball-joint rotation about the axis orthogonal to the bend axis.
    pub side_range_deg: [f64; 2],
    pub twist_range_deg: [f64; 2],
    pub spine_rotation_deg: [f64; 2],
    /// Accepted angle between the reversed spine direction and the face
    /// normal.
    pub attack_window_deg: [f64; 2],
    /// Base height above the target patch, m.
    pub standoff: f64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            proximal_length: 0.060,
            distal_length: 0.053,
            spine_length: 0.005,
            angle_step_deg: 5.0,
            travel_step: 0.002,
            travel_max: 0.010,
            base_range_deg: [-90.0, 90.0],
            bend_range_deg: [0.0, 120.0],
            side_range_deg: [-45.0, 45.0],
            twist_range_deg: [-30.0, 30.0],
            spine_rotation_deg: [-45.0, 45.0],
            attack_window_deg: [10.0, 30.0],
            standoff: 0.020,
        }
    }
}

impl ReachConfig {
    pub fn validate(&self) -> Result<(), ReachError> {
        let bad = ReachError::InvalidConfig;
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.proximal_length) && pos(self.distal_length) && pos(self.spine_length)) {
            return Err(bad("lengths must be positive"));
        }
        if !(pos(self.angle_step_deg) && pos(self.travel_step)) {
            return Err(bad("sampling steps must be positive"));
        }
        if !(self.travel_max >= 0.0 && self.travel_max.is_finite()) {
            return Err(bad("travel_max must be non-negative"));
        }
        for r in [self.base_range_deg, self.bend_range_deg, self.side_range_deg, self.twist_range_deg, self.spine_rotation_deg, self.attack_window_deg] {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(bad("ranges must be finite with lo <= hi"));
            }
        }
        // the smaller cases sit at the zero of every added joint
        for r in [self.bend_range_deg, self.side_range_deg, self.twist_range_deg, self.spine_rotation_deg] {
            if r[0] > 0.0 || r[1] < 0.0 || !grid_hits_zero(r, self.angle_step_deg) {
                return Err(bad("added joint ranges must contain 0 on the sampling grid"));
            }
        }
        Ok(())
    }

    pub fn twice_as_fine(&self) -> Self {
        Self { angle_step_deg: self.angle_step_deg / 2.0, travel_step: self.travel_step / 2.0, ..self.clone() }
    }
}

fn grid_hits_zero(r: [f64; 2], step: f64) -> bool {
    let k = -r[0] / step;
    (k - k.round()).abs() < 1e-9
}

/// `lo, lo + step, …` up to `hi` (inclusive within rounding).
fn samples(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

fn angle_samples(r: [f64; 2], step_deg: f64, active: bool) -> Vec<f64> {
    if active {
        samples(r[0], r[1], step_deg).into_iter().map(|a| a * DEG).collect()
    } else {
        vec![0.0]
    }
}

/// Joint values of one finger configuration (angles in radians, travel in
/// metres). Joints a case lacks are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub base: f64,
    pub bend: f64,
    pub side: f64,
    pub twist: f64,
    pub spine_rotation: f64,
    pub travel_tangential: f64,
    pub travel_normal: f64,
}

struct Axes {
    base: Vec<f64>,
    bend: Vec<f64>,
    side: Vec<f64>,
    twist: Vec<f64>,
    spine: Vec<f64>,
    travel: Vec<f64>,
}

impl Axes {
    fn new(case: FingerCase, cfg: &ReachConfig) -> Self {
        let s = cfg.angle_step_deg;
        Self {
            base: angle_samples(cfg.base_range_deg, s, true),
            bend: angle_samples(cfg.bend_range_deg, s, case.has_bend()),
            side: angle_samples(cfg.side_range_deg, s, case.has_ball()),
            twist: angle_samples(cfg.twist_range_deg, s, case.has_ball()),
            spine: angle_samples(cfg.spine_rotation_deg, s, case.has_spine_rotation()),
            travel: if case.has_travel() { samples(0.0, cfg.travel_max, cfg.travel_step) } else { vec![0.0] },
        }
    }
}

/// Number of states [`sample_finger_states`] yields.
pub fn state_count(case: FingerCase, cfg: &ReachConfig) -> u64 {
    let a = Axes::new(case, cfg);
    [a.base.len(), a.bend.len(), a.side.len(), a.twist.len(), a.spine.len(), a.travel.len(), a.travel.len()]
        .iter()
        .map(|&n| n as u64)
        .product()
}

/// Cartesian grid over the case's joints, base angle outermost and normal
/// travel innermost.
pub fn sample_finger_states(case: FingerCase, cfg: &ReachConfig) -> impl Iterator<Item = FingerState> {
    let a = Axes::new(case, cfg);
    let total = state_count(case, cfg);
    let dims = [a.base.len(), a.bend.len(), a.side.len(), a.twist.len(), a.spine.len(), a.travel.len(), a.travel.len()];
    (0..total).map(move |mut k| {
        let mut idx = [0usize; 7];
        for d in (0..7).rev() {
            idx[d] = (k % dims[d] as u64) as usize;
            k /= dims[d] as u64;
        }
        FingerState {
            base: a.base[idx[0]],
            bend: a.bend[idx[1]],
            side: a.side[idx[2]],
            twist: a.twist[idx[3]],
            spine_rotation: a.spine[idx[4]],
            travel_tangential: a.travel[idx[5]],
            travel_normal: a.travel[idx[6]],
        }
    })
}

/// Finger mount: position and frame. Column `x` is the lateral direction the
/// finger curls toward, `z` the approach direction (into the rock) and
/// `y = z × x` the axis of the base and bend joints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub origin: Point3,
    pub frame: Rotation3<f64>,
}

impl BasePose {
    /// Frame from an approach direction and a lateral hint (projected
    /// orthogonal to the approach).
    pub fn new(origin: Point3, approach: &Vector3<f64>, lateral: &Vector3<f64>) -> Self {
        let z = approach.normalize();
        let x = (lateral - z * z.dot(lateral)).normalize();
        let y = z.cross(&x);
        Self { origin, frame: Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])) }
    }

    /// `standoff` above `target` along the area-weighted mean normal of the
    /// faces whose centroids lie within `patch_radius` of it.
    pub fn above_patch(mesh: &TriMesh, target: &Point3, patch_radius: f64, standoff: f64, lateral: &Vector3<f64>) -> Option<Self> {
        let n: Vector3<f64> = (0..mesh.len())
            .filter(|&f| (mesh.centroid(f) - target).norm() <= patch_radius)
            .map(|f| mesh.normals[f] * mesh.areas[f])
            .sum();
        if n.norm() == 0.0 {
            return None;
        }
        let n = n.normalize();
        Some(Self::new(target + n * standoff, &-n, lateral))
    }
}

/// Joint positions and spine segment of one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerPose {
    pub base: Point3,
    pub joint: Point3,
    pub tip: Point3,
    pub spine_start: Point3,
    pub spine_end: Point3,
    /// Unit direction the spine points in.
    pub spine_dir: Vector3<f64>,
}

fn ry(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a)
}

/// Distal-link frame and phalange points for the joint part of a state.
fn distal(base: &BasePose, cfg: &ReachConfig, q: f64, bend: f64, side: f64, twist: f64) -> (Rotation3<f64>, Point3, Point3) {
    let f1 = base.frame * ry(q);
    let joint = base.origin + f1 * Vector3::z() * cfg.proximal_length;
    let f2 = f1 * ry(bend) * Rotation3::from_axis_angle(&Vector3::x_axis(), side) * Rotation3::from_axis_angle(&Vector3::z_axis(), twist);
    let tip = joint + f2 * Vector3::z() * cfg.distal_length;
    (f2, joint, tip)
}

/// Forward kinematics. The spine rotates about the distal bend axis and
/// travels along the distal axis (tangential) and the curl direction
/// (normal).
pub fn finger_pose(state: &FingerState, base: &BasePose, cfg: &ReachConfig) -> FingerPose {
    let (f2, joint, tip) = distal(base, cfg, state.base, state.bend, state.side, state.twist);
    let spine_dir = f2 * ry(state.spine_rotation) * Vector3::z();
    let spine_start = tip + f2 * Vector3::new(state.travel_normal, 0.0, state.travel_tangential);
    FingerPose { base: base.origin, joint, tip, spine_start, spine_end: spine_start + spine_dir * cfg.spine_length, spine_dir }
}

fn segment_hits(mesh: &TriMesh, f: usize, p: &Point3, q: &Point3) -> bool {
    let [a, b, c] = mesh.corners(f);
    segment_triangle_intersection(p, q, &a, &b, &c).is_some()
}

/// Whether either phalange segment crosses any triangle (all-pairs test).
pub fn finger_collides(pose: &FingerPose, mesh: &TriMesh) -> bool {
    (0..mesh.len()).any(|f| segment_hits(mesh, f, &pose.base, &pose.joint) || segment_hits(mesh, f, &pose.joint, &pose.tip))
}

/// [`finger_collides`] restricted to the grid's candidate faces.
pub fn finger_collides_indexed(pose: &FingerPose, mesh: &TriMesh, grid: &MeshGrid) -> bool {
    let mut cand = Vec::new();
    [(pose.base, pose.joint), (pose.joint, pose.tip)].iter().any(|(p, q)| {
        grid.candidates(&p.inf(q), &p.sup(q), 1e-9, &mut cand);
        cand.iter().any(|&f| segment_hits(mesh, f, p, q))
    })
}

/// Whether the spine of `pose` engages face `f` inside the attack window
/// `[lo, hi]` (radians).
pub fn spine_engages(pose: &FingerPose, mesh: &TriMesh, f: usize, window: (f64, f64)) -> bool {
    let attack = (-pose.spine_dir.dot(&mesh.normals[f])).clamp(-1.0, 1.0).acos();
    window.0 <= attack && attack <= window.1 && segment_hits(mesh, f, &pose.spine_start, &pose.spine_end)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reachable {
    pub case: FingerCase,
    /// Good faces, ascending.
    pub faces: Vec<usize>,
    /// Sum of the good faces' areas in ascending face order, m².
    pub area: f64,
    pub states: u64,
    pub free_states: u64,
}

/// Good faces of `mesh` for `case`. States are grouped by their phalange
/// configuration, which alone decides collision; every spine state of a
/// free configuration is then tested against the faces near the tip.
pub fn reachable_faces(case: FingerCase, mesh: &TriMesh, base: &BasePose, cfg: &ReachConfig, exec: Exec) -> Result<Reachable, ReachError> {
    cfg.validate()?;
    let axes = Axes::new(case, cfg);
    let states = state_count(case, cfg);
    if mesh.is_empty() {
        return Ok(Reachable { case, faces: vec![], area: 0.0, states, free_states: states });
    }
    let window = (cfg.attack_window_deg[0] * DEG, cfg.attack_window_deg[1] * DEG);
    let (lo, hi) = mesh.bounds().expect("non-empty mesh");
    let cell = ((hi - lo).max() / 32.0).max(cfg.spine_length);
    let grid = MeshGrid::new(mesh, cell);
    let good: Vec<AtomicBool> = (0..mesh.len()).map(|_| AtomicBool::new(false)).collect();
    let (nb, ns) = (axes.bend.len(), axes.side.len());
    let spine_states = (axes.twist.len() * axes.spine.len() * axes.travel.len() * axes.travel.len()) as u64;
    let reach = cfg.spine_length + cfg.travel_max * 2f64.sqrt() + 1e-9;

    let free = exec.map_range(axes.base.len() * nb * ns, |k| {
        let (q, bend, side) = (axes.base[k / (nb * ns)], axes.bend[k / ns % nb], axes.side[k % ns]);
        let (_, joint, tip) = distal(base, cfg, q, bend, side, 0.0);
        let probe = FingerPose { base: base.origin, joint, tip, spine_start: tip, spine_end: tip, spine_dir: Vector3::z() };
        if finger_collides_indexed(&probe, mesh, &grid) {
            return false;
        }
        let mut near = Vec::new();
        grid.candidates(&tip, &tip, reach, &mut near);
        if near.is_empty() {
            return true;
        }
        for &twist in &axes.twist {
            let (f2, _, _) = distal(base, cfg, q, bend, side, twist);
            let (ax, az) = (f2 * Vector3::x(), f2 * Vector3::z());
            for &rot in &axes.spine {
                let dir = f2 * ry(rot) * Vector3::z();
                for &f in &near {
                    if good[f].load(Ordering::Relaxed) {
                        continue;
                    }
                    let attack = (-dir.dot(&mesh.normals[f])).clamp(-1.0, 1.0).acos();
                    if !(window.0 <= attack && attack <= window.1) {
                        continue;
                    }
                    'travel: for &t in &axes.travel {
                        for &n in &axes.travel {
                            let s0 = tip + az * t + ax * n;
                            if segment_hits(mesh, f, &s0, &(s0 + dir * cfg.spine_length)) {
                                good[f].store(true, Ordering::Relaxed);
                                break 'travel;
                            }
                        }
                    }
                }
            }
        }
        true
    });
    let free_states = free.iter().filter(|&&b| b).count() as u64 * spine_states;
    let faces: Vec<usize> = (0..mesh.len()).filter(|&f| good[f].load(Ordering::Relaxed)).collect();
    let area = faces.iter().fold(0.0, |a, &f| a + mesh.areas[f]);
    Ok(Reachable { case, faces, area, states, free_states })
}

/// All five cases on one mesh and base pose.
pub fn compare_cases(mesh: &TriMesh, base: &BasePose, cfg: &ReachConfig, exec: Exec) -> Result<Vec<Reachable>, ReachError> {
    FingerCase::ALL.iter().map(|&c| reachable_faces(c, mesh, base, cfg, exec)).collect()
}

/// `case,area_m2,faces,states` rows.
pub fn cases_csv(results: &[Reachable]) -> String {
    let mut s = String::from("case,area_m2,faces,states\n");
    for r in results {
        let _ = writeln!(s, "{},{},{},{}", r.case.id(), r.area, r.faces.len(), r.states);
    }
    s
}

/// Faces good in `inner` but not in `outer`; empty when the sets nest.
pub fn nesting_violations(inner: &Reachable, outer: &Reachable) -> Vec<usize> {
    let o: BTreeSet<usize> = outer.faces.iter().copied().collect();
    inner.faces.iter().copied().filter(|f| !o.contains(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_ids_round_trip() {
        for c in FingerCase::ALL {
            assert_eq!(FingerCase::from_id(c.id()), Some(c));
        }
        assert_eq!(FingerCase::from_id(0), None);
        assert_eq!(FingerCase::from_id(6), None);
    }

    #[test]
    fn rigid_finger_points_along_the_approach() {
        let cfg = ReachConfig::default();
        let base = BasePose::new(Point3::new(0.0, 0.0, 0.2), &-Vector3::z(), &Vector3::x());
        let p = finger_pose(&FingerState::default(), &base, &cfg);
        assert!((p.tip - Point3::new(0.0, 0.0, 0.2 - 0.113)).norm() < 1e-12);
        assert!((p.spine_dir + Vector3::z()).norm() < 1e-12);
        // positive bend curls toward the lateral axis
        let s = FingerState { bend: 90.0 * DEG, ..Default::default() };
        let p = finger_pose(&s, &base, &cfg);
        assert!((p.tip - Point3::new(0.053, 0.0, 0.14)).norm() < 1e-12, "{}", p.tip);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let cfg = ReachConfig { bend_range_deg: [10.0, 120.0], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ReachConfig { side_range_deg: [-42.0, 45.0], ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(ReachConfig::default().validate().is_ok());
    }
}
