use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScpError;
use crate::geometry::Point3;
use crate::model::{pose_feasible, BodyPose, BoomState, CollisionGeometry, RobotModel};
use crate::rng::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    /// Maximum spacing between consecutive waypoints, m.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Spread of the local detour samples, m.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Total detour samples before giving up.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_step() -> f64 {
    0.05
}
fn default_sigma() -> f64 {
    0.05
}
fn default_budget() -> usize {
    2000
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            step: default_step(),
            sigma: default_sigma(),
            budget: default_budget(),
            seed: 0,
        }
    }
}

const BATCH: usize = 16;
const STUCK_BATCHES: usize = 4;

/// Walks from `start` to `goal` in steps of at most `cfg.step`, taking the
/// straight-line step when it is feasible and otherwise the feasible local
/// sample closest to `goal`, falling back to unvisited sideways samples
/// when no sample makes progress. Returns `[start, …, goal]`. Both ends must be
/// feasible; orientation is interpolated by progress along the way.
pub fn seed_path<F>(start: &Point3, goal: &Point3, cfg: &SeedConfig, stream: u64, feasible: F) -> Result<Vec<Point3>, ScpError>
where
    F: Fn(&Point3, f64) -> bool,
{
    let total = (goal - start).norm();
    let progress = |p: &Point3| if total == 0.0 { 1.0 } else { (1.0 - (goal - p).norm() / total).clamp(0.0, 1.0) };
    let mut path = vec![*start];
    let mut cur = *start;
    let mut rng = rng_for(cfg.seed, &[stream]);
    let noise = Normal::new(0.0, cfg.sigma).expect("positive sigma");
    let mut spent = 0;
    while (goal - cur).norm() > cfg.step * (1.0 + 1e-9) {
        let next = cur + (goal - cur).normalize() * cfg.step;
        if feasible(&next, progress(&next)) {
            path.push(next);
            cur = next;
            continue;
        }
        let mut best: Option<(f64, Point3)> = None;
        let mut stuck = 0;
        while best.is_none() {
            if spent >= cfg.budget {
                return Err(ScpError::SeedFailed { waypoints: path.len() });
            }
            // after a few fruitless batches, follow the obstacle: any unvisited
            // feasible sample will do, even one that backs away from the goal
            let wander = stuck >= STUCK_BATCHES;
            for _ in 0..BATCH {
                let mut p = next + Vector3::from_fn(|_, _| noise.sample(&mut rng));
                let d = (p - cur).norm();
                if d > cfg.step {
                    p = cur + (p - cur) * (cfg.step / d);
                }
                let to_goal = (goal - p).norm();
                let admissible = if wander {
                    path.iter().all(|q| (p - q).norm() >= 0.5 * cfg.step)
                } else {
                    to_goal < (goal - cur).norm()
                };
                if admissible && best.map_or(true, |(b, _)| to_goal < b) && feasible(&p, progress(&p)) {
                    best = Some((to_goal, p));
                }
            }
            spent += BATCH;
            stuck += 1;
        }
        let (_, p) = best.expect("loop exits with a sample");
        path.push(p);
        cur = p;
    }
    if cur != *goal {
        path.push(*goal);
    }
    Ok(path)
}

/// Static waypoints for a body move within one stance, each passing
/// `pose_feasible`.
pub fn seed_trajectory(
    model: &RobotModel,
    start: &BodyPose,
    goal: &BodyPose,
    booms: &[BoomState],
    env: &CollisionGeometry,
    cfg: &SeedConfig,
) -> Result<Vec<BodyPose>, ScpError> {
    for (end, p) in [("start", start), ("goal", goal)] {
        pose_feasible(model, p, booms, env).map_err(|v| ScpError::InfeasibleEndpoint { end, reason: v.to_string() })?;
    }
    let orient = |s: f64| start.orientation.slerp(&goal.orientation, s);
    let path = seed_path(&start.position, &goal.position, cfg, 0, |p, s| {
        pose_feasible(model, &BodyPose::new(*p, orient(s)), booms, env).is_ok()
    })?;
    let total = (goal.position - start.position).norm();
    let n = path.len();
    Ok(path
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let s = if k + 1 == n {
                1.0
            } else if total == 0.0 {
                0.0
            } else {
                (1.0 - (goal.position - p).norm() / total).clamp(0.0, 1.0)
            };
            BodyPose::new(p, orient(s))
        })
        .collect())
}

/// Gripper waypoints carrying detached boom `boom` from `from` to `to` while
/// the body holds `pose` on the remaining booms. `booms[boom]` is ignored.
pub fn seed_gripper_path(
    model: &RobotModel,
    pose: &BodyPose,
    booms: &[BoomState],
    boom: usize,
    from: &Point3,
    to: &Point3,
    env: &CollisionGeometry,
    cfg: &SeedConfig,
) -> Result<Vec<Point3>, ScpError> {
    let with = |p: &Point3| {
        let mut b = booms.to_vec();
        b[boom] = BoomState::Held(*p);
        b
    };
    for (end, p) in [("start", from), ("goal", to)] {
        pose_feasible(model, pose, &with(p), env).map_err(|v| ScpError::InfeasibleEndpoint { end, reason: v.to_string() })?;
    }
    seed_path(from, to, cfg, 1 + boom as u64, |p, _| pose_feasible(model, pose, &with(p), env).is_ok())
}
