use std::time::Instant;

use boomclimb::model::*;
use boomclimb::scp::*;
use boomclimb::synthetic::{default_boom_angles, tunnel_along_x, wall_anchors};
use nalgebra::{DVector, UnitQuaternion, Vector3};

struct Scene {
    model: RobotModel,
    env: CollisionGeometry,
    booms: Vec<BoomState>,
    start: BodyPose,
}

/// Default stance anchored around x = 0.25 so the body can travel from 0 to
/// 0.5 m between its anchors.
fn scene() -> Scene {
    scene_around(0.25)
}

fn scene_around(x: f64) -> Scene {
    let model = RobotModel::default();
    let tunnel = tunnel_along_x(2.0);
    let mid = BodyPose::at(Vector3::new(x, 0.0, 0.0));
    let anchors = wall_anchors(&model, &mid, &tunnel, &default_boom_angles(), 0).unwrap();
    Scene {
        booms: anchors.iter().map(|a| BoomState::Attached(a.position)).collect(),
        env: CollisionGeometry { tunnel: Some(tunnel), ..Default::default() },
        start: BodyPose::at(Vector3::zeros()),
        model,
    }
}

fn bounds_hold(model: &RobotModel, traj: &Trajectory) {
    let lim = &model.actuation_limits;
    for tau in &traj.controls {
        for (j, v) in tau.iter().enumerate() {
            if j % 3 == 0 {
                assert!(*v >= model.min_tension.max(lim.prismatic_force_range.0) && *v <= lim.prismatic_force_range.1, "{v}");
            } else {
                assert!(*v >= lim.moment_range.0 && *v <= lim.moment_range.1, "{v}");
            }
        }
    }
    for (s, booms) in traj.states.iter().zip(&traj.booms) {
        for (i, b) in booms.iter().enumerate() {
            inverse_joint_solve(model, &s.pose(), &b.target(), i).unwrap();
        }
    }
}

fn rollout_defects(model: &RobotModel, traj: &Trajectory) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..traj.controls.len() {
        let tau = DVector::from_vec(traj.controls[k].clone());
        let next = nonlinear_step(model, &traj.states[k], &tau, traj.dt, &traj.booms[k]).unwrap();
        let s = &traj.states[k + 1];
        worst.0 = worst.0.max((next.position - s.position).norm());
        worst.1 = worst.1.max(next.orientation.angle_to(&s.orientation));
    }
    worst
}

#[test]
fn static_controls_hover() {
    let sc = scene();
    let cert = pose_feasible(&sc.model, &sc.start, &sc.booms, &sc.env).unwrap();
    let s = BodyState::at_rest(&sc.start);
    let next = nonlinear_step(&sc.model, &s, &cert.controls.tau, 0.5, &sc.booms).unwrap();
    assert!((next.position - s.position).norm() < 1e-12);
    assert!(next.momentum.norm() < 1e-10 && next.angular_momentum.norm() < 1e-10);
    assert!(next.orientation.angle_to(&s.orientation) < 1e-12);
}

#[test]
fn zero_controls_fall_freely() {
    let sc = scene();
    let s = BodyState::at_rest(&sc.start);
    let dt = 0.2;
    let next = nonlinear_step(&sc.model, &s, &DVector::zeros(24), dt, &sc.booms).unwrap();
    let dp = -sc.model.mass_body * sc.model.gravity * dt;
    assert!((next.momentum - Vector3::new(0.0, 0.0, dp)).norm() < 1e-12);
    assert!((next.position.z - dt * dp / sc.model.mass_body).abs() < 1e-12);
}

/// One step against a reference that integrates the same held controls in
/// 100 substeps: the gap shrinks as Δt².
#[test]
fn step_error_is_second_order() {
    let sc = scene();
    let cert = pose_feasible(&sc.model, &sc.start, &sc.booms, &sc.env).unwrap();
    let mut tau = cert.controls.tau.clone();
    tau[0] += 5.0;
    tau[4] += 1.0;
    let mut s = BodyState::at_rest(&sc.start);
    s.momentum = Vector3::new(1.0, -0.5, 0.3);
    s.angular_momentum = Vector3::new(0.05, 0.1, -0.02);
    let err = |dt: f64| {
        let coarse = nonlinear_step(&sc.model, &s, &tau, dt, &sc.booms).unwrap();
        let mut fine = s;
        for _ in 0..100 {
            fine = nonlinear_step(&sc.model, &fine, &tau, dt / 100.0, &sc.booms).unwrap();
        }
        (coarse.position - fine.position).norm()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.5, "{e1} {e2} {ratio}");
}

#[test]
fn seed_for_standing_still_is_one_waypoint() {
    let sc = scene();
    let w = seed_trajectory(&sc.model, &sc.start, &sc.start, &sc.booms, &sc.env, &SeedConfig::default()).unwrap();
    assert_eq!(w, vec![sc.start]);
}

#[test]
fn clear_tunnel_seed_is_straight() {
    let sc = scene();
    let goal = BodyPose::at(Vector3::new(0.5, 0.0, 0.0));
    let cfg = SeedConfig::default();
    let w = seed_trajectory(&sc.model, &sc.start, &goal, &sc.booms, &sc.env, &cfg).unwrap();
    assert_eq!(w.len(), 11);
    for (k, p) in w.iter().enumerate() {
        assert!((p.position - Vector3::new(0.05 * k as f64, 0.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn seed_detours_around_a_bead() {
    // the body spans ±0.4 m along its axis, so the bead sits clear of both ends
    let mut sc = scene_around(0.6);
    sc.env.spheres.push(SphereObstacle { center: Vector3::new(0.6, 0.0, -0.28), radius: 0.1 });
    let goal = BodyPose::at(Vector3::new(1.2, 0.0, 0.0));
    assert!(pose_feasible(&sc.model, &BodyPose::at(Vector3::new(0.6, 0.0, 0.0)), &sc.booms, &sc.env).is_err());
    let cfg = SeedConfig::default();
    let w = seed_trajectory(&sc.model, &sc.start, &goal, &sc.booms, &sc.env, &cfg).unwrap();
    for p in &w {
        pose_feasible(&sc.model, p, &sc.booms, &sc.env).unwrap();
    }
    for pair in w.windows(2) {
        assert!((pair[1].position - pair[0].position).norm() <= cfg.step + 1e-12);
    }
    assert!(w.iter().any(|p| p.position.z > 1e-3));
    assert_eq!(w.last().unwrap().position, goal.position);
}

#[test]
fn hover_solve_stays_put() {
    let sc = scene();
    let traj = scp_solve_body(&sc.model, &[sc.start], &sc.booms, &ScpConfig::default()).unwrap();
    assert_eq!(traj.states.len(), 2);
    for s in &traj.states {
        assert!((s.position - sc.start.position).norm() < 1e-9);
    }
    bounds_hold(&sc.model, &traj);
}

#[test]
fn body_translation_converges_within_bounds() {
    let sc = scene();
    let goal = BodyPose::new(Vector3::new(0.5, 0.0, 0.0), UnitQuaternion::identity());
    let seed = seed_trajectory(&sc.model, &sc.start, &goal, &sc.booms, &sc.env, &SeedConfig::default()).unwrap();
    let t0 = Instant::now();
    let traj = scp_solve_body(&sc.model, &seed, &sc.booms, &ScpConfig::default()).unwrap();
    let elapsed = t0.elapsed();
    println!("{:?} {:?}", elapsed, traj.diagnostics);
    assert!(elapsed.as_secs_f64() < 60.0);
    let (first, last) = (traj.states.first().unwrap(), traj.states.last().unwrap());
    assert!((first.position - sc.start.position).norm() <= 1e-6 && first.momentum.norm() <= 1e-6);
    assert!((last.position - goal.position).norm() <= 1e-6 && last.momentum.norm() <= 1e-6);
    bounds_hold(&sc.model, &traj);
    let (dpos, drot) = rollout_defects(&sc.model, &traj);
    assert!(dpos <= 1e-3 && drot <= 1e-3, "{dpos} {drot}");
    let trace = &traj.diagnostics.objective_trace;
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs())));
    // the optimized path moves, smoothly
    assert!(max_position_jump(&traj) < 0.2);
}

#[test]
fn tight_force_bound_never_violated() {
    let mut sc = scene();
    let goal = BodyPose::at(Vector3::new(0.5, 0.0, 0.0));
    let seed = seed_trajectory(&sc.model, &sc.start, &goal, &sc.booms, &sc.env, &SeedConfig::default()).unwrap();
    sc.model.actuation_limits.prismatic_force_range.1 = 5.0;
    match scp_solve_body(&sc.model, &seed, &sc.booms, &ScpConfig::default()) {
        Ok(traj) => bounds_hold(&sc.model, &traj),
        Err(ScpError::NotConverged(traj)) => bounds_hold(&sc.model, &traj),
        Err(e) => assert!(
            matches!(e, ScpError::SeedControls { .. } | ScpError::SubproblemInfeasible { .. }),
            "{e}"
        ),
    }
}

/// Boom 6 (front top) swaps to an anchor 1 m further along the ceiling.
fn gripper_move(sc: &Scene) -> (BodyPose, Vec<Point3>, Point3) {
    let from = sc.booms[6].target();
    let to = from + Vector3::new(1.0, 0.0, 0.0);
    let tunnel = sc.env.tunnel.clone().unwrap();
    let to = boomclimb::synthetic::ray_to_wall(&Vector3::new(to.x, 0.0, 0.0), &Vector3::new(0.0, from.y, from.z), &tunnel).unwrap();
    let pose = BodyPose::at(Vector3::new(0.25, 0.0, 0.0));
    let path = seed_gripper_path(&sc.model, &pose, &sc.booms, 6, &from, &to, &sc.env, &SeedConfig { step: 0.1, ..Default::default() }).unwrap();
    (pose, path, to)
}

use boomclimb::geometry::Point3;

#[test]
fn end_effector_move_reaches_the_new_anchor() {
    let sc = scene();
    let (pose, path, to) = gripper_move(&sc);
    assert!((path[0] - sc.booms[6].target()).norm() < 1e-12);
    let t0 = Instant::now();
    let traj = scp_solve_end_effector(&sc.model, &pose, &sc.booms, 6, &path, &ScpConfig::default()).unwrap();
    assert!(t0.elapsed().as_secs_f64() < 60.0);
    let last = traj.states.last().unwrap();
    let joints = joints_at(&sc.model, last, traj.booms.last().unwrap());
    let gripper = forward_kinematics(&sc.model, &last.pose(), &joints)[6];
    assert!((gripper - to).norm() < 0.01);
    assert!((traj.states[0].position - pose.position).norm() <= 1e-6);
    assert!((last.position - pose.position).norm() <= 1e-6);
    bounds_hold(&sc.model, &traj);
    let (dpos, drot) = rollout_defects(&sc.model, &traj);
    assert!(dpos <= 1e-3 && drot <= 1e-3);
    // the held boom contributes no controls
    assert!(traj.controls.iter().all(|t| t.len() == 21));
}

#[test]
fn stationary_gripper_is_a_loaded_hover() {
    let sc = scene();
    let pose = BodyPose::at(Vector3::new(0.25, 0.0, 0.0));
    let p = sc.booms[6].target();
    let traj = scp_solve_end_effector(&sc.model, &pose, &sc.booms, 6, &[p, p, p], &ScpConfig::default()).unwrap();
    for s in &traj.states {
        assert!((s.position - pose.position).norm() < 1e-6);
    }
    // the weight of the held gripper raises the effort over the same 7-stance without it
    let mut light = sc.model.clone();
    light.mass_gripper = 0.0;
    let unloaded = scp_solve_end_effector(&light, &pose, &sc.booms, 6, &[p, p, p], &ScpConfig::default()).unwrap();
    let effort = |t: &Trajectory| t.controls.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>();
    assert!(effort(&traj) > effort(&unloaded));
}

#[test]
fn massless_gripper_matches_body_only_solve() {
    let mut sc = scene();
    sc.model.mass_gripper = 0.0;
    let (pose, path, _) = gripper_move(&sc);
    let cfg = ScpConfig::default();
    let ee = scp_solve_end_effector(&sc.model, &pose, &sc.booms, 6, &path, &cfg).unwrap();
    // same 7 attached booms, body held at the same pose for as many steps
    let mut booms = sc.booms.clone();
    booms[6] = BoomState::Held(path[0]);
    let body = scp_solve_body(&sc.model, &vec![pose; path.len()], &booms, &cfg).unwrap();
    for (a, b) in ee.controls.iter().zip(&body.controls) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-4, "{x} {y}");
        }
    }
}
