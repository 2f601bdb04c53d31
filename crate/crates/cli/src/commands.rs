use std::fmt::Write as _;
use std::path::Path;

use boomclimb::exec::Exec;
use boomclimb::footstep::{build_stance_graph, plan_footsteps, PlanError};
use boomclimb::geometry::{Point3, TriMesh};
use boomclimb::grasp::{alpha_from_ratio, PullDirection};
use boomclimb::limit_surface::{build_limit_surface, LimitSurface};
use boomclimb::model::{BodyPose, BoomState};
use boomclimb::perception::{
    alpha_map, estimate_normals, load_point_cloud, msac_sphere_fit, rank_grasp_sites, voxel_downsample, GraspSite,
};
use boomclimb::reach::{cases_csv, compare_cases, BasePose};
use boomclimb::scp::{scp_solve_body, scp_solve_end_effector, seed_gripper_path, seed_trajectory, ScpError, Trajectory};
use serde::Serialize;

use crate::manifest::Outputs;
use crate::scenario::Scenario;
use crate::CliError;

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn surface_csv(s: &LimitSurface) -> String {
    let mut out = String::from("beta,phi,mean,std,p5,p50,n_capped,n_samples\n");
    for c in &s.cells {
        writeln!(out, "{},{},{},{},{},{},{},{}", c.beta, c.phi, c.mean, c.std, c.p5, c.p50, c.n_capped, c.n_samples).unwrap();
    }
    out
}

pub fn limit_surface(scn: &Scenario, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let grasp = scn.grasp()?;
    let block = &scn.limit_surface;
    let mc = block.monte_carlo.config(seed)?;
    if block.cross_section_points < 2 {
        return Err(CliError::Schema("cross_section_points must be at least 2".into()));
    }
    let surface = build_limit_surface(&grasp, &mc, Exec::default()).map_err(compute)?;
    out.write("surface.csv", surface_csv(&surface).as_bytes())?;

    #[derive(Serialize)]
    struct Meta<'a> {
        grasp: &'a boomclimb::grasp::GraspScenario,
        monte_carlo: &'a boomclimb::limit_surface::MonteCarloConfig,
        beta_nodes: &'a [f64],
        phi_nodes: &'a [f64],
        phi_span: f64,
        force_cap: f64,
        capped_fraction: f64,
        cross_sections: Vec<String>,
    }
    let forces = if block.internal_forces.is_empty() { vec![grasp.internal_force] } else { block.internal_forces.clone() };
    let phi = block.cross_section_phi_deg.to_radians();
    let stat = block.statistic.into();
    let mut names = Vec::new();
    for &f in &forces {
        // same seed, so every F_int sees the same random draws
        let g = boomclimb::grasp::GraspScenario { internal_force: f, ..grasp.clone() };
        g.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        let s = if f == grasp.internal_force { surface.clone() } else { build_limit_surface(&g, &mc, Exec::default()).map_err(compute)? };
        let mut csv = String::from("beta,force\n");
        for (b, v) in s.cross_section(phi, block.cross_section_points, stat) {
            writeln!(csv, "{b},{v}").unwrap();
        }
        let name = format!("cross_section_fint_{f}.csv");
        out.write(&name, csv.as_bytes())?;
        names.push(name);
    }
    out.json(
        "surface.json",
        &Meta {
            grasp: &grasp,
            monte_carlo: &mc,
            beta_nodes: &surface.beta_nodes,
            phi_nodes: &surface.phi_nodes,
            phi_span: surface.phi_span,
            force_cap: surface.force_cap,
            capped_fraction: surface.capped_fraction(),
            cross_sections: names,
        },
    )
}

#[derive(Serialize)]
struct PhaseRecord {
    index: usize,
    transition: usize,
    kind: &'static str,
    boom: Option<usize>,
    file: String,
    converged: bool,
    diagnostics: boomclimb::scp::ScpDiagnostics,
}

fn trajectory_csv(t: &Trajectory, gripper: Option<usize>) -> String {
    let m = t.controls.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("step,t,px,py,pz,qw,qx,qy,qz,lx,ly,lz,hx,hy,hz");
    if gripper.is_some() {
        out.push_str(",gx,gy,gz");
    }
    for i in 0..m {
        write!(out, ",u{i}").unwrap();
    }
    out.push('\n');
    for (k, s) in t.states.iter().enumerate() {
        let q = s.orientation.quaternion();
        let (p, l, h) = (s.position, s.momentum, s.angular_momentum);
        write!(out, "{k},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", k as f64 * t.dt, p.x, p.y, p.z, q.w, q.i, q.j, q.k, l.x, l.y, l.z, h.x, h.y, h.z).unwrap();
        if let Some(b) = gripper {
            let g = t.booms.get(k).and_then(|bs| bs.get(b)).map(BoomState::target).unwrap_or_default();
            write!(out, ",{},{},{}", g.x, g.y, g.z).unwrap();
        }
        for i in 0..m {
            match t.controls.get(k).and_then(|u| u.get(i)) {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn plan(scn: &Scenario, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let block = scn.plan_block()?;
    let model = scn.robot()?;
    let (env, corridor_start) = scn.environment(&model)?;
    let start = match (&block.start, corridor_start) {
        (Some(s), _) => s.stance(),
        (None, Some(s)) => s,
        (None, None) => return Err(CliError::Schema("plan.start is required outside a corridor".into())),
    };
    let planner = boomclimb::footstep::PlannerConfig { seed, ..block.planner.clone() };
    let seed_cfg = boomclimb::scp::SeedConfig { seed, ..block.seed_path.clone() };
    block.scp.validate().map_err(|e| CliError::Schema(e.into()))?;

    let mut graph = build_stance_graph(&model, &env, &start, planner, Exec::default()).map_err(plan_error)?;
    let result = plan_footsteps(&mut graph, &block.goal.region());

    #[derive(Serialize)]
    struct Diagnostics {
        vertices: usize,
        expanded: usize,
        cost: Option<f64>,
        phases: Vec<PhaseRecord>,
    }
    let mut diag = Diagnostics { vertices: graph.n_vertices(), expanded: graph.n_expanded(), cost: None, phases: Vec::new() };
    let plan = match result {
        Ok(p) => p,
        Err(e) => {
            out.json("diagnostics.json", &diag)?;
            return Err(plan_error(e));
        }
    };
    diag.cost = Some(plan.cost);
    out.json("plan.json", &plan)?;

    let mut not_converged = 0;
    if block.trajectories {
        let ctx = &graph.ctx;
        let geo = &env.collision;
        for (i, t) in plan.transitions.iter().enumerate() {
            let (a, b) = (&plan.stances[i], &plan.stances[i + 1]);
            let mut phases: Vec<(&'static str, Option<usize>, Result<Trajectory, ScpError>)> = Vec::new();

            let booms: Vec<BoomState> = ctx.boom_states(&a.assignment, None).to_vec();
            let solve = seed_trajectory(&model, &a.pose, &t.pose, &booms, geo, &seed_cfg)
                .and_then(|w| scp_solve_body(&model, &rest_to_rest(&a.pose, &t.pose, w), &booms, &block.scp));
            phases.push(("body", None, solve));

            if let (Some(boom), Some(from), Some(to)) = (t.boom, t.from, t.to) {
                let booms: Vec<BoomState> = ctx.boom_states(&a.assignment, Some(boom)).to_vec();
                let (p0, p1) = (ctx.position(from), ctx.position(to));
                let solve = seed_gripper_path(&model, &t.pose, &booms, boom, &p0, &p1, geo, &seed_cfg)
                    .and_then(|path| scp_solve_end_effector(&model, &t.pose, &booms, boom, &path, &block.scp));
                phases.push(("gripper", Some(boom), solve));
            }

            let booms: Vec<BoomState> = ctx.boom_states(&b.assignment, None).to_vec();
            let solve = seed_trajectory(&model, &t.pose, &b.pose, &booms, geo, &seed_cfg)
                .and_then(|w| scp_solve_body(&model, &rest_to_rest(&t.pose, &b.pose, w), &booms, &block.scp));
            phases.push(("body", None, solve));

            for (kind, boom, solve) in phases {
                let traj = match solve {
                    Ok(tr) => tr,
                    Err(ScpError::NotConverged(tr)) => {
                        not_converged += 1;
                        *tr
                    }
                    Err(e) => {
                        out.json("diagnostics.json", &diag)?;
                        return Err(compute(format!("transition {i} {kind} phase: {e}")));
                    }
                };
                let index = diag.phases.len();
                let file = format!("phase_{index:03}_{kind}.csv");
                out.write(&file, trajectory_csv(&traj, boom).as_bytes())?;
                diag.phases.push(PhaseRecord {
                    index,
                    transition: i,
                    kind,
                    boom,
                    file,
                    converged: traj.diagnostics.converged,
                    diagnostics: traj.diagnostics,
                });
            }
        }
    }
    out.json("diagnostics.json", &diag)?;
    if not_converged > 0 {
        return Err(CliError::NotConverged(format!("{not_converged} trajectory phase(s) did not converge; best iterates written")));
    }
    Ok(())
}

/// A body that starts and ends at rest cannot change pose in a single
/// step, so moves seeded with fewer than three waypoints get midpoints.
fn rest_to_rest(start: &BodyPose, goal: &BodyPose, w: Vec<BodyPose>) -> Vec<BodyPose> {
    if start == goal || w.len() >= 3 {
        return w;
    }
    let mid = |a: &BodyPose, b: &BodyPose| BodyPose::new(a.position.lerp(&b.position, 0.5), a.orientation.slerp(&b.orientation, 0.5));
    match w.as_slice() {
        [a, b] => vec![*a, mid(a, b), *b],
        _ => vec![*start, mid(start, goal), *goal],
    }
}

fn plan_error(e: PlanError) -> CliError {
    match e {
        PlanError::NoPath => CliError::NoPath(e.to_string()),
        PlanError::UnknownAnchor(_) | PlanError::RepeatedAnchor(_) | PlanError::StartInfeasible(_) => CliError::Schema(e.to_string()),
        _ => compute(e),
    }
}

pub fn perceive(scn: &Scenario, cloud: &Path, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let p = &scn.perception;
    let format = scn.cloud_format(cloud)?;
    let raw = load_point_cloud(cloud, format).map_err(|e| CliError::Schema(format!("{}: {e}", cloud.display())))?;
    if !(p.voxel >= 0.0) {
        return Err(CliError::Schema("perception.voxel must be non-negative".into()));
    }
    let [lo, hi] = p.alpha_window_deg.map(f64::to_radians);
    let axis = Point3::from(p.gripper_axis);
    if !(axis.norm() > 0.0) || !(lo <= hi) {
        return Err(CliError::Schema("gripper_axis must be nonzero and the α window ordered".into()));
    }
    let axis = axis.normalize();
    let loaded = raw.len();
    let pc = if p.voxel > 0.0 { voxel_downsample(&raw, p.voxel) } else { raw };
    let msac = boomclimb::perception::MsacConfig { seed, ..p.msac.clone() };
    let candidates = msac_sphere_fit(&pc, &msac, Exec::default()).map_err(compute)?;
    let normals = estimate_normals(&pc, p.knn, &Point3::from(p.viewpoint), Exec::default()).map_err(compute)?;
    let amap = alpha_map(&normals, &axis, lo, hi);

    let mut csv = String::from("index,x,y,z,nx,ny,nz,alpha_deg,graspable\n");
    for (i, (q, n)) in pc.points.iter().zip(&normals).enumerate() {
        let g = u8::from(amap.graspable[i]);
        writeln!(csv, "{i},{},{},{},{},{},{},{},{g}", q.x, q.y, q.z, n.x, n.y, n.z, amap.alpha[i].to_degrees()).unwrap();
    }

    let grasp = scn.grasp()?;
    let mc = p.monte_carlo.config(seed)?;
    let mut sites = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let alpha = alpha_from_ratio(grasp.link_length / c.radius);
        let surface = if lo <= alpha && alpha <= hi && alpha < std::f64::consts::FRAC_PI_2 {
            let g = boomclimb::grasp::GraspScenario { rock_radius: c.radius, ..grasp.clone() }.with_symmetric_alpha(alpha);
            Some(build_limit_surface(&g, &mc, Exec::default()).map_err(compute)?)
        } else {
            None
        };
        sites.push(GraspSite { id: c.id, alpha: [alpha; 3], surface });
    }
    let dir = PullDirection::new(p.pull_beta_deg.to_radians(), p.pull_phi_deg.to_radians());
    let ranked = rank_grasp_sites(&sites, &dir, p.statistic.into(), lo, hi);

    #[derive(Serialize)]
    struct Candidate<'a> {
        #[serde(flatten)]
        sphere: &'a boomclimb::perception::SphereCandidate,
        contact_angle_deg: f64,
    }
    #[derive(Serialize)]
    struct Candidates<'a> {
        points_loaded: usize,
        points_after_voxel: usize,
        graspable_fraction: f64,
        candidates: Vec<Candidate<'a>>,
    }
    out.json(
        "candidates.json",
        &Candidates {
            points_loaded: loaded,
            points_after_voxel: pc.len(),
            graspable_fraction: amap.graspable_fraction(),
            candidates: candidates
                .iter()
                .zip(&sites)
                .map(|(c, s)| Candidate { sphere: c, contact_angle_deg: s.alpha[0].to_degrees() })
                .collect(),
        },
    )?;
    out.write("alpha_map.csv", csv.as_bytes())?;
    out.json("ranked_sites.json", &ranked)
}

pub fn reach(scn: &Scenario, mesh_path: &Path, out: &mut Outputs) -> Result<(), CliError> {
    let r = &scn.reach;
    r.finger.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    let mesh = TriMesh::load(mesh_path).map_err(|e| CliError::Schema(format!("{}: {e}", mesh_path.display())))?;
    let lateral = Point3::from(r.lateral);

    let base = if mesh.is_empty() {
        // nothing to reach; any frame gives all-zero areas
        BasePose::new(Point3::zeros(), &-Point3::z(), &Point3::x())
    } else {
        let target = match r.target {
            Some(t) => Point3::from(t),
            None => highest_vertex(&mesh),
        };
        BasePose::above_patch(&mesh, &target, r.patch_radius, r.finger.standoff, &lateral)
            .ok_or_else(|| compute("no mesh faces within patch_radius of the target"))?
    };
    let results = compare_cases(&mesh, &base, &r.finger, Exec::default()).map_err(compute)?;
    out.write("reach_areas.csv", cases_csv(&results).as_bytes())?;
    for res in &results {
        let mut ids = String::new();
        for f in &res.faces {
            writeln!(ids, "{f}").unwrap();
        }
        out.write(&format!("reach_faces_case{}.txt", res.case.id()), ids.as_bytes())?;
    }
    Ok(())
}

/// Largest z, lowest index on ties.
fn highest_vertex(mesh: &TriMesh) -> Point3 {
    mesh.vertices.iter().fold(mesh.vertices[0], |best, v| if v.z > best.z { *v } else { best })
}
