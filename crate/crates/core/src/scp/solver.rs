use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};

use super::dynamics::{joints_at, nonlinear_step, BodyState, ErrorState, ERR_DIM};
use super::{Phase, ScpConfig, ScpDiagnostics, ScpError, Trajectory};
use crate::geometry::Point3;
use crate::model::{inverse_joint_solve, static_equilibrium_controls, BodyPose, BoomState, RobotModel};

/// Everything fixed across SCP iterations.
struct Problem<'a> {
    model: &'a RobotModel,
    dt: f64,
    /// Boom targets at each timestep.
    booms: Vec<Vec<BoomState>>,
    start: BodyState,
    goal: BodyState,
    n_controls: usize,
    tau_lo: Vec<f64>,
    tau_hi: Vec<f64>,
}

#[derive(Clone)]
struct Iterate {
    states: Vec<BodyState>,
    controls: Vec<DVector<f64>>,
}

struct Linearization {
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    residual: Vec<ErrorState>,
    /// Per interior timestep: (value, lower, upper, gradient w.r.t. δX, δθ).
    joint_rows: Vec<Vec<(f64, f64, f64, [f64; 6])>>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a RobotModel, dt: f64, booms: Vec<Vec<BoomState>>, start: BodyState, goal: BodyState) -> Self {
        let nb = booms[0].iter().filter(|b| b.is_attached()).count();
        let lim = &model.actuation_limits;
        let fl = lim.prismatic_force_range.0.max(model.min_tension);
        let mut tau_lo = Vec::with_capacity(3 * nb);
        let mut tau_hi = Vec::with_capacity(3 * nb);
        for _ in 0..nb {
            tau_lo.extend([fl, lim.moment_range.0, lim.moment_range.0]);
            tau_hi.extend([lim.prismatic_force_range.1, lim.moment_range.1, lim.moment_range.1]);
        }
        Self { model, dt, booms, start, goal, n_controls: 3 * nb, tau_lo, tau_hi }
    }

    fn n(&self) -> usize {
        self.booms.len()
    }

    fn step(&self, k: usize, s: &BodyState, tau: &DVector<f64>) -> Result<BodyState, ScpError> {
        nonlinear_step(self.model, s, tau, self.dt, &self.booms[k]).map_err(ScpError::Kinematic)
    }

    fn defects(&self, it: &Iterate) -> Result<Vec<ErrorState>, ScpError> {
        (0..self.n() - 1)
            .map(|k| Ok(it.states[k + 1].local(&self.step(k, &it.states[k], &it.controls[k])?)))
            .collect()
    }

    /// Effort plus an exact penalty on the nonlinear dynamics defects.
    fn merit(&self, it: &Iterate, penalty: f64) -> Result<f64, ScpError> {
        let effort: f64 = it.controls.iter().map(|t| t.norm()).sum();
        let defect: f64 = self.defects(it)?.iter().map(|d| d.lp_norm(1)).sum();
        Ok(effort + penalty * defect)
    }

    fn joints_ok(&self, it: &Iterate) -> bool {
        it.states.iter().zip(&self.booms).all(|(s, booms)| {
            let pose = s.pose();
            booms
                .iter()
                .enumerate()
                .all(|(i, b)| inverse_joint_solve(self.model, &pose, &b.target(), i).is_ok())
        })
    }

    fn linearize(&self, it: &Iterate) -> Result<Linearization, ScpError> {
        let n = self.n();
        let m = self.n_controls;
        let mut lin = Linearization { a: vec![], b: vec![], residual: vec![], joint_rows: vec![] };
        for k in 0..n - 1 {
            let (s, tau, next) = (&it.states[k], &it.controls[k], &it.states[k + 1]);
            let f = |st: &BodyState, t: &DVector<f64>| -> Result<ErrorState, ScpError> { Ok(next.local(&self.step(k, st, t)?)) };
            lin.residual.push(f(s, tau)?);
            let scale = state_scale(s);
            let mut a = DMatrix::zeros(ERR_DIM, ERR_DIM);
            for j in 0..ERR_DIM {
                let h = 1e-6 * scale[j];
                let mut d = ErrorState::zeros();
                d[j] = h;
                let col = (f(&s.retract(&d), tau)? - f(&s.retract(&-d), tau)?) / (2.0 * h);
                a.set_column(j, &col);
            }
            let mut b = DMatrix::zeros(ERR_DIM, m);
            for j in 0..m {
                let h = 1e-6 * (1.0 + tau[j].abs());
                let (mut tp, mut tm) = (tau.clone(), tau.clone());
                tp[j] += h;
                tm[j] -= h;
                b.set_column(j, &((f(s, &tp)? - f(s, &tm)?) / (2.0 * h)));
            }
            lin.a.push(a);
            lin.b.push(b);
        }
        let lim = &self.model.joint_limits;
        let full_pan = lim.pan_range.0 <= -std::f64::consts::PI && lim.pan_range.1 >= std::f64::consts::PI;
        for k in 1..n.saturating_sub(1) {
            let s = &it.states[k];
            let base = joints_at(self.model, s, &self.booms[k]);
            let mut grads = vec![[[0.0; 6]; 3]; base.len()];
            for j in 0..6 {
                let h = 1e-6;
                let mut d = ErrorState::zeros();
                d[j] = h;
                let jp = joints_at(self.model, &s.retract(&d), &self.booms[k]);
                let jm = joints_at(self.model, &s.retract(&-d), &self.booms[k]);
                for i in 0..base.len() {
                    grads[i][0][j] = (jp[i].extension - jm[i].extension) / (2.0 * h);
                    grads[i][1][j] = (jp[i].tilt - jm[i].tilt) / (2.0 * h);
                    grads[i][2][j] = (jp[i].pan - jm[i].pan) / (2.0 * h);
                }
            }
            let mut rows = Vec::new();
            for (i, jt) in base.iter().enumerate() {
                rows.push((jt.extension, lim.extension_range.0, lim.extension_range.1, grads[i][0]));
                rows.push((jt.tilt, lim.tilt_range.0, lim.tilt_range.1, grads[i][1]));
                if !full_pan {
                    rows.push((jt.pan, lim.pan_range.0, lim.pan_range.1, grads[i][2]));
                }
            }
            lin.joint_rows.push(rows);
        }
        Ok(lin)
    }

    /// Solves the convex subproblem about `it`; returns the error-state
    /// corrections and the new controls.
    fn subproblem(
        &self,
        it: &Iterate,
        lin: &Linearization,
        lam_s: f64,
        lam_t: f64,
    ) -> Result<(Vec<ErrorState>, Vec<DVector<f64>>), String> {
        let n = self.n();
        let m = self.n_controls;
        let nk = n - 1;
        let ds = |k: usize, j: usize| k * ERR_DIM + j;
        let tau = |k: usize, j: usize| ERR_DIM * n + k * m + j;
        let t_off = ERR_DIM * n + m * nk;
        let u_off = t_off + nk;
        let v_off = u_off + n;
        let n_var = v_off + nk;

        let mut rows = Triplets::default();
        let mut b = Vec::new();
        let mut cones = Vec::new();

        // linearized dynamics: δs_{k+1} − A δs_k − B τ_k = r_k − B τ̄_k
        let mut n_zero = 0;
        for k in 0..nk {
            let rhs = &lin.residual[k] - &lin.b[k] * &it.controls[k];
            for r in 0..ERR_DIM {
                let row = b.len();
                rows.push(row, ds(k + 1, r), 1.0);
                for c in 0..ERR_DIM {
                    rows.push(row, ds(k, c), -lin.a[k][(r, c)]);
                }
                for c in 0..m {
                    rows.push(row, tau(k, c), -lin.b[k][(r, c)]);
                }
                b.push(rhs[r]);
            }
            n_zero += ERR_DIM;
        }
        for (k, target) in [(0, &self.start), (n - 1, &self.goal)] {
            let d = it.states[k].local(target);
            for r in 0..ERR_DIM {
                rows.push(b.len(), ds(k, r), 1.0);
                b.push(d[r]);
            }
            n_zero += ERR_DIM;
        }
        cones.push(SupportedConeT::ZeroConeT(n_zero));

        let mut n_pos = 0;
        for k in 0..nk {
            for j in 0..m {
                rows.push(b.len(), tau(k, j), 1.0);
                b.push(self.tau_hi[j]);
                rows.push(b.len(), tau(k, j), -1.0);
                b.push(-self.tau_lo[j]);
                n_pos += 2;
            }
        }
        for (kk, jr) in lin.joint_rows.iter().enumerate() {
            let k = kk + 1;
            for &(val, lo, hi, g) in jr {
                // val + g·δ ≤ hi and ≥ lo
                for (sign, bound) in [(1.0, hi - val), (-1.0, val - lo)] {
                    let row = b.len();
                    for (j, gj) in g.iter().enumerate() {
                        if *gj != 0.0 {
                            rows.push(row, ds(k, j), sign * gj);
                        }
                    }
                    b.push(bound);
                    n_pos += 1;
                }
            }
        }
        cones.push(SupportedConeT::NonnegativeConeT(n_pos));

        // ‖τ_k‖ ≤ t_k and ‖τ_k − τ̄_k‖ ≤ v_k
        for k in 0..nk {
            for (epi, shift) in [(t_off + k, None), (v_off + k, Some(&it.controls[k]))] {
                rows.push(b.len(), epi, -1.0);
                b.push(0.0);
                for j in 0..m {
                    rows.push(b.len(), tau(k, j), -1.0);
                    b.push(shift.map_or(0.0, |s| -s[j]));
                }
                cones.push(SupportedConeT::SecondOrderConeT(m + 1));
            }
        }
        // ‖δs_k‖ ≤ u_k
        for k in 0..n {
            rows.push(b.len(), u_off + k, -1.0);
            b.push(0.0);
            for j in 0..ERR_DIM {
                rows.push(b.len(), ds(k, j), -1.0);
                b.push(0.0);
            }
            cones.push(SupportedConeT::SecondOrderConeT(ERR_DIM + 1));
        }

        let mut q = vec![0.0; n_var];
        for k in 0..nk {
            q[t_off + k] = 1.0;
            q[v_off + k] = lam_t;
        }
        for k in 0..n {
            q[u_off + k] = lam_s;
        }
        let a = CscMatrix::new_from_triplets(b.len(), n_var, rows.i, rows.j, rows.v);
        let p = CscMatrix::new_from_triplets(n_var, n_var, vec![], vec![], vec![]);
        let settings = DefaultSettings { verbose: false, ..Default::default() };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| e.to_string())?;
        solver.solve();
        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {}
            other => return Err(format!("{other:?}")),
        }
        let x = &solver.solution.x;
        let dss = (0..n).map(|k| ErrorState::from_fn(|j, _| x[ds(k, j)])).collect();
        let taus = (0..nk).map(|k| DVector::from_fn(m, |j, _| x[tau(k, j)])).collect();
        Ok((dss, taus))
    }

    fn clamp(&self, t: &mut DVector<f64>) {
        for j in 0..t.len() {
            t[j] = t[j].clamp(self.tau_lo[j], self.tau_hi[j]);
        }
    }

    fn solve(&self, seed: Iterate, cfg: &ScpConfig, phase: Phase) -> Result<Trajectory, ScpError> {
        let mut cur = seed;
        let mut merit = self.merit(&cur, cfg.defect_penalty)?;
        let mut diag = ScpDiagnostics { objective_trace: vec![merit], ..Default::default() };
        let (mut lam_s, mut lam_t) = (cfg.lambda_state, cfg.lambda_control);
        for w in 0..cfg.max_iterations {
            diag.iterations = w + 1;
            let lin = self.linearize(&cur)?;
            let (ds, taus) = self
                .subproblem(&cur, &lin, lam_s, lam_t)
                .map_err(|status| ScpError::SubproblemInfeasible { iteration: w, status })?;
            let mut cand = Iterate {
                states: cur.states.iter().zip(&ds).map(|(s, d)| s.retract(d)).collect(),
                controls: taus,
            };
            cand.controls.iter_mut().for_each(|t| self.clamp(t));
            let step = ds
                .iter()
                .map(|d| d.amax())
                .chain(cand.controls.iter().zip(&cur.controls).map(|(a, b)| (a - b).amax()))
                .fold(0.0, f64::max);
            diag.final_step = step;
            let cand_merit = self.merit(&cand, cfg.defect_penalty)?;
            if self.joints_ok(&cand) && cand_merit <= merit + 1e-9 * (1.0 + merit.abs()) {
                cur = cand;
                merit = cand_merit;
                diag.objective_trace.push(merit);
                diag.accepted += 1;
                lam_s = (lam_s * 0.5).max(cfg.lambda_min);
                lam_t = (lam_t * 0.5).max(cfg.lambda_min);
                if step <= cfg.tolerance {
                    diag.converged = true;
                    break;
                }
            } else {
                diag.rejected += 1;
                lam_s *= 2.0;
                lam_t *= 2.0;
                if step <= cfg.tolerance {
                    // the trust region has collapsed onto the current iterate
                    diag.converged = true;
                    break;
                }
            }
        }
        let n = self.n();
        cur.states[0] = self.start;
        cur.states[n - 1] = self.goal;
        for d in self.defects(&cur)? {
            diag.max_position_defect = diag.max_position_defect.max(d.fixed_rows::<3>(0).norm());
            diag.max_rotation_defect = diag.max_rotation_defect.max(d.fixed_rows::<3>(3).norm());
            diag.max_momentum_defect = diag.max_momentum_defect.max(d.fixed_rows::<6>(6).amax());
        }
        let converged = diag.converged && diag.max_position_defect <= cfg.defect_tolerance && diag.max_rotation_defect <= cfg.defect_tolerance;
        diag.converged = converged;
        let traj = Trajectory {
            dt: self.dt,
            phase,
            states: cur.states,
            controls: cur.controls.iter().map(|t| t.iter().copied().collect()).collect(),
            booms: self.booms.clone(),
            diagnostics: diag,
        };
        if converged {
            Ok(traj)
        } else {
            Err(ScpError::NotConverged(Box::new(traj)))
        }
    }
}

fn state_scale(s: &BodyState) -> [f64; ERR_DIM] {
    let mut out = [1.0; ERR_DIM];
    for j in 0..3 {
        out[j] = 1.0 + s.position[j].abs();
        out[6 + j] = 1.0 + s.momentum[j].abs();
        out[9 + j] = 1.0 + s.angular_momentum[j].abs();
    }
    out
}

#[derive(Default)]
struct Triplets {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, i: usize, j: usize, v: f64) {
        self.i.push(i);
        self.j.push(j);
        self.v.push(v);
    }
}

fn seed_iterate(model: &RobotModel, states: Vec<BodyState>, booms: &[Vec<BoomState>]) -> Result<Iterate, ScpError> {
    let controls = (0..states.len() - 1)
        .map(|k| {
            let pose = states[k].pose();
            let joints = joints_at(model, &states[k], &booms[k]);
            static_equilibrium_controls(model, &pose, &booms[k], &joints)
                .map(|c| c.tau)
                .map_err(|v| ScpError::SeedControls { step: k, reason: v.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Iterate { states, controls })
}

/// Optimizes a body move through the static `waypoints` (one per timestep)
/// with every boom in `booms` fixed. A single waypoint is held for one step.
pub fn scp_solve_body(
    model: &RobotModel,
    waypoints: &[BodyPose],
    booms: &[BoomState],
    cfg: &ScpConfig,
) -> Result<Trajectory, ScpError> {
    let mut poses = waypoints.to_vec();
    if poses.len() == 1 {
        poses.push(poses[0]);
    }
    let states: Vec<BodyState> = poses.iter().map(BodyState::at_rest).collect();
    let per_step = vec![booms.to_vec(); states.len()];
    let problem = Problem::new(model, cfg.dt, per_step.clone(), states[0], *states.last().expect("non-empty"));
    let seed = seed_iterate(model, states, &per_step)?;
    problem.solve(seed, cfg, Phase::Body)
}

/// Optimizes the body while detached boom `boom` carries its gripper along
/// `path` (one point per timestep) and the body starts and ends at rest at
/// `pose`. `booms[boom]` is replaced by the held gripper.
pub fn scp_solve_end_effector(
    model: &RobotModel,
    pose: &BodyPose,
    booms: &[BoomState],
    boom: usize,
    path: &[Point3],
    cfg: &ScpConfig,
) -> Result<Trajectory, ScpError> {
    let mut path = path.to_vec();
    if path.len() == 1 {
        path.push(path[0]);
    }
    let per_step: Vec<Vec<BoomState>> = path
        .iter()
        .map(|p| {
            let mut b = booms.to_vec();
            b[boom] = BoomState::Held(*p);
            b
        })
        .collect();
    let rest = BodyState::at_rest(pose);
    let states = vec![rest; path.len()];
    let problem = Problem::new(model, cfg.dt, per_step.clone(), rest, rest);
    let seed = seed_iterate(model, states, &per_step)?;
    problem.solve(seed, cfg, Phase::EndEffector { boom, path })
}

/// Largest position change between consecutive states; handy for checking
/// that a trajectory moves smoothly.
pub fn max_position_jump(traj: &Trajectory) -> f64 {
    traj.states
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .fold(0.0, f64::max)
}
