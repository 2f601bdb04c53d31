//! Monte Carlo estimation of microspine pull-force limit surfaces.
//!
//! For each pull direction on a `(β, φ)` grid and each sampled set of
//! asperity angles, the pull force is ramped until one finger fails: all of
//! its spines have slipped or exceeded their strength, or the finger has lost
//! contact. Failed spines stay failed and their load moves to the survivors
//! of the same finger. The asperity angles are not resampled along the way.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::grasp::{spine_no_slip, ContactForces, GraspError, GraspScenario, GraspSystem, PullDirection};
use crate::rng::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_grid: usize,
    pub n_mc: usize,
    /// Ramp increment, N.
    #[serde(default = "default_step")]
    pub force_step: f64,
    /// Width of the final failure bracket after bisection, N.
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_cap")]
    pub force_cap: f64,
    pub seed: u64,
}

fn default_step() -> f64 {
    0.25
}
fn default_resolution() -> f64 {
    0.01
}
fn default_cap() -> f64 {
    200.0
}

impl MonteCarloConfig {
    pub fn new(n_grid: usize, n_mc: usize, seed: u64) -> Self {
        Self {
            n_grid,
            n_mc,
            force_step: default_step(),
            resolution: default_resolution(),
            force_cap: default_cap(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.n_grid < 2 {
            return Err("n_grid must be at least 2");
        }
        if self.n_mc < 1 {
            return Err("n_mc must be at least 1");
        }
        if !(self.force_step > 0.0 && self.resolution > 0.0 && self.force_cap > 0.0) {
            return Err("force step, resolution and cap must be positive");
        }
        Ok(())
    }
}

/// Result of one ramp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullSample {
    pub force: f64,
    /// The ramp reached the cap without a failure; `force` is the cap.
    pub capped: bool,
}

/// Spine-level state of a grasp during a ramp.
#[derive(Clone)]
struct GraspState {
    active: [Vec<bool>; 3],
}

impl GraspState {
    fn new(scn: &GraspScenario) -> Self {
        Self { active: scn.n_spines.map(|n| vec![true; n]) }
    }
}

/// Applies load level `f` (scaling the unit-pull contact forces), failing
/// spines until every finger is stable. Returns true if some finger failed.
fn grasp_fails(scn: &GraspScenario, unit: &ContactForces, psi: &[&[f64]; 3], f: f64, state: &mut GraspState) -> bool {
    for j in 0..3 {
        let [fn1, ft1, fc1] = unit.fingers[j];
        let (fn_, ft, fc) = (fn1 * f, ft1 * f, fc1 * f);
        let alpha = scn.alpha[j];
        // the fingertip stays on the rock only while the squeeze outweighs the pull-off
        if fn_ + scn.internal_force * alpha.sin() <= 0.0 {
            return true;
        }
        let active = &mut state.active[j];
        loop {
            let n_act = active.iter().filter(|&&a| a).count();
            if n_act == 0 {
                return true;
            }
            let share = 1.0 / n_act as f64;
            let (sn, st, sc, sp) = (fn_ * share, ft * share, fc * share, scn.internal_force * share);
            let mut changed = false;
            for (k, a) in active.iter_mut().enumerate() {
                if !*a {
                    continue;
                }
                let holds = st.hypot(sc) <= scn.spine_strength
                    && matches!(spine_no_slip(st, sn, sc, sp, psi[j][k], alpha, scn.mu), Ok(true));
                if !holds {
                    *a = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    false
}

fn split_psi<'a>(scn: &GraspScenario, psi: &'a [f64]) -> [&'a [f64]; 3] {
    let (a, rest) = psi.split_at(scn.n_spines[0]);
    let (b, c) = rest.split_at(scn.n_spines[1]);
    [a, b, &c[..scn.n_spines[2]]]
}

/// Ramps the pull in `direction` until the grasp fails. `psi` holds the
/// asperity angle of every spine, finger by finger.
pub fn sample_max_pull(
    scn: &GraspScenario,
    system: &GraspSystem,
    direction: &PullDirection,
    psi: &[f64],
    cfg: &MonteCarloConfig,
) -> PullSample {
    assert_eq!(psi.len(), scn.total_spines(), "one asperity angle per spine");
    let unit = system.solve(direction, 1.0);
    let psi = split_psi(scn, psi);
    let mut state = GraspState::new(scn);
    if grasp_fails(scn, &unit, &psi, 0.0, &mut state) {
        return PullSample { force: 0.0, capped: false };
    }
    let mut lo = 0.0;
    let (hi, mut lo_state) = loop {
        let f = (lo + cfg.force_step).min(cfg.force_cap);
        let mut trial = state.clone();
        if grasp_fails(scn, &unit, &psi, f, &mut trial) {
            break (f, state);
        }
        state = trial;
        lo = f;
        if f >= cfg.force_cap {
            return PullSample { force: cfg.force_cap, capped: true };
        }
    };
    let mut hi = hi;
    while hi - lo > cfg.resolution {
        let mid = 0.5 * (lo + hi);
        let mut trial = lo_state.clone();
        if grasp_fails(scn, &unit, &psi, mid, &mut trial) {
            hi = mid;
        } else {
            lo = mid;
            lo_state = trial;
        }
    }
    PullSample { force: hi, capped: false }
}

/// Asperity angles for one Monte Carlo sample. Each finger has its own
/// stream keyed by `(cell, sample, finger)`, so changing grasp force,
/// friction or spine counts reuses the same draws.
pub fn psi_draw(scn: &GraspScenario, seed: u64, cell: usize, sample: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(scn.total_spines());
    for (j, &n) in scn.n_spines.iter().enumerate() {
        let mut rng = rng_for(seed, &[cell as u64, sample as u64, j as u64]);
        out.extend((0..n).map(|_| rng.gen_range(0.0..FRAC_PI_2)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub beta: f64,
    pub phi: f64,
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p50: f64,
    pub n_capped: usize,
    pub n_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    Mean,
    P5,
    P50,
}

impl CellStats {
    pub fn get(&self, s: Statistic) -> f64 {
        match s {
            Statistic::Mean => self.mean,
            Statistic::P5 => self.p5,
            Statistic::P50 => self.p50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSurface {
    /// Inclusive nodes over `[0, π/2]`.
    pub beta_nodes: Vec<f64>,
    /// Periodic nodes `j·span/n` over `[0, span)`.
    pub phi_nodes: Vec<f64>,
    /// `2π/3` when the grasp has three-fold symmetry, else `2π`.
    pub phi_span: f64,
    /// Row-major: `cells[i * phi_nodes.len() + j]` is `(β_i, φ_j)`.
    pub cells: Vec<CellStats>,
    pub force_cap: f64,
}

/// Linear-interpolated percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn cell_stats(beta: f64, phi: f64, samples: &[PullSample]) -> CellStats {
    let n = samples.len() as f64;
    let mut forces: Vec<f64> = samples.iter().map(|s| s.force).collect();
    let mean = forces.iter().sum::<f64>() / n;
    let var = forces.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    forces.sort_by(f64::total_cmp);
    CellStats {
        beta,
        phi,
        mean,
        std: var.sqrt(),
        p5: percentile(&forces, 5.0),
        p50: percentile(&forces, 50.0),
        n_capped: samples.iter().filter(|s| s.capped).count(),
        n_samples: samples.len(),
    }
}

pub fn build_limit_surface(scn: &GraspScenario, cfg: &MonteCarloConfig, exec: Exec) -> Result<LimitSurface, GraspError> {
    scn.validate()?;
    cfg.validate().map_err(GraspError::InvalidScenario)?;
    let system = GraspSystem::new(scn)?;
    let n = cfg.n_grid;
    let beta_nodes: Vec<f64> = (0..n).map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64).collect();
    let phi_span = if scn.is_symmetric() { 2.0 * PI / 3.0 } else { 2.0 * PI };
    let phi_nodes: Vec<f64> = (0..n).map(|j| phi_span * j as f64 / n as f64).collect();
    let n_cells = n * n;
    let samples = exec.map_range(n_cells * cfg.n_mc, |w| {
        let (cell, sample) = (w / cfg.n_mc, w % cfg.n_mc);
        let dir = PullDirection::new(beta_nodes[cell / n], phi_nodes[cell % n]);
        let psi = psi_draw(scn, cfg.seed, cell, sample);
        sample_max_pull(scn, &system, &dir, &psi, cfg)
    });
    let cells = (0..n_cells)
        .map(|c| cell_stats(beta_nodes[c / n], phi_nodes[c % n], &samples[c * cfg.n_mc..(c + 1) * cfg.n_mc]))
        .collect();
    Ok(LimitSurface {
        beta_nodes,
        phi_nodes,
        phi_span,
        cells,
        force_cap: cfg.force_cap,
    })
}

impl LimitSurface {
    pub fn cell(&self, i: usize, j: usize) -> &CellStats {
        &self.cells[i * self.phi_nodes.len() + j]
    }

    pub fn capped_fraction(&self) -> f64 {
        let capped: usize = self.cells.iter().map(|c| c.n_capped).sum();
        let total: usize = self.cells.iter().map(|c| c.n_samples).sum();
        capped as f64 / total.max(1) as f64
    }

    /// Bilinear interpolation of `stat` at `dir`. Negative `β` is read as
    /// the opposite azimuth; `φ` wraps with the surface's period.
    pub fn query(&self, dir: &PullDirection, stat: Statistic) -> f64 {
        let (mut beta, mut phi) = (dir.beta, dir.phi);
        if beta < 0.0 {
            beta = -beta;
            phi += PI;
        }
        let beta = beta.clamp(0.0, FRAC_PI_2);
        let nb = self.beta_nodes.len();
        let np = self.phi_nodes.len();
        let bf = snap(beta / (FRAC_PI_2 / (nb - 1) as f64));
        let pf = snap(phi.rem_euclid(self.phi_span) / (self.phi_span / np as f64));
        let i0 = (bf.floor() as usize).min(nb - 1);
        let i1 = (i0 + 1).min(nb - 1);
        let tb = (bf - i0 as f64).clamp(0.0, 1.0);
        let j0 = (pf.floor() as usize) % np;
        let j1 = (j0 + 1) % np;
        let tp = (pf - pf.floor()).clamp(0.0, 1.0);
        let v = |i: usize, j: usize| self.cell(i, j).get(stat);
        let lo = if tp == 0.0 { v(i0, j0) } else { (1.0 - tp) * v(i0, j0) + tp * v(i0, j1) };
        if tb == 0.0 {
            return lo;
        }
        let hi = if tp == 0.0 { v(i1, j0) } else { (1.0 - tp) * v(i1, j0) + tp * v(i1, j1) };
        (1.0 - tb) * lo + tb * hi
    }

    /// Polar slice through the plane containing the gripper axis at azimuth
    /// `phi`: `β` from −90° to 90° in `n` steps, negative `β` on the
    /// opposite half-plane. Returns `(β in degrees, force)` pairs.
    pub fn cross_section(&self, phi: f64, n: usize, stat: Statistic) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let beta = -FRAC_PI_2 + PI * k as f64 / (n - 1) as f64;
                (beta.to_degrees(), self.query(&PullDirection::new(beta, phi), stat))
            })
            .collect()
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}
