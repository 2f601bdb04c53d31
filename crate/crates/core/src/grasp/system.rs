use nalgebra::{SMatrix, SVector, LU};
use serde::{Deserialize, Serialize};

use super::{GraspError, GraspScenario, PullDirection};

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Vector9 = SVector<f64, 9>;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// `(sin, cos)` of finger `k`'s azimuth; fingers sit 120° apart starting on
/// +x. Exact constants so the symmetric case reproduces the printed matrix.
fn finger_trig(k: usize) -> (f64, f64) {
    match k {
        0 => (0.0, 1.0),
        1 => (SQRT3_2, -0.5),
        _ => (-SQRT3_2, -0.5),
    }
}

/// Contact forces `(F_n, F_t, F_c)` per finger, acting on the gripper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactForces {
    pub fingers: [[f64; 3]; 3],
}

impl ContactForces {
    pub fn from_vector(v: &Vector9) -> Self {
        let mut fingers = [[0.0; 3]; 3];
        for (k, f) in fingers.iter_mut().enumerate() {
            *f = [v[3 * k], v[3 * k + 1], v[3 * k + 2]];
        }
        Self { fingers }
    }

    pub fn to_vector(&self) -> Vector9 {
        Vector9::from_iterator(self.fingers.iter().flatten().copied())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { fingers: self.fingers.map(|f| f.map(|x| x * s)) }
    }
}

/// Height of the wrist above the contact plane divided by the rock radius,
/// `1 − cos α + x/r`, using the mean `cos α` over fingers.
pub fn pull_moment_arm(scn: &GraspScenario) -> f64 {
    let mean_c = scn.alpha.iter().map(|a| a.cos()).sum::<f64>() / 3.0;
    1.0 - mean_c + scn.wrist_offset / scn.rock_radius
}

fn matrix(scn: &GraspScenario) -> Matrix9 {
    let (kn, kt, kc) = (scn.stiffness_normal, scn.stiffness_tangential, scn.stiffness_circumferential);
    let s: [f64; 3] = scn.alpha.map(f64::sin);
    let c: [f64; 3] = scn.alpha.map(f64::cos);
    // torsion row: lever r·sin α_j, normalised so equal angles give exact ones
    let smax = s.iter().copied().fold(0.0f64, f64::max);
    let twist: [f64; 3] = if scn.is_symmetric() || smax == 0.0 { [1.0; 3] } else { s.map(|v| v / smax) };
    let mut a = Matrix9::zeros();
    for k in 0..3 {
        let (sin_t, cos_t) = finger_trig(k);
        let col = 3 * k;
        // force balance
        a[(0, col)] = s[k] * cos_t;
        a[(0, col + 1)] = c[k] * cos_t;
        a[(0, col + 2)] = -sin_t;
        a[(1, col)] = s[k] * sin_t;
        a[(1, col + 1)] = c[k] * sin_t;
        a[(1, col + 2)] = cos_t;
        a[(2, col)] = c[k];
        a[(2, col + 1)] = -s[k];
        // moment balance about the contact centroid, divided by r
        a[(3, col)] = s[k] * c[k] * sin_t;
        a[(3, col + 1)] = -s[k] * s[k] * sin_t;
        a[(4, col)] = -s[k] * c[k] * cos_t;
        a[(4, col + 1)] = s[k] * s[k] * cos_t;
        a[(5, col + 2)] = twist[k];
        // rigid-rock compatibility of the compliant fingertips
        a[(6, col)] = s[k] / kn;
        a[(6, col + 1)] = c[k] / kt;
    }
    a[(7, 0)] = s[0] / kn;
    a[(7, 1)] = c[0] / kt;
    a[(7, 5)] = 1.0 / (3f64.sqrt() * kc);
    a[(7, 8)] = -1.0 / (3f64.sqrt() * kc);
    a[(8, 0)] = s[0] / (2.0 * kn);
    a[(8, 1)] = c[0] / (2.0 * kt);
    a[(8, 2)] = SQRT3_2 / kc;
    a[(8, 6)] = s[2] / kn;
    a[(8, 7)] = c[2] / kt;
    a
}

fn rhs(arm: f64, dir: &PullDirection, f_pull: f64) -> Vector9 {
    let (sb, cb) = dir.beta.sin_cos();
    let (sp, cp) = dir.phi.sin_cos();
    let mut b = Vector9::zeros();
    b[0] = -f_pull * sb * cp;
    b[1] = -f_pull * sb * sp;
    b[2] = -f_pull * cb;
    b[3] = f_pull * sb * sp * arm;
    b[4] = -f_pull * sb * cp * arm;
    b
}

/// Builds `A` and `B` of the compliant grasp system `A·F = B` for a pull of
/// magnitude `f_pull` in direction `dir`.
pub fn assemble_grasp_system(scn: &GraspScenario, dir: &PullDirection, f_pull: f64) -> (Matrix9, Vector9) {
    (matrix(scn), rhs(pull_moment_arm(scn), dir, f_pull))
}

/// `A` factored once for repeated solves with different pulls.
#[derive(Clone, Debug)]
pub struct GraspSystem {
    a: Matrix9,
    lu: LU<f64, nalgebra::Const<9>, nalgebra::Const<9>>,
    arm: f64,
}

impl GraspSystem {
    pub fn new(scn: &GraspScenario) -> Result<Self, GraspError> {
        let a = matrix(scn);
        let sv = a.singular_values();
        let rcond = sv.min() / sv.max();
        if !(rcond > 1e-14) {
            return Err(GraspError::SingularGrasp { rcond });
        }
        Ok(Self { a, lu: a.lu(), arm: pull_moment_arm(scn) })
    }

    pub fn matrix(&self) -> &Matrix9 {
        &self.a
    }

    pub fn solve(&self, dir: &PullDirection, f_pull: f64) -> ContactForces {
        let b = rhs(self.arm, dir, f_pull);
        let mut x = self.lu.solve(&b).expect("checked nonsingular");
        // one step of iterative refinement keeps the residual at rounding level
        let r = b - self.a * x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        ContactForces::from_vector(&x)
    }
}

pub fn solve_contact_forces(scn: &GraspScenario, dir: &PullDirection, f_pull: f64) -> Result<ContactForces, GraspError> {
    Ok(GraspSystem::new(scn)?.solve(dir, f_pull))
}
