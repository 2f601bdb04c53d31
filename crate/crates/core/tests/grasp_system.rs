use boomclimb::grasp::{assemble_grasp_system, solve_contact_forces, ContactForces, GraspScenario, GraspSystem, PullDirection};
use nalgebra::{SMatrix, SVector, Vector3};
use proptest::prelude::*;

type M9 = SMatrix<f64, 9, 9>;
type V9 = SVector<f64, 9>;

/// The printed single-α matrix, typed in row by row.
fn printed_a(a: f64, kn: f64, kt: f64, kc: f64) -> M9 {
    let (s, c) = (a.sin(), a.cos());
    let h = 3f64.sqrt() / 2.0;
    let r3 = 3f64.sqrt();
    #[rustfmt::skip]
    let rows = [
        [s, c, 0.0, -0.5 * s, -0.5 * c, -h, -0.5 * s, -0.5 * c, h],
        [0.0, 0.0, 1.0, h * s, h * c, -0.5, -h * s, -h * c, -0.5],
        [c, -s, 0.0, c, -s, 0.0, c, -s, 0.0],
        [0.0, 0.0, 0.0, h * s * c, -h * s * s, 0.0, -h * s * c, h * s * s, 0.0],
        [-s * c, s * s, 0.0, 0.5 * s * c, -0.5 * s * s, 0.0, 0.5 * s * c, -0.5 * s * s, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        [s / kn, c / kt, 0.0, s / kn, c / kt, 0.0, s / kn, c / kt, 0.0],
        [s / kn, c / kt, 0.0, 0.0, 0.0, 1.0 / (r3 * kc), 0.0, 0.0, -1.0 / (r3 * kc)],
        [s / (2.0 * kn), c / (2.0 * kt), h / kc, 0.0, 0.0, 0.0, s / kn, c / kt, 0.0],
    ];
    M9::from_fn(|i, j| rows[i][j])
}

fn printed_b(a: f64, r: f64, m: f64, beta: f64, phi: f64, f: f64) -> V9 {
    let arm = 1.0 - a.cos() + m / r;
    let (sb, cb, sp, cp) = (beta.sin(), beta.cos(), phi.sin(), phi.cos());
    V9::from_column_slice(&[-f * sb * cp, -f * sb * sp, -f * cb, f * sb * sp * arm, -f * sb * cp * arm, 0.0, 0.0, 0.0, 0.0])
}

/// Rebuilds the gripper free body from scratch: contact points on the rock,
/// local contact frames, and the pull applied at the wrist. Returns the
/// force and moment residuals (N, N·m).
fn equilibrium_residual(scn: &GraspScenario, dir: &PullDirection, f_pull: f64, f: &ContactForces) -> (f64, f64) {
    let r = scn.rock_radius;
    let mean_c = scn.alpha.iter().map(|a| a.cos()).sum::<f64>() / 3.0;
    let wrist = Vector3::new(0.0, 0.0, r * (1.0 - mean_c) + scn.wrist_offset);
    let pull = f_pull * Vector3::new(dir.beta.sin() * dir.phi.cos(), dir.beta.sin() * dir.phi.sin(), dir.beta.cos());
    let mut force = pull;
    let mut moment = wrist.cross(&pull);
    for j in 0..3 {
        let th = (j as f64) * 120f64.to_radians();
        let (sa, ca) = scn.alpha[j].sin_cos();
        let p = r * sa * Vector3::new(th.cos(), th.sin(), 0.0);
        let n = Vector3::new(sa * th.cos(), sa * th.sin(), ca);
        let t = Vector3::new(ca * th.cos(), ca * th.sin(), -sa);
        let circ = Vector3::new(-th.sin(), th.cos(), 0.0);
        let [fn_, ft, fc] = f.fingers[j];
        let fj = fn_ * n + ft * t + fc * circ;
        force += fj;
        moment += p.cross(&fj);
    }
    (force.norm(), moment.norm())
}

/// Gaussian elimination with partial pivoting, written out by hand.
fn gauss_solve(a: &M9, b: &V9) -> (V9, f64) {
    let mut m = [[0.0; 10]; 9];
    for i in 0..9 {
        for j in 0..9 {
            m[i][j] = a[(i, j)];
        }
        m[i][9] = b[i];
    }
    let mut det = 1.0;
    for col in 0..9 {
        let piv = (col..9).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap()).unwrap();
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..9 {
            let f = m[row][col] / m[col][col];
            for k in col..10 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = V9::zeros();
    for i in (0..9).rev() {
        let s: f64 = (i + 1..9).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][9] - s) / m[i][i];
    }
    (x, det)
}

#[test]
fn symmetric_row_six_is_exact() {
    let scn = GraspScenario::field_test().with_symmetric_alpha(0.7);
    let (a, _) = assemble_grasp_system(&scn, &PullDirection::new(0.3, 0.2), 1.0);
    let row: Vec<f64> = a.row(5).iter().copied().collect();
    assert_eq!(row, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn flat_contact_zeroes_moment_entries() {
    let scn = GraspScenario::field_test().with_symmetric_alpha(0.0);
    let (a, _) = assemble_grasp_system(&scn, &PullDirection::new(0.3, 0.2), 1.0);
    for i in 3..5 {
        for j in 0..9 {
            assert_eq!(a[(i, j)], 0.0);
        }
    }
}

#[test]
fn field_parameters_give_invertible_system() {
    let scn = GraspScenario::field_test();
    let (a, b) = assemble_grasp_system(&scn, &PullDirection::new(0.0, 0.0), 10.0);
    let (x, det) = gauss_solve(&a, &b);
    assert!(det.is_finite() && det.abs() > 0.0);
    assert!((det - a.determinant()).abs() <= 1e-9 * det.abs());
    let f = solve_contact_forces(&scn, &PullDirection::new(0.0, 0.0), 10.0).unwrap();
    assert!((f.to_vector() - x).amax() < 1e-9);
}

#[test]
fn zero_pull_zero_forces() {
    let f = solve_contact_forces(&GraspScenario::field_test(), &PullDirection::new(0.8, 1.0), 0.0).unwrap();
    assert_eq!(f.to_vector(), V9::zeros());
}

#[test]
fn axial_pull_loads_fingers_equally() {
    let scn = GraspScenario::field_test().with_symmetric_alpha(0.6);
    let f = solve_contact_forces(&scn, &PullDirection::new(0.0, 0.0), 10.0).unwrap();
    for j in 1..3 {
        assert!((f.fingers[j][0] - f.fingers[0][0]).abs() < 1e-12);
        assert!((f.fingers[j][1] - f.fingers[0][1]).abs() < 1e-12);
    }
    for j in 0..3 {
        assert!(f.fingers[j][2].abs() < 1e-12);
    }
}

#[test]
fn singular_when_all_contacts_coincide() {
    let scn = GraspScenario::field_test().with_symmetric_alpha(0.0);
    assert!(GraspSystem::new(&scn).is_err());
}

proptest! {
    #[test]
    fn reduces_to_printed_matrix(alpha in 0.0..1.5f64, beta in 0.0..1.57f64, phi in 0.0..6.28f64, f in 0.0..50.0f64) {
        let scn = GraspScenario::field_test().with_symmetric_alpha(alpha);
        let (a, b) = assemble_grasp_system(&scn, &PullDirection::new(beta, phi), f);
        let want = printed_a(alpha, scn.stiffness_normal, scn.stiffness_tangential, scn.stiffness_circumferential);
        prop_assert!((a - want).amax() <= 1e-12);
        prop_assert!((b - printed_b(alpha, scn.rock_radius, scn.wrist_offset, beta, phi, f)).amax() <= 1e-12 * (1.0 + f));
    }

    #[test]
    fn solutions_balance_the_pull(beta in 0.0..1.5708f64, phi in 0.0..6.2832f64, f in 0.0..100.0f64) {
        let scn = GraspScenario::field_test();
        let dir = PullDirection::new(beta, phi);
        let sol = solve_contact_forces(&scn, &dir, f).unwrap();
        let (a, b) = assemble_grasp_system(&scn, &dir, f);
        prop_assert!((a * sol.to_vector() - b).norm() <= 1e-9);
        let (fr, mr) = equilibrium_residual(&scn, &dir, f, &sol);
        prop_assert!(fr <= 1e-9 && mr <= 1e-9, "{} {}", fr, mr);
    }

    #[test]
    fn cyclic_symmetry(alpha in 0.05..1.5f64, beta in 0.0..1.5708f64, phi in 0.0..2.1f64) {
        let scn = GraspScenario::field_test().with_symmetric_alpha(alpha);
        let a = solve_contact_forces(&scn, &PullDirection::new(beta, phi), 10.0).unwrap();
        let b = solve_contact_forces(&scn, &PullDirection::new(beta, phi + 2.0 * std::f64::consts::FRAC_PI_3), 10.0).unwrap();
        for j in 0..3 {
            for c in 0..3 {
                prop_assert!((b.fingers[(j + 1) % 3][c] - a.fingers[j][c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_in_pull(beta in 0.0..1.5708f64, phi in 0.0..6.2832f64) {
        let scn = GraspScenario::field_test();
        let dir = PullDirection::new(beta, phi);
        let one = solve_contact_forces(&scn, &dir, 1.0).unwrap().scaled(10.0);
        let ten = solve_contact_forces(&scn, &dir, 10.0).unwrap();
        prop_assert!((one.to_vector() - ten.to_vector()).amax() < 1e-9);
    }
}
