//! Tension-preserving allocation of boom efforts for a desired body wrench.
//!
//! The controls `τ` realise the wrench `W = G τ`. Because the robot is
//! redundantly actuated, any kernel vector of `G` can be added to a
//! particular solution; a linear program picks the combination that keeps
//! every boom in tension and spends the least effort.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError};
use crate::model::ActuationLimits;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { force, moment }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        )
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.force + o.force, self.moment + o.moment)
    }
}

/// Stacked `[F_prismatic, M_pan, M_tilt]` per attached boom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    /// Boom index of each stacked triple.
    pub booms: Vec<usize>,
    pub tau: DVector<f64>,
    /// Coordinates of `τ − G⁺W` in the kernel basis of `G`.
    pub nullspace_coefficients: DVector<f64>,
}

impl ControlVector {
    pub fn prismatic(&self, k: usize) -> f64 {
        self.tau[3 * k]
    }

    pub fn min_tension(&self) -> f64 {
        (0..self.booms.len()).map(|k| self.prismatic(k)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AllocationError {
    /// No tension-consistent allocation exists. `unmet_rows` lists the wrench
    /// components (0–2 force, 3–5 moment) that cannot be matched, with the
    /// smallest achievable violation of each.
    #[error("no tension-consistent allocation (unmet wrench rows {unmet_rows:?})")]
    Infeasible { unmet_rows: Vec<(usize, f64)> },
    #[error("allocation LP failed: {0}")]
    Solver(LpError),
}

/// Orthonormal basis of `{τ : G τ = 0}` as columns.
pub fn nullspace_basis(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let rows = g.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), g.shape()).copy_from(g);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE) * rows as f64;
    let kernel: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= tol).collect();
    DMatrix::from_fn(n, kernel.len(), |i, k| vt[(kernel[k], i)])
}

/// Effort-minimising allocation with every prismatic force at least
/// `min_tension`. Effort is `Σ|F| + Σ(|M_pan| + |M_tilt|) / moment_length`.
/// Among equal-effort allocations the lexicographically smallest `τ` wins.
pub fn allocate_wrench(
    g: &DMatrix<f64>,
    w: &Wrench,
    limits: &ActuationLimits,
    min_tension: f64,
    moment_length: f64,
) -> Result<ControlVector, AllocationError> {
    let n = g.ncols();
    assert_eq!(n % 3, 0, "grasp map must have three columns per boom");
    let nb = n / 3;
    let target = w.to_vector();
    let (fmin, fmax) = limits.prismatic_force_range;
    let (mmin, mmax) = limits.moment_range;
    let fl = fmin.max(min_tension);
    if fl > fmax {
        return Err(AllocationError::Infeasible { unmet_rows: vec![] });
    }

    // LP variables per boom: F, M_pan⁺, M_pan⁻, M_tilt⁺, M_tilt⁻
    let nv = 5 * nb;
    let mut a = DMatrix::zeros(6, nv);
    let mut c = DVector::zeros(nv);
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    let wm = 1.0 / moment_length;
    for k in 0..nb {
        let v = 5 * k;
        a.column_mut(v).copy_from(&g.column(3 * k));
        for (s, src) in [(1, 1), (3, 2)] {
            a.column_mut(v + s).copy_from(&g.column(3 * k + src));
            a.column_mut(v + s + 1).copy_from(&(-g.column(3 * k + src)));
        }
        c[v] = 1.0;
        lower[v] = fl;
        upper[v] = fmax;
        for s in 1..5 {
            c[v + s] = wm;
        }
        upper[v + 1] = mmax.max(0.0);
        upper[v + 2] = (-mmin).max(0.0);
        upper[v + 3] = mmax.max(0.0);
        upper[v + 4] = (-mmin).max(0.0);
        // moment ranges that exclude zero shift the split variables
        if mmin > 0.0 {
            lower[v + 1] = mmin;
            lower[v + 3] = mmin;
        }
        if mmax < 0.0 {
            lower[v + 2] = -mmax;
            lower[v + 4] = -mmax;
        }
    }
    let tie_break: Vec<DVector<f64>> = (0..n)
        .map(|t| {
            let mut e = DVector::zeros(nv);
            let (k, ch) = (t / 3, t % 3);
            match ch {
                0 => e[5 * k] = 1.0,
                1 => {
                    e[5 * k + 1] = 1.0;
                    e[5 * k + 2] = -1.0;
                }
                _ => {
                    e[5 * k + 3] = 1.0;
                    e[5 * k + 4] = -1.0;
                }
            }
            e
        })
        .collect();
    let problem = LinearProgram {
        a,
        b: DVector::from_column_slice(target.as_slice()),
        c,
        lower,
        upper,
    };
    let sol = match lp::solve(&problem, &tie_break) {
        Ok(s) => s,
        Err(LpError::Infeasible { row_residuals, .. }) => {
            let unmet_rows = row_residuals
                .iter()
                .enumerate()
                .filter(|(_, r)| **r > 1e-9)
                .map(|(i, r)| (i, *r))
                .collect();
            return Err(AllocationError::Infeasible { unmet_rows });
        }
        Err(e) => return Err(AllocationError::Solver(e)),
    };
    let mut tau = DVector::zeros(n);
    for k in 0..nb {
        let v = 5 * k;
        tau[3 * k] = sol.x[v];
        tau[3 * k + 1] = (sol.x[v + 1] - sol.x[v + 2]).clamp(mmin, mmax);
        tau[3 * k + 2] = (sol.x[v + 3] - sol.x[v + 4]).clamp(mmin, mmax);
    }
    let basis = nullspace_basis(g);
    let particular = g
        .clone()
        .pseudo_inverse(1e-12)
        .map(|p| p * DVector::from_column_slice(target.as_slice()))
        .unwrap_or_else(|_| DVector::zeros(n));
    let nullspace_coefficients = basis.transpose() * (&tau - particular);
    Ok(ControlVector {
        booms: (0..nb).collect(),
        tau,
        nullspace_coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_g(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Rank by counting singular values of `G Gᵀ` via its eigenvalues,
    /// independent of the SVD used for the basis.
    fn rank_oracle(g: &DMatrix<f64>) -> usize {
        let ggt = g * g.transpose();
        let ev = ggt.symmetric_eigenvalues();
        let top = ev.amax();
        ev.iter().filter(|&&e| e > 1e-10 * top).count()
    }

    #[test]
    fn kernel_dimensions() {
        let g = random_g(1, 6, 24);
        assert_eq!(nullspace_basis(&g).ncols(), 18);
        let g = random_g(2, 6, 6);
        assert_eq!(nullspace_basis(&g).ncols(), 0);
        let mut g = random_g(3, 6, 9);
        let r0 = g.row(0).into_owned();
        g.row_mut(5).copy_from(&(r0 * 2.0));
        assert_eq!(nullspace_basis(&g).ncols(), 9 - rank_oracle(&g));
    }

    #[test]
    fn collinear_pair_cannot_push_sideways() {
        // two booms pulling along ±x through the origin, no moment arms
        let mut g = DMatrix::zeros(6, 6);
        g[(0, 0)] = 1.0;
        g[(0, 3)] = -1.0;
        let w = Wrench::new(Vector3::new(0.0, 5.0, 0.0), Vector3::zeros());
        let r = allocate_wrench(&g, &w, &ActuationLimits::default(), 1.0, 0.8);
        match r {
            Err(AllocationError::Infeasible { unmet_rows }) => assert!(unmet_rows.iter().any(|(i, _)| *i == 1)),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn basis_is_orthonormal_kernel(seed in 0u64..10_000, cols in 1usize..30) {
            let g = random_g(seed, 6, cols);
            let n = nullspace_basis(&g);
            prop_assert_eq!(n.ncols(), cols - rank_oracle(&g));
            prop_assert!((&g * &n).amax() < 1e-10);
            if n.ncols() > 0 {
                let eye = n.transpose() * &n;
                prop_assert!((eye - DMatrix::identity(n.ncols(), n.ncols())).amax() < 1e-10);
            }
        }
    }
}
