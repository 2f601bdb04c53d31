//! Dense bounded-variable simplex for small equality-constrained LPs.
//!
//! Solves `min cᵀx  s.t.  A x = b,  l ≤ x ≤ u` with finite lower bounds.
//! Pivoting follows Bland's rule throughout, so runs are deterministic and
//! cannot cycle. Ties in the optimum can be broken by a sequence of secondary
//! objectives, each minimised over the optimal face of the previous ones.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LpError {
    /// `row_residuals[i]` is how far row `i` stays from being satisfied at
    /// the least-infeasible point found.
    #[error("infeasible: minimum total row violation {total:.3e}")]
    Infeasible { total: f64, row_residuals: Vec<f64> },
    #[error("unbounded objective")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("malformed problem: {0}")]
    Malformed(&'static str),
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

struct Simplex {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
}

impl Simplex {
    fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.a.nrows(), self.basis.len(), |i, k| self.a[(i, self.basis[k])])
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh_basic(&mut self, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) {
        let mut rhs = self.b.clone();
        for j in 0..self.a.ncols() {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                rhs.axpy(-self.x[j], &self.a.column(j), 1.0);
            }
        }
        let xb = lu.solve(&rhs).expect("basis kept nonsingular");
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }

    fn reduced_costs(&self, c: &DVector<f64>, basis_t: DMatrix<f64>) -> DVector<f64> {
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| c[j]));
        let y = basis_t.lu().solve(&cb).expect("basis kept nonsingular");
        let mut d = c - self.a.transpose() * y;
        for &j in &self.basis {
            d[j] = 0.0;
        }
        d
    }

    /// Runs primal simplex on cost `c` from the current (feasible) basis.
    fn optimize(&mut self, c: &DVector<f64>) -> Result<DVector<f64>, LpError> {
        let limit = 50 * (self.a.nrows() + self.a.ncols()) + 100;
        for _ in 0..limit {
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            if !lu.is_invertible() {
                return Err(LpError::Malformed("singular basis"));
            }
            self.refresh_basic(&lu);
            let d = self.reduced_costs(c, bm.transpose());
            let entering = (0..self.a.ncols()).find(|&j| {
                if self.is_basic[j] || self.upper[j] <= self.lower[j] {
                    return false;
                }
                let at_upper = self.x[j] >= self.upper[j];
                (!at_upper && d[j] < -COST_TOL) || (at_upper && d[j] > COST_TOL)
            });
            let Some(j) = entering else {
                return Ok(d);
            };
            let sigma = if self.x[j] >= self.upper[j] { -1.0 } else { 1.0 };
            let col = lu.solve(&self.a.column(j).into_owned()).expect("invertible");
            // (step, leaving basis slot, leaves at upper)
            let mut best: Option<(f64, usize, bool)> = None;
            for (k, &bj) in self.basis.iter().enumerate() {
                let rate = -sigma * col[k];
                let cand = if rate < -PIVOT_TOL {
                    Some((((self.x[bj] - self.lower[bj]) / -rate).max(0.0), false))
                } else if rate > PIVOT_TOL && self.upper[bj].is_finite() {
                    Some((((self.upper[bj] - self.x[bj]) / rate).max(0.0), true))
                } else {
                    None
                };
                if let Some((t, up)) = cand {
                    let better = match best {
                        None => true,
                        Some((bt, bk, _)) => t < bt || (t == bt && bj < self.basis[bk]),
                    };
                    if better {
                        best = Some((t, k, up));
                    }
                }
            }
            let flip = self.upper[j] - self.lower[j];
            match best {
                Some((t, k, up)) if t < flip => {
                    let leaving = self.basis[k];
                    self.x[j] += sigma * t;
                    self.x[leaving] = if up { self.upper[leaving] } else { self.lower[leaving] };
                    self.is_basic[leaving] = false;
                    self.is_basic[j] = true;
                    self.basis[k] = j;
                }
                _ if flip.is_finite() => {
                    self.x[j] = if sigma > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                _ => return Err(LpError::Unbounded),
            }
        }
        Err(LpError::IterationLimit)
    }

    /// Fixes every nonbasic variable with a nonzero reduced cost at its
    /// current value, restricting further optimisation to the optimal face.
    fn restrict_to_face(&mut self, d: &DVector<f64>) {
        for j in 0..self.a.ncols() {
            if !self.is_basic[j] && d[j].abs() > COST_TOL {
                self.lower[j] = self.x[j];
                self.upper[j] = self.x[j];
            }
        }
    }

    fn has_freedom(&self) -> bool {
        (0..self.a.ncols()).any(|j| !self.is_basic[j] && self.upper[j] > self.lower[j])
    }
}

/// Solves the LP, then minimises each `tie_break` objective in turn over the
/// optimal set of the objectives before it.
pub fn solve(lp: &LinearProgram, tie_break: &[DVector<f64>]) -> Result<LpSolution, LpError> {
    let (m, n) = lp.a.shape();
    if lp.b.len() != m || lp.c.len() != n || lp.lower.len() != n || lp.upper.len() != n {
        return Err(LpError::Malformed("dimension mismatch"));
    }
    if lp.lower.iter().any(|l| !l.is_finite()) {
        return Err(LpError::Malformed("lower bounds must be finite"));
    }
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return Err(LpError::Infeasible { total: f64::INFINITY, row_residuals: vec![] });
    }

    // phase 1: artificial per row, signed so it starts nonnegative
    let x0: DVector<f64> = DVector::from_column_slice(&lp.lower);
    let r = &lp.b - &lp.a * &x0;
    let mut a = DMatrix::zeros(m, n + m);
    a.view_mut((0, 0), (m, n)).copy_from(&lp.a);
    for i in 0..m {
        a[(i, n + i)] = if r[i] < 0.0 { -1.0 } else { 1.0 };
    }
    let mut x = DVector::zeros(n + m);
    x.rows_mut(0, n).copy_from(&x0);
    for i in 0..m {
        x[n + i] = r[i].abs();
    }
    let mut lower = lp.lower.clone();
    lower.extend(std::iter::repeat(0.0).take(m));
    let mut upper = lp.upper.clone();
    upper.extend(std::iter::repeat(f64::INFINITY).take(m));
    let mut is_basic = vec![false; n + m];
    is_basic[n..].iter_mut().for_each(|v| *v = true);
    let mut s = Simplex {
        a,
        b: lp.b.clone(),
        lower,
        upper,
        x,
        basis: (n..n + m).collect(),
        is_basic,
    };
    let mut c1 = DVector::zeros(n + m);
    c1.rows_mut(n, m).fill(1.0);
    s.optimize(&c1)?;
    let total: f64 = (n..n + m).map(|j| s.x[j]).sum();
    let scale = 1.0 + lp.b.amax() + lp.a.amax() * lp.upper.iter().chain(&lp.lower).filter(|v| v.is_finite()).fold(0.0f64, |acc, v| acc.max(v.abs()));
    if total > FEAS_TOL * scale {
        let row_residuals = (0..m).map(|i| s.x[n + i]).collect();
        return Err(LpError::Infeasible { total, row_residuals });
    }
    for j in n..n + m {
        s.upper[j] = 0.0;
        if !s.is_basic[j] {
            s.x[j] = 0.0;
        }
    }

    let extend = |v: &DVector<f64>| {
        let mut full = DVector::zeros(n + m);
        full.rows_mut(0, n).copy_from(v);
        full
    };
    let d = s.optimize(&extend(&lp.c))?;
    s.restrict_to_face(&d);
    for t in tie_break {
        if !s.has_freedom() {
            break;
        }
        if t.len() != n {
            return Err(LpError::Malformed("tie-break length"));
        }
        let d = s.optimize(&extend(t))?;
        s.restrict_to_face(&d);
    }
    let lu = s.basis_matrix().lu();
    s.refresh_basic(&lu);
    let mut xs = s.x.rows(0, n).into_owned();
    for j in 0..n {
        xs[j] = xs[j].clamp(lp.lower[j], lp.upper[j]);
    }
    let objective = lp.c.dot(&xs);
    Ok(LpSolution { x: xs, objective })
}
