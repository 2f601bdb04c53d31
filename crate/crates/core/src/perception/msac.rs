use nalgebra::{DMatrix, DVector, Matrix3};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{PerceptionError, PointCloud};
use crate::exec::Exec;
use crate::geometry::Point3;
use crate::rng::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsacConfig {
    /// Inlier distance and loss truncation, m.
    #[serde(default = "default_d_max")]
    pub d_max: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Accepted radius window, m.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// Extraction stops once the best model has fewer inliers than this.
    #[serde(default = "default_min_inliers")]
    pub min_inliers: usize,
    /// Upper bound on extraction rounds (kept plus discarded models).
    #[serde(default = "default_max_models")]
    pub max_models: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_d_max() -> f64 {
    0.005
}
fn default_iterations() -> usize {
    2000
}
fn default_r_min() -> f64 {
    0.075
}
fn default_r_max() -> f64 {
    0.2
}
fn default_min_inliers() -> usize {
    50
}
fn default_max_models() -> usize {
    4
}

impl Default for MsacConfig {
    fn default() -> Self {
        Self {
            d_max: default_d_max(),
            iterations: default_iterations(),
            r_min: default_r_min(),
            r_max: default_r_max(),
            min_inliers: default_min_inliers(),
            max_models: default_max_models(),
            seed: 0,
        }
    }
}

impl MsacConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = PerceptionError::InvalidConfig;
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(bad("d_max must be positive"));
        }
        if self.iterations == 0 || self.max_models == 0 {
            return Err(bad("iterations and max_models must be at least 1"));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max.is_finite()) {
            return Err(bad("radius window must satisfy 0 < r_min <= r_max"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCandidate {
    pub id: usize,
    pub center: Point3,
    pub radius: f64,
    pub inliers: usize,
    /// Inliers over the size of the whole input cloud.
    pub inlier_fraction: f64,
    /// Truncated loss of the winning hypothesis over the points it was
    /// scored against.
    pub score: f64,
    #[serde(skip)]
    pub inlier_indices: Vec<usize>,
}

/// Sphere through four points, or `None` when they are (numerically)
/// coplanar. Subtracting the first point's equation from the others leaves
/// the linear system `2 (pᵢ − p₀)·c = |pᵢ|² − |p₀|²`, solved by Cramer's rule.
pub fn fit_sphere_exact(p: [&Point3; 4]) -> Option<(Point3, f64)> {
    let o = p[0];
    let d = [p[1] - o, p[2] - o, p[3] - o];
    let m = Matrix3::from_rows(&[d[0].transpose(), d[1].transpose(), d[2].transpose()]) * 2.0;
    let det = m.determinant();
    let scale = 8.0 * d[0].norm() * d[1].norm() * d[2].norm();
    if !(det.abs() > 1e-9 * scale) {
        return None;
    }
    // right-hand side relative to p₀, which keeps the numbers small
    let rhs = Point3::new(d[0].norm_squared(), d[1].norm_squared(), d[2].norm_squared());
    let col = |k: usize| {
        let mut mk = m;
        mk.set_column(k, &rhs);
        mk.determinant() / det
    };
    let c = Point3::new(col(0), col(1), col(2));
    Some((o + c, c.norm()))
}

/// Algebraic least-squares sphere, `|p|² = 2 p·c + (r² − |c|²)`, solved on
/// centred coordinates.
pub fn fit_sphere_least_squares(points: &[Point3]) -> Option<(Point3, f64)> {
    if points.len() < 4 {
        return None;
    }
    let mean = points.iter().sum::<Point3>() / points.len() as f64;
    let a = DMatrix::from_fn(points.len(), 4, |i, j| if j == 3 { 1.0 } else { 2.0 * (points[i][j] - mean[j]) });
    let b = DVector::from_fn(points.len(), |i, _| (points[i] - mean).norm_squared());
    let x = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let c = Point3::new(x[0], x[1], x[2]);
    let r2 = x[3] + c.norm_squared();
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some((mean + c, r2.sqrt()))
}

fn residual(p: &Point3, c: &Point3, r: f64) -> f64 {
    ((p - c).norm() - r).abs()
}

/// Sequential MSAC extraction. Each round draws `iterations` four-point
/// hypotheses from the points not yet explained, keeps the one with the
/// lowest truncated loss `Σ min(d², d_max²)` (ties to the earlier
/// hypothesis), refits it on its inliers and removes them. Models whose
/// radius falls outside `[r_min, r_max]` are discarded but still consume
/// their inliers.
pub fn msac_sphere_fit(pc: &PointCloud, cfg: &MsacConfig, exec: Exec) -> Result<Vec<SphereCandidate>, PerceptionError> {
    cfg.validate()?;
    if pc.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    if pc.len() < 4 {
        return Err(PerceptionError::TooFewPoints(pc.len()));
    }
    let pts = &pc.points;
    let d2max = cfg.d_max * cfg.d_max;
    let mut remaining: Vec<usize> = (0..pts.len()).collect();
    let mut out = Vec::new();
    for round in 0..cfg.max_models {
        if remaining.len() < 4.max(cfg.min_inliers) {
            break;
        }
        let rem = &remaining;
        let hyps = exec.map_range(cfg.iterations, |it| {
            let mut rng = rng_for(cfg.seed, &[round as u64, it as u64]);
            let s = sample(&mut rng, rem.len(), 4);
            let (c, r) = fit_sphere_exact([&pts[rem[s.index(0)]], &pts[rem[s.index(1)]], &pts[rem[s.index(2)]], &pts[rem[s.index(3)]]])?;
            let score: f64 = rem.iter().map(|&i| residual(&pts[i], &c, r).powi(2).min(d2max)).sum();
            Some((score, c, r))
        });
        let best = hyps
            .into_iter()
            .flatten()
            .reduce(|a, b| if b.0 < a.0 { b } else { a });
        let Some((score, mut c, mut r)) = best else {
            if round == 0 {
                return Err(PerceptionError::Degenerate);
            }
            break;
        };
        let inliers_of = |c: &Point3, r: f64| -> Vec<usize> {
            remaining.iter().copied().filter(|&i| residual(&pts[i], c, r) <= cfg.d_max).collect()
        };
        let mut inl = inliers_of(&c, r);
        for _ in 0..3 {
            let sub: Vec<Point3> = inl.iter().map(|&i| pts[i]).collect();
            let Some((c2, r2)) = fit_sphere_least_squares(&sub) else { break };
            let inl2 = inliers_of(&c2, r2);
            if inl2.len() < inl.len() {
                break;
            }
            let same = inl2 == inl;
            (c, r, inl) = (c2, r2, inl2);
            if same {
                break;
            }
        }
        if inl.len() < cfg.min_inliers.max(4) {
            break;
        }
        if (cfg.r_min..=cfg.r_max).contains(&r) {
            out.push(SphereCandidate {
                id: out.len(),
                center: c,
                radius: r,
                inliers: inl.len(),
                inlier_fraction: inl.len() as f64 / pts.len() as f64,
                score,
                inlier_indices: inl.clone(),
            });
        }
        // both lists are ascending
        let mut k = 0;
        remaining.retain(|i| {
            while k < inl.len() && inl[k] < *i {
                k += 1;
            }
            !(k < inl.len() && inl[k] == *i)
        });
    }
    Ok(out)
}
