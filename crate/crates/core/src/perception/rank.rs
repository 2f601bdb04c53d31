use serde::{Deserialize, Serialize};

use crate::grasp::PullDirection;
use crate::limit_surface::{LimitSurface, Statistic};

/// A candidate with its per-finger contact angles and evaluated limit
/// surface. Sites outside the α window need no surface (the grasp model
/// only covers α < 90°).
#[derive(Clone, Debug, PartialEq)]
pub struct GraspSite {
    pub id: usize,
    pub alpha: [f64; 3],
    pub surface: Option<LimitSurface>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedSite {
    pub id: usize,
    /// Queried pull force, N; zero when excluded.
    pub score: f64,
    /// Some finger angle lies outside the α window.
    pub excluded: bool,
}

/// Orders sites by the `stat` pull force at `dir`, strongest first, ties
/// by id. Sites with any finger outside `[alpha_min, alpha_max]`, or
/// without a surface, score zero.
pub fn rank_grasp_sites(sites: &[GraspSite], dir: &PullDirection, stat: Statistic, alpha_min: f64, alpha_max: f64) -> Vec<RankedSite> {
    let mut out: Vec<RankedSite> = sites
        .iter()
        .map(|s| {
            let excluded = s.alpha.iter().any(|&a| !(alpha_min <= a && a <= alpha_max)) || s.surface.is_none();
            let score = match &s.surface {
                Some(ls) if !excluded => ls.query(dir, stat),
                _ => 0.0,
            };
            RankedSite { id: s.id, score, excluded }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    out
}
