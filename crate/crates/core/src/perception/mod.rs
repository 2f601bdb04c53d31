//! Two-stage grasp-site identification from depth point clouds.
//!
//! The far stage down-samples the cloud and fits spheres with MSAC, keeping
//! rocks whose radius suits the finger link length. The near stage estimates
//! surface normals, maps the contact angle α against the gripper axis, and
//! ranks candidates by their limit-surface strength in the preferred pull
//! direction.

mod alpha;
mod io;
mod msac;
mod normals;
mod rank;

pub use alpha::{alpha_map, AlphaMap};
pub use io::{load_point_cloud, save_point_cloud, CloudFormat};
pub use msac::{fit_sphere_exact, fit_sphere_least_squares, msac_sphere_fit, MsacConfig, SphereCandidate};
pub use normals::estimate_normals;
pub use rank::{rank_grasp_sites, GraspSite, RankedSite};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need at least four points, got {0}")]
    TooFewPoints(usize),
    #[error("every sampled point set was coplanar")]
    Degenerate,
    #[error("neighbourhood of point {index} is collinear")]
    DegenerateNeighborhood { index: usize },
    #[error("invalid perception parameter: {0}")]
    InvalidConfig(&'static str),
}

/// Replaces the points in each occupied cell of an origin-anchored grid of
/// pitch `v` by their mean. Output is ordered by cell index; colours are
/// averaged per channel and rounded.
pub fn voxel_downsample(pc: &PointCloud, v: f64) -> PointCloud {
    assert!(v > 0.0 && v.is_finite(), "voxel size must be positive");
    let mut cells: BTreeMap<[i64; 3], (Point3, [u64; 3], usize)> = BTreeMap::new();
    for (i, p) in pc.points.iter().enumerate() {
        let key = [(p.x / v).floor() as i64, (p.y / v).floor() as i64, (p.z / v).floor() as i64];
        let e = cells.entry(key).or_insert((Point3::zeros(), [0; 3], 0));
        e.0 += p;
        if let Some(c) = &pc.colors {
            for k in 0..3 {
                e.1[k] += c[i][k] as u64;
            }
        }
        e.2 += 1;
    }
    let points = cells.values().map(|(s, _, n)| s / *n as f64).collect();
    let colors = pc.colors.as_ref().map(|_| {
        cells
            .values()
            .map(|(_, c, n)| {
                let n = *n as u64;
                [((c[0] + n / 2) / n) as u8, ((c[1] + n / 2) / n) as u8, ((c[2] + n / 2) / n) as u8]
            })
            .collect()
    });
    PointCloud { points, colors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_voxel_gives_the_centroid() {
        let pc = PointCloud::new(vec![Point3::new(0.001, 0.001, 0.001), Point3::new(0.003, 0.002, 0.004)]);
        let d = voxel_downsample(&pc, 0.005);
        assert_eq!(d.len(), 1);
        assert!((d.points[0] - Point3::new(0.002, 0.0015, 0.0025)).norm() < 1e-15);
    }

    #[test]
    fn colours_are_averaged() {
        let pc = PointCloud {
            points: vec![Point3::zeros(), Point3::new(0.001, 0.0, 0.0)],
            colors: Some(vec![[10, 0, 255], [21, 1, 255]]),
        };
        let d = voxel_downsample(&pc, 0.01);
        assert_eq!(d.colors.unwrap(), vec![[16, 1, 255]]);
    }

    proptest! {
        #[test]
        fn downsampling_is_idempotent_in_count(
            pts in proptest::collection::vec((-0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64), 1..300),
            v in 0.002..0.05f64,
        ) {
            let pc = PointCloud::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect());
            let once = voxel_downsample(&pc, v);
            let twice = voxel_downsample(&once, v);
            prop_assert_eq!(once.len(), twice.len());
            prop_assert!(once.len() <= pc.len());
        }
    }
}
