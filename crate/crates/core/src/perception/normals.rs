use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, SymmetricEigen};

use super::{PerceptionError, PointCloud};
use crate::exec::Exec;
use crate::geometry::Point3;

/// Unit normals from the `knn_count` nearest neighbours of every point (the
/// point itself included): the eigenvector of the smallest eigenvalue of the
/// neighbourhood covariance, flipped to face `viewpoint` (the sensor origin
/// for clouds in the sensor frame).
pub fn estimate_normals(pc: &PointCloud, knn_count: usize, viewpoint: &Point3, exec: Exec) -> Result<Vec<Point3>, PerceptionError> {
    if knn_count < 3 {
        return Err(PerceptionError::InvalidConfig("knn_count must be at least 3"));
    }
    if pc.len() < knn_count {
        return Err(PerceptionError::InvalidConfig("cloud has fewer points than knn_count"));
    }
    let coords: Vec<[f64; 3]> = pc.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
    let normals = exec.map_range(pc.len(), |i| {
        let nn = tree.nearest_n::<SquaredEuclidean>(&coords[i], knn_count);
        let mean = nn.iter().map(|n| pc.points[n.item as usize]).sum::<Point3>() / nn.len() as f64;
        let cov = nn.iter().fold(Matrix3::zeros(), |acc, n| {
            let d = pc.points[n.item as usize] - mean;
            acc + d * d.transpose()
        });
        let eig = SymmetricEigen::new(cov);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
        if !(top > 0.0) || mid <= 1e-12 * top {
            return Err(PerceptionError::DegenerateNeighborhood { index: i });
        }
        let n: Point3 = eig.eigenvectors.column(order[0]).normalize();
        Ok(if n.dot(&(viewpoint - pc.points[i])) < 0.0 { -n } else { n })
    });
    normals.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_seen_from_above() {
        let pts = (0..100).map(|k| Point3::new((k % 10) as f64 * 0.01, (k / 10) as f64 * 0.01, 0.0)).collect();
        let n = estimate_normals(&PointCloud::new(pts), 8, &Point3::new(0.0, 0.0, 1.0), Exec::Sequential).unwrap();
        assert!(n.iter().all(|n| (n - Point3::z()).norm() < 1e-12));
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = (0..20).map(|k| Point3::new(k as f64, 2.0 * k as f64, 0.0)).collect();
        let r = estimate_normals(&PointCloud::new(pts), 5, &Point3::zeros(), Exec::Sequential);
        assert_eq!(r, Err(PerceptionError::DegenerateNeighborhood { index: 0 }));
    }
}
