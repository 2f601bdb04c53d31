use serde::{Deserialize, Serialize};

use crate::geometry::Point3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMap {
    /// Angle between each normal and the gripper axis, rad.
    pub alpha: Vec<f64>,
    /// `alpha_min ≤ α ≤ alpha_max`.
    pub graspable: Vec<bool>,
    pub axis: Point3,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl AlphaMap {
    pub fn graspable_fraction(&self) -> f64 {
        if self.alpha.is_empty() {
            return 0.0;
        }
        self.graspable.iter().filter(|&&g| g).count() as f64 / self.alpha.len() as f64
    }
}

/// Contact-angle map of unit `normals` against the unit gripper `axis`.
pub fn alpha_map(normals: &[Point3], axis: &Point3, alpha_min: f64, alpha_max: f64) -> AlphaMap {
    assert!((axis.norm() - 1.0).abs() < 1e-9, "gripper axis must be a unit vector");
    let alpha: Vec<f64> = normals.iter().map(|n| n.dot(axis).clamp(-1.0, 1.0).acos()).collect();
    let graspable = alpha.iter().map(|&a| alpha_min <= a && a <= alpha_max).collect();
    AlphaMap { alpha, graspable, axis: *axis, alpha_min, alpha_max }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn facing_patch_is_not_graspable() {
        let m = alpha_map(&[Point3::z(); 4], &Point3::z(), 25f64.to_radians(), 85f64.to_radians());
        assert!(m.alpha.iter().all(|&a| a == 0.0));
        assert_eq!(m.graspable_fraction(), 0.0);
    }

    #[test]
    fn window_is_inclusive() {
        let (lo, hi) = (0.5, 1.0);
        let n: Vec<Point3> = [lo, hi, hi + 1e-9].iter().map(|&a: &f64| Point3::new(a.sin(), 0.0, a.cos())).collect();
        let m = alpha_map(&n, &Point3::z(), lo - 1e-12, hi + 1e-12);
        assert_eq!(m.graspable, vec![true, true, false]);
    }
}
