//! Deterministic grasp physics for the three-finger microspine gripper: the
//! per-spine no-slip test, the 9×9 compliant grasp system, and the relation
//! between link-to-rock ratio and contact angle.

mod spine;
mod system;

pub use spine::{spine_no_slip, ContactLost};
pub use system::{assemble_grasp_system, solve_contact_forces, ContactForces, GraspSystem};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspScenario {
    /// Contact angle per finger, rad.
    pub alpha: [f64; 3],
    pub rock_radius: f64,
    /// Wrist standoff above the contact plane's rock apex, m.
    pub wrist_offset: f64,
    pub link_length: f64,
    pub mu: f64,
    pub stiffness_normal: f64,
    pub stiffness_tangential: f64,
    pub stiffness_circumferential: f64,
    /// Engaged spines per finger.
    pub n_spines: [usize; 3],
    /// Grasp force per finger, shared among that finger's engaged spines.
    pub internal_force: f64,
    /// Load at which a single spine is taken to fail.
    pub spine_strength: f64,
}

impl GraspScenario {
    /// Lava-rock parameters estimated from the field test.
    pub fn field_test() -> Self {
        Self {
            alpha: [1.22, 0.52, 0.70],
            rock_radius: 0.116,
            wrist_offset: 0.045,
            link_length: 0.113,
            mu: 0.39,
            stiffness_normal: 15.0,
            stiffness_tangential: 3e6,
            stiffness_circumferential: 1.0,
            n_spines: [20; 3],
            internal_force: 6.0,
            spine_strength: 12.0,
        }
    }

    pub fn with_symmetric_alpha(mut self, alpha: f64) -> Self {
        self.alpha = [alpha; 3];
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.alpha[0] == self.alpha[1] && self.alpha[1] == self.alpha[2]
    }

    pub fn total_spines(&self) -> usize {
        self.n_spines.iter().sum()
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.alpha.iter().any(|a| !(0.0..half_pi).contains(a)) {
            return Err(GraspError::InvalidScenario("alpha must lie in [0, π/2)"));
        }
        if !(self.rock_radius > 0.0) {
            return Err(GraspError::InvalidScenario("rock_radius must be positive"));
        }
        if !(self.mu > 0.0) {
            return Err(GraspError::InvalidScenario("mu must be positive"));
        }
        if !(self.stiffness_normal > 0.0 && self.stiffness_tangential > 0.0 && self.stiffness_circumferential > 0.0) {
            return Err(GraspError::InvalidScenario("stiffnesses must be positive"));
        }
        if self.n_spines.iter().any(|&n| n == 0) {
            return Err(GraspError::InvalidScenario("every finger needs at least one spine"));
        }
        if self.internal_force < 0.0 || !(self.spine_strength > 0.0) || self.wrist_offset < 0.0 {
            return Err(GraspError::InvalidScenario("forces and offsets must be non-negative"));
        }
        Ok(())
    }
}

/// Splits a hand-wide count of engaged spines over three fingers, giving the
/// remainder to the first fingers (20 → 7/7/6).
pub fn engaged_split(total: usize) -> [usize; 3] {
    let base = total / 3;
    let extra = total % 3;
    [0, 1, 2].map(|k| base + usize::from(k < extra))
}

/// Pull direction at the wrist: `beta` from the gripper axis, `phi` azimuth
/// measured from finger 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullDirection {
    pub beta: f64,
    pub phi: f64,
}

impl PullDirection {
    pub fn new(beta: f64, phi: f64) -> Self {
        Self { beta, phi }
    }

    /// Unit pull vector in the gripper frame.
    pub fn unit(&self) -> nalgebra::Vector3<f64> {
        let (sb, cb) = self.beta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        nalgebra::Vector3::new(sb * cp, sb * sp, cb)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("invalid grasp scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("grasp matrix is singular (reciprocal condition {rcond:.3e})")]
    SingularGrasp { rcond: f64 },
}

/// Contact angle from the link-length-to-rock-radius ratio, the solution of
/// `cos α = (1 − ρ²) / (1 + ρ²)`. Evaluated as `2·atan ρ`, which is the same
/// angle without the cancellation `acos` suffers near ρ = 0.
pub fn alpha_from_ratio(ratio: f64) -> f64 {
    assert!(ratio >= 0.0, "ratio must be non-negative");
    2.0 * ratio.atan()
}

/// Inverse of [`alpha_from_ratio`]: `ρ = tan(α/2)`.
pub fn ratio_from_alpha(alpha: f64) -> f64 {
    (alpha / 2.0).tan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closure_endpoints() {
        assert_eq!(alpha_from_ratio(0.0), 0.0);
        assert_eq!(alpha_from_ratio(1.0), std::f64::consts::FRAC_PI_2);
        assert_eq!(alpha_from_ratio(1.0).to_degrees(), 90.0);
    }

    #[test]
    fn closure_matches_geometric_system() {
        // ℓ sin α = r (1 − cos α) and ℓ (1 + cos α) = r sin α with r = 1
        let rho = 0.35;
        let a = alpha_from_ratio(rho);
        assert!((rho * a.sin() - (1.0 - a.cos())).abs() < 1e-14);
        assert!((rho * (1.0 + a.cos()) - a.sin()).abs() < 1e-14);
        assert!((a.to_degrees() - 38.58).abs() < 0.01, "{}", a.to_degrees());
    }

    #[test]
    fn engaged_spine_split() {
        assert_eq!(engaged_split(20), [7, 7, 6]);
        assert_eq!(engaged_split(60), [20, 20, 20]);
        assert_eq!(engaged_split(4), [2, 1, 1]);
    }

    #[test]
    fn scenario_validation() {
        GraspScenario::field_test().validate().unwrap();
        let mut s = GraspScenario::field_test();
        s.alpha[1] = 1.6;
        assert!(s.validate().is_err());
        let mut s = GraspScenario::field_test();
        s.n_spines[2] = 0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn closure_round_trip(rho in 0.0..1.0f64) {
            let back = ratio_from_alpha(alpha_from_ratio(rho));
            prop_assert!((back - rho).abs() <= 1e-12);
        }

        #[test]
        fn agrees_with_cosine_form(rho in 0.01..10.0f64) {
            let r2 = rho * rho;
            let direct = ((1.0 - r2) / (1.0 + r2)).acos();
            prop_assert!((alpha_from_ratio(rho) - direct).abs() < 1e-7);
        }

        #[test]
        fn closure_round_trip_from_alpha(a in 0.0..std::f64::consts::FRAC_PI_2) {
            prop_assert!((alpha_from_ratio(ratio_from_alpha(a)) - a).abs() <= 1e-12);
        }
    }
}
