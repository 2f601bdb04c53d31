use thiserror::Error;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("spine lost contact (normal reaction {normal:.3e} N)")]
pub struct ContactLost {
    pub normal: f64,
}

/// Coulomb no-slip test for one spine on an asperity inclined at `psi`, on
/// a surface patch at contact angle `alpha`, carrying fingertip shares
/// `(ft, fn_, fc)` and grasp share `fp`. Equality counts as holding.
pub fn spine_no_slip(ft: f64, fn_: f64, fc: f64, fp: f64, psi: f64, alpha: f64, mu: f64) -> Result<bool, ContactLost> {
    let (sp, cp) = psi.sin_cos();
    let (sap, cap) = (alpha + psi).sin_cos();
    let normal = ft * sp + fn_ * cp + fp * sap;
    if normal <= 0.0 {
        return Err(ContactLost { normal });
    }
    let tangential = ft * cp - fn_ * sp + fp * cap;
    Ok(tangential.hypot(fc) <= mu * normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};
    use proptest::prelude::*;

    /// Rotate the in-plane resultant (tangential + grasp-force components)
    /// into the asperity frame and apply the friction cone there.
    fn oracle(ft: f64, fn_: f64, fc: f64, fp: f64, psi: f64, alpha: f64, mu: f64) -> Option<bool> {
        let rot = Matrix2::new(psi.cos(), -psi.sin(), psi.sin(), psi.cos());
        let local = rot * (Vector2::new(ft, fn_) + fp * Vector2::new(alpha.cos(), alpha.sin()));
        if local.y <= 0.0 {
            return None;
        }
        Some((local.x * local.x + fc * fc).sqrt() <= mu * local.y)
    }

    #[test]
    fn reduces_to_coulomb() {
        assert_eq!(spine_no_slip(0.3, 1.0, 0.0, 0.0, 0.0, 0.0, 0.39), Ok(true));
        assert_eq!(spine_no_slip(0.4, 1.0, 0.0, 0.0, 0.0, 0.0, 0.39), Ok(false));
        // boundary: F_t = μ F_n holds
        let fn_ = 2.0;
        assert_eq!(spine_no_slip(0.39 * fn_, fn_, 0.0, 0.0, 0.0, 0.0, 0.39), Ok(true));
        assert!(spine_no_slip(0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.39).is_err());
    }

    proptest! {
        #[test]
        fn matches_rotation_form(
            ft in -20.0..20.0f64, fn_ in -20.0..20.0f64, fc in -5.0..5.0f64, fp in 0.0..10.0f64,
            psi in 0.0..std::f64::consts::FRAC_PI_2, alpha in 0.0..1.5f64, mu in 0.05..2.0f64,
        ) {
            let got = spine_no_slip(ft, fn_, fc, fp, psi, alpha, mu).ok();
            let want = oracle(ft, fn_, fc, fp, psi, alpha, mu);
            // skip knife-edge cases where the two round differently
            let (sp, cp) = psi.sin_cos();
            let n = ft * sp + fn_ * cp + fp * (alpha + psi).sin();
            let t = (ft * cp - fn_ * sp + fp * (alpha + psi).cos()).hypot(fc);
            if n.abs() > 1e-9 && (t - mu * n).abs() > 1e-9 {
                prop_assert_eq!(got, want);
            }
        }

        #[test]
        fn monotone_in_mu(
            ft in -20.0..20.0f64, fn_ in -20.0..20.0f64, fc in -5.0..5.0f64, fp in 0.0..10.0f64,
            psi in 0.0..1.57f64, alpha in 0.0..1.5f64, mu in 0.05..2.0f64, extra in 0.0..2.0f64,
        ) {
            if let Ok(true) = spine_no_slip(ft, fn_, fc, fp, psi, alpha, mu) {
                prop_assert_eq!(spine_no_slip(ft, fn_, fc, fp, psi, alpha, mu + extra), Ok(true));
            }
        }
    }
}
