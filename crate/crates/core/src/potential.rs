//! Closed-form potential of the segment and its gradient.
//!
//! In the scaled chart the segment occupies `xi in [-1 - A, 1 - A]` and the
//! potential depends on the position only through the end-point distances
//! `R1` (to `xi = 1 - A`) and `R2` (to `xi = -1 - A`), via
//!
//! ```text
//! s = R1 + R2,   d = R1 - R2,
//! U = 3 A d - (3 A d s + 4) / 4 * ln((s + 2) / (s - 2)).
//! ```
//!
//! `U` is the Newtonian potential of the linear mass density
//! `1 - 3A (xi + A)` spread over the segment (total mass 2); the quadrature
//! oracle in [`crate::quadrature`] integrates exactly that density.
//!
//! All quantities that suffer cancellation near the segment (`s - 2`) or far
//! from it (`d`, the logarithm) are evaluated in rearranged forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SegmentParams;

/// Numerical collision threshold on `s - 2`.
pub const COLLISION_EPSILON: f64 = 1e-12;

/// Auxiliary coordinates of a point relative to the segment end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxSD {
    pub s: f64,
    pub d: f64,
    pub r1: f64,
    pub r2: f64,
    /// `s - 2`, computed without cancellation.
    pub gap: f64,
}

impl AuxSD {
    /// `ln((s + 2) / (s - 2))`.
    pub fn log_term(&self) -> f64 {
        (4.0 / self.gap).ln_1p()
    }

    /// `s^2 - d^2 = 4 R1 R2`.
    pub fn s2_minus_d2(&self) -> f64 {
        4.0 * self.r1 * self.r2
    }

    /// `s^2 - 4 = (s - 2)(s + 2)`.
    pub fn s2_minus_4(&self) -> f64 {
        self.gap * (self.s + 2.0)
    }
}

/// End-point distances of a point at axial offset `a` from the segment
/// midpoint and distance `rho` from the axis, for a segment of half-length
/// `half`. Returns `(R_right, R_left, R_right + R_left - 2 half)`.
pub(crate) fn end_distances(a: f64, rho: f64, half: f64) -> (f64, f64, f64) {
    let rho2 = rho * rho;
    let right = half - a;
    let left = half + a;
    let r1 = right.hypot(rho);
    let r2 = left.hypot(rho);
    let g1 = if right > 0.0 {
        rho2 / (r1 + right)
    } else {
        r1 - right
    };
    let g2 = if left > 0.0 {
        rho2 / (r2 + left)
    } else {
        r2 - left
    };
    (r1, r2, g1 + g2)
}

/// `(s, d)` from an axial coordinate and a distance to the axis.
pub fn aux_sd_cyl(x: f64, rho: f64, a: f64) -> Result<AuxSD> {
    let offset = x + a;
    let (r1, r2, gap) = end_distances(offset, rho, 1.0);
    if !(gap > COLLISION_EPSILON) {
        return Err(Error::OnSegment { gap });
    }
    let s = 2.0 + gap;
    Ok(AuxSD {
        s,
        d: -4.0 * offset / s,
        r1,
        r2,
        gap,
    })
}

pub fn aux_sd(q: [f64; 3], a: f64) -> Result<AuxSD> {
    aux_sd_cyl(q[0], q[1].hypot(q[2]), a)
}

/// Scaled potential as a function of the auxiliary coordinates.
pub fn potential_sd(aux: &AuxSD, a: f64) -> f64 {
    let (s, d) = (aux.s, aux.d);
    3.0 * a * d - 0.25 * (3.0 * a * d * s + 4.0) * aux.log_term()
}

pub fn potential_scaled(q: [f64; 3], a: f64) -> Result<f64> {
    Ok(potential_sd(&aux_sd(q, a)?, a))
}

pub fn potential_cyl(r: f64, x: f64, a: f64) -> Result<f64> {
    Ok(potential_sd(&aux_sd_cyl(x, r, a)?, a))
}

/// Force components in the meridian plane: `(F_axial, K)` where the force
/// towards the axis is `-K * rho`.
///
/// ```text
/// F_axial = 4 (d + 3 A s) / (s^2 - d^2) - 3 A ln((s + 2)/(s - 2))
/// K       = 16 (s + 3 A d) / ((s^2 - d^2)(s^2 - 4))
/// ```
pub fn force_sd(aux: &AuxSD, a: f64) -> (f64, f64) {
    let (s, d) = (aux.s, aux.d);
    let axial = 4.0 * (d + 3.0 * a * s) / aux.s2_minus_d2() - 3.0 * a * aux.log_term();
    let k = 16.0 * (s + 3.0 * a * d) / (aux.s2_minus_d2() * aux.s2_minus_4());
    (axial, k)
}

/// `-grad U` in the scaled Cartesian chart.
pub fn force_scaled(q: [f64; 3], a: f64) -> Result<[f64; 3]> {
    let aux = aux_sd(q, a)?;
    let (axial, k) = force_sd(&aux, a);
    Ok([axial, -k * q[1], -k * q[2]])
}

/// Partial derivatives `(dU/ds, dU/dd)`.
pub fn potential_partials(aux: &AuxSD, a: f64) -> (f64, f64) {
    let (s, d) = (aux.s, aux.d);
    let lg = aux.log_term();
    let du_ds = -0.75 * a * d * lg + (3.0 * a * d * s + 4.0) / aux.s2_minus_4();
    let du_dd = 3.0 * a - 0.75 * a * s * lg;
    (du_ds, du_dd)
}

/// `-grad U` assembled by the chain rule through `grad s` and `grad d`.
///
/// Independent of the simplified expressions in [`force_sd`]; the two are
/// compared in tests.
pub fn force_chain_rule(q: [f64; 3], a: f64) -> Result<[f64; 3]> {
    let aux = aux_sd(q, a)?;
    let (du_ds, du_dd) = potential_partials(&aux, a);
    let p1 = [1.0 - a, 0.0, 0.0];
    let p2 = [-1.0 - a, 0.0, 0.0];
    let mut f = [0.0; 3];
    for i in 0..3 {
        let e1 = (q[i] - p1[i]) / aux.r1;
        let e2 = (q[i] - p2[i]) / aux.r2;
        f[i] = -(du_ds * (e1 + e2) + du_dd * (e1 - e2));
    }
    Ok(f)
}

/// Physical potential at `p`, given in the center-of-mass frame.
///
/// ```text
/// V = c1 G / 2L (r1 - r2)
///     - G / 8L^2 [c1 (4L^2 + r1^2 - r2^2) + 8 c2 L^2] ln((2L + r1 + r2)/(r1 + r2 - 2L))
/// ```
/// with `c1 = 2 L alpha`, `c2 = beta - alpha L`, `r1` the distance to the
/// end point at `L - cbar` and `r2` to `-L - cbar`.
pub fn potential_physical(p: [f64; 3], params: &SegmentParams) -> Result<f64> {
    let l = params.half_length();
    let g = params.g();
    let cbar = params.center_of_mass();
    let (c1, c2) = params.potential_coefficients();
    let rho = p[1].hypot(p[2]);
    let (r1, r2, gap) = end_distances(p[0] + cbar, rho, l);
    if !(gap > COLLISION_EPSILON * l) {
        return Err(Error::OnSegment { gap: gap / l });
    }
    let lg = (4.0 * l / gap).ln_1p();
    let diff2 = (r1 - r2) * (r1 + r2);
    Ok(c1 * g / (2.0 * l) * (r1 - r2)
        - g / (8.0 * l * l) * (c1 * (4.0 * l * l + diff2) + 8.0 * c2 * l * l) * lg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_point() {
        let aux = aux_sd([0.0, 0.0, 1.0], 0.0).unwrap();
        assert_relative_eq!(aux.r1, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(aux.r2, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(aux.s, 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(aux.d, 0.0);
        let u = potential_scaled([0.0, 0.0, 1.0], 0.0).unwrap();
        assert_relative_eq!(u, -2.0 * (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-15);
        assert_relative_eq!(u, -1.762747174039086, epsilon = 1e-12);
    }

    #[test]
    fn on_axis_right_of_segment() {
        let aux = aux_sd([2.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(aux.r1, 1.0);
        assert_eq!(aux.r2, 3.0);
        assert_eq!(aux.s, 4.0);
        assert_eq!(aux.d, -2.0);
        let aux = aux_sd([-3.0, 0.0, 0.0], 0.25).unwrap();
        assert_relative_eq!(aux.d, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn circular_orbit_point() {
        for theta in [0.0, 1.0, 2.5, 4.0] {
            let r: f64 = 4.8926;
            let aux = aux_sd([-0.5042, r * f64::cos(theta), r * f64::sin(theta)], 0.25).unwrap();
            assert!((aux.s - 10.0).abs() < 5e-4, "s = {}", aux.s);
            assert!((aux.d - 0.1017).abs() < 5e-4, "d = {}", aux.d);
        }
    }

    #[test]
    fn collision_set() {
        assert!(matches!(
            aux_sd([0.0, 0.0, 0.0], 0.0),
            Err(Error::OnSegment { .. })
        ));
        assert!(matches!(
            aux_sd([1.0 - 0.2, 0.0, 0.0], 0.2),
            Err(Error::OnSegment { .. })
        ));
        assert!(aux_sd([0.0, 1e-5, 0.0], 0.0).is_ok());
    }

    #[test]
    fn near_segment_gap_has_no_cancellation() {
        let rho = 1e-5;
        let aux = aux_sd([0.0, rho, 0.0], 0.0).unwrap();
        // s - 2 = 2 (sqrt(1 + rho^2) - 1) = rho^2 - rho^4 / 4 + ...
        assert_relative_eq!(aux.gap, rho * rho, max_relative = 1e-12);
    }

    #[test]
    fn monopole_limit() {
        let aux = aux_sd([0.0, 5e5, 0.0], 0.0).unwrap();
        let u = potential_sd(&aux, 0.0);
        assert_relative_eq!(u * aux.s, -4.0, max_relative = 1e-10);
    }

    #[test]
    fn symmetric_point_force() {
        let f = force_scaled([0.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert!(f[2] < 0.0);
    }

    #[test]
    fn force_forms_agree() {
        for &(q, a) in &[
            ([0.3, -0.7, 1.1], 0.0),
            ([-2.0, 0.5, 0.1], 0.125),
            ([1.7, 0.0, -0.4], 0.25),
            ([0.0, 3.0, 4.0], 0.33),
        ] {
            let f = force_scaled(q, a).unwrap();
            let g = force_chain_rule(q, a).unwrap();
            for i in 0..3 {
                assert_relative_eq!(f[i], g[i], epsilon = 1e-13, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn axial_prefactor_sixteen_is_not_a_gradient() {
        // The compact axial component is sometimes written with a prefactor
        // 16 on the rational term. That variant disagrees with -dU/dxi; the
        // prefactor 4 used here matches it.
        let q = [0.4, 0.8, 0.3];
        let a = 0.125;
        let aux = aux_sd(q, a).unwrap();
        let h = 1e-6;
        let up = potential_scaled([q[0] + h, q[1], q[2]], a).unwrap();
        let um = potential_scaled([q[0] - h, q[1], q[2]], a).unwrap();
        let fd = -(up - um) / (2.0 * h);
        let rational = (4.0 * aux.d + 12.0 * a * aux.s) / aux.s2_minus_d2() * 4.0;
        let variant = rational - 3.0 * a * aux.log_term();
        let (axial, _) = force_sd(&aux, a);
        assert!((axial - fd).abs() < 1e-8);
        assert!((variant - fd).abs() > 1e-2);
    }

    #[test]
    fn homogeneous_physical_potential() {
        let p = SegmentParams::new(0.0, 3.0, 1.5, 2.0).unwrap();
        let pt = [0.4, 1.0, -0.8];
        let v = potential_physical(pt, &p).unwrap();
        let rho = pt[1].hypot(pt[2]);
        let r1 = (pt[0] - 1.5).hypot(rho);
        let r2 = (pt[0] + 1.5).hypot(rho);
        let expected = -(2.0 * 3.0 / 3.0) * ((r1 + r2 + 3.0) / (r1 + r2 - 3.0)).ln();
        assert_relative_eq!(v, expected, max_relative = 1e-14);
    }

    #[test]
    fn physical_potential_is_axisymmetric() {
        let p = SegmentParams::new(0.4, 2.0, 1.0, 1.0).unwrap();
        let v0 = potential_physical([0.3, 1.2, 0.0], &p).unwrap();
        for k in 1..8 {
            let t = k as f64 * std::f64::consts::FRAC_PI_4;
            let v = potential_physical([0.3, 1.2 * t.cos(), 1.2 * t.sin()], &p).unwrap();
            assert_relative_eq!(v, v0, max_relative = 1e-14);
        }
    }
}
