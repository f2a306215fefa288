//! Physical segment parameters and the dimensionless chart.
//!
//! A segment of half-length `L`, total mass `M` and linear density
//! `sigma(x) = alpha x + beta` is reduced to the single parameter
//! `A = alpha 2L^2 / (3M)` by the scaling
//!
//! ```text
//! q = L Q,   p = sqrt(GM / 2L) P,   t = sqrt(2 L^3 / GM) tau
//! ```
//!
//! With these factors `H = (GM / 2L) * H_scaled` and the scaled flow is again
//! canonical in `tau`. The time factor is the only one for which
//! `dQ/dtau = dH_scaled/dP` holds exactly.

use serde::{Deserialize, Serialize};

use crate::dynamics::CartState;
use crate::error::{Error, Result};

/// Upper (open) bound of the dimensionless slope.
pub const A_MAX: f64 = 1.0 / 3.0;

/// Check `0 <= A < 1/3`.
pub fn validate_a(a: f64) -> Result<f64> {
    if a.is_finite() && (0.0..A_MAX).contains(&a) {
        Ok(a)
    } else {
        Err(Error::ParameterOutOfRange(a))
    }
}

/// Physical description of the segment. `beta` is always derived from `M` and `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    g: f64,
    m: f64,
    l: f64,
    alpha: f64,
    beta: f64,
}

impl SegmentParams {
    pub fn new(alpha: f64, m: f64, l: f64, g: f64) -> Result<Self> {
        for (name, value) in [("L", l), ("M", m), ("G", g)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveDimension { name, value });
            }
        }
        let bound = m / (2.0 * l * l);
        if !(alpha.abs() < bound) {
            return Err(Error::SlopeOutOfRange { alpha, bound });
        }
        Ok(Self {
            g,
            m,
            l,
            alpha,
            beta: m / (2.0 * l),
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn mass(&self) -> f64 {
        self.m
    }
    pub fn half_length(&self) -> f64 {
        self.l
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Largest admissible `|alpha|` (exclusive).
    pub fn slope_bound(&self) -> f64 {
        self.m / (2.0 * self.l * self.l)
    }

    /// Axial offset of the center of mass from the segment midpoint.
    pub fn center_of_mass(&self) -> f64 {
        2.0 * self.alpha * self.l.powi(3) / (3.0 * self.m)
    }

    /// Linear density at `x` in the midpoint-centered frame.
    pub fn density(&self, x: f64) -> f64 {
        self.alpha * x + self.beta
    }

    /// Coefficients `(c1, c2)` of the closed-form physical potential.
    pub fn potential_coefficients(&self) -> (f64, f64) {
        (2.0 * self.l * self.alpha, self.beta - self.alpha * self.l)
    }

    pub fn to_scaled(&self) -> ScaledParams {
        let reflected = self.alpha < 0.0;
        let a = self.alpha.abs() * 2.0 * self.l * self.l / (3.0 * self.m);
        ScaledParams {
            a,
            reflected,
            length_scale: self.l,
            momentum_scale: (self.g * self.m / (2.0 * self.l)).sqrt(),
            time_scale: (2.0 * self.l.powi(3) / (self.g * self.m)).sqrt(),
            g: self.g,
            m: self.m,
        }
    }
}

/// Dimensionless model parameter together with the factors that map it back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub a: f64,
    /// Set when the physical slope was negative and the axis was flipped.
    pub reflected: bool,
    pub length_scale: f64,
    pub momentum_scale: f64,
    pub time_scale: f64,
    g: f64,
    m: f64,
}

impl ScaledParams {
    /// Scaled parameters with unit scale factors (G = 1, M = 2, L = 1).
    pub fn dimensionless(a: f64) -> Result<Self> {
        validate_a(a)?;
        Ok(SegmentParams::new(3.0 * a, 2.0, 1.0, 1.0)?.to_scaled())
    }

    pub fn from_scaled(&self) -> SegmentParams {
        let l = self.length_scale;
        let alpha = self.a * 3.0 * self.m / (2.0 * l * l);
        let alpha = if self.reflected { -alpha } else { alpha };
        SegmentParams {
            g: self.g,
            m: self.m,
            l,
            alpha,
            beta: self.m / (2.0 * l),
        }
    }

    /// Scaled segment extent `[-1 - A, 1 - A]` on the `xi` axis.
    pub fn segment_extent(&self) -> (f64, f64) {
        (-1.0 - self.a, 1.0 - self.a)
    }

    /// Center-of-mass offset measured in scaled length units.
    pub fn center_of_mass(&self) -> f64 {
        self.from_scaled().center_of_mass().abs() / self.length_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ToScaled,
    ToPhysical,
}

/// Map a Cartesian phase-space point and time between the physical and scaled charts.
///
/// Physical states are expressed in the center-of-mass frame. A reflected
/// parameter set flips the axial components.
pub fn map_state(
    state: &CartState,
    t: f64,
    params: &ScaledParams,
    direction: Direction,
) -> (CartState, f64) {
    let (lq, lp, lt) = match direction {
        Direction::ToScaled => (
            1.0 / params.length_scale,
            1.0 / params.momentum_scale,
            1.0 / params.time_scale,
        ),
        Direction::ToPhysical => (
            params.length_scale,
            params.momentum_scale,
            params.time_scale,
        ),
    };
    let flip = if params.reflected { -1.0 } else { 1.0 };
    let q = state.position();
    let p = state.momentum();
    let out = CartState::new(
        [flip * q[0] * lq, q[1] * lq, q[2] * lq],
        [flip * p[0] * lp, p[1] * lp, p[2] * lp],
    );
    (out, t * lt)
}

/// Length unit used to report Poincaré-section data.
///
/// `TwoL` expresses lengths in units of the full segment length, which
/// leaves momenta and energy unchanged, halves lengths and angular momentum,
/// and halves times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "L")]
    L,
    #[serde(rename = "2L")]
    TwoL,
}

impl LengthUnit {
    fn factor(self) -> f64 {
        match self {
            LengthUnit::L => 1.0,
            LengthUnit::TwoL => 2.0,
        }
    }

    /// Length given in this unit, expressed in scaled (L) units.
    pub fn length_to_scaled(self, v: f64) -> f64 {
        v * self.factor()
    }
    pub fn length_from_scaled(self, v: f64) -> f64 {
        v / self.factor()
    }
    /// Angular momentum scales like a length times a momentum.
    pub fn angular_to_scaled(self, c: f64) -> f64 {
        c * self.factor()
    }
    pub fn angular_from_scaled(self, c: f64) -> f64 {
        c / self.factor()
    }
    pub fn time_to_scaled(self, t: f64) -> f64 {
        t * self.factor()
    }
    pub fn time_from_scaled(self, t: f64) -> f64 {
        t / self.factor()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LengthUnit::L => "L",
            LengthUnit::TwoL => "2L",
        }
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "L" => Ok(LengthUnit::L),
            "2L" => Ok(LengthUnit::TwoL),
            other => Err(format!("unknown length unit '{other}', expected L or 2L")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn homogeneous_segment() {
        let p = SegmentParams::new(0.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(p.beta(), 1.0);
        assert_eq!(p.center_of_mass(), 0.0);
        assert_eq!(p.to_scaled().a, 0.0);
    }

    #[test]
    fn sloped_segment() {
        let p = SegmentParams::new(0.5, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(p.beta(), 1.0);
        assert_relative_eq!(p.center_of_mass(), 1.0 / 6.0, epsilon = 1e-15);
        let s = p.to_scaled();
        assert_relative_eq!(s.a, 1.0 / 6.0, epsilon = 1e-15);
        let (lo, hi) = s.segment_extent();
        assert_relative_eq!(lo, -7.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(hi, 5.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn slope_bound_is_open() {
        assert!(matches!(
            SegmentParams::new(1.0, 2.0, 1.0, 1.0),
            Err(Error::SlopeOutOfRange { .. })
        ));
        assert!(matches!(
            SegmentParams::new(-1.0, 2.0, 1.0, 1.0),
            Err(Error::SlopeOutOfRange { .. })
        ));
        assert!(SegmentParams::new(0.999, 2.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_nonpositive_dimensions() {
        for (m, l, g) in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)] {
            assert!(matches!(
                SegmentParams::new(0.0, m, l, g),
                Err(Error::NonPositiveDimension { .. })
            ));
        }
    }

    #[test]
    fn negative_slope_reflects() {
        let p = SegmentParams::new(-0.5, 2.0, 1.0, 1.0).unwrap();
        let s = p.to_scaled();
        assert!(s.reflected);
        assert_relative_eq!(s.a, 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(s.from_scaled(), p);
        let (mapped, _) = map_state(
            &CartState::new([1.0, 2.0, 3.0], [0.5, 0.0, 0.0]),
            0.0,
            &s,
            Direction::ToScaled,
        );
        assert_eq!(mapped.position()[0], -1.0);
        assert_eq!(mapped.momentum()[0], -0.5);
    }

    #[test]
    fn state_mapping_examples() {
        let s = SegmentParams::new(0.0, 2.0, 2.0, 1.0).unwrap().to_scaled();
        let (q, _) = map_state(
            &CartState::new([2.0, 0.0, 0.0], [0.0; 3]),
            0.0,
            &s,
            Direction::ToScaled,
        );
        assert_eq!(q.position()[0], 1.0);

        let s = SegmentParams::new(0.0, 2.0, 1.0, 1.0).unwrap().to_scaled();
        let (q, t) = map_state(
            &CartState::new([0.0; 3], [3.0, 0.0, 0.0]),
            5.0,
            &s,
            Direction::ToScaled,
        );
        assert_eq!(q.momentum()[0], 3.0);
        assert_eq!(t, 5.0);
    }

    #[test]
    fn time_scale_makes_scaled_flow_canonical() {
        // dq/dt = p in physical units must become dQ/dtau = P.
        let p = SegmentParams::new(0.3, 5.0, 2.5, 0.7).unwrap();
        let s = p.to_scaled();
        let ratio = s.length_scale / s.time_scale / s.momentum_scale;
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_l_units() {
        let u = LengthUnit::TwoL;
        assert_eq!(u.length_to_scaled(0.5), 1.0);
        assert_eq!(u.angular_to_scaled(0.9), 1.8);
        assert_eq!("2L".parse::<LengthUnit>().unwrap(), u);
        assert!("3L".parse::<LengthUnit>().is_err());
    }
}
