//! Full 3-D orbits from reduced trajectories.
//!
//! The azimuth follows from `theta' = c / r^2`, integrated with Gauss-Legendre
//! quadrature over the dense output of each integration step, so that the
//! angle inherits the accuracy of the propagation.

use std::f64::consts::TAU;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Trajectory, AXIS_EPSILON};
use crate::error::{Error, Result};
use crate::integrator::DenseStep;

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Azimuth along a reduced trajectory.
#[derive(Debug, Clone)]
pub struct Azimuth {
    c: f64,
    theta0: f64,
    steps: Vec<DenseStep<4>>,
    /// `theta` at the start of each step.
    start: Vec<f64>,
}

impl Azimuth {
    pub fn new(steps: &[DenseStep<4>], c: f64, theta0: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::DomainViolation(
                "reconstruction needs the dense output of the propagation".into(),
            ));
        }
        let mut az = Self {
            c,
            theta0,
            steps: steps.to_vec(),
            start: Vec::with_capacity(steps.len()),
        };
        let mut theta = theta0;
        for step in steps {
            az.start.push(theta);
            theta += az.integral(step, step.t0, step.t_end())?;
        }
        Ok(az)
    }

    fn radius(step: &DenseStep<4>, t: f64) -> Result<f64> {
        let r = step.component(t, 0);
        if r <= AXIS_EPSILON {
            return Err(Error::AxisCrossing { t });
        }
        Ok(r)
    }

    /// `int_a^b c / r^2 dt` inside one step.
    fn integral(&self, step: &DenseStep<4>, a: f64, b: f64) -> Result<f64> {
        if self.c == 0.0 || b == a {
            return Ok(0.0);
        }
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in GL_X.iter().zip(GL_W) {
            for t in [mid - half * x, mid + half * x] {
                let r = Self::radius(step, t)?;
                sum += w / (r * r);
            }
        }
        Ok(self.c * half * sum)
    }

    pub fn t_start(&self) -> f64 {
        self.steps[0].t0
    }

    pub fn t_end(&self) -> f64 {
        self.steps[self.steps.len() - 1].t_end()
    }

    /// `theta(t)`, unwrapped.
    pub fn theta(&self, t: f64) -> Result<f64> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return Err(Error::DomainViolation(format!(
                "t={t} outside [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        let idx = self
            .steps
            .partition_point(|s| s.t_end() < t)
            .min(self.steps.len() - 1);
        let step = &self.steps[idx];
        Ok(self.start[idx] + self.integral(step, step.t0, t)?)
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub t: f64,
    pub r: f64,
    /// Unwrapped azimuth.
    pub theta: f64,
    pub x: f64,
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructedOrbit {
    pub c: f64,
    pub samples: Vec<OrbitSample>,
    pub azimuth: Azimuth,
}

/// Rebuild the 3-D orbit of a reduced trajectory propagated with `keep_dense`.
pub fn reconstruct(traj: &Trajectory<4>, c: f64, theta0: f64) -> Result<ReconstructedOrbit> {
    let azimuth = Azimuth::new(&traj.dense, c, theta0)?;
    let mut samples = Vec::with_capacity(traj.times.len());
    for (&t, y) in traj.times.iter().zip(&traj.states) {
        if y[0] <= AXIS_EPSILON {
            return Err(Error::AxisCrossing { t });
        }
        let theta = azimuth.theta(t.min(azimuth.t_end()))?;
        let (sin, cos) = theta.sin_cos();
        samples.push(OrbitSample {
            t,
            r: y[0],
            theta,
            x: y[1],
            xi: y[1],
            eta: y[0] * cos,
            zeta: y[0] * sin,
        });
    }
    Ok(ReconstructedOrbit {
        c,
        samples,
        azimuth,
    })
}

impl ReconstructedOrbit {
    /// Azimuthal advance over `[t0, t0 + period]`, divided by `2 pi`.
    pub fn rotation_number(&self, t0: f64, period: f64) -> Result<f64> {
        let a = self.azimuth.theta(t0)?;
        let b = self.azimuth.theta(t0 + period)?;
        Ok((b - a) / TAU)
    }

    pub const CSV_HEADER: &'static str = "t,r,theta,x,xi,eta,zeta";

    /// Orbit CSV; `theta` is reported in `[0, 2 pi)`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            writeln!(
                w,
                "{}",
                crate::io::row(&[s.t, s.r, s.theta.rem_euclid(TAU), s.x, s.xi, s.eta, s.zeta])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Commensurability {
    Rational {
        p: i64,
        q: i64,
    },
    /// No rational with denominator at most `max_den` within `tol`.
    QuasiPeriodic,
}

pub const DEFAULT_MAX_DEN: i64 = 64;
pub const DEFAULT_COMMENSURABILITY_TOL: f64 = 1e-9;

/// Continued-fraction test of `delta_theta / 2 pi` against rationals `p/q`, `q <= max_den`.
pub fn commensurability(
    reduced_period: f64,
    delta_theta: f64,
    tol: f64,
    max_den: i64,
) -> Result<Commensurability> {
    if !(reduced_period > 0.0) {
        return Err(Error::DomainViolation(format!(
            "reduced period must be positive, got {reduced_period}"
        )));
    }
    let omega = delta_theta / TAU;
    let sign = if omega < 0.0 { -1 } else { 1 };
    let target = omega.abs();
    // Convergents h_n / k_n.
    let (mut h_prev, mut h) = (1i64, target.floor() as i64);
    let (mut k_prev, mut k) = (0i64, 1i64);
    let mut rest = target - target.floor();
    loop {
        if (target - h as f64 / k as f64).abs() <= tol {
            return Ok(Commensurability::Rational { p: sign * h, q: k });
        }
        if rest <= f64::EPSILON {
            break;
        }
        let inv = 1.0 / rest;
        let a = inv.floor();
        rest = inv - a;
        let a = a as i64;
        let k_next = a.saturating_mul(k).saturating_add(k_prev);
        if k_next > max_den {
            break;
        }
        (h_prev, h) = (h, a * h + h_prev);
        (k_prev, k) = (k, k_next);
    }
    Ok(Commensurability::QuasiPeriodic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_turn_is_rational() {
        assert_eq!(
            commensurability(1.0, std::f64::consts::PI, 1e-9, 64).unwrap(),
            Commensurability::Rational { p: 1, q: 2 }
        );
        assert_eq!(
            commensurability(1.0, -TAU * 3.0 / 7.0, 1e-9, 64).unwrap(),
            Commensurability::Rational { p: -3, q: 7 }
        );
    }

    #[test]
    fn golden_mean_is_quasi_periodic() {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        assert_eq!(
            commensurability(1.0, TAU * g, 1e-9, 64).unwrap(),
            Commensurability::QuasiPeriodic
        );
    }

    #[test]
    fn period_must_be_positive() {
        assert!(commensurability(0.0, 1.0, 1e-9, 64).is_err());
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let total: f64 = GL_W.iter().sum::<f64>() * 2.0;
        assert!((total - 2.0).abs() < 1e-15);
    }
}
