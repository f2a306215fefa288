//! Circular orbits: relative equilibria of the reduced system.
//!
//! A circular orbit with angular momentum `c` sits at a root of
//!
//! ```text
//! F1 = (d^2 - 4)^2 (s^2 - 4)(3Ad + s) + 16 c^2 (d^2 - s^2)
//! F2 = 3As + d + (3/4) A (d^2 - s^2) ln((s + 2)/(s - 2))
//! ```
//!
//! `F2` does not involve `c`, so the family is parameterized by `s*`: `F2`
//! fixes `d*`, and `F1` then gives `c*` in closed form.

use serde::{Deserialize, Serialize};

use crate::dynamics::{eom_reduced, ReducedState};
use crate::error::{Error, Result};
use crate::par::{par_map, Parallelism};
use crate::potential::aux_sd_cyl;
use crate::units::validate_a;

/// Newton stops once the normalized residuals fall below this.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

fn check_sd(s: f64, d: f64) -> Result<()> {
    if !(s > 2.0 && s.is_finite()) {
        return Err(Error::DomainViolation(format!("s must exceed 2, got {s}")));
    }
    if !(d.abs() < 2.0) {
        return Err(Error::DomainViolation(format!(
            "|d| must be below 2, got {d}"
        )));
    }
    Ok(())
}

fn log_ratio(s: f64) -> f64 {
    (4.0 / (s - 2.0)).ln_1p()
}

/// Residuals of the circular-orbit conditions and their Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub f1: f64,
    pub f2: f64,
    /// `[[dF1/ds, dF1/dd], [dF2/ds, dF2/dd]]`.
    pub jacobian: [[f64; 2]; 2],
    /// `|(d^2-4)^2 (s^2-4)(3Ad+s)| + |16 c^2 (d^2-s^2)|`, the size of the
    /// two terms that cancel in `F1`.
    pub f1_scale: f64,
}

impl Residuals {
    /// `(|F1| / f1_scale, |F2|)`; both are O(1) quantities.
    pub fn normalized(&self) -> (f64, f64) {
        let scale = if self.f1_scale > 0.0 {
            self.f1_scale
        } else {
            1.0
        };
        ((self.f1 / scale).abs(), self.f2.abs())
    }
}

pub fn residuals(s: f64, d: f64, a: f64, c: f64) -> Result<Residuals> {
    check_sd(s, d)?;
    let lg = log_ratio(s);
    let w = d * d - 4.0;
    let s2m4 = (s - 2.0) * (s + 2.0);
    let lin = 3.0 * a * d + s;
    let dms = d * d - s * s;
    let first = w * w * s2m4 * lin;
    let second = 16.0 * c * c * dms;

    let f1_s = w * w * (2.0 * s * lin + s2m4) - 32.0 * c * c * s;
    let f1_d = 4.0 * d * w * s2m4 * lin + 3.0 * a * w * w * s2m4 + 32.0 * c * c * d;
    let f2_s = 3.0 * a - 1.5 * a * s * lg - 3.0 * a * dms / s2m4;
    let f2_d = 1.0 + 1.5 * a * d * lg;

    Ok(Residuals {
        f1: first + second,
        f2: 3.0 * a * s + d + 0.75 * a * dms * lg,
        jacobian: [[f1_s, f1_d], [f2_s, f2_d]],
        f1_scale: first.abs() + second.abs(),
    })
}

/// `s0 = (c^2 + sqrt(c^4 + 16)) / 2`, the circular orbit of the homogeneous segment.
pub fn s0_for_c(c: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::ZeroAngularMomentum);
    }
    let c2 = c * c;
    Ok(0.5 * (c2 + (c2 * c2 + 16.0).sqrt()))
}

/// Both roots of `F2 = 0` in `d`, `(d_plus, d_minus)`.
///
/// `d_plus` is evaluated in the form `-2 c0 / (1 + sqrt(D))`, which is free of
/// cancellation and reduces to `0` at `A = 0`. `d_minus` is `-inf` there.
pub fn d_branches(s: f64, a: f64) -> Result<(f64, f64)> {
    check_sd(s, 0.0)?;
    validate_a(a)?;
    let lg = log_ratio(s);
    // F2 = q d^2 + d + c0
    let q = 0.75 * a * lg;
    let c0 = 3.0 * a * s - 0.75 * a * s * s * lg;
    let disc = 1.0 - 4.0 * q * c0;
    if disc < 0.0 {
        return Err(Error::DomainViolation(format!(
            "negative radicand {disc} at s={s}, A={a}"
        )));
    }
    let root = disc.sqrt();
    let plus = -2.0 * c0 / (1.0 + root);
    let minus = if q == 0.0 {
        f64::NEG_INFINITY
    } else {
        -(1.0 + root) / (2.0 * q)
    };
    Ok((plus, minus))
}

/// `|c*| = ((4 - d^2)/4) sqrt((s^2 - 4)(3Ad + s) / (s^2 - d^2))`, the root of `F1 = 0` in `c`.
pub fn c_star(s: f64, d: f64, a: f64) -> Result<f64> {
    check_sd(s, d)?;
    let radicand = (s - 2.0) * (s + 2.0) * (3.0 * a * d + s) / ((s - d) * (s + d));
    if radicand < 0.0 {
        return Err(Error::DomainViolation(format!(
            "3Ad + s < 0 at s={s}, d={d}"
        )));
    }
    Ok(0.25 * (2.0 - d) * (2.0 + d) * radicand.sqrt())
}

/// `(s, d) -> (r, x)`.
pub fn sd_to_rx(s: f64, d: f64, a: f64) -> Result<(f64, f64)> {
    check_sd(s, d)?;
    let r = 0.25 * ((s - 2.0) * (s + 2.0) * (2.0 - d) * (2.0 + d)).sqrt();
    Ok((r, -a - d * s / 4.0))
}

/// `(r, x) -> (s, d)`.
pub fn rx_to_sd(r: f64, x: f64, a: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::DomainViolation(format!(
            "r must be positive, got {r}"
        )));
    }
    let aux = aux_sd_cyl(x, r, a)?;
    Ok((aux.s, aux.d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    pub a: f64,
    pub s: f64,
    pub d: f64,
    /// Prograde angular momentum; the retrograde orbit has `-c`.
    pub c: f64,
    pub r: f64,
    pub x: f64,
    pub period: f64,
    /// Normalized `(|F1|, |F2|)`, see [`Residuals::normalized`].
    pub residuals: (f64, f64),
}

impl CircularOrbit {
    pub fn reduced_state(&self) -> ReducedState {
        ReducedState::new(self.r, self.x, 0.0, 0.0)
    }

    /// Largest momentum derivative of the reduced flow at the orbit.
    pub fn equilibrium_defect(&self) -> Result<f64> {
        let f = eom_reduced(&self.reduced_state(), self.a, self.c)?;
        Ok(f.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }

    pub const CSV_HEADER: &'static str = "A,s,d,c,r,x,T,res_F1,res_F2";

    pub fn csv_row(&self) -> String {
        crate::io::row(&[
            self.a,
            self.s,
            self.d,
            self.c,
            self.r,
            self.x,
            self.period,
            self.residuals.0,
            self.residuals.1,
        ])
    }
}

fn build(s: f64, d: f64, c: f64, a: f64) -> Result<CircularOrbit> {
    let (r, x) = sd_to_rx(s, d, a)?;
    let res = residuals(s, d, a, c)?;
    Ok(CircularOrbit {
        a,
        s,
        d,
        c,
        r,
        x,
        period: 2.0 * std::f64::consts::PI * r * r / c,
        residuals: res.normalized(),
    })
}

/// Family member at `s*`: closed-form seed, then Newton on `(F1, F2)` in `(d, c)`.
pub fn solve_circular(s: f64, a: f64) -> Result<CircularOrbit> {
    validate_a(a)?;
    check_sd(s, 0.0)?;
    if a == 0.0 {
        return build(s, 0.0, c_star(s, 0.0, 0.0)?, 0.0);
    }
    let mut d = d_branches(s, a)?.0;
    let mut c = c_star(s, d, a)?;
    let mut best = residuals(s, d, a, c)?.normalized();
    for _ in 0..NEWTON_MAX_ITER {
        if best.0.max(best.1) <= NEWTON_TOLERANCE {
            break;
        }
        let res = residuals(s, d, a, c)?;
        // Unknowns (d, c): dF1/dc = 32 c (d^2 - s^2), dF2/dc = 0.
        let step_d = -res.f2 / res.jacobian[1][1];
        let f1_c = 32.0 * c * (d * d - s * s);
        let step_c = -(res.f1 + res.jacobian[0][1] * step_d) / f1_c;
        let (nd, nc) = (d + step_d, c + step_c);
        if check_sd(s, nd).is_err() || !nc.is_finite() {
            return Err(Error::NewtonDiverged(format!(
                "left the domain at s={s}, A={a}"
            )));
        }
        let trial = residuals(s, nd, a, nc)?.normalized();
        if trial.0.max(trial.1) >= best.0.max(best.1) {
            // Round-off floor reached.
            break;
        }
        (d, c, best) = (nd, nc, trial);
    }
    if best.0.max(best.1) > 1e-10 {
        return Err(Error::NewtonDiverged(format!(
            "residuals {best:?} at s={s}, A={a}"
        )));
    }
    build(s, d, c, a)
}

/// `c*` along the family as a function of `s`, with its derivative.
fn c_along_family(s: f64, a: f64) -> Result<(f64, f64)> {
    let d = if a == 0.0 { 0.0 } else { d_branches(s, a)?.0 };
    let c = c_star(s, d, a)?;
    let j = residuals(s, d, a, c)?.jacobian;
    let dd_ds = -j[1][0] / j[1][1];
    let f1_c = 32.0 * c * (d * d - s * s);
    let dc_ds = -(j[0][0] + j[0][1] * dd_ds) / f1_c;
    Ok((c, dc_ds))
}

/// Circular orbit with prescribed `|c|`: safeguarded Newton over `s*`
/// started from `s_seed`, followed by [`solve_circular`].
///
/// `c*(s)` grows monotonically from `0` at `s = 2`, so a bracket is kept and
/// any Newton step leaving it is replaced by bisection.
pub fn solve_circular_for_c(c: f64, a: f64, s_seed: Option<f64>) -> Result<CircularOrbit> {
    validate_a(a)?;
    let c = c.abs();
    if c == 0.0 || !c.is_finite() {
        return Err(Error::ZeroAngularMomentum);
    }
    let mut s = match s_seed {
        Some(s) => {
            check_sd(s, 0.0)?;
            s
        }
        None => s0_for_c(c)?,
    };
    let (mut lo, mut hi) = (2.0, f64::INFINITY);
    let mut converged = false;
    for _ in 0..4 * NEWTON_MAX_ITER {
        let (cs, slope) = c_along_family(s, a)?;
        let g = cs - c;
        if g == 0.0 {
            converged = true;
            break;
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = s - g / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * s
            };
        }
        let done = (next - s).abs() <= 1e-15 * s;
        s = next;
        if done || (hi - lo) <= 1e-15 * s {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NewtonDiverged(format!(
            "no circular orbit found for c={c}, A={a}"
        )));
    }
    solve_circular(s, a)
}

/// Slope `d'(0)` of `d*` with respect to `A` at fixed `c`, at `A = 0`.
pub fn d_linear_coeff(c: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::ZeroAngularMomentum);
    }
    let c2 = c * c;
    let x = (c2 * c2 + 16.0).sqrt() + c2;
    Ok(3.0 * x / 16.0 * (x * (8.0 / (x - 4.0)).ln_1p() - 8.0))
}

/// Family members for every `s*` in `s_values`, in input order.
pub fn family(s_values: &[f64], a: f64, policy: Parallelism) -> Vec<Result<CircularOrbit>> {
    par_map(s_values, policy, |&s| solve_circular(s, a))
}
