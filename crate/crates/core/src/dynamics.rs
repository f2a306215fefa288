//! Equations of motion in the Cartesian, cylindrical and reduced charts, and
//! trajectory propagation.
//!
//! The cylindrical chart uses the canonical lift of
//! `(eta, zeta) = (r cos theta, r sin theta)`:
//!
//! ```text
//! p_eta  = P_r cos theta - (P_theta / r) sin theta
//! p_zeta = P_r sin theta + (P_theta / r) cos theta
//! ```
//!
//! so that `P_theta = eta p_zeta - zeta p_eta` and the kinetic energy becomes
//! `(P_r^2 + P_x^2 + P_theta^2 / r^2) / 2`.
//!
//! With `P_theta = 0` the motion stays in a meridian plane and the
//! cylindrical and reduced right-hand sides are odd in `r`; they are then
//! integrated as the planar Cartesian flow of that plane, with `r` allowed to
//! change sign when the particle crosses the axis.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{DenseStep, Dop853, OdeSystem, Tolerances};
use crate::potential::{aux_sd, aux_sd_cyl, force_sd, potential_sd, AuxSD};

/// Below this radius a nonzero angular momentum makes the cylindrical chart singular.
pub const AXIS_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartState {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
    pub p_xi: f64,
    pub p_eta: f64,
    pub p_zeta: f64,
}

impl CartState {
    pub fn new(q: [f64; 3], p: [f64; 3]) -> Self {
        Self {
            xi: q[0],
            eta: q[1],
            zeta: q[2],
            p_xi: p[0],
            p_eta: p[1],
            p_zeta: p[2],
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.xi, self.eta, self.zeta]
    }

    pub fn momentum(&self) -> [f64; 3] {
        [self.p_xi, self.p_eta, self.p_zeta]
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.xi,
            self.eta,
            self.zeta,
            self.p_xi,
            self.p_eta,
            self.p_zeta,
        ]
    }

    pub fn from_array(y: &[f64; 6]) -> Self {
        Self::new([y[0], y[1], y[2]], [y[3], y[4], y[5]])
    }

    /// Axial component of the angular momentum, `eta p_zeta - zeta p_eta`.
    pub fn angular_momentum(&self) -> f64 {
        self.eta * self.p_zeta - self.zeta * self.p_eta
    }

    pub fn energy(&self, a: f64) -> Result<f64> {
        let p = self.momentum();
        let kinetic = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        Ok(kinetic + potential_sd(&aux_sd(self.position(), a)?, a))
    }

    /// Cylindrical coordinates with `theta` in `[0, 2 pi)`.
    pub fn to_cyl(&self) -> CylState {
        let r = self.eta.hypot(self.zeta);
        let theta = self.zeta.atan2(self.eta).rem_euclid(std::f64::consts::TAU);
        let (sin, cos) = theta.sin_cos();
        CylState {
            r,
            theta,
            x: self.xi,
            p_r: self.p_eta * cos + self.p_zeta * sin,
            p_theta: self.angular_momentum(),
            p_x: self.p_xi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylState {
    pub r: f64,
    pub theta: f64,
    pub x: f64,
    pub p_r: f64,
    pub p_theta: f64,
    pub p_x: f64,
}

impl CylState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.r, self.theta, self.x, self.p_r, self.p_theta, self.p_x]
    }

    pub fn from_array(y: &[f64; 6]) -> Self {
        Self {
            r: y[0],
            theta: y[1],
            x: y[2],
            p_r: y[3],
            p_theta: y[4],
            p_x: y[5],
        }
    }

    pub fn to_cart(&self) -> CartState {
        let (sin, cos) = self.theta.sin_cos();
        let tangential = if self.p_theta == 0.0 {
            0.0
        } else {
            self.p_theta / self.r
        };
        CartState {
            xi: self.x,
            eta: self.r * cos,
            zeta: self.r * sin,
            p_xi: self.p_x,
            p_eta: self.p_r * cos - tangential * sin,
            p_zeta: self.p_r * sin + tangential * cos,
        }
    }

    /// Fold a negative radius (meridian-plane motion through the axis) back
    /// to `r >= 0`.
    pub fn normalized(&self) -> CylState {
        if self.r >= 0.0 {
            return *self;
        }
        CylState {
            r: -self.r,
            theta: (self.theta + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU),
            p_r: -self.p_r,
            ..*self
        }
    }

    pub fn reduced(&self) -> ReducedState {
        ReducedState {
            r: self.r,
            x: self.x,
            p_r: self.p_r,
            p_x: self.p_x,
        }
    }

    pub fn energy(&self, a: f64) -> Result<f64> {
        self.reduced().energy(a, self.p_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub r: f64,
    pub x: f64,
    pub p_r: f64,
    pub p_x: f64,
}

impl ReducedState {
    pub fn new(r: f64, x: f64, p_r: f64, p_x: f64) -> Self {
        Self { r, x, p_r, p_x }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.r, self.x, self.p_r, self.p_x]
    }

    pub fn from_array(y: &[f64; 4]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    /// `(P_r^2 + P_x^2 + c^2 / r^2) / 2 + U(r, x)`.
    pub fn energy(&self, a: f64, c: f64) -> Result<f64> {
        let centrifugal = if c == 0.0 {
            0.0
        } else {
            c * c / (self.r * self.r)
        };
        let kinetic = 0.5 * (self.p_r * self.p_r + self.p_x * self.p_x + centrifugal);
        Ok(kinetic + potential_sd(&aux_sd_cyl(self.x, self.r.abs(), a)?, a))
    }
}

/// A flow on an `N`-dimensional chart with a conserved energy.
pub trait Flow<const N: usize>: OdeSystem<N> + Sync {
    fn energy(&self, y: &[f64; N]) -> Result<f64>;
    fn aux(&self, y: &[f64; N]) -> Result<AuxSD>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianFlow {
    pub a: f64,
}

impl OdeSystem<6> for CartesianFlow {
    fn rhs(&self, _t: f64, y: &[f64; 6]) -> Result<[f64; 6]> {
        let aux = aux_sd([y[0], y[1], y[2]], self.a)?;
        let (axial, k) = force_sd(&aux, self.a);
        Ok([y[3], y[4], y[5], axial, -k * y[1], -k * y[2]])
    }
}

impl Flow<6> for CartesianFlow {
    fn energy(&self, y: &[f64; 6]) -> Result<f64> {
        CartState::from_array(y).energy(self.a)
    }
    fn aux(&self, y: &[f64; 6]) -> Result<AuxSD> {
        aux_sd([y[0], y[1], y[2]], self.a)
    }
}

pub fn eom_cartesian(state: &CartState, a: f64) -> Result<[f64; 6]> {
    CartesianFlow { a }.rhs(0.0, &state.to_array())
}

/// `(dP_r/dt, dP_x/dt, dtheta/dt)` at a meridian-plane point.
fn meridian_rhs(r: f64, x: f64, c: f64, a: f64) -> Result<(f64, f64, f64)> {
    if c != 0.0 && r.abs() <= AXIS_EPSILON {
        return Err(Error::AxisSingularity { r });
    }
    let aux = aux_sd_cyl(x, r.abs(), a)?;
    let (axial, k) = force_sd(&aux, a);
    let (centrifugal, theta_dot) = if c == 0.0 {
        (0.0, 0.0)
    } else {
        (c * c / (r * r * r), c / (r * r))
    };
    Ok((centrifugal - k * r, axial, theta_dot))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalFlow {
    pub a: f64,
}

impl OdeSystem<6> for CylindricalFlow {
    fn rhs(&self, _t: f64, y: &[f64; 6]) -> Result<[f64; 6]> {
        let (pr_dot, px_dot, theta_dot) = meridian_rhs(y[0], y[2], y[4], self.a)?;
        Ok([y[3], theta_dot, y[5], pr_dot, 0.0, px_dot])
    }
}

impl Flow<6> for CylindricalFlow {
    fn energy(&self, y: &[f64; 6]) -> Result<f64> {
        CylState::from_array(y).energy(self.a)
    }
    fn aux(&self, y: &[f64; 6]) -> Result<AuxSD> {
        aux_sd_cyl(y[2], y[0].abs(), self.a)
    }
}

pub fn eom_cylindrical(state: &CylState, a: f64) -> Result<[f64; 6]> {
    CylindricalFlow { a }.rhs(0.0, &state.to_array())
}

/// Reduced flow on `(r, x, P_r, P_x)` at fixed angular momentum `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFlow {
    pub a: f64,
    pub c: f64,
}

impl OdeSystem<4> for ReducedFlow {
    fn rhs(&self, _t: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
        let (pr_dot, px_dot, _) = meridian_rhs(y[0], y[1], self.c, self.a)?;
        Ok([y[2], y[3], pr_dot, px_dot])
    }
}

impl Flow<4> for ReducedFlow {
    fn energy(&self, y: &[f64; 4]) -> Result<f64> {
        ReducedState::from_array(y).energy(self.a, self.c)
    }
    fn aux(&self, y: &[f64; 4]) -> Result<AuxSD> {
        aux_sd_cyl(y[1], y[0].abs(), self.a)
    }
}

pub fn eom_reduced(state: &ReducedState, a: f64, c: f64) -> Result<[f64; 4]> {
    ReducedFlow { a, c }.rhs(0.0, &state.to_array())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Collision,
    Escape,
    MaxSteps,
    /// Stopped by an event handler.
    Stopped,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Collision => "collision",
            Termination::Escape => "escape",
            Termination::MaxSteps => "max_steps",
            Termination::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub tolerances: Tolerances,
    /// Output spacing; `None` records every accepted step.
    pub sample_interval: Option<f64>,
    /// Terminate with `Escape` once `s` exceeds this value.
    pub escape_radius: f64,
    /// Terminate with `Collision` once `s - 2` drops below this value.
    pub collision_gap: f64,
    /// Keep the dense output of every step in the trajectory.
    pub keep_dense: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            sample_interval: None,
            escape_radius: 1e3,
            collision_gap: 1e-9,
            keep_dense: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub energy: Vec<f64>,
    pub termination: Termination,
    pub dense: Vec<DenseStep<N>>,
}

impl<const N: usize> Trajectory<N> {
    pub fn last_state(&self) -> &[f64; N] {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
    pub fn last_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Dense evaluation at `t`; requires `keep_dense`.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let idx = self.dense.partition_point(|d| d.t_end() < t);
        let step = self.dense.get(idx)?;
        (t >= step.t0).then(|| step.eval(t))
    }

    /// Largest relative deviation of the sampled energy from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy
            .iter()
            .map(|e| ((e - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max)
    }
}

/// Low-level driver: integrates `flow` and hands each accepted step to
/// `visit`, which may break to stop the run. Returns the termination reason
/// with the final time and state.
pub fn integrate_steps<F, V, const N: usize>(
    flow: &F,
    y0: [f64; N],
    t_span: (f64, f64),
    opts: &PropagationOptions,
    mut visit: V,
) -> Result<(Termination, f64, [f64; N])>
where
    F: Flow<N>,
    V: FnMut(&DenseStep<N>) -> ControlFlow<()>,
{
    let mut stepper = Dop853::new(flow, t_span.0, y0, t_span.1, opts.tolerances)?;
    loop {
        if stepper.is_done() {
            return Ok((Termination::Completed, stepper.t(), *stepper.y()));
        }
        let dense = match stepper.step() {
            Ok(d) => d,
            Err(Error::MaxStepsExceeded(_)) => {
                return Ok((Termination::MaxSteps, stepper.t(), *stepper.y()))
            }
            Err(Error::StepSizeUnderflow { t }) => {
                // Near a collision the step collapses before the gap threshold is met.
                let near = flow.aux(stepper.y()).map(|a| a.gap < 1e-6).unwrap_or(true);
                if near {
                    return Ok((Termination::Collision, stepper.t(), *stepper.y()));
                }
                return Err(Error::StepSizeUnderflow { t });
            }
            Err(e) => return Err(e),
        };
        let stop = visit(&dense).is_break();
        let aux = match flow.aux(stepper.y()) {
            Ok(aux) => aux,
            Err(Error::OnSegment { .. }) => {
                return Ok((Termination::Collision, stepper.t(), *stepper.y()))
            }
            Err(e) => return Err(e),
        };
        if stop {
            return Ok((Termination::Stopped, stepper.t(), *stepper.y()));
        }
        if aux.gap < opts.collision_gap {
            return Ok((Termination::Collision, stepper.t(), *stepper.y()));
        }
        if aux.s > opts.escape_radius {
            return Ok((Termination::Escape, stepper.t(), *stepper.y()));
        }
    }
}

/// Propagate `y0` over `t_span`, recording samples and their energy.
pub fn propagate<F: Flow<N>, const N: usize>(
    flow: &F,
    y0: [f64; N],
    t_span: (f64, f64),
    opts: &PropagationOptions,
) -> Result<Trajectory<N>> {
    let e0 = flow.energy(&y0)?;
    let mut traj = Trajectory {
        times: vec![t_span.0],
        states: vec![y0],
        energy: vec![e0],
        termination: Termination::Completed,
        dense: Vec::new(),
    };
    let mut next_sample = opts.sample_interval.map(|dt| (1usize, dt));
    let mut record_err = None;
    let (termination, t_final, y_final) = integrate_steps(flow, y0, t_span, opts, |step| {
        if opts.keep_dense {
            traj.dense.push(*step);
        }
        let mut push = |t: f64, y: [f64; N]| match flow.energy(&y) {
            Ok(e) => {
                traj.times.push(t);
                traj.states.push(y);
                traj.energy.push(e);
            }
            Err(e) => record_err = Some(e),
        };
        match next_sample.as_mut() {
            None => push(step.t_end(), step.end()),
            Some((k, dt)) => loop {
                let t = t_span.0 + *k as f64 * *dt;
                if t > step.t_end() || t > t_span.1 {
                    break;
                }
                push(t, step.eval(t));
                *k += 1;
            },
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = record_err {
        return Err(e);
    }
    if traj.last_time() < t_final {
        traj.times.push(t_final);
        traj.states.push(y_final);
        traj.energy.push(flow.energy(&y_final).unwrap_or(f64::NAN));
    }
    traj.termination = termination;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rest_state_energy() {
        let s = CartState::new([0.0, 0.0, 1.0], [0.0; 3]);
        assert_relative_eq!(
            s.energy(0.0).unwrap(),
            -2.0 * (1.0 + 2f64.sqrt()).ln(),
            epsilon = 1e-15
        );
        let d = eom_cartesian(&s, 0.0).unwrap();
        assert_eq!(&d[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(d[3], 0.0);
        assert_eq!(d[4], 0.0);
        assert!(d[5] < 0.0);
    }

    #[test]
    fn eta_zeta_swap() {
        let a = 0.2;
        let s = CartState::new([0.3, 0.7, -1.2], [0.1, -0.4, 0.9]);
        let t = CartState::new([0.3, -1.2, 0.7], [0.1, 0.9, -0.4]);
        let ds = eom_cartesian(&s, a).unwrap();
        let dt = eom_cartesian(&t, a).unwrap();
        assert_eq!([ds[0], ds[2], ds[1], ds[3], ds[5], ds[4]], dt);
    }

    #[test]
    fn chart_round_trip() {
        let s = CartState::new([0.3, -0.7, 1.2], [0.1, -0.4, 0.9]);
        let back = s.to_cyl().to_cart();
        for (u, v) in s.to_array().iter().zip(back.to_array()) {
            assert_relative_eq!(*u, v, epsilon = 1e-15);
        }
        let c = s.to_cyl();
        assert_relative_eq!(
            s.energy(0.1).unwrap(),
            c.energy(0.1).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn planar_cylindrical_motion() {
        let s = CylState {
            r: 1.5,
            theta: 0.3,
            x: 0.2,
            p_r: 0.1,
            p_theta: 0.0,
            p_x: -0.2,
        };
        let d = eom_cylindrical(&s, 0.25).unwrap();
        assert_eq!(d[1], 0.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn axis_singularity() {
        let s = CylState {
            r: 1e-12,
            theta: 0.0,
            x: 3.0,
            p_r: 0.0,
            p_theta: 0.5,
            p_x: 0.0,
        };
        assert!(matches!(
            eom_cylindrical(&s, 0.1),
            Err(Error::AxisSingularity { .. })
        ));
    }

    #[test]
    fn negative_radius_normalization() {
        let s = CylState {
            r: -0.5,
            theta: 0.25,
            x: 0.0,
            p_r: 0.3,
            p_theta: 0.0,
            p_x: 0.0,
        };
        let n = s.normalized();
        assert_eq!(n.r, 0.5);
        assert_eq!(n.p_r, -0.3);
        let (a, b) = (s.to_cart(), n.to_cart());
        for (u, v) in a.to_array().iter().zip(b.to_array()) {
            assert_relative_eq!(*u, v, epsilon = 1e-15);
        }
    }

    #[test]
    fn rest_drop_collides() {
        let flow = CartesianFlow { a: 0.0 };
        let y0 = CartState::new([0.0, 0.0, 1.0], [0.0; 3]).to_array();
        let traj = propagate(&flow, y0, (0.0, 50.0), &PropagationOptions::default()).unwrap();
        assert_eq!(traj.termination, Termination::Collision);
        assert!(traj.last_time() < 50.0);
    }

    #[test]
    fn reduced_fall_is_monotone() {
        let flow = ReducedFlow { a: 0.1, c: 0.0 };
        let y0 = [1.0, -0.1, 0.0, 0.0];
        let traj = propagate(&flow, y0, (0.0, 20.0), &PropagationOptions::default()).unwrap();
        assert_eq!(traj.termination, Termination::Collision);
        for w in traj.states.windows(2) {
            assert!(w[1][0] <= w[0][0]);
        }
    }

    #[test]
    fn escape_is_detected() {
        let flow = CartesianFlow { a: 0.0 };
        let y0 = CartState::new([0.0, 0.0, 5.0], [0.0, 0.0, 3.0]).to_array();
        let opts = PropagationOptions {
            escape_radius: 50.0,
            ..Default::default()
        };
        let traj = propagate(&flow, y0, (0.0, 1e3), &opts).unwrap();
        assert_eq!(traj.termination, Termination::Escape);
    }

    #[test]
    fn sampled_output_spacing() {
        let flow = ReducedFlow { a: 0.1, c: 1.0 };
        let opts = PropagationOptions {
            sample_interval: Some(0.5),
            ..Default::default()
        };
        let traj = propagate(&flow, [2.0, 0.0, 0.0, 0.3], (0.0, 10.0), &opts).unwrap();
        assert_eq!(traj.times.len(), 21);
        for (k, t) in traj.times.iter().enumerate() {
            assert_relative_eq!(*t, 0.5 * k as f64, epsilon = 1e-12);
        }
    }
}
