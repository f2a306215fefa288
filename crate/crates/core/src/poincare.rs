//! Poincaré sections of the reduced flow on `{x = 0, P_x > 0}`, the
//! first-return map and its fixed points.
//!
//! Section data (`r`, `P_r`, `c`, times) are given in the length unit of the
//! spec; the flow itself always runs in the scaled chart.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_steps, Flow, PropagationOptions, ReducedFlow, ReducedState, Termination,
};
use crate::error::{Error, Result};
use crate::integrator::{DenseStep, Tolerances};
use crate::par::{par_map, Parallelism};
use crate::potential::potential_cyl;
use crate::units::{validate_a, LengthUnit};

/// Largest `|x|` accepted at a reported crossing.
pub const CROSSING_TOLERANCE: f64 = 1e-10;
/// Central-difference step of the return-map Jacobian.
pub const FD_STEP: f64 = 1e-7;
/// Largest `|P^k(z) - z|` accepted for a fixed point.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 30;
/// Sub-intervals per step scanned for sign changes of `x`.
const SCAN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    #[serde(rename = "A")]
    pub a: f64,
    pub c: f64,
    pub h: f64,
    pub units: LengthUnit,
    pub seeds: Vec<[f64; 2]>,
    pub n_crossings: usize,
    pub tolerances: Tolerances,
    /// Integration time allowed per seed, in section units.
    pub max_time: f64,
    pub escape_radius: f64,
}

impl SectionSpec {
    pub fn new(a: f64, c: f64, h: f64, units: LengthUnit) -> Self {
        Self {
            a,
            c,
            h,
            units,
            seeds: Vec::new(),
            n_crossings: 100,
            tolerances: Tolerances::default(),
            max_time: 1e4,
            escape_radius: 1e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_a(self.a)?;
        self.tolerances.validate()?;
        if !(self.max_time > 0.0) {
            return Err(Error::DomainViolation(format!(
                "max_time must be positive, got {}",
                self.max_time
            )));
        }
        Ok(())
    }

    pub fn flow(&self) -> ReducedFlow {
        ReducedFlow {
            a: self.a,
            c: self.units.angular_to_scaled(self.c),
        }
    }

    fn options(&self) -> PropagationOptions {
        PropagationOptions {
            tolerances: self.tolerances,
            escape_radius: self.escape_radius,
            ..Default::default()
        }
    }

    /// `(r, x, P_r, P_x)` in section units to a scaled reduced state.
    pub fn to_scaled(&self, r: f64, x: f64, p_r: f64, p_x: f64) -> ReducedState {
        ReducedState::new(
            self.units.length_to_scaled(r),
            self.units.length_to_scaled(x),
            p_r,
            p_x,
        )
    }

    /// Energy of a point given in section units.
    pub fn energy_of(&self, r: f64, x: f64, p_r: f64, p_x: f64) -> Result<f64> {
        self.to_scaled(r, x, p_r, p_x).energy(self.a, self.flow().c)
    }
}

/// Scaled reduced state on the section through `(r, P_r)` at energy `spec.h`.
pub fn lift_seed(r: f64, p_r: f64, spec: &SectionSpec) -> Result<ReducedState> {
    let rs = spec.units.length_to_scaled(r);
    if !(rs > 0.0) {
        return Err(Error::DomainViolation(format!(
            "seed radius must be positive, got {r}"
        )));
    }
    let c = spec.flow().c;
    let u = potential_cyl(rs, 0.0, spec.a)?;
    let discriminant = 2.0 * (spec.h - u) - p_r * p_r - c * c / (rs * rs);
    if !(discriminant > 0.0) {
        return Err(Error::OutsideEnergyShell { discriminant });
    }
    Ok(ReducedState::new(rs, 0.0, p_r, discriminant.sqrt()))
}

/// One up-crossing of `x = 0`, in section units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub r: f64,
    pub p_r: f64,
    pub x: f64,
    pub p_x: f64,
    pub energy: f64,
}

/// Root of `x` on `[ta, tb]` with `x(ta) < 0 <= x(tb)`: Newton with `dx/dt = P_x`,
/// falling back to bisection whenever the iterate leaves the bracket.
fn refine_crossing(step: &DenseStep<4>, mut ta: f64, mut tb: f64) -> f64 {
    let mut t = tb;
    let mut best = (step.component(tb, 1).abs(), tb);
    for _ in 0..100 {
        let y = step.eval(t);
        let x = y[1];
        if x.abs() < best.0 {
            best = (x.abs(), t);
        }
        if x == 0.0 {
            return t;
        }
        if x < 0.0 {
            ta = t;
        } else {
            tb = t;
        }
        if tb - ta <= 4.0 * f64::EPSILON * tb.abs().max(1.0) {
            break;
        }
        let newton = t - x / y[3];
        t = if newton > ta && newton < tb && y[3] > 0.0 {
            newton
        } else {
            0.5 * (ta + tb)
        };
        if best.0 <= 1e-15 {
            break;
        }
    }
    best.1
}

/// Up-crossings of `x = 0` with `P_x > 0` inside one step.
fn crossings_in_step(step: &DenseStep<4>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut ta = step.t0;
    let mut xa = step.start()[1];
    for j in 1..=SCAN_POINTS {
        let tb = if j == SCAN_POINTS {
            step.t_end()
        } else {
            step.t0 + step.h * j as f64 / SCAN_POINTS as f64
        };
        let xb = step.component(tb, 1);
        if xa < 0.0 && xb >= 0.0 {
            let t = refine_crossing(step, ta, tb);
            if step.component(t, 3) > 0.0 {
                out.push(t);
            }
        }
        ta = tb;
        xa = xb;
    }
    out
}

/// Follow a scaled state and collect up to `n` section crossings within
/// `max_time` (section units).
pub fn crossings_from_state(
    state: &ReducedState,
    spec: &SectionSpec,
    n: usize,
) -> Result<(Vec<Crossing>, Termination)> {
    let flow = spec.flow();
    let units = spec.units;
    let t_end = units.time_to_scaled(spec.max_time);
    let mut out = Vec::with_capacity(n);
    let mut failure = None;
    let (termination, _, _) = integrate_steps(
        &flow,
        state.to_array(),
        (0.0, t_end),
        &spec.options(),
        |step| {
            if n == 0 {
                return ControlFlow::Break(());
            }
            for t in crossings_in_step(step) {
                let y = step.eval(t);
                let energy = match flow.energy(&y) {
                    Ok(e) => e,
                    Err(e) => {
                        failure = Some(e);
                        return ControlFlow::Break(());
                    }
                };
                out.push(Crossing {
                    t: units.time_from_scaled(t),
                    r: units.length_from_scaled(y[0]),
                    p_r: y[2],
                    x: units.length_from_scaled(y[1]),
                    p_x: y[3],
                    energy,
                });
                if out.len() >= n {
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let termination = match termination {
        Termination::Stopped => Termination::Completed,
        other => other,
    };
    Ok((out, termination))
}

/// Outcome of one seed of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Completed,
    Collision,
    Escape,
    MaxSteps,
    OutsideEnergyShell,
    Failed,
}

impl From<Termination> for SeedStatus {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Completed | Termination::Stopped => SeedStatus::Completed,
            Termination::Collision => SeedStatus::Collision,
            Termination::Escape => SeedStatus::Escape,
            Termination::MaxSteps => SeedStatus::MaxSteps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: [f64; 2],
    pub crossings: Vec<Crossing>,
    pub status: SeedStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareSection {
    pub spec: SectionSpec,
    pub seeds: Vec<SeedResult>,
}

#[derive(Serialize)]
struct SpecJson<'a> {
    #[serde(rename = "A")]
    a: f64,
    c: f64,
    h: f64,
    units: LengthUnit,
    tols: &'a Tolerances,
    n_crossings: usize,
    max_time: f64,
}

#[derive(Serialize)]
struct SeedJson {
    seed: [f64; 2],
    crossings: Vec<[f64; 2]>,
    termination: SeedStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

#[derive(Serialize)]
struct SectionJson<'a> {
    spec: SpecJson<'a>,
    seeds: Vec<SeedJson>,
}

impl PoincareSection {
    fn document(&self) -> SectionJson<'_> {
        let s = &self.spec;
        SectionJson {
            spec: SpecJson {
                a: s.a,
                c: s.c,
                h: s.h,
                units: s.units,
                tols: &s.tolerances,
                n_crossings: s.n_crossings,
                max_time: s.max_time,
            },
            seeds: self
                .seeds
                .iter()
                .map(|r| SeedJson {
                    seed: r.seed,
                    crossings: r.crossings.iter().map(|c| [c.r, c.p_r]).collect(),
                    termination: r.status,
                    message: r.message.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.document()).expect("section data is serializable")
    }

    /// Section JSON with keys in schema order.
    pub fn write_json<W: std::io::Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer(w, &self.document())
    }

    pub fn all_crossings(&self) -> impl Iterator<Item = &Crossing> {
        self.seeds.iter().flat_map(|s| s.crossings.iter())
    }
}

fn run_seed(seed: [f64; 2], spec: &SectionSpec) -> SeedResult {
    let failed = |status, e: Error| SeedResult {
        seed,
        crossings: Vec::new(),
        status,
        message: Some(e.to_string()),
    };
    let state = match lift_seed(seed[0], seed[1], spec) {
        Ok(s) => s,
        Err(e @ Error::OutsideEnergyShell { .. }) => {
            return failed(SeedStatus::OutsideEnergyShell, e)
        }
        Err(e) => return failed(SeedStatus::Failed, e),
    };
    match crossings_from_state(&state, spec, spec.n_crossings) {
        Ok((crossings, t)) => SeedResult {
            seed,
            crossings,
            status: t.into(),
            message: None,
        },
        Err(e) => failed(SeedStatus::Failed, e),
    }
}

/// Section for every seed of `spec`, in seed order.
pub fn compute_section(spec: &SectionSpec, policy: Parallelism) -> Result<PoincareSection> {
    spec.validate()?;
    let seeds = par_map(&spec.seeds, policy, |&seed| run_seed(seed, spec));
    Ok(PoincareSection {
        spec: spec.clone(),
        seeds,
    })
}

/// `k`-th return of `(r, P_r)` with the accumulated return time (section units).
pub fn return_map_k(z: [f64; 2], k: usize, spec: &SectionSpec) -> Result<([f64; 2], f64)> {
    let mut z = z;
    let mut time = 0.0;
    for _ in 0..k {
        let state = lift_seed(z[0], z[1], spec)?;
        let (crossings, termination) = crossings_from_state(&state, spec, 1)?;
        let Some(c) = crossings.first() else {
            return Err(Error::NoReturn(format!(
                "no return from ({}, {}), termination {}",
                z[0],
                z[1],
                termination.as_str()
            )));
        };
        z = [c.r, c.p_r];
        time += c.t;
    }
    Ok((z, time))
}

pub fn return_map(z: [f64; 2], spec: &SectionSpec) -> Result<[f64; 2]> {
    Ok(return_map_k(z, 1, spec)?.0)
}

/// Central-difference Jacobian of `P^k` at `z`.
pub fn return_map_jacobian(z: [f64; 2], k: usize, spec: &SectionSpec) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut zp = z;
        let mut zm = z;
        zp[j] += FD_STEP;
        zm[j] -= FD_STEP;
        let (fp, _) = return_map_k(zp, k, spec)?;
        let (fm, _) = return_map_k(zm, k, spec)?;
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    Elliptic,
    Hyperbolic,
}

impl FixedPointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointKind::Elliptic => "elliptic",
            FixedPointKind::Hyperbolic => "hyperbolic",
        }
    }
}

/// Multipliers `[(re, im); 2]` of a 2x2 matrix, the leading one first, and its kind.
pub fn classify(jac: &[[f64; 2]; 2]) -> ([[f64; 2]; 2], FixedPointKind) {
    let half_trace = 0.5 * (jac[0][0] + jac[1][1]);
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let disc = half_trace * half_trace - det;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        (
            [[half_trace, im], [half_trace, -im]],
            FixedPointKind::Elliptic,
        )
    } else {
        let root = disc.sqrt();
        let (l1, l2) = if half_trace >= 0.0 {
            (half_trace + root, half_trace - root)
        } else {
            (half_trace - root, half_trace + root)
        };
        ([[l1, 0.0], [l2, 0.0]], FixedPointKind::Hyperbolic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    #[serde(rename = "A")]
    pub a: f64,
    pub c: f64,
    pub h: f64,
    pub k: usize,
    pub r: f64,
    pub p_r: f64,
    pub kind: FixedPointKind,
    pub multipliers: [[f64; 2]; 2],
    /// `|P^k(z) - z|`.
    pub residual: f64,
    /// Time to the `k`-th return (section units).
    pub return_time: f64,
    pub iterations: usize,
}

impl FixedPoint {
    pub const CSV_HEADER: &'static str = "A,c,h,k,r,P_r,kind,re_lambda,im_lambda,residual";

    pub fn csv_row(&self) -> String {
        use crate::io::num;
        [
            num(self.a),
            num(self.c),
            num(self.h),
            self.k.to_string(),
            num(self.r),
            num(self.p_r),
            self.kind.as_str().to_string(),
            num(self.multipliers[0][0]),
            num(self.multipliers[0][1]),
            num(self.residual),
        ]
        .join(",")
    }

    /// Product of the two multipliers.
    pub fn multiplier_product(&self) -> f64 {
        let [[a, b], [c, d]] = self.multipliers;
        a * c - b * d
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Newton iteration on `P^k(z) - z` from `guess`, with a backtracking line search.
pub fn find_fixed_point(guess: [f64; 2], spec: &SectionSpec, k: usize) -> Result<FixedPoint> {
    spec.validate()?;
    if k == 0 {
        return Err(Error::DomainViolation("period k must be at least 1".into()));
    }
    let defect = |z: [f64; 2]| -> Result<([f64; 2], f64)> {
        let (pz, time) = return_map_k(z, k, spec)?;
        Ok(([pz[0] - z[0], pz[1] - z[1]], time))
    };
    let mut z = guess;
    let (mut f, mut time) = defect(z)?;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER && norm(f) > 1e-2 * FIXED_POINT_TOLERANCE {
        iterations += 1;
        let j = return_map_jacobian(z, k, spec)?;
        let m = [[j[0][0] - 1.0, j[0][1]], [j[1][0], j[1][1] - 1.0]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NewtonDiverged(format!(
                "singular Newton matrix at {z:?}"
            )));
        }
        let step = [
            -(m[1][1] * f[0] - m[0][1] * f[1]) / det,
            -(-m[1][0] * f[0] + m[0][0] * f[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = [z[0] + lambda * step[0], z[1] + lambda * step[1]];
            if let Ok((ft, tt)) = defect(trial) {
                if norm(ft) < norm(f) {
                    accepted = Some((trial, ft, tt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((zn, fn_, tn)) => {
                let moved = norm([zn[0] - z[0], zn[1] - z[1]]);
                (z, f, time) = (zn, fn_, tn);
                if moved <= 1e-14 {
                    break;
                }
            }
            // Integration noise floor.
            None => break,
        }
    }
    let residual = norm(f);
    if residual > FIXED_POINT_TOLERANCE {
        return Err(Error::NewtonDiverged(format!(
            "residual {residual:e} after {iterations} iterations from {guess:?}"
        )));
    }
    let (multipliers, kind) = classify(&return_map_jacobian(z, k, spec)?);
    Ok(FixedPoint {
        a: spec.a,
        c: spec.c,
        h: spec.h,
        k,
        r: z[0],
        p_r: z[1],
        kind,
        multipliers,
        residual,
        return_time: time,
        iterations,
    })
}

/// Refine several guesses independently, in input order.
pub fn find_fixed_points(
    guesses: &[[f64; 2]],
    spec: &SectionSpec,
    k: usize,
    policy: Parallelism,
) -> Vec<Result<FixedPoint>> {
    par_map(guesses, policy, |&g| find_fixed_point(g, spec, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec_a0() -> SectionSpec {
        let mut spec = SectionSpec::new(0.0, 1.0, 0.0, LengthUnit::L);
        spec.h = spec.energy_of(2.0, 0.0, 0.0, 0.3).unwrap();
        spec
    }

    #[test]
    fn lift_reproduces_energy() {
        let spec = spec_a0();
        let s = lift_seed(2.0, 0.0, &spec).unwrap();
        assert_relative_eq!(s.p_x, 0.3, epsilon = 1e-14);
        assert_relative_eq!(s.energy(0.0, 1.0).unwrap(), spec.h, epsilon = 1e-14);
    }

    #[test]
    fn outside_shell() {
        let spec = spec_a0();
        assert!(matches!(
            lift_seed(2.0, 5.0, &spec),
            Err(Error::OutsideEnergyShell { .. })
        ));
    }

    #[test]
    fn crossings_lie_on_section() {
        let mut spec = spec_a0();
        spec.seeds = vec![[2.0, 0.0], [1.8, 0.1]];
        spec.n_crossings = 20;
        let sec = compute_section(&spec, Parallelism::Sequential).unwrap();
        for seed in &sec.seeds {
            assert_eq!(seed.status, SeedStatus::Completed);
            assert_eq!(seed.crossings.len(), 20);
            for c in &seed.crossings {
                assert!(c.x.abs() <= CROSSING_TOLERANCE);
                assert!(c.p_x > 0.0);
                assert!((c.energy - spec.h).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn classification() {
        let (m, k) = classify(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(k, FixedPointKind::Elliptic);
        assert_eq!(m[0], [0.0, 1.0]);
        let (m, k) = classify(&[[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!(k, FixedPointKind::Hyperbolic);
        assert_eq!(m, [[2.0, 0.0], [0.5, 0.0]]);
    }

    #[test]
    fn two_l_units_match_l_units() {
        let spec_l = spec_a0();
        let mut spec_2l = spec_l.clone();
        spec_2l.units = LengthUnit::TwoL;
        spec_2l.c = 0.5;
        let zl = return_map([2.0, 0.0], &spec_l).unwrap();
        let z2 = return_map([1.0, 0.0], &spec_2l).unwrap();
        assert_relative_eq!(zl[0], 2.0 * z2[0], epsilon = 1e-12);
        assert_relative_eq!(zl[1], z2[1], epsilon = 1e-12);
    }
}
