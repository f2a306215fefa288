//! `segdyn`: command-line front end.
//!
//! Every subcommand accepts `--config FILE` (a JSON run config with `model`,
//! `command` and `output` blocks); flags given on the command line override
//! the file. With `--output PATH` the resolved config is echoed to
//! `PATH.config.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use segdyn::circular::{family, solve_circular, solve_circular_for_c, CircularOrbit};
use segdyn::dynamics::{
    propagate, CartState, CartesianFlow, CylState, CylindricalFlow, PropagationOptions,
    ReducedFlow, ReducedState, Trajectory,
};
use segdyn::io::{num, row, write_cartesian, write_cylindrical};
use segdyn::poincare::{compute_section, find_fixed_points, SectionSpec};
use segdyn::potential::{aux_sd, force_scaled, potential_physical, potential_sd};
use segdyn::reconstruction::{
    commensurability, reconstruct, DEFAULT_COMMENSURABILITY_TOL, DEFAULT_MAX_DEN,
};
use segdyn::units::{map_state, Direction};
use segdyn::{Error, LengthUnit, Parallelism, ScaledParams, SegmentParams, Tolerances};

const TOLERANCE_HELP: &str = "\
Tolerance defaults:
  --abs-tol 1e-12, --rel-tol 1e-12 (accepted range [1e-14, 1e-3]), --max-steps 10000000
  collision when s - 2 < 1e-9, escape when s > --escape-radius (1e3)
  on-segment evaluation threshold: s - 2 < 1e-12
  section crossings: |x| <= 1e-10; return-map Jacobian: central differences, step 1e-7
  fixed points: |P^k(z) - z| <= 1e-9, at most 30 Newton iterations
  circular orbits: normalized residuals <= 1e-12, at most 50 Newton iterations
  commensurability: denominators <= 64, tolerance 1e-9";

#[derive(Parser)]
#[command(
    name = "segdyn",
    version,
    about = "Dynamics around a segment with linear mass density"
)]
struct Cli {
    /// JSON run config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for seed and family sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output file (stdout if omitted). The resolved config is written next to it.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Potential and force at a point.
    #[command(after_help = TOLERANCE_HELP)]
    Potential(Resolve<PotentialArgs>),
    /// Circular orbit by s* or by angular momentum, or a family sweep.
    #[command(after_help = TOLERANCE_HELP)]
    Circular(Resolve<CircularArgs>),
    /// Propagate an initial state and write the trajectory.
    #[command(after_help = TOLERANCE_HELP)]
    Propagate(Resolve<PropagateArgs>),
    /// Poincaré section on x = 0, P_x > 0 (JSON).
    #[command(after_help = TOLERANCE_HELP)]
    Poincare(Resolve<PoincareArgs>),
    /// Refine fixed points of the k-th return map.
    #[command(after_help = TOLERANCE_HELP)]
    Fixpoint(Resolve<FixpointArgs>),
    /// Rebuild the 3-D orbit of a reduced trajectory.
    #[command(after_help = TOLERANCE_HELP)]
    Reconstruct(Resolve<ReconstructArgs>),
}

#[derive(Args)]
struct Resolve<T: Args> {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    args: T,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct ModelArgs {
    /// Dimensionless slope A in [0, 1/3).
    #[arg(long = "A")]
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    /// Gravitational constant (physical model).
    #[arg(long = "G")]
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    /// Segment mass (physical model).
    #[arg(long = "M")]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    /// Half-length of the segment (physical model).
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    /// Density slope (physical model).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Length unit of section data: L or 2L [default: L].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    units: Option<LengthUnit>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Copy)]
struct TolArgs {
    /// Absolute tolerance [default: 1e-12].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<f64>,
    /// Relative tolerance [default: 1e-12].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    /// Step budget [default: 10000000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<usize>,
    /// Escape threshold on s [default: 1000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    escape_radius: Option<f64>,
}

impl TolArgs {
    fn tolerances(&self) -> anyhow::Result<Tolerances> {
        let d = Tolerances::default();
        let tol = Tolerances {
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        };
        tol.validate()?;
        Ok(tol)
    }

    fn escape_radius(&self) -> f64 {
        self.escape_radius.unwrap_or(1e3)
    }
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct PotentialArgs {
    /// Point xi,eta,zeta (scaled), or x,y,z in the center-of-mass frame with --physical.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    at: Option<String>,
    /// Evaluate the physical potential V; needs --G --M --L --alpha.
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    physical: bool,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct CircularArgs {
    /// Family parameter s* (> 2).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    /// Angular momentum |c|; solved for s*.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// Starting s* for the by-c solve [default: homogeneous root].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<f64>,
    /// Family sweep smin:smax:n.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<String>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
struct PropagateArgs {
    /// Chart of --state: cartesian (6 values), cylindrical (6) or reduced (4, with --c).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    chart: Option<String>,
    /// Comma-separated initial state in scaled units.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    /// Angular momentum for the reduced chart.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// Start on the circular orbit with this s*; --t-end defaults to its period.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    circular_s: Option<f64>,
    /// End time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    /// Output spacing [default: every accepted step].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    tol: TolArgs,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
struct SectionArgs {
    /// Angular momentum c (in --units).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// Energy level h.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    /// Reference point r,x,P_r,P_x whose energy sets h.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    /// Integration time allowed per seed [default: 10000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_time: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    tol: TolArgs,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
struct PoincareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    section: SectionArgs,
    /// Seed grid rmin:rmax:n,prmin:prmax:m.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_grid: Option<String>,
    /// Explicit seeds r,P_r;r,P_r;...
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<String>,
    /// Crossings per seed [default: 100].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    crossings: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
struct FixpointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    section: SectionArgs,
    /// Initial guesses r,P_r;r,P_r;...
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    guess: Option<String>,
    /// Period of the fixed point [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
struct ReconstructArgs {
    /// Reduced initial state r,x,P_r,P_x (scaled units).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    /// Angular momentum c.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// Initial azimuth [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<f64>,
    /// End time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    /// Output spacing [default: every accepted step].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<f64>,
    /// Reduced period; enables the rotation-number report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    tol: TolArgs,
}

/// Marks errors caused by invalid input (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
    }
    3
}

fn parse_list(s: &str, n: Option<usize>, what: &str) -> anyhow::Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("{what}: {e} in '{s}'")))?;
    if let Some(n) = n {
        if vals.len() != n {
            return Err(usage(format!(
                "{what}: expected {n} values, got {}",
                vals.len()
            )));
        }
    }
    Ok(vals)
}

fn parse_pairs(s: &str, what: &str) -> anyhow::Result<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_list(t, Some(2), what).map(|v| [v[0], v[1]]))
        .collect()
}

/// `lo:hi:n` to `n` evenly spaced values.
fn parse_range(s: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("{what}: expected lo:hi:n, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    })
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<[f64; 2]>> {
    let (r, pr) = s.split_once(',').ok_or_else(|| {
        usage(format!(
            "--seed-grid: expected rmin:rmax:n,prmin:prmax:m, got '{s}'"
        ))
    })?;
    let rs = parse_range(r, "--seed-grid")?;
    let prs = parse_range(pr, "--seed-grid")?;
    Ok(rs
        .iter()
        .flat_map(|&r| prs.iter().map(move |&p| [r, p]))
        .collect())
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> anyhow::Result<T> {
    v.clone().ok_or_else(|| usage(format!("missing {flag}")))
}

/// Overlay the command-line object `flags` on `base`.
fn merge(base: Value, flags: Value) -> Value {
    match (base, flags) {
        (Value::Object(mut b), Value::Object(f)) => {
            for (k, v) in f {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, f) => f,
    }
}

fn resolve<T: Serialize + DeserializeOwned>(
    config: Option<&Value>,
    flags: &T,
    block: &str,
) -> anyhow::Result<T> {
    let flags = serde_json::to_value(flags)?;
    let base = config
        .and_then(|c| c.get(block))
        .cloned()
        .unwrap_or_else(|| Value::Object(Map::new()));
    serde_json::from_value(merge(base, flags))
        .map_err(|e| usage(format!("config block '{block}': {e}")))
}

impl ModelArgs {
    fn physical(&self) -> anyhow::Result<Option<SegmentParams>> {
        let given = [self.g, self.m, self.l, self.alpha];
        if given.iter().all(Option::is_none) {
            return Ok(None);
        }
        match given {
            [Some(g), Some(m), Some(l), Some(alpha)] => {
                Ok(Some(SegmentParams::new(alpha, m, l, g)?))
            }
            _ => Err(usage("physical model needs all of --G --M --L --alpha")),
        }
    }

    fn scaled(&self) -> anyhow::Result<ScaledParams> {
        match (self.a, self.physical()?) {
            (Some(_), Some(_)) => Err(usage(
                "give either --A or the physical parameters, not both",
            )),
            (None, None) => Err(usage("missing model: --A or --G --M --L --alpha")),
            (Some(a), None) => Ok(ScaledParams::dimensionless(a)?),
            (None, Some(p)) => Ok(p.to_scaled()),
        }
    }

    fn a(&self) -> anyhow::Result<f64> {
        Ok(self.scaled()?.a)
    }

    fn units(&self) -> LengthUnit {
        self.units.unwrap_or_default()
    }
}

struct Ctx {
    output: Option<PathBuf>,
    policy: Parallelism,
}

impl Ctx {
    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn echo(
        &self,
        subcommand: &str,
        model: &ModelArgs,
        command: &impl Serialize,
        jobs: usize,
    ) -> anyhow::Result<()> {
        let Some(path) = &self.output else {
            return Ok(());
        };
        let echo = json!({
            "subcommand": subcommand,
            "model": model,
            "command": command,
            "output": { "path": path },
            "jobs": jobs,
        });
        let mut name = path.as_os_str().to_owned();
        name.push(".config.json");
        let target = PathBuf::from(name);
        std::fs::write(&target, serde_json::to_string_pretty(&echo)? + "\n")
            .with_context(|| format!("writing {}", target.display()))?;
        Ok(())
    }
}

fn load_config(path: &Path) -> anyhow::Result<Value> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run_potential(ctx: &Ctx, model: &ModelArgs, args: &PotentialArgs) -> anyhow::Result<()> {
    let at = parse_list(&required(&args.at, "--at")?, Some(3), "--at")?;
    let q = [at[0], at[1], at[2]];
    let mut w = ctx.writer()?;
    if args.physical {
        let params = model
            .physical()?
            .ok_or_else(|| usage("--physical needs --G --M --L --alpha"))?;
        if model.a.is_some() {
            return Err(usage("--physical does not take --A"));
        }
        let scaled = params.to_scaled();
        let v = potential_physical(q, &params)?;
        let (mapped, _) = map_state(
            &CartState::new(q, [0.0; 3]),
            0.0,
            &scaled,
            Direction::ToScaled,
        );
        let f = force_scaled(mapped.position(), scaled.a)?;
        let k = scaled.momentum_scale.powi(2) / scaled.length_scale;
        let flip = if scaled.reflected { -1.0 } else { 1.0 };
        writeln!(w, "x,y,z,V,F_x,F_y,F_z")?;
        writeln!(
            w,
            "{}",
            row(&[q[0], q[1], q[2], v, flip * k * f[0], k * f[1], k * f[2]])
        )?;
    } else {
        let a = model.a()?;
        let aux = aux_sd(q, a)?;
        let f = force_scaled(q, a)?;
        writeln!(w, "xi,eta,zeta,s,d,U,F_xi,F_eta,F_zeta")?;
        writeln!(
            w,
            "{}",
            row(&[
                q[0],
                q[1],
                q[2],
                aux.s,
                aux.d,
                potential_sd(&aux, a),
                f[0],
                f[1],
                f[2]
            ])
        )?;
    }
    w.flush()?;
    Ok(())
}

fn run_circular(ctx: &Ctx, model: &ModelArgs, args: &CircularArgs) -> anyhow::Result<()> {
    let a = model.a()?;
    let orbits: Vec<CircularOrbit> = match (args.s, args.c, &args.sweep) {
        (Some(s), None, None) => vec![solve_circular(s, a)?],
        (None, Some(c), None) => vec![solve_circular_for_c(c, a, args.seed)?],
        (None, None, Some(sweep)) => family(&parse_range(sweep, "--sweep")?, a, ctx.policy)
            .into_iter()
            .collect::<Result<_, _>>()?,
        _ => return Err(usage("give exactly one of --s, --c or --sweep")),
    };
    let mut w = ctx.writer()?;
    writeln!(w, "{}", CircularOrbit::CSV_HEADER)?;
    for o in &orbits {
        writeln!(w, "{}", o.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn options(tol: &TolArgs, stride: Option<f64>) -> anyhow::Result<PropagationOptions> {
    if let Some(s) = stride {
        if !(s > 0.0) {
            return Err(usage(format!("--stride must be positive, got {s}")));
        }
    }
    Ok(PropagationOptions {
        tolerances: tol.tolerances()?,
        sample_interval: stride,
        escape_radius: tol.escape_radius(),
        ..Default::default()
    })
}

fn report(traj_end: &str, drift: f64) {
    eprintln!("termination: {traj_end}");
    eprintln!("relative energy drift: {}", num(drift));
}

fn write_reduced(w: &mut dyn Write, traj: &Trajectory<4>) -> io::Result<()> {
    writeln!(w, "t,r,x,P_r,P_x,energy")?;
    for ((t, y), e) in traj.times.iter().zip(&traj.states).zip(&traj.energy) {
        writeln!(w, "{}", row(&[*t, y[0], y[1], y[2], y[3], *e]))?;
    }
    Ok(())
}

fn run_propagate(ctx: &Ctx, model: &ModelArgs, args: &PropagateArgs) -> anyhow::Result<()> {
    let a = model.a()?;
    let opts = options(&args.tol, args.stride)?;
    let mut w = ctx.writer()?;
    if let Some(s) = args.circular_s {
        if args.state.is_some() {
            return Err(usage("--circular-s and --state are exclusive"));
        }
        let orbit = solve_circular(s, a)?;
        let start = CylState {
            r: orbit.r,
            theta: 0.0,
            x: orbit.x,
            p_r: 0.0,
            p_theta: orbit.c,
            p_x: 0.0,
        };
        let t_end = args.t_end.unwrap_or(orbit.period);
        let traj = propagate(
            &CylindricalFlow { a },
            start.to_array(),
            (0.0, t_end),
            &opts,
        )?;
        write_cylindrical(&mut w, &traj)?;
        w.flush()?;
        let end = CylState::from_array(traj.last_state()).to_cart();
        let closure = start
            .to_cart()
            .to_array()
            .iter()
            .zip(end.to_array())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        report(traj.termination.as_str(), traj.energy_drift());
        eprintln!("period: {}", num(orbit.period));
        eprintln!(
            "closure after t={}: {}",
            num(traj.last_time()),
            num(closure)
        );
        return Ok(());
    }
    let state = required(&args.state, "--state or --circular-s")?;
    let t_end = required(&args.t_end, "--t-end")?;
    let chart = args.chart.as_deref().unwrap_or("cartesian");
    match chart {
        "cartesian" => {
            let y = parse_list(&state, Some(6), "--state")?;
            let y0 = CartState::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]).to_array();
            let traj = propagate(&CartesianFlow { a }, y0, (0.0, t_end), &opts)?;
            write_cartesian(&mut w, &traj)?;
            report(traj.termination.as_str(), traj.energy_drift());
        }
        "cylindrical" => {
            let y = parse_list(&state, Some(6), "--state")?;
            let y0 = [y[0], y[1], y[2], y[3], y[4], y[5]];
            let traj = propagate(&CylindricalFlow { a }, y0, (0.0, t_end), &opts)?;
            write_cylindrical(&mut w, &traj)?;
            report(traj.termination.as_str(), traj.energy_drift());
        }
        "reduced" => {
            let y = parse_list(&state, Some(4), "--state")?;
            let c = required(&args.c, "--c")?;
            let y0 = ReducedState::new(y[0], y[1], y[2], y[3]).to_array();
            let traj = propagate(&ReducedFlow { a, c }, y0, (0.0, t_end), &opts)?;
            write_reduced(&mut w, &traj)?;
            report(traj.termination.as_str(), traj.energy_drift());
        }
        other => return Err(usage(format!("unknown chart '{other}'"))),
    }
    w.flush()?;
    Ok(())
}

fn section_spec(model: &ModelArgs, args: &SectionArgs) -> anyhow::Result<SectionSpec> {
    let a = model.a()?;
    let c = required(&args.c, "--c")?;
    let mut spec = SectionSpec::new(a, c, 0.0, model.units());
    spec.tolerances = args.tol.tolerances()?;
    spec.escape_radius = args.tol.escape_radius();
    if let Some(t) = args.max_time {
        spec.max_time = t;
    }
    spec.h = match (args.h, &args.reference) {
        (Some(h), None) => h,
        (None, Some(r)) => {
            let v = parse_list(r, Some(4), "--reference")?;
            spec.energy_of(v[0], v[1], v[2], v[3])?
        }
        _ => return Err(usage("give exactly one of --h or --reference")),
    };
    Ok(spec)
}

fn run_poincare(ctx: &Ctx, model: &ModelArgs, args: &PoincareArgs) -> anyhow::Result<()> {
    let mut spec = section_spec(model, &args.section)?;
    spec.seeds = match (&args.seed_grid, &args.seeds) {
        (Some(g), None) => parse_grid(g)?,
        (None, Some(s)) => parse_pairs(s, "--seeds")?,
        _ => return Err(usage("give exactly one of --seed-grid or --seeds")),
    };
    if let Some(n) = args.crossings {
        spec.n_crossings = n;
    }
    let section = compute_section(&spec, ctx.policy)?;
    let mut w = ctx.writer()?;
    section.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run_fixpoint(ctx: &Ctx, model: &ModelArgs, args: &FixpointArgs) -> anyhow::Result<()> {
    let spec = section_spec(model, &args.section)?;
    let guesses = parse_pairs(&required(&args.guess, "--guess")?, "--guess")?;
    if guesses.is_empty() {
        return Err(usage("--guess is empty"));
    }
    let k = args.k.unwrap_or(1);
    let results = find_fixed_points(&guesses, &spec, k, ctx.policy);
    let mut w = ctx.writer()?;
    writeln!(w, "{}", segdyn::poincare::FixedPoint::CSV_HEADER)?;
    let mut first_err = None;
    for (g, r) in guesses.iter().zip(results) {
        match r {
            Ok(fp) => writeln!(w, "{}", fp.csv_row())?,
            Err(e) => {
                eprintln!("guess ({}, {}): {e}", num(g[0]), num(g[1]));
                first_err.get_or_insert(e);
            }
        }
    }
    w.flush()?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run_reconstruct(ctx: &Ctx, model: &ModelArgs, args: &ReconstructArgs) -> anyhow::Result<()> {
    let a = model.a()?;
    let y = parse_list(&required(&args.state, "--state")?, Some(4), "--state")?;
    let c = required(&args.c, "--c")?;
    let t_end = required(&args.t_end, "--t-end")?;
    let mut opts = options(&args.tol, args.stride)?;
    opts.keep_dense = true;
    let traj = propagate(
        &ReducedFlow { a, c },
        [y[0], y[1], y[2], y[3]],
        (0.0, t_end),
        &opts,
    )?;
    let orbit = reconstruct(&traj, c, args.theta0.unwrap_or(0.0))?;
    let mut w = ctx.writer()?;
    orbit.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("termination: {}", traj.termination.as_str());
    if let Some(period) = args.period {
        let rho = orbit.rotation_number(0.0, period)?;
        let verdict = commensurability(
            period,
            rho * std::f64::consts::TAU,
            DEFAULT_COMMENSURABILITY_TOL,
            DEFAULT_MAX_DEN,
        )?;
        eprintln!("rotation number: {}", num(rho));
        eprintln!("commensurability: {}", serde_json::to_string(&verdict)?);
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    if let Some(cfg) = &config {
        if !cfg.is_object() {
            bail!(usage("config must be a JSON object"));
        }
    }
    let output = cli.output.clone().or_else(|| {
        config
            .as_ref()
            .and_then(|c| c.pointer("/output/path"))
            .and_then(Value::as_str)
            .map(PathBuf::from)
    });
    let jobs = config
        .as_ref()
        .and_then(|c| c.get("jobs"))
        .and_then(Value::as_u64)
        .filter(|_| cli.jobs == 1)
        .map(|j| j as usize)
        .unwrap_or(cli.jobs);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let ctx = Ctx {
        output,
        policy: Parallelism::from_jobs(jobs),
    };
    let cfg = config.as_ref();
    macro_rules! dispatch {
        ($name:literal, $r:expr, $run:ident) => {{
            if let Some(sub) = cfg
                .and_then(|c| c.get("subcommand"))
                .and_then(Value::as_str)
            {
                if sub != $name {
                    return Err(usage(format!("config is for '{sub}', not '{}'", $name)));
                }
            }
            let model: ModelArgs = resolve(cfg, &$r.model, "model")?;
            let args = resolve(cfg, &$r.args, "command")?;
            ctx.echo($name, &model, &args, jobs)?;
            $run(&ctx, &model, &args)
        }};
    }
    match &cli.command {
        Command::Potential(r) => dispatch!("potential", r, run_potential),
        Command::Circular(r) => dispatch!("circular", r, run_circular),
        Command::Propagate(r) => dispatch!("propagate", r, run_propagate),
        Command::Poincare(r) => dispatch!("poincare", r, run_poincare),
        Command::Fixpoint(r) => dispatch!("fixpoint", r, run_fixpoint),
        Command::Reconstruct(r) => dispatch!("reconstruct", r, run_reconstruct),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
