//! CSV formatting. Every float is written with 17 significant digits so that
//! outputs round-trip exactly.

use std::io::{self, Write};

use crate::dynamics::{CartState, CylState, Trajectory};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-joined numbers.
pub fn row(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

pub const CYLINDRICAL_HEADER: &str = "t,r,theta,x,P_r,P_theta,P_x,energy";
pub const CARTESIAN_HEADER: &str = "t,xi,eta,zeta,p_xi,p_eta,p_zeta,energy";

/// Trajectory of the cylindrical flow. Negative radii (meridian motion through
/// the axis) are folded back before writing.
pub fn write_cylindrical<W: Write>(w: &mut W, traj: &Trajectory<6>) -> io::Result<()> {
    writeln!(w, "{CYLINDRICAL_HEADER}")?;
    for ((t, y), e) in traj.times.iter().zip(&traj.states).zip(&traj.energy) {
        let c = CylState::from_array(y).normalized();
        let mut vals = vec![*t];
        vals.extend(c.to_array());
        vals.push(*e);
        writeln!(w, "{}", row(&vals))?;
    }
    Ok(())
}

pub fn write_cartesian<W: Write>(w: &mut W, traj: &Trajectory<6>) -> io::Result<()> {
    writeln!(w, "{CARTESIAN_HEADER}")?;
    for ((t, y), e) in traj.times.iter().zip(&traj.states).zip(&traj.energy) {
        let mut vals = vec![*t];
        vals.extend(CartState::from_array(y).to_array());
        vals.push(*e);
        writeln!(w, "{}", row(&vals))?;
    }
    Ok(())
}
