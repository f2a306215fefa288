//! Adaptive Gauss-Kronrod quadrature and the line-integral potential oracle.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (non-negative half) with Kronrod weights, and the
// embedded 7-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod estimate and |Kronrod - Gauss| on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Kronrod integration over the given breakpoints.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below `tol` or `max_panels` is reached. Each initial
/// interval between breakpoints is split into `initial_panels` pieces.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    initial_panels: usize,
    tol: f64,
    max_panels: usize,
) -> Quadrature {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        let n = initial_panels.max(1);
        let step = (w[1] - w[0]) / n as f64;
        for i in 0..n {
            let a = w[0] + step * i as f64;
            let b = if i + 1 == n { w[1] } else { a + step };
            let (value, error) = gk15(&f, a, b);
            evaluations += 15;
            heap.push(Panel { a, b, value, error });
        }
    }
    let total_error = |h: &BinaryHeap<Panel>| h.iter().map(|p| p.error).sum::<f64>();
    while heap.len() < max_panels && total_error(&heap) > tol {
        let worst = heap.pop().expect("non-empty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&f, a, b);
            evaluations += 15;
            heap.push(Panel { a, b, value, error });
        }
    }
    // Sum smallest contributions first.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.value.abs().total_cmp(&q.value.abs()));
    Quadrature {
        value: panels.iter().map(|p| p.value).sum(),
        error: panels.iter().map(|p| p.error).sum(),
        evaluations,
    }
}

/// A-posteriori error bound required of the potential oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Scaled potential evaluated as the line integral
/// `-int lambda(w) dw / |Q - w e_xi|` over `w in [-1 - A, 1 - A]`, with the
/// mass density `lambda(w) = 1 - 3A (w + A)`.
///
/// `n_nodes` sets the minimum number of integrand evaluations of the initial
/// uniform pass (at least 64).
pub fn potential_by_quadrature(q: [f64; 3], a: f64, n_nodes: usize) -> Result<f64> {
    if n_nodes < 64 {
        return Err(Error::DomainViolation(format!(
            "quadrature needs at least 64 nodes, got {n_nodes}"
        )));
    }
    let (lo, hi) = (-1.0 - a, 1.0 - a);
    let rho2 = q[1] * q[1] + q[2] * q[2];
    if rho2 == 0.0 && q[0] >= lo && q[0] <= hi {
        return Err(Error::OnSegment { gap: 0.0 });
    }
    let integrand = |w: f64| {
        let density = 1.0 - 3.0 * a * (w + a);
        let dx = q[0] - w;
        -density / (dx * dx + rho2).sqrt()
    };
    // Split at the foot of the perpendicular so the peak sits on a breakpoint.
    let mut breakpoints = vec![lo];
    if q[0] > lo && q[0] < hi {
        breakpoints.push(q[0]);
    }
    breakpoints.push(hi);
    let panels = n_nodes.div_ceil(15 * (breakpoints.len() - 1));
    let result = integrate(
        integrand,
        &breakpoints,
        panels,
        1e-2 * ORACLE_TOLERANCE,
        20_000,
    );
    if result.error > ORACLE_TOLERANCE {
        return Err(Error::QuadratureNotConverged {
            estimate: result.error,
        });
    }
    Ok(result.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        // GK15 integrates degree-22 polynomials exactly.
        let r = integrate(|x| x.powi(20) - 3.0 * x.powi(7), &[-1.0, 1.0], 1, 1e-14, 10);
        assert_relative_eq!(r.value, 2.0 / 21.0, epsilon = 1e-15);
    }

    #[test]
    fn peaked_integrand() {
        // int_{-1}^{1} dx / (x^2 + e^2) = 2 atan(1/e) / e
        let e: f64 = 1e-3;
        let r = integrate(
            |x| 1.0 / (x * x + e * e),
            &[-1.0, 0.0, 1.0],
            2,
            1e-9,
            10_000,
        );
        assert_relative_eq!(r.value, 2.0 * (1.0 / e).atan() / e, max_relative = 1e-12);
    }

    #[test]
    fn homogeneous_oracle_value() {
        let u = potential_by_quadrature([0.0, 0.0, 1.0], 0.0, 64).unwrap();
        assert_relative_eq!(u, -2.0 * (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn node_floor() {
        assert!(matches!(
            potential_by_quadrature([0.0, 0.0, 1.0], 0.0, 10),
            Err(Error::DomainViolation(_))
        ));
    }
}
