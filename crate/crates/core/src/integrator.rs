//! Dormand-Prince 8(5,3) integrator with 7th-order dense output.
//!
//! Step size control and the error estimator follow Hairer's DOP853. Every
//! accepted step yields a [`DenseStep`] that can be evaluated anywhere inside
//! the step; event location and quadrature along trajectories are built on it.

#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N]>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for tol in [self.abs_tol, self.rel_tol] {
            if !(1e-14..=1e-3).contains(&tol) {
                return Err(Error::InvalidTolerance(tol));
            }
        }
        Ok(())
    }
}

/// Continuous extension of one accepted step over `[t0, t0 + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 8],
}

impl<const N: usize> DenseStep<N> {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; N] {
        std::array::from_fn(|i| self.coeffs[0][i] + self.coeffs[1][i])
    }

    pub fn component(&self, t: f64, i: usize) -> f64 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.coeffs;
        let conpar = c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]));
        c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * conpar)))
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        std::array::from_fn(|i| self.component(t, i))
    }
}

/// `y + h * sum(w_j * k_j)`.
#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        y[i] + h * acc
    })
}

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;

/// Adaptive DOP853 stepper integrating forward from `t0` to `t_end`.
pub struct Dop853<'a, S, const N: usize> {
    system: &'a S,
    tol: Tolerances,
    t: f64,
    t_end: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    facold: f64,
    rejected_last: bool,
    steps: usize,
    evaluations: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> Dop853<'a, S, N> {
    pub fn new(system: &'a S, t0: f64, y0: [f64; N], t_end: f64, tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        if !(t_end > t0) {
            return Err(Error::DomainViolation(format!(
                "integration span must be increasing ({t0} -> {t_end})"
            )));
        }
        let f = system.rhs(t0, &y0)?;
        let mut stepper = Self {
            system,
            tol,
            t: t0,
            t_end,
            y: y0,
            f,
            h: 0.0,
            facold: 1e-4,
            rejected_last: false,
            steps: 0,
            evaluations: 1,
        };
        stepper.h = stepper.initial_step()?;
        Ok(stepper)
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn y(&self) -> &[f64; N] {
        &self.y
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
    pub fn is_done(&self) -> bool {
        self.t >= self.t_end
    }

    fn scale(&self, y: &[f64; N], i: usize) -> f64 {
        self.tol.abs_tol + self.tol.rel_tol * y[i].abs()
    }

    fn initial_step(&mut self) -> Result<f64> {
        let h_max = self.t_end - self.t;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(&self.y, i);
            dnf += (self.f[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(h_max);
        let y1 = combine(&self.y, h, &[(1.0, &self.f)]);
        let f1 = self.system.rhs(self.t + h, &y1)?;
        self.evaluations += 1;
        let der2: f64 = (0..N)
            .map(|i| ((f1[i] - self.f[i]) / self.scale(&self.y, i)).powi(2))
            .sum();
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            1e-6f64.max(h.abs() * 1e-3)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h).min(h1).min(h_max))
    }

    /// Advance by one accepted step and return its dense output.
    ///
    /// Stage evaluations that fail (e.g. a trial point on the segment) count
    /// as a rejected step.
    pub fn step(&mut self) -> Result<DenseStep<N>> {
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::MaxStepsExceeded(self.tol.max_steps));
            }
            let remaining = self.t_end - self.t;
            let mut h = self.h.min(remaining);
            // Avoid a sliver of a last step.
            if remaining - h < 1e-12 * remaining.max(1.0) {
                h = remaining;
            }
            if h < 1e-15 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            self.steps += 1;
            match self.attempt(h) {
                Ok(Some(dense)) => return Ok(dense),
                Ok(None) => continue,
                Err(Error::OnSegment { .. }) => {
                    self.h = 0.25 * h;
                    self.rejected_last = true;
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn attempt(&mut self, h: f64) -> Result<Option<DenseStep<N>>> {
        let sys = self.system;
        let (t, y, k1) = (self.t, self.y, self.f);
        let k2 = sys.rhs(t + C2 * h, &combine(&y, h, &[(A21, &k1)]))?;
        let k3 = sys.rhs(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = sys.rhs(t + C4 * h, &combine(&y, h, &[(A41, &k1), (A43, &k3)]))?;
        let k5 = sys.rhs(
            t + C5 * h,
            &combine(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = sys.rhs(
            t + C6 * h,
            &combine(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]),
        )?;
        let k7 = sys.rhs(
            t + C7 * h,
            &combine(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
        )?;
        let k8 = sys.rhs(
            t + C8 * h,
            &combine(
                &y,
                h,
                &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
            ),
        )?;
        let k9 = sys.rhs(
            t + C9 * h,
            &combine(
                &y,
                h,
                &[
                    (A91, &k1),
                    (A94, &k4),
                    (A95, &k5),
                    (A96, &k6),
                    (A97, &k7),
                    (A98, &k8),
                ],
            ),
        )?;
        let k10 = sys.rhs(
            t + C10 * h,
            &combine(
                &y,
                h,
                &[
                    (A101, &k1),
                    (A104, &k4),
                    (A105, &k5),
                    (A106, &k6),
                    (A107, &k7),
                    (A108, &k8),
                    (A109, &k9),
                ],
            ),
        )?;
        let k11 = sys.rhs(
            t + C11 * h,
            &combine(
                &y,
                h,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        )?;
        let t_new = t + h;
        let y12 = combine(
            &y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        );
        let k12 = sys.rhs(t_new, &y12)?;
        self.evaluations += 11;

        let incr: [f64; N] = std::array::from_fn(|i| {
            B1 * k1[i]
                + B6 * k6[i]
                + B7 * k7[i]
                + B8 * k8[i]
                + B9 * k9[i]
                + B10 * k10[i]
                + B11 * k11[i]
                + B12 * k12[i]
        });
        let y_new = combine(&y, h, &[(1.0, &incr)]);

        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.tol.abs_tol + self.tol.rel_tol * y[i].abs().max(y_new[i].abs());
            let e2 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h * err * (1.0 / (deno * N as f64)).sqrt();

        let fac11 = err.powf(1.0 / 8.0);
        let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac11 / SAFE));
        let mut h_new = h / fac;

        if !(err <= 1.0) {
            self.h = if err.is_finite() {
                h / (1.0 / FAC1).min(fac11 / SAFE)
            } else {
                0.25 * h
            };
            self.rejected_last = true;
            return Ok(None);
        }

        let k13 = sys.rhs(t_new, &y_new)?;
        // Three extra stages for the continuous extension.
        let k14 = sys.rhs(
            t + C14 * h,
            &combine(
                &y,
                h,
                &[
                    (A141, &k1),
                    (A147, &k7),
                    (A148, &k8),
                    (A149, &k9),
                    (A1410, &k10),
                    (A1411, &k11),
                    (A1412, &k12),
                    (A1413, &k13),
                ],
            ),
        )?;
        let k15 = sys.rhs(
            t + C15 * h,
            &combine(
                &y,
                h,
                &[
                    (A151, &k1),
                    (A156, &k6),
                    (A157, &k7),
                    (A158, &k8),
                    (A1511, &k11),
                    (A1512, &k12),
                    (A1513, &k13),
                    (A1514, &k14),
                ],
            ),
        )?;
        let k16 = sys.rhs(
            t + C16 * h,
            &combine(
                &y,
                h,
                &[
                    (A161, &k1),
                    (A166, &k6),
                    (A167, &k7),
                    (A168, &k8),
                    (A169, &k9),
                    (A1613, &k13),
                    (A1614, &k14),
                    (A1615, &k15),
                ],
            ),
        )?;
        self.evaluations += 4;

        let mut coeffs = [[0.0; N]; 8];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            coeffs[0][i] = y[i];
            coeffs[1][i] = ydiff;
            coeffs[2][i] = bspl;
            coeffs[3][i] = ydiff - h * k13[i] - bspl;
            let ks = [
                k1[i], k6[i], k7[i], k8[i], k9[i], k10[i], k11[i], k12[i], k13[i], k14[i], k15[i],
                k16[i],
            ];
            for (row, d) in DENSE.iter().enumerate() {
                let mut acc = 0.0;
                for (w, k) in d.iter().zip(ks.iter()) {
                    acc += w * k;
                }
                coeffs[4 + row][i] = h * acc;
            }
        }

        self.facold = err.max(1e-4);
        if self.rejected_last {
            h_new = h_new.min(h);
            self.rejected_last = false;
        }
        self.t = if (self.t_end - t_new).abs() <= 1e-14 * t_new.abs().max(1.0) {
            self.t_end
        } else {
            t_new
        };
        self.y = y_new;
        self.f = k13;
        self.h = h_new;
        Ok(Some(DenseStep { t0: t, h, coeffs }))
    }
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

// Dense-output weights, one row per coefficient 5..8, over the stages
// (k1, k6, k7, k8, k9, k10, k11, k12, k13, k14, k15, k16).
const DENSE: [[f64; 12]; 4] = [
    [
        -0.84289382761090128651353491142E+01,
        0.56671495351937776962531783590E+00,
        -0.30689499459498916912797304727E+01,
        0.23846676565120698287728149680E+01,
        0.21170345824450282767155149946E+01,
        -0.87139158377797299206789907490E+00,
        0.22404374302607882758541771650E+01,
        0.63157877876946881815570249290E+00,
        -0.88990336451333310820698117400E-01,
        0.18148505520854727256656404962E+02,
        -0.91946323924783554000451984436E+01,
        -0.44360363875948939664310572000E+01,
    ],
    [
        0.10427508642579134603413151009E+02,
        0.24228349177525818288430175319E+03,
        0.16520045171727028198505394887E+03,
        -0.37454675472269020279518312152E+03,
        -0.22113666853125306036270938578E+02,
        0.77334326684722638389603898808E+01,
        -0.30674084731089398182061213626E+02,
        -0.93321305264302278729567221706E+01,
        0.15697238121770843886131091075E+02,
        -0.31139403219565177677282850411E+02,
        -0.93529243588444783865713862664E+01,
        0.35816841486394083752465898540E+02,
    ],
    [
        0.19985053242002433820987653617E+02,
        -0.38703730874935176555105901742E+03,
        -0.18917813819516756882830838328E+03,
        0.52780815920542364900561016686E+03,
        -0.11573902539959630126141871134E+02,
        0.68812326946963000169666922661E+01,
        -0.10006050966910838403183860980E+01,
        0.77771377980534432092869265740E+00,
        -0.27782057523535084065932004339E+01,
        -0.60196695231264120758267380846E+02,
        0.84320405506677161018159903784E+02,
        0.11992291136182789328035130030E+02,
    ],
    [
        -0.25693933462703749003312586129E+02,
        -0.15418974869023643374053993627E+03,
        -0.23152937917604549567536039109E+03,
        0.35763911791061412378285349910E+03,
        0.93405324183624310003907691704E+02,
        -0.37458323136451633156875139351E+02,
        0.10409964950896230045147246184E+03,
        0.29840293426660503123344363579E+02,
        -0.43533456590011143754432175058E+02,
        0.96324553959188282948394950600E+02,
        -0.39177261675615439165231486172E+02,
        -0.14972683625798562581422125276E+03,
    ],
];

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
            Ok([y[1], -y[0]])
        }
    }

    struct Growth;
    impl OdeSystem<1> for Growth {
        fn rhs(&self, t: f64, y: &[f64; 1]) -> Result<[f64; 1]> {
            Ok([y[0] * t.cos()])
        }
    }

    #[test]
    fn oscillator_end_point() {
        let mut st = Dop853::new(
            &Oscillator,
            0.0,
            [1.0, 0.0],
            20.0,
            Tolerances::new(1e-13, 1e-13),
        )
        .unwrap();
        while !st.is_done() {
            st.step().unwrap();
        }
        assert_eq!(st.t(), 20.0);
        assert!((st.y()[0] - 20f64.cos()).abs() < 1e-11);
        assert!((st.y()[1] + 20f64.sin()).abs() < 1e-11);
    }

    #[test]
    fn dense_output_accuracy() {
        // y = exp(sin t); loose tolerance gives long steps that stress the interpolant.
        let mut st = Dop853::new(&Growth, 0.0, [1.0], 10.0, Tolerances::new(1e-9, 1e-9)).unwrap();
        let mut worst: f64 = 0.0;
        let mut worst_end: f64 = 0.0;
        let mut steps = 0;
        while !st.is_done() {
            let dense = st.step().unwrap();
            steps += 1;
            for j in 0..=20 {
                let t = dense.t0 + dense.h * j as f64 / 20.0;
                worst = worst.max((dense.component(t, 0) - t.sin().exp()).abs());
            }
            assert_eq!(dense.end(), *st.y());
            worst_end = worst_end.max((st.y()[0] - st.t().sin().exp()).abs());
        }
        assert!(steps < 60, "steps = {steps}");
        // The interpolant is one order below the step; between nodes it is
        // expected to be a few tens of times less accurate than at them.
        assert!(worst_end < 5e-9, "end point error {worst_end:e}");
        assert!(worst < 1e-7, "dense error {worst:e}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(matches!(
            Dop853::new(
                &Oscillator,
                0.0,
                [1.0, 0.0],
                1.0,
                Tolerances::new(1e-16, 1e-12)
            ),
            Err(Error::InvalidTolerance(_))
        ));
    }

    #[test]
    fn max_steps() {
        let tol = Tolerances {
            max_steps: 3,
            ..Tolerances::new(1e-12, 1e-12)
        };
        let mut st = Dop853::new(&Oscillator, 0.0, [1.0, 0.0], 100.0, tol).unwrap();
        let err = (0..10).map(|_| st.step()).find_map(|r| r.err()).unwrap();
        assert_eq!(err, Error::MaxStepsExceeded(3));
    }
}
