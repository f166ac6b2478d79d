//! Adaptive three-stage Radau IIA (order 5) integrator for second-order
//! systems `x'' = a(t, x, x')`.
//!
//! The step-size control, simplified Newton iteration and error estimate
//! follow Hairer & Wanner's RADAU5. The state is `y = [x, v]`; the Newton
//! matrices are reduced to the position block, which halves their size.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Second-order system `x'' = a(t, x, v)` with `dim` position coordinates.
pub trait SecondOrderSystem {
    fn dim(&self) -> usize;

    /// Writes the acceleration into `a`. Returning `false` flags an
    /// unusable state (non-finite or singular); the step is then retried
    /// with a smaller size.
    fn acceleration(&self, t: f64, x: &[f64], v: &[f64], a: &mut [f64]) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadauOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Zero picks 1e-6.
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Coordinates are grouped in blocks of this size for the error norm;
    /// 3 makes the norm invariant under rotations of node vectors.
    pub block: usize,
}

impl Default for RadauOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            initial_step: 0.0,
            max_step: f64::INFINITY,
            max_steps: 500_000,
            block: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub jacobians: usize,
    pub decompositions: usize,
}

/// Collocation polynomial of the last accepted step.
pub struct DenseOutput<'a> {
    t_old: f64,
    h: f64,
    y: &'a [f64],
    cont: &'a [Vec<f64>; 3],
}

impl DenseOutput<'_> {
    pub fn t_start(&self) -> f64 {
        self.t_old
    }

    pub fn t_end(&self) -> f64 {
        self.t_old + self.h
    }

    /// Interpolated state at `t` in `[t_start, t_end]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t_end()) / self.h;
        let (c1m1, c2m1) = (C1 - 1.0, C2 - 1.0);
        for i in 0..out.len() {
            out[i] = self.y[i]
                + s * (self.cont[0][i] + (s - c2m1) * (self.cont[1][i] + (s - c1m1) * self.cont[2][i]));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: SolverStats,
}

const SQ6: f64 = 2.449_489_742_783_178;
const C1: f64 = (4.0 - SQ6) / 10.0;
const C2: f64 = (4.0 + SQ6) / 10.0;

const T11: f64 = 9.123_239_487_089_294_279_2e-02;
const T12: f64 = -1.412_552_950_209_542_084_3e-01;
const T13: f64 = -3.002_919_410_514_742_449_1e-02;
const T21: f64 = 2.417_179_327_817_904_227_7e-01;
const T22: f64 = 2.041_293_522_937_999_319_0e-01;
const T23: f64 = 3.829_421_127_572_619_377_4e-01;
const T31: f64 = 9.660_481_826_150_929_361_9e-01;
const TI11: f64 = 4.325_579_890_063_155_351_0;
const TI12: f64 = 3.391_992_518_158_098_695_0e-01;
const TI13: f64 = 5.417_705_399_358_748_711_0e-01;
const TI21: f64 = -4.178_718_591_551_904_727_0;
const TI22: f64 = -3.276_828_207_610_623_870_0e-01;
const TI23: f64 = 4.766_235_545_005_504_519_0e-01;
const TI31: f64 = -5.028_726_349_457_868_759_0e-01;
const TI32: f64 = 2.571_926_949_855_605_429_0;
const TI33: f64 = -5.960_392_048_282_249_249_0e-01;

const NIT: usize = 7;
const SAFE: f64 = 0.9;
const THET: f64 = 0.001;
const FACL: f64 = 5.0;
const FACR: f64 = 0.125;
const QUOT1: f64 = 1.0;
const QUOT2: f64 = 1.2;

struct Constants {
    u1: f64,
    alph: f64,
    beta: f64,
    dd: [f64; 3],
}

impl Constants {
    fn new() -> Self {
        let cbrt81 = 81f64.cbrt();
        let cbrt9 = 9f64.cbrt();
        let u1 = (6.0 + cbrt81 - cbrt9) / 30.0;
        let alph = (12.0 - cbrt81 + cbrt9) / 60.0;
        let beta = (cbrt81 + cbrt9) * 3f64.sqrt() / 60.0;
        let cno = alph * alph + beta * beta;
        Self {
            u1: 1.0 / u1,
            alph: alph / cno,
            beta: beta / cno,
            dd: [-(13.0 + 7.0 * SQ6) / 3.0, (-13.0 + 7.0 * SQ6) / 3.0, -1.0 / 3.0],
        }
    }
}

/// Jacobian blocks `da/dx`, `da/dv` and the reduced Newton factorizations.
struct Linear {
    ax: DMatrix<f64>,
    av: DMatrix<f64>,
    e1: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    e2: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    fac1: f64,
    alphn: f64,
    betan: f64,
}

impl Linear {
    fn decompose(&mut self, fac1: f64, alphn: f64, betan: f64) -> bool {
        let m = self.ax.nrows();
        let mut e1 = -&self.ax - &self.av * fac1;
        for i in 0..m {
            e1[(i, i)] += fac1 * fac1;
        }
        let g = Complex64::new(alphn, betan);
        let mut e2 = DMatrix::<Complex64>::from_fn(m, m, |i, j| {
            Complex64::new(-self.ax[(i, j)], 0.0) - g * self.av[(i, j)]
        });
        for i in 0..m {
            e2[(i, i)] += g * g;
        }
        let lu1 = e1.lu();
        let lu2 = e2.lu();
        if !lu1.is_invertible() || !lu2.is_invertible() {
            return false;
        }
        self.e1 = Some(lu1);
        self.e2 = Some(lu2);
        self.fac1 = fac1;
        self.alphn = alphn;
        self.betan = betan;
        true
    }

    /// Solves `(fac1 I - J) z = r` in place, `r = [r_x, r_v]`.
    fn solve_real(&self, r: &mut [f64]) {
        let m = self.ax.nrows();
        let g = self.fac1;
        let (rx, rv) = r.split_at_mut(m);
        let rx_vec = DVector::from_column_slice(rx);
        let avr = &self.av * &rx_vec;
        let mut rhs = DVector::from_fn(m, |i, _| rv[i] + g * rx[i] - avr[i]);
        self.e1.as_ref().expect("decomposed").solve_mut(&mut rhs);
        for i in 0..m {
            let z1 = rhs[i];
            rv[i] = g * z1 - rx[i];
            rx[i] = z1;
        }
    }

    /// Solves `((alphn + i betan) I - J)(zr + i zi) = rr + i ri` in place.
    fn solve_complex(&self, re: &mut [f64], im: &mut [f64]) {
        let m = self.ax.nrows();
        let g = Complex64::new(self.alphn, self.betan);
        let r1 = DVector::<Complex64>::from_fn(m, |i, _| Complex64::new(re[i], im[i]));
        let avr = self.av.map(|v| Complex64::new(v, 0.0)) * &r1;
        let mut rhs = DVector::<Complex64>::from_fn(m, |i, _| {
            Complex64::new(re[m + i], im[m + i]) + g * r1[i] - avr[i]
        });
        self.e2.as_ref().expect("decomposed").solve_mut(&mut rhs);
        for i in 0..m {
            let z1 = rhs[i];
            let z2 = g * z1 - r1[i];
            re[i] = z1.re;
            im[i] = z1.im;
            re[m + i] = z2.re;
            im[m + i] = z2.im;
        }
    }
}

struct Rhs<'a, S: SecondOrderSystem> {
    sys: &'a S,
    m: usize,
    evaluations: usize,
}

impl<S: SecondOrderSystem> Rhs<'_, S> {
    fn eval(&mut self, t: f64, y: &[f64], f: &mut [f64]) -> bool {
        self.evaluations += 1;
        let m = self.m;
        f[..m].copy_from_slice(&y[m..]);
        let (fx, fv) = f.split_at_mut(m);
        let _ = fx;
        self.sys.acceleration(t, &y[..m], &y[m..], fv) && fv.iter().all(|v| v.is_finite())
    }

    fn jacobian(&mut self, t: f64, y: &[f64], f0: &[f64], lin: &mut Linear, block: usize) -> bool {
        let m = self.m;
        let mut ywork = y.to_vec();
        let mut f = vec![0.0; 2 * m];
        let uround = f64::EPSILON;
        for col in 0..2 * m {
            let b0 = (col / block) * block;
            let bnorm = y[b0..(b0 + block).min(2 * m)].iter().map(|v| v * v).sum::<f64>().sqrt();
            let delt = (uround * bnorm.max(1e-5)).sqrt();
            let saved = ywork[col];
            ywork[col] = saved + delt;
            if !self.eval(t, &ywork, &mut f) {
                return false;
            }
            ywork[col] = saved;
            let target = if col < m { &mut lin.ax } else { &mut lin.av };
            let c = col % m;
            for r in 0..m {
                target[(r, c)] = (f[m + r] - f0[m + r]) / delt;
            }
        }
        true
    }
}

fn block_norm(z: &[f64], scal: &[f64], block: usize) -> f64 {
    let n = z.len();
    let mut sum = 0.0;
    let mut i = 0;
    while i < n {
        let end = (i + block).min(n);
        let s = scal[i];
        let zz: f64 = z[i..end].iter().map(|v| v * v).sum();
        sum += zz / (s * s);
        i = end;
    }
    sum
}

fn update_scale(y: &[f64], scal: &mut [f64], atol: f64, rtol: f64, block: usize) {
    let n = y.len();
    let mut i = 0;
    while i < n {
        let end = (i + block).min(n);
        let norm = y[i..end].iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = atol + rtol * norm;
        scal[i..end].iter_mut().for_each(|v| *v = s);
        i = end;
    }
}

/// Integrates from `t0` to `t_end`, calling `on_step` after every accepted
/// step with the step's dense output. The callback may stop the run early.
pub fn integrate<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &RadauOptions,
    mut on_step: F,
) -> Result<Solution>
where
    S: SecondOrderSystem,
    F: FnMut(&DenseOutput<'_>) -> StepControl,
{
    let m = sys.dim();
    let n = 2 * m;
    if y0.len() != n {
        return Err(Error::InvalidInput(format!("state length {} != {}", y0.len(), n)));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) || opts.block == 0 || n % opts.block != 0 {
        return Err(Error::InvalidInput("invalid integrator tolerances or block size".into()));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidInput("t_end must exceed t0".into()));
    }
    let k = Constants::new();
    let uround = f64::EPSILON;
    let block = opts.block;
    let expm = 2.0 / 3.0;
    let quot = opts.atol / opts.rtol;
    let rtol = 0.1 * opts.rtol.powf(expm);
    let atol = rtol * quot;
    let fnewt = (10.0 * uround / rtol).max(0.03f64.min(rtol.sqrt()));
    let hmax = opts.max_step.min(t_end - t0);

    let mut rhs = Rhs { sys, m, evaluations: 0 };
    let mut stats = SolverStats::default();
    let fail = |t: f64, reason: &str, stats: &SolverStats, y: &[f64]| Error::Integration {
        t,
        reason: reason.to_string(),
        steps: stats.steps,
        rejected: stats.rejected,
        state: y.to_vec(),
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = if opts.initial_step > 0.0 { opts.initial_step } else { 1e-6 }.min(hmax);
    let mut scal = vec![0.0; n];
    update_scale(&y, &mut scal, atol, rtol, block);

    let mut y0f = vec![0.0; n];
    if !rhs.eval(t, &y, &mut y0f) {
        return Err(fail(t, "non-finite derivative at the initial state", &stats, &y));
    }

    let mut lin = Linear {
        ax: DMatrix::zeros(m, m),
        av: DMatrix::zeros(m, m),
        e1: None,
        e2: None,
        fac1: 0.0,
        alphn: 0.0,
        betan: 0.0,
    };
    let mut z = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut w = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut cont = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut ywork = vec![0.0; n];
    let mut fwork = vec![0.0; n];

    let mut first = true;
    let mut reject = false;
    let mut last = false;
    let mut caljac = false;
    let mut need_jac = true;
    let mut need_lu = true;
    let mut faccon = 1.0f64;
    let mut theta = 1.0f64;
    let mut hold = h;
    let mut hacc = h;
    let mut erracc = 1e-2f64;
    let mut unexpected = 0usize;

    if t + h * 1.0001 >= t_end {
        h = t_end - t;
        last = true;
    }

    loop {
        if need_jac {
            if !rhs.jacobian(t, &y, &y0f, &mut lin, block) {
                return Err(fail(t, "non-finite Jacobian", &stats, &y));
            }
            stats.jacobians += 1;
            caljac = true;
            need_jac = false;
            need_lu = true;
        }
        if need_lu {
            let fac1 = k.u1 / h;
            if !lin.decompose(fac1, k.alph / h, k.beta / h) {
                unexpected += 1;
                if unexpected >= 10 {
                    return Err(fail(t, "singular Newton matrix", &stats, &y));
                }
                h *= 0.5;
                reject = true;
                last = false;
                continue;
            }
            stats.decompositions += 1;
            need_lu = false;
        }
        stats.steps += 1;
        if stats.steps > opts.max_steps {
            return Err(fail(t, "maximum step count exceeded", &stats, &y));
        }
        if h.abs() < 10.0 * uround * t.abs().max(1e-300) || h < 1e-16 {
            return Err(fail(t, "step size underflow", &stats, &y));
        }

        // Starting values for the Newton iteration.
        if first {
            for s in 0..3 {
                z[s].iter_mut().for_each(|v| *v = 0.0);
                w[s].iter_mut().for_each(|v| *v = 0.0);
            }
        } else {
            let c3q = h / hold;
            let c1q = C1 * c3q;
            let c2q = C2 * c3q;
            let (c1m1, c2m1) = (C1 - 1.0, C2 - 1.0);
            for i in 0..n {
                let (ak1, ak2, ak3) = (cont[0][i], cont[1][i], cont[2][i]);
                let z1 = c1q * (ak1 + (c1q - c2m1) * (ak2 + (c1q - c1m1) * ak3));
                let z2 = c2q * (ak1 + (c2q - c2m1) * (ak2 + (c2q - c1m1) * ak3));
                let z3 = c3q * (ak1 + (c3q - c2m1) * (ak2 + (c3q - c1m1) * ak3));
                z[0][i] = z1;
                z[1][i] = z2;
                z[2][i] = z3;
                w[0][i] = TI11 * z1 + TI12 * z2 + TI13 * z3;
                w[1][i] = TI21 * z1 + TI22 * z2 + TI23 * z3;
                w[2][i] = TI31 * z1 + TI32 * z2 + TI33 * z3;
            }
        }

        // Simplified Newton iteration.
        let mut newt = 0usize;
        faccon = faccon.max(uround).powf(0.8);
        theta = theta.abs();
        let mut dynold = 0.0f64;
        let mut thqold = 0.0f64;
        enum Outcome {
            Converged,
            Unexpected,
            Shrink(f64),
        }
        let outcome = loop {
            if newt >= NIT {
                break Outcome::Unexpected;
            }
            let cs = [C1, C2, 1.0];
            let mut ok = true;
            let mut fvals = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for s in 0..3 {
                for i in 0..n {
                    ywork[i] = y[i] + z[s][i];
                }
                ok &= rhs.eval(t + cs[s] * h, &ywork, &mut fvals[s]);
            }
            if !ok {
                break Outcome::Unexpected;
            }
            // Transformed residuals.
            let (fac1, alphn, betan) = (lin.fac1, lin.alphn, lin.betan);
            let mut r1 = vec![0.0; n];
            let mut r2 = vec![0.0; n];
            let mut r3 = vec![0.0; n];
            for i in 0..n {
                let (a1, a2, a3) = (fvals[0][i], fvals[1][i], fvals[2][i]);
                let t1 = TI11 * a1 + TI12 * a2 + TI13 * a3;
                let t2 = TI21 * a1 + TI22 * a2 + TI23 * a3;
                let t3 = TI31 * a1 + TI32 * a2 + TI33 * a3;
                r1[i] = t1 - fac1 * w[0][i];
                r2[i] = t2 - alphn * w[1][i] + betan * w[2][i];
                r3[i] = t3 - alphn * w[2][i] - betan * w[1][i];
            }
            lin.solve_real(&mut r1);
            lin.solve_complex(&mut r2, &mut r3);
            newt += 1;
            let dyno = ((block_norm(&r1, &scal, block)
                + block_norm(&r2, &scal, block)
                + block_norm(&r3, &scal, block))
                / (3 * n) as f64)
                .sqrt();
            if !dyno.is_finite() {
                break Outcome::Unexpected;
            }
            if newt > 1 && newt < NIT {
                let thq = dyno / dynold;
                theta = if newt == 2 { thq } else { (thq * thqold).sqrt() };
                thqold = thq;
                if theta < 0.99 {
                    faccon = theta / (1.0 - theta);
                    let dyth = faccon * dyno * theta.powi((NIT - 1 - newt) as i32) / fnewt;
                    if dyth >= 1.0 {
                        let qnewt = dyth.clamp(1e-4, 20.0);
                        let hhfac = 0.8 * qnewt.powf(-1.0 / (4.0 + NIT as f64 - 1.0 - newt as f64));
                        break Outcome::Shrink(hhfac);
                    }
                } else {
                    break Outcome::Unexpected;
                }
            }
            dynold = dyno.max(uround);
            for i in 0..n {
                w[0][i] += r1[i];
                w[1][i] += r2[i];
                w[2][i] += r3[i];
                let (f1, f2, f3) = (w[0][i], w[1][i], w[2][i]);
                z[0][i] = T11 * f1 + T12 * f2 + T13 * f3;
                z[1][i] = T21 * f1 + T22 * f2 + T23 * f3;
                z[2][i] = T31 * f1 + f2;
            }
            if faccon * dyno <= fnewt {
                break Outcome::Converged;
            }
        };

        match outcome {
            Outcome::Converged => {}
            Outcome::Unexpected | Outcome::Shrink(_) => {
                let hhfac = match outcome {
                    Outcome::Shrink(f) => f,
                    _ => {
                        unexpected += 1;
                        if unexpected >= 10 {
                            return Err(fail(t, "repeated Newton failures", &stats, &y));
                        }
                        0.5
                    }
                };
                h *= hhfac;
                reject = true;
                last = false;
                if stats.accepted >= 1 {
                    stats.rejected += 1;
                }
                if caljac {
                    need_lu = true;
                } else {
                    need_jac = true;
                }
                continue;
            }
        }

        // Error estimate.
        let hee = [k.dd[0] / h, k.dd[1] / h, k.dd[2] / h];
        let mut f2 = vec![0.0; n];
        let mut err_v = vec![0.0; n];
        for i in 0..n {
            f2[i] = hee[0] * z[0][i] + hee[1] * z[1][i] + hee[2] * z[2][i];
            err_v[i] = f2[i] + y0f[i];
        }
        lin.solve_real(&mut err_v);
        let mut err = (block_norm(&err_v, &scal, block) / n as f64).sqrt().max(1e-10);
        if err >= 1.0 && (first || reject) {
            for i in 0..n {
                ywork[i] = y[i] + err_v[i];
            }
            if rhs.eval(t, &ywork, &mut fwork) {
                for i in 0..n {
                    err_v[i] = fwork[i] + f2[i];
                }
                lin.solve_real(&mut err_v);
                err = (block_norm(&err_v, &scal, block) / n as f64).sqrt().max(1e-10);
            } else {
                err = 1e10;
            }
        }
        if !err.is_finite() {
            err = 1e10;
        }

        let fac = SAFE.min(SAFE * (1.0 + 2.0 * NIT as f64) / (newt as f64 + 2.0 * NIT as f64));
        let mut quot = FACR.max(FACL.min(err.powf(0.25) / fac));
        let mut hnew = h / quot;

        if err < 1.0 {
            first = false;
            stats.accepted += 1;
            unexpected = 0;
            if stats.accepted > 1 {
                let facgus = ((hacc / h) * (err * err / erracc).powf(0.25) / SAFE).clamp(FACR, FACL);
                quot = quot.max(facgus);
                hnew = h / quot;
            }
            hacc = h;
            erracc = err.max(1e-2);
            let told = t;
            hold = h;
            t += h;
            let (c1m1, c2m1, c1mc2) = (C1 - 1.0, C2 - 1.0, C1 - C2);
            for i in 0..n {
                y[i] += z[2][i];
                let (z1, z2, z3) = (z[0][i], z[1][i], z[2][i]);
                cont[0][i] = (z2 - z3) / c2m1;
                let ak = (z1 - z2) / c1mc2;
                let acont3 = (ak - z1 / C1) / C2;
                cont[1][i] = (ak - cont[0][i]) / c1m1;
                cont[2][i] = cont[1][i] - acont3;
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(fail(t, "non-finite state", &stats, &y));
            }
            update_scale(&y, &mut scal, atol, rtol, block);
            let dense = DenseOutput { t_old: told, h, y: &y, cont: &cont };
            let control = on_step(&dense);
            caljac = false;
            if last || control == StepControl::Stop {
                stats.evaluations = rhs.evaluations;
                return Ok(Solution { t, y, stats });
            }
            if !rhs.eval(t, &y, &mut y0f) {
                return Err(fail(t, "non-finite derivative", &stats, &y));
            }
            hnew = hnew.min(hmax);
            if reject {
                hnew = hnew.min(h);
            }
            reject = false;
            if t + hnew / QUOT1 >= t_end {
                h = t_end - t;
                last = true;
            } else {
                let qt = hnew / h;
                if theta <= THET && (QUOT1..=QUOT2).contains(&qt) {
                    continue;
                }
                h = hnew;
            }
            if theta <= THET {
                need_lu = true;
            } else {
                need_jac = true;
            }
        } else {
            reject = true;
            last = false;
            if first {
                h *= 0.1;
            } else {
                h = hnew;
            }
            if stats.accepted >= 1 {
                stats.rejected += 1;
            }
            if caljac {
                need_lu = true;
            } else {
                need_jac = true;
            }
        }
    }
}
