//! Dormand–Prince 5(4) stepper with continuous output, plus a bracketing root finder.

use thiserror::Error;

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t={t} (h={h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub y0: State,
    pub y1: State,
    rcont: [State; 5],
}

impl Step {
    /// Interpolated state at fraction `theta ∈ [0, 1]` of the step.
    pub fn dense(&self, theta: f64) -> State {
        let th1 = 1.0 - theta;
        let r = &self.rcont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        out
    }

    pub fn at(&self, t: f64) -> State {
        self.dense((t - self.t0) / (self.t1 - self.t0))
    }

    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Adaptive Dormand–Prince 5(4) integrator for two-dimensional autonomous-or-not systems.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    tol: Tolerance,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    h_max: f64,
    rejected_last: bool,
}

impl Dopri5 {
    pub fn new<F: FnMut(f64, &State) -> State>(f: &mut F, t0: f64, y0: State, tol: Tolerance, h_max: f64) -> Self {
        let k1 = f(t0, &y0);
        let mut s = Self {
            tol,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            h_max,
            rejected_last: false,
        };
        s.h = s.initial_step(f);
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> State {
        self.y
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn set_h(&mut self, h: f64) {
        self.h = h.min(self.h_max);
    }

    /// Restart from a new state, keeping the current step size.
    pub fn reset<F: FnMut(f64, &State) -> State>(&mut self, f: &mut F, t: f64, y: State) {
        self.t = t;
        self.y = y;
        self.k1 = f(t, &y);
        self.rejected_last = false;
    }

    fn scale(&self, a: &State, b: &State, i: usize) -> f64 {
        self.tol.atol + self.tol.rtol * a[i].abs().max(b[i].abs())
    }

    fn initial_step<F: FnMut(f64, &State) -> State>(&self, f: &mut F) -> f64 {
        let y0 = self.y;
        let f0 = self.k1;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..2 {
            let sk = self.scale(&y0, &y0, i);
            d0 += (y0[i] / sk).powi(2);
            d1 += (f0[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / 2.0).sqrt(), (d1 / 2.0).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let y1 = axpy(&y0, h0, &[(1.0, &f0)]);
        let f1 = f(self.t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..2 {
            let sk = self.scale(&y0, &y0, i);
            d2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let d2 = (d2 / 2.0).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Takes one accepted step, shrinking `h` as needed.
    pub fn step<F: FnMut(f64, &State) -> State>(&mut self, f: &mut F) -> Result<Step, OdeError> {
        loop {
            let h = self.h.min(self.h_max);
            let (t, y, k1) = (self.t, self.y, self.k1);
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(OdeError::StepSizeUnderflow { t, h });
            }
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y1);

            let mut err = 0.0;
            for i in 0..2 {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err += (e / self.scale(&y, &y1, i)).powi(2);
            }
            let err = (err / 2.0).sqrt();
            let finite = err.is_finite() && y1.iter().chain(k7.iter()).all(|v| v.is_finite());

            if finite && err <= 1.0 {
                let mut rcont = [[0.0; 2]; 5];
                for i in 0..2 {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                let fac = if self.rejected_last { fac.min(1.0) } else { fac };
                self.rejected_last = false;
                self.t = t + h;
                self.y = y1;
                self.k1 = k7;
                self.h = (h * fac).min(self.h_max);
                return Ok(Step {
                    t0: t,
                    t1: t + h,
                    y0: y,
                    y1,
                    rcont,
                });
            }
            let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.25 };
            self.rejected_last = true;
            self.h = h * fac;
        }
    }
}

/// Brent's method on `[a, b]` given `f(a)·f(b) ≤ 0`.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}
