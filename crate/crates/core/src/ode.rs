//! Dormand–Prince 5(4) with step-size control and continuous output.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` leaves it to the controller.
    pub h_max: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, max_steps: 200_000, h_max: None }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        OdeOptions { rtol, atol, ..Default::default() }
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

/// Piecewise continuous extension of an accepted step sequence.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    dim: usize,
    /// Step start times; `t_end` closes the last step.
    starts: Vec<f64>,
    widths: Vec<f64>,
    /// Five coefficient vectors per step, flattened.
    coeffs: Vec<f64>,
    t_end: f64,
    y_end: Vec<f64>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.starts.first().copied().unwrap_or(self.t_end)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.starts.len()
    }

    /// Accepted mesh points including both ends.
    pub fn nodes(&self) -> Vec<f64> {
        let mut t = self.starts.clone();
        t.push(self.t_end);
        t
    }

    fn locate(&self, t: f64) -> usize {
        let m = self.starts.len();
        let forward = self.t_end >= self.t_start();
        // First step whose end passes t.
        let mut lo = 0usize;
        let mut hi = m;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let end = self.starts[mid] + self.widths[mid];
            let before = if forward { end < t } else { end > t };
            if before {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.min(m - 1)
    }

    /// State at `t` (clamped to the integrated span).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.starts.is_empty() {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let i = self.locate(t);
        let theta = ((t - self.starts[i]) / self.widths[i]).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let c = &self.coeffs[i * 5 * n..(i + 1) * 5 * n];
        for k in 0..n {
            out[k] = c[k]
                + theta * (c[n + k] + theta1 * (c[2 * n + k] + theta * (c[3 * n + k] + theta1 * c[4 * n + k])));
        }
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y_end
    }
}

fn err_norm(y0: &[f64], y1: &[f64], e: &[f64], o: &OdeOptions) -> f64 {
    let n = y0.len();
    let mut s = 0.0;
    for i in 0..n {
        let sk = o.atol + o.rtol * libm::fabs(y0[i]).max(libm::fabs(y1[i]));
        let r = e[i] / sk;
        s += r * r;
    }
    libm::sqrt(s / n as f64)
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut sol = DenseSolution {
        dim: n,
        starts: Vec::new(),
        widths: Vec::new(),
        coeffs: Vec::new(),
        t_end: t0,
        y_end: y0.to_vec(),
    };
    if t1 == t0 {
        return Ok(sol);
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let span = libm::fabs(t1 - t0);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut t = t0;
    let mut y = y0.to_vec();
    f(t, &y, &mut k1)?;

    // Initial step guess.
    let mut h = {
        let sk: Vec<f64> = y.iter().map(|c| opts.atol + opts.rtol * libm::fabs(*c)).collect();
        let d0 = libm::sqrt(y.iter().zip(&sk).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64);
        let d1 = libm::sqrt(k1.iter().zip(&sk).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        axpy(&mut ytmp, &y, dir * h0, &[(1.0, &k1)]);
        f(t + dir * h0, &ytmp, &mut k2)?;
        let d2 = libm::sqrt(
            k2.iter().zip(&k1).zip(&sk).map(|((a, b), s)| ((a - b) / s) * ((a - b) / s)).sum::<f64>() / n as f64,
        ) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            libm::pow(0.01 / d1.max(d2), 0.2)
        };
        (100.0 * h0).min(h1).min(span)
    };
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        let remaining = libm::fabs(t1 - t);
        if remaining <= 1e-14 * span.max(1.0) {
            break;
        }
        if steps >= opts.max_steps {
            return Err(Error::StepFailure { t });
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-13 * libm::fabs(t).max(1.0) {
            return Err(Error::StepFailure { t });
        }
        let hs = dir * h;

        axpy(&mut ytmp, &y, hs, &[(A21, &k1)]);
        f(t + C2 * hs, &ytmp, &mut k2)?;
        axpy(&mut ytmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * hs, &ytmp, &mut k3)?;
        axpy(&mut ytmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * hs, &ytmp, &mut k4)?;
        axpy(&mut ytmp, &y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * hs, &ytmp, &mut k5)?;
        axpy(&mut ytmp, &y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let tn = if last { t1 } else { t + hs };
        f(tn, &ytmp, &mut k6)?;
        axpy(&mut ynew, &y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(tn, &ynew, &mut k7)?;
        for i in 0..n {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = err_norm(&y, &ynew, &err, opts);
        steps += 1;

        if !e.is_finite() {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if e <= 1.0 {
            let base = sol.coeffs.len();
            sol.coeffs.resize(base + 5 * n, 0.0);
            let c = &mut sol.coeffs[base..];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                c[i] = y[i];
                c[n + i] = ydiff;
                c[2 * n + i] = bspl;
                c[3 * n + i] = ydiff - hs * k7[i] - bspl;
                c[4 * n + i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            sol.starts.push(t);
            sol.widths.push(hs);
            t = tn;
            core::mem::swap(&mut y, &mut ynew);
            core::mem::swap(&mut k1, &mut k7);
            let mut fac = 0.9 * libm::pow(e.max(1e-10), -0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            if let Some(hm) = opts.h_max {
                h = h.min(hm);
            }
            last_rejected = false;
            if last {
                break;
            }
        } else {
            let fac = (0.9 * libm::pow(e, -0.2)).clamp(0.2, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    sol.t_end = t;
    sol.y_end = y;
    Ok(sol)
}
