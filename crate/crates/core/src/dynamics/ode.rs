//! Dormand–Prince 5(4) with continuous extension.
//!
//! After every accepted step the caller sees the step's dense output and may
//! rewrite the state (used to pull trajectories back into the fundamental
//! domain); the first stage is then recomputed.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Magnitude used in the error scale; override to keep angles from
    /// loosening the tolerance as they wind up.
    fn magnitude(&self, _i: usize, y: f64) -> f64 {
        y.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, h_max: 0.5, max_steps: 50_000_000 }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::new(1e-10, 1e-10)
    }
}

/// Dense output of one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn dim(&self) -> usize {
        self.rcont[0].len()
    }

    pub fn component(&self, i: usize, t: f64) -> f64 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])))
    }

    /// Time derivative of the interpolant.
    pub fn derivative(&self, i: usize, t: f64) -> f64 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        let a = r[3][i] + s1 * r[4][i];
        let b = r[2][i] + s * a;
        let c = r[1][i] + s1 * b;
        let da = -r[4][i];
        let db = a + s * da;
        let dc = -b + s1 * db;
        (c + s * dc) / self.h
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(i, t);
        }
    }

    /// Copy restricted to the first `k` components.
    pub fn truncated(&self, k: usize) -> DenseStep {
        DenseStep {
            t0: self.t0,
            h: self.h,
            rcont: std::array::from_fn(|j| self.rcont[j][..k].to_vec()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// The callback changed the state; recompute the first stage.
    Modified,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
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

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (either direction). `y` holds
/// the initial state and receives the final one.
pub fn integrate<S, F>(sys: &S, tol: &Tolerances, t0: f64, y: &mut [f64], t_end: f64, mut on_step: F) -> Result<Stats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(&DenseStep, &mut [f64]) -> Result<Control>,
{
    let n = sys.dim();
    assert_eq!(y.len(), n);
    let mut stats = Stats::default();
    if t_end == t0 {
        return Ok(stats);
    }
    let dir = (t_end - t0).signum();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;
    sys.rhs(t, y, &mut k[0]);
    stats.evaluations += 1;

    let scale = |i: usize, a: f64, b: f64| tol.atol + tol.rtol * sys.magnitude(i, a).max(sys.magnitude(i, b));
    // initial step from a second-derivative estimate (Hairer–Wanner)
    let mut h = {
        let (mut d0, mut d1) = (0.0f64, 0.0f64);
        for i in 0..n {
            let sc = scale(i, y[i], y[i]);
            d0 += (y[i] / sc).powi(2);
            d1 += (k[0][i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { (0.01 * d0 / d1).max(1e-6) };
        let h0 = h0.min((t_end - t0).abs());
        for i in 0..n {
            ytmp[i] = y[i] + dir * h0 * k[0][i];
        }
        sys.rhs(t0 + dir * h0, &ytmp, &mut k[1]);
        stats.evaluations += 1;
        let mut d2 = 0.0f64;
        for i in 0..n {
            d2 += ((k[1][i] - k[0][i]) / scale(i, y[i], y[i])).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let m = d1.max(d2);
        let h1 = if !m.is_finite() { h0 } else if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
        h1.max(1e-6).min(tol.h_max).min((t_end - t0).abs())
    } * dir;
    let mut fac_old = 1e-4f64;
    let mut last_reject = false;

    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::Integrator(format!("step budget exhausted at t = {t}")));
        }
        let remaining = t_end - t;
        if remaining * dir <= 0.0 {
            break;
        }
        let mut last = false;
        if (h.abs() >= remaining.abs()) || (remaining.abs() - h.abs()) < 1e-12 * remaining.abs().max(1.0) {
            h = remaining;
            last = true;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integrator(format!("step size underflow at t = {t}")));
        }
        // stages
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        sys.rhs(t + C2 * h, &ytmp, &mut k[1]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        sys.rhs(t + C3 * h, &ytmp, &mut k[2]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        sys.rhs(t + C4 * h, &ytmp, &mut k[3]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        sys.rhs(t + C5 * h, &ytmp, &mut k[4]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        sys.rhs(t + h, &ytmp, &mut k[5]);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        sys.rhs(t + h, &ynew, &mut k[6]);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = scale(i, y[i], ynew[i]);
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            last_reject = true;
            continue;
        }
        // PI step control
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / fac_old.powf(0.04);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let h_new = h / fac;
        if err <= 1.0 {
            fac_old = err.max(1e-4);
            stats.accepted += 1;
            let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = h * k[0][i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h * k[6][i] - bspl;
                rcont[4][i] =
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let step = DenseStep { t0: t, h, rcont };
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            match on_step(&step, y)? {
                Control::Continue => {}
                Control::Modified => {
                    sys.rhs(t, y, &mut k[0]);
                    stats.evaluations += 1;
                }
                Control::Stop => break,
            }
            if last {
                break;
            }
            let mut hn = h_new.abs().min(tol.h_max);
            if last_reject {
                hn = hn.min(h.abs());
            }
            h = hn * dir;
            last_reject = false;
        } else {
            stats.rejected += 1;
            h /= (fac11 / 0.9).min(10.0).max(1.0);
            last_reject = true;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_forward_and_back() {
        let tol = Tolerances::new(1e-12, 1e-12);
        let mut y = vec![1.0, 0.0];
        let mut max_dense_err: f64 = 0.0;
        integrate(&Oscillator, &tol, 0.0, &mut y, 10.0, |s, _| {
            for j in 0..5 {
                let t = s.t0 + s.h * j as f64 / 4.0;
                max_dense_err = max_dense_err.max((s.component(0, t) - t.cos()).abs());
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-10 && (y[1] + 10f64.sin()).abs() < 1e-10);
        assert!(max_dense_err < 1e-9, "{max_dense_err}");
        integrate(&Oscillator, &tol, 10.0, &mut y, 0.0, |_, _| Ok(Control::Continue)).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }

    #[test]
    fn tolerance_controls_error() {
        let mut errs = Vec::new();
        for tol in [1e-6, 1e-9, 1e-12] {
            let mut y = vec![1.0, 0.0];
            integrate(&Oscillator, &Tolerances::new(tol, tol), 0.0, &mut y, 20.0, |_, _| Ok(Control::Continue)).unwrap();
            errs.push((y[0] - 20f64.cos()).abs());
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0]);
        assert!(errs[2] < 1e-10);
    }

    #[test]
    fn stop_and_modify() {
        let mut y = vec![1.0, 0.0];
        let mut n = 0;
        integrate(&Oscillator, &Tolerances::default(), 0.0, &mut y, 100.0, |s, y| {
            n += 1;
            if s.t1() > 1.0 {
                y[0] = 0.0;
                y[1] = 0.0;
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert!(n > 1 && y == vec![0.0, 0.0]);
    }
}
