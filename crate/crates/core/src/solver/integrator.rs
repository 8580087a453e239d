//! Dormand–Prince 5(4) with PI step-size control on fixed-size complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State<const N: usize> = [Complex64; N];

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

/// Outcome of a call to [`Integrator::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// Reached the requested end point.
    Done,
    /// Stopped early because the monitor asked for it.
    Interrupted,
}

fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += k[i] * (h * coef);
        }
    }
    out
}

/// Adaptive integrator that keeps its step size and step count across calls.
pub struct Integrator {
    pub tol: Tolerances,
    pub steps: usize,
    pub rejected: usize,
    h: f64,
    err_prev: f64,
}

impl Integrator {
    pub fn new(tol: Tolerances, initial_step: f64) -> Self {
        Self {
            tol,
            steps: 0,
            rejected: 0,
            h: initial_step,
            err_prev: 1e-4,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn set_step_size(&mut self, h: f64) {
        self.h = h;
    }

    /// Integrates `y' = f(x, y)` from `*x` to `x_end`, honoring `h_max(x)`.
    ///
    /// After every accepted step `monitor(x, y)` is called; returning `true` stops early.
    pub fn advance<const N: usize, F, H, M>(
        &mut self,
        f: F,
        x: &mut f64,
        y: &mut State<N>,
        x_end: f64,
        h_max: H,
        mut monitor: M,
    ) -> Result<Advance>
    where
        F: Fn(f64, &State<N>) -> State<N>,
        H: Fn(f64) -> f64,
        M: FnMut(f64, &mut State<N>) -> bool,
    {
        let dir = (x_end - *x).signum();
        if dir == 0.0 {
            return Ok(Advance::Done);
        }
        let mut k1 = f(*x, y);
        loop {
            let remaining = (x_end - *x).abs();
            if remaining <= 1e-14 * x_end.abs().max(1e-300) {
                *x = x_end;
                return Ok(Advance::Done);
            }
            if self.steps >= self.tol.max_steps {
                return Err(Error::Convergence {
                    steps: self.steps,
                    r: *x,
                    trace: format!("step budget exhausted (h = {:.3e}, rejected = {})", self.h, self.rejected),
                });
            }
            let mut h = self.h.abs().min(h_max(*x)).min(remaining);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = dir * h;
            let x0 = *x;
            let k2 = f(x0 + C2 * hs, &axpy(y, hs, &[(A21, &k1)]));
            let k3 = f(x0 + C3 * hs, &axpy(y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(x0 + C4 * hs, &axpy(y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(x0 + C5 * hs, &axpy(y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(x0 + hs, &axpy(y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = axpy(y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let x_new = if last { x_end } else { x0 + hs };
            let k7 = f(x_new, &y_new);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
                let scale = self.tol.abs + self.tol.rel * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }
            if !err.is_finite() {
                self.rejected += 1;
                self.steps += 1;
                self.h = h * 0.1;
                if self.h < 1e-300 {
                    return Err(Error::Convergence {
                        steps: self.steps,
                        r: *x,
                        trace: "non-finite derivative".into(),
                    });
                }
                continue;
            }
            self.steps += 1;
            if err <= 1.0 {
                // PI controller (Hairer's β = 0.04 variant)
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
                };
                self.err_prev = err.max(1e-4);
                *x = x_new;
                *y = y_new;
                if !last || factor > 1.0 {
                    self.h = h * factor;
                }
                if monitor(*x, y) {
                    return Ok(Advance::Interrupted);
                }
                k1 = f(*x, y);
                if last {
                    return Ok(Advance::Done);
                }
            } else {
                self.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
                if self.h <= 1e-15 * x0.abs().max(1e-300) {
                    return Err(Error::Convergence {
                        steps: self.steps,
                        r: x0,
                        trace: format!("step size underflow (err = {err:.3e})"),
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances {
            rel: 1e-11,
            abs: 1e-13,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_growth() {
        let mut it = Integrator::new(tol(), 1e-3);
        let (mut x, mut y) = (0.0, [Complex64::new(1.0, 0.0)]);
        let lam = Complex64::new(0.5, 2.0);
        it.advance(|_, y| [lam * y[0]], &mut x, &mut y, 3.0, |_| f64::INFINITY, |_, _| false)
            .unwrap();
        assert_eq!(x, 3.0);
        assert!((y[0] - (lam * 3.0).exp()).norm() < 1e-9 * (lam * 3.0).exp().norm());
    }

    #[test]
    fn harmonic_pair_backwards() {
        let mut it = Integrator::new(tol(), 1e-3);
        let (mut x, mut y) = (2.0, [Complex64::new(2f64.sin(), 0.0), Complex64::new(2f64.cos(), 0.0)]);
        it.advance(|_, y| [y[1], -y[0]], &mut x, &mut y, -1.0, |_| 0.1, |_, _| false).unwrap();
        assert!((y[0].re - (-1f64).sin()).abs() < 1e-9);
        assert!((y[1].re - (-1f64).cos()).abs() < 1e-9);
    }

    #[test]
    fn step_budget_error() {
        let mut it = Integrator::new(Tolerances { max_steps: 10, ..tol() }, 1e-3);
        let (mut x, mut y) = (0.0, [Complex64::new(1.0, 0.0)]);
        let r = it.advance(|_, y| [Complex64::i() * 50.0 * y[0]], &mut x, &mut y, 100.0, |_| f64::INFINITY, |_, _| false);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn monitor_interrupts() {
        let mut it = Integrator::new(tol(), 1e-2);
        let (mut x, mut y) = (0.0, [Complex64::new(1.0, 0.0)]);
        let r = it
            .advance(|_, y| [y[0]], &mut x, &mut y, 10.0, |_| f64::INFINITY, |_, y| y[0].re > 100.0)
            .unwrap();
        assert_eq!(r, Advance::Interrupted);
        assert!(x < 10.0 && y[0].re > 100.0);
    }
}
