use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrator::{Advance, Integrator, Tolerances};
use crate::domain::{momentum_from_q, Branch, RadialProblem};
use crate::error::{Error, Result};

/// Switch to the linear pair when the scaled log-derivative exceeds this.
pub const POLE_ENTER: f64 = 2.0;
/// Return to the Riccati form below this.
pub const POLE_EXIT: f64 = 1.0;
const RENORM_HIGH: f64 = 1e100;
const RENORM_LOW: f64 = 1e-100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Riccati,
    LinearPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDerivativeState {
    pub r: f64,
    pub y: Complex64,
    pub representation: Representation,
    /// `(Φ, Φ')` when the state is held as a linear pair.
    pub pair: Option<(Complex64, Complex64)>,
    pub renormalizations: u32,
    pub switches: u32,
    pub steps: usize,
}

/// Integrates the radial equation in log-derivative form between radii.
pub struct Propagator<'a> {
    problem: &'a RadialProblem,
    tol: Tolerances,
    /// Interval on which the step is capped at `0.05/|p_eff|`.
    cap: Option<(f64, f64)>,
}

enum Rep {
    Riccati(Complex64),
    Pair(Complex64, Complex64),
}

impl<'a> Propagator<'a> {
    pub fn new(problem: &'a RadialProblem, tol: Tolerances) -> Self {
        Self { problem, tol, cap: None }
    }

    pub fn with_step_cap(mut self, from: f64, to: f64) -> Self {
        self.cap = Some((from.min(to), from.max(to)));
        self
    }

    fn scale(&self, r: f64) -> f64 {
        momentum_from_q(self.problem.q_value(r), Branch::Absorb).norm() + 1.0 / r
    }

    /// Propagates `y(r_start) = y0` through `targets` (monotone, same direction) and
    /// returns the state at each.
    pub fn run(&self, r_start: f64, y0: Complex64, targets: &[f64]) -> Result<Vec<LogDerivativeState>> {
        if !(y0.re.is_finite() && y0.im.is_finite()) {
            return Err(Error::domain("initial log-derivative must be finite"));
        }
        if !(r_start > 0.0) || targets.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::domain("propagation radii must be positive"));
        }
        let Some(&last) = targets.last() else {
            return Ok(Vec::new());
        };
        let dir = (last - r_start).signum();
        let mut prev = r_start;
        for &t in targets {
            if (t - prev) * dir < 0.0 {
                return Err(Error::domain("propagation targets must be monotone"));
            }
            prev = t;
        }
        let lo = r_start.min(last);
        let hi = r_start.max(last);
        let mut breaks: Vec<f64> = Vec::new();
        if let Some(table) = &self.problem.potential.table {
            breaks.extend(table.radii().iter().copied().filter(|&r| r > lo && r < hi));
        }
        if let Some((a, b)) = self.cap {
            breaks.extend([a, b].into_iter().filter(|&r| r > lo && r < hi));
        }
        breaks.extend(targets.iter().copied());
        if dir > 0.0 {
            breaks.sort_by(|a, b| a.total_cmp(b));
        } else {
            breaks.sort_by(|a, b| b.total_cmp(a));
        }
        breaks.dedup();

        let q = |r: f64| self.problem.q_value(r);
        let cap = self.cap;
        let h_max = |r: f64| match cap {
            Some((a, b)) if r >= a && r < b => {
                0.05 / momentum_from_q(self.problem.q_value(r), Branch::Absorb).norm().max(1e-300)
            }
            _ => f64::INFINITY,
        };
        let h0 = (1e-3 * r_start).min(0.01 / self.scale(r_start));
        let mut integ = Integrator::new(self.tol, h0);
        let mut r = r_start;
        let mut rep = Rep::Riccati(y0);
        if y0.norm() / self.scale(r) > POLE_ENTER {
            rep = Rep::Pair(Complex64::new(1.0, 0.0) / y0, Complex64::new(1.0, 0.0));
        }
        let mut renorm = 0u32;
        let mut switches = 0u32;
        let mut out = Vec::with_capacity(targets.len());
        let mut next_target = 0usize;

        for &seg_end in &breaks {
            while (seg_end - r) * dir > 0.0 {
                let status = match &mut rep {
                    Rep::Riccati(y) => {
                        let mut arr = [*y];
                        let st = integ.advance(
                            |x, s: &[Complex64; 1]| [-q(x) - s[0] * s[0]],
                            &mut r,
                            &mut arr,
                            seg_end,
                            h_max,
                            |x, s| s[0].norm() / self.scale(x) > POLE_ENTER,
                        )?;
                        *y = arr[0];
                        st
                    }
                    Rep::Pair(phi, chi) => {
                        let mut arr = [*phi, *chi];
                        let st = integ.advance(
                            |x, s: &[Complex64; 2]| [s[1], -q(x) * s[0]],
                            &mut r,
                            &mut arr,
                            seg_end,
                            h_max,
                            |x, s| {
                                let m = s[0].norm().max(s[1].norm());
                                if m > RENORM_HIGH || m < RENORM_LOW {
                                    s[0] /= m;
                                    s[1] /= m;
                                    renorm += 1;
                                }
                                s[0].norm() > 0.0 && (s[1] / s[0]).norm() / self.scale(x) < POLE_EXIT
                            },
                        )?;
                        *phi = arr[0];
                        *chi = arr[1];
                        st
                    }
                };
                if status == Advance::Interrupted {
                    switches += 1;
                    rep = match rep {
                        Rep::Riccati(y) => {
                            // Φ = 1/y, Φ' = 1 keeps the pair bounded at the pole
                            Rep::Pair(Complex64::new(1.0, 0.0) / y, Complex64::new(1.0, 0.0))
                        }
                        Rep::Pair(phi, chi) => Rep::Riccati(chi / phi),
                    };
                }
            }
            while next_target < targets.len() && targets[next_target] == seg_end {
                out.push(self.snapshot(&rep, seg_end, renorm, switches, integ.steps)?);
                next_target += 1;
            }
        }
        Ok(out)
    }

    fn snapshot(&self, rep: &Rep, r: f64, renorm: u32, switches: u32, steps: usize) -> Result<LogDerivativeState> {
        let (y, representation, pair) = match *rep {
            Rep::Riccati(y) => (y, Representation::Riccati, None),
            Rep::Pair(phi, chi) => {
                if phi.norm() == 0.0 {
                    return Err(Error::IllConditioned(format!("wave function vanishes at r = {r:.6e}")));
                }
                (chi / phi, Representation::LinearPair, Some((phi, chi)))
            }
        };
        Ok(LogDerivativeState {
            r,
            y,
            representation,
            pair,
            renormalizations: renorm,
            switches,
            steps,
        })
    }
}
