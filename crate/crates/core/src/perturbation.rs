//! Quasi-bound levels of a regular well plus a weak singular core, located numerically
//! and compared with the first-order shift `δE = −δ_s ω_n`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{allowed_region, perturbative_phase_constant_background, semiclassical_frequency};
use crate::domain::{Branch, PotentialSpec, PowerTerm, RadialProblem};
use crate::error::{Error, Result};
use crate::solver::{Propagator, Tolerances, CAP_PHASES};

/// Largest `p·α_s^{1/(s−2)}` for which the first-order comparison is held to its contract.
pub const REGIME_LIMIT: f64 = 0.1;

/// Settings of a level search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSearch {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub max_iterations: usize,
    /// Largest allowed `|E − E_guess|`; `None` uses a tenth of `|E_guess|`.
    pub trust_radius: Option<f64>,
    /// WKB validity at which the absorbing boundary is placed.
    pub wkb_validity: f64,
    /// Momentum grid size of the real-level scan.
    pub scan_points: usize,
}

impl Default for LevelSearch {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_steps: 5_000_000,
            max_iterations: 60,
            trust_radius: None,
            wkb_validity: 1e-4,
            scan_points: 600,
        }
    }
}

impl LevelSearch {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceResult {
    pub level_index: usize,
    pub l: u32,
    pub energy: Complex64,
    pub unperturbed_energy: f64,
    /// `−δ_s ω_n`; absent when the closed form refuses the parameters.
    pub predicted_shift: Option<Complex64>,
    pub measured_shift: Complex64,
    pub omega_n: f64,
    /// Local momentum used in `δ_s`.
    pub momentum: f64,
    /// `p·α_s^{1/(s−2)}`
    pub perturbative_parameter: f64,
    pub regime_warning: bool,
    /// `|measured − predicted| / |measured|`
    pub relative_deviation: Option<f64>,
}

impl ResonanceResult {
    /// `Γ = −2 Im E`
    pub fn width(&self) -> f64 {
        -2.0 * self.energy.im
    }
}

/// Splits off the singular core: the dominant term when its exponent exceeds 2.
fn split_core(potential: &PotentialSpec) -> (PotentialSpec, Option<PowerTerm>) {
    match potential.dominant_index() {
        Some(i) if potential.terms[i].exponent > 2.0 => {
            let mut regular = potential.clone();
            let core = regular.terms.remove(i);
            (regular, Some(core))
        }
        _ => (potential.clone(), None),
    }
}

/// The problem at complex energy, with `E` carried as a constant term.
fn at_energy(potential: &PotentialSpec, l: u32, energy: Complex64) -> RadialProblem {
    let mut pot = potential.clone();
    pot.terms.push(PowerTerm::new(energy, 0.0));
    RadialProblem::new(l, 0.0, pot)
}

fn decay_constant(energy: Complex64) -> Complex64 {
    let k = (-energy).sqrt();
    if k.re < 0.0 {
        -k
    } else {
        k
    }
}

/// Matching geometry shared by every determinant evaluation of one search.
struct Matcher<'a> {
    potential: &'a PotentialSpec,
    l: u32,
    search: LevelSearch,
    singular: bool,
    r0: f64,
    r_match: f64,
}

impl<'a> Matcher<'a> {
    fn new(potential: &'a PotentialSpec, l: u32, reference: f64, search: LevelSearch) -> Result<Self> {
        if !(reference < 0.0) {
            return Err(Error::domain("bound levels need Re E < 0"));
        }
        let (_, outer) = allowed_region(potential, reference)?;
        let (_, core) = split_core(potential);
        let singular = core.is_some();
        let r0 = match core {
            // |d(1/p)/dr| of the core term alone equals the requested validity
            Some(t) => (2.0 * search.wkb_validity * t.strength.norm().sqrt() / t.exponent).powf(2.0 / (t.exponent - 2.0)),
            None => {
                let floor = 1e-8 * potential.length_scale();
                potential.table.as_ref().map_or(floor, |t| t.start().max(floor))
            }
        };
        if !(r0 < outer) {
            return Err(Error::domain("inner boundary lies beyond the outer turning point"));
        }
        Ok(Self {
            potential,
            l,
            search,
            singular,
            r0,
            r_match: outer,
        })
    }

    fn inner(&self, energy: Complex64) -> Result<Complex64> {
        let prob = at_energy(self.potential, self.l, energy);
        let tol = self.search.tolerances();
        let (y0, prop) = if self.singular {
            // incoming wave of the +i0 core, continued analytically in E: Re p > 0
            let p = prob.q_value(self.r0).sqrt();
            let p = if p.re < 0.0 { -p } else { p };
            let y0 = -Complex64::i() * p;
            let cap_end = (self.r0 + CAP_PHASES / y0.norm().max(1e-300)).min(2.0 * self.r0);
            (y0, Propagator::new(&prob, tol).with_step_cap(self.r0, cap_end))
        } else {
            // regular start: r^{l+1} in the locally constant well
            let q = prob.q_value(self.r0) + prob.centrifugal() / (self.r0 * self.r0);
            let p = q.sqrt();
            let y0 = if p.norm() * self.r0 < 1e-3 {
                Complex64::new((self.l as f64 + 1.0) / self.r0, 0.0)
            } else {
                p * crate::solver::boundary::riccati_bessel_log_derivative(self.l, p * self.r0)
            };
            (y0, Propagator::new(&prob, tol))
        };
        Ok(prop.run(self.r0, y0, &[self.r_match])?[0].y)
    }

    fn outer(&self, energy: Complex64) -> Result<Complex64> {
        let prob = at_energy(self.potential, self.l, energy);
        let kappa = decay_constant(energy);
        let r_far = self.r_match + 30.0 / kappa.re.max(1e-12);
        let beta = self.potential.coulomb_strength;
        let y0 = -kappa + beta / (2.0 * kappa * r_far);
        Ok(Propagator::new(&prob, self.search.tolerances()).run(r_far, y0, &[self.r_match])?[0].y)
    }

    fn determinant(&self, energy: Complex64) -> Result<Complex64> {
        Ok(self.inner(energy)? - self.outer(energy)?)
    }

    /// Scale of `y` at the matching radius, for judging a small determinant.
    fn scale(&self, energy: Complex64) -> f64 {
        decay_constant(energy).norm() + 1.0 / self.r_match
    }
}

/// Complex root of the inner/outer log-derivative mismatch near `e_guess` (secant in E).
pub fn find_level(potential: &PotentialSpec, l: u32, e_guess: Complex64, search: &LevelSearch) -> Result<Complex64> {
    if !(e_guess.re.is_finite() && e_guess.im.is_finite()) {
        return Err(Error::domain("energy guess must be finite"));
    }
    let matcher = Matcher::new(potential, l, e_guess.re, *search)?;
    let trust = search.trust_radius.unwrap_or(0.1 * e_guess.norm());
    let mut trace = Vec::new();
    let mut e0 = e_guess;
    let mut e1 = e_guess * (1.0 + 1e-6);
    let mut d0 = matcher.determinant(e0)?;
    let mut d1 = matcher.determinant(e1)?;
    for _ in 0..search.max_iterations {
        if d1 == d0 {
            break;
        }
        let e2 = e1 - d1 * (e1 - e0) / (d1 - d0);
        trace.push(format!("E = {:.15e}{:+.15e}i, |D| = {:.3e}", e2.re, e2.im, d1.norm()));
        if !(e2.re.is_finite() && e2.im.is_finite()) || (e2 - e_guess).norm() > trust {
            return Err(Error::Search(format!(
                "root outside trust region |E − E_guess| ≤ {trust:.3e}: {}",
                trace.join("; ")
            )));
        }
        let step = (e2 - e1).norm();
        e0 = e1;
        d0 = d1;
        e1 = e2;
        d1 = matcher.determinant(e1)?;
        if step <= 1e-13 * e1.norm().max(1e-300) && d1.norm() <= 1e-6 * matcher.scale(e1) {
            return Ok(e1);
        }
    }
    if d1.norm() <= 1e-8 * matcher.scale(e1) {
        return Ok(e1);
    }
    Err(Error::Search(format!("no convergence in {} iterations: {}", search.max_iterations, trace.join("; "))))
}

/// Real bound levels of a real potential, deepest first, found by a scan in local momentum.
pub fn real_levels(potential: &PotentialSpec, l: u32, search: &LevelSearch) -> Result<Vec<f64>> {
    if potential.value(1.0).im != 0.0 || potential.terms.iter().any(|t| t.strength.im != 0.0) {
        return Err(Error::domain("real-level scan needs a real potential"));
    }
    let bottom = well_bottom(potential)?;
    let top = 1e-4 * bottom;
    let matcher = Matcher::new(potential, l, top, *search)?;
    let n = search.scan_points.max(10);
    let p_max = (top - bottom).sqrt();
    let energies: Vec<f64> = (1..=n).map(|i| bottom + (p_max * i as f64 / n as f64).powi(2)).collect();
    let values: Vec<f64> = energies
        .par_iter()
        .map(|&e| matcher.determinant(Complex64::new(e, 0.0)).map(|d| d.re))
        .collect::<Result<_>>()?;
    let mut levels = Vec::new();
    for i in 1..n {
        let (mut a, mut b) = (energies[i - 1], energies[i]);
        let (mut fa, fb) = (values[i - 1], values[i]);
        if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = matcher.determinant(Complex64::new(m, 0.0))?.re;
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let e = 0.5 * (a + b);
        // a pole of the inner log-derivative also changes sign; keep true roots only
        let d = matcher.determinant(Complex64::new(e, 0.0))?.norm();
        if d < 1e-4 * matcher.scale(Complex64::new(e, 0.0)) {
            levels.push(e);
        }
    }
    Ok(levels)
}

fn well_bottom(potential: &PotentialSpec) -> Result<f64> {
    let hi = potential.length_scale() * 60.0;
    let lo = potential.table.as_ref().map_or(1e-6, |t| t.start().max(1e-9));
    let n = 20000;
    let min = (0..=n)
        .map(|i| potential.value(lo * (hi / lo).powf(i as f64 / n as f64)).re)
        .fold(f64::INFINITY, f64::min);
    if !(min < 0.0) || !min.is_finite() {
        return Err(Error::domain("potential has no attractive well"));
    }
    Ok(min)
}

/// `p = √(E − U)` averaged over the inner quarter of the classically allowed region.
fn inner_momentum(potential: &PotentialSpec, energy: f64) -> Result<f64> {
    let (inner, outer) = allowed_region(potential, energy)?;
    let end = inner + 0.25 * (outer - inner);
    let n = 200;
    let sum: f64 = (0..n)
        .map(|i| {
            let r = inner + (end - inner) * (i as f64 + 0.5) / n as f64;
            (energy - potential.value(r).re).max(0.0).sqrt()
        })
        .sum();
    Ok(sum / n as f64)
}

/// Locates level `level_index` with and without the singular core and compares the shift with theory.
pub fn compare_with_theory(potential: &PotentialSpec, l: u32, level_index: usize) -> Result<ResonanceResult> {
    compare_with_theory_using(potential, l, level_index, &LevelSearch::default())
}

pub fn compare_with_theory_using(
    potential: &PotentialSpec,
    l: u32,
    level_index: usize,
    search: &LevelSearch,
) -> Result<ResonanceResult> {
    let (regular, core) = split_core(potential);
    let levels = real_levels(&regular, l, search)?;
    let e0 = *levels.get(level_index).ok_or_else(|| {
        Error::domain(format!("level index {level_index} out of range; the well holds {} levels", levels.len()))
    })?;
    let omega_n = semiclassical_frequency(&regular, e0)?;
    let p = inner_momentum(&regular, e0)?;
    let Some(core) = core else {
        return Ok(ResonanceResult {
            level_index,
            l,
            energy: Complex64::new(e0, 0.0),
            unperturbed_energy: e0,
            predicted_shift: Some(Complex64::new(0.0, 0.0)),
            measured_shift: Complex64::new(0.0, 0.0),
            omega_n,
            momentum: p,
            perturbative_parameter: 0.0,
            regime_warning: false,
            relative_deviation: None,
        });
    };
    if core.strength.im != 0.0 || core.damping_scale.is_some() {
        return Err(Error::domain("singular core must be an undamped real −α_s/r^s"));
    }
    let s = core.exponent;
    let alpha_s = core.strength.re;
    let parameter = p * alpha_s.abs().powf(1.0 / (s - 2.0));
    let alpha2 = regular.alpha2();
    let predicted = if alpha2.im == 0.0 {
        perturbative_phase_constant_background(p, alpha_s, s, l, alpha2.re, Branch::Absorb)
            .ok()
            .map(|d| -d.value * omega_n)
    } else {
        None
    };
    let spacing = std::f64::consts::PI * omega_n;
    let local = LevelSearch {
        trust_radius: Some(search.trust_radius.unwrap_or(0.5 * spacing)),
        ..*search
    };
    let energy = find_level(potential, l, Complex64::new(e0, 0.0), &local)?;
    let measured = energy - e0;
    let relative_deviation = predicted.filter(|_| measured.norm() > 0.0).map(|d| (measured - d).norm() / measured.norm());
    Ok(ResonanceResult {
        level_index,
        l,
        energy,
        unperturbed_energy: e0,
        predicted_shift: predicted,
        measured_shift: measured,
        omega_n,
        momentum: p,
        perturbative_parameter: parameter,
        regime_warning: parameter >= REGIME_LIMIT,
        relative_deviation,
    })
}

/// [`compare_with_theory`] for several levels at once.
pub fn compare_levels(potential: &PotentialSpec, l: u32, indices: &[usize], search: &LevelSearch) -> Vec<Result<ResonanceResult>> {
    indices.par_iter().map(|&n| compare_with_theory_using(potential, l, n, search)).collect()
}
