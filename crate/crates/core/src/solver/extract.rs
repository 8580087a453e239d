use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::propagate::LogDerivativeState;
use crate::domain::{Branch, RadialProblem, ScatteringObservables};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthExtraction {
    pub value: Complex64,
    /// `R − 1/y(R)` at each matching radius.
    pub raw: Vec<Complex64>,
    /// Size of the last extrapolation correction.
    pub residual: f64,
    /// Orders of the tail corrections that were eliminated.
    pub orders: Vec<f64>,
}

fn check_length_problem(problem: &RadialProblem) -> Result<()> {
    if problem.energy != 0.0 || problem.l != 0 {
        return Err(Error::domain("scattering length extraction needs E = 0 and l = 0"));
    }
    if problem.potential.alpha2().norm() != 0.0 {
        return Err(Error::domain("scattering length undefined with a 1/r² term"));
    }
    if problem.potential.coulomb_strength != 0.0 {
        return Err(Error::domain("scattering length undefined with a Coulomb tail"));
    }
    if let Some(s) = problem.potential.tail_exponent() {
        if s <= 3.0 {
            return Err(Error::domain("scattering length undefined for s ≤ 3"));
        }
    }
    if let Some(s) = problem.potential.s_max() {
        if s <= 3.0 && problem.potential.dominant_term().is_some_and(|t| t.damping_scale.is_none()) {
            return Err(Error::domain("scattering length undefined for s ≤ 3"));
        }
    }
    Ok(())
}

pub(crate) fn length_preconditions(problem: &RadialProblem) -> Result<()> {
    check_length_problem(problem)
}

/// `a(R) = R − 1/y(R)`.
pub fn scattering_length_at(state: &LogDerivativeState, abs_tol: f64) -> Result<Complex64> {
    if state.y.norm() < 10.0 * abs_tol {
        return Err(Error::IllConditioned(format!(
            "|y(R)| = {:.3e} too small at R = {}",
            state.y.norm(),
            state.r
        )));
    }
    Ok(state.r - state.y.inv())
}

/// Scattering length from states at `R, 2R, 4R, …`, Richardson-extrapolated in the tail orders `R^{3−s}`, `R^{2−s}`.
pub fn extract_scattering_length(states: &[LogDerivativeState], problem: &RadialProblem, abs_tol: f64) -> Result<LengthExtraction> {
    check_length_problem(problem)?;
    if states.is_empty() {
        return Err(Error::domain("no matching state"));
    }
    for w in states.windows(2) {
        if ((w[1].r / w[0].r) - 2.0).abs() > 1e-12 {
            return Err(Error::domain("matching radii must double"));
        }
    }
    let raw: Vec<Complex64> = states.iter().map(|s| scattering_length_at(s, abs_tol)).collect::<Result<_>>()?;
    let mut orders = Vec::new();
    if let Some(s) = problem.potential.tail_exponent() {
        orders.push(s - 3.0);
        orders.push(s - 2.0);
    }
    let mut level = raw.clone();
    let mut residual = if raw.len() > 1 {
        (raw[raw.len() - 1] - raw[raw.len() - 2]).norm()
    } else {
        0.0
    };
    let mut used = Vec::new();
    for &p in &orders {
        if level.len() < 2 {
            break;
        }
        let f = 2f64.powf(p);
        let next: Vec<Complex64> = level.windows(2).map(|w| (w[1] * f - w[0]) / (f - 1.0)).collect();
        residual = (next[next.len() - 1] - level[level.len() - 1]).norm();
        level = next;
        used.push(p);
    }
    Ok(LengthExtraction {
        value: *level.last().expect("non-empty"),
        raw,
        residual,
        orders: used,
    })
}

/// Coefficients `a_k(ν) = Π_{j≤k} (4ν² − (2j−1)²) / (k! 8^k)` of the Hankel asymptotic series.
fn hankel_series(nu2: Complex64, x: f64, sign: f64) -> (Complex64, Complex64) {
    // returns (Σ c_k x^{-k}, d/dx of the same) with c_k = (±i)^k a_k
    let i_sign = Complex64::new(0.0, sign);
    let mut coef = Complex64::new(1.0, 0.0);
    let mut sum = coef;
    let mut dsum = Complex64::new(0.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let j = 2.0 * kf - 1.0;
        coef *= i_sign * (4.0 * nu2 - j * j) / (kf * 8.0);
        let term = coef / x.powf(kf);
        let t = term.norm();
        if t > prev {
            break;
        }
        sum += term;
        dsum -= term * (kf / x);
        prev = t;
        if t < 1e-17 * sum.norm() {
            break;
        }
    }
    (sum, dsum)
}

/// Outgoing (`sign = +1`) or incoming (`−1`) Riccati–Hankel wave of order ν and its x-derivative.
pub fn riccati_hankel(l: u32, nu2: Complex64, x: f64, sign: f64) -> (Complex64, Complex64) {
    let theta = x - l as f64 * PI / 2.0;
    let e = Complex64::from_polar(1.0, sign * theta);
    let (s, ds) = hankel_series(nu2, x, sign);
    (e * s, e * (Complex64::new(0.0, sign) * s + ds))
}

/// Squared asymptotic index `(l+1/2)² − α₂` in the problem's units.
pub fn asymptotic_index_squared(problem: &RadialProblem) -> Complex64 {
    let h = problem.l as f64 + 0.5;
    h * h - problem.mass_convention.factor() * problem.potential.alpha2()
}

/// Part of the potential not absorbed into the asymptotic Hankel order.
pub fn residual_potential(problem: &RadialProblem, r: f64) -> Complex64 {
    problem.potential.value(r) + problem.potential.alpha2() / (r * r)
}

/// Matches `y(R)` to `ĥ⁻ − S ĥ⁺` and reports `δ`, `S`, `|S|`.
pub fn extract_phase_and_smatrix(
    state: &LogDerivativeState,
    problem: &RadialProblem,
    branch: Branch,
    rel_tol: f64,
) -> Result<ScatteringObservables> {
    if !(problem.energy > 0.0) {
        return Err(Error::domain("phase extraction needs E > 0"));
    }
    if problem.potential.coulomb_strength != 0.0 {
        return Err(Error::Unsupported("phase extraction with a Coulomb tail".into()));
    }
    let k = problem.momentum();
    let r = state.r;
    let rest = (residual_potential(problem, r) * problem.mass_convention.factor()).norm() / (k * k);
    if rest >= rel_tol {
        return Err(Error::IllConditioned(format!(
            "potential not negligible at R = {r}: |U(R)|/E = {rest:.3e}; increase R"
        )));
    }
    let nu2 = asymptotic_index_squared(problem);
    let x = k * r;
    let (hp, dhp) = riccati_hankel(problem.l, nu2, x, 1.0);
    let (hm, dhm) = riccati_hankel(problem.l, nu2, x, -1.0);
    let y = state.y;
    let den = dhp * k - y * hp;
    let num = dhm * k - y * hm;
    if den.norm() < 1e-12 * (num.norm() + (dhp * k).norm()) {
        return Err(Error::IllConditioned("matching matrix singular; increase R".into()));
    }
    let s = num / den;
    let delta = s.ln() / Complex64::new(0.0, 2.0);
    let lf = problem.l as f64;
    let length = -delta.tan() / k.powf(2.0 * lf + 1.0);
    Ok(ScatteringObservables {
        scattering_length: length,
        phase_shift: delta,
        s_matrix: s,
        s_matrix_modulus: s.norm(),
        branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PotentialSpec;
    use crate::solver::propagate::Representation;

    fn state(r: f64, y: Complex64) -> LogDerivativeState {
        LogDerivativeState {
            r,
            y,
            representation: Representation::Riccati,
            pair: None,
            renormalizations: 0,
            switches: 0,
            steps: 0,
        }
    }

    #[test]
    fn hard_sphere_identity() {
        let prob = RadialProblem::zero_energy(PotentialSpec::default());
        let b = 1.7;
        let sts: Vec<_> = [10.0, 20.0, 40.0].iter().map(|&r| state(r, Complex64::new(1.0 / (r - b), 0.0))).collect();
        let a = extract_scattering_length(&sts, &prob, 1e-12).unwrap();
        assert!((a.value.re - b).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_tail_orders() {
        // synthetic a(R) = a + c₁R^{−3} + c₂R^{−4}
        let prob = RadialProblem::zero_energy(PotentialSpec::single(Complex64::new(1.0, 0.0), 6.0));
        let a = Complex64::new(0.4, -0.4);
        let sts: Vec<_> = [10.0f64, 20.0, 40.0]
            .iter()
            .map(|&r| {
                let ar = a + 3.0 * r.powi(-3) - 7.0 * r.powi(-4);
                state(r, (r - ar).inv())
            })
            .collect();
        let ex = extract_scattering_length(&sts, &prob, 1e-12).unwrap();
        assert!((ex.value - a).norm() < 1e-12);
        assert_eq!(ex.orders, vec![3.0, 4.0]);
    }

    #[test]
    fn length_refusals() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(Complex64::new(1.0, 0.0), 3.0));
        assert!(extract_scattering_length(&[state(10.0, Complex64::new(0.1, 0.0))], &prob, 1e-12).is_err());
        let flat = RadialProblem::zero_energy(PotentialSpec::default());
        let e = extract_scattering_length(&[state(10.0, Complex64::new(1e-13, 0.0))], &flat, 1e-12).unwrap_err();
        assert!(matches!(e, Error::IllConditioned(_)));
    }

    #[test]
    fn free_wave_has_unit_s_matrix() {
        for l in 0..4u32 {
            let k = 0.7;
            let prob = RadialProblem::new(l, k * k, PotentialSpec::default());
            let x = 60.0;
            // regular ĵ_l = (ĥ⁺ − ĥ⁻)/(2i)
            let nu2 = asymptotic_index_squared(&prob);
            let (hp, dhp) = riccati_hankel(l, nu2, x, 1.0);
            let (hm, dhm) = riccati_hankel(l, nu2, x, -1.0);
            let y = (dhp - dhm) * k / (hp - hm);
            let obs = extract_phase_and_smatrix(&state(x / k, y), &prob, Branch::Absorb, 1e-10).unwrap();
            assert!((obs.s_matrix - 1.0).norm() < 1e-12, "l={l} {}", obs.s_matrix);
            assert!(obs.phase_shift.norm() < 1e-12);
        }
    }

    #[test]
    fn riccati_hankel_l1_is_exact() {
        // ĥ⁺_1(x) = e^{i(x−π/2)}(1 + i/x)
        let x = 3.0;
        let (h, dh) = riccati_hankel(1, Complex64::new(2.25, 0.0), x, 1.0);
        let i = Complex64::i();
        let e = (i * (x - PI / 2.0)).exp();
        let exact = e * (1.0 + i / x);
        let dexact = e * (i * (1.0 + i / x) - i / (x * x));
        assert!((h - exact).norm() < 1e-14 && (dh - dexact).norm() < 1e-14);
    }
}
