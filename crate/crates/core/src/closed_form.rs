//! Analytic observables of the regularized singular potential `-(α ± i0)/r^s`.
//!
//! Everything here is a direct formula evaluation; the numerical engine in
//! [`crate::solver`] reproduces the same quantities independently.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{centrifugal_index, effective_momentum, Branch, PotentialSpec, RadialProblem};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::specfun::{branched_power, gamma, gamma_real};

/// Above this value of `p·α^{1/(s−2)}` first-order results carry a warning.
pub const PERTURBATIVE_WARN: f64 = 0.3;
/// Above this value the perturbative formulas are refused.
pub const PERTURBATIVE_LIMIT: f64 = 1.0;
/// Distance from a half-integer μ below which the integer-2μ form is used.
pub const HALF_INTEGER_EPS: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A value together with an optional validity warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checked<T> {
    pub value: T,
    /// The smallness parameter that was checked.
    pub parameter: f64,
    pub warning: bool,
}

fn check_small<T>(value: T, parameter: f64, what: &str) -> Result<Checked<T>> {
    if !(parameter <= PERTURBATIVE_LIMIT) {
        return Err(Error::domain(format!(
            "{what} = {parameter:.3} exceeds {PERTURBATIVE_LIMIT}; perturbative formula not applicable"
        )));
    }
    Ok(Checked {
        value,
        parameter,
        warning: parameter > PERTURBATIVE_WARN,
    })
}

fn check_length_args(alpha: f64, s: f64) -> Result<()> {
    if !(s > 3.0) || !s.is_finite() {
        return Err(Error::domain("scattering length undefined for s ≤ 3"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain("coupling α must be positive"));
    }
    Ok(())
}

/// Γ((s−3)/(s−2)) / Γ((s−1)/(s−2)) · (s−2)^{−2/(s−2)}
fn length_prefactor(s: f64) -> Result<f64> {
    let q = s - 2.0;
    Ok(gamma_real((s - 3.0) / q)? / gamma_real((s - 1.0) / q)? * q.powf(-2.0 / q))
}

/// S-wave scattering length as an analytic function of a complex coupling.
///
/// On the absorption sheet the coupling's argument runs over `(0, 2π)`; at `arg α = π`
/// (a repulsive potential) the result is the real repulsive scattering length.
pub fn scattering_length_continued(strength: Complex64, s: f64, branch: Branch) -> Result<Complex64> {
    if !(s > 3.0) || !s.is_finite() {
        return Err(Error::domain("scattering length undefined for s ≤ 3"));
    }
    let q = s - 2.0;
    let power = branched_power(strength, 1.0 / q, branch)?;
    let phase = Complex64::from_polar(1.0, -branch.sign() * PI / q);
    Ok(phase * power * length_prefactor(s)?)
}

/// Scattering length of `-(α ± i0)/r^s`, upper sign (absorption) giving `Im a < 0`.
pub fn scattering_length_singular(alpha: f64, s: f64, branch: Branch) -> Result<Complex64> {
    check_length_args(alpha, s)?;
    scattering_length_continued(c(alpha, 0.0), s, branch)
}

/// Scattering length of the repulsive `+α/r^s`.
pub fn scattering_length_repulsive(alpha: f64, s: f64) -> Result<f64> {
    check_length_args(alpha, s)?;
    Ok(alpha.powf(1.0 / (s - 2.0)) * length_prefactor(s)?)
}

/// Discontinuity `a_absorb − a_create` across the positive real α axis.
pub fn scattering_length_jump(alpha: f64, s: f64) -> Result<Complex64> {
    let rep = scattering_length_repulsive(alpha, s)?;
    Ok(c(0.0, -2.0 * (PI / (s - 2.0)).sin() * rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseSquarePhase {
    pub phase: Complex64,
    pub s_modulus: f64,
    /// Phase difference between the absorption and creation sides.
    pub jump: Complex64,
}

/// Phase shift of `-(α ± i0)/r²` above the critical coupling 1/4.
pub fn inverse_square_phase(alpha: f64, branch: Branch) -> Result<InverseSquarePhase> {
    if !(alpha > 0.25) || !alpha.is_finite() {
        return Err(Error::domain("subcritical coupling: α must exceed 1/4"));
    }
    let root = (alpha - 0.25).sqrt();
    let sign = branch.sign();
    Ok(InverseSquarePhase {
        phase: c(-PI / 4.0, sign * PI / 2.0 * root),
        s_modulus: (-sign * PI * root).exp(),
        jump: c(0.0, PI * root),
    })
}

/// Modulus of the S-matrix of `-(α ± i0)/r²`; unity at and below critical coupling.
pub fn inverse_square_s_modulus(alpha: f64, branch: Branch) -> f64 {
    if alpha <= 0.25 {
        1.0
    } else {
        (-branch.sign() * PI * (alpha - 0.25).sqrt()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLine {
    pub n_r: u32,
    pub energy: Complex64,
}

impl SpectrumLine {
    pub fn width(&self) -> f64 {
        -2.0 * self.energy.im
    }
}

/// Complex levels of an attractive Coulomb field plus `-(α ± i0)/r²`, in the
/// atomic-unit form `E = −1/(2n)` with `n = n_r + 1/2 + ν₊` as tabulated in the literature.
pub fn coulomb_inverse_square_spectrum(n_r: u32, alpha: f64, branch: Branch) -> Result<SpectrumLine> {
    if !(alpha > 0.25) || !alpha.is_finite() {
        return Err(Error::domain("subcritical coupling: α must exceed 1/4"));
    }
    let n = n_r as f64;
    let den = n * n + n + alpha;
    let re = -0.5 * (n + 0.5) / den;
    let im = -0.5 * branch.sign() * (alpha - 0.25).sqrt() / den;
    Ok(SpectrumLine { n_r, energy: c(re, im) })
}

/// Square-well estimate of the lowest level of the cut-off potential.
pub fn ground_state_estimate(alpha: f64, s: f64, r0: f64) -> Result<f64> {
    if !(r0 > 0.0) || !(s > 2.0) {
        return Err(Error::domain("ground state estimate needs r0 > 0 and s > 2"));
    }
    Ok(-alpha / r0.powf(s) + PI * PI / (r0 * r0))
}

fn check_channel(l: u32, alpha2: f64, s: f64) -> Result<(f64, f64)> {
    if !(s > 2.0) || !s.is_finite() {
        return Err(Error::domain("singular exponent must exceed 2"));
    }
    let mu = centrifugal_index(l, c(alpha2, 0.0));
    if !(mu.re > 0.0) || mu.im != 0.0 {
        return Err(Error::domain("supercritical α₂: μ has no positive real part"));
    }
    Ok((mu.re, 2.0 * mu.re / (s - 2.0)))
}

/// `e^{−iπν} Γ(1−ν) / Γ(1+ν)`, refusing the poles at positive integer ν.
fn nu_factor(nu: f64) -> Result<Complex64> {
    if nu >= 1.0 && nu == nu.round() {
        return Err(Error::domain(format!("ν = {nu} is a positive integer; the low-energy expansion diverges")));
    }
    Ok(Complex64::from_polar(1.0, -PI * nu) * (gamma_real(1.0 - nu)? / gamma_real(1.0 + nu)?))
}

fn singular_scale(alpha_s: f64, s: f64) -> f64 {
    alpha_s.powf(1.0 / (s - 2.0)) / (2.0 * (s - 2.0).powf(2.0 / (s - 2.0)))
}

/// Phase shift added by `-(α_s ± i0)/r^s − α₂/r²` to a background of constant local momentum `p`.
pub fn perturbative_phase_constant_background(
    p: f64,
    alpha_s: f64,
    s: f64,
    l: u32,
    alpha2: f64,
    branch: Branch,
) -> Result<Checked<Complex64>> {
    if !(alpha_s > 0.0) || !(p >= 0.0) {
        return Err(Error::domain("need α_s > 0 and p ≥ 0"));
    }
    let (mu, nu) = check_channel(l, alpha2, s)?;
    let x = p * singular_scale(alpha_s, s);
    let nuf = nu_factor(nu)?;
    let half = mu - 0.5;
    let delta = if (half - half.round()).abs() < HALF_INTEGER_EPS && half.round() >= 0.0 {
        let lp = half.round();
        let sign = if (lp as i64) % 2 == 0 { -1.0 } else { 1.0 };
        sign * x.powf(2.0 * lp + 1.0) * nuf * (gamma_real(0.5 - lp)? / gamma_real(1.5 + lp)?)
    } else {
        // sin(πμ)Γ(1−μ) = π/Γ(μ) keeps integer μ finite
        -(PI / gamma_real(mu)?) * x.powf(2.0 * mu) * nuf / gamma_real(1.0 + mu)?
    };
    check_small(branch.orient(delta), p * alpha_s.powf(1.0 / (s - 2.0)), "p·α^{1/(s−2)}")
}

/// Phase shift added by the singular core when the background is the zero-energy Coulomb field `−β/r`.
pub fn perturbative_phase_coulomb_background(
    beta: f64,
    alpha_s: f64,
    s: f64,
    l: u32,
    alpha2: f64,
) -> Result<Checked<Complex64>> {
    if !(beta >= 0.0) || !(alpha_s > 0.0) {
        return Err(Error::domain("need β ≥ 0 and α_s > 0"));
    }
    let (mu, _) = check_channel(l, alpha2, s)?;
    let eta = 2.0 * mu;
    if eta == eta.round() {
        return Err(Error::domain(format!("η = {eta} is an integer; the Coulomb-background form needs non-integer η")));
    }
    let x = 8.0 * beta * singular_scale(alpha_s, s);
    let ratio = gamma_real(1.0 - eta)? / gamma_real(1.0 + eta)?;
    let delta = -(PI * eta).sin() * x.powf(eta) * Complex64::from_polar(1.0, -PI * eta) * (ratio * ratio);
    check_small(delta, beta * alpha_s.powf(1.0 / (s - 2.0)), "β·α^{1/(s−2)}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowEnergy {
    pub phase: Complex64,
    /// Scattering length (l = 0) or volume (l ≥ 1), units length^{2l+1}.
    pub volume: Complex64,
}

/// Threshold phase shift and scattering volume of the pure singular potential in partial wave `l`.
pub fn pure_singular_low_energy(k: f64, alpha_s: f64, s: f64, l: u32, alpha2: f64, branch: Branch) -> Result<Checked<LowEnergy>> {
    if !(alpha_s > 0.0) || !(k >= 0.0) {
        return Err(Error::domain("need α_s > 0 and k ≥ 0"));
    }
    let (_, nu) = check_channel(l, alpha2, s)?;
    let lf = l as f64;
    let scale = singular_scale(alpha_s, s);
    let common = nu_factor(nu)? * (gamma_real(0.5 - lf)? / gamma_real(1.5 + lf)?);
    let parity = if l % 2 == 0 { 1.0 } else { -1.0 };
    let power = 2.0 * lf + 1.0;
    let volume = parity * scale.powf(power) * common;
    let phase = -parity * (k * scale).powf(power) * common;
    check_small(
        LowEnergy {
            phase: branch.orient(phase),
            volume: branch.orient(volume),
        },
        k * alpha_s.powf(1.0 / (s - 2.0)),
        "k·α^{1/(s−2)}",
    )
}

/// Level shift `−Re δ_s ω_n` and width `2 Im δ_s ω_n` from the quantization rule.
pub fn level_shift_and_width(delta_s: Complex64, omega_n: f64, branch: Branch) -> Result<(f64, f64)> {
    let shift = -delta_s.re * omega_n;
    let width = 2.0 * delta_s.im * omega_n;
    if branch == Branch::Absorb && width < 0.0 {
        return Err(Error::Consistency(format!("negative width {width:.3e} on the absorption branch")));
    }
    Ok((shift, width))
}

/// Classically allowed interval `[inner, outer]` of `E − Re U(r) > 0`; `inner = 0` when it reaches the origin.
pub fn allowed_region(potential: &PotentialSpec, energy: f64) -> Result<(f64, f64)> {
    let f = |r: f64| energy - potential.value(r).re;
    let r_lo = 1e-7;
    let r_hi = potential.length_scale() * 60.0;
    let n = 6000;
    let grid: Vec<f64> = (0..=n).map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / n as f64)).collect();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = if f(grid[0]) > 0.0 { Some(0.0) } else { None };
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa <= 0.0 && fb > 0.0 {
            start = Some(bisect(&f, a, b));
        } else if fa > 0.0 && fb <= 0.0 {
            let end = bisect(&f, a, b);
            intervals.push((start.take().unwrap_or(0.0), end));
        }
    }
    if start.is_some() {
        return Err(Error::domain("classically allowed region extends to infinity; level is not bound"));
    }
    match intervals.len() {
        0 => Err(Error::domain("no classically allowed region at this energy")),
        1 => Ok(intervals[0]),
        _ => Err(Error::Unsupported("several classically allowed intervals (multiple wells)".into())),
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let fa_pos = f(a) > 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (f(m) > 0.0) == fa_pos {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `∫ (E − U)^{−1/2} dr` over the allowed region, with `r = t ± u²` near turning points.
pub fn period_integral(potential: &PotentialSpec, energy: f64) -> Result<f64> {
    let (inner, outer) = allowed_region(potential, energy)?;
    let f = |r: f64| (energy - potential.value(r).re).max(0.0);
    let mid = 0.5 * (inner + outer);
    let tol = 1e-9;
    let left = if inner == 0.0 {
        quadrature::integrate_real(|r| safe_inv_sqrt(f(r)), 0.0, mid, tol, 1e-14)?
    } else {
        let span = (mid - inner).sqrt();
        quadrature::integrate_real(|u| 2.0 * u * safe_inv_sqrt(f(inner + u * u)), 0.0, span, tol, 1e-14)?
    };
    let span = (outer - mid).sqrt();
    let right = quadrature::integrate_real(|u| 2.0 * u * safe_inv_sqrt(f(outer - u * u)), 0.0, span, tol, 1e-14)?;
    Ok(left + right)
}

fn safe_inv_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        x.sqrt().recip()
    } else {
        0.0
    }
}

/// Frequency entering `δE_n = −δ_s ω_n`: `ω_n = 2 / ∫(E_n − U)^{−1/2} dr` (2M = 1).
///
/// The level spacing of a semiclassical spectrum is `dE/dn = π ω_n`.
pub fn semiclassical_frequency(potential: &PotentialSpec, energy: f64) -> Result<f64> {
    Ok(2.0 / period_integral(potential, energy)?)
}

/// H–H̄ S-wave scattering length for the van der Waals tail `−C6/r⁶` in the full-absorption model.
pub fn hhbar_scattering_length(mass: f64, c6: f64) -> Result<Complex64> {
    if !(mass > 0.0) || !(c6 > 0.0) || !mass.is_finite() || !c6.is_finite() {
        return Err(Error::domain("need M > 0 and C6 > 0"));
    }
    let mc6 = mass * c6;
    let direct = mc6.powf(0.25) * gamma_real(0.75)? / (2.0 * 2f64.sqrt() * gamma_real(1.25)?) * c(1.0, -1.0);
    let general = scattering_length_singular(mc6, 6.0, Branch::Absorb)?;
    if (direct - general).norm() > 1e-12 * direct.norm() {
        return Err(Error::Consistency(format!("H–H̄ length {direct} disagrees with general formula {general}")));
    }
    Ok(direct)
}

/// Threshold S-matrix `(1 − ika)/(1 + ika)`.
pub fn zero_energy_smatrix(k: f64, a: Complex64) -> Result<Complex64> {
    let ika = Complex64::i() * k * a;
    let den = 1.0 + ika;
    if den.norm() < 1e-300 {
        return Err(Error::domain("S-matrix pole: 1 + ika = 0"));
    }
    Ok((1.0 - ika) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbCheck {
    /// `|d(1/p_eff)/dr|`; WKB holds where this is ≪ 1.
    pub validity: f64,
    /// `p_eff^{−1/2}`
    pub amplitude: Complex64,
    /// `exp(i ∫_r^{r_ref} p_eff dr)`
    pub phase_factor: Complex64,
    /// Radius beyond which the zero-energy WKB form breaks down, `(2√α/s)^{2/(s−2)}`.
    pub breakdown_radius: Option<f64>,
    pub reference_radius: f64,
}

impl WkbCheck {
    pub fn wavefunction(&self) -> Complex64 {
        self.amplitude * self.phase_factor
    }
}

/// Breakdown radius of the zero-energy semiclassical solution near the origin.
pub fn wkb_breakdown_radius(alpha: f64, s: f64) -> Option<f64> {
    if alpha > 0.0 && s > 2.0 {
        Some((2.0 * alpha.sqrt() / s).powf(2.0 / (s - 2.0)))
    } else {
        None
    }
}

/// Semiclassical validity measure and incoming-wave WKB solution at `r`.
pub fn wkb_wavefunction_check(r: f64, problem: &RadialProblem, branch: Branch, reference: Option<f64>) -> Result<WkbCheck> {
    let p = effective_momentum(r, problem, branch)?;
    if p.norm() == 0.0 {
        return Err(Error::domain("turning point: p_eff = 0"));
    }
    let dq = problem.q_derivative(r);
    let validity = (dq / (2.0 * p * p * p)).norm();
    let breakdown = problem
        .potential
        .dominant_term()
        .filter(|t| t.exponent > 2.0)
        .and_then(|t| wkb_breakdown_radius(t.strength.re, t.exponent));
    let r_ref = reference.or(breakdown).unwrap_or(1.0);
    let integral = quadrature::integrate(
        |x| effective_momentum(x, problem, branch).unwrap_or(Complex64::new(0.0, 0.0)),
        r,
        r_ref,
        1e-10,
        1e-12,
    )?;
    Ok(WkbCheck {
        validity,
        amplitude: p.sqrt().inv(),
        phase_factor: (Complex64::i() * integral.value).exp(),
        breakdown_radius: breakdown,
        reference_radius: r_ref,
    })
}

/// Γ values used by several callers, exposed for cross-checks.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    Ok(gamma(c(a, 0.0))?.re / gamma(c(b, 0.0))?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Interpolation, PowerTerm, TabulatedPotential};
    use proptest::prelude::*;

    // Independent reference values computed with mpmath at 30 digits.
    const A_REP_S6: f64 = 0.675_978_240_067_284_7;
    const G34: f64 = 1.225_416_702_465_177_6;
    const G54: f64 = 0.906_402_477_055_477_1;

    #[test]
    fn singular_length_s6() {
        let a = scattering_length_singular(1.0, 6.0, Branch::Absorb).unwrap();
        let expected = A_REP_S6 / 2f64.sqrt();
        assert!((a - c(expected, -expected)).norm() < 1e-12);
        assert!((expected - 0.47799).abs() < 1e-5);
    }

    #[test]
    fn singular_length_s4_is_purely_imaginary() {
        let a = scattering_length_singular(1.0, 4.0, Branch::Absorb).unwrap();
        assert!((a - c(0.0, -1.0)).norm() < 1e-14);
        assert!(a.re.abs() < 1e-12 * a.norm());
    }

    #[test]
    fn creation_length_s5() {
        let a = scattering_length_singular(1.0, 5.0, Branch::Create).unwrap();
        assert!((a.re - 0.3645).abs() < 1e-4 && (a.im - 0.6314).abs() < 1e-4, "{a}");
    }

    #[test]
    fn repulsive_lengths() {
        assert!((scattering_length_repulsive(1.0, 6.0).unwrap() - A_REP_S6).abs() < 1e-12);
        assert!((scattering_length_repulsive(1.0, 4.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lengths_refuse_s_at_most_three() {
        let e = scattering_length_singular(1.0, 3.0, Branch::Absorb).unwrap_err();
        assert_eq!(e, Error::domain("scattering length undefined for s ≤ 3"));
        assert!(scattering_length_repulsive(1.0, 2.5).is_err());
        assert!(scattering_length_jump(1.0, 3.0).is_err());
    }

    #[test]
    fn jump_matches_branch_difference() {
        let d = scattering_length_jump(1.0, 6.0).unwrap();
        assert!((d - c(0.0, -0.95598)).norm() < 1e-5);
        let diff = scattering_length_singular(1.0, 6.0, Branch::Absorb).unwrap()
            - scattering_length_singular(1.0, 6.0, Branch::Create).unwrap();
        assert!((d - diff).norm() < 1e-14);
        let far = scattering_length_jump(1.0, 500.0).unwrap();
        assert!(far.im < 0.0 && far.norm() < 0.02);
    }

    #[test]
    fn inverse_square_examples() {
        let ph = inverse_square_phase(0.5, Branch::Absorb).unwrap();
        assert!((ph.phase - c(-PI / 4.0, PI / 4.0)).norm() < 1e-15);
        assert!((ph.s_modulus - 0.20788).abs() < 1e-5);
        assert!((inverse_square_phase(1.0, Branch::Absorb).unwrap().s_modulus - 0.065_828_721_011_296_66).abs() < 1e-14);
        assert!((inverse_square_phase(0.25 + 1e-14, Branch::Absorb).unwrap().s_modulus - 1.0).abs() < 1e-6);
        assert!(inverse_square_phase(0.2, Branch::Absorb).is_err());
        // |e^{2iδ}| is the reported modulus
        let s = (2.0 * Complex64::i() * ph.phase).exp();
        assert!((s.norm() - ph.s_modulus).abs() < 1e-14);
    }

    #[test]
    fn coulomb_spectrum_examples() {
        let l0 = coulomb_inverse_square_spectrum(0, 0.5, Branch::Absorb).unwrap();
        assert!((l0.energy - c(-0.5, -0.5)).norm() < 1e-15);
        assert!((l0.width() - 1.0).abs() < 1e-15);
        let l1 = coulomb_inverse_square_spectrum(1, 0.5, Branch::Absorb).unwrap();
        assert!((l1.energy - c(-0.3, -0.1)).norm() < 1e-15);
        let crit = coulomb_inverse_square_spectrum(0, 0.25 + 1e-12, Branch::Absorb).unwrap();
        assert!(crit.energy.im.abs() < 1e-5);
        assert!(coulomb_inverse_square_spectrum(0, 0.25, Branch::Absorb).is_err());
    }

    #[test]
    fn ground_state_estimates() {
        let e = ground_state_estimate(1.0, 6.0, 0.1).unwrap();
        assert!((e / -9.9901e5 - 1.0).abs() < 1e-5);
        assert!((ground_state_estimate(1.0, 6.0, 1.0).unwrap() - (PI * PI - 1.0)).abs() < 1e-12);
        assert!(ground_state_estimate(1.0, 6.0, 0.05).unwrap() < e);
    }

    #[test]
    fn constant_background_phase_example() {
        let d = perturbative_phase_constant_background(0.01, 1.0, 6.0, 0, 0.0, Branch::Absorb).unwrap();
        // −(0.01/4)·e^{−iπ/4}·Γ(1/2)Γ(3/4)/(Γ(3/2)Γ(5/4))
        let expected = -(0.01 / 4.0) * Complex64::from_polar(1.0, -PI / 4.0) * (2.0 * G34 / G54);
        assert!((d.value - expected).norm() < 1e-15);
        assert!((d.value - c(-0.00478, 0.00478)).norm() < 1e-5);
        assert!(!d.warning);
        // δ_s = −p·a with a from the scattering-length formula
        let a = scattering_length_singular(1.0, 6.0, Branch::Absorb).unwrap();
        assert!((d.value + 0.01 * a).norm() < 1e-15);
        let cr = perturbative_phase_constant_background(0.01, 1.0, 6.0, 0, 0.0, Branch::Create).unwrap();
        assert_eq!(cr.value, d.value.conj());
        let zero = perturbative_phase_constant_background(0.0, 1.0, 6.0, 0, 0.0, Branch::Absorb).unwrap();
        assert_eq!(zero.value.norm(), 0.0);
    }

    #[test]
    fn constant_background_validity_levels() {
        let w = perturbative_phase_constant_background(0.5, 1.0, 6.0, 0, 0.0, Branch::Absorb).unwrap();
        assert!(w.warning);
        assert!(perturbative_phase_constant_background(2.0, 1.0, 6.0, 0, 0.0, Branch::Absorb).is_err());
        assert!(perturbative_phase_constant_background(0.01, 1.0, 6.0, 0, 0.3, Branch::Absorb).is_err());
    }

    #[test]
    fn half_integer_crossover_is_continuous() {
        // α₂ = ε shifts μ off 1/2 by ~ε; both formula branches must agree across the switch
        let at = perturbative_phase_constant_background(0.05, 1.0, 6.0, 0, 1e-12, Branch::Absorb).unwrap();
        let off = perturbative_phase_constant_background(0.05, 1.0, 6.0, 0, 1e-6, Branch::Absorb).unwrap();
        assert!((at.value - off.value).norm() < 1e-5 * at.value.norm());
        let l1 = perturbative_phase_constant_background(0.05, 1.0, 6.0, 1, 0.0, Branch::Absorb).unwrap();
        let l1_off = perturbative_phase_constant_background(0.05, 1.0, 6.0, 1, 1e-7, Branch::Absorb).unwrap();
        assert!((l1.value - l1_off.value).norm() < 1e-5 * l1.value.norm());
    }

    #[test]
    fn coulomb_background_phase() {
        // η = 1.2 ⇒ (l+1/2)² − α₂ = 0.36 ⇒ α₂ = −0.11
        let d = perturbative_phase_coulomb_background(0.01, 1.0, 6.0, 0, -0.11).unwrap();
        assert!((d.value - c(-0.121_400_979_877_741_57, 0.088_202_974_822_702_26)).norm() < 1e-12);
        let z = perturbative_phase_coulomb_background(0.0, 1.0, 6.0, 0, -0.11).unwrap();
        assert_eq!(z.value.norm(), 0.0);
        assert!(perturbative_phase_coulomb_background(0.01, 1.0, 6.0, 0, 0.0).is_err());
    }

    #[test]
    fn pure_singular_s_wave_matches_length_formula() {
        for s in [5.0, 6.0, 8.0] {
            let le = pure_singular_low_energy(0.0, 1.3, s, 0, 0.0, Branch::Absorb).unwrap();
            let a = scattering_length_singular(1.3, s, Branch::Absorb).unwrap();
            assert!((le.value.volume.norm() - a.norm()).abs() < 1e-12);
            assert_eq!(le.value.phase.norm(), 0.0);
        }
    }

    #[test]
    fn p_wave_volume_poles_and_finite_cases() {
        // ν = 3/(s−2) is an integer for s = 3 and s = 5: the volume diverges there
        assert!(pure_singular_low_energy(0.0, 1.0, 3.0, 1, 0.0, Branch::Absorb).is_err());
        assert!(pure_singular_low_energy(0.0, 1.0, 5.0, 1, 0.0, Branch::Absorb).is_err());
        let v = pure_singular_low_energy(0.0, 1.0, 6.0, 1, 0.0, Branch::Absorb).unwrap();
        assert!(v.value.volume.re.is_finite() && v.value.volume.norm() > 0.0);
        let k = 0.01;
        let le = pure_singular_low_energy(k, 1.0, 6.0, 1, 0.0, Branch::Absorb).unwrap();
        assert!((le.value.phase + le.value.volume * k.powi(3)).norm() < 1e-18);
    }

    #[test]
    fn level_shift_examples() {
        let (shift, width) = level_shift_and_width(c(-0.00478, 0.00478), 1.0, Branch::Absorb).unwrap();
        assert!((shift - 0.00478).abs() < 1e-15 && (width - 0.00956).abs() < 1e-15);
        assert_eq!(level_shift_and_width(c(0.0, 0.0), 3.0, Branch::Absorb).unwrap(), (0.0, 0.0));
        let (s2, w2) = level_shift_and_width(c(-0.00478, 0.00478), 2.0, Branch::Absorb).unwrap();
        assert!((s2 - 2.0 * shift).abs() < 1e-15 && (w2 - 2.0 * width).abs() < 1e-15);
        assert!(level_shift_and_width(c(0.0, -0.1), 1.0, Branch::Absorb).is_err());
    }

    fn square_well(depth: f64, width: f64) -> PotentialSpec {
        let t = TabulatedPotential::new(
            vec![1e-9, width, width * (1.0 + 1e-12)],
            vec![c(-depth, 0.0), c(-depth, 0.0), c(0.0, 0.0)],
            Interpolation::Linear,
        )
        .unwrap();
        PotentialSpec::default().with_table(t)
    }

    #[test]
    fn frequency_of_square_well() {
        let w = semiclassical_frequency(&square_well(1.0, 1.0), -0.5).unwrap();
        // 2 / ∫₀¹ 0.5^{−1/2} dr
        assert!((w - 2.0 * 0.5f64.sqrt()).abs() < 1e-6, "{w}");
    }

    #[test]
    fn frequency_of_harmonic_table() {
        // U = r² − 50 on a fine table: ∫(E−U)^{−1/2} over [0, r_t] = π/2, so ω_n = 4/π
        let r: Vec<f64> = (0..=4000).map(|i| 1e-9 + i as f64 * 0.0025).collect();
        let v: Vec<Complex64> = r.iter().map(|x| c(x * x - 50.0, 0.0)).collect();
        let pot = PotentialSpec::default().with_table(TabulatedPotential::new(r, v, Interpolation::Cubic).unwrap());
        let w = semiclassical_frequency(&pot, -30.0).unwrap();
        assert!((w - 4.0 / PI).abs() < 1e-4 * (4.0 / PI), "{w}");
    }

    #[test]
    fn frequency_below_minimum_is_error() {
        assert!(matches!(semiclassical_frequency(&square_well(1.0, 1.0), -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn hhbar_examples() {
        let a = hhbar_scattering_length(1.0, 1.0).unwrap();
        let expected = G34 / (2.0 * 2f64.sqrt() * G54);
        assert!((a - c(expected, -expected)).norm() < 1e-14);
        let a16 = hhbar_scattering_length(1.0, 16.0).unwrap();
        assert!((a16.norm() / a.norm() - 2.0).abs() < 1e-14);
        // C6 ∝ n⁴ ⇒ a ∝ n
        for n in [1.0f64, 2.0, 3.0, 7.0] {
            let an = hhbar_scattering_length(1.0, n.powi(4)).unwrap();
            assert!((an / a - n).norm() < 1e-12 * n);
        }
        assert!(hhbar_scattering_length(1.0, 0.0).is_err());
    }

    #[test]
    fn smatrix_examples() {
        assert_eq!(zero_energy_smatrix(0.0, c(0.478, -0.478)).unwrap(), c(1.0, 0.0));
        let a = c(0.478, -0.478);
        let s = zero_energy_smatrix(0.1, a).unwrap();
        assert!(s.norm() < 1.0);
        assert!((s.norm() - (1.0 - 2.0 * 0.1 * 0.478)).abs() < 5e-3);
        assert!((zero_energy_smatrix(3.0, c(2.0, 0.0)).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(zero_energy_smatrix(1.0, c(0.0, 1.0)).is_err());
    }

    #[test]
    fn wkb_validity_regions() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 6.0));
        let deep = wkb_wavefunction_check(0.01, &prob, Branch::Absorb, None).unwrap();
        assert!(deep.validity < 1e-3);
        let rstar = wkb_breakdown_radius(1.0, 6.0).unwrap();
        assert!((rstar - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let edge = wkb_wavefunction_check(rstar, &prob, Branch::Absorb, None).unwrap();
        assert!((edge.validity - 1.0).abs() < 1e-12);
        // amplitude·phase reproduces p^{-1/2} at the reference point
        let at_ref = wkb_wavefunction_check(rstar, &prob, Branch::Absorb, Some(rstar)).unwrap();
        assert!((at_ref.phase_factor - 1.0).norm() < 1e-14);
        let big = RadialProblem::zero_energy(PotentialSpec::new(vec![PowerTerm::real(400.0, 2.0)]));
        for r in [1e-3, 0.1, 10.0] {
            let chk = wkb_wavefunction_check(r, &big, Branch::Absorb, Some(1.0)).unwrap();
            assert!((chk.validity - 0.05).abs() < 1e-12);
        }
        assert!(wkb_wavefunction_check(0.0, &prob, Branch::Absorb, None).is_err());
    }

    proptest! {
        #[test]
        fn conjugation_of_closed_forms(alpha in 0.01f64..100.0, s in 3.05f64..12.0) {
            let a = scattering_length_singular(alpha, s, Branch::Absorb).unwrap();
            let b = scattering_length_singular(alpha, s, Branch::Create).unwrap();
            prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm());
        }

        #[test]
        fn continuation_lands_on_repulsive(alpha in 0.01f64..100.0, s in 3.05f64..12.0) {
            let rep = scattering_length_repulsive(alpha, s).unwrap();
            let cont = scattering_length_continued(Complex64::from_polar(alpha, PI), s, Branch::Absorb).unwrap();
            prop_assert!((cont - rep).norm() <= 1e-10 * rep);
            let cont_c = scattering_length_continued(Complex64::from_polar(alpha, -PI), s, Branch::Create).unwrap();
            prop_assert!((cont_c - rep).norm() <= 1e-10 * rep);
        }

        #[test]
        fn sign_law(alpha in 0.01f64..100.0, s in 3.05f64..12.0) {
            let a = scattering_length_singular(alpha, s, Branch::Absorb).unwrap();
            if s < 3.99 { prop_assert!(a.re < 0.0); }
            if s > 4.01 { prop_assert!(a.re > 0.0); }
            prop_assert!(a.im < 0.0);
        }

        #[test]
        fn absorptive_phase_has_positive_imaginary_part(p in 0.0001f64..0.2, alpha in 0.001f64..1.0, s in 4.5f64..10.0, l in 0u32..3) {
            let d = perturbative_phase_constant_background(p, alpha, s, l, 0.0, Branch::Absorb);
            if let Ok(d) = d {
                prop_assert!(d.value.im > 0.0);
            }
        }
    }

    #[test]
    fn s4_real_part_vanishes() {
        for alpha in [0.5, 1.0, 2.0, 17.0] {
            let a = scattering_length_singular(alpha, 4.0, Branch::Absorb).unwrap();
            assert!(a.re.abs() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn fixed_sign_over_coupling_scan() {
        for s in [3.5, 5.0, 6.0, 8.0] {
            let signs: Vec<bool> = (0..=60)
                .map(|i| 10f64.powf(-3.0 + 0.1 * i as f64))
                .map(|a| scattering_length_singular(a, s, Branch::Absorb).unwrap().re > 0.0)
                .collect();
            assert!(signs.iter().all(|&x| x == signs[0]));
        }
    }

    #[test]
    fn continuation_path_is_continuous() {
        let (alpha, s) = (1.7, 6.0);
        let mut prev = scattering_length_singular(alpha, s, Branch::Absorb).unwrap();
        for i in 1..=400 {
            let th = PI * i as f64 / 400.0;
            let cur = scattering_length_continued(Complex64::from_polar(alpha, th), s, Branch::Absorb).unwrap();
            assert!((cur - prev).norm() < 0.01);
            prev = cur;
        }
    }
}
