use num_complex::Complex64;

use super::{BoundaryMode, SolverConfig};
use crate::domain::{momentum_from_q, Branch, RadialProblem};
use crate::error::{Error, Result};
use crate::specfun::cot;

/// Log-derivative at the cutoff radius, possibly with a moved radius and warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValue {
    pub r0: f64,
    pub y: Complex64,
    pub warnings: Vec<String>,
}

/// Logarithmic derivative `ĵ_l'(z)/ĵ_l(z)` of the regular Riccati–Bessel function.
pub fn riccati_bessel_log_derivative(l: u32, z: Complex64) -> Complex64 {
    if l == 0 {
        return cot(z);
    }
    let lf = l as f64;
    if z.norm() <= lf.max(1.0) {
        // ĵ_l(z) = z^{l+1}/(2l+1)!! · Σ_k (−z²/2)^k / (k! (2l+3)(2l+5)…(2l+2k+1))
        let w = -0.5 * z * z;
        let mut term = Complex64::new(1.0, 0.0);
        let (mut sum, mut dsum) = (term, Complex64::new(0.0, 0.0));
        for k in 1..200 {
            let kf = k as f64;
            term *= w / (kf * (2.0 * lf + 2.0 * kf + 1.0));
            sum += term;
            // d/dz of w^k is 2k·w^k / z
            dsum += term * (2.0 * kf);
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return (lf + 1.0 + dsum / sum) / z;
    }
    let mut g = cot(z);
    for k in 1..=l {
        let a = k as f64 / z;
        g = (a - g).inv() - a;
    }
    g
}

fn check_r0(config: &SolverConfig) -> Result<()> {
    if !(config.r0 > 0.0) || !config.r0.is_finite() {
        return Err(Error::domain("cutoff radius r0 must be positive"));
    }
    Ok(())
}

/// `y(r0) = p·ĵ_l'(p r0)/ĵ_l(p r0)` inside a constant well with every term frozen at r0.
pub fn interior_log_derivative(config: &SolverConfig, problem: &RadialProblem) -> Result<BoundaryValue> {
    if config.boundary_mode != BoundaryMode::SquareWellInterior {
        return Err(Error::domain("interior log-derivative needs the square-well-interior mode"));
    }
    check_r0(config)?;
    let eff = config.effective_problem(problem);
    let f = eff.mass_convention.factor();
    let mut r0 = config.r0;
    let mut warnings = Vec::new();
    let depth = config.interior_depth_scale;
    for attempt in 0..4 {
        let q = (eff.energy - depth * eff.potential.value(r0)) * f;
        let p = momentum_from_q(q, Branch::Absorb);
        if p.norm() == 0.0 {
            // zero-energy flat interior: Φ ∝ r^{l+1}
            return Ok(BoundaryValue {
                r0,
                y: Complex64::new((eff.l as f64 + 1.0) / r0, 0.0),
                warnings,
            });
        }
        let z = p * r0;
        let mut y = p * riccati_bessel_log_derivative(eff.l, z);
        if q.im == 0.0 {
            // real well depth: the log-derivative is real for either sign of p²
            y.im = 0.0;
        }
        if y.re.is_finite() && y.im.is_finite() && (y / p).norm() < 1e12 {
            return Ok(BoundaryValue { r0, y, warnings });
        }
        let moved = r0 * (1.0 + 1e-6 * (attempt + 1) as f64);
        warnings.push(format!("p·r0 at a pole of the interior log-derivative; r0 moved from {r0:.17e} to {moved:.17e}"));
        r0 = moved;
    }
    Err(Error::IllConditioned("interior log-derivative stays at a pole".into()))
}

/// Incoming-wave (absorption) or outgoing-wave (creation) boundary value at r0.
pub fn absorption_boundary(config: &SolverConfig, problem: &RadialProblem) -> Result<Complex64> {
    check_r0(config)?;
    if config.boundary_mode == BoundaryMode::SquareWellInterior {
        return Err(Error::domain("absorption boundary needs an absorbing, creating or partial mode"));
    }
    let eff = config.effective_problem(problem);
    let s = eff
        .potential
        .s_max()
        .ok_or_else(|| Error::domain("no singular term to regularize"))?;
    if s < 2.0 {
        return Err(Error::domain(format!("leading exponent s = {s} < 2 is not a singular-regularization problem")));
    }
    let branch = config.branch(problem)?;
    let r0 = config.r0;
    if s == 2.0 {
        let nu = partial_absorption_index(&eff, branch);
        return Ok((0.5 + nu) / r0);
    }
    if config.boundary_mode == BoundaryMode::PartialAbsorptionS2 {
        return Err(Error::domain("partial absorption applies only when the leading term is 1/r²"));
    }
    let p = momentum_from_q(eff.q_value(r0), branch);
    Ok(-branch.sign() * Complex64::i() * p)
}

/// `ν = √((l+1/2)² − α₂)` on the root whose power `r^{1/2+ν}` is the incoming wave.
pub fn partial_absorption_index(problem: &RadialProblem, branch: Branch) -> Complex64 {
    let f = problem.mass_convention.factor();
    let h = problem.l as f64 + 0.5;
    let nu2 = h * h - f * problem.potential.alpha2();
    let lower = |v: Complex64| {
        let r = v.sqrt();
        if r.im > 0.0 || (r.im == 0.0 && r.re < 0.0) {
            -r
        } else {
            r
        }
    };
    match branch {
        Branch::Absorb => lower(nu2),
        Branch::Create => lower(nu2.conj()).conj(),
    }
}

/// Radius below which `Q·r²` equals its pure inverse-square value to `tol` relative.
///
/// Returns `None` when the dominant term is not 1/r² or no such radius exists above 1e-150.
pub fn inverse_square_core_radius(problem: &RadialProblem, tol: f64) -> Option<f64> {
    let term = problem.potential.dominant_term()?;
    if term.exponent != 2.0 {
        return None;
    }
    let f = problem.mass_convention.factor();
    let pure = term.strength * f - problem.centrifugal();
    let scale = (term.strength * f).norm();
    let mut r = problem.potential.length_scale();
    while r > 1e-150 {
        if (problem.q_value(r) * r * r - pure).norm() <= tol * scale {
            return Some(r);
        }
        r *= 0.1;
    }
    None
}

/// Square-well interior boundary at `exp(ln_r0)`, carried analytically out to `r1`.
///
/// Between the two radii only the 1/r² term is kept, so the solution is a mix of
/// `r^{1/2 ± ν}` and `ln r0` may lie far below the f64 range.
pub fn transported_interior(config: &SolverConfig, problem: &RadialProblem, ln_r0: f64, r1: f64) -> Result<BoundaryValue> {
    if config.boundary_mode != BoundaryMode::SquareWellInterior {
        return Err(Error::domain("transport needs the square-well-interior mode"));
    }
    if !(r1 > 0.0) || !(ln_r0 < r1.ln()) {
        return Err(Error::domain("transport needs exp(ln r0) < r1"));
    }
    let eff = config.effective_problem(problem);
    let term = eff
        .potential
        .dominant_term()
        .filter(|t| t.exponent == 2.0)
        .ok_or_else(|| Error::domain("transport needs a dominant 1/r² term"))?;
    let g = term.strength * eff.mass_convention.factor();
    let z = (g * config.interior_depth_scale).sqrt();
    let z = if z.im < 0.0 { -z } else { z };
    let yr0 = if z.norm() == 0.0 {
        Complex64::new(eff.l as f64 + 1.0, 0.0)
    } else {
        z * riccati_bessel_log_derivative(eff.l, z)
    };
    if !(yr0.re.is_finite() && yr0.im.is_finite()) {
        return Err(Error::IllConditioned("interior log-derivative at a pole".into()));
    }
    let h = eff.l as f64 + 0.5;
    let nu = (h * h - g).sqrt();
    let nu = if nu.re < 0.0 { -nu } else { nu };
    let half = Complex64::new(0.5, 0.0);
    // ρ = weight of r^{1/2−ν} relative to r^{1/2+ν}
    let ln_rho0 = ((half + nu - yr0) / (yr0 - half + nu)).ln();
    let ln_rho = ln_rho0 - 2.0 * nu * (r1.ln() - ln_r0);
    let yr1 = if !ln_rho.re.is_finite() || ln_rho.re < -745.0 {
        half + nu
    } else if ln_rho.re > 709.0 {
        half - nu
    } else {
        let rho = ln_rho.exp();
        (half + nu + (half - nu) * rho) / (1.0 + rho)
    };
    Ok(BoundaryValue {
        r0: r1,
        y: yr1 / r1,
        warnings: Vec::new(),
    })
}

/// Boundary value for the configured mode.
pub fn initial_log_derivative(config: &SolverConfig, problem: &RadialProblem) -> Result<BoundaryValue> {
    match config.boundary_mode {
        BoundaryMode::SquareWellInterior => interior_log_derivative(config, problem),
        _ => Ok(BoundaryValue {
            r0: config.r0,
            y: absorption_boundary(config, problem)?,
            warnings: Vec::new(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PotentialSpec;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn config(mode: BoundaryMode, r0: f64) -> SolverConfig {
        SolverConfig {
            boundary_mode: mode,
            ..SolverConfig::new(r0)
        }
    }

    #[test]
    fn interior_deep_absorptive_well_gives_incoming_wave() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.1), 6.0));
        let cfg = config(BoundaryMode::SquareWellInterior, 0.1);
        let y = interior_log_derivative(&cfg, &prob).unwrap().y;
        let p = momentum_from_q(prob.q_value(0.1), Branch::Absorb);
        let im_z = (p * 0.1).im;
        assert!((im_z - 5.0).abs() < 0.01);
        // cot z + i = 2i e^{2iz}/(e^{2iz} − 1)
        assert!((y + Complex64::i() * p).norm() < 2.01 * (-2.0 * im_z).exp() * p.norm());
    }

    #[test]
    fn interior_quarter_period() {
        // U = −(π/4)² at r0 = 1 from a table-free constant: use α/r^s with r0 = 1
        let alpha = (PI / 4.0).powi(2);
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(alpha, 0.0), 6.0));
        let y = interior_log_derivative(&config(BoundaryMode::SquareWellInterior, 1.0), &prob).unwrap().y;
        assert!((y - c(PI / 4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn interior_real_limit() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 6.0));
        let y = interior_log_derivative(&config(BoundaryMode::SquareWellInterior, 0.37), &prob).unwrap().y;
        assert_eq!(y.im, 0.0);
    }

    #[test]
    fn interior_higher_partial_wave() {
        // ĵ_1(z) = sin z / z − cos z
        let z = c(2.3, 0.4);
        let j1 = z.sin() / z - z.cos();
        let dj1 = z.cos() / z - z.sin() / (z * z) + z.sin();
        let g = riccati_bessel_log_derivative(1, z);
        assert!((g - dj1 / j1).norm() < 1e-13);
        let zs = c(0.3, 0.1);
        let j1s = zs.sin() / zs - zs.cos();
        let dj1s = zs.cos() / zs - zs.sin() / (zs * zs) + zs.sin();
        assert!((riccati_bessel_log_derivative(1, zs) - dj1s / j1s).norm() < 1e-10);
    }

    #[test]
    fn absorption_values() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 6.0));
        let y = absorption_boundary(&config(BoundaryMode::FullAbsorption, 0.01), &prob).unwrap();
        assert!((y - c(0.0, -1e6)).norm() < 1e-6);
        let yc = absorption_boundary(&config(BoundaryMode::Creation, 0.01), &prob).unwrap();
        assert_eq!(yc, y.conj());
    }

    #[test]
    fn partial_absorption_value() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(0.5, 0.0), 2.0));
        let y = absorption_boundary(&config(BoundaryMode::PartialAbsorptionS2, 0.01), &prob).unwrap();
        assert!((y - c(50.0, -50.0)).norm() < 1e-12);
        let yc = absorption_boundary(&config(BoundaryMode::Creation, 0.01), &prob).unwrap();
        assert!((yc - c(50.0, 50.0)).norm() < 1e-12);
    }

    #[test]
    fn sub_inverse_square_is_domain_error() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 1.5));
        let e = absorption_boundary(&config(BoundaryMode::FullAbsorption, 0.01), &prob).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }

    #[test]
    fn transport_matches_propagation_in_pure_inverse_square() {
        let prob = RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 2.0));
        let cfg = SolverConfig::new(1e-6).with_omega(0.3);
        let start = interior_log_derivative(&cfg, &prob).unwrap();
        let eff = cfg.effective_problem(&prob);
        let states = crate::solver::Propagator::new(&eff, cfg.tolerances()).run(start.r0, start.y, &[1e-3]).unwrap();
        let moved = transported_interior(&cfg, &prob, 1e-6f64.ln(), 1e-3).unwrap();
        assert!((moved.y - states[0].y).norm() < 1e-7 * states[0].y.norm(), "{} {}", moved.y, states[0].y);
        assert!(inverse_square_core_radius(&prob.with_energy(0.25), 1e-13).unwrap() < 1e-6);
        assert!(inverse_square_core_radius(&RadialProblem::zero_energy(PotentialSpec::single(c(1.0, 0.0), 6.0)), 1e-13).is_none());
    }
}
