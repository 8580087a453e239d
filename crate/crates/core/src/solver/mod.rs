//! Numerical solution of the radial equation with a regularized singular core.
//!
//! A run starts from a boundary value at the cutoff radius `r0`, propagates the
//! log-derivative outward and matches it to free asymptotics.

pub mod boundary;
pub mod extract;
pub mod integrator;
pub mod propagate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use boundary::{
    absorption_boundary, initial_log_derivative, interior_log_derivative, inverse_square_core_radius, transported_interior,
    BoundaryValue,
};
pub use extract::{extract_phase_and_smatrix, extract_scattering_length, LengthExtraction};
pub use integrator::Tolerances;
pub use propagate::{LogDerivativeState, Propagator, Representation};

use crate::domain::{effective_momentum, validate, Branch, RadialProblem, ScatteringObservables};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    SquareWellInterior,
    FullAbsorption,
    PartialAbsorptionS2,
    Creation,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square_well_interior" | "square-well-interior" | "interior" => Ok(Self::SquareWellInterior),
            "full_absorption" | "full-absorption" | "absorption" => Ok(Self::FullAbsorption),
            "partial_absorption_s2" | "partial-absorption-s2" | "partial" => Ok(Self::PartialAbsorptionS2),
            "creation" => Ok(Self::Creation),
            other => Err(Error::Parse(format!("unknown boundary mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub r0: f64,
    /// Added as `iω` to the strength of the dominant singular term.
    pub omega: f64,
    pub boundary_mode: BoundaryMode,
    /// Matching radius; chosen from the problem when absent.
    pub match_radius: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Multiplies the frozen interior depth of the square-well mode.
    pub interior_depth_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl SolverConfig {
    pub fn new(r0: f64) -> Self {
        Self {
            r0,
            omega: 0.0,
            boundary_mode: BoundaryMode::SquareWellInterior,
            match_radius: None,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 5_000_000,
            interior_depth_scale: 1.0,
        }
    }

    pub fn with_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_match_radius(mut self, r: f64) -> Self {
        self.match_radius = Some(r);
        self
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_steps: self.max_steps,
        }
    }

    /// The problem with `iω` applied.
    pub fn effective_problem(&self, problem: &RadialProblem) -> RadialProblem {
        problem.with_potential(problem.potential.with_dominant_imag(self.omega))
    }

    /// Branch selected by the mode and the sign of the regularizing imaginary part.
    pub fn branch(&self, problem: &RadialProblem) -> Result<Branch> {
        let eff = self.effective_problem(problem);
        let im = eff.potential.dominant_term().map_or(0.0, |t| t.strength.im);
        match self.boundary_mode {
            BoundaryMode::Creation => {
                if im > 0.0 {
                    return Err(Error::domain("creation boundary with an absorptive coupling (Im α > 0)"));
                }
                Ok(Branch::Create)
            }
            BoundaryMode::FullAbsorption => {
                if im < 0.0 {
                    return Err(Error::domain("full absorption with a creating coupling (Im α < 0)"));
                }
                Ok(Branch::Absorb)
            }
            _ => Ok(Branch::from_imag_sign(im)),
        }
    }

    /// `|Im z₀| = (2/(s−2))·|Im √(α + iω)|·r0^{−(s−2)/2}` for the dominant term with s > 2.
    pub fn im_z0(&self, problem: &RadialProblem) -> Option<f64> {
        let eff = self.effective_problem(problem);
        let t = eff.potential.dominant_term()?;
        if t.exponent <= 2.0 {
            return None;
        }
        let q = t.exponent - 2.0;
        let root = (t.strength * eff.mass_convention.factor()).sqrt();
        Some(2.0 / q * root.im.abs() * self.r0.powf(-q / 2.0))
    }

    fn check(&self, problem: &RadialProblem) -> Result<()> {
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return Err(Error::domain("r0 must be positive"));
        }
        if !self.omega.is_finite() {
            return Err(Error::domain("ω must be finite"));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_steps == 0 {
            return Err(Error::domain("tolerances and step budget must be positive"));
        }
        if !(self.interior_depth_scale.is_finite()) {
            return Err(Error::domain("interior depth scale must be finite"));
        }
        if let Some(r) = self.match_radius {
            if !(r > self.r0) || !r.is_finite() {
                return Err(Error::domain("match radius must exceed r0"));
            }
        }
        let violations = validate(problem);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::domain(list.join("; ")));
        }
        self.branch(problem)?;
        Ok(())
    }
}

/// How a result was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub r0: f64,
    pub omega: f64,
    pub boundary_mode: BoundaryMode,
    pub branch: Branch,
    pub match_radius: f64,
    pub im_z0: Option<f64>,
    pub boundary_value: Complex64,
    /// Raw `a(R)` values before extrapolation (zero-energy runs).
    pub raw_lengths: Vec<Complex64>,
    pub extrapolation_residual: f64,
    pub steps: usize,
    pub representation_switches: u32,
    pub renormalizations: u32,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub observables: ScatteringObservables,
    pub provenance: Provenance,
}

/// The `0.05/|p_eff|` step cap covers this many radians of local phase past r0.
pub const CAP_PHASES: f64 = 20.0;

/// Matching radius used when the config leaves it open.
pub fn default_match_radius(problem: &RadialProblem, rel_tol: f64) -> Result<f64> {
    let len = problem.potential.length_scale();
    if problem.energy == 0.0 {
        return Ok(50.0 * len);
    }
    let k = problem.momentum();
    let nu2 = extract::asymptotic_index_squared(problem).norm();
    let mut r = (50.0 * len).max(10.0 / k).max((30.0 + 2.0 * nu2) / k);
    let f = problem.mass_convention.factor();
    while (extract::residual_potential(problem, r) * f).norm() / (k * k) >= rel_tol {
        r *= 1.25;
        if r > 1e8 {
            return Err(Error::IllConditioned("potential tail never becomes negligible".into()));
        }
    }
    Ok(r)
}

/// Radius where the WKB validity `|d(1/p)/dr|` of the incoming wave falls below `validity`.
pub fn absorption_radius(problem: &RadialProblem, validity: f64) -> Result<f64> {
    let mut r = problem.potential.length_scale();
    for _ in 0..2000 {
        let p = effective_momentum(r, problem, Branch::Absorb)?;
        let v = (problem.q_derivative(r) / (2.0 * p * p * p)).norm();
        if v.is_finite() && v <= validity {
            return Ok(r);
        }
        r *= 0.95;
    }
    Err(Error::domain("WKB validity never reached; the core is not singular enough"))
}

fn preflight(problem: &RadialProblem, config: &SolverConfig) -> Result<(RadialProblem, Branch)> {
    config.check(problem)?;
    if problem.energy < 0.0 {
        return Err(Error::Unsupported("scattering at negative energy".into()));
    }
    let eff = config.effective_problem(problem);
    let branch = config.branch(problem)?;
    if eff.energy == 0.0 {
        extract::length_preconditions(&eff)?;
    }
    if eff.energy > 0.0 && eff.potential.coulomb_strength != 0.0 {
        return Err(Error::Unsupported("phase extraction with a Coulomb tail".into()));
    }
    Ok((eff, branch))
}

/// Boundary value → propagation → extraction, with provenance.
pub fn solve(problem: &RadialProblem, config: &SolverConfig) -> Result<Solution> {
    preflight(problem, config)?;
    let bv = initial_log_derivative(config, problem)?;
    solve_from_boundary(problem, config, bv)
}

/// Same as [`solve`] but starting from a given boundary value at `bv.r0`.
pub fn solve_from_boundary(problem: &RadialProblem, config: &SolverConfig, bv: BoundaryValue) -> Result<Solution> {
    let (eff, branch) = preflight(problem, config)?;
    let big_r = match config.match_radius {
        Some(r) => r,
        None => default_match_radius(&eff, config.rel_tol)?,
    };
    if !(big_r > bv.r0) {
        return Err(Error::domain("match radius must exceed r0"));
    }
    let p0 = effective_momentum(bv.r0, &eff, branch)?.norm().max(1e-300);
    let cap_end = (bv.r0 + CAP_PHASES / p0).min(2.0 * bv.r0);
    let prop = Propagator::new(&eff, config.tolerances()).with_step_cap(bv.r0, cap_end);
    let mut prov = Provenance {
        r0: bv.r0,
        omega: config.omega,
        boundary_mode: config.boundary_mode,
        branch,
        match_radius: big_r,
        im_z0: config.im_z0(problem),
        boundary_value: bv.y,
        raw_lengths: Vec::new(),
        extrapolation_residual: 0.0,
        steps: 0,
        representation_switches: 0,
        renormalizations: 0,
        warnings: bv.warnings.clone(),
    };
    let observables = if eff.energy == 0.0 {
        let states = prop.run(bv.r0, bv.y, &[big_r, 2.0 * big_r, 4.0 * big_r])?;
        record(&mut prov, states.last().expect("three states"));
        let ex = extract_scattering_length(&states, &eff, config.abs_tol)?;
        prov.raw_lengths = ex.raw.clone();
        prov.extrapolation_residual = ex.residual;
        ScatteringObservables {
            scattering_length: ex.value,
            phase_shift: Complex64::new(0.0, 0.0),
            s_matrix: Complex64::new(1.0, 0.0),
            s_matrix_modulus: 1.0,
            branch,
        }
    } else {
        let states = prop.run(bv.r0, bv.y, &[big_r])?;
        record(&mut prov, &states[0]);
        extract_phase_and_smatrix(&states[0], &eff, branch, config.rel_tol)?
    };
    Ok(Solution { observables, provenance: prov })
}

fn record(prov: &mut Provenance, st: &LogDerivativeState) {
    prov.steps = st.steps;
    prov.representation_switches = st.switches;
    prov.renormalizations = st.renormalizations;
}
