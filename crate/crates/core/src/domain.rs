//! Shared domain types.
//!
//! Units throughout are ħ = 1 and 2M = 1, so the radial equation reads
//! `-Φ'' + [l(l+1)/r² + U(r)] Φ = E Φ` with `U(r) = -Σ α_s e^{-r/τ}/r^s - β/r + U_table(r)`.
//! A problem may be stated in the M = 1 convention instead; [`RadialProblem::q_value`]
//! applies the factor of two so the solver always works in 2M = 1 units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the positive real coupling axis the observables are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// α → α + i0, particles are absorbed at the origin.
    Absorb,
    /// α → α − i0, particles are created at the origin.
    Create,
}

impl Branch {
    /// +1 for absorption, −1 for creation.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Absorb => 1.0,
            Branch::Create => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Absorb => Branch::Create,
            Branch::Create => Branch::Absorb,
        }
    }

    /// Conjugates `z` on the creation branch, identity otherwise.
    pub fn orient(self, z: Complex64) -> Complex64 {
        match self {
            Branch::Absorb => z,
            Branch::Create => z.conj(),
        }
    }

    pub fn from_imag_sign(im: f64) -> Self {
        if im < 0.0 {
            Branch::Create
        } else {
            Branch::Absorb
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Absorb => write!(f, "absorb"),
            Branch::Create => write!(f, "create"),
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absorb" | "absorption" => Ok(Branch::Absorb),
            "create" | "creation" => Ok(Branch::Create),
            other => Err(Error::Parse(format!("unknown branch '{other}'"))),
        }
    }
}

/// One `-α e^{-r/τ} / r^s` piece of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTerm {
    pub strength: Complex64,
    pub exponent: f64,
    pub damping_scale: Option<f64>,
}

impl PowerTerm {
    pub fn new(strength: Complex64, exponent: f64) -> Self {
        Self {
            strength,
            exponent,
            damping_scale: None,
        }
    }

    pub fn real(strength: f64, exponent: f64) -> Self {
        Self::new(Complex64::new(strength, 0.0), exponent)
    }

    pub fn damped(mut self, tau: f64) -> Self {
        self.damping_scale = Some(tau);
        self
    }

    /// Contribution to U(r); attractive for positive real strength.
    pub fn value(&self, r: f64) -> Complex64 {
        -self.strength * (self.envelope(r) * r.powf(-self.exponent))
    }

    pub fn derivative(&self, r: f64) -> Complex64 {
        let s = self.exponent;
        let base = r.powf(-s) * self.envelope(r);
        let log_deriv = -s / r - self.damping_scale.map_or(0.0, |tau| 1.0 / tau);
        -self.strength * (base * log_deriv)
    }

    fn envelope(&self, r: f64) -> f64 {
        self.damping_scale.map_or(1.0, |tau| (-r / tau).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Cubic,
    Linear,
}

/// User-supplied potential on a radial grid. Zero outside `[radii[0], radii[n-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    radii: Vec<f64>,
    values: Vec<Complex64>,
    interpolation: Interpolation,
    /// Second derivatives of the natural cubic spline (empty for linear).
    second: Vec<Complex64>,
}

impl TabulatedPotential {
    pub fn new(radii: Vec<f64>, values: Vec<Complex64>, interpolation: Interpolation) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::domain("table radii and values differ in length"));
        }
        if radii.len() < 2 {
            return Err(Error::domain("table needs at least two points"));
        }
        if radii.iter().any(|r| !r.is_finite() || *r <= 0.0)
            || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::domain("table entries must be finite and radii positive"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("table radii must be strictly increasing"));
        }
        let second = match interpolation {
            Interpolation::Linear => Vec::new(),
            Interpolation::Cubic => natural_spline(&radii, &values),
        };
        Ok(Self {
            radii,
            values,
            interpolation,
            second,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn start(&self) -> f64 {
        self.radii[0]
    }

    pub fn end(&self) -> f64 {
        self.radii[self.radii.len() - 1]
    }

    fn segment(&self, r: f64) -> Option<usize> {
        if r < self.start() || r > self.end() {
            return None;
        }
        let i = self.radii.partition_point(|&x| x <= r);
        Some(i.clamp(1, self.radii.len() - 1) - 1)
    }

    pub fn value(&self, r: f64) -> Complex64 {
        let Some(i) = self.segment(r) else {
            return Complex64::new(0.0, 0.0);
        };
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        match self.interpolation {
            Interpolation::Linear => y0 * (1.0 - t) + y1 * t,
            Interpolation::Cubic => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let a = 1.0 - t;
                y0 * a + y1 * t + (m0 * (a * a * a - a) + m1 * (t * t * t - t)) * (h * h / 6.0)
            }
        }
    }

    pub fn derivative(&self, r: f64) -> Complex64 {
        let Some(i) = self.segment(r) else {
            return Complex64::new(0.0, 0.0);
        };
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        match self.interpolation {
            Interpolation::Linear => (y1 - y0) / h,
            Interpolation::Cubic => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let a = 1.0 - t;
                (y1 - y0) / h + (m1 * (3.0 * t * t - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0)
            }
        }
    }
}

fn natural_spline(x: &[f64], y: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut m = vec![zero; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior second derivatives.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![zero; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let lower = h0 / 6.0;
        let mut d = (h0 + h1) / 3.0;
        let mut b = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        if i > 1 {
            let w = lower / diag[i - 1];
            d -= w * upper[i - 1];
            b -= rhs[i - 1] * w;
        }
        diag[i] = d;
        upper[i] = h1 / 6.0;
        rhs[i] = b;
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { zero };
        m[i] = (rhs[i] - next * upper[i]) / diag[i];
    }
    m
}

/// Sum of power-law terms, an optional Coulomb tail −β/r and an optional table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PotentialSpec {
    pub terms: Vec<PowerTerm>,
    pub coulomb_strength: f64,
    pub table: Option<TabulatedPotential>,
}

impl PotentialSpec {
    pub fn new(terms: Vec<PowerTerm>) -> Self {
        Self {
            terms,
            coulomb_strength: 0.0,
            table: None,
        }
    }

    /// Pure `-α/r^s`.
    pub fn single(alpha: Complex64, s: f64) -> Self {
        Self::new(vec![PowerTerm::new(alpha, s)])
    }

    pub fn with_coulomb(mut self, beta: f64) -> Self {
        self.coulomb_strength = beta;
        self
    }

    pub fn with_table(mut self, table: TabulatedPotential) -> Self {
        self.table = Some(table);
        self
    }

    pub fn value(&self, r: f64) -> Complex64 {
        let mut u: Complex64 = self.terms.iter().map(|t| t.value(r)).sum();
        if self.coulomb_strength != 0.0 {
            u -= self.coulomb_strength / r;
        }
        if let Some(table) = &self.table {
            u += table.value(r);
        }
        u
    }

    pub fn derivative(&self, r: f64) -> Complex64 {
        let mut du: Complex64 = self.terms.iter().map(|t| t.derivative(r)).sum();
        if self.coulomb_strength != 0.0 {
            du += self.coulomb_strength / (r * r);
        }
        if let Some(table) = &self.table {
            du += table.derivative(r);
        }
        du
    }

    /// The term with the largest exponent; it governs the behavior at the origin.
    pub fn dominant_term(&self) -> Option<&PowerTerm> {
        self.terms
            .iter()
            .filter(|t| t.strength != Complex64::new(0.0, 0.0))
            .fold(None, |best: Option<&PowerTerm>, t| match best {
                Some(b) if b.exponent >= t.exponent => Some(b),
                _ => Some(t),
            })
    }

    pub fn dominant_index(&self) -> Option<usize> {
        let dom = self.dominant_term()?;
        self.terms.iter().position(|t| std::ptr::eq(t, dom))
    }

    pub fn s_max(&self) -> Option<f64> {
        self.dominant_term().map(|t| t.exponent)
    }

    /// Strength of the 1/r² slot (zero if absent).
    pub fn alpha2(&self) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| t.exponent == 2.0 && t.damping_scale.is_none())
            .map(|t| t.strength)
            .sum()
    }

    /// Copy with `iω` added to the strength of the dominant singular term.
    pub fn with_dominant_imag(&self, omega: f64) -> Self {
        let mut out = self.clone();
        if omega != 0.0 {
            if let Some(i) = self.dominant_index() {
                out.terms[i].strength += Complex64::new(0.0, omega);
            }
        }
        out
    }

    /// Copy with every coupling conjugated.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.strength = t.strength.conj();
        }
        if let Some(table) = &self.table {
            let values = table.values.iter().map(|v| v.conj()).collect();
            out.table = Some(
                TabulatedPotential::new(table.radii.clone(), values, table.interpolation)
                    .expect("conjugated table keeps its invariants"),
            );
        }
        out
    }

    /// Smallest exponent among undamped long-range terms other than the 1/r² slot.
    pub fn tail_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|t| t.damping_scale.is_none() && t.exponent != 2.0 && t.strength.norm() > 0.0)
            .map(|t| t.exponent)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
    }

    /// Characteristic length of the potential, used to size matching radii.
    pub fn length_scale(&self) -> f64 {
        let mut scale: f64 = 1.0;
        for t in &self.terms {
            if t.exponent > 2.0 && t.strength.norm() > 0.0 {
                scale = scale.max(t.strength.norm().powf(1.0 / (t.exponent - 2.0)));
            }
            if let Some(tau) = t.damping_scale {
                scale = scale.max(tau);
            }
        }
        if let Some(table) = &self.table {
            scale = scale.max(table.end());
        }
        scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassConvention {
    /// ħ = 1, 2M = 1: `-Φ'' + UΦ = EΦ`.
    #[default]
    TwoMOne,
    /// ħ = 1, M = 1: `-Φ''/2 + UΦ = EΦ`; energies and couplings are doubled internally.
    MOne,
}

impl MassConvention {
    pub fn factor(self) -> f64 {
        match self {
            MassConvention::TwoMOne => 1.0,
            MassConvention::MOne => 2.0,
        }
    }
}

/// One scattering channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProblem {
    pub l: u32,
    pub energy: f64,
    pub potential: PotentialSpec,
    pub mass_convention: MassConvention,
}

impl RadialProblem {
    pub fn new(l: u32, energy: f64, potential: PotentialSpec) -> Self {
        Self {
            l,
            energy,
            potential,
            mass_convention: MassConvention::TwoMOne,
        }
    }

    pub fn zero_energy(potential: PotentialSpec) -> Self {
        Self::new(0, 0.0, potential)
    }

    pub fn centrifugal(&self) -> f64 {
        let l = self.l as f64;
        l * (l + 1.0)
    }

    /// Wave number in 2M = 1 units.
    pub fn momentum(&self) -> f64 {
        (self.energy * self.mass_convention.factor()).max(0.0).sqrt()
    }

    /// Local `p²(r) = E − U(r) − l(l+1)/r²` in 2M = 1 units.
    pub fn q_value(&self, r: f64) -> Complex64 {
        let f = self.mass_convention.factor();
        (self.energy - self.potential.value(r)) * f - self.centrifugal() / (r * r)
    }

    pub fn q_derivative(&self, r: f64) -> Complex64 {
        let f = self.mass_convention.factor();
        -self.potential.derivative(r) * f + 2.0 * self.centrifugal() / (r * r * r)
    }

    pub fn with_potential(&self, potential: PotentialSpec) -> Self {
        Self {
            potential,
            ..self.clone()
        }
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        Self {
            energy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringObservables {
    /// Scattering length (l = 0) or generalized `-tan δ / k^{2l+1}`.
    pub scattering_length: Complex64,
    pub phase_shift: Complex64,
    pub s_matrix: Complex64,
    pub s_matrix_modulus: f64,
    pub branch: Branch,
}

impl ScatteringObservables {
    pub fn conj(&self) -> Self {
        Self {
            scattering_length: self.scattering_length.conj(),
            phase_shift: self.phase_shift.conj(),
            s_matrix: self.s_matrix.conj().inv(),
            s_matrix_modulus: 1.0 / self.s_matrix_modulus,
            branch: self.branch.flipped(),
        }
    }
}

/// Indices of the Bessel/Hankel functions describing one channel near the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelIndices {
    /// `√((l+1/2)² − α₂)`, principal root (Re ≥ 0).
    pub mu: Complex64,
    /// `2μ/(s−2)`.
    pub nu: Complex64,
    /// `2√((l+1/2)² − α₂)`.
    pub eta: Complex64,
    /// `√((2l+1)² − 4α₂)/(s−2)`, the Hankel order of the near-origin solution.
    pub hankel_order: Complex64,
}

impl ChannelIndices {
    pub fn new(l: u32, alpha2: Complex64, s: f64) -> Result<Self> {
        if !(s > 2.0) || !s.is_finite() {
            return Err(Error::domain("channel indices need s > 2"));
        }
        let mu = centrifugal_index(l, alpha2);
        let lf = 2.0 * l as f64 + 1.0;
        let hankel_order = (lf * lf - 4.0 * alpha2).sqrt() / (s - 2.0);
        Ok(Self {
            mu,
            nu: 2.0 * mu / (s - 2.0),
            eta: 2.0 * mu,
            hankel_order,
        })
    }
}

/// `√((l+1/2)² − α₂)` on the principal branch.
pub fn centrifugal_index(l: u32, alpha2: Complex64) -> Complex64 {
    let h = l as f64 + 0.5;
    (h * h - alpha2).sqrt()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Every invariant breach of a problem; empty when the problem is well formed.
pub fn validate(problem: &RadialProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    if !problem.energy.is_finite() {
        out.push(Violation::new("energy", "energy must be finite"));
    } else if problem.energy < 0.0 {
        out.push(Violation::new("energy", "energy non-negative for scattering"));
    }
    let pot = &problem.potential;
    for (i, t) in pot.terms.iter().enumerate() {
        if !t.exponent.is_finite() || t.exponent < 0.0 {
            out.push(Violation::new(format!("terms[{i}].s"), "exponent non-negative"));
        }
        if !t.strength.re.is_finite() || !t.strength.im.is_finite() {
            out.push(Violation::new(format!("terms[{i}].strength"), "strength must be finite"));
        }
        if let Some(tau) = t.damping_scale {
            if !(tau > 0.0) || !tau.is_finite() {
                out.push(Violation::new(format!("terms[{i}].tau"), "damping scale strictly positive"));
            }
        }
    }
    let slots = pot
        .terms
        .iter()
        .filter(|t| t.exponent == 2.0 && t.damping_scale.is_none())
        .count();
    if slots > 1 {
        out.push(Violation::new("terms", "at most one α₂ slot"));
    }
    if !pot.coulomb_strength.is_finite() || pot.coulomb_strength < 0.0 {
        out.push(Violation::new("beta", "coulomb strength non-negative"));
    }
    out
}

/// Local momentum `p_eff = √(E − U(r) − l(l+1)/r²)`.
///
/// Absorption takes the root with `Im p ≥ 0` (and `Re p ≥ 0` when real); creation is
/// its exact mirror, `conj(p_absorb(conj Q))`, so that `-i p_eff` is always the
/// incoming wave of the chosen branch.
pub fn effective_momentum(r: f64, problem: &RadialProblem, branch: Branch) -> Result<Complex64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain("effective momentum is singular at r = 0"));
    }
    Ok(momentum_from_q(problem.q_value(r), branch))
}

pub fn momentum_from_q(q: Complex64, branch: Branch) -> Complex64 {
    match branch {
        Branch::Absorb => upper_root(q),
        Branch::Create => upper_root(q.conj()).conj(),
    }
}

fn upper_root(q: Complex64) -> Complex64 {
    let p = q.sqrt();
    if p.im < 0.0 || (p.im == 0.0 && p.re < 0.0) {
        -p
    } else {
        p
    }
}

/// On-disk form of a [`PotentialSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    #[serde(default)]
    pub terms: Vec<TermFile>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub r: Vec<f64>,
    pub v_re: Vec<f64>,
    #[serde(default)]
    pub v_im: Vec<f64>,
    #[serde(default = "default_interp")]
    pub interp: Interpolation,
}

fn default_interp() -> Interpolation {
    Interpolation::Cubic
}

impl TryFrom<PotentialFile> for PotentialSpec {
    type Error = Error;

    fn try_from(file: PotentialFile) -> Result<Self> {
        let terms = file
            .terms
            .iter()
            .map(|t| {
                let term = PowerTerm::new(Complex64::new(t.re, t.im), t.s);
                match t.tau {
                    Some(tau) => term.damped(tau),
                    None => term,
                }
            })
            .collect();
        let mut spec = PotentialSpec::new(terms).with_coulomb(file.beta);
        if let Some(tab) = file.table {
            let v_im = if tab.v_im.is_empty() { vec![0.0; tab.v_re.len()] } else { tab.v_im };
            if v_im.len() != tab.v_re.len() {
                return Err(Error::domain("table v_re and v_im differ in length"));
            }
            let values = tab.v_re.iter().zip(&v_im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            spec = spec.with_table(TabulatedPotential::new(tab.r, values, tab.interp)?);
        }
        let violations = validate(&RadialProblem::zero_energy(spec.clone()));
        if let Some(v) = violations.first() {
            return Err(Error::domain(v.to_string()));
        }
        Ok(spec)
    }
}

impl From<&PotentialSpec> for PotentialFile {
    fn from(spec: &PotentialSpec) -> Self {
        PotentialFile {
            terms: spec
                .terms
                .iter()
                .map(|t| TermFile {
                    re: t.strength.re,
                    im: t.strength.im,
                    s: t.exponent,
                    tau: t.damping_scale,
                })
                .collect(),
            beta: spec.coulomb_strength,
            table: spec.table.as_ref().map(|t| TableFile {
                r: t.radii().to_vec(),
                v_re: t.values().iter().map(|v| v.re).collect(),
                v_im: t.values().iter().map(|v| v.im).collect(),
                interp: t.interpolation(),
            }),
        }
    }
}

impl PotentialSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PotentialFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PotentialFile::from(self))?)
    }
}
