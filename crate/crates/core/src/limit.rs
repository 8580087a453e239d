//! Regularization-limit experiments: ordered `ω → 0` schedules, cutoff sequences,
//! the inverse-square convergence rate and the minimal-singularity threshold.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PotentialSpec, PowerTerm, RadialProblem};
use crate::error::{Error, Result};
use crate::solver::{
    inverse_square_core_radius, solve, solve_from_boundary, transported_interior, BoundaryMode, BoundaryValue, Propagator,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// ω decreases geometrically; r0 is re-chosen each step so that Im z₀ ≥ target.
    OrderedOmega,
    /// ω fixed; r0 decreases geometrically.
    CutoffSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSchedule {
    pub mode: ScheduleMode,
    #[serde(default = "default_im_z_target")]
    pub im_z_target: f64,
    pub omega_start: f64,
    #[serde(default = "default_ratio")]
    pub omega_ratio: f64,
    #[serde(default)]
    pub r0_start: f64,
    #[serde(default = "default_ratio")]
    pub r0_ratio: f64,
    pub count: usize,
    /// Relative spread of the last three values below which a run counts as converged.
    #[serde(default = "default_converge_tol")]
    pub converge_tol: f64,
    /// Mode, tolerances and match radius shared by every step.
    #[serde(default)]
    pub base: SolverConfig,
}

fn default_im_z_target() -> f64 {
    20.0
}

fn default_ratio() -> f64 {
    0.5
}

fn default_converge_tol() -> f64 {
    1e-6
}

impl LimitSchedule {
    pub fn ordered(omega_start: f64, omega_ratio: f64, count: usize) -> Self {
        Self {
            mode: ScheduleMode::OrderedOmega,
            im_z_target: default_im_z_target(),
            omega_start,
            omega_ratio,
            r0_start: 0.0,
            r0_ratio: default_ratio(),
            count,
            converge_tol: default_converge_tol(),
            base: SolverConfig::new(1.0),
        }
    }

    pub fn cutoff(omega: f64, r0_start: f64, r0_ratio: f64, count: usize) -> Self {
        Self {
            mode: ScheduleMode::CutoffSequence,
            im_z_target: default_im_z_target(),
            omega_start: omega,
            omega_ratio: 1.0,
            r0_start,
            r0_ratio,
            count,
            converge_tol: default_converge_tol(),
            base: SolverConfig::new(r0_start),
        }
    }

    fn check(&self) -> Result<()> {
        if self.count < 3 {
            return Err(Error::domain("a limit schedule needs at least three steps"));
        }
        if !(self.converge_tol > 0.0) {
            return Err(Error::domain("convergence tolerance must be positive"));
        }
        match self.mode {
            ScheduleMode::OrderedOmega => {
                if !(self.im_z_target >= 1.0) {
                    return Err(Error::domain("Im z₀ target must be at least 1"));
                }
                if !(self.omega_start > 0.0) || !(self.omega_ratio > 0.0 && self.omega_ratio < 1.0) {
                    return Err(Error::domain("ω sequence needs start > 0 and ratio in (0, 1)"));
                }
            }
            ScheduleMode::CutoffSequence => {
                if !(self.r0_start > 0.0) || !(self.r0_ratio > 0.0 && self.r0_ratio < 1.0) {
                    return Err(Error::domain("r0 sequence needs start > 0 and ratio in (0, 1)"));
                }
                if !self.omega_start.is_finite() {
                    return Err(Error::domain("ω must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Solver configuration of every step.
    pub fn steps(&self, problem: &RadialProblem) -> Result<Vec<SolverConfig>> {
        self.check()?;
        (0..self.count)
            .map(|i| {
                let mut cfg = self.base;
                match self.mode {
                    ScheduleMode::OrderedOmega => {
                        cfg.omega = self.omega_start * self.omega_ratio.powi(i as i32);
                        cfg.r0 = ordered_cutoff(problem, cfg.omega, self.im_z_target)?;
                        if let Some(r) = cfg.match_radius {
                            if r <= cfg.r0 {
                                cfg.match_radius = None;
                            }
                        }
                    }
                    ScheduleMode::CutoffSequence => {
                        cfg.omega = self.omega_start;
                        cfg.r0 = self.r0_start * self.r0_ratio.powi(i as i32);
                    }
                }
                Ok(cfg)
            })
            .collect()
    }
}

/// Smallest cutoff the schedule will use; below it `α/r0²` leaves the f64 range.
pub const MIN_CUTOFF: f64 = 1e-150;

/// Largest r0 whose absorption depth reaches `target`.
///
/// For s > 2 this solves `Im z₀ = target`; for the 1/r² case it makes the outgoing
/// admixture `r0^{2 Re ν}` equal `e^{−target}`.
pub fn ordered_cutoff(problem: &RadialProblem, omega: f64, target: f64) -> Result<f64> {
    Ok(ordered_log_cutoff(problem, omega, target)?.exp().max(MIN_CUTOFF))
}

/// `ln r0` of [`ordered_cutoff`] without the f64 floor.
pub fn ordered_log_cutoff(problem: &RadialProblem, omega: f64, target: f64) -> Result<f64> {
    let eff = problem.with_potential(problem.potential.with_dominant_imag(omega));
    let term = eff
        .potential
        .dominant_term()
        .ok_or_else(|| Error::domain("no singular term to regularize"))?;
    let f = eff.mass_convention.factor();
    let s = term.exponent;
    if s > 2.0 {
        let q = s - 2.0;
        let im = (term.strength * f).sqrt().im.abs();
        if im == 0.0 {
            return Err(Error::domain("ordered limit needs ω ≠ 0"));
        }
        Ok((2.0 / q * im / target).ln() * (2.0 / q))
    } else if s == 2.0 {
        let h = eff.l as f64 + 0.5;
        let nu = (h * h - f * term.strength).sqrt();
        if nu.re <= 0.0 {
            return Err(Error::domain("ordered limit needs ω ≠ 0"));
        }
        Ok(-target / (2.0 * nu.re))
    } else {
        Err(Error::domain("leading exponent below 2"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub step_index: usize,
    pub r0: f64,
    /// Kept separately since the 1/r² schedule goes below the f64 range.
    pub log10_r0: f64,
    pub omega: f64,
    pub observable: Option<Complex64>,
    pub im_z0: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Oscillatory,
    Diverged,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Oscillatory => "oscillatory",
            Verdict::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub mode: ScheduleMode,
    pub samples: Vec<LimitSample>,
    pub extrapolated: Option<Complex64>,
    /// Slope of `log|obs − extrapolated|` against `log ω` (ordered) or `log r0` (cutoff).
    pub fitted_rate: Option<f64>,
    pub spread: f64,
    pub verdict: Verdict,
}

/// Observable followed by a limit run: `a` at zero energy, `S` above threshold.
pub fn observable(problem: &RadialProblem, cfg: &SolverConfig) -> Result<(Complex64, Option<f64>)> {
    observable_from(problem, cfg, None)
}

fn observable_from(problem: &RadialProblem, cfg: &SolverConfig, bv: Option<BoundaryValue>) -> Result<(Complex64, Option<f64>)> {
    let sol = match bv {
        Some(bv) => solve_from_boundary(problem, cfg, bv)?,
        None => solve(problem, cfg)?,
    };
    let obs = if problem.energy == 0.0 {
        sol.observables.scattering_length
    } else {
        sol.observables.s_matrix
    };
    Ok((obs, sol.provenance.im_z0))
}

/// Value at x = 0 of the polynomial through the given points (Neville).
pub fn neville_at_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i] * xs[i + m] - p[i + 1] * xs[i]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values.iter().copied().filter(|v| *v != 0.0).map(f64::signum).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x <= -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

/// Verdict on a sequence approaching its limit.
pub fn classify(sequence: &[Complex64], tol: f64) -> (Verdict, f64) {
    let n = sequence.len();
    if n < 3 {
        return (Verdict::Diverged, f64::INFINITY);
    }
    let tail = &sequence[n - 3..];
    let scale = tail[2].norm().max(f64::MIN_POSITIVE);
    let mut spread: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            spread = spread.max((tail[i] - tail[j]).norm());
        }
    }
    let rel = spread / scale;
    if rel < tol {
        return (Verdict::Converged, rel);
    }
    let half = &sequence[n / 2..];
    let diffs: Vec<Complex64> = half.windows(2).map(|w| w[1] - w[0]).collect();
    let darg: Vec<f64> = half.windows(2).map(|w| wrap(w[1].arg() - w[0].arg())).collect();
    let re: Vec<f64> = diffs.iter().map(|d| d.re).collect();
    let im: Vec<f64> = diffs.iter().map(|d| d.im).collect();
    let changes = sign_changes(&darg).max(sign_changes(&re)).max(sign_changes(&im));
    if changes >= 2 {
        (Verdict::Oscillatory, rel)
    } else {
        (Verdict::Diverged, rel)
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Tolerance on `Q·r²` for carrying a 1/r² boundary analytically.
const CORE_TOL: f64 = 1e-13;

fn run_step(problem: &RadialProblem, schedule: &LimitSchedule, i: usize, cfg: &SolverConfig) -> LimitSample {
    let mut ln_r0 = cfg.r0.ln();
    let mut run = || -> Result<(Complex64, Option<f64>)> {
        if schedule.mode != ScheduleMode::OrderedOmega || cfg.boundary_mode != BoundaryMode::SquareWellInterior {
            return observable(problem, cfg);
        }
        ln_r0 = ordered_log_cutoff(problem, cfg.omega, schedule.im_z_target)?;
        let eff = cfg.effective_problem(problem);
        match inverse_square_core_radius(&eff, CORE_TOL) {
            Some(core) if ln_r0 < core.ln() => {
                let mut moved = *cfg;
                moved.r0 = core;
                let bv = transported_interior(&moved, problem, ln_r0, core)?;
                observable_from(problem, &moved, Some(bv))
            }
            _ => observable(problem, cfg),
        }
    };
    let outcome = run();
    let (observable, im_z0, failure) = match outcome {
        Ok((obs, im)) => (Some(obs), im, None),
        Err(e) => (None, cfg.im_z0(problem), Some(e.to_string())),
    };
    LimitSample {
        step_index: i,
        r0: ln_r0.exp(),
        log10_r0: ln_r0 / std::f64::consts::LN_10,
        omega: cfg.omega,
        observable,
        im_z0,
        failure,
    }
}

/// Runs every step of the schedule (in parallel) and judges the limit.
pub fn run_limit(problem: &RadialProblem, schedule: &LimitSchedule) -> Result<LimitReport> {
    let steps = schedule.steps(problem)?;
    let samples: Vec<LimitSample> = steps
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| run_step(problem, schedule, i, cfg))
        .collect();
    Ok(assemble(schedule, samples))
}

fn assemble(schedule: &LimitSchedule, samples: Vec<LimitSample>) -> LimitReport {
    let good: Vec<(f64, Complex64)> = samples
        .iter()
        .filter_map(|s| {
            let x = match schedule.mode {
                ScheduleMode::OrderedOmega => s.omega,
                ScheduleMode::CutoffSequence => s.r0,
            };
            s.observable.map(|o| (x, o))
        })
        .collect();
    let all_ok = good.len() == samples.len();
    let (sequence, extrapolated) = match schedule.mode {
        ScheduleMode::OrderedOmega => {
            // extrapolants of growing order, each through every sample so far
            let (xs, ys): (Vec<f64>, Vec<Complex64>) = good.iter().copied().unzip();
            let running: Vec<Complex64> = (3..=good.len()).map(|n| neville_at_zero(&xs[..n], &ys[..n])).collect();
            let last = running.last().copied();
            (running, last)
        }
        ScheduleMode::CutoffSequence => {
            let seq: Vec<Complex64> = good.iter().map(|p| p.1).collect();
            let last = seq.last().copied();
            (seq, last)
        }
    };
    let (mut verdict, spread) = classify(&sequence, schedule.converge_tol);
    if !all_ok && verdict == Verdict::Converged {
        verdict = Verdict::Diverged;
    }
    let fitted_rate = extrapolated.and_then(|lim| {
        let pts: Vec<(f64, f64)> = good
            .iter()
            .filter(|(x, o)| *x > 0.0 && (o - lim).norm() > 0.0)
            .map(|(x, o)| (x.ln(), (o - lim).norm().ln()))
            .collect();
        let n = pts.len();
        // the last point sits on the extrapolant; fit the leading-order tail before it
        let use_pts = if n > 3 { &pts[..n - 1] } else { &pts[..] };
        let (xs, ys): (Vec<f64>, Vec<f64>) = use_pts.iter().copied().unzip();
        least_squares_slope(&xs, &ys)
    });
    LimitReport {
        mode: schedule.mode,
        samples,
        extrapolated,
        fitted_rate,
        spread,
        verdict,
    }
}

impl LimitReport {
    /// Samples as CSV: `r0,omega,re_obs,im_obs,step_index`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r0,omega,re_obs,im_obs,step_index\n");
        for s in &self.samples {
            let (re, im) = s.observable.map_or((f64::NAN, f64::NAN), |o| (o.re, o.im));
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{}", s.r0, s.omega, re, im, s.step_index);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// `ω/√(α − 1/4)`
    pub expected: f64,
    pub log_r0: Vec<f64>,
    pub log_modulus: Vec<f64>,
    /// Cutoff below which `|S̃| < ε` for ε = 10⁻², from `r0^{ω/√(α−1/4)} = ε`.
    pub epsilon_radius: f64,
}

/// Inverse-square convergence: slope of `log|S̃|` against `log r0` for `−(α + iω)/r²`.
///
/// `S̃` is the ratio of the `r^{1/2−ν}` to the `r^{1/2+ν}` amplitude left by a square-well interior at r0.
pub fn fit_s2_rate(alpha: f64, omega: f64, r0_sequence: &[f64]) -> Result<RateFit> {
    if !(alpha > 0.25) {
        return Err(Error::domain("rate law needs α > 1/4"));
    }
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::domain("ω must be non-negative"));
    }
    if r0_sequence.len() < 3 || r0_sequence.iter().any(|r| !(*r > 0.0) || *r >= 1.0) {
        return Err(Error::domain("need at least three cutoff radii in (0, 1)"));
    }
    let lo = r0_sequence.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r0_sequence.iter().copied().fold(0.0, f64::max);
    if hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::domain("cutoff sequence must span at least three decades"));
    }
    let strength = Complex64::new(alpha, omega);
    let problem = RadialProblem::zero_energy(PotentialSpec::new(vec![PowerTerm::new(strength, 2.0)]));
    let nu = (Complex64::new(0.25, 0.0) - strength).sqrt();
    let (nu_p, nu_m) = if nu.re >= 0.0 { (nu, -nu) } else { (-nu, nu) };
    let r1 = 1.0;
    let cfg = SolverConfig::new(lo);
    let mut log_r0 = Vec::new();
    let mut log_modulus = Vec::new();
    for &r0 in r0_sequence {
        let c = SolverConfig { r0, ..cfg };
        let bv = crate::solver::interior_log_derivative(&c, &problem)?;
        let st = Propagator::new(&problem, c.tolerances()).run(r0, bv.y, &[r1])?;
        let yr = st[0].y * r1;
        let s_tilde = Complex64::new(r1, 0.0).powc(nu_p - nu_m) * (nu_p + 0.5 - yr) / (yr - nu_m - 0.5);
        log_r0.push(r0.ln());
        log_modulus.push(s_tilde.norm().ln());
    }
    let slope = least_squares_slope(&log_r0, &log_modulus).ok_or_else(|| Error::domain("degenerate cutoff sequence"))?;
    let root = (alpha - 0.25).sqrt();
    let expected = omega / root;
    let epsilon_radius = if omega > 0.0 { 1e-2f64.powf(root / omega) } else { 0.0 };
    Ok(RateFit {
        slope,
        expected,
        log_r0,
        log_modulus,
        epsilon_radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub s2: f64,
    pub verdict: Verdict,
    pub report: LimitReport,
}

/// Steps of the threshold cutoff sequence.
pub const THRESHOLD_STEPS: usize = 12;
/// Ratio between successive cutoffs.
pub const THRESHOLD_RATIO: f64 = 0.7;
/// Local phases `∫p dr` the smallest cutoff may cost by default.
pub const PHASE_BUDGET: f64 = 2e4;
/// Hard ceiling on that cost when a sequence is extended to reach [`THRESHOLD_DEPTH`].
pub const PHASE_CEILING: f64 = 1e6;
/// Absorption depth `∫ Im p dr` sought at the smallest cutoff.
pub const THRESHOLD_DEPTH: f64 = 10.0;

fn phase_radius(s1: f64, alpha1: f64, phases: f64) -> f64 {
    let q = s1 / 2.0 - 1.0;
    (phases * q / alpha1.sqrt()).powf(-1.0 / q)
}

fn geometric_down_to(r_min: f64) -> Vec<f64> {
    let r_start = r_min / THRESHOLD_RATIO.powi(THRESHOLD_STEPS as i32 - 1);
    (0..THRESHOLD_STEPS).map(|i| r_start * THRESHOLD_RATIO.powi(i as i32)).collect()
}

/// Cutoff sequence for the threshold study, ending where `∫_{r0} √α1 r^{−s1/2} dr` hits the phase budget.
pub fn threshold_cutoffs(s1: f64, alpha1: f64) -> Vec<f64> {
    geometric_down_to(phase_radius(s1, alpha1, PHASE_BUDGET))
}

/// Cutoff sequence for one `s2`: the default sequence, carried further (up to the phase
/// ceiling) when the absorption `(ω/2√α1)∫ r^{s1/2−s2} dr` needs it to reach the target depth.
pub fn threshold_cutoffs_for(s1: f64, alpha1: f64, s2: f64, omega: f64) -> Vec<f64> {
    let r_budget = phase_radius(s1, alpha1, PHASE_BUDGET);
    let kappa = s2 - s1 / 2.0 - 1.0;
    if kappa <= 0.0 {
        return geometric_down_to(r_budget);
    }
    let r_depth = (1.0 + kappa * THRESHOLD_DEPTH * 2.0 * alpha1.sqrt() / omega).powf(-1.0 / kappa);
    let r_min = r_budget.min(r_depth.max(phase_radius(s1, alpha1, PHASE_CEILING)));
    geometric_down_to(r_min)
}

/// For each s2, runs a cutoff sequence on `−α1/r^{s1} − iω e^{−r} r^{−s2}` and reports the verdict.
pub fn threshold_study(s1: f64, alpha1: f64, s2_values: &[f64], omega: f64) -> Result<Vec<ThresholdEntry>> {
    if !(s1 > 3.0) || !(alpha1 > 0.0) {
        return Err(Error::domain("threshold study needs s1 > 3 and α1 > 0"));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain("ω must be positive"));
    }
    if s2_values.iter().any(|&s2| !(s2 > 0.0 && s2 <= s1)) {
        return Err(Error::domain("s2 values must lie in (0, s1]"));
    }
    s2_values
        .par_iter()
        .map(|&s2| {
            let cutoffs = threshold_cutoffs_for(s1, alpha1, s2, omega);
            let pot = PotentialSpec::new(vec![
                PowerTerm::real(alpha1, s1),
                PowerTerm::new(Complex64::new(0.0, omega), s2).damped(1.0),
            ]);
            let problem = RadialProblem::zero_energy(pot);
            let mut schedule = LimitSchedule::cutoff(0.0, cutoffs[0], THRESHOLD_RATIO, cutoffs.len());
            schedule.base.boundary_mode = BoundaryMode::SquareWellInterior;
            let report = run_limit(&problem, &schedule)?;
            Ok(ThresholdEntry {
                s2,
                verdict: report.verdict,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityStats {
    pub depth_scales: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `max |a_i − a_j| / max |a_i|`
    pub spread: f64,
}

/// Re-solves with the interior depth scaled by each factor and measures the spread of the observable.
pub fn sensitivity_scan(problem: &RadialProblem, config: &SolverConfig, depth_scales: &[f64]) -> Result<SensitivityStats> {
    if depth_scales.len() < 2 {
        return Err(Error::domain("sensitivity scan needs at least two interior variants"));
    }
    if config.boundary_mode != BoundaryMode::SquareWellInterior {
        return Err(Error::domain("sensitivity scan varies the square-well interior"));
    }
    let values: Vec<Complex64> = depth_scales
        .par_iter()
        .map(|&d| {
            let cfg = SolverConfig {
                interior_depth_scale: d,
                ..*config
            };
            observable(problem, &cfg).map(|(o, _)| o)
        })
        .collect::<Result<_>>()?;
    let mut spread: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        scale = scale.max(a.norm());
        for b in &values[i + 1..] {
            spread = spread.max((a - b).norm());
        }
    }
    Ok(SensitivityStats {
        depth_scales: depth_scales.to_vec(),
        values,
        spread: spread / scale.max(f64::MIN_POSITIVE),
    })
}
