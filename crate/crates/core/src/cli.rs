//! Command-line front end.
//!
//! Every subcommand resolves its arguments into a [`Job`], which is what the run
//! manifest records and what `replay` re-executes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closed_form::{
    coulomb_inverse_square_spectrum, hhbar_scattering_length, inverse_square_phase, inverse_square_s_modulus,
    scattering_length_singular,
};
use crate::domain::{Branch, PotentialFile, PotentialSpec, RadialProblem};
use crate::error::{Error, Result};
use crate::limit::{ordered_cutoff, run_limit, LimitSchedule};
use crate::perturbation::compare_with_theory;
use crate::solver::{absorption_radius, solve, BoundaryMode, Provenance, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "singscat", version, about = "Scattering on singular potentials with absorptive regularization")]
pub struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, env = "SINGSCAT_JOBS", global = true)]
    pub jobs: Option<usize>,
    /// Write outputs and a run manifest to this directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scattering length of −α/r^s on one side of the cut.
    Length(LengthArgs),
    /// Phase shift and |S| for −α/r² above critical coupling.
    PhaseS2(PhaseArgs),
    /// Complex levels of a Coulomb field plus −α/r².
    Spectrum(SpectrumArgs),
    /// Run a limit schedule from a JSON config.
    Sweep(SweepArgs),
    /// Level shift and width caused by an absorbing core.
    Perturb(PerturbArgs),
    /// H–H̄ scattering length for a −C6/r⁶ tail.
    Hhbar(HhbarArgs),
    /// Re-run a manifest and compare outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, default_value = "absorb")]
    pub branch: Branch,
    /// Also integrate the radial equation.
    #[arg(long)]
    pub numeric: bool,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Finite absorptive coupling; selects the square-well interior.
    #[arg(long)]
    pub omega: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: f64,
    #[arg(long, default_value = "absorb")]
    pub branch: Branch,
    #[arg(long, default_value_t = 1.0)]
    pub energy: f64,
    /// Also integrate at E and 10E.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 5)]
    pub nr_max: u32,
    #[arg(long, default_value = "absorb")]
    pub branch: Branch,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PerturbArgs {
    #[arg(long)]
    pub potential: PathBuf,
    #[arg(long)]
    pub level: usize,
    #[arg(long, default_value_t = 0)]
    pub l: u32,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HhbarArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub c6: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Tabulate n = 1..N with C6 scaled as n⁴.
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Sweep input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub potential: PotentialFile,
    #[serde(default)]
    pub l: u32,
    #[serde(default)]
    pub energy: f64,
    pub schedule: LimitSchedule,
}

/// Fully resolved work unit, file inputs included by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Length(LengthArgs),
    PhaseS2(PhaseArgs),
    Spectrum(SpectrumArgs),
    Sweep { config: SweepConfig },
    Perturb { potential: PotentialFile, level: usize, l: u32 },
    Hhbar(HhbarArgs),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub tool: String,
    pub schema: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, serde_json::Value>,
    /// Relative to the manifest directory.
    pub outputs: Vec<String>,
    pub versions: Versions,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// One named output of a job.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub content: String,
}

fn output(name: &str, content: String) -> Output {
    Output { name: name.into(), content }
}

#[derive(Serialize)]
struct Cx {
    re: f64,
    im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Length(_) => "length",
            Job::PhaseS2(_) => "phase-s2",
            Job::Spectrum(_) => "spectrum",
            Job::Sweep { .. } => "sweep",
            Job::Perturb { .. } => "perturb",
            Job::Hhbar(_) => "hhbar",
        }
    }

    pub fn run(&self) -> Result<Vec<Output>> {
        match self {
            Job::Length(a) => run_length(a),
            Job::PhaseS2(a) => run_phase(a),
            Job::Spectrum(a) => run_spectrum(a),
            Job::Sweep { config } => run_sweep(config),
            Job::Perturb { potential, level, l } => {
                let pot = PotentialSpec::try_from(potential.clone())?;
                let res = compare_with_theory(&pot, *l, *level)?;
                Ok(vec![output("perturb.json", json(&res)?)])
            }
            Job::Hhbar(a) => run_hhbar(a),
        }
    }

    fn inputs(&self) -> Result<BTreeMap<String, serde_json::Value>> {
        Ok(serde_json::from_value(serde_json::to_value(self)?)?)
    }

    fn from_inputs(inputs: &BTreeMap<String, serde_json::Value>) -> Result<Self> {
        let map: serde_json::Map<String, serde_json::Value> = inputs.clone().into_iter().collect();
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite")))
    }
}

#[derive(Serialize)]
struct NumericLength {
    value: Cx,
    relative_deviation: f64,
    provenance: Provenance,
}

#[derive(Serialize)]
struct LengthOutput {
    alpha: f64,
    s: f64,
    branch: Branch,
    closed_form: Cx,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric: Option<NumericLength>,
}

fn run_length(a: &LengthArgs) -> Result<Vec<Output>> {
    let closed = scattering_length_singular(a.alpha, a.s, a.branch)?;
    let numeric = if a.numeric {
        let problem = RadialProblem::zero_energy(PotentialSpec::single(Complex64::new(a.alpha, 0.0), a.s));
        let config = match a.omega {
            Some(w) => {
                let omega = a.branch.sign() * positive("omega", w)?;
                let r0 = match a.r0 {
                    Some(r0) => positive("r0", r0)?,
                    None => ordered_cutoff(&problem, omega, 20.0)?,
                };
                SolverConfig::new(r0).with_omega(omega)
            }
            None => {
                let r0 = match a.r0 {
                    Some(r0) => positive("r0", r0)?,
                    None => absorption_radius(&problem, 1e-4)?,
                };
                let mode = match a.branch {
                    Branch::Absorb => BoundaryMode::FullAbsorption,
                    Branch::Create => BoundaryMode::Creation,
                };
                SolverConfig::new(r0).with_mode(mode)
            }
        };
        let sol = solve(&problem, &config)?;
        let value = sol.observables.scattering_length;
        Some(NumericLength {
            value: value.into(),
            relative_deviation: (value - closed).norm() / closed.norm(),
            provenance: sol.provenance,
        })
    } else {
        None
    };
    let out = LengthOutput {
        alpha: a.alpha,
        s: a.s,
        branch: a.branch,
        closed_form: closed.into(),
        numeric,
    };
    Ok(vec![output("length.json", json(&out)?)])
}

#[derive(Serialize)]
struct NumericPhase {
    energies: [f64; 2],
    s_modulus: [f64; 2],
    phase_shift: [Cx; 2],
    /// Largest deviation of |S| from the closed form.
    modulus_deviation: f64,
}

#[derive(Serialize)]
struct PhaseOutput {
    alpha2: f64,
    branch: Branch,
    phase: Cx,
    s_modulus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric: Option<NumericPhase>,
}

fn run_phase(a: &PhaseArgs) -> Result<Vec<Output>> {
    if !a.alpha2.is_finite() || a.alpha2 < 0.25 {
        return Err(Error::domain("subcritical coupling: α₂ must be at least 1/4"));
    }
    let phase = if a.alpha2 == 0.25 {
        Complex64::new(-std::f64::consts::FRAC_PI_4, 0.0)
    } else {
        inverse_square_phase(a.alpha2, a.branch)?.phase
    };
    let s_modulus = inverse_square_s_modulus(a.alpha2, a.branch);
    let numeric = if a.numeric {
        positive("energy", a.energy)?;
        let mode = match a.branch {
            Branch::Absorb => BoundaryMode::PartialAbsorptionS2,
            Branch::Create => BoundaryMode::Creation,
        };
        let energies = [a.energy, 10.0 * a.energy];
        let mut moduli = [0.0; 2];
        let mut phases = [Complex64::new(0.0, 0.0); 2];
        for (i, &e) in energies.iter().enumerate() {
            let problem = RadialProblem::new(0, e, PotentialSpec::single(Complex64::new(a.alpha2, 0.0), 2.0));
            let r0 = 1e-3 / e.sqrt().max(1.0);
            let obs = solve(&problem, &SolverConfig::new(r0).with_mode(mode))?.observables;
            moduli[i] = obs.s_matrix_modulus;
            phases[i] = obs.phase_shift;
        }
        Some(NumericPhase {
            energies,
            s_modulus: moduli,
            phase_shift: phases.map(Cx::from),
            modulus_deviation: moduli.iter().map(|m| (m - s_modulus).abs()).fold(0.0, f64::max),
        })
    } else {
        None
    };
    let out = PhaseOutput {
        alpha2: a.alpha2,
        branch: a.branch,
        phase: phase.into(),
        s_modulus,
        numeric,
    };
    Ok(vec![output("phase-s2.json", json(&out)?)])
}

fn run_spectrum(a: &SpectrumArgs) -> Result<Vec<Output>> {
    let mut csv = String::from("n_r,re_e,im_e,gamma\n");
    for n in 0..=a.nr_max {
        let line = coulomb_inverse_square_spectrum(n, a.alpha2, a.branch)?;
        let _ = writeln!(csv, "{},{:.16e},{:.16e},{:.16e}", n, line.energy.re, line.energy.im, line.width());
    }
    Ok(vec![output("spectrum.csv", csv)])
}

fn run_sweep(config: &SweepConfig) -> Result<Vec<Output>> {
    let pot = PotentialSpec::try_from(config.potential.clone())?;
    if !config.energy.is_finite() || config.energy < 0.0 {
        return Err(Error::domain("sweep energy must be finite and non-negative"));
    }
    let problem = RadialProblem::new(config.l, config.energy, pot);
    let report = run_limit(&problem, &config.schedule)?;
    let mut report_json = report.to_json()?;
    report_json.push('\n');
    Ok(vec![output("sweep-report.json", report_json), output("sweep-samples.csv", report.to_csv())])
}

#[derive(Serialize)]
struct HhbarRow {
    n: u32,
    c6: f64,
    scattering_length: Cx,
    /// `a(n)/a(1)`; equals n when C6 ∝ n⁴.
    ratio: f64,
}

#[derive(Serialize)]
struct HhbarOutput {
    mass: f64,
    c6: f64,
    scattering_length: Cx,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    scaling: Vec<HhbarRow>,
}

fn run_hhbar(a: &HhbarArgs) -> Result<Vec<Output>> {
    let base = hhbar_scattering_length(a.mass, a.c6)?;
    let mut scaling = Vec::new();
    for n in 1..=a.n.unwrap_or(0) {
        let c6 = a.c6 * (n as f64).powi(4);
        let len = hhbar_scattering_length(a.mass, c6)?;
        scaling.push(HhbarRow {
            n,
            c6,
            scattering_length: len.into(),
            ratio: len.norm() / base.norm(),
        });
    }
    let out = HhbarOutput {
        mass: a.mass,
        c6: a.c6,
        scattering_length: base.into(),
        scaling,
    };
    Ok(vec![output("hhbar.json", json(&out)?)])
}

fn resolve(command: Command) -> Result<Job> {
    Ok(match command {
        Command::Length(a) => Job::Length(a),
        Command::PhaseS2(a) => Job::PhaseS2(a),
        Command::Spectrum(a) => Job::Spectrum(a),
        Command::Sweep(a) => Job::Sweep { config: read_json(&a.config)? },
        Command::Perturb(a) => Job::Perturb {
            potential: read_json(&a.potential)?,
            level: a.level,
            l: a.l,
        },
        Command::Hhbar(a) => Job::Hhbar(a),
        Command::Replay(_) => unreachable!("replay is handled before resolution"),
    })
}

fn write_outputs(dir: &Path, job: &Job, outputs: &[Output]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for o in outputs {
        std::fs::write(dir.join(&o.name), &o.content)?;
    }
    let manifest = RunManifest {
        command: job.name().into(),
        inputs: job.inputs()?,
        outputs: outputs.iter().map(|o| o.name.clone()).collect(),
        versions: Versions {
            tool: env!("CARGO_PKG_VERSION").into(),
            schema: SCHEMA_VERSION,
        },
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    std::fs::write(dir.join(MANIFEST_NAME), json(&manifest)?)?;
    Ok(())
}

/// Re-run the job recorded in a manifest; returns the number of outputs compared.
pub fn replay(manifest_path: &Path) -> Result<usize> {
    let manifest: RunManifest = read_json(manifest_path)?;
    if manifest.versions.schema != SCHEMA_VERSION {
        return Err(Error::Unsupported(format!("manifest schema {}", manifest.versions.schema)));
    }
    let job = Job::from_inputs(&manifest.inputs)?;
    if job.name() != manifest.command {
        return Err(Error::Parse(format!("manifest command '{}' does not match its inputs", manifest.command)));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let fresh = job.run()?;
    let names: Vec<&str> = fresh.iter().map(|o| o.name.as_str()).collect();
    if names != manifest.outputs.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Consistency(format!("replay produced outputs {names:?}, manifest lists {:?}", manifest.outputs)));
    }
    for o in &fresh {
        let path = dir.join(&o.name);
        let stored = std::fs::read(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if stored != o.content.as_bytes() {
            return Err(Error::Consistency(format!("{} differs on replay", o.name)));
        }
    }
    Ok(fresh.len())
}

fn execute(cli: Cli) -> Result<String> {
    if let Command::Replay(a) = &cli.command {
        let n = replay(&a.manifest)?;
        return Ok(format!("replay identical: {n} output(s)\n"));
    }
    let job = resolve(cli.command)?;
    let outputs = job.run()?;
    if let Some(dir) = &cli.out {
        write_outputs(dir, &job, &outputs)?;
    }
    Ok(outputs.into_iter().next().map(|o| o.content).unwrap_or_default())
}

/// Parse arguments, run, print, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(Error::domain("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(e.to_string()))
            .and_then(|pool| pool.install(|| execute(cli))),
        None => execute(cli),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
