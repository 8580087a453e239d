use std::f64::consts::PI;

use num_complex::Complex64;
use singscat::closed_form::{inverse_square_s_modulus, scattering_length_repulsive, scattering_length_singular};
use singscat::domain::{Interpolation, PotentialSpec, PowerTerm, RadialProblem, TabulatedPotential};
use singscat::solver::{absorption_radius, solve, BoundaryMode, Propagator, SolverConfig};
use singscat::{Branch, Error};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn van_der_waals(alpha: f64) -> RadialProblem {
    RadialProblem::zero_energy(PotentialSpec::single(c(alpha, 0.0), 6.0))
}

fn full_absorption(r0: f64) -> SolverConfig {
    SolverConfig::new(r0).with_mode(BoundaryMode::FullAbsorption)
}

#[test]
fn absorptive_length_matches_closed_form() {
    let sol = solve(&van_der_waals(1.0), &full_absorption(1e-3).with_match_radius(50.0)).unwrap();
    let exact = scattering_length_singular(1.0, 6.0, Branch::Absorb).unwrap();
    let a = sol.observables.scattering_length;
    assert!((a - exact).norm() < 1e-3 * exact.norm(), "{a} vs {exact}");
    assert_eq!(sol.provenance.raw_lengths.len(), 3);
}

#[test]
fn repulsive_length_matches_closed_form() {
    let prob = van_der_waals(-1.0);
    let sol = solve(&prob, &SolverConfig::new(0.02)).unwrap();
    let exact = scattering_length_repulsive(1.0, 6.0).unwrap();
    assert!((sol.observables.scattering_length - exact).norm() < 1e-4, "{}", sol.observables.scattering_length);
}

#[test]
fn hard_sphere_table() {
    let (b, v) = (1.5, 1e6);
    let table = TabulatedPotential::new(
        vec![1e-6, b, b * (1.0 + 1e-12), 3.0],
        vec![c(v, 0.0), c(v, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        Interpolation::Linear,
    )
    .unwrap();
    let prob = RadialProblem::zero_energy(PotentialSpec::default().with_table(table));
    let sol = solve(&prob, &SolverConfig::new(1e-3)).unwrap();
    // square barrier of height κ²: a = b − tanh(κb)/κ
    let kappa = v.sqrt();
    let exact = b - (kappa * b).tanh() / kappa;
    assert!((sol.observables.scattering_length - exact).norm() < 1e-7, "{}", sol.observables.scattering_length);
}

#[test]
fn creation_is_conjugate_of_absorption() {
    let abs = solve(&van_der_waals(1.0), &full_absorption(2e-3)).unwrap().observables;
    let cre = solve(&van_der_waals(1.0), &SolverConfig::new(2e-3).with_mode(BoundaryMode::Creation))
        .unwrap()
        .observables;
    assert!((abs.scattering_length.conj() - cre.scattering_length).norm() < 1e-9);
    assert_eq!(cre.branch, Branch::Create);
}

#[test]
fn inverse_square_smatrix_is_energy_independent() {
    for (alpha, expected) in [(0.5, 0.20788), (1.0, 0.06583)] {
        for k in [0.1, 1.0] {
            let prob = RadialProblem::new(0, k * k, PotentialSpec::single(c(alpha, 0.0), 2.0));
            let cfg = SolverConfig::new(1e-3).with_mode(BoundaryMode::PartialAbsorptionS2);
            let obs = solve(&prob, &cfg).unwrap().observables;
            assert!((obs.s_matrix_modulus - expected).abs() < 1e-3, "α={alpha} k={k} |S|={}", obs.s_matrix_modulus);
            let oracle = inverse_square_s_modulus(alpha, Branch::Absorb);
            assert!((obs.s_matrix_modulus - oracle).abs() < 1e-3);
        }
    }
}

#[test]
fn inverse_square_phase_real_part() {
    // pure 1/r²: δ = (l + 1/2 − ν)π/2 with ν = −i√(α − 1/4) on the absorption root
    let prob = RadialProblem::new(0, 0.25, PotentialSpec::single(c(0.5, 0.0), 2.0));
    let cfg = SolverConfig::new(1e-4).with_mode(BoundaryMode::PartialAbsorptionS2);
    let d = solve(&prob, &cfg).unwrap().observables.phase_shift;
    assert!((d - c(PI / 4.0, PI / 4.0)).norm() < 1e-3, "{d}");
}

#[test]
fn free_particle_has_no_phase() {
    let prob = RadialProblem::new(0, 0.49, PotentialSpec::default());
    let obs = solve(&prob, &SolverConfig::new(0.1)).unwrap().observables;
    assert!(obs.phase_shift.norm() < 1e-7, "{}", obs.phase_shift);
    assert!((obs.s_matrix - 1.0).norm() < 1e-7);
}

#[test]
fn real_repulsive_potential_is_unitary() {
    for e in [0.01, 0.3, 2.0] {
        let prob = RadialProblem::new(0, e, PotentialSpec::single(c(-1.0, 0.0), 6.0));
        let obs = solve(&prob, &SolverConfig::new(0.05)).unwrap().observables;
        assert!((obs.s_matrix_modulus - 1.0).abs() < 1e-6, "E={e} |S|={}", obs.s_matrix_modulus);
    }
}

#[test]
fn omega_sign_conjugates_observables() {
    let prob = van_der_waals(1.0);
    let cfg = SolverConfig::new(0.05);
    let plus = solve(&prob, &cfg.with_omega(0.3)).unwrap().observables;
    let minus = solve(&prob, &cfg.with_omega(-0.3)).unwrap().observables;
    let a = plus.scattering_length;
    assert!((a.conj() - minus.scattering_length).norm() < 10.0 * cfg.rel_tol * a.norm().max(1.0) * 100.0);
    let e = RadialProblem::new(0, 0.2, PotentialSpec::single(c(1.0, 0.0), 6.0));
    let sp = solve(&e, &cfg.with_omega(0.3)).unwrap().observables;
    let sm = solve(&e, &cfg.with_omega(-0.3)).unwrap().observables;
    assert!((sp.s_matrix.conj().inv() - sm.s_matrix).norm() < 1e-7);
}

#[test]
fn interior_mode_reaches_full_absorption_in_ordered_limit() {
    let prob = van_der_waals(1.0);
    let r0 = 0.03;
    let cfg = SolverConfig::new(r0).with_omega(1.0);
    assert!(cfg.im_z0(&prob).unwrap() >= 20.0, "{:?}", cfg.im_z0(&prob));
    let interior = solve(&prob, &cfg).unwrap().observables.scattering_length;
    let absorbing = solve(&prob, &full_absorption(r0).with_omega(1.0)).unwrap().observables.scattering_length;
    assert!((interior - absorbing).norm() / absorbing.norm() < 1e-3, "{interior} {absorbing}");
}

#[test]
fn absorption_makes_length_insensitive_to_interior() {
    let prob = van_der_waals(1.0);
    let base = SolverConfig::new(0.03).with_omega(1.0);
    let a0 = solve(&prob, &base).unwrap().observables.scattering_length;
    for scale in [0.8, 1.2] {
        let cfg = SolverConfig {
            interior_depth_scale: scale,
            ..base
        };
        let a = solve(&prob, &cfg).unwrap().observables.scattering_length;
        assert!((a - a0).norm() / a0.norm() < 1e-3);
    }
    let real = SolverConfig::new(0.03);
    let r0 = solve(&prob, &real).unwrap().observables.scattering_length;
    let shifted = solve(
        &prob,
        &SolverConfig {
            interior_depth_scale: 1.2,
            ..real
        },
    )
    .unwrap()
    .observables
    .scattering_length;
    assert!((shifted - r0).norm() / r0.norm() > 0.1, "{r0} {shifted}");
}

#[test]
fn propagated_solution_follows_wkb() {
    let prob = van_der_waals(1.0);
    let r0 = 2e-3;
    let cfg = full_absorption(r0);
    let y0 = singscat::solver::absorption_boundary(&cfg, &prob).unwrap();
    let radii = [5e-3, 1e-2, 2e-2, 4e-2];
    let states = Propagator::new(&prob, cfg.tolerances()).run(r0, y0, &radii).unwrap();
    for (st, &r) in states.iter().zip(&radii) {
        let chk = singscat::closed_form::wkb_wavefunction_check(r, &prob, Branch::Absorb, None).unwrap();
        assert!(chk.validity < 0.01);
        let p = singscat::domain::effective_momentum(r, &prob, Branch::Absorb).unwrap();
        let dp = prob.q_derivative(r) / (2.0 * p);
        let wkb = -Complex64::i() * p - dp / (2.0 * p);
        assert!((st.y - wkb).norm() / wkb.norm() < 0.05, "r={r} {} {}", st.y, wkb);
    }
}

#[test]
fn no_bound_state_scan() {
    let mut signs = Vec::new();
    for alpha in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let prob = van_der_waals(alpha);
        let r0 = absorption_radius(&prob, 1e-4).unwrap();
        let a = solve(&prob, &full_absorption(r0)).unwrap().observables.scattering_length;
        signs.push(a.re > 0.0);
        for e in [0.05, 0.5] {
            let pe = prob.with_energy(e);
            let r0e = absorption_radius(&pe, 1e-4).unwrap();
            let s = solve(&pe, &full_absorption(r0e)).unwrap().observables.s_matrix_modulus;
            assert!(s < 1.0, "α={alpha} E={e} |S|={s}");
        }
    }
    assert!(signs.iter().all(|&s| s == signs[0]));
}

#[test]
fn length_refused_for_weak_singularity() {
    let prob = RadialProblem::zero_energy(PotentialSpec::new(vec![PowerTerm::real(1.0, 2.5)]));
    let e = solve(&prob, &full_absorption(1e-3)).unwrap_err();
    assert!(matches!(e, Error::Domain(_)));
}

#[test]
fn step_budget_reports_convergence_error() {
    let cfg = SolverConfig {
        max_steps: 50,
        ..full_absorption(1e-3)
    };
    let e = solve(&van_der_waals(1.0), &cfg).unwrap_err();
    assert!(matches!(e, Error::Convergence { .. }));
    assert_eq!(e.exit_code(), 3);
}
