//! Gamma function for complex arguments and branch-controlled complex powers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::Branch;
use crate::error::{Error, Result};

// Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(z) for Re z ≥ 1/2 (principal branch of the Lanczos form).
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Γ(z) for complex `z`; reflection covers the left half-plane.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("gamma of a non-finite argument"));
    }
    if is_pole(z) {
        return Err(Error::domain(format!("gamma has a pole at {}", z.re)));
    }
    if z.re < 0.5 {
        // Γ(z) Γ(1−z) = π / sin(πz)
        let s = (PI * z).sin();
        if s.norm() == 0.0 {
            return Err(Error::domain("gamma pole"));
        }
        return Ok(PI / (s * ln_gamma_right(1.0 - z).exp()));
    }
    Ok(ln_gamma_right(z).exp())
}

pub fn gamma_real(x: f64) -> Result<f64> {
    gamma(Complex64::new(x, 0.0)).map(|g| g.re)
}

/// `1/Γ(z)`, entire: zero at the poles of Γ.
pub fn rgamma(z: Complex64) -> Complex64 {
    if is_pole(z) {
        return Complex64::new(0.0, 0.0);
    }
    match gamma(z) {
        Ok(g) => g.inv(),
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

/// Argument of `base` on the sheet attached to the chosen side of the positive real axis:
/// `(0, 2π)` for absorption, `(−2π, 0)` for creation; exactly 0 on the positive axis.
pub fn branched_arg(base: Complex64, branch: Branch) -> f64 {
    let a = base.im.atan2(base.re);
    match branch {
        Branch::Absorb => {
            if a < 0.0 {
                a + 2.0 * PI
            } else {
                a
            }
        }
        Branch::Create => {
            if a > 0.0 {
                a - 2.0 * PI
            } else if a == PI {
                -PI
            } else {
                a
            }
        }
    }
}

/// `|base|^q · exp(i q arg(base))` with the argument from [`branched_arg`].
pub fn branched_power(base: Complex64, exponent: f64, branch: Branch) -> Result<Complex64> {
    if base.norm() == 0.0 {
        if exponent > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::domain("zero base with non-positive exponent"));
    }
    let arg = branched_arg(base, branch);
    Ok(Complex64::from_polar(base.norm().powf(exponent), exponent * arg))
}

/// cot z, evaluated through `exp(±2iz)` so large |Im z| stays finite.
pub fn cot(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im >= 0.0 {
        let e = (2.0 * i * z).exp();
        i * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-2.0 * i * z).exp();
        i * (1.0 + e) / (1.0 - e)
    }
}
