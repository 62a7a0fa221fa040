//! Transverse mode functions and cavity-atom overlap matrix elements.
//!
//! Lengths are measured in units of the cavity waist `w0` for mode functions
//! and in units of the transverse harmonic length `L_H` inside the overlap
//! integrals, so the only geometric parameter is `delta = w0 / L_H`.
//!
//! Only zero-angular-momentum (`p = 0`) cavity modes couple to a radially
//! symmetric condensate, so [`OverlapMatrix`] has no angular index at all.
//! [`lg_mode`] still accepts `p != 0` for rendering.
//!
//! # Normalization
//!
//! The closed-form radial overlap evaluated here is
//!
//! ```text
//! <psi_0| eta_j |psi_n> = delta^2 (j+n)! / (2^n n! j!)
//!                         (delta^2 - 1/2)^j / (delta^2 + 1/2)^(j+n+1)
//!                         2F1(-n, -j; -n-j; -(delta^2 + 1/2)/(delta^2 - 1/2))
//! ```
//!
//! The `delta^2` prefactor is required for the `j = n = 0` element to equal
//! the direct Gaussian integral `delta^2 / (delta^2 + 1/2)`, and for the
//! narrow-cloud limit `<psi_0|eta_j|psi_n> -> delta_{n0}` as `delta -> inf`.
//! Without it the `j = n = 0` element would be `1 / (delta^2 + 1/2)`.
//! Every element is checked against direct quadrature in the tests.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::{hyp2f1_terminating, laguerre_unchecked, ln_factorial, MAX_LAGUERRE_DEGREE};

/// Largest radial index accepted by the quadrature oracle.
pub const MAX_ORACLE_INDEX: u32 = 32;

/// Half-width of the band around `delta^2 = 1/2` where the closed form has a
/// removable singularity and quadrature is used instead.
pub const DEGENERATE_BAND: f64 = 1e-6;

/// Cavity/trap geometry and basis truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapGeometry {
    /// Cavity waist over transverse harmonic length, `w0 / L_H`.
    pub delta: f64,
    /// `w0 * Q`; only used when rendering real-space profiles.
    pub w0_over_q: f64,
    pub n_cavity_modes: usize,
    pub n_atom_modes: usize,
}

impl TrapGeometry {
    pub fn new(delta: f64, w0_over_q: f64, n_cavity_modes: usize, n_atom_modes: usize) -> Result<Self> {
        let g = Self {
            delta,
            w0_over_q,
            n_cavity_modes,
            n_atom_modes,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::domain(
                "TrapGeometry",
                format!("waist ratio must be positive, got {}", self.delta),
            ));
        }
        if self.n_cavity_modes == 0 || self.n_atom_modes == 0 {
            return Err(Error::domain("TrapGeometry", "mode counts must be at least 1"));
        }
        if self.n_cavity_modes as i32 > MAX_LAGUERRE_DEGREE + 1 || self.n_atom_modes as i32 > MAX_LAGUERRE_DEGREE + 1 {
            return Err(Error::domain("TrapGeometry", "mode counts above 65 are not supported"));
        }
        Ok(())
    }
}

/// `M[j][n] = <psi_0| eta_j |psi_n>`, rows over cavity radial index `j`,
/// columns over atomic radial index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    entries: DMatrix<f64>,
}

impl OverlapMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn get(&self, j: usize, n: usize) -> f64 {
        self.entries[(j, n)]
    }

    pub fn n_cavity(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_atom(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Mode function `w0 * LG_{jp}(r, theta)` with `r` in units of `w0`.
///
/// The `w0` prefactor makes every `LG_{j0}` equal 1 on axis.
pub fn lg_mode(j: i32, p: i32, r: f64, theta: f64) -> Result<Complex64> {
    if j < 0 {
        return Err(Error::domain("lg_mode", format!("negative radial index {j}")));
    }
    if j > MAX_LAGUERRE_DEGREE {
        return Err(Error::domain(
            "lg_mode",
            format!("radial index {j} exceeds {MAX_LAGUERRE_DEGREE}"),
        ));
    }
    let ap = p.unsigned_abs();
    let norm = (0.5 * (ln_factorial(j as u64) - ln_factorial(j as u64 + ap as u64))).exp();
    let radial = (-0.5 * r * r).exp() * norm * r.powi(ap as i32) * laguerre_unchecked(j as u32, ap, r * r);
    if p == 0 {
        Ok(Complex64::new(radial, 0.0))
    } else {
        Ok(Complex64::from_polar(radial, p as f64 * theta))
    }
}

/// Radial sample points for real-space rendering: 512 points on `[0, 4 w0]`.
pub fn rendering_grid() -> Vec<f64> {
    const N: usize = 512;
    (0..N).map(|i| 4.0 * i as f64 / (N - 1) as f64).collect()
}

/// Closed-form radial overlap `<psi_0| eta_{j0} |psi_{n0}>` (see module docs).
///
/// Inside the band `|delta^2 - 1/2| <= 1e-6` the value is taken from
/// [`overlap_quadrature_oracle`].
pub fn overlap_closed_form(j: u32, n: u32, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(
            "overlap_closed_form",
            format!("waist ratio must be positive, got {delta}"),
        ));
    }
    let d2 = delta * delta;
    let minus = d2 - 0.5;
    let plus = d2 + 0.5;
    if minus.abs() <= DEGENERATE_BAND {
        return overlap_quadrature_oracle(j, n, delta);
    }
    let log_comb = ln_factorial((j + n) as u64)
        - ln_factorial(n as u64)
        - ln_factorial(j as u64)
        - n as f64 * std::f64::consts::LN_2;
    // (d2 - 1/2)^j / (d2 + 1/2)^(j+n+1), kept as a ratio power to avoid overflow
    let ratio = (minus / plus).powi(j as i32) / plus.powi(n as i32 + 1);
    let z = -plus / minus;
    Ok(d2 * log_comb.exp() * ratio * hyp2f1_terminating(n, j, z))
}

/// Direct numerical evaluation of the radial overlap integral.
///
/// With `u = r^2 / L_H^2` the integral reduces to
/// `int_0^inf exp(-a u) L_j(u / delta^2) L_n(u) du`, `a = 1 + 1/(2 delta^2)`.
/// The integrand is bounded by `exp(-u/2)`, so truncating at `u = 80` leaves a
/// tail below `1e-17`.
pub fn overlap_quadrature_oracle(j: u32, n: u32, delta: f64) -> Result<f64> {
    if j > MAX_ORACLE_INDEX || n > MAX_ORACLE_INDEX {
        return Err(Error::domain(
            "overlap_quadrature_oracle",
            format!("indices ({j}, {n}) exceed {MAX_ORACLE_INDEX}"),
        ));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(
            "overlap_quadrature_oracle",
            format!("waist ratio must be positive, got {delta}"),
        ));
    }
    let inv_d2 = 1.0 / (delta * delta);
    let a = 1.0 + 0.5 * inv_d2;
    let f = |u: f64| (-a * u).exp() * laguerre_unchecked(j, 0, u * inv_d2) * laguerre_unchecked(n, 0, u);
    // split so the oscillating region near the origin is resolved separately
    let head = quad::integrate(f, 0.0, 20.0, 2e-12)?;
    let tail = quad::integrate(f, 20.0, 80.0, 2e-12)?;
    Ok(head + tail)
}

/// Overlap matrix over all retained cavity and atomic radial indices.
pub fn build_overlap_matrix(geom: &TrapGeometry) -> Result<OverlapMatrix> {
    geom.validate()?;
    let mut m = DMatrix::zeros(geom.n_cavity_modes, geom.n_atom_modes);
    for j in 0..geom.n_cavity_modes {
        for n in 0..geom.n_atom_modes {
            m[(j, n)] = overlap_closed_form(j as u32, n as u32, geom.delta)?;
        }
    }
    Ok(OverlapMatrix { entries: m })
}
