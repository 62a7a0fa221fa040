//! The phase-modulated medium: drive sidebands, mode-sideband pairing,
//! effective detunings, the condensate density response and the resulting
//! polarizability.
//!
//! All frequencies are in units of the recoil energy `E_r`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{OverlapMatrix, TrapGeometry};
use crate::specfun::{bessel_j, MAX_BESSEL_ORDER};

/// Recoil energy; the unit of every frequency in the crate.
pub const E_R: f64 = 1.0;

/// Sidebands whose Bessel weight exceeds this beyond the cutoff make the
/// truncation suspect.
pub const CUTOFF_WARN_LEVEL: f64 = 1e-8;

/// Harmonic phase modulation `f(t) = B_m sin(Omega t)` with `Omega = omega_T + epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    pub b_m: f64,
    pub epsilon: f64,
    pub alpha_max: u32,
    /// Compensate the pump power lost to negative sidebands.
    pub renormalize: bool,
}

impl DriveSpec {
    pub fn unmodulated() -> Self {
        Self {
            b_m: 0.0,
            epsilon: 0.0,
            alpha_max: 1,
            renormalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b_m.is_finite() || self.b_m.abs() > crate::specfun::MAX_BESSEL_ARG {
            return Err(Error::domain(
                "DriveSpec",
                format!("modulation depth {} out of range", self.b_m),
            ));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::domain("DriveSpec", "epsilon must be finite"));
        }
        if self.alpha_max as i32 >= MAX_BESSEL_ORDER {
            return Err(Error::domain(
                "DriveSpec",
                format!("alpha_max must be below {MAX_BESSEL_ORDER}"),
            ));
        }
        Ok(())
    }

    /// Largest `|J_alpha(B_m)|` for the two orders just beyond the cutoff.
    ///
    /// Values above [`CUTOFF_WARN_LEVEL`] mean the truncation is not
    /// converged; callers report this as a warning.
    pub fn cutoff_residual(&self) -> f64 {
        let a = self.alpha_max as i32;
        (a + 1..=a + 2)
            .filter(|&k| k <= MAX_BESSEL_ORDER)
            .map(|k| bessel_j(k, self.b_m).map(f64::abs).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }
}

/// Cavity, medium and coupling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub drive: DriveSpec,
    pub geom: TrapGeometry,
    /// Bare detuning of the fundamental mode.
    pub delta0: f64,
    /// Transverse mode spacing.
    pub omega_t: f64,
    pub kappa: f64,
    /// Effective light-matter coupling.
    pub lambda: f64,
    /// Broadening that replaces `i0+` in the density response.
    pub eta_atom: f64,
    /// Spacing of atomic radial excitation energies above `E_r` (0 collapses
    /// every atomic state onto `E_r`).
    pub omega_trap: f64,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.geom.validate()?;
        let checks: [(&str, f64, bool); 6] = [
            ("delta0", self.delta0, true),
            ("omega_t", self.omega_t, self.omega_t > 0.0),
            ("kappa", self.kappa, self.kappa >= 0.0),
            ("lambda", self.lambda, self.lambda >= 0.0),
            ("eta_atom", self.eta_atom, self.eta_atom >= 0.0),
            ("omega_trap", self.omega_trap, self.omega_trap >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(Error::domain("SystemSpec", format!("invalid {name} = {value}")));
            }
        }
        Ok(())
    }

    /// Energy of the atomic excitation whose transverse part is radial state `n`.
    pub fn atomic_energy(&self, n: usize) -> f64 {
        E_R + n as f64 * self.omega_trap
    }

    /// Modulation frequency `Omega = omega_T + epsilon`.
    pub fn modulation_frequency(&self) -> f64 {
        self.omega_t + self.drive.epsilon
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// Fourier coefficients `c_alpha = J_alpha(B_m)` for `alpha` in `[-alpha_max, alpha_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandCoefficients {
    alpha_max: u32,
    values: Vec<f64>,
}

impl SidebandCoefficients {
    pub fn get(&self, alpha: i32) -> f64 {
        if alpha.unsigned_abs() > self.alpha_max {
            return 0.0;
        }
        self.values[(alpha + self.alpha_max as i32) as usize]
    }

    pub fn alpha_max(&self) -> u32 {
        self.alpha_max
    }

    /// `(alpha, c_alpha)` pairs in ascending `alpha`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        let a = self.alpha_max as i32;
        self.values.iter().enumerate().map(move |(i, &c)| (i as i32 - a, c))
    }
}

pub fn sideband_coefficients(drive: &DriveSpec) -> Result<SidebandCoefficients> {
    drive.validate()?;
    let a = drive.alpha_max as i32;
    let values = (-a..=a).map(|k| bessel_j(k, drive.b_m)).collect::<Result<Vec<_>>>()?;
    Ok(SidebandCoefficients {
        alpha_max: drive.alpha_max,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandPair {
    pub mode: usize,
    pub sideband: i32,
    /// Residual detuning after absorbing the sideband.
    pub detuning: f64,
}

/// One sideband per cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandAssignment {
    pub pairs: Vec<SidebandPair>,
}

impl SidebandAssignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.detuning).collect()
    }
}

/// Pair every mode `j < n_modes` (bare detuning `Delta_0 + j omega_T`) with
/// the sideband that brings it closest to `Delta_0`.
pub fn assign_sidebands(spec: &SystemSpec, n_modes: usize) -> Result<SidebandAssignment> {
    let amax = spec.drive.alpha_max as i32;
    if n_modes as i64 > amax as i64 + 1 {
        return Err(Error::domain(
            "assign_sidebands",
            format!("{n_modes} modes need alpha_max >= {}", n_modes - 1),
        ));
    }
    let mut pairs = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        // distance |Delta_j - alpha Omega - Delta_0| = |(j - alpha) omega_T - alpha epsilon|
        let offset = |alpha: i32| (j as i32 - alpha) as f64 * spec.omega_t - alpha as f64 * spec.drive.epsilon;
        let mut ranked: Vec<(f64, i32)> = (-amax..=amax).map(|a| (offset(a).abs(), a)).collect();
        ranked.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (best, alpha) = ranked[0];
        if let Some(&(second, other)) = ranked.get(1) {
            if (second - best).abs() <= 1e-9 {
                return Err(Error::AmbiguousSideband {
                    mode: j,
                    first: alpha,
                    second: other,
                });
            }
        }
        pairs.push(SidebandPair {
            mode: j,
            sideband: alpha,
            detuning: spec.delta0 + offset(alpha),
        });
    }
    Ok(SidebandAssignment { pairs })
}

/// `-2E / ((omega + i eta)^2 - E^2)` for complex `omega`.
pub(crate) fn lindhard_weight(energy: f64, omega: Complex64) -> Complex64 {
    -2.0 * energy / (omega * omega - energy * energy)
}

pub(crate) fn lindhard_weight_derivative(energy: f64, omega: Complex64) -> Complex64 {
    let d = omega * omega - energy * energy;
    4.0 * energy * omega / (d * d)
}

/// Density response `Pi^R_ij(omega)` over the cavity modes in `overlaps`.
pub fn density_response(spec: &SystemSpec, overlaps: &OverlapMatrix, omega: f64) -> DMatrix<Complex64> {
    density_response_complex(spec, overlaps, Complex64::new(omega, spec.eta_atom))
}

/// Density response at a complex frequency (no extra broadening is added).
pub fn density_response_complex(spec: &SystemSpec, overlaps: &OverlapMatrix, omega: Complex64) -> DMatrix<Complex64> {
    let nc = overlaps.n_cavity();
    let mut pi = DMatrix::zeros(nc, nc);
    for n in 0..overlaps.n_atom() {
        let w = lindhard_weight(spec.atomic_energy(n), omega);
        for i in 0..nc {
            for j in 0..nc {
                pi[(i, j)] += w * overlaps.get(i, n) * overlaps.get(j, n);
            }
        }
    }
    pi
}

/// `Lambda_eff^2 = Lambda^2 / sum_{0 <= alpha < alpha_max} c_alpha^2`.
///
/// `alpha_max = 0` keeps only the carrier in the sum.
pub fn renormalized_coupling(spec: &SystemSpec) -> Result<f64> {
    let coeffs = sideband_coefficients(&spec.drive)?;
    let top = spec.drive.alpha_max.max(1) as i32;
    let weight: f64 = (0..top).map(|a| coeffs.get(a).powi(2)).sum();
    Ok(spec.lambda / weight.sqrt())
}

/// Coupling that actually enters the polarizability.
pub fn effective_coupling(spec: &SystemSpec) -> Result<f64> {
    if spec.drive.renormalize {
        renormalized_coupling(spec)
    } else {
        Ok(spec.lambda)
    }
}

/// Sideband weight `c_{alpha_j}` seen by each assigned mode.
pub fn mode_coefficients(coeffs: &SidebandCoefficients, assignment: &SidebandAssignment) -> Vec<f64> {
    assignment.pairs.iter().map(|p| coeffs.get(p.sideband)).collect()
}

/// Polarizability `chi_ij(omega)` after collapsing each mode onto its sideband.
pub fn polarizability(
    spec: &SystemSpec,
    assignment: &SidebandAssignment,
    overlaps: &OverlapMatrix,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    let coeffs = sideband_coefficients(&spec.drive)?;
    let c = mode_coefficients(&coeffs, assignment);
    let lam2 = effective_coupling(spec)?.powi(2);
    let pi = density_response(spec, overlaps, omega);
    let n = assignment.len();
    Ok(DMatrix::from_fn(n, n, |i, j| lam2 * c[i] * c[j] * pi[(i, j)]))
}

/// Full Floquet-resolved element `chi_{ij; alpha beta} = Lambda^2 c_alpha c_beta Pi_ij`.
///
/// Diagnostics only; the response path uses the collapsed matrix. The
/// coefficients are real for harmonic modulation, so no conjugation is needed.
pub fn floquet_polarizability(
    spec: &SystemSpec,
    overlaps: &OverlapMatrix,
    omega: f64,
    (i, j): (usize, usize),
    (alpha, beta): (i32, i32),
) -> Result<Complex64> {
    let coeffs = sideband_coefficients(&spec.drive)?;
    let lam2 = effective_coupling(spec)?.powi(2);
    let pi = density_response(spec, overlaps, omega);
    Ok(lam2 * coeffs.get(alpha) * coeffs.get(beta) * pi[(i, j)])
}
