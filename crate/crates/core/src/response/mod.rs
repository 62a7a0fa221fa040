//! Nambu Green's function of the coupled cavity modes, spectral functions,
//! polariton poles and mode decompositions.
//!
//! The inverse Green's function over `N` cavity modes is the `2N x 2N` block
//! matrix
//!
//! ```text
//! [ P+(w) + chi(w)     chi(w)       ]
//! [     chi(w)      P-(w) + chi(w)  ]
//! ```
//!
//! with `P+ = diag(w - D_j + i kappa)` and `P- = diag(-w - D_j - i kappa)`,
//! where `D_j` are the effective detunings. For a single mode this is singular
//! at `w = 0` exactly when `Lambda^2 = (kappa^2 + D^2) E_r / (4 D)`.

mod grid;
mod poles;

pub use grid::{spectral_grid, GridAxis, GridFailure, SpectralGrid};
pub use poles::{Pole, PoleMethod, PoleSet};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{build_overlap_matrix, lg_mode, OverlapMatrix};
use crate::medium::{
    assign_sidebands, effective_coupling, lindhard_weight, mode_coefficients, sideband_coefficients,
    SidebandAssignment, SystemSpec,
};

/// Condition number above which [`Model::greens`] reports a singular matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Two eigenvalues closer than this make the minimal eigenvector ambiguous.
pub const EIGEN_DEGENERACY_TOL: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Assembled inverse Green's function in Nambu layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuBlockMatrix {
    pub n_modes: usize,
    pub matrix: DMatrix<Complex64>,
}

impl NambuBlockMatrix {
    pub fn block(&self, row: usize, col: usize) -> DMatrix<Complex64> {
        let n = self.n_modes;
        self.matrix.view((row * n, col * n), (n, n)).into_owned()
    }
}

/// Which estimator [`Model::mode_weights`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMethod {
    /// Null-direction eigenvector of the inverse Green's function.
    #[default]
    Eigenvector,
    /// Diagonal of the spectral function, normalized.
    SpectralDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    pub omega: f64,
    /// Non-negative, summing to one.
    pub weights: Vec<f64>,
    /// Positive-frequency part of the eigenvector (empty for the spectral estimator).
    pub vector: Vec<Complex64>,
    /// Eigenvalue of smallest magnitude (zero for the spectral estimator).
    pub eigenvalue: Complex64,
}

/// A fully resolved system: parameters, sideband pairing and overlaps.
#[derive(Debug, Clone)]
pub struct Model {
    spec: SystemSpec,
    assignment: SidebandAssignment,
    overlaps: OverlapMatrix,
    /// `c_{alpha_j} M[j][n]`.
    coupling: DMatrix<f64>,
    detunings: Vec<f64>,
    energies: Vec<f64>,
    lambda_eff: f64,
}

impl Model {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        spec.validate()?;
        let overlaps = build_overlap_matrix(&spec.geom)?;
        let assignment = assign_sidebands(&spec, spec.geom.n_cavity_modes)?;
        Self::from_parts(spec, assignment, overlaps)
    }

    pub fn from_parts(spec: SystemSpec, assignment: SidebandAssignment, overlaps: OverlapMatrix) -> Result<Self> {
        spec.validate()?;
        if assignment.len() != overlaps.n_cavity() || assignment.is_empty() {
            return Err(Error::domain(
                "Model",
                format!(
                    "{} assigned modes but {} overlap rows",
                    assignment.len(),
                    overlaps.n_cavity()
                ),
            ));
        }
        let coeffs = mode_coefficients(&sideband_coefficients(&spec.drive)?, &assignment);
        let coupling = DMatrix::from_fn(overlaps.n_cavity(), overlaps.n_atom(), |j, n| {
            coeffs[j] * overlaps.get(j, n)
        });
        let energies = (0..overlaps.n_atom()).map(|n| spec.atomic_energy(n)).collect();
        let detunings = assignment.detunings();
        let lambda_eff = effective_coupling(&spec)?;
        Ok(Self {
            spec,
            assignment,
            overlaps,
            coupling,
            detunings,
            energies,
            lambda_eff,
        })
    }

    /// Same system at a different bare coupling.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut m = self.clone();
        m.spec.lambda = lambda;
        m.spec.validate()?;
        m.lambda_eff = effective_coupling(&m.spec)?;
        Ok(m)
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn assignment(&self) -> &SidebandAssignment {
        &self.assignment
    }

    pub fn overlaps(&self) -> &OverlapMatrix {
        &self.overlaps
    }

    pub fn n_modes(&self) -> usize {
        self.detunings.len()
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Coupling that multiplies the density response (renormalized if requested).
    pub fn lambda_eff(&self) -> f64 {
        self.lambda_eff
    }

    /// `chi(w)` with the density response evaluated at complex `omega_atom`.
    pub fn chi(&self, omega_atom: Complex64) -> DMatrix<Complex64> {
        let n = self.n_modes();
        let lam2 = self.lambda_eff * self.lambda_eff;
        let mut chi = DMatrix::zeros(n, n);
        for (k, &e) in self.energies.iter().enumerate() {
            let w = lam2 * lindhard_weight(e, omega_atom);
            for i in 0..n {
                for j in 0..n {
                    chi[(i, j)] += w * self.coupling[(i, k)] * self.coupling[(j, k)];
                }
            }
        }
        chi
    }

    fn nambu(&self, omega: Complex64, omega_atom: Complex64) -> NambuBlockMatrix {
        let n = self.n_modes();
        let kappa = self.spec.kappa;
        let chi = self.chi(omega_atom);
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let c = chi[(i, j)];
                m[(i, j)] = c;
                m[(i, j + n)] = c;
                m[(i + n, j)] = c;
                m[(i + n, j + n)] = c;
            }
            m[(i, i)] += omega - self.detunings[i] + I * kappa;
            m[(i + n, i + n)] += -omega - self.detunings[i] - I * kappa;
        }
        NambuBlockMatrix { n_modes: n, matrix: m }
    }

    /// Inverse Green's function at complex frequency (analytic continuation,
    /// no atomic broadening).
    pub fn inverse_greens(&self, omega: Complex64) -> NambuBlockMatrix {
        self.nambu(omega, omega)
    }

    /// Inverse Green's function on the real axis, with the atomic line
    /// broadened by `eta_atom`.
    pub fn inverse_greens_real(&self, omega: f64) -> NambuBlockMatrix {
        self.nambu(Complex64::new(omega, 0.0), Complex64::new(omega, self.spec.eta_atom))
    }

    /// Retarded Green's function `D^R(w)` over the full Nambu space.
    pub fn greens(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let m = self.inverse_greens_real(omega).matrix;
        let inv = m.clone().try_inverse().ok_or(Error::Singular {
            omega,
            condition: f64::INFINITY,
        })?;
        let condition = norm1(&m) * norm1(&inv);
        if !(condition < MAX_CONDITION) {
            return Err(Error::Singular { omega, condition });
        }
        Ok(inv)
    }

    /// Positive-frequency block of `A = i (D^R - D^R^dagger)`.
    pub fn spectral_function(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.n_modes();
        let d = self.greens(omega)?;
        Ok(DMatrix::from_fn(n, n, |i, j| I * (d[(i, j)] - d[(j, i)].conj())))
    }

    /// Single spectral-function entry.
    pub fn spectral_entry(&self, omega: f64, (i, j): (usize, usize)) -> Result<Complex64> {
        let n = self.n_modes();
        if i >= n || j >= n {
            return Err(Error::domain(
                "spectral_entry",
                format!("entry ({i}, {j}) outside {n} modes"),
            ));
        }
        Ok(self.spectral_function(omega)?[(i, j)])
    }

    /// The same medium with only cavity mode `mode` retained.
    pub fn isolate_mode(&self, mode: usize) -> Result<Self> {
        if mode >= self.n_modes() {
            return Err(Error::domain(
                "isolate_mode",
                format!("mode {mode} outside {} modes", self.n_modes()),
            ));
        }
        let mut spec = self.spec.clone();
        spec.geom.n_cavity_modes = 1;
        let assignment = SidebandAssignment {
            pairs: vec![self.assignment.pairs[mode]],
        };
        let row = self.overlaps.as_matrix().rows(mode, 1).into_owned();
        Self::from_parts(spec, assignment, OverlapMatrix::from_matrix(row))
    }

    pub fn find_poles(&self) -> Result<PoleSet> {
        poles::find_poles(self, PoleMethod::Auto)
    }

    pub fn find_poles_with(&self, method: PoleMethod) -> Result<PoleSet> {
        poles::find_poles(self, method)
    }

    /// Decomposition of the field at a spectral peak into cavity modes.
    pub fn mode_weights(&self, omega: f64, method: WeightMethod) -> Result<ModeWeights> {
        let n = self.n_modes();
        match method {
            WeightMethod::Eigenvector => {
                let m = self.inverse_greens_real(omega).matrix;
                let (eigenvalue, v) = min_eigenpair(&m)?;
                let mut weights: Vec<f64> = (0..n).map(|j| v[j].norm_sqr() + v[j + n].norm_sqr()).collect();
                normalize_sum(&mut weights);
                Ok(ModeWeights {
                    omega,
                    weights,
                    vector: v.iter().take(n).copied().collect(),
                    eigenvalue,
                })
            }
            WeightMethod::SpectralDiagonal => {
                let a = self.spectral_function(omega)?;
                let mut weights: Vec<f64> = (0..n).map(|j| a[(j, j)].re.max(0.0)).collect();
                normalize_sum(&mut weights);
                Ok(ModeWeights {
                    omega,
                    weights,
                    vector: Vec::new(),
                    eigenvalue: Complex64::new(0.0, 0.0),
                })
            }
        }
    }
}

/// Largest imaginary part over all poles, without mode tagging.
pub(crate) fn poles_max_imag(model: &Model) -> Result<f64> {
    Ok(poles::pole_frequencies(model)?
        .iter()
        .map(|w| w.im)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalue of smallest magnitude and its normalized right eigenvector.
pub(crate) fn min_eigenpair(m: &DMatrix<Complex64>) -> Result<(Complex64, Vec<Complex64>)> {
    let dim = m.nrows();
    let eig = m
        .clone()
        .schur()
        .eigenvalues()
        .ok_or(Error::NoConvergence("mode_weights"))?;
    let mut sorted: Vec<Complex64> = eig.iter().copied().collect();
    sorted.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    if dim > 1 && (sorted[0] - sorted[1]).norm() < EIGEN_DEGENERACY_TOL {
        return Err(Error::DegenerateEigenvalue((sorted[0] - sorted[1]).norm()));
    }
    let lambda = sorted[0];
    let v = null_vector(m, lambda)?;
    Ok((lambda, v))
}

/// Inverse iteration for the eigenvector of `m` closest to `shift`.
pub(crate) fn null_vector(m: &DMatrix<Complex64>, shift: Complex64) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    let scale = norm1(m).max(1e-300);
    let mut shifted = m.clone();
    for i in 0..dim {
        shifted[(i, i)] -= shift;
    }
    let mut lu = shifted.clone().lu();
    if !lu.is_invertible() {
        // exact eigenvalue: nudge the shift so the solve is defined
        for i in 0..dim {
            shifted[(i, i)] -= Complex64::new(scale * 1e-14, scale * 1e-14);
        }
        lu = shifted.lu();
    }
    let mut x = nalgebra::DVector::from_fn(dim, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.01 * i as f64));
    for _ in 0..3 {
        x = lu.solve(&x).ok_or(Error::NoConvergence("inverse iteration"))?;
        let norm = x.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NoConvergence("inverse iteration"));
        }
        x /= Complex64::new(norm, 0.0);
    }
    Ok(x.iter().copied().collect())
}

fn normalize_sum(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
}

pub(crate) fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Real-space intensity `|sum_j v_j LG_{j0}(r)|^2`, normalized to a maximum of 1.
///
/// `r` is in units of the cavity waist.
pub fn intensity_profile(v: &[Complex64], r_grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut field = Complex64::new(0.0, 0.0);
        for (j, &vj) in v.iter().enumerate() {
            field += vj * lg_mode(j as i32, 0, r, 0.0)?;
        }
        out.push(field.norm_sqr());
    }
    let peak = out.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|x| *x /= peak);
    }
    Ok(out)
}

/// Full width at half maximum of a profile sampled on `r >= 0`, mirrored about
/// the axis. Returns `None` if the profile never drops below half its maximum.
pub fn profile_fwhm(r_grid: &[f64], intensity: &[f64]) -> Option<f64> {
    let peak = intensity.iter().copied().fold(0.0, f64::max);
    let start = intensity.iter().position(|&x| x == peak)?;
    let half = 0.5 * peak;
    for k in start + 1..intensity.len() {
        if intensity[k] < half {
            let (r0, r1) = (r_grid[k - 1], r_grid[k]);
            let (i0, i1) = (intensity[k - 1], intensity[k]);
            let r = r0 + (i0 - half) / (i0 - i1) * (r1 - r0);
            return Some(2.0 * r);
        }
    }
    None
}
