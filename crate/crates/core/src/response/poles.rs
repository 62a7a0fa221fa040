//! Polariton poles from the denominator-cleared determinant.
//!
//! With `W[j][n] = c_{alpha_j} M[j][n]` the inverse Green's function factors
//! through the `K x K` atomic space, so
//!
//! ```text
//! q(w) = prod_n (E_n^2 - w^2) * det G^{-1}(w)
//! ```
//!
//! is a polynomial of degree `2N + 2K`. Before building it, cavity modes that
//! share a detuning are rotated so that only `rank` combinations couple to the
//! atoms; the remaining dark combinations contribute the exact poles
//! `+-D - i kappa`. Atomic states that share an energy are compressed the same
//! way. This keeps `q` free of exactly repeated roots, which a companion matrix
//! resolves poorly.
//!
//! The roots of `q` are the eigenvalues of a linearization. Splitting the
//! atomic weight as `w(E, w) = 1/(w + E) - 1/(w - E)` and giving each atomic
//! state two auxiliary amplitudes `y = u.x / (w - E)`, `z = u.x / (w + E)`
//! turns `G^{-1}(w) x = 0` into a `(2N + 2K)`-dimensional linear eigenvalue
//! problem whose characteristic polynomial is `q` up to sign. Unlike the
//! monomial coefficients of `q`, this stays accurate when many modes crowd
//! together, as they do when the sideband shifts are small.
//!
//! In the rank-1 case (`K = 1` after compression) the coefficients of `q`
//! also follow from the scalar dispersion relation `1 + Lambda^2 w(E, w) S(w)
//! = 0`, and their companion matrix gives an independent route to the roots.
//!
//! Roots are polished by Newton steps on the determinant. Roots that Newton
//! cannot settle, or that settle onto each other, are found again from `q`
//! sampled on a small circle around their group.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{null_vector, Model};
use crate::error::{Error, Result};
use crate::medium::{lindhard_weight, lindhard_weight_derivative};

/// Roots this close (relative) to a cleared atomic pole cannot be told apart from it.
const CLEARED_COINCIDENT: f64 = 1e-13;
/// Roots closer than this (relative) to a cleared atomic pole are tested.
const CLEARED_BAND: f64 = 1e-6;
const MAX_RADIUS_DOUBLINGS: usize = 40;
/// A root group is isolated when the next root is this much farther out.
const GROUP_GAP: f64 = 2.0;
const LOCAL_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoleMethod {
    /// Currently the same as [`PoleMethod::Determinant`].
    #[default]
    Auto,
    /// Companion matrix of the rank-1 dispersion relation; fails for
    /// higher-rank responses. Loses accuracy when many detunings fall within
    /// `kappa` of each other, where the monomial coefficients no longer
    /// resolve the crowded roots.
    Scalar,
    /// Linearization of the full determinant.
    Determinant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub omega: Complex64,
    /// Cavity mode with the largest share of the pole's null vector.
    pub mode: usize,
    /// True for combinations that do not couple to the atoms at all.
    pub dark: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    /// Sorted by real part, then imaginary part.
    pub poles: Vec<Pole>,
    pub lambda: f64,
    pub b_m: f64,
    pub epsilon: f64,
}

impl PoleSet {
    pub fn omegas(&self) -> Vec<Complex64> {
        self.poles.iter().map(|p| p.omega).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.poles.iter().map(|p| p.omega.im).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pole with the largest imaginary part.
    pub fn leading(&self) -> Option<&Pole> {
        self.poles.iter().max_by(|a, b| a.omega.im.total_cmp(&b.omega.im))
    }
}

/// Compressed coupling structure.
struct Reduced {
    detunings: Vec<f64>,
    /// `N' x K'`, already multiplied by the effective coupling.
    coupling: DMatrix<f64>,
    energies: Vec<f64>,
    kappa: f64,
    dark: Vec<Pole>,
}

pub(crate) fn find_poles(model: &Model, method: PoleMethod) -> Result<PoleSet> {
    let (coupled, dark) = pole_frequencies_split(model, method)?;
    let mut poles = dark;
    let full = model.n_modes();
    for w in coupled {
        let v = null_vector(&model.inverse_greens(w).matrix, Complex64::new(0.0, 0.0))?;
        let mode = (0..full)
            .max_by(|&a, &b| {
                let wa = v[a].norm_sqr() + v[a + full].norm_sqr();
                let wb = v[b].norm_sqr() + v[b + full].norm_sqr();
                wa.total_cmp(&wb)
            })
            .unwrap_or(0);
        poles.push(Pole {
            omega: w,
            mode,
            dark: false,
        });
    }
    poles.sort_by(|a, b| {
        a.omega
            .re
            .total_cmp(&b.omega.re)
            .then(a.omega.im.total_cmp(&b.omega.im))
    });
    let spec = model.spec();
    Ok(PoleSet {
        poles,
        lambda: spec.lambda,
        b_m: spec.drive.b_m,
        epsilon: spec.drive.epsilon,
    })
}

/// All pole frequencies without mode tags (cheap path for stability scans).
pub(crate) fn pole_frequencies(model: &Model) -> Result<Vec<Complex64>> {
    let (mut coupled, dark) = pole_frequencies_split(model, PoleMethod::Auto)?;
    coupled.extend(dark.iter().map(|p| p.omega));
    Ok(coupled)
}

fn pole_frequencies_split(model: &Model, method: PoleMethod) -> Result<(Vec<Complex64>, Vec<Pole>)> {
    let red = reduce(model);
    if red.detunings.is_empty() {
        return Ok((Vec::new(), red.dark));
    }
    let rank_one = red.energies.len() == 1;
    let raw = match method {
        PoleMethod::Auto | PoleMethod::Determinant => linearized_roots(&red)?,
        PoleMethod::Scalar if rank_one => scalar_roots(&red)?,
        PoleMethod::Scalar => {
            return Err(Error::domain(
                "find_poles",
                format!("scalar path needs a rank-1 response, got rank {}", red.energies.len()),
            ))
        }
    };
    let mut polished = polish_with_local_solves(&red, raw);
    polished.retain(|&w| !is_spurious(&red, w));
    Ok((polished, red.dark))
}

fn groups(values: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let tol = 1e-12 * v.abs().max(1.0);
        match out.iter_mut().find(|(g, _)| (g - v).abs() <= tol) {
            Some((_, members)) => members.push(i),
            None => out.push((v, vec![i])),
        }
    }
    out.into_iter().map(|(_, m)| m).collect()
}

fn reduce(model: &Model) -> Reduced {
    let kappa = model.spec().kappa;
    let n = model.n_modes();
    let w = &model.coupling * model.lambda_eff();
    let scale = w.amax();
    let tol = 1e-12 * scale;
    let bare_dark = |j: usize| {
        let d = model.detunings[j];
        [
            Pole {
                omega: Complex64::new(d, -kappa),
                mode: j,
                dark: true,
            },
            Pole {
                omega: Complex64::new(-d, -kappa),
                mode: j,
                dark: true,
            },
        ]
    };
    if scale == 0.0 {
        return Reduced {
            detunings: Vec::new(),
            coupling: DMatrix::zeros(0, 0),
            energies: Vec::new(),
            kappa,
            dark: (0..n).flat_map(bare_dark).collect(),
        };
    }

    // compress atomic states with equal energy
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut energies = Vec::new();
    for group in groups(&model.energies) {
        let sub = w.select_columns(&group);
        let svd = sub.svd(true, false);
        let u = svd.u.expect("requested");
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > tol {
                cols.push(u.column(k) * s);
                energies.push(model.energies[group[0]]);
            }
        }
    }
    let w1 = DMatrix::from_columns(&cols);

    // compress cavity modes with equal detuning; the complement is dark
    let mut rows: Vec<nalgebra::RowDVector<f64>> = Vec::new();
    let mut detunings = Vec::new();
    let mut dark = Vec::new();
    for group in groups(&model.detunings) {
        let sub = w1.select_rows(&group);
        let svd = sub.svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let mut bright = Vec::new();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > tol {
                rows.push(vt.row(k) * s);
                detunings.push(model.detunings[group[0]]);
                bright.push(u.column(k).into_owned());
            }
        }
        for v in complement(&bright, group.len()) {
            let local = v.iamax();
            dark.extend(bare_dark(group[local]));
        }
    }
    let coupling = if rows.is_empty() {
        DMatrix::zeros(0, energies.len())
    } else {
        DMatrix::from_rows(&rows)
    };
    Reduced {
        detunings,
        coupling,
        energies,
        kappa,
        dark,
    }
}

/// Orthonormal basis of the complement of `span(basis)` in `R^dim`, built by
/// greedy Gram-Schmidt on the unit vectors.
fn complement(basis: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut have: Vec<DVector<f64>> = basis.iter().map(|b| b.normalize()).collect();
    let mut out = Vec::new();
    while have.len() < dim {
        let mut best: Option<DVector<f64>> = None;
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            for b in &have {
                let p = b.dot(&e);
                e -= b * p;
            }
            if best.as_ref().is_none_or(|x| e.norm() > x.norm()) {
                best = Some(e);
            }
        }
        let v = best.expect("dim > 0").normalize();
        have.push(v.clone());
        out.push(v);
    }
    out
}

/// Eigenvalues of the linearized inverse Green's function. With
/// `S = diag(1, -1)`, `B = diag(-D + i kappa, -D - i kappa)` and `u_k` the
/// atomic coupling repeated in both Nambu halves, the state `(x, y, z)` obeys
///
/// ```text
/// w x = -S B x + S U y - S U z,   w y = E y + U^T x,   w z = -E z + U^T x.
/// ```
fn linearized_roots(red: &Reduced) -> Result<Vec<Complex64>> {
    let n = red.detunings.len();
    let k = red.energies.len();
    let dim = 2 * n + 2 * k;
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut l = DMatrix::<Complex64>::zeros(dim, dim);
    for (a, &d) in red.detunings.iter().enumerate() {
        l[(a, a)] = Complex64::new(d, -red.kappa);
        l[(a + n, a + n)] = Complex64::new(-d, -red.kappa);
        for (b, &e) in red.energies.iter().enumerate() {
            let u = red.coupling[(a, b)];
            let (y, z) = (2 * n + b, 2 * n + k + b);
            l[(a, y)] = c(u);
            l[(a, z)] = c(-u);
            l[(a + n, y)] = c(-u);
            l[(a + n, z)] = c(u);
            l[(y, a)] = c(u);
            l[(y, a + n)] = c(u);
            l[(z, a)] = c(u);
            l[(z, a + n)] = c(u);
            l[(y, y)] = c(e);
            l[(z, z)] = c(-e);
        }
    }
    let eig = l
        .schur()
        .eigenvalues()
        .ok_or(Error::NoConvergence("find_poles: linearized eigenvalues"))?;
    Ok(eig.iter().copied().collect())
}

/// Companion roots of the rank-1 dispersion polynomial, on a circle grown
/// until it holds every root.
fn scalar_roots(red: &Reduced) -> Result<Vec<Complex64>> {
    let q = scalar_polynomial(red);
    let mut radius = initial_radius(red);
    for _ in 0..MAX_RADIUS_DOUBLINGS {
        let raw = companion_roots(&scaled(&q, radius))?;
        if raw.iter().all(|z| z.norm() <= 0.9) {
            return Ok(raw.into_iter().map(|z| z * radius).collect());
        }
        radius *= 2.0;
    }
    Err(Error::NoConvergence("find_poles: root radius"))
}

fn initial_radius(red: &Reduced) -> f64 {
    let dmax = red.detunings.iter().map(|d| d.abs()).fold(0.0, f64::max) + red.kappa;
    let emax = red.energies.iter().copied().fold(0.0, f64::max);
    let strength = 4.0 * emax * dmax * red.coupling.norm_squared();
    1.5 * dmax.max(emax).max(strength.powf(0.25)).max(1e-3)
}

// --- polynomial helpers, coefficients in ascending order ---

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add_scaled(acc: &mut Vec<Complex64>, p: &[Complex64], s: Complex64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), Complex64::new(0.0, 0.0));
    }
    for (a, &x) in acc.iter_mut().zip(p) {
        *a += s * x;
    }
}

/// `(E^2 - w^2) prod_k pp_k + 2 E sum_k u_k (-2 D_k) prod_{l != k} pp_l`,
/// where `pp_k = D_k^2 - (w + i kappa)^2`.
fn scalar_polynomial(red: &Reduced) -> Vec<Complex64> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let kappa = red.kappa;
    let e = red.energies[0];
    let pp: Vec<[Complex64; 3]> = red
        .detunings
        .iter()
        .map(|&d| [c(d * d + kappa * kappa), Complex64::new(0.0, -2.0 * kappa), c(-1.0)])
        .collect();
    let mut all = vec![c(1.0)];
    for p in &pp {
        all = poly_mul(&all, p);
    }
    let mut q = poly_mul(&all, &[c(e * e), c(0.0), c(-1.0)]);
    for k in 0..pp.len() {
        let mut others = vec![c(1.0)];
        for (l, p) in pp.iter().enumerate() {
            if l != k {
                others = poly_mul(&others, p);
            }
        }
        let u = red.coupling[(k, 0)].powi(2);
        poly_add_scaled(&mut q, &others, c(-4.0 * e * u * red.detunings[k]));
    }
    q
}

/// Coefficients of `q(R z)` in `z`.
fn scaled(q: &[Complex64], radius: f64) -> Vec<Complex64> {
    let mut s = 1.0;
    q.iter()
        .map(|&a| {
            let v = a * s;
            s *= radius;
            v
        })
        .collect()
}

fn reduced_nambu(red: &Reduced, omega: Complex64) -> DMatrix<Complex64> {
    let n = red.detunings.len();
    let i = Complex64::new(0.0, 1.0);
    let mut chi = DMatrix::<Complex64>::zeros(n, n);
    for (k, &e) in red.energies.iter().enumerate() {
        let w = lindhard_weight(e, omega);
        for a in 0..n {
            for b in 0..n {
                chi[(a, b)] += w * red.coupling[(a, k)] * red.coupling[(b, k)];
            }
        }
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            let c = chi[(a, b)];
            m[(a, b)] = c;
            m[(a, b + n)] = c;
            m[(a + n, b)] = c;
            m[(a + n, b + n)] = c;
        }
        m[(a, a)] += omega - red.detunings[a] + i * red.kappa;
        m[(a + n, a + n)] += -omega - red.detunings[a] - i * red.kappa;
    }
    m
}

fn reduced_nambu_derivative(red: &Reduced, omega: Complex64) -> DMatrix<Complex64> {
    let n = red.detunings.len();
    let mut chi = DMatrix::<Complex64>::zeros(n, n);
    for (k, &e) in red.energies.iter().enumerate() {
        let w = lindhard_weight_derivative(e, omega);
        for a in 0..n {
            for b in 0..n {
                chi[(a, b)] += w * red.coupling[(a, k)] * red.coupling[(b, k)];
            }
        }
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            let c = chi[(a, b)];
            m[(a, b)] = c;
            m[(a, b + n)] = c;
            m[(a + n, b)] = c;
            m[(a + n, b + n)] = c;
        }
        m[(a, a)] += 1.0;
        m[(a + n, a + n)] -= 1.0;
    }
    m
}

fn cleared_det(red: &Reduced, omega: Complex64) -> Complex64 {
    let cleared: Complex64 = red.energies.iter().map(|&e| e * e - omega * omega).product();
    cleared * reduced_nambu(red, omega).determinant()
}

/// Coefficients of `q(c + R z)` from samples on `|z| = 1`.
fn sampled_polynomial(red: &Reduced, center: Complex64, radius: f64) -> Result<Vec<Complex64>> {
    let degree = 2 * red.detunings.len() + 2 * red.energies.len();
    let m = 2 * (degree + 1);
    let samples: Vec<Complex64> = (0..m)
        .map(|k| {
            cleared_det(
                red,
                center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / m as f64),
            )
        })
        .collect();
    let mut coeffs = Vec::with_capacity(degree + 1);
    for l in 0..=degree {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &s) in samples.iter().enumerate() {
            acc += s * Complex64::from_polar(1.0, -2.0 * PI * (k * l % m) as f64 / m as f64);
        }
        coeffs.push(acc / m as f64);
    }
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NoConvergence("find_poles: determinant sampling"));
    }
    Ok(coeffs)
}

fn companion_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut d = coeffs.len() - 1;
    while d > 0 && coeffs[d].norm() == 0.0 {
        d -= 1;
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let mut c = DMatrix::<Complex64>::zeros(d, d);
    for j in 0..d {
        c[(0, j)] = -coeffs[d - 1 - j] / lead;
    }
    for i in 1..d {
        c[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let eig = c
        .schur()
        .eigenvalues()
        .ok_or(Error::NoConvergence("find_poles: companion eigenvalues"))?;
    Ok(eig.iter().copied().collect())
}

/// A root next to a cleared atomic pole is spurious unless `det G^{-1}`
/// itself has a zero there: its winding number on a small circle that keeps
/// the pole outside must be nonzero. Call this on polished roots, which sit
/// on the cleared pole itself when they are spurious.
fn is_spurious(red: &Reduced, w: Complex64) -> bool {
    let Some(d) = red
        .energies
        .iter()
        .flat_map(|&e| [(w - e).norm(), (w + e).norm()])
        .filter(|&d| d < CLEARED_BAND * w.norm().max(1.0))
        .min_by(f64::total_cmp)
    else {
        return false;
    };
    if d <= CLEARED_COINCIDENT * w.norm().max(1.0) {
        return true;
    }
    const SAMPLES: usize = 16;
    let radius = 0.25 * d;
    let values: Vec<Complex64> = (0..SAMPLES)
        .map(|k| {
            reduced_nambu(
                red,
                w + Complex64::from_polar(radius, 2.0 * PI * k as f64 / SAMPLES as f64),
            )
            .determinant()
        })
        .collect();
    let turns: f64 = (0..SAMPLES)
        .map(|k| (values[(k + 1) % SAMPLES] / values[k]).arg())
        .sum::<f64>()
        / (2.0 * PI);
    turns.round() == 0.0
}

/// Newton step `q / q'` from the logarithmic derivative of the cleared determinant.
fn newton_step(red: &Reduced, w: Complex64) -> Option<Complex64> {
    let m = reduced_nambu(red, w);
    let dm = reduced_nambu_derivative(red, w);
    let lu = m.lu();
    let x = lu.solve(&dm)?;
    let mut logd = x.trace();
    for &e in &red.energies {
        logd += -2.0 * w / (e * e - w * w);
    }
    let step = 1.0 / logd;
    (step.re.is_finite() && step.im.is_finite()).then_some(step)
}

/// Newton from every starting point. A root is settled when the iteration
/// converges close to where it started and no other root settles on it.
fn polish_all(red: &Reduced, raw: &[Complex64]) -> (Vec<Complex64>, Vec<bool>) {
    let mut out = Vec::with_capacity(raw.len());
    let mut settled = Vec::with_capacity(raw.len());
    for (k, &w0) in raw.iter().enumerate() {
        let sep = raw
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &z)| (z - w0).norm())
            .fold(f64::INFINITY, f64::min);
        let mut w = w0;
        let mut converged = false;
        for _ in 0..30 {
            let Some(step) = newton_step(red, w) else { break };
            w -= step;
            if step.norm() <= 1e-15 * w.norm().max(1.0) {
                converged = true;
                break;
            }
        }
        if (w - w0).norm() < 0.3 * sep && w.re.is_finite() && w.im.is_finite() {
            out.push(w);
            settled.push(converged || newton_step(red, w).is_some_and(|s| s.norm() <= 1e-12 * w.norm().max(1.0)));
        } else {
            out.push(w0);
            settled.push(false);
        }
    }
    for a in 0..out.len() {
        for b in a + 1..out.len() {
            if (out[a] - out[b]).norm() <= 1e-9 * out[a].norm().max(1.0) {
                settled[a] = false;
                settled[b] = false;
            }
        }
    }
    (out, settled)
}

/// Groups of roots around `roots[k]`, smallest first, that are set apart
/// from the rest by [`GROUP_GAP`], each with a circle radius between the
/// group and the rest. The group holding every root is not included.
fn isolated_groups(roots: &[Complex64], k: usize) -> Vec<(Vec<usize>, f64)> {
    let mut by_distance: Vec<(f64, usize)> = roots
        .iter()
        .enumerate()
        .map(|(j, &z)| ((z - roots[k]).norm(), j))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for m in 1..by_distance.len() {
        let (inner, outer) = (by_distance[m - 1].0, by_distance[m].0);
        if outer > GROUP_GAP * inner && outer > 0.0 {
            let radius = if inner > 0.0 {
                (inner * outer).sqrt()
            } else {
                0.5 * outer
            };
            out.push((by_distance[..m].iter().map(|&(_, j)| j).collect(), radius));
        }
    }
    out
}

/// Roots of `q` inside the circle `|w - center| < radius`.
fn local_roots(red: &Reduced, center: Complex64, radius: f64) -> Result<Vec<Complex64>> {
    let coeffs = sampled_polynomial(red, center, radius)?;
    Ok(companion_roots(&coeffs)?
        .into_iter()
        .filter(|z| z.norm() < 1.0)
        .map(|z| center + z * radius)
        .collect())
}

fn polish_with_local_solves(red: &Reduced, mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let (mut polished, mut settled) = polish_all(red, &roots);
    for _ in 0..LOCAL_ROUNDS {
        let Some(k) = settled.iter().position(|&s| !s) else {
            break;
        };
        let mut replaced = false;
        let mut tried = vec![false; roots.len()];
        for k in (k..roots.len()).filter(|&k| !settled[k]) {
            if tried[k] {
                continue;
            }
            // a circle that misses a root finds the wrong count; widen it
            for (group, radius) in isolated_groups(&roots, k) {
                let Ok(found) = local_roots(red, roots[k], radius) else {
                    continue;
                };
                if found.len() != group.len() {
                    continue;
                }
                for (&j, w) in group.iter().zip(found) {
                    roots[j] = w;
                    tried[j] = true;
                }
                replaced = true;
                break;
            }
        }
        if !replaced {
            break;
        }
        (polished, settled) = polish_all(red, &roots);
    }
    polished
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TrapGeometry;
    use crate::response::tests::{fig2, single_mode};

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn max_matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let mut used = vec![false; b.len()];
        let mut worst: f64 = 0.0;
        for &x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, &y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn bare_poles_exact() {
        let m = Model::new(fig2(0.0)).unwrap();
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 8);
        for (j, &d) in m.detunings().iter().enumerate() {
            for s in [1.0, -1.0] {
                let target = Complex64::new(s * d, -0.02);
                assert!(p.poles.iter().any(|q| q.omega == target && q.mode == j));
            }
        }
    }

    #[test]
    fn threshold_root_at_origin() {
        let (d, k) = (0.8f64, 0.02f64);
        let lc = ((k * k + d * d) / (4.0 * d)).sqrt();
        assert!((lc - 0.447_353_327_918_771_6).abs() < 1e-12);
        let m = Model::new(single_mode(d, k, lc)).unwrap();
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 4);
        let origin = p.omegas().iter().map(|w| w.norm()).fold(f64::INFINITY, f64::min);
        assert!(origin < 1e-8, "closest root {origin}");
    }

    #[test]
    fn below_threshold_is_stable() {
        for ratio in [0.1, 0.5, 0.9, 0.99] {
            let (d, k) = (0.8f64, 0.02f64);
            let lc = ((k * k + d * d) / (4.0 * d)).sqrt();
            let m = Model::new(single_mode(d, k, lc * ratio)).unwrap();
            assert!(m.find_poles().unwrap().max_imag() < 0.0);
        }
    }

    #[test]
    fn roots_are_zeros_of_the_determinant() {
        let m = Model::new(fig2(0.35)).unwrap();
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 10);
        for pole in p.poles.iter().filter(|p| !p.dark) {
            let g = m.inverse_greens(pole.omega).matrix;
            let smallest = g.singular_values().min();
            assert!(smallest < 1e-10, "sigma_min = {smallest} at {}", pole.omega);
        }
    }

    #[test]
    fn degenerate_modes_are_deflated() {
        let mut s = fig2(0.3);
        s.drive.epsilon = 0.0;
        s.drive.alpha_max = 16;
        s.geom = TrapGeometry::new(1000.0, 200.0, 16, 1).unwrap();
        let m = Model::new(s).unwrap();
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 34);
        assert_eq!(p.poles.iter().filter(|p| p.dark).count(), 30);
        let bright: Vec<_> = p.poles.iter().filter(|p| !p.dark).collect();
        for pole in bright {
            assert!(m.inverse_greens(pole.omega).matrix.singular_values().min() < 1e-10);
        }
    }

    #[test]
    fn zero_coupling_modes_stay_bare() {
        let mut s = fig2(0.3);
        s.drive.b_m = 0.0;
        let m = Model::new(s).unwrap();
        let p = m.find_poles().unwrap();
        for j in 1..4 {
            let d = m.detunings()[j];
            assert!(p
                .poles
                .iter()
                .any(|q| q.dark && q.mode == j && q.omega == Complex64::new(d, -0.02)));
        }
    }

    #[test]
    fn scalar_and_determinant_agree() {
        let m = Model::new(fig2(0.4)).unwrap();
        let a = m.find_poles_with(PoleMethod::Scalar).unwrap().omegas();
        let b = m.find_poles_with(PoleMethod::Determinant).unwrap().omegas();
        assert!(max_matching_distance(&a, &b) < 1e-9);
    }

    #[test]
    fn scalar_path_rejects_wide_cloud() {
        let mut s = fig2(0.3);
        s.geom = TrapGeometry::new(2.0, 200.0, 3, 3).unwrap();
        s.omega_trap = 0.3;
        let m = Model::new(s).unwrap();
        assert!(m.find_poles_with(PoleMethod::Scalar).is_err());
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 12);
    }

    #[test]
    fn wide_cloud_roots_are_zeros() {
        let mut s = fig2(0.3);
        s.geom = TrapGeometry::new(1.3, 200.0, 3, 3).unwrap();
        s.omega_trap = 0.25;
        let m = Model::new(s).unwrap();
        for pole in m.find_poles().unwrap().poles {
            let g = m.inverse_greens(pole.omega).matrix;
            assert!(g.singular_values().min() < 1e-9, "{}", pole.omega);
        }
    }

    #[test]
    fn red_detuned_mode_is_unstable() {
        let m = Model::new(single_mode(-0.5, 0.02, 0.05)).unwrap();
        let p = m.find_poles().unwrap();
        let lead = p.leading().unwrap();
        assert!(lead.omega.im > 0.0);
        assert!(lead.omega.re.abs() > 0.5);
    }

    #[test]
    fn indistinguishable_atomic_states_are_compressed() {
        // two atomic states that the cavity cannot tell apart produce a
        // cleared factor without a matching root of det G^{-1}
        let mut s = single_mode(0.8, 0.02, 0.3);
        s.geom = TrapGeometry::new(2.0, 200.0, 1, 2).unwrap();
        let m = Model::new(s).unwrap();
        let p = m.find_poles().unwrap();
        assert_eq!(p.poles.len(), 4);
        for pole in &p.poles {
            assert!(m.inverse_greens(pole.omega).matrix.singular_values().min() < 1e-10);
        }
    }

    fn closure_error(m: &Model) -> f64 {
        let w = m.find_poles().unwrap().omegas();
        let mirrored: Vec<Complex64> = w.iter().map(|z| -z.conj()).collect();
        max_matching_distance(&w, &mirrored)
    }

    fn spec_with(b_m: f64, eps: f64, d0: f64, kappa: f64, ratio: f64) -> crate::medium::SystemSpec {
        let mut s = fig2(0.0);
        s.drive.b_m = b_m;
        s.drive.epsilon = eps;
        s.delta0 = d0;
        s.kappa = kappa;
        s.lambda = (ratio * (kappa * kappa + d0 * d0) / (4.0 * d0)).sqrt();
        s
    }

    #[test]
    fn crowded_sidebands_are_resolved() {
        // ten modes whose detunings differ by less than kappa
        let mut s = spec_with(
            2.322166570445537,
            0.012803657286426628,
            0.18287016759429847,
            0.07145978174522852,
            1.49,
        );
        s.geom = TrapGeometry::new(1000.0, 200.0, 10, 1).unwrap();
        let m = Model::new(s).unwrap();
        assert!(closure_error(&m) < 1e-10);
        for p in m.find_poles().unwrap().poles {
            assert!(
                m.inverse_greens(p.omega).matrix.singular_values().min() < 1e-10,
                "{}",
                p.omega
            );
        }
        // every root stays next to a bare pole since the higher sidebands are weak
        for p in m.find_poles().unwrap().poles.iter().filter(|p| p.omega.re.abs() < 0.5) {
            assert!((p.omega.im + 0.0714).abs() < 3e-3, "{}", p.omega);
        }
    }

    #[test]
    fn small_root_cluster_is_resolved() {
        // eight roots within 0.1 of the origin next to atomic roots near 1
        let mut s = spec_with(0.6328772601875295, 0.06204725198514644, 0.1, 0.005, 1.2219518256715869);
        s.geom = TrapGeometry::new(1.7, 200.0, 4, 2).unwrap();
        s.omega_trap = 0.4;
        let m = Model::new(s).unwrap();
        assert!(closure_error(&m) < 1e-10);
        for p in m.find_poles().unwrap().poles {
            assert!(
                m.inverse_greens(p.omega).matrix.singular_values().min() < 1e-10,
                "{}",
                p.omega
            );
        }
    }

    #[test]
    fn weakly_coupled_atomic_roots_come_in_pairs() {
        // the n = 2 polaritons sit about 1e-7 from +-E_2
        let mut s = spec_with(
            0.664226304429112,
            0.2033721972001425,
            0.27317643114131185,
            0.07582085181636762,
            1.2519,
        );
        s.geom = TrapGeometry::new(3.0, 200.0, 4, 3).unwrap();
        s.omega_trap = 0.4;
        let m = Model::new(s).unwrap();
        let w = m.find_poles().unwrap().omegas();
        assert_eq!(w.len(), 14);
        assert!(closure_error(&m) < 1e-10);
        assert!(w.iter().any(|z| (z.re + 1.8).abs() < 1e-6));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn particle_hole_closure(
                ratio in 0.0f64..1.6,
                b_m in 0.0f64..3.0,
                eps in -0.25f64..0.25,
                d0 in 0.1f64..1.5,
                kappa in 0.005f64..0.1,
                wide in proptest::bool::ANY,
            ) {
                let mut s = fig2(0.0);
                s.drive.b_m = b_m;
                s.drive.epsilon = eps;
                s.delta0 = d0;
                s.kappa = kappa;
                if wide {
                    s.geom = TrapGeometry::new(1.7, 200.0, 4, 2).unwrap();
                    s.omega_trap = 0.4;
                }
                s.lambda = (ratio * (kappa * kappa + d0 * d0) / (4.0 * d0)).sqrt();
                let m = Model::new(s).unwrap();
                let w = m.find_poles().unwrap().omegas();
                let mirrored: Vec<Complex64> = w.iter().map(|z| -z.conj()).collect();
                prop_assert!(max_matching_distance(&w, &mirrored) <= 1e-8);
            }

            #[test]
            fn fast_path_matches_determinant(
                ratio in 0.0f64..1.6,
                b_m in 0.1f64..3.0,
                eps in -0.25f64..0.25,
                kappa in 0.005f64..0.1,
                modes in 1usize..6,
            ) {
                let mut s = fig2(0.0);
                s.drive.b_m = b_m;
                s.drive.epsilon = eps;
                s.kappa = kappa;
                s.geom = TrapGeometry::new(1000.0, 200.0, modes, 1).unwrap();
                s.lambda = (ratio * (kappa * kappa + 0.64) / 3.2).sqrt();
                let m = Model::new(s).unwrap();
                let a = sorted(m.find_poles_with(PoleMethod::Scalar).unwrap().omegas());
                let b = sorted(m.find_poles_with(PoleMethod::Determinant).unwrap().omegas());
                prop_assert!(max_matching_distance(&a, &b) <= 1e-9);
            }

            #[test]
            fn subcritical_single_mode_is_stable(ratio in 0.01f64..0.99, d0 in 0.2f64..2.0, kappa in 0.005f64..0.1) {
                let lc = ((kappa * kappa + d0 * d0) / (4.0 * d0)).sqrt();
                let m = Model::new(single_mode(d0, kappa, lc * ratio.sqrt())).unwrap();
                prop_assert!(m.find_poles().unwrap().max_imag() < 0.0);
            }
        }
    }
}
