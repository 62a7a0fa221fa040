//! Effective inter-mode couplings read off avoided crossings.
//!
//! Near a crossing the two hybridizing branches are modelled as two damped
//! modes with a common loss rate and a real coupling `g`. The spectral
//! function of the first mode is then
//!
//! ```text
//! A_11(x) = 2 kappa (x^2 + kappa^2 + g^2) / ((x^2 - kappa^2 - g^2)^2 + 4 kappa^2 x^2)
//! ```
//!
//! with `x` measured from the common detuning. Its two peaks sit close to
//! `x = +-sqrt(g^2 - kappa^2)` when `g >> kappa`, so half the peak splitting
//! estimates `g`, and `sqrt((splitting / 2)^2 + kappa^2)` undoes the loss shift.

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::peaks::{detect_peaks, Peak, DEFAULT_PROMINENCE};
use crate::error::{Error, Result};
use crate::response::Model;

/// Produces one spectral slice for a value of the swept control parameter.
pub trait SpectrumSource: Sync {
    fn spectrum(&self, control: f64, omegas: &[f64]) -> Result<Vec<f64>>;
}

/// Two linearly coupled modes whose self-energies grow with `Lambda^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeModel {
    pub delta1: f64,
    pub delta2: f64,
    pub sigma11: f64,
    pub sigma22: f64,
    pub sigma12: f64,
    pub kappa: f64,
}

impl TwoModeModel {
    /// Choose `sigma12` so that the coupling equals `g` at the crossing.
    pub fn with_coupling_at_crossing(
        delta1: f64,
        delta2: f64,
        sigma11: f64,
        sigma22: f64,
        g: f64,
        kappa: f64,
    ) -> Result<Self> {
        let mut m = Self {
            delta1,
            delta2,
            sigma11,
            sigma22,
            sigma12: 0.0,
            kappa,
        };
        let lac = m
            .crossing_lambda()
            .ok_or_else(|| Error::domain("TwoModeModel", "the two levels never cross"))?;
        m.sigma12 = g / (lac * lac);
        Ok(m)
    }

    /// Coupling at which the dressed detunings coincide.
    pub fn crossing_lambda(&self) -> Option<f64> {
        let l2 = (self.delta2 - self.delta1) / (self.sigma11 - self.sigma22);
        (l2.is_finite() && l2 > 0.0).then(|| l2.sqrt())
    }

    pub fn crossing_detuning(&self) -> Option<f64> {
        self.crossing_lambda().map(|l| self.delta1 + l * l * self.sigma11)
    }

    pub fn coupling(&self, lambda: f64) -> f64 {
        lambda * lambda * self.sigma12
    }

    /// Spectral function of the first mode.
    pub fn a11(&self, omega: f64, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        let z = Complex64::new(omega, self.kappa);
        let m = Matrix2::new(
            z - self.delta1 - l2 * self.sigma11,
            Complex64::new(-l2 * self.sigma12, 0.0),
            Complex64::new(-l2 * self.sigma12, 0.0),
            z - self.delta2 - l2 * self.sigma22,
        );
        let d = m
            .try_inverse()
            .map(|inv| inv[(0, 0)])
            .unwrap_or(Complex64::new(0.0, f64::NEG_INFINITY));
        -2.0 * d.im
    }
}

impl SpectrumSource for TwoModeModel {
    fn spectrum(&self, lambda: f64, omegas: &[f64]) -> Result<Vec<f64>> {
        Ok(omegas.iter().map(|&w| self.a11(w, lambda)).collect())
    }
}

/// Diagonal spectral entry of a [`Model`], swept in `(Lambda / Lambda_c)^2`.
pub struct ModelSpectrum<'a> {
    pub model: &'a Model,
    pub lambda_c: f64,
    pub entry: usize,
}

impl SpectrumSource for ModelSpectrum<'_> {
    fn spectrum(&self, ratio_sq: f64, omegas: &[f64]) -> Result<Vec<f64>> {
        let m = self.model.with_lambda(self.lambda_c * ratio_sq.max(0.0).sqrt())?;
        omegas
            .iter()
            .map(|&w| m.spectral_entry(w, (self.entry, self.entry)).map(|a| a.re))
            .collect()
    }
}

/// How the crossing point is found along the sweep.
#[derive(Clone, Copy)]
pub enum CrossingLocator<'a> {
    /// The two peaks have equal height.
    EqualHeights,
    /// A supplied function (typically the difference between the two
    /// uncoupled branch energies) changes sign.
    Coalescence(&'a (dyn Fn(f64) -> Result<f64> + Sync)),
    /// The two peaks are closest together.
    MinimumSplitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingOptions {
    pub omegas: Vec<f64>,
    /// Control values scanned for a bracket, ascending.
    pub sweep: Vec<f64>,
    /// Frequency around which the two peaks are sought.
    pub reference: f64,
    pub window: f64,
    pub kappa: f64,
    pub height_tol: f64,
    pub prominence: f64,
    pub control_tol: f64,
}

impl CrossingOptions {
    pub fn new(omegas: Vec<f64>, sweep: Vec<f64>, reference: f64, window: f64, kappa: f64) -> Self {
        Self {
            omegas,
            sweep,
            reference,
            window,
            kappa,
            height_tol: 0.02,
            prominence: DEFAULT_PROMINENCE,
            control_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    /// Control parameter at the crossing.
    pub control: f64,
    /// Half the peak splitting.
    pub g_eff: f64,
    /// `sqrt(g_eff^2 + kappa^2)`.
    pub g_corrected: f64,
    pub peak_positions: (f64, f64),
    pub peak_heights: (f64, f64),
    /// `|h1 - h2| / max(h1, h2)` at the reported point.
    pub height_mismatch: f64,
}

/// Two highest peaks inside the search window, ordered by frequency.
fn peak_pair(source: &dyn SpectrumSource, control: f64, opts: &CrossingOptions) -> Result<Option<(Peak, Peak)>> {
    let values = source.spectrum(control, &opts.omegas)?;
    let mut peaks: Vec<Peak> = detect_peaks(&opts.omegas, &values, opts.prominence)
        .into_iter()
        .filter(|p| (p.omega - opts.reference).abs() <= opts.window)
        .collect();
    if peaks.len() < 2 {
        return Ok(None);
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    let (a, b) = (peaks[0], peaks[1]);
    Ok(Some(if a.omega < b.omega { (a, b) } else { (b, a) }))
}

fn imbalance(pair: &(Peak, Peak)) -> f64 {
    (pair.0.height - pair.1.height) / (pair.0.height + pair.1.height)
}

fn mismatch(pair: &(Peak, Peak)) -> f64 {
    (pair.0.height - pair.1.height).abs() / pair.0.height.max(pair.1.height)
}

fn report(control: f64, pair: (Peak, Peak), kappa: f64) -> Result<CrossingReport> {
    let splitting = pair.1.omega - pair.0.omega;
    if splitting < 2.0 * kappa {
        return Err(Error::PeaksUnresolved {
            splitting,
            limit: 2.0 * kappa,
        });
    }
    let g = 0.5 * splitting;
    Ok(CrossingReport {
        control,
        g_eff: g,
        g_corrected: (g * g + kappa * kappa).sqrt(),
        peak_positions: (pair.0.omega, pair.1.omega),
        peak_heights: (pair.0.height, pair.1.height),
        height_mismatch: mismatch(&pair),
    })
}

/// Locate an avoided crossing along the sweep and read off the coupling.
pub fn extract_effective_coupling(
    source: &dyn SpectrumSource,
    locator: CrossingLocator,
    opts: &CrossingOptions,
) -> Result<CrossingReport> {
    match locator {
        CrossingLocator::EqualHeights => equal_heights(source, opts),
        CrossingLocator::Coalescence(f) => {
            let x = find_sign_change(f, &opts.sweep, opts.control_tol)?;
            let pair = peak_pair(source, x, opts)?.ok_or(Error::PeaksUnresolved {
                splitting: 0.0,
                limit: 2.0 * opts.kappa,
            })?;
            report(x, pair, opts.kappa)
        }
        CrossingLocator::MinimumSplitting => minimum_splitting(source, opts),
    }
}

fn splitting_at(source: &dyn SpectrumSource, x: f64, opts: &CrossingOptions) -> Result<Option<(f64, (Peak, Peak))>> {
    Ok(peak_pair(source, x, opts)?.map(|p| (p.1.omega - p.0.omega, p)))
}

/// Golden-section search between the sweep neighbours of the smallest
/// resolved splitting. Both neighbours must themselves show two peaks,
/// otherwise the minimum is at the edge of the resolved range.
fn minimum_splitting(source: &dyn SpectrumSource, opts: &CrossingOptions) -> Result<CrossingReport> {
    let mut scanned = Vec::with_capacity(opts.sweep.len());
    for &x in &opts.sweep {
        scanned.push((x, splitting_at(source, x, opts)?));
    }
    let best = (1..scanned.len().saturating_sub(1))
        .filter(|&i| scanned[i - 1].1.is_some() && scanned[i + 1].1.is_some())
        .filter_map(|i| scanned[i].1.map(|(s, _)| (i, s)))
        .filter(|&(i, s)| s <= scanned[i - 1].1.unwrap().0 && s <= scanned[i + 1].1.unwrap().0)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::NoCrossing)?;
    let invphi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (scanned[best - 1].0, scanned[best + 1].0);
    let eval = |x: f64| -> Result<(f64, (Peak, Peak))> {
        splitting_at(source, x, opts)?.ok_or(Error::PeaksUnresolved {
            splitting: 0.0,
            limit: 2.0 * opts.kappa,
        })
    };
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > opts.control_tol {
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d)?;
        }
    }
    let (x, pair) = if fc.0 <= fd.0 { (c, fc.1) } else { (d, fd.1) };
    report(x, pair, opts.kappa)
}

fn equal_heights(source: &dyn SpectrumSource, opts: &CrossingOptions) -> Result<CrossingReport> {
    let mut scanned = Vec::with_capacity(opts.sweep.len());
    for &x in &opts.sweep {
        scanned.push((x, peak_pair(source, x, opts)?));
    }
    let mut unresolved = None;
    for w in scanned.windows(2) {
        let ((x0, Some(p0)), (x1, Some(p1))) = (&w[0], &w[1]) else {
            continue;
        };
        let (f0, f1) = (imbalance(p0), imbalance(p1));
        if f0 == 0.0 {
            return report(*x0, *p0, opts.kappa);
        }
        if f0.signum() == f1.signum() {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (*x0, *x1, f0);
        let mut best = if f0.abs() < f1.abs() { (*x0, *p0) } else { (*x1, *p1) };
        while hi - lo > opts.control_tol {
            let mid = 0.5 * (lo + hi);
            let Some(pm) = peak_pair(source, mid, opts)? else { break };
            if mismatch(&pm) < mismatch(&best.1) {
                best = (mid, pm);
            }
            let fm = imbalance(&pm);
            if fm == 0.0 {
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        // a sign flip caused by peaks swapping identity is not a crossing
        if mismatch(&best.1) > opts.height_tol {
            continue;
        }
        match report(best.0, best.1, opts.kappa) {
            Ok(r) => return Ok(r),
            Err(e @ Error::PeaksUnresolved { .. }) => unresolved = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(unresolved.unwrap_or(Error::NoCrossing))
}

/// First zero of `f` along `sweep`, refined by bisection to `tol`.
pub fn find_sign_change(f: &(dyn Fn(f64) -> Result<f64> + Sync), sweep: &[f64], tol: f64) -> Result<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for &x in sweep {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if let Some((x0, f0)) = prev {
            if f0.signum() != fx.signum() {
                let (mut lo, mut hi, mut flo) = (x0, x, f0);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid)?;
                    if fm == 0.0 {
                        return Ok(mid);
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
        }
        prev = Some((x, fx));
    }
    Err(Error::NoCrossing)
}

/// Frequency of the cavity-like positive branch of mode `mode` coupled to the
/// atoms on its own, at `Lambda = lambda_c * sqrt(ratio_sq)`.
///
/// With the other modes removed the mode has one cavity-like and one
/// atom-like branch at positive frequency. The cavity-like one is the lower
/// of the two when the mode is detuned below the atomic line, the upper one
/// otherwise.
pub fn isolated_branch(model: &Model, mode: usize, lambda_c: f64, ratio_sq: f64) -> Result<f64> {
    let single = model
        .isolate_mode(mode)?
        .with_lambda(lambda_c * ratio_sq.max(0.0).sqrt())?;
    let detuning = single.detunings()[0];
    let energy = single.spec().atomic_energy(0);
    let mut positive: Vec<f64> = single
        .find_poles()?
        .omegas()
        .iter()
        .map(|w| w.re)
        .filter(|&re| re > 0.0)
        .collect();
    positive.sort_by(f64::total_cmp);
    let pick = if detuning < energy {
        positive.first()
    } else {
        positive.last()
    };
    pick.copied().ok_or(Error::NoConvergence("isolated_branch"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_grid(center: f64, half: f64, step: f64) -> Vec<f64> {
        let n = (2.0 * half / step).round() as usize + 1;
        (0..n).map(|i| center - half + i as f64 * step).collect()
    }

    fn forward(g_over_kappa: f64) -> (TwoModeModel, CrossingOptions) {
        let kappa = 0.02;
        let m = TwoModeModel::with_coupling_at_crossing(0.8, 0.61, -0.9, -0.1, g_over_kappa * kappa, kappa).unwrap();
        let center = m.crossing_detuning().unwrap();
        let lac = m.crossing_lambda().unwrap();
        let omegas = window_grid(center, 40.0 * kappa, kappa / 8.0);
        let sweep = (0..=40).map(|i| lac * (0.8 + 0.01 * i as f64)).collect();
        let opts = CrossingOptions::new(omegas, sweep, center, 30.0 * kappa, kappa);
        (m, opts)
    }

    #[test]
    fn crossing_geometry() {
        let m = TwoModeModel::with_coupling_at_crossing(0.8, 0.61, -0.9, -0.1, 0.1, 0.02).unwrap();
        let l = m.crossing_lambda().unwrap();
        assert!((0.8 - 0.9 * l * l - (0.61 - 0.1 * l * l)).abs() < 1e-15);
        assert!((m.coupling(l) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn parallel_levels_do_not_cross() {
        assert!(TwoModeModel::with_coupling_at_crossing(0.8, 0.61, -0.5, -0.5, 0.1, 0.02).is_err());
    }

    #[test]
    fn two_peaks_at_crossing() {
        let (m, opts) = forward(8.0);
        let lac = m.crossing_lambda().unwrap();
        let v = m.spectrum(lac, &opts.omegas).unwrap();
        assert_eq!(detect_peaks(&opts.omegas, &v, DEFAULT_PROMINENCE).len(), 2);
    }

    #[test]
    fn recovers_injected_coupling() {
        for g in [5.0, 10.0, 20.0] {
            let (m, opts) = forward(g);
            let r = extract_effective_coupling(&m, CrossingLocator::EqualHeights, &opts).unwrap();
            let lac = m.crossing_lambda().unwrap();
            assert!((r.control / lac - 1.0).abs() < 1e-6, "g = {g}: {} vs {lac}", r.control);
            assert!((r.g_eff / (g * 0.02) - 1.0).abs() < 0.01);
            assert!(r.height_mismatch < 0.02);
        }
    }

    #[test]
    fn weak_coupling_is_unresolved() {
        let (m, opts) = forward(0.5);
        let r = extract_effective_coupling(&m, CrossingLocator::EqualHeights, &opts);
        assert!(matches!(r, Err(Error::PeaksUnresolved { .. }) | Err(Error::NoCrossing)));
    }

    #[test]
    fn no_crossing_in_range() {
        let (m, mut opts) = forward(10.0);
        let lac = m.crossing_lambda().unwrap();
        opts.sweep = (0..10).map(|i| lac * (0.1 + 0.02 * i as f64)).collect();
        assert!(matches!(
            extract_effective_coupling(&m, CrossingLocator::EqualHeights, &opts),
            Err(Error::NoCrossing)
        ));
    }

    #[test]
    fn coalescence_locator() {
        let (m, opts) = forward(10.0);
        let f = move |l: f64| Ok(m.delta1 + l * l * m.sigma11 - m.delta2 - l * l * m.sigma22);
        let r = extract_effective_coupling(&m, CrossingLocator::Coalescence(&f), &opts).unwrap();
        assert!((r.control / m.crossing_lambda().unwrap() - 1.0).abs() < 1e-8);
        assert!((r.g_eff / 0.2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn minimum_splitting_locator() {
        let (m, mut opts) = forward(5.0);
        // the level splitting squared is (a + b L^2)^2 + 4 s^2 L^4, smallest at
        // L^2 = -a b / (b^2 + 4 s^2)
        let (a, b, s) = (m.delta1 - m.delta2, m.sigma11 - m.sigma22, m.sigma12);
        let target = (-a * b / (b * b + 4.0 * s * s)).sqrt();
        opts.sweep = (0..=40).map(|i| target * (0.8 + 0.01 * i as f64)).collect();
        opts.control_tol = 1e-7;
        let r = extract_effective_coupling(&m, CrossingLocator::MinimumSplitting, &opts).unwrap();
        assert!((r.control / target - 1.0).abs() < 0.01, "{} vs {target}", r.control);
        assert!(r.control < m.crossing_lambda().unwrap());
    }

    #[test]
    fn sign_change_search() {
        let f = |x: f64| Ok(x * x - 2.0);
        let sweep: Vec<f64> = (0..30).map(|i| 0.1 * i as f64).collect();
        let r = find_sign_change(&f, &sweep, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        let g = |x: f64| Ok(x + 10.0);
        assert!(matches!(find_sign_change(&g, &sweep, 1e-12), Err(Error::NoCrossing)));
    }
}
