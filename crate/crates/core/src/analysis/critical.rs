//! Instability thresholds and their classification.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::SystemSpec;
use crate::response::{poles_max_imag, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstabilityKind {
    Stable,
    /// A pole reaches the upper half-plane through zero frequency (superradiance).
    ZeroFrequency,
    /// A pole with nonzero real frequency becomes unstable first.
    FiniteFrequency,
}

impl InstabilityKind {
    pub fn label(self) -> &'static str {
        match self {
            InstabilityKind::Stable => "stable",
            InstabilityKind::ZeroFrequency => "zero_frequency",
            InstabilityKind::FiniteFrequency => "finite_frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityReport {
    pub kind: InstabilityKind,
    pub critical_lambda: Option<f64>,
    /// Leading pole just above threshold.
    pub unstable_pole: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalOptions {
    /// Upper end of the coupling search; defaults to five times the
    /// single-mode threshold.
    pub lambda_hi: Option<f64>,
    /// Uniform scan points before bisection.
    pub scan_points: usize,
    pub lambda_tol: f64,
    /// A pole counts as unstable once its imaginary part exceeds this.
    pub im_tol: f64,
    /// Thresholds with `|Re w|` below this are zero-frequency.
    pub freq_tol: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            lambda_hi: None,
            scan_points: 64,
            lambda_tol: 1e-8,
            im_tol: 1e-10,
            freq_tol: 1e-6,
        }
    }
}

/// `Lambda_c = sqrt((kappa^2 + D^2) E_r / (4 D))` for one blue-detuned mode.
pub fn critical_coupling_single_mode(delta0: f64, kappa: f64) -> Result<f64> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::domain(
            "critical_coupling_single_mode",
            format!("needs delta0 > 0, got {delta0}"),
        ));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::domain(
            "critical_coupling_single_mode",
            format!("needs kappa >= 0, got {kappa}"),
        ));
    }
    Ok(((kappa * kappa + delta0 * delta0) * crate::medium::E_R / (4.0 * delta0)).sqrt())
}

/// Default search ceiling for a system.
pub fn default_lambda_hi(spec: &SystemSpec) -> f64 {
    let d = spec.delta0.abs().max(1e-3);
    5.0 * ((spec.kappa * spec.kappa + d * d) / (4.0 * d)).sqrt()
}

/// Smallest coupling at which a pole enters the upper half-plane.
///
/// The coupling of `model` itself is ignored. A system that stays stable up
/// to the search ceiling is reported as [`InstabilityKind::Stable`].
pub fn critical_coupling(model: &Model, opts: &CriticalOptions) -> Result<InstabilityReport> {
    let hi = opts.lambda_hi.unwrap_or_else(|| default_lambda_hi(model.spec()));
    if !(hi > 0.0) || opts.scan_points == 0 {
        return Err(Error::domain("critical_coupling", "search range must be positive"));
    }
    let growth = |lambda: f64| -> Result<f64> { poles_max_imag(&model.with_lambda(lambda)?) };
    if growth(0.0)? > opts.im_tol {
        return Err(Error::domain(
            "critical_coupling",
            "system is unstable without coupling",
        ));
    }
    let mut lo = 0.0;
    let mut bracket = None;
    for i in 1..=opts.scan_points {
        let lambda = hi * i as f64 / opts.scan_points as f64;
        if growth(lambda)? > opts.im_tol {
            bracket = Some((lo, lambda));
            break;
        }
        lo = lambda;
    }
    let Some((mut lo, mut up)) = bracket else {
        return Ok(InstabilityReport {
            kind: InstabilityKind::Stable,
            critical_lambda: None,
            unstable_pole: None,
        });
    };
    while up - lo > opts.lambda_tol {
        let mid = 0.5 * (lo + up);
        if growth(mid)? > opts.im_tol {
            up = mid;
        } else {
            lo = mid;
        }
    }
    let poles = model.with_lambda(up)?.find_poles()?;
    let pole = poles
        .leading()
        .map(|p| p.omega)
        .ok_or(Error::NoConvergence("critical_coupling"))?;
    let kind = if pole.re.abs() < opts.freq_tol {
        InstabilityKind::ZeroFrequency
    } else {
        InstabilityKind::FiniteFrequency
    };
    Ok(InstabilityReport {
        kind,
        critical_lambda: Some(0.5 * (lo + up)),
        unstable_pole: Some(pole),
    })
}

/// Thresholds with and without coupling renormalization at one modulation depth.
#[derive(Debug)]
pub struct LambdaCPoint {
    pub b_m: f64,
    pub bare: std::result::Result<InstabilityReport, String>,
    pub renormalized: std::result::Result<InstabilityReport, String>,
}

pub fn lambda_c_curve(template: &SystemSpec, b_ms: &[f64], opts: &CriticalOptions) -> Vec<LambdaCPoint> {
    let run = |b_m: f64, renormalize: bool| {
        let mut s = template.clone();
        s.drive.b_m = b_m;
        s.drive.renormalize = renormalize;
        Model::new(s)
            .and_then(|m| critical_coupling(&m, opts))
            .map_err(|e| e.to_string())
    };
    b_ms.par_iter()
        .map(|&b_m| LambdaCPoint {
            b_m,
            bare: run(b_m, false),
            renormalized: run(b_m, true),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub epsilon: f64,
    pub b_m: f64,
    pub report: std::result::Result<InstabilityReport, String>,
}

impl PhaseCell {
    /// `|Re w|` of the threshold pole, the quantity a colour scale would show.
    pub fn frequency(&self) -> Option<f64> {
        self.report
            .as_ref()
            .ok()
            .and_then(|r| r.unstable_pole)
            .map(|p| p.re.abs())
    }

    pub fn kind(&self) -> Option<InstabilityKind> {
        self.report.as_ref().ok().map(|r| r.kind)
    }
}

/// Leading instability on an `epsilon x B_m` grid, rows by epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub epsilons: Vec<f64>,
    pub b_ms: Vec<f64>,
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, e: usize, b: usize) -> &PhaseCell {
        &self.cells[e * self.b_ms.len() + b]
    }
}

pub fn phase_diagram(template: &SystemSpec, epsilons: &[f64], b_ms: &[f64], opts: &CriticalOptions) -> PhaseDiagram {
    let points: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&e| b_ms.iter().map(move |&b| (e, b)))
        .collect();
    let cells = points
        .par_iter()
        .map(|&(epsilon, b_m)| {
            let mut s = template.clone();
            s.drive.epsilon = epsilon;
            s.drive.b_m = b_m;
            let report = Model::new(s)
                .and_then(|m| critical_coupling(&m, opts))
                .map_err(|e| e.to_string());
            PhaseCell { epsilon, b_m, report }
        })
        .collect();
    PhaseDiagram {
        epsilons: epsilons.to_vec(),
        b_ms: b_ms.to_vec(),
        cells,
    }
}
