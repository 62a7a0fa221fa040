//! Threshold, phase-diagram and spectral-feature analyses built on [`crate::response`].

mod critical;
mod crossing;
mod peaks;

pub use critical::{
    critical_coupling, critical_coupling_single_mode, default_lambda_hi, lambda_c_curve, phase_diagram,
    CriticalOptions, InstabilityKind, InstabilityReport, LambdaCPoint, PhaseCell, PhaseDiagram,
};
pub use crossing::{
    extract_effective_coupling, find_sign_change, isolated_branch, CrossingLocator, CrossingOptions, CrossingReport,
    ModelSpectrum, SpectrumSource, TwoModeModel,
};
pub use peaks::{detect_peaks, Peak, DEFAULT_PROMINENCE};
