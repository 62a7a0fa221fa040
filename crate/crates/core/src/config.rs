//! Run configuration: a sectioned `key = value` text file.
//!
//! ```text
//! [cavity]
//! delta0 = 0.8
//! kappa = 0.02
//! n_modes = 4
//! waist_ratio = 1000.0
//!
//! [drive]
//! b_m = 0.9
//! epsilon = 0.19
//! ```
//!
//! The syntax is TOML, so strings are quoted and booleans are `true`/`false`.
//! Unknown sections or keys are rejected. Every optional key has a default,
//! and the fully resolved file is what gets hashed and echoed next to outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{critical_coupling, critical_coupling_single_mode, default_lambda_hi, CriticalOptions};
use crate::error::{Error, Result};
use crate::geometry::TrapGeometry;
use crate::medium::{DriveSpec, SystemSpec};
use crate::response::Model;

/// Name of the sidecar file holding the resolved configuration.
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub delta0: Option<f64>,
    #[serde(default = "default_omega_t")]
    pub omega_t: f64,
    pub kappa: Option<f64>,
    pub n_modes: Option<usize>,
    pub waist_ratio: Option<f64>,
    #[serde(default = "default_w0_q")]
    pub w0_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default)]
    pub b_m: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: u32,
    #[serde(default)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    #[serde(default = "one")]
    pub n_atom_modes: usize,
    #[serde(default = "default_eta")]
    pub eta_atom: f64,
    #[serde(default)]
    pub omega_trap: f64,
}

/// Which threshold `lambda_ratio_sq` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaCReference {
    /// Numerical threshold of the configured multimode system.
    #[default]
    System,
    /// Analytic single-mode threshold at `delta0`, `kappa`.
    SingleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub lambda: Option<f64>,
    pub lambda_ratio_sq: Option<f64>,
    #[serde(default)]
    pub lambda_c_reference: LambdaCReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub omega_min: f64,
    #[serde(default = "one_f")]
    pub omega_max: f64,
    #[serde(default = "default_omega_points")]
    pub omega_points: usize,
    #[serde(default)]
    pub lambda_ratio_sq_min: f64,
    #[serde(default = "one_f")]
    pub lambda_ratio_sq_max: f64,
    #[serde(default = "default_ratio_points")]
    pub lambda_ratio_sq_points: usize,
    #[serde(default)]
    pub b_m_min: f64,
    #[serde(default = "default_b_m_max")]
    pub b_m_max: f64,
    #[serde(default = "default_b_m_points")]
    pub b_m_points: usize,
    #[serde(default)]
    pub epsilon_min: f64,
    #[serde(default = "default_epsilon_max")]
    pub epsilon_max: f64,
    #[serde(default = "default_epsilon_points")]
    pub epsilon_points: usize,
    /// Frequencies for `weights` and `profile`; empty means the positive
    /// bright poles of the configured system.
    #[serde(default)]
    pub weights_omegas: Vec<f64>,
    /// Half width of the peak search window around each crossing, in units
    /// of `kappa`.
    #[serde(default = "default_window")]
    pub crossing_window_kappa: f64,
    /// Upper end of the threshold search; 0 selects the automatic ceiling.
    #[serde(default)]
    pub lambda_hi: f64,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

/// The configuration file as written, after defaults are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub cavity: CavitySection,
    #[serde(default = "empty_table")]
    pub drive: DriveSection,
    #[serde(default = "empty_table")]
    pub medium: MediumSection,
    #[serde(default = "empty_table")]
    pub coupling: CouplingSection,
    #[serde(default = "empty_table")]
    pub sweep: SweepSection,
    #[serde(default = "empty_table")]
    pub output: OutputSection,
}

fn default_omega_t() -> f64 {
    100.0
}
fn default_w0_q() -> f64 {
    200.0
}
fn default_alpha_max() -> u32 {
    20
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    1e-6
}
fn default_omega_points() -> usize {
    400
}
fn default_ratio_points() -> usize {
    200
}
fn default_b_m_max() -> f64 {
    4.0
}
fn default_b_m_points() -> usize {
    41
}
fn default_epsilon_max() -> f64 {
    0.3
}
fn default_epsilon_points() -> usize {
    40
}
fn default_window() -> f64 {
    6.0
}
fn default_scan_points() -> usize {
    64
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Deserialize a section from an empty table so that its field defaults apply.
fn empty_table<T: serde::de::DeserializeOwned>() -> T {
    toml::from_str("").expect("every field of an optional section has a default")
}

/// Inclusive uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// How the coupling strength was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Absolute(f64),
    /// `(Lambda / Lambda_c)^2` against the chosen reference threshold.
    RatioSq(f64, LambdaCReference),
}

/// Validated configuration ready for the subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    file: ConfigFile,
    /// Physical system; `lambda` holds the absolute coupling when one was
    /// given and 0 otherwise.
    pub spec: SystemSpec,
    pub coupling: Coupling,
}

impl RunConfig {
    pub fn file(&self) -> &ConfigFile {
        &self.file
    }

    pub fn omega_range(&self) -> Range {
        let s = &self.file.sweep;
        Range {
            min: s.omega_min,
            max: s.omega_max,
            points: s.omega_points,
        }
    }

    pub fn lambda_ratio_range(&self) -> Range {
        let s = &self.file.sweep;
        Range {
            min: s.lambda_ratio_sq_min,
            max: s.lambda_ratio_sq_max,
            points: s.lambda_ratio_sq_points,
        }
    }

    pub fn b_m_range(&self) -> Range {
        let s = &self.file.sweep;
        Range {
            min: s.b_m_min,
            max: s.b_m_max,
            points: s.b_m_points,
        }
    }

    pub fn epsilon_range(&self) -> Range {
        let s = &self.file.sweep;
        Range {
            min: s.epsilon_min,
            max: s.epsilon_max,
            points: s.epsilon_points,
        }
    }

    pub fn sweep(&self) -> &SweepSection {
        &self.file.sweep
    }

    pub fn output_dir(&self) -> &Path {
        &self.file.output.dir
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.file.output.dir = dir;
    }

    pub fn set_renormalize(&mut self, renormalize: bool) {
        self.file.drive.renormalize = renormalize;
        self.spec.drive.renormalize = renormalize;
    }

    pub fn critical_options(&self) -> CriticalOptions {
        let s = &self.file.sweep;
        CriticalOptions {
            lambda_hi: (s.lambda_hi > 0.0).then_some(s.lambda_hi),
            scan_points: s.scan_points,
            ..CriticalOptions::default()
        }
    }

    /// Threshold that `lambda_ratio_sq` values refer to. `model` must be
    /// built from [`Self::spec`].
    pub fn reference_lambda_c(&self, model: &Model) -> Result<f64> {
        let reference = match self.coupling {
            Coupling::RatioSq(_, r) => r,
            Coupling::Absolute(_) => self.file.coupling.lambda_c_reference,
        };
        match reference {
            LambdaCReference::SingleMode => critical_coupling_single_mode(self.spec.delta0, self.spec.kappa),
            LambdaCReference::System => {
                let opts = self.critical_options();
                critical_coupling(model, &opts)?.critical_lambda.ok_or_else(|| {
                    Error::NoInstability(opts.lambda_hi.unwrap_or_else(|| default_lambda_hi(&self.spec)))
                })
            }
        }
    }

    /// `model` at the configured coupling strength.
    pub fn coupled_model(&self, model: &Model) -> Result<Model> {
        match self.coupling {
            Coupling::Absolute(l) => model.with_lambda(l),
            Coupling::RatioSq(r, _) => model.with_lambda(self.reference_lambda_c(model)? * r.sqrt()),
        }
    }

    /// Canonical text of the resolved configuration.
    pub fn resolved_text(&self) -> String {
        toml::to_string(&self.file).expect("config sections serialize")
    }

    /// SHA-256 of [`Self::resolved_text`], lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.resolved_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Write the resolved configuration next to the outputs.
    pub fn write_sidecar(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(
            &path,
            format!("# config hash {}\n{}", self.hash(), self.resolved_text()),
        )?;
        Ok(path)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        msg: e.message().to_string(),
    })?;
    resolve(file, text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line on which `key` is set inside `[section]`, or 0 if it is not present.
fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim();
        } else if current == section && line.split('=').next().map(str::trim) == Some(key) {
            return i + 1;
        }
    }
    0
}

fn resolve(file: ConfigFile, text: &str) -> Result<RunConfig> {
    let bad = |section: &str, key: &str, msg: String| Error::Config {
        line: key_line(text, section, key),
        msg: format!("[{section}] {key}: {msg}"),
    };
    let required = |v: Option<f64>, key: &str| v.ok_or_else(|| bad("cavity", key, "required key is missing".into()));
    let c = &file.cavity;
    let delta0 = required(c.delta0, "delta0")?;
    let kappa = required(c.kappa, "kappa")?;
    let waist_ratio = required(c.waist_ratio, "waist_ratio")?;
    let n_modes = c
        .n_modes
        .ok_or_else(|| bad("cavity", "n_modes", "required key is missing".into()))?;

    let positive = [
        ("cavity", "omega_t", c.omega_t, c.omega_t > 0.0),
        ("cavity", "kappa", kappa, kappa >= 0.0),
        ("cavity", "waist_ratio", waist_ratio, waist_ratio > 0.0),
        ("cavity", "w0_q", c.w0_q, c.w0_q > 0.0),
        ("cavity", "delta0", delta0, true),
        ("drive", "b_m", file.drive.b_m, true),
        ("drive", "epsilon", file.drive.epsilon, true),
        ("medium", "eta_atom", file.medium.eta_atom, file.medium.eta_atom >= 0.0),
        (
            "medium",
            "omega_trap",
            file.medium.omega_trap,
            file.medium.omega_trap >= 0.0,
        ),
        (
            "sweep",
            "crossing_window_kappa",
            file.sweep.crossing_window_kappa,
            file.sweep.crossing_window_kappa > 0.0,
        ),
        ("sweep", "lambda_hi", file.sweep.lambda_hi, file.sweep.lambda_hi >= 0.0),
    ];
    for (section, key, value, ok) in positive {
        if !value.is_finite() || !ok {
            return Err(bad(section, key, format!("invalid value {value}")));
        }
    }
    if n_modes == 0 {
        return Err(bad("cavity", "n_modes", "must be at least 1".into()));
    }
    if file.medium.n_atom_modes == 0 {
        return Err(bad("medium", "n_atom_modes", "must be at least 1".into()));
    }
    if n_modes > file.drive.alpha_max as usize + 1 {
        return Err(bad(
            "cavity",
            "n_modes",
            format!("needs alpha_max >= n_modes - 1, alpha_max is {}", file.drive.alpha_max),
        ));
    }
    if file.sweep.scan_points == 0 {
        return Err(bad("sweep", "scan_points", "must be at least 1".into()));
    }
    for (key, min, max) in [
        ("omega", file.sweep.omega_min, file.sweep.omega_max),
        (
            "lambda_ratio_sq",
            file.sweep.lambda_ratio_sq_min,
            file.sweep.lambda_ratio_sq_max,
        ),
        ("b_m", file.sweep.b_m_min, file.sweep.b_m_max),
        ("epsilon", file.sweep.epsilon_min, file.sweep.epsilon_max),
    ] {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(bad(
                "sweep",
                &format!("{key}_max"),
                format!("range [{min}, {max}] is empty or not finite"),
            ));
        }
    }
    if file.sweep.lambda_ratio_sq_min < 0.0 {
        return Err(bad("sweep", "lambda_ratio_sq_min", "must be non-negative".into()));
    }

    let coupling = match (file.coupling.lambda, file.coupling.lambda_ratio_sq) {
        (Some(_), Some(_)) => {
            return Err(bad(
                "coupling",
                "lambda_ratio_sq",
                "give either lambda or lambda_ratio_sq, not both".into(),
            ))
        }
        (Some(l), None) if l.is_finite() && l >= 0.0 => Coupling::Absolute(l),
        (Some(l), None) => return Err(bad("coupling", "lambda", format!("invalid value {l}"))),
        (None, Some(r)) if r.is_finite() && r >= 0.0 => Coupling::RatioSq(r, file.coupling.lambda_c_reference),
        (None, Some(r)) => return Err(bad("coupling", "lambda_ratio_sq", format!("invalid value {r}"))),
        (None, None) => Coupling::Absolute(0.0),
    };

    let drive = DriveSpec {
        b_m: file.drive.b_m,
        epsilon: file.drive.epsilon,
        alpha_max: file.drive.alpha_max,
        renormalize: file.drive.renormalize,
    };
    drive.validate().map_err(|e| bad("drive", "b_m", e.to_string()))?;
    let geom = TrapGeometry::new(waist_ratio, c.w0_q, n_modes, file.medium.n_atom_modes)
        .map_err(|e| bad("cavity", "n_modes", e.to_string()))?;
    let spec = SystemSpec {
        drive,
        geom,
        delta0,
        omega_t: c.omega_t,
        kappa,
        lambda: if let Coupling::Absolute(l) = coupling { l } else { 0.0 },
        eta_atom: file.medium.eta_atom,
        omega_trap: file.medium.omega_trap,
    };
    spec.validate().map_err(|e| Error::Config {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(RunConfig { file, spec, coupling })
}
