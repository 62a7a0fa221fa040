//! Spectral maps over frequency and one sweep parameter.

use num_complex::Complex64;
use rayon::prelude::*;

use super::Model;
use crate::analysis::{critical_coupling, CriticalOptions};
use crate::error::Result;
use crate::medium::SystemSpec;

/// Rows with a pole above this imaginary part are flagged unstable.
const UNSTABLE_IM: f64 = 1e-10;

/// Second grid axis.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxis {
    /// `(Lambda / Lambda_c)^2` at fixed drive.
    LambdaRatioSq { values: Vec<f64>, lambda_c: f64 },
    /// Modulation depth with `Lambda^2 = ratio_sq * Lambda_c(B_m)^2`; the
    /// threshold is re-solved at every point.
    ModulationDepth {
        values: Vec<f64>,
        ratio_sq: f64,
        critical: CriticalOptions,
    },
    /// Modulation frequency offset at the template's coupling.
    Epsilon { values: Vec<f64> },
}

impl GridAxis {
    pub fn name(&self) -> &'static str {
        match self {
            GridAxis::LambdaRatioSq { .. } => "lambda_ratio_sq",
            GridAxis::ModulationDepth { .. } => "b_m",
            GridAxis::Epsilon { .. } => "epsilon",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            GridAxis::LambdaRatioSq { values, .. }
            | GridAxis::ModulationDepth { values, .. }
            | GridAxis::Epsilon { values } => values,
        }
    }

    fn point(&self, template: &SystemSpec, x: f64) -> Result<SystemSpec> {
        let mut s = template.clone();
        match self {
            GridAxis::LambdaRatioSq { lambda_c, .. } => s.lambda = lambda_c * x.max(0.0).sqrt(),
            GridAxis::ModulationDepth { ratio_sq, critical, .. } => {
                s.drive.b_m = x;
                let report = critical_coupling(&Model::new(s.clone())?, critical)?;
                let lc = report.critical_lambda.unwrap_or(f64::NAN);
                s.lambda = lc * ratio_sq.sqrt();
            }
            GridAxis::Epsilon { .. } => s.drive.epsilon = x,
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFailure {
    pub axis_index: usize,
    /// `None` when the whole row failed.
    pub omega_index: Option<usize>,
    pub message: String,
}

/// `A_{ij}(omega)` sampled on an `axis x omega` grid, row-major by axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub omegas: Vec<f64>,
    pub axis_name: &'static str,
    pub axis_values: Vec<f64>,
    pub entry: (usize, usize),
    /// `values[a * omegas.len() + w]`; NaN where evaluation failed.
    pub values: Vec<Complex64>,
    /// Bare coupling used on each row.
    pub lambdas: Vec<f64>,
    /// Rows whose parameters put a pole in the upper half-plane.
    pub unstable: Vec<bool>,
    pub failures: Vec<GridFailure>,
}

impl SpectralGrid {
    pub fn get(&self, axis_index: usize, omega_index: usize) -> Complex64 {
        self.values[axis_index * self.omegas.len() + omega_index]
    }

    /// One row as real values (the real part, which is the whole value on the diagonal).
    pub fn row(&self, axis_index: usize) -> Vec<f64> {
        let n = self.omegas.len();
        self.values[axis_index * n..(axis_index + 1) * n]
            .iter()
            .map(|z| z.re)
            .collect()
    }
}

struct Row {
    values: Vec<Complex64>,
    lambda: f64,
    unstable: bool,
    failures: Vec<GridFailure>,
}

fn evaluate_row(template: &SystemSpec, axis: &GridAxis, omegas: &[f64], entry: (usize, usize), a: usize) -> Row {
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let failed_row = |message: String, lambda: f64| Row {
        values: vec![nan; omegas.len()],
        lambda,
        unstable: false,
        failures: vec![GridFailure {
            axis_index: a,
            omega_index: None,
            message,
        }],
    };
    let x = axis.values()[a];
    let model = match axis.point(template, x).and_then(Model::new) {
        Ok(m) => m,
        Err(e) => return failed_row(e.to_string(), f64::NAN),
    };
    let lambda = model.spec().lambda;
    let unstable = match model.find_poles() {
        Ok(p) => p.max_imag() > UNSTABLE_IM,
        Err(e) => return failed_row(e.to_string(), lambda),
    };
    let mut values = Vec::with_capacity(omegas.len());
    let mut failures = Vec::new();
    for (w, &omega) in omegas.iter().enumerate() {
        match model.spectral_entry(omega, entry) {
            Ok(v) => values.push(v),
            Err(e) => {
                values.push(nan);
                failures.push(GridFailure {
                    axis_index: a,
                    omega_index: Some(w),
                    message: e.to_string(),
                });
            }
        }
    }
    Row {
        values,
        lambda,
        unstable,
        failures,
    }
}

/// Evaluate a spectral map. Rows run in parallel; results keep axis order.
///
/// Failures are recorded per point rather than aborting the grid.
pub fn spectral_grid(template: &SystemSpec, axis: &GridAxis, omegas: &[f64], entry: (usize, usize)) -> SpectralGrid {
    let rows: Vec<Row> = (0..axis.values().len())
        .into_par_iter()
        .map(|a| evaluate_row(template, axis, omegas, entry, a))
        .collect();
    let mut grid = SpectralGrid {
        omegas: omegas.to_vec(),
        axis_name: axis.name(),
        axis_values: axis.values().to_vec(),
        entry,
        values: Vec::with_capacity(rows.len() * omegas.len()),
        lambdas: Vec::with_capacity(rows.len()),
        unstable: Vec::with_capacity(rows.len()),
        failures: Vec::new(),
    };
    for row in rows {
        grid.values.extend(row.values);
        grid.lambdas.push(row.lambda);
        grid.unstable.push(row.unstable);
        grid.failures.extend(row.failures);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::tests::fig2;

    #[test]
    fn single_cell_matches_spectral_function() {
        let s = fig2(0.0);
        let axis = GridAxis::LambdaRatioSq {
            values: vec![0.3],
            lambda_c: 0.45,
        };
        let g = spectral_grid(&s, &axis, &[0.55], (0, 0));
        let m = Model::new(s.with_lambda(0.45 * 0.3f64.sqrt())).unwrap();
        assert_eq!(g.get(0, 0), m.spectral_function(0.55).unwrap()[(0, 0)]);
        assert!(g.failures.is_empty());
        assert_eq!(g.unstable, vec![false]);
    }

    #[test]
    fn rows_keep_axis_order() {
        let s = fig2(0.0);
        let values: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let axis = GridAxis::LambdaRatioSq {
            values: values.clone(),
            lambda_c: 0.45,
        };
        let omegas: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let g = spectral_grid(&s, &axis, &omegas, (0, 0));
        for (a, &r) in values.iter().enumerate() {
            let m = Model::new(s.with_lambda(0.45 * r.sqrt())).unwrap();
            assert_eq!(g.get(a, 7), m.spectral_function(omegas[7]).unwrap()[(0, 0)]);
        }
    }

    #[test]
    fn bad_entry_is_recorded() {
        let s = fig2(0.1);
        let axis = GridAxis::Epsilon { values: vec![0.1, 0.2] };
        let g = spectral_grid(&s, &axis, &[0.1, 0.2, 0.3], (9, 9));
        assert_eq!(g.failures.len(), 6);
        assert!(g.values.iter().all(|v| v.re.is_nan()));
    }

    #[test]
    fn unstable_rows_are_flagged() {
        let s = fig2(0.0);
        let axis = GridAxis::LambdaRatioSq {
            values: vec![0.5, 2.0],
            lambda_c: 0.45,
        };
        let g = spectral_grid(&s, &axis, &[0.3], (0, 0));
        assert_eq!(g.unstable, vec![false, true]);
    }
}
