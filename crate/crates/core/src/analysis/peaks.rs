//! Peak detection on uniformly sampled spectra.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Position after quadratic refinement.
    pub omega: f64,
    /// Height of the refined parabola's vertex.
    pub height: f64,
    /// Full width at half maximum, if both half-height crossings are in range.
    pub width: Option<f64>,
}

/// Default prominence: peaks must exceed this multiple of the median sample.
pub const DEFAULT_PROMINENCE: f64 = 3.0;

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Interior local maxima above `prominence * median(values)`.
///
/// `omegas` must be uniformly spaced and the same length as `values`.
pub fn detect_peaks(omegas: &[f64], values: &[f64], prominence: f64) -> Vec<Peak> {
    assert_eq!(omegas.len(), values.len(), "detect_peaks: length mismatch");
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let threshold = prominence * median(values);
    let step = omegas[1] - omegas[0];
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
        if !(y1 > y0 && y1 >= y2 && y1 > threshold) {
            continue;
        }
        let curvature = y0 - 2.0 * y1 + y2;
        let (shift, height) = if curvature < 0.0 {
            let p = 0.5 * (y0 - y2) / curvature;
            (p, y1 - 0.25 * (y0 - y2) * p)
        } else {
            (0.0, y1)
        };
        let omega = omegas[i] + shift * step;
        peaks.push(Peak {
            omega,
            height,
            width: half_width(omegas, values, i, height),
        });
    }
    peaks
}

fn half_width(omegas: &[f64], values: &[f64], i: usize, height: f64) -> Option<f64> {
    let half = 0.5 * height;
    let cross = |a: usize, b: usize| {
        let t = (values[a] - half) / (values[a] - values[b]);
        omegas[a] + t * (omegas[b] - omegas[a])
    };
    let left = (1..=i).rev().find(|&k| values[k - 1] < half).map(|k| cross(k, k - 1))?;
    let right = (i..values.len() - 1)
        .find(|&k| values[k + 1] < half)
        .map(|k| cross(k, k + 1))?;
    Some(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn single_lorentzian() {
        let w = grid(0.0, 1.6, 801);
        let step = w[1] - w[0];
        let (d, k) = (0.8123, 0.02);
        let a: Vec<f64> = w.iter().map(|x| 2.0 * k / ((x - d) * (x - d) + k * k)).collect();
        let p = detect_peaks(&w, &a, DEFAULT_PROMINENCE);
        assert_eq!(p.len(), 1);
        assert!((p[0].omega - d).abs() < step / 10.0);
        assert!((p[0].width.unwrap() - 2.0 * k).abs() < step);
    }

    #[test]
    fn flat_input_has_no_peaks() {
        let w = grid(0.0, 1.0, 50);
        assert!(detect_peaks(&w, &vec![0.7; 50], DEFAULT_PROMINENCE).is_empty());
        assert!(detect_peaks(&w, &vec![0.0; 50], DEFAULT_PROMINENCE).is_empty());
    }

    #[test]
    fn small_bumps_are_ignored() {
        let w = grid(0.0, 1.0, 201);
        let a: Vec<f64> = w.iter().map(|x| 1.0 + 0.1 * (40.0 * x).sin()).collect();
        assert!(detect_peaks(&w, &a, DEFAULT_PROMINENCE).is_empty());
    }

    #[test]
    fn edge_maximum_is_not_a_peak() {
        let w = grid(0.0, 1.0, 101);
        let a: Vec<f64> = w.iter().map(|x| 1.0 / (x * x + 1e-3)).collect();
        assert!(detect_peaks(&w, &a, DEFAULT_PROMINENCE).is_empty());
    }
}
