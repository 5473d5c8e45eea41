//! Log-log rate fitting.

use crate::error::{Error, Result};

/// Minimum number of (T, metric) points accepted by [`fit_rate`].
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares slope of log(metric) against log(T).
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    for &(t, v) in points {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveMetric { t, value: v });
        }
        if !(t > 0.0) {
            return Err(Error::param("T", format!("must be positive, got {t}")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::param("T", "needs at least two distinct values"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: [f64; 4] = [1e2, 1e3, 1e4, 1e5];

    #[test]
    fn inverse_sqrt() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 1.0 / t.sqrt())).collect();
        assert!((fit_rate(&pts).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn cube_root_with_scale() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 7.5 * t.powf(-1.0 / 3.0))).collect();
        assert!((fit_rate(&pts).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_metric() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 3.0)).collect();
        assert_eq!(fit_rate(&pts).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_rate(&[(1.0, 1.0)]),
            Err(Error::TooFewPoints { .. })
        ));
        let pts: Vec<_> = TS
            .iter()
            .map(|&t| (t, if t == 1e3 { 0.0 } else { 1.0 }))
            .collect();
        assert!(matches!(
            fit_rate(&pts),
            Err(Error::NonPositiveMetric { .. })
        ));
    }
}
