//! Small statistical helpers.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        var,
        stderr: (var / n.max(1) as f64).sqrt(),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::DegenerateFit("need at least two paired observations".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let (slope_stderr, intercept_stderr, half) = if n > 2 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - 2) as f64;
        let se = (s2 / sxx).sqrt();
        let ise = (s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
            .map_err(|e| Error::Numeric(e.to_string()))?
            .inverse_cdf(0.975);
        (se, ise, t * se)
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        slope_ci: (slope - half, slope + half),
        residuals,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and its asymptotic critical
/// value at level `alpha`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    (d, c * ((n + m) / (n * m)).sqrt())
}

/// Pearson chi-square statistic, degrees of freedom and upper-tail p-value.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> Result<(f64, usize, f64)> {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .filter(|(_, e)| **e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = expected.iter().filter(|e| **e > 0.0).count().saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(e.to_string()))?.cdf(stat);
    Ok((stat, dof, p))
}

/// Normal-approximation upper bound `p̂ + z·sqrt(p̂(1 − p̂)/n)` for a
/// binomial proportion, with `p̂ = hits/n`.
pub fn binomial_upper(hits: u64, n: u64, z: f64) -> f64 {
    let p = hits as f64 / n as f64;
    (p + z * (p * (1.0 - p) / n as f64).sqrt()).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.var - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!((s.min, s.max), (1.0, 4.0));
    }

    #[test]
    fn exact_line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let (d, crit) = ks_two_sample(&a, &a, 0.01);
        assert_eq!(d, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let (d2, _) = ks_two_sample(&a, &b, 0.01);
        assert!((d2 - 0.5).abs() < 0.01 && d2 > crit);
    }

    #[test]
    fn chi_square_p_value() {
        let (stat, dof, p) = chi_square(&[10.0, 10.0], &[10.0, 10.0]).unwrap();
        assert_eq!((stat, dof), (0.0, 1));
        assert!((p - 1.0).abs() < 1e-12);
    }
}
