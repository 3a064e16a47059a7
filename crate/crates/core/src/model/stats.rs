use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::ModelError;

/// Pearson correlation. A zero-variance axis gives 0.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    weighted_pearson(x, y, None)
}

/// Pearson correlation with optional nonnegative per-point weights.
pub fn weighted_pearson(x: &[f64], y: &[f64], w: Option<&[f64]>) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson on unequal lengths");
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let total: f64 = (0..x.len()).map(weight).sum();
    if x.len() < 2 || total <= 0.0 {
        return 0.0;
    }
    let mx = (0..x.len()).map(|i| weight(i) * x[i]).sum::<f64>() / total;
    let my = (0..y.len()).map(|i| weight(i) * y[i]).sum::<f64>() / total;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += weight(i) * dx * dy;
        sxx += weight(i) * dx * dx;
        syy += weight(i) * dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Mann-Kendall trend test in series order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KendallTrend {
    pub s: i64,
    pub tau: f64,
    pub z: f64,
    /// Two-sided, normal approximation with tie correction.
    pub p_value: f64,
}

impl KendallTrend {
    pub fn increasing(&self, alpha: f64) -> bool {
        self.s > 0 && self.p_value < alpha
    }
}

pub fn kendall(series: &[f64]) -> KendallTrend {
    let n = series.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += match series[j].partial_cmp(&series[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if var <= 0.0 || s == 0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else {
        (s as f64 + 1.0) / var.sqrt()
    };
    let pairs = nf * (nf - 1.0) / 2.0;
    let std_normal = Normal::standard();
    KendallTrend {
        s,
        tau: if pairs > 0.0 { s as f64 / pairs } else { 0.0 },
        z,
        p_value: 2.0 * (1.0 - std_normal.cdf(z.abs())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub critical: f64,
    pub accept: bool,
    pub bins: usize,
}

/// Accept/reject for a given statistic: accept iff below the upper-`alpha`
/// critical value of chi-square with `dof` degrees of freedom.
pub fn chi_square_decision(statistic: f64, dof: u64, alpha: f64) -> Result<ChiSquareResult, ModelError> {
    if dof == 0 {
        return Err(ModelError::InsufficientData("chi-square needs at least one degree of freedom".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ModelError::InvalidParameter(format!("alpha {alpha}")));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| ModelError::InvalidParameter(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - alpha);
    Ok(ChiSquareResult { statistic, dof, critical, accept: statistic < critical, bins: dof as usize + 3 })
}

/// Goodness of fit against the normal with the sample mean and standard
/// deviation. Bins are equiprobable under that normal, so each expects
/// `N / bins`; the bin count drops until every bin expects at least 5.
/// `dof = bins - 3`.
pub fn chi_square_normality(samples: &[f64], bins: usize, alpha: f64) -> Result<ChiSquareResult, ModelError> {
    let n = samples.len();
    let k = bins.min(n / 5);
    if k < 4 {
        return Err(ModelError::InsufficientData(format!("{n} samples allow {k} bins; need 4")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if !(var > 0.0 && var.is_finite()) {
        return Err(ModelError::InsufficientData("samples have zero variance".into()));
    }
    let normal = Normal::new(mean, var.sqrt()).map_err(|e| ModelError::InvalidParameter(e.to_string()))?;
    let edges: Vec<f64> = (1..k).map(|i| normal.inverse_cdf(i as f64 / k as f64)).collect();
    let mut observed = vec![0u64; k];
    for x in samples {
        observed[edges.partition_point(|e| e <= x)] += 1;
    }
    let expected = n as f64 / k as f64;
    let statistic = observed.iter().map(|o| (*o as f64 - expected).powi(2) / expected).sum();
    let mut r = chi_square_decision(statistic, (k - 3) as u64, alpha)?;
    r.bins = k;
    Ok(r)
}

/// `(macro - micro) / macro`.
pub fn relative_difference(macro_time: f64, micro_time: f64) -> Result<f64, ModelError> {
    if macro_time == 0.0 {
        return Err(ModelError::UndefinedRatio("macro time is zero".into()));
    }
    Ok((macro_time - micro_time) / macro_time)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_edges() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]) - 0.9933992677987828).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), 0.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_monotone() {
        let up: Vec<f64> = (0..20).map(f64::from).collect();
        let k = kendall(&up);
        assert_eq!(k.s, 190);
        assert_eq!(k.tau, 1.0);
        assert!(k.increasing(0.05));
        let flat = kendall(&[3.0; 10]);
        assert_eq!((flat.s, flat.z, flat.p_value), (0, 0.0, 1.0));
    }

    #[test]
    fn chi_square_critical_value() {
        let r = chi_square_decision(20.25, 17, 0.05).unwrap();
        assert!((r.critical - 27.5871).abs() < 1e-3);
        assert!(r.accept);
        assert!(!chi_square_decision(30.0, 17, 0.05).unwrap().accept);
        assert!(chi_square_decision(1.0, 0, 0.05).is_err());
    }

    #[test]
    fn chi_square_bin_merging() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = chi_square_normality(&xs, 20, 0.05).unwrap();
        assert_eq!(r.bins, 6);
        assert_eq!(r.dof, 3);
        assert!(chi_square_normality(&xs[..15], 10, 0.05).is_err());
    }

    #[test]
    fn relative_difference_values() {
        assert_eq!(relative_difference(100.0, 100.0).unwrap(), 0.0);
        assert!((relative_difference(100.0, 90.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(relative_difference(0.0, 1.0).is_err());
    }
}
