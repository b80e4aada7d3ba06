//! Correlation, single-predictor regression and histogram utilities.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Population (divide-by-count) variance, computed in two passes.
///
/// Returns 0 for an empty slice.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.iter().all(|v| *v == values[0]) {
        // also covers the empty slice; avoids rounding noise from the mean
        return 0.0;
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean, using the unbiased sample variance.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Two equal-length series of finite reals with optional labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    x: Vec<f64>,
    y: Vec<f64>,
    pub x_label: String,
    pub y_label: String,
}

impl PairedSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::labelled(x, y, "x", "y")
    }

    pub fn labelled(
        x: Vec<f64>,
        y: Vec<f64>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "paired series lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("paired series is empty"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("paired series contains a non-finite value"));
        }
        Ok(Self {
            x,
            y,
            x_label: x_label.into(),
            y_label: y_label.into(),
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value from the t-transform with `len - 2` degrees of freedom.
    pub p: f64,
}

/// Pearson product-moment correlation.
pub fn pearson(series: &PairedSeries) -> Result<Correlation> {
    let n = series.len();
    if n < 3 {
        return Err(Error::invalid(format!("correlation needs at least 3 points, got {n}")));
    }
    let mx = mean(&series.x);
    let my = mean(&series.y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in series.x.iter().zip(&series.y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(format!(
            "zero variance in {}",
            if sxx == 0.0 { &series.x_label } else { &series.y_label }
        )));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        two_sided_t_p(t, df)
    };
    Ok(Correlation { r, p })
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(series: &PairedSeries) -> Result<Correlation> {
    let ranked = PairedSeries::labelled(
        average_ranks(&series.x),
        average_ranks(&series.y),
        series.x_label.clone(),
        series.y_label.clone(),
    )?;
    pearson(&ranked)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_p: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols_one_predictor(series: &PairedSeries) -> Result<LinearFit> {
    let n = series.len();
    if n < 3 {
        return Err(Error::invalid(format!("regression needs at least 3 points, got {n}")));
    }
    let mx = mean(&series.x);
    let my = mean(&series.y);
    let sxx: f64 = series.x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate(format!("zero variance in {}", series.x_label)));
    }
    let sxy: f64 = series
        .x
        .iter()
        .zip(&series.y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = series
        .x
        .iter()
        .zip(&series.y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let df = (n - 2) as f64;
    let se = (rss / df / sxx).sqrt();
    let slope_p = if se == 0.0 {
        if slope == 0.0 { 1.0 } else { 0.0 }
    } else {
        two_sided_t_p(slope / se, df)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_p,
    })
}

fn two_sided_t_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.25;

/// Unsmoothed histogram with left-closed bins `[k*w, (k+1)*w)` anchored at 0.
///
/// Rows run contiguously from the lowest to the highest occupied bin.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("histogram input contains a non-finite value"));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let index = |v: f64| (v / bin_width).floor() as i64;
    let lo = values.iter().map(|&v| index(v)).min().unwrap();
    let hi = values.iter().map(|&v| index(v)).max().unwrap();
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &v in values {
        counts[(index(v) - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let k = lo + k as i64;
            HistogramBin {
                bin_left: k as f64 * bin_width,
                bin_right: (k + 1) as f64 * bin_width,
                count,
            }
        })
        .collect())
}

/// Renders histogram rows as CSV with a `bin_left,bin_right,count` header.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for bin in bins {
        out.push_str(&format!("{},{},{}\n", bin.bin_left, bin.bin_right, bin.count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(x: &[f64], y: &[f64]) -> PairedSeries {
        PairedSeries::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = pearson(&series(&x, &x)).unwrap();
        assert!((up.r - 1.0).abs() < 1e-12);
        assert!(up.p < 1e-12);
        let down: Vec<f64> = x.iter().map(|v| -2.0 * v + 3.0).collect();
        assert!((pearson(&series(&x, &down)).unwrap().r + 1.0).abs() < 1e-12);
    }

    // Reference values computed with mpmath at 50 digits:
    //   r = sxy / sqrt(sxx * syy), t = r sqrt(8 / (1 - r^2)),
    //   p = 2 * (1 - StudentT(8).cdf(|t|)).
    const X10: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    const Y10: [f64; 10] = [2.3, 1.9, 3.8, 4.1, 3.2, 6.5, 5.9, 8.8, 7.4, 9.9];
    const R10: f64 = 0.937_098_463_418_510_6;
    const P10: f64 = 6.345_392_724_710_106e-5;

    #[test]
    fn pearson_matches_high_precision_reference() {
        let c = pearson(&series(&X10, &Y10)).unwrap();
        assert!((c.r - R10).abs() < 1e-12, "r = {}", c.r);
        assert!((c.p - P10).abs() / P10 < 1e-6, "p = {}", c.p);
    }

    #[test]
    fn degenerate_variance_is_an_error() {
        let err = pearson(&series(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(ols_one_predictor(&series(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0])).is_err());
    }

    #[test]
    fn spearman_monotone_and_ties() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3)).collect();
        assert!((spearman(&series(&x, &y)).unwrap().r - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = x.iter().map(|v| -v.exp()).collect();
        assert!((spearman(&series(&x, &rev)).unwrap().r + 1.0).abs() < 1e-12);

        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        // ranks x = (1,2,3,4,5), y = (1.5,1.5,3,4.5,4.5): rho = 0.9486832980505138 (mpmath)
        let tied = spearman(&series(&x, &[1.0, 1.0, 2.0, 3.0, 3.0])).unwrap();
        assert!((tied.r - 0.948_683_298_050_513_8).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let fit = ols_one_predictor(&series(&x, &y)).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert_eq!(fit.slope_p, 0.0);
    }

    #[test]
    fn ols_noisy_fixture() {
        // slope = sxy/sxx, intercept = my - slope mx, slope p equals the
        // correlation p for one predictor (mpmath).
        let fit = ols_one_predictor(&series(&X10, &Y10)).unwrap();
        assert!((fit.slope - 0.852_121_212_121_212_1).abs() < 1e-12);
        assert!((fit.intercept - 0.693_333_333_333_333_3).abs() < 1e-12);
        assert!((fit.slope_p - P10).abs() / P10 < 1e-6);
    }

    #[test]
    fn histogram_edges_and_mass() {
        assert!(histogram(&[], 0.25).unwrap().is_empty());
        let one = histogram(&[1.1], 0.25).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].bin_left, one[0].bin_right, one[0].count), (1.0, 1.25, 1));
        let edge = histogram(&[0.0, 0.25, 0.2499], 0.25).unwrap();
        assert_eq!(edge[0].count, 2);
        assert_eq!(edge[1].bin_left, 0.25);
        assert_eq!(edge[1].count, 1);
        let csv = histogram_csv(&edge);
        assert!(csv.starts_with("bin_left,bin_right,count\n0,0.25,2\n"));
    }

    #[test]
    fn population_variance_divides_by_count() {
        assert_eq!(population_variance(&[1.0, 1.0, 1.0, -1.0]), 0.75);
        assert_eq!(population_variance(&[]), 0.0);
    }
}
