//! Statistical toolkit: descriptives, Wilson intervals, chi-square on 2x2
//! tables, t-tests, variance tests, correlation, and a two-predictor OLS.
//! Every p-value comes from the crate's own special-function kernels.

mod shapiro;
pub mod special;

pub use shapiro::shapiro_wilk;
pub use special::{chi2_sf, f_cdf, normal_cdf, normal_ppf, normal_sf, t_cdf, t_sf_two_tailed};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("not enough data: need at least {0} values")]
    InsufficientData(usize),
    #[error("sample size {0} outside supported range")]
    OutOfRangeN(usize),
    #[error("invalid counts: require 0 <= k <= n, n >= 1")]
    InvalidCounts,
    #[error("table has a zero margin")]
    DegenerateMargins,
    #[error("zero variance")]
    ZeroVariance,
    #[error("reference group rate is zero")]
    ZeroReferenceRate,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error(transparent)]
    Special(#[from] special::SpecialError),
}

/// An ordered sample of real measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: String,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::InsufficientData(1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::InsufficientData(1));
        }
        Ok(Self { values, label: label.into() })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// Sample variance, n-1 denominator.
    pub fn variance(&self) -> Result<f64, StatsError> {
        if self.n() < 2 {
            return Err(StatsError::InsufficientData(2));
        }
        let m = self.mean();
        Ok(self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (self.n() - 1) as f64)
    }

    pub fn sd(&self) -> Result<f64, StatsError> {
        Ok(self.variance()?.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn describe(sample: &Sample) -> Descriptives {
    let mut sorted = sample.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Descriptives {
        n,
        mean: sample.mean(),
        median,
        sd: sample.sd().ok(),
        min: sorted[0],
        max: sorted[n - 1],
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::InvalidCounts);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // the bound at an observed extreme is exactly the extreme; avoid fp slop
    let lower = if k == 0 { 0.0 } else { ((center - half) / denom).clamp(0.0, 1.0) };
    let upper = if k == n { 1.0 } else { ((center + half) / denom).clamp(0.0, 1.0) };
    Ok((lower, upper))
}

/// 2x2 contingency table; rows are groups (models), columns outcome vs not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub chi2: f64,
    pub df: u64,
    pub p: f64,
    pub cramers_v: f64,
}

/// Pearson chi-square on a 2x2 table. No continuity correction by default:
/// the uncorrected statistic is the reported convention here; pass
/// `yates = true` for the corrected variant.
pub fn chi2_2x2(t: &Table2x2, yates: bool) -> Result<Chi2Result, StatsError> {
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let n = a + b + c + d;
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let c2 = b + d;
    if r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return Err(StatsError::DegenerateMargins);
    }
    let det = a * d - b * c;
    let num = if yates {
        let adj = (det.abs() - n / 2.0).max(0.0);
        adj * adj
    } else {
        det * det
    };
    let chi2 = n * num / (r1 * r2 * c1 * c2);
    let p = chi2_sf(chi2, 1.0)?;
    Ok(Chi2Result { chi2, df: 1, p, cramers_v: (chi2 / n).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskResult {
    /// rate(row 2) / rate(row 1)
    pub rr: f64,
    /// rate(row 1) - rate(row 2), in percentage points
    pub arr_pp: f64,
}

/// Risk ratio and absolute risk reduction on a 2x2 table whose first column
/// is the event of interest. Row 1 is the reference group.
pub fn risk_ratio_arr(t: &Table2x2) -> Result<RiskResult, StatsError> {
    let n1 = t.a + t.b;
    let n2 = t.c + t.d;
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::DegenerateMargins);
    }
    let rate1 = t.a as f64 / n1 as f64;
    let rate2 = t.c as f64 / n2 as f64;
    if rate1 == 0.0 {
        return Err(StatsError::ZeroReferenceRate);
    }
    Ok(RiskResult { rr: rate2 / rate1, arr_pp: (rate1 - rate2) * 100.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Independent two-sample t-test with pooled variance.
pub fn t_test_pooled(a: &Sample, b: &Sample) -> Result<TTestResult, StatsError> {
    pooled_from_summary(a.mean(), a.variance()?, a.n(), b.mean(), b.variance()?, b.n())
}

/// Pooled t-test from summary statistics.
pub fn pooled_from_summary(
    m1: f64,
    var1: f64,
    n1: usize,
    m2: f64,
    var2: f64,
    n2: usize,
) -> Result<TTestResult, StatsError> {
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::InsufficientData(2));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let df = n1f + n2f - 2.0;
    let sp2 = ((n1f - 1.0) * var1 + (n2f - 1.0) * var2) / df;
    if sp2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (m1 - m2) / (sp2 * (1.0 / n1f + 1.0 / n2f)).sqrt();
    Ok(TTestResult { t, df, p: t_sf_two_tailed(t, df)? })
}

/// Welch's t-test with Welch–Satterthwaite degrees of freedom.
pub fn t_test_welch(a: &Sample, b: &Sample) -> Result<TTestResult, StatsError> {
    welch_from_summary(a.mean(), a.variance()?, a.n(), b.mean(), b.variance()?, b.n())
}

/// Welch's t-test from summary statistics.
pub fn welch_from_summary(
    m1: f64,
    var1: f64,
    n1: usize,
    m2: f64,
    var2: f64,
    n2: usize,
) -> Result<TTestResult, StatsError> {
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::InsufficientData(2));
    }
    let v1 = var1 / n1 as f64;
    let v2 = var2 / n2 as f64;
    if v1 + v2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (m1 - m2) / (v1 + v2).sqrt();
    let df = (v1 + v2).powi(2)
        / (v1 * v1 / (n1 as f64 - 1.0) + v2 * v2 / (n2 as f64 - 1.0));
    Ok(TTestResult { t, df, p: t_sf_two_tailed(t, df)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
}

/// Variance-ratio F test; F = var(a) / var(b), two-tailed p.
pub fn f_variance_ratio(a: &Sample, b: &Sample) -> Result<FTestResult, StatsError> {
    f_ratio_from_summary(a.variance()?, a.n(), b.variance()?, b.n())
}

pub fn f_ratio_from_summary(
    var1: f64,
    n1: usize,
    var2: f64,
    n2: usize,
) -> Result<FTestResult, StatsError> {
    if var1 <= 0.0 || var2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let f = var1 / var2;
    let df1 = n1 as f64 - 1.0;
    let df2 = n2 as f64 - 1.0;
    let cdf = f_cdf(f, df1, df2)?;
    let p = (2.0 * cdf.min(1.0 - cdf)).clamp(0.0, 1.0);
    Ok(FTestResult { f, df1, df2, p })
}

/// Levene's test (mean-centered) for variance homogeneity of two samples:
/// one-way ANOVA on the absolute deviations from each group mean.
pub fn levene(a: &Sample, b: &Sample) -> Result<FTestResult, StatsError> {
    if a.n() < 2 || b.n() < 2 {
        return Err(StatsError::InsufficientData(2));
    }
    let za: Vec<f64> = a.values.iter().map(|v| (v - a.mean()).abs()).collect();
    let zb: Vec<f64> = b.values.iter().map(|v| (v - b.mean()).abs()).collect();
    let (na, nb) = (za.len() as f64, zb.len() as f64);
    let ma = za.iter().sum::<f64>() / na;
    let mb = zb.iter().sum::<f64>() / nb;
    let grand = (za.iter().sum::<f64>() + zb.iter().sum::<f64>()) / (na + nb);
    let ssb = na * (ma - grand).powi(2) + nb * (mb - grand).powi(2);
    let ssw: f64 = za.iter().map(|z| (z - ma).powi(2)).sum::<f64>()
        + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    if ssw <= 0.0 {
        if ssb <= 0.0 {
            // all centered deviations identical; no dispersion difference
            return Ok(FTestResult { f: 0.0, df1: 1.0, df2: na + nb - 2.0, p: 1.0 });
        }
        return Err(StatsError::ZeroVariance);
    }
    let df1 = 1.0;
    let df2 = na + nb - 2.0;
    let f = (ssb / df1) / (ssw / df2);
    let p = 1.0 - f_cdf(f, df1, df2)?;
    Ok(FTestResult { f, df1, df2, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Pearson product-moment correlation with a t-approximation p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrResult, StatsError> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(StatsError::InsufficientData(3));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * ((nf - 2.0) / (1.0 - r * r)).sqrt();
        t_sf_two_tailed(t, nf - 2.0)?
    };
    Ok(CorrResult { r, p, n })
}

/// Average ranks with ties shared.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrResult, StatsError> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ols2Result {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub residual_variance: f64,
    pub vif1: f64,
    pub vif2: f64,
}

/// Least squares for y = g0 + g1 x1 + g2 x2, solved on centered data.
/// Residual variance uses the n - 3 denominator; VIFs come from the
/// predictor-vs-predictor correlation.
pub fn ols2(y: &[f64], x1: &[f64], x2: &[f64]) -> Result<Ols2Result, StatsError> {
    let n = y.len();
    if n < 4 || x1.len() != n || x2.len() != n {
        return Err(StatsError::InsufficientData(4));
    }
    let nf = n as f64;
    let my = y.iter().sum::<f64>() / nf;
    let m1 = x1.iter().sum::<f64>() / nf;
    let m2 = x2.iter().sum::<f64>() / nf;
    let mut s11 = 0.0;
    let mut s22 = 0.0;
    let mut s12 = 0.0;
    let mut s1y = 0.0;
    let mut s2y = 0.0;
    for i in 0..n {
        let d1 = x1[i] - m1;
        let d2 = x2[i] - m2;
        let dy = y[i] - my;
        s11 += d1 * d1;
        s22 += d2 * d2;
        s12 += d1 * d2;
        s1y += d1 * dy;
        s2y += d2 * dy;
    }
    let det = s11 * s22 - s12 * s12;
    if s11 <= 0.0 || s22 <= 0.0 || det.abs() <= 1e-12 * s11 * s22 {
        return Err(StatsError::RankDeficient);
    }
    let gamma1 = (s22 * s1y - s12 * s2y) / det;
    let gamma2 = (s11 * s2y - s12 * s1y) / det;
    let gamma0 = my - gamma1 * m1 - gamma2 * m2;
    let mut rss = 0.0;
    for i in 0..n {
        let e = y[i] - gamma0 - gamma1 * x1[i] - gamma2 * x2[i];
        rss += e * e;
    }
    let r12_sq = s12 * s12 / (s11 * s22);
    let vif = 1.0 / (1.0 - r12_sq);
    Ok(Ols2Result {
        gamma0,
        gamma1,
        gamma2,
        residual_variance: rss / (nf - 3.0),
        vif1: vif,
        vif2: vif,
    })
}
