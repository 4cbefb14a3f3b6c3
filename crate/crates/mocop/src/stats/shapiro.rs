//! Shapiro–Wilk normality test with Royston's coefficient and p-value
//! approximations (valid for 3 <= n <= 5000).

use super::special::{normal_ppf, normal_sf};
use super::StatsError;

fn poly(coefs: &[f64], x: f64) -> f64 {
    // coefs in ascending order
    coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Returns (W, p) for the sample; sorts internally.
pub fn shapiro_wilk(values: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::OutOfRangeN(n));
    }
    let mut x: Vec<f64> = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;

    let mean = x.iter().sum::<f64>() / nf;
    let ssq: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if ssq <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }

    // Blom-type scores m_i, then Royston's corrected coefficients a_i.
    let mut m: Vec<f64> = (1..=n)
        .map(|i| normal_ppf((i as f64 - 0.375) / (nf + 0.25)).expect("interior quantile"))
        .collect();
    let ssq_m: f64 = m.iter().map(|v| v * v).sum();
    let rsn = 1.0 / nf.sqrt();
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -(0.5f64.sqrt());
        a[2] = 0.5f64.sqrt();
    } else {
        let c: Vec<f64> = m.iter().map(|v| v / ssq_m.sqrt()).collect();
        let a_n = poly(&[c[n - 1], 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], rsn);
        a[n - 1] = a_n;
        a[0] = -a_n;
        let (phi, start) = if n > 5 {
            let a_n1 =
                poly(&[c[n - 2], 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], rsn);
            a[n - 2] = a_n1;
            a[1] = -a_n1;
            let phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            (phi, 2)
        } else {
            let phi = (ssq_m - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            (phi, 1)
        };
        for i in start..(n - start) {
            a[i] = m[i] / phi.sqrt();
        }
    }
    m.clear();

    let num: f64 = a.iter().zip(x.iter()).map(|(ai, xi)| ai * xi).sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        let frac = std::f64::consts::FRAC_PI_6.recip(); // 6/pi
        (frac * ((w.sqrt()).asin() - (0.75f64.sqrt()).asin())).clamp(0.0, 1.0)
    } else if n <= 11 {
        let gamma = -2.273 + 0.459 * nf;
        let y = -((gamma - (1.0 - w).ln()).ln());
        let mu = poly(&[0.5440, -0.39978, 0.025054, -0.0006714], nf);
        let sigma = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
        normal_sf((y - mu) / sigma)
    } else {
        let ln_n = nf.ln();
        let y = (1.0 - w).ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let sigma = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        normal_sf((y - mu) / sigma)
    };
    Ok((w, p.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_linear_sample_gives_w_one() {
        let (w, _p) = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((w - 1.0).abs() < 1e-12, "w = {w}");
    }

    #[test]
    fn bimodal_sample_rejected() {
        let mut v = vec![0.0; 50];
        v.extend(vec![1.0; 50]);
        let (w, p) = shapiro_wilk(&v).unwrap();
        assert!(w < 0.8, "w = {w}");
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn gaussian_like_sample_not_rejected() {
        // deterministic near-normal sample via the normal quantile
        let n = 200;
        let v: Vec<f64> = (1..=n)
            .map(|i| normal_ppf(i as f64 / (n as f64 + 1.0)).unwrap())
            .collect();
        let (w, p) = shapiro_wilk(&v).unwrap();
        assert!(w > 0.98, "w = {w}");
        assert!(p > 0.05, "p = {p}");
    }

    #[test]
    fn out_of_range_n() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_sample_is_zero_variance() {
        assert!(matches!(shapiro_wilk(&[2.0; 10]), Err(StatsError::ZeroVariance)));
    }
}
