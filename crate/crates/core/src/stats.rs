//! Summary statistics, bootstrap intervals, tail curves and the variance fit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{trial_rng, Stream};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Minimum records per degree for a tail curve.
pub const MIN_TAIL_RECORDS: usize = 100;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Bootstrap standard error.
    pub se: f64,
    /// 95% percentile interval.
    pub ci: [f64; 2],
}

/// Nonparametric bootstrap of `stat` over the rows of `data`.
pub fn bootstrap<T, F>(data: &[T], stat: F, resamples: usize, seed: u64, tag: u64) -> Estimate
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    let value = stat(data);
    if data.len() < 2 || resamples < 2 {
        return Estimate {
            value,
            se: 0.0,
            ci: [value, value],
        };
    }
    let mut rng = trial_rng(seed, Stream::Bootstrap, tag, 0);
    let mut buf = data.to_vec();
    let mut reps = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = data[rng.random_range(0..data.len())].clone();
        }
        reps.push(stat(&buf));
    }
    Estimate {
        value,
        se: variance(&reps).sqrt(),
        ci: [quantile(&reps, 0.025), quantile(&reps, 0.975)],
    }
}

/// Bootstrap of the mean.
pub fn bootstrap_mean(x: &[f64], seed: u64, tag: u64) -> Estimate {
    bootstrap(x, mean, BOOTSTRAP_RESAMPLES, seed, tag)
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, se_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} points", x.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (x.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((intercept, slope, se))
}

/// Per-degree sample of `N/n²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSample {
    pub n: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub records: usize,
    pub center: f64,
    /// `P̂{|N/n² - center| > ε}` for each ε of the grid.
    pub rates: Vec<f64>,
    pub exceedances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub eps: f64,
    /// Slope of `log((k + ½)/(N + 1))` against `n`.
    pub slope: f64,
    pub slope_se: f64,
    pub slope_ci: [f64; 2],
    /// Whether the smoothed log-rate strictly decreases along the degrees.
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub eps: Vec<f64>,
    pub rows: Vec<TailRow>,
    pub fits: Vec<TailFit>,
}

/// Empirical exceedance rates around each degree's mean.
pub fn tail_rates(values: &[f64], center: f64, eps: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let counts: Vec<usize> = eps
        .iter()
        .map(|&e| values.iter().filter(|&&v| (v - center).abs() > e).count())
        .collect();
    let rates = counts
        .iter()
        .map(|&k| k as f64 / values.len().max(1) as f64)
        .collect();
    (rates, counts)
}

fn smoothed_log_rate(k: usize, total: usize) -> f64 {
    ((k as f64 + 0.5) / (total as f64 + 1.0)).ln()
}

fn tail_slope(samples: &[DegreeSample], eps: f64) -> Result<f64> {
    let x: Vec<f64> = samples.iter().map(|s| s.n as f64).collect();
    let y: Vec<f64> = samples
        .iter()
        .map(|s| {
            let c = mean(&s.values);
            let k = s.values.iter().filter(|&&v| (v - c).abs() > eps).count();
            smoothed_log_rate(k, s.values.len())
        })
        .collect();
    Ok(linear_fit(&x, &y)?.1)
}

/// Tail table over the degrees in `samples` and a log-linear fit per ε.
///
/// Zero counts enter the fit as `log(½/(N + 1))`. The slope interval comes
/// from resampling records within each degree.
pub fn tail_curve(samples: &[DegreeSample], eps: &[f64], seed: u64) -> Result<TailTable> {
    for s in samples {
        if s.values.len() < MIN_TAIL_RECORDS {
            return Err(Error::InsufficientSamples {
                needed: MIN_TAIL_RECORDS,
                got: s.values.len(),
            });
        }
    }
    let rows: Vec<TailRow> = samples
        .iter()
        .map(|s| {
            let center = mean(&s.values);
            let (rates, exceedances) = tail_rates(&s.values, center, eps);
            TailRow {
                n: s.n,
                records: s.values.len(),
                center,
                rates,
                exceedances,
            }
        })
        .collect();
    let mut fits = Vec::with_capacity(eps.len());
    if samples.len() >= 2 {
        for (ei, &e) in eps.iter().enumerate() {
            let slope = tail_slope(samples, e)?;
            let mut rng = trial_rng(seed, Stream::Bootstrap, 0x7461_696c ^ ei as u64, 0);
            let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
            let mut resampled: Vec<DegreeSample> = samples.to_vec();
            for _ in 0..BOOTSTRAP_RESAMPLES {
                for (dst, src) in resampled.iter_mut().zip(samples) {
                    for v in dst.values.iter_mut() {
                        *v = src.values[rng.random_range(0..src.values.len())];
                    }
                }
                reps.push(tail_slope(&resampled, e)?);
            }
            let logs: Vec<f64> = rows
                .iter()
                .map(|r| smoothed_log_rate(r.exceedances[ei], r.records))
                .collect();
            fits.push(TailFit {
                eps: e,
                slope,
                slope_se: variance(&reps).sqrt(),
                slope_ci: [quantile(&reps, 0.025), quantile(&reps, 0.975)],
                strictly_decreasing: logs.windows(2).all(|w| w[1] < w[0]),
            });
        }
    }
    Ok(TailTable {
        eps: eps.to_vec(),
        rows,
        fits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    /// `Var N ≈ b n²`, least squares through the origin.
    pub b_hat: f64,
    pub b_se: f64,
    pub b_ci: [f64; 2],
    /// Relative residuals `(Var - b n²)/(b n²)` per degree.
    pub residuals: Vec<f64>,
    /// `std(N/n²) ≈ s/n`, least squares through the origin.
    pub std_slope: f64,
    pub degrees: Vec<usize>,
    pub variances: Vec<f64>,
    pub stds: Vec<f64>,
}

fn fit_b(samples: &[(usize, Vec<f64>)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (n, counts) in samples {
        let n2 = (*n as f64).powi(2);
        num += variance(counts) * n2;
        den += n2 * n2;
    }
    num / den
}

/// Fits `Var N_loop = b n²` over per-degree loop counts.
pub fn dispersion_fit(samples: &[(usize, Vec<f64>)], seed: u64) -> Result<DispersionFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} degrees, need 3",
            samples.len()
        )));
    }
    let b_hat = fit_b(samples);
    let variances: Vec<f64> = samples.iter().map(|(_, c)| variance(c)).collect();
    let degrees: Vec<usize> = samples.iter().map(|(n, _)| *n).collect();
    let residuals = degrees
        .iter()
        .zip(&variances)
        .map(|(&n, &v)| {
            let pred = b_hat * (n as f64).powi(2);
            (v - pred) / pred
        })
        .collect();
    let stds: Vec<f64> = samples
        .iter()
        .map(|(n, c)| variance(c).sqrt() / (*n as f64).powi(2))
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (&n, &s) in degrees.iter().zip(&stds) {
        let inv = 1.0 / n as f64;
        num += s * inv;
        den += inv * inv;
    }
    let mut rng = trial_rng(seed, Stream::Bootstrap, 0x6469_7370, 0);
    let mut resampled: Vec<(usize, Vec<f64>)> = samples.to_vec();
    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (dst, src) in resampled.iter_mut().zip(samples) {
            for v in dst.1.iter_mut() {
                *v = src.1[rng.random_range(0..src.1.len())];
            }
        }
        reps.push(fit_b(&resampled));
    }
    Ok(DispersionFit {
        b_hat,
        b_se: variance(&reps).sqrt(),
        b_ci: [quantile(&reps, 0.025), quantile(&reps, 0.975)],
        residuals,
        std_slope: num / den,
        degrees,
        variances,
        stds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 1.0), 4.0);
    }

    #[test]
    fn bootstrap_mean_se() {
        let x: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let e = bootstrap_mean(&x, 1, 0);
        let expected = (variance(&x) / 400.0).sqrt();
        assert!((e.se / expected - 1.0).abs() < 0.15);
        assert!(e.ci[0] < e.value && e.value < e.ci[1]);
    }

    #[test]
    fn planted_dispersion() {
        // counts with variance exactly 2n²: ±√2·n·√((m-1)/m) around a center
        let samples: Vec<(usize, Vec<f64>)> = [10usize, 20, 40]
            .iter()
            .map(|&n| {
                let m = 100usize;
                let amp = (2.0f64).sqrt() * n as f64 * ((m - 1) as f64 / m as f64).sqrt();
                (
                    n,
                    (0..m)
                        .map(|i| 500.0 + if i % 2 == 0 { amp } else { -amp })
                        .collect(),
                )
            })
            .collect();
        let fit = dispersion_fit(&samples, 3).unwrap();
        assert!((fit.b_hat - 2.0).abs() < 1e-6, "{}", fit.b_hat);
        assert!(dispersion_fit(&samples[..2], 3).is_err());
    }

    #[test]
    fn tail_extremes() {
        let s: Vec<DegreeSample> = [10usize, 20]
            .iter()
            .map(|&n| DegreeSample {
                n,
                values: (0..120).map(|i| 0.05 + 0.001 * (i % 5) as f64).collect(),
            })
            .collect();
        let t = tail_curve(&s, &[0.0, 1.0], 1).unwrap();
        for r in &t.rows {
            assert_eq!(r.rates[1], 0.0);
            // ties with the center excluded at ε = 0
            assert!(r.rates[0] > 0.75);
        }
        let short = [DegreeSample {
            n: 5,
            values: vec![0.1; 99],
        }];
        assert!(matches!(
            tail_curve(&short, &[0.01], 1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn line_fit() {
        let (a, b, se) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && se < 1e-12);
    }
}
