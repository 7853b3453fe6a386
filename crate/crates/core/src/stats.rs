//! Small statistical toolkit shared by the Monte Carlo routes: moments,
//! chi-square and Kolmogorov-Smirnov tests, least-squares slope.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{RatchetError, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Coefficient of variation, `sd / mean`.
pub fn cv(xs: &[f64]) -> f64 {
    variance(xs).sqrt() / mean(xs)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Empirical frequencies of nonnegative integer samples, indexed by value.
pub fn frequencies(samples: &[u32]) -> Vec<f64> {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &s in samples {
        counts[s as usize] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / samples.len() as f64)
        .collect()
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test. Ties are handled by evaluating both empirical CDFs
/// after each distinct value, which makes the test conservative for
/// discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(RatchetError::InsufficientData(
            "KS test needs two nonempty samples".into(),
        ));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(TestResult {
        statistic: d,
        p_value: p,
    })
}

/// One-sample KS test against an exponential law with the sample mean.
pub fn ks_exponential_fit(samples: &[f64]) -> Result<TestResult> {
    if samples.len() < 2 {
        return Err(RatchetError::InsufficientData(
            "KS fit needs at least two samples".into(),
        ));
    }
    let rate = 1.0 / mean(samples);
    let mut x = samples.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = 1.0 - (-rate * v).exp();
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    let en = n.sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    })
}

/// Chi-square homogeneity test for two samples of categorical outcomes.
///
/// Categories with a pooled expected count below `min_expected` in either
/// sample are merged into a single residual bucket.
pub fn chi_square_two_sample<K: Ord + Clone>(
    a: &[K],
    b: &[K],
    min_expected: f64,
) -> Result<TestResult> {
    let mut table: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for k in a {
        table.entry(k.clone()).or_default().0 += 1.0;
    }
    for k in b {
        table.entry(k.clone()).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(RatchetError::InsufficientData(
            "chi-square needs two nonempty samples".into(),
        ));
    }
    let total = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for &(ca, cb) in table.values() {
        let pooled = ca + cb;
        if pooled * na.min(nb) / total < min_expected {
            rest.0 += ca;
            rest.1 += cb;
        } else {
            cells.push((ca, cb));
        }
    }
    if rest.0 + rest.1 > 0.0 {
        cells.push(rest);
    }
    if cells.len() < 2 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let pooled = ca + cb;
        let ea = pooled * na / total;
        let eb = pooled * nb / total;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    Ok(TestResult {
        statistic: stat,
        p_value: chi_square_sf(stat, cells.len() - 1)?,
    })
}

/// Chi-square goodness of fit of integer samples against given
/// probabilities; the tail beyond the last probability and sparse cells are
/// pooled.
pub fn chi_square_goodness_of_fit(
    samples: &[u32],
    probs: &[f64],
    min_expected: f64,
) -> Result<TestResult> {
    let n = samples.len() as f64;
    if n == 0.0 {
        return Err(RatchetError::InsufficientData("no samples".into()));
    }
    let mut observed = vec![0.0; probs.len() + 1];
    for &s in samples {
        let idx = (s as usize).min(probs.len());
        observed[idx] += 1.0;
    }
    let mut expected: Vec<f64> = probs.iter().map(|p| p * n).collect();
    expected.push((1.0 - probs.iter().sum::<f64>()).max(0.0) * n);
    let mut cells = Vec::new();
    let (mut ro, mut re) = (0.0, 0.0);
    for (o, e) in observed.into_iter().zip(expected) {
        if e < min_expected {
            ro += o;
            re += e;
        } else {
            cells.push((o, e));
        }
    }
    if re > 0.0 {
        cells.push((ro, re));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    Ok(TestResult {
        statistic: stat,
        p_value: chi_square_sf(stat, (cells.len() - 1).max(1))?,
    })
}

/// Upper tail `P(X >= stat)` of a chi-square law with `df` degrees of freedom.
pub fn chi_square_sf(stat: f64, df: usize) -> Result<f64> {
    let dist = ChiSquared::new(df as f64).map_err(|e| RatchetError::Numeric(e.to_string()))?;
    Ok(dist.sf(stat))
}
