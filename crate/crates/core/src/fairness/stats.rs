use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least two values and one sample must vary")]
    DegenerateSamples,
    #[error("rating matrix is empty")]
    EmptyMatrix,
    #[error("item {item} has {found} ratings, expected {expected}")]
    UnevenRaterCounts { item: usize, expected: u64, found: u64 },
    #[error("kappa needs at least two raters per item, got {0}")]
    TooFewRaters(u64),
    #[error("expected agreement is 1; kappa is undefined")]
    PerfectExpectedAgreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SignificanceTest {
    WelchT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub test: SignificanceTest,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig { alpha: 0.05, test: SignificanceTest::WelchT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unequal-variance two-sample t-test with Welch–Satterthwaite degrees of
/// freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateSamples);
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let se_a = var_a / a.len() as f64;
    let se_b = var_b / b.len() as f64;
    let se2 = se_a + se_b;
    if se2.is_nan() || se2 <= 0.0 {
        return Err(StatsError::DegenerateSamples);
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (se_a * se_a / (a.len() as f64 - 1.0) + se_b * se_b / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::DegenerateSamples)?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p })
}

/// Fleiss' kappa over an items × categories matrix of rater counts.
///
/// Counts are integers, so the statistic is evaluated as one exact rational
/// and rounded once. Matrices too large for 128-bit intermediates fall back
/// to floating point.
pub fn fleiss_kappa(counts: &[Vec<u64>]) -> Result<f64, StatsError> {
    let first = counts.first().ok_or(StatsError::EmptyMatrix)?;
    let raters: u64 = first.iter().sum();
    for (item, row) in counts.iter().enumerate() {
        let found: u64 = row.iter().sum();
        if found != raters || row.len() != first.len() {
            return Err(StatsError::UnevenRaterCounts { item, expected: raters, found });
        }
    }
    if raters < 2 {
        return Err(StatsError::TooFewRaters(raters));
    }
    exact_kappa(counts, raters).unwrap_or_else(|| float_kappa(counts, raters))
}

fn column_totals(counts: &[Vec<u64>]) -> Vec<u64> {
    let mut totals = vec![0u64; counts[0].len()];
    for row in counts {
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    totals
}

/// kappa = (A*T^2 - C*B) / (B*(T^2 - C)) where P_bar = A/B and P_e = C/T^2.
fn exact_kappa(counts: &[Vec<u64>], raters: u64) -> Option<Result<f64, StatsError>> {
    let items = counts.len() as i128;
    let n = raters as i128;
    let total = items.checked_mul(n)?;
    let mut squares: i128 = 0;
    for row in counts {
        for &c in row {
            squares = squares.checked_add((c as i128).checked_mul(c as i128)?)?;
        }
    }
    let a = squares - total;
    let b = total.checked_mul(n - 1)?;
    let mut c: i128 = 0;
    for t in column_totals(counts) {
        c = c.checked_add((t as i128).checked_mul(t as i128)?)?;
    }
    let t2 = total.checked_mul(total)?;
    if t2 == c {
        return Some(Err(StatsError::PerfectExpectedAgreement));
    }
    let num = a.checked_mul(t2)?.checked_sub(c.checked_mul(b)?)?;
    let den = b.checked_mul(t2 - c)?;
    Some(Ok(num as f64 / den as f64))
}

fn float_kappa(counts: &[Vec<u64>], raters: u64) -> Result<f64, StatsError> {
    let n = raters as f64;
    let total = counts.len() as f64 * n;
    let p_bar = counts
        .iter()
        .map(|row| (row.iter().map(|&c| (c as f64).powi(2)).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / counts.len() as f64;
    let p_e: f64 = column_totals(counts).iter().map(|&t| (t as f64 / total).powi(2)).sum();
    if p_e >= 1.0 {
        return Err(StatsError::PerfectExpectedAgreement);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
