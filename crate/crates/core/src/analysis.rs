//! Empirical metrics and the closed-form filter error model.
//!
//! Two error types matter for a filter. An E1 error discards a correctly
//! labelled instance; an E2 error keeps a mislabelled one. With `m`
//! detectors whose errors are independent:
//!
//! * majority filter, equal per-detector rate `p`:
//!   `P(E) = sum_{j > m/2}^{m} C(m, j) p^j (1 - p)^(m - j)` for both E1 and E2;
//! * consensus filter: `P(E1) = prod_i P(E1_i)` and
//!   `P(E2) = 1 - prod_i (1 - P(E2_i))`.
//!
//! Without independence the consensus forms become chains of conditional
//! probabilities, `P(E1) = P(E1_1) P(E1_2 | E1_1) ... P(E1_m | E1_1..E1_{m-1})`
//! and `P(E2) = 1 - (1 - P(E2_1)) (1 - P(E2_2 | !E2_1)) ...`, which cannot be
//! evaluated without a dependence model and are not implemented.
//!
//! For multiclass problems the majority E2 form undercounts: a wrong class
//! can win a plurality with fewer than half of the votes, while the formula
//! counts only strict majorities.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::Classifier;

/// Fraction of `test` instances whose prediction equals their label.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::NoInstances);
    }
    let hits = test
        .instances()
        .iter()
        .filter(|x| model.classify(x) == x.label)
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Averaged filter precision counts and the E1/E2 estimates derived from
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub discarded: f64,
    pub corrupted: f64,
    pub intersection: f64,
    pub total: usize,
    pub p_e1: f64,
    pub p_e2: f64,
}

impl PrecisionReport {
    pub fn new(discarded: f64, corrupted: f64, intersection: f64, total: usize) -> Result<Self> {
        let (p_e1, p_e2) = precision_estimates(discarded, corrupted, intersection, total)?;
        Ok(PrecisionReport {
            discarded,
            corrupted,
            intersection,
            total,
            p_e1,
            p_e2,
        })
    }
}

/// `P(E1) = (D - |M ∩ D|) / (total - M)` and `P(E2) = (M - |M ∩ D|) / M`,
/// with `P(E2) = 0` when nothing was corrupted.
pub fn precision_estimates(
    discarded: f64,
    corrupted: f64,
    intersection: f64,
    total: usize,
) -> Result<(f64, f64)> {
    let total = total as f64;
    if total <= corrupted {
        return Err(Error::invalid(format!(
            "total {total} must exceed the corrupted count {corrupted}"
        )));
    }
    if corrupted < 0.0 || intersection < 0.0 || discarded < intersection || corrupted < intersection
    {
        return Err(Error::invalid("intersection must not exceed either set"));
    }
    let p_e1 = (discarded - intersection) / (total - corrupted);
    let p_e2 = if corrupted == 0.0 {
        0.0
    } else {
        (corrupted - intersection) / corrupted
    };
    Ok((p_e1, p_e2))
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("probability {p} not in [0,1]")))
    }
}

/// Probability that more than half of `m` independent detectors, each
/// wrong with probability `p`, are wrong. For even `m` the threshold is
/// `m/2 + 1`.
pub fn analytic_majority_error(m: usize, p: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("need at least one detector"));
    }
    check_probability(p)?;
    let threshold = m / 2 + 1;
    let mut coeff = 1.0f64; // C(m, j), built incrementally
    let mut total = 0.0;
    for j in 0..=m {
        if j > 0 {
            coeff = coeff * (m - j + 1) as f64 / j as f64;
        }
        if j >= threshold {
            total += coeff * p.powi(j as i32) * (1.0 - p).powi((m - j) as i32);
        }
    }
    Ok(total)
}

/// Consensus E1 under independence: every detector must err.
pub fn analytic_consensus_e1(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::invalid("need at least one detector rate"));
    }
    rates.iter().try_for_each(|&r| check_probability(r))?;
    Ok(rates.iter().product())
}

/// Consensus E2 under independence: at least one detector errs.
pub fn analytic_consensus_e2(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::invalid("need at least one detector rate"));
    }
    rates.iter().try_for_each(|&r| check_probability(r))?;
    Ok(1.0 - rates.iter().map(|r| 1.0 - r).product::<f64>())
}

/// Per-detector E1/E2 rates for the independence model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRates {
    pub e1_rates: Vec<f64>,
    pub e2_rates: Vec<f64>,
}

impl DetectorRates {
    pub fn consensus(&self) -> Result<(f64, f64)> {
        Ok((
            analytic_consensus_e1(&self.e1_rates)?,
            analytic_consensus_e2(&self.e2_rates)?,
        ))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n - 1) standard deviation; 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Two-tailed paired t-test on `a - b`.
///
/// When the differences have zero variance the statistic is undefined:
/// `p = 1` if every difference is zero, otherwise `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let df = n - 1;
    let md = mean(&d);
    let sd = sample_sd(&d);
    if sd == 0.0 {
        let all_zero = d.iter().all(|&x| x == 0.0);
        return Ok(PairedTTest {
            t: if all_zero {
                0.0
            } else {
                md.signum() * f64::INFINITY
            },
            df,
            p_value: if all_zero { 1.0 } else { 0.0 },
        });
    }
    let t = md / (sd / (n as f64).sqrt());
    let nu = df as f64;
    // Two-tailed tail mass of Student's t: I_{nu/(nu+t^2)}(nu/2, 1/2).
    let p_value = beta_reg(nu / 2.0, 0.5, nu / (nu + t * t)).clamp(0.0, 1.0);
    Ok(PairedTTest { t, df, p_value })
}
