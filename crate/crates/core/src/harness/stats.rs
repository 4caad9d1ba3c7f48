//! Distribution tests shared by the verification suites.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::rng::trial_seed;
use crate::samplers::TreeDistribution;

#[derive(Clone, Debug, Serialize)]
pub struct StatTest {
    pub kind: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub dof: Option<usize>,
    pub samples: usize,
    pub pass: bool,
}

pub type Frequencies = BTreeMap<Vec<EdgeId>, u64>;

/// Runs `f` on `trials` derived seeds; output order follows the trial index.
pub fn run_trials<T, F>(trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials as u64).into_par_iter().map(|t| f(trial_seed(seed, t))).collect()
}

pub fn frequencies<I: IntoIterator<Item = Vec<EdgeId>>>(trees: I) -> Frequencies {
    let mut out = Frequencies::new();
    for t in trees {
        *out.entry(t).or_default() += 1;
    }
    out
}

/// `½ Σ |empirical − exact|` over the union of keys. Keys must all be trees of
/// the same size as those in `dist`.
pub fn tv_estimate(freq: &Frequencies, dist: &TreeDistribution) -> Result<f64> {
    let size = dist.probabilities.keys().next().map(Vec::len);
    if freq.keys().any(|k| size.is_some_and(|s| k.len() != s)) {
        return Err(Error::KeySpaceMismatch);
    }
    let nf = freq.values().sum::<u64>().max(1) as f64;
    let on_support: f64 = dist.probabilities.iter().map(|(k, p)| (freq.get(k).copied().unwrap_or(0) as f64 / nf - p).abs()).sum();
    let off_support: f64 = freq.iter().filter(|(k, _)| !dist.probabilities.contains_key(*k)).map(|(_, &c)| c as f64 / nf).sum();
    Ok(0.5 * (on_support + off_support))
}

pub fn tv_test(freq: &Frequencies, dist: &TreeDistribution, threshold: f64) -> Result<StatTest> {
    let tv = tv_estimate(freq, dist)?;
    Ok(StatTest { kind: "tv".into(), statistic: tv, threshold, p_value: None, dof: None, samples: freq.values().sum::<u64>() as usize, pass: tv < threshold })
}

fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(stat)
}

/// Goodness of fit against an exact distribution; cells expecting fewer than 5
/// hits are pooled. Rejects when p < `alpha`.
pub fn chi_square_gof(freq: &Frequencies, dist: &TreeDistribution, alpha: f64) -> Result<StatTest> {
    if freq.keys().any(|k| !dist.probabilities.contains_key(k)) {
        return Err(Error::KeySpaceMismatch);
    }
    let n = freq.values().sum::<u64>() as f64;
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (k, p) in &dist.probabilities {
        let obs = freq.get(k).copied().unwrap_or(0) as f64;
        let exp = p * n;
        if exp < 5.0 {
            pool_obs += obs;
            pool_exp += exp;
        } else {
            stat += (obs - exp).powi(2) / exp;
            bins += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        bins += 1;
    }
    let dof = bins.saturating_sub(1);
    let p = chi_square_p(stat, dof);
    Ok(StatTest { kind: "chi2_gof".into(), statistic: stat, threshold: alpha, p_value: Some(p), dof: Some(dof), samples: n as usize, pass: p >= alpha })
}

/// Two-sample homogeneity test; keys seen fewer than 10 times in total are pooled.
pub fn chi_square_two_sample<K: Hash + Eq + Clone + Ord>(a: &HashMap<K, u64>, b: &HashMap<K, u64>, alpha: f64) -> StatTest {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let mut keys: Vec<K> = a.keys().chain(b.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let x = a.get(&k).copied().unwrap_or(0) as f64;
        let y = b.get(&k).copied().unwrap_or(0) as f64;
        if x + y < 10.0 {
            pooled.0 += x;
            pooled.1 += y;
        } else {
            cells.push((x, y));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let (fa, fb) = (na as f64 / (na + nb) as f64, nb as f64 / (na + nb) as f64);
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let t = x + y;
            (x - t * fa).powi(2) / (t * fa) + (y - t * fb).powi(2) / (t * fb)
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p = chi_square_p(stat, dof);
    StatTest {
        kind: "chi2_two_sample".into(),
        statistic: stat,
        threshold: alpha,
        p_value: Some(p),
        dof: Some(dof),
        samples: (na + nb) as usize,
        pass: p >= alpha,
    }
}

/// TV level that `samples` draws over `support` outcomes stay below with high
/// probability: `4 √(support / samples)`.
pub fn tv_threshold(support: usize, samples: usize) -> f64 {
    4.0 * (support as f64 / samples.max(1) as f64).sqrt()
}

/// Bonferroni-corrected level for `tests` simultaneous tests.
pub fn bonferroni(alpha: f64, tests: usize) -> f64 {
    alpha / tests.max(1) as f64
}

/// Checks that the mean of `values` is within `sigmas` standard errors of `mean`.
pub fn mean_z_test(values: &[f64], mean: f64, sigmas: f64) -> StatTest {
    let n = values.len() as f64;
    let avg = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let se = (var / n).sqrt();
    let z = if se > 0.0 {
        (avg - mean) / se
    } else if (avg - mean).abs() <= 1e-12 + 1e-9 * mean.abs() {
        0.0
    } else {
        f64::INFINITY
    };
    StatTest { kind: "mean_z".into(), statistic: z, threshold: sigmas, p_value: None, dof: None, samples: values.len(), pass: z.abs() <= sigmas }
}
