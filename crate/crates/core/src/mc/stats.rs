//! Empirical estimators and their confidence machinery: exact binomial
//! upper bands for tails, bootstrap bands for moments, quantile grids,
//! log-log slope fits, and a distance-correlation independence test.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::mc::substream;
use crate::util::ls_slope;

/// One point of an empirical tail estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    /// `max` of the two one-sided frequencies.
    pub empirical: f64,
    /// Exact binomial (Clopper-Pearson) upper confidence bound for the
    /// larger side.
    pub cp_upper: f64,
}

/// One-sided exact binomial upper confidence bound for `k` successes in `n`
/// trials at confidence `conf`: the `conf` quantile of Beta(k+1, n-k),
/// located by bisection on the regularised incomplete beta.
pub fn cp_upper(k: u64, n: u64, conf: f64) -> f64 {
    assert!(n > 0 && k <= n);
    if k == n {
        return 1.0;
    }
    let beta = Beta::new((k + 1) as f64, (n - k) as f64).expect("valid beta parameters");
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < conf {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-12) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical two-sided-max tail with exact binomial upper bands.
pub fn empirical_tail(values: &[f64], xs: &[f64], conf: f64) -> Vec<TailPoint> {
    let n = values.len() as u64;
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.iter()
        .map(|&x| {
            let above = (sorted.len() - sorted.partition_point(|&v| v <= x)) as u64;
            let below = sorted.partition_point(|&v| v < -x) as u64;
            let k = above.max(below);
            TailPoint {
                x,
                empirical: k as f64 / n as f64,
                cp_upper: cp_upper(k, n, conf),
            }
        })
        .collect()
}

/// Empirical quantile of pre-sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q.clamp(0.0, 1.0)).round() as usize;
    sorted[idx]
}

/// The default verification grid: geometric points between a quarter of the
/// 90% quantile and four times the 99.99% quantile of `|values|`.
pub fn auto_x_grid(values: &[f64], points: usize) -> Vec<f64> {
    let mut mods: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q90 = quantile_sorted(&mods, 0.90).max(1e-9);
    let q9999 = quantile_sorted(&mods, 0.9999).max(q90);
    let lo = 0.25 * q90;
    let hi = 4.0 * q9999;
    (0..points)
        .map(|j| lo * (hi / lo).powf(j as f64 / (points - 1) as f64))
        .collect()
}

/// One point of an empirical moment estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentPoint {
    pub p: f64,
    /// Plug-in `(mean |v|^p)^(1/p)`.
    pub estimate: f64,
    pub boot_lower: f64,
    pub boot_upper: f64,
    /// False when `p` exceeds the reliable horizon `4 log10(replications)`.
    pub reliable: bool,
}

/// Plug-in moment norms with bootstrap confidence bands (shared resample
/// indices across orders, seeded deterministically).
pub fn empirical_moments(
    values: &[f64],
    ps: &[f64],
    resamples: usize,
    conf: f64,
    seed: u64,
) -> Vec<MomentPoint> {
    let n = values.len();
    let reliable_horizon = 4.0 * (n as f64).log10();
    let powered: Vec<Vec<f64>> = ps
        .iter()
        .map(|&p| values.iter().map(|v| v.abs().powf(p)).collect())
        .collect();
    let estimates: Vec<f64> = powered
        .iter()
        .zip(ps)
        .map(|(col, &p)| (col.iter().sum::<f64>() / n as f64).powf(1.0 / p))
        .collect();
    let mut boots: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); ps.len()];
    let mut rng = substream(seed, u64::MAX - 1);
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        for (j, col) in powered.iter().enumerate() {
            let mean = idx.iter().map(|&i| col[i]).sum::<f64>() / n as f64;
            boots[j].push(mean.powf(1.0 / ps[j]));
        }
    }
    ps.iter()
        .enumerate()
        .map(|(j, &p)| {
            let mut b = boots[j].clone();
            b.sort_by(|a, c| a.partial_cmp(c).unwrap());
            MomentPoint {
                p,
                estimate: estimates[j],
                boot_lower: quantile_sorted(&b, 1.0 - conf),
                boot_upper: quantile_sorted(&b, conf),
                reliable: p <= reliable_horizon,
            }
        })
        .collect()
}

/// Bootstrap estimate and standard error of the variance.
pub fn bootstrap_variance(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = values.len();
    let var_of = |idx: Option<&[usize]>| -> f64 {
        let get = |j: usize| match idx {
            Some(ix) => values[ix[j]],
            None => values[j],
        };
        let mean = (0..n).map(get).sum::<f64>() / n as f64;
        (0..n).map(|j| (get(j) - mean) * (get(j) - mean)).sum::<f64>() / n as f64
    };
    let est = var_of(None);
    let mut rng = substream(seed, u64::MAX - 2);
    let mut boots = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        boots.push(var_of(Some(&idx)));
    }
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let se = (boots.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / boots.len() as f64).sqrt();
    (est, se)
}

/// Least-squares slope of `log(-log t)` against `log x` over the points
/// with `t` in `(t_floor, t_ceiling)`.
pub fn fit_tail_slope_window(points: &[TailPoint], t_floor: f64, t_ceiling: f64) -> Result<f64> {
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for p in points {
        if p.empirical > t_floor && p.empirical < t_ceiling && p.x > 0.0 {
            us.push(p.x.ln());
            vs.push((-p.empirical.ln()).ln());
        }
    }
    if us.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "only {} informative tail points for a slope fit",
            us.len()
        )));
    }
    Ok(ls_slope(&us, &vs))
}

/// Slope fit over the informative range below the median (`t < 0.5`).
pub fn fit_tail_slope(points: &[TailPoint], t_floor: f64) -> Result<f64> {
    fit_tail_slope_window(points, t_floor, 0.5)
}

/// Sample distance correlation of paired observations (biased version,
/// O(n^2)).  Zero for independent pairs, positive under dependence of any
/// functional form.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(n >= 4);
    let centered = |v: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0f64; n * n];
        let mut row = vec![0.0f64; n];
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = (v[i] - v[j]).abs();
                a[i * n + j] = d;
                row[i] += d;
                total += d;
            }
        }
        for r in row.iter_mut() {
            *r /= n as f64;
        }
        total /= (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] += total - row[i] - row[j];
            }
        }
        a
    };
    let a = centered(x);
    let b = centered(y);
    let mut vxy = 0.0;
    let mut vxx = 0.0;
    let mut vyy = 0.0;
    for i in 0..n * n {
        vxy += a[i] * b[i];
        vxx += a[i] * a[i];
        vyy += b[i] * b[i];
    }
    if vxx <= 0.0 || vyy <= 0.0 {
        return 0.0;
    }
    (vxy / (vxx * vyy).sqrt()).max(0.0).sqrt()
}

/// Permutation p-value for the distance correlation (deterministic given
/// the seed).
pub fn dcor_pvalue(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> f64 {
    let observed = distance_correlation(x, y);
    let mut rng = substream(seed, u64::MAX - 3);
    let mut shuffled: Vec<f64> = y.to_vec();
    let mut at_least = 1usize;
    for _ in 0..permutations {
        // Fisher-Yates
        for i in (1..shuffled.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        if distance_correlation(x, &shuffled) >= observed {
            at_least += 1;
        }
    }
    at_least as f64 / (permutations + 1) as f64
}
