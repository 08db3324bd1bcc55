//! Chi-square statistics with asymptotic p-values and a seeded Monte Carlo
//! fallback for tables whose expected counts fall under the classical floor
//! of 5 per cell.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Expected-count floor below which the asymptotic null is unreliable.
pub const EXPECTED_FLOOR: f64 = 5.0;

/// Resamples for the Monte Carlo null.
pub const MC_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// True when the p-value came from resampling rather than the
    /// asymptotic chi-square distribution.
    pub monte_carlo: bool,
}

impl ChiSquareOutcome {
    fn vacuous() -> ChiSquareOutcome {
        ChiSquareOutcome {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
            monte_carlo: false,
        }
    }
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(statistic.max(0.0))
}

/// One multinomial draw via sequential conditional binomials; O(#categories)
/// regardless of n.
pub fn multinomial(rng: &mut ChaCha12Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut rem_p = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || rem_p <= p {
            out[i] = remaining;
            remaining = 0;
            break;
        }
        let q = (p / rem_p).clamp(0.0, 1.0);
        let x = rand_distr::Binomial::new(remaining, q)
            .expect("clamped probability")
            .sample(rng);
        out[i] = x;
        remaining -= x;
        rem_p -= p;
    }
    if remaining > 0 {
        *out.last_mut().expect("nonempty categories") += remaining;
    }
    out
}

fn homogeneity_statistic(rows: &[Vec<u64>], col_probs: &[f64]) -> f64 {
    let mut stat = 0.0;
    for row in rows {
        let total: u64 = row.iter().sum();
        for (c, &obs) in row.iter().enumerate() {
            let expected = total as f64 * col_probs[c];
            if expected > 0.0 {
                let d = obs as f64 - expected;
                stat += d * d / expected;
            }
        }
    }
    stat
}

/// Chi-square homogeneity test: are the rows draws from one distribution
/// over the columns? Zero-total rows and columns are dropped. Falls back to
/// a seeded Monte Carlo null (multinomial resampling conditional on row
/// totals) when any expected cell is below the floor.
pub fn homogeneity_test(counts: &[Vec<u64>], mc_seed: u64) -> ChiSquareOutcome {
    let cols = match counts.first() {
        Some(r) => r.len(),
        None => return ChiSquareOutcome::vacuous(),
    };
    let rows: Vec<Vec<u64>> = counts
        .iter()
        .filter(|r| r.iter().sum::<u64>() > 0)
        .cloned()
        .collect();
    if rows.len() < 2 {
        return ChiSquareOutcome::vacuous();
    }
    let mut col_totals = vec![0u64; cols];
    for row in &rows {
        for (c, &x) in row.iter().enumerate() {
            col_totals[c] += x;
        }
    }
    let live_cols: Vec<usize> = (0..cols).filter(|&c| col_totals[c] > 0).collect();
    if live_cols.len() < 2 {
        return ChiSquareOutcome::vacuous();
    }
    let rows: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| live_cols.iter().map(|&c| r[c]).collect())
        .collect();
    let total: u64 = col_totals.iter().sum();
    let col_probs: Vec<f64> = live_cols
        .iter()
        .map(|&c| col_totals[c] as f64 / total as f64)
        .collect();
    let statistic = homogeneity_statistic(&rows, &col_probs);
    let df = (rows.len() - 1) * (live_cols.len() - 1);

    let min_expected = rows
        .iter()
        .map(|r| {
            let t: u64 = r.iter().sum();
            col_probs
                .iter()
                .map(|&p| t as f64 * p)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);

    if min_expected >= EXPECTED_FLOOR {
        return ChiSquareOutcome {
            statistic,
            df,
            p_value: chi_square_sf(statistic, df),
            monte_carlo: false,
        };
    }

    let row_totals: Vec<u64> = rows.iter().map(|r| r.iter().sum()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(mc_seed);
    let mut at_least = 1usize;
    for _ in 0..MC_RESAMPLES {
        let resampled: Vec<Vec<u64>> = row_totals
            .iter()
            .map(|&t| multinomial(&mut rng, t, &col_probs))
            .collect();
        let mut resampled_cols = vec![0u64; col_probs.len()];
        for row in &resampled {
            for (c, &x) in row.iter().enumerate() {
                resampled_cols[c] += x;
            }
        }
        let resampled_probs: Vec<f64> = resampled_cols
            .iter()
            .map(|&x| x as f64 / total as f64)
            .collect();
        if homogeneity_statistic(&resampled, &resampled_probs) >= statistic {
            at_least += 1;
        }
    }
    ChiSquareOutcome {
        statistic,
        df,
        p_value: at_least as f64 / (MC_RESAMPLES + 1) as f64,
        monte_carlo: true,
    }
}

/// Two-sample special case of the homogeneity test.
pub fn two_sample_test(a: &[u64], b: &[u64], mc_seed: u64) -> ChiSquareOutcome {
    homogeneity_test(&[a.to_vec(), b.to_vec()], mc_seed)
}

fn uniformity_statistic(classes: &[Vec<u64>]) -> f64 {
    let mut stat = 0.0;
    for class in classes {
        if class.len() < 2 {
            continue;
        }
        let total: u64 = class.iter().sum();
        if total == 0 {
            continue;
        }
        let expected = total as f64 / class.len() as f64;
        for &obs in class {
            let d = obs as f64 - expected;
            stat += d * d / expected;
        }
    }
    stat
}

/// Tests that counts are uniform within each class (cells of one class are
/// exchangeable under the null). df = Σ (class size − 1) over non-degenerate
/// classes. Monte Carlo fallback below the expected-count floor.
pub fn uniformity_test(classes: &[Vec<u64>], mc_seed: u64) -> ChiSquareOutcome {
    let live: Vec<&Vec<u64>> = classes
        .iter()
        .filter(|c| c.len() >= 2 && c.iter().sum::<u64>() > 0)
        .collect();
    if live.is_empty() {
        return ChiSquareOutcome::vacuous();
    }
    let statistic = uniformity_statistic(classes);
    let df: usize = live.iter().map(|c| c.len() - 1).sum();
    let min_expected = live
        .iter()
        .map(|c| c.iter().sum::<u64>() as f64 / c.len() as f64)
        .fold(f64::INFINITY, f64::min);

    if min_expected >= EXPECTED_FLOOR {
        return ChiSquareOutcome {
            statistic,
            df,
            p_value: chi_square_sf(statistic, df),
            monte_carlo: false,
        };
    }

    let mut rng = ChaCha12Rng::seed_from_u64(mc_seed);
    let mut at_least = 1usize;
    for _ in 0..MC_RESAMPLES {
        let resampled: Vec<Vec<u64>> = live
            .iter()
            .map(|c| {
                let total: u64 = c.iter().sum();
                let probs = vec![1.0 / c.len() as f64; c.len()];
                multinomial(&mut rng, total, &probs)
            })
            .collect();
        if uniformity_statistic(&resampled) >= statistic {
            at_least += 1;
        }
    }
    ChiSquareOutcome {
        statistic,
        df,
        p_value: at_least as f64 / (MC_RESAMPLES + 1) as f64,
        monte_carlo: true,
    }
}

/// Pearson correlation; zero for degenerate inputs.
pub fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired samples");
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Equal-width histogram of values over [lo, hi); values at hi land in the
/// last bin.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<u64> {
    let mut out = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        out[idx] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sf_matches_known_quantiles() {
        // 95th percentile of chi-square(1) is 3.841; of chi-square(4), 9.488
        assert!((chi_square_sf(3.841, 1) - 0.05).abs() < 1e-3);
        assert!((chi_square_sf(9.488, 4) - 0.05).abs() < 1e-3);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert!(chi_square_sf(100.0, 2) < 1e-12);
        assert_eq!(chi_square_sf(5.0, 0), 1.0);
    }

    #[test]
    fn multinomial_conserves_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let draw = multinomial(&mut rng, 1000, &[0.2, 0.3, 0.5]);
            assert_eq!(draw.iter().sum::<u64>(), 1000);
        }
        let draw = multinomial(&mut rng, 100_000, &[0.9, 0.1]);
        assert!((draw[0] as f64 - 90_000.0).abs() < 1_500.0);
    }

    #[test]
    fn homogeneity_accepts_identical_rows() {
        let rows = vec![vec![5000, 5000], vec![5010, 4990], vec![4985, 5015]];
        let out = homogeneity_test(&rows, 1);
        assert!(!out.monte_carlo);
        assert_eq!(out.df, 2);
        assert!(out.p_value > 0.1, "p {}", out.p_value);
    }

    #[test]
    fn homogeneity_rejects_shifted_rows() {
        let rows = vec![vec![8000, 2000], vec![2000, 8000]];
        let out = homogeneity_test(&rows, 1);
        assert!(out.p_value < 1e-10);
    }

    #[test]
    fn homogeneity_degenerate_tables_are_vacuous() {
        assert_eq!(homogeneity_test(&[], 1).p_value, 1.0);
        assert_eq!(homogeneity_test(&[vec![10, 10]], 1).p_value, 1.0);
        // one live column only
        let out = homogeneity_test(&[vec![10, 0], vec![12, 0]], 1);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn small_tables_use_monte_carlo() {
        let rows = vec![vec![3, 1], vec![2, 2]];
        let out = homogeneity_test(&rows, 7);
        assert!(out.monte_carlo);
        assert!(out.p_value > 0.05);
        let again = homogeneity_test(&rows, 7);
        assert_eq!(out.p_value, again.p_value);

        let skewed = vec![vec![40, 0], vec![0, 40]];
        // expected count 20 >= floor: asymptotic path
        let out = homogeneity_test(&skewed, 7);
        assert!(!out.monte_carlo);
        assert!(out.p_value < 1e-9);
    }

    #[test]
    fn monte_carlo_detects_gross_asymmetry() {
        let rows = vec![vec![9, 0, 0], vec![0, 9, 0]];
        let out = homogeneity_test(&rows, 3);
        assert!(out.monte_carlo);
        assert!(out.p_value < 0.01, "p {}", out.p_value);
    }

    #[test]
    fn homogeneity_null_calibration() {
        // Under the null, p-values should not be systematically tiny.
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let mut rejections = 0;
        let sims = 200;
        for _ in 0..sims {
            let rows: Vec<Vec<u64>> = (0..3)
                .map(|_| multinomial(&mut rng, 2000, &[0.3, 0.3, 0.4]))
                .collect();
            if homogeneity_test(&rows, rng.gen()).p_value < 0.05 {
                rejections += 1;
            }
        }
        // 5% nominal; allow generous slack
        assert!(rejections <= 25, "{rejections} rejections out of {sims}");
    }

    #[test]
    fn uniformity_examples() {
        let classes = vec![vec![5000, 4990], vec![3000, 3010, 2995]];
        let out = uniformity_test(&classes, 1);
        assert_eq!(out.df, 3);
        assert!(out.p_value > 0.1);

        let skewed = vec![vec![9000, 1000]];
        let out = uniformity_test(&skewed, 1);
        assert!(out.p_value < 1e-10);

        // singleton classes carry no information
        let out = uniformity_test(&[vec![100]], 1);
        assert_eq!(out.df, 0);
        assert_eq!(out.p_value, 1.0);

        let tiny = vec![vec![3, 2]];
        let out = uniformity_test(&tiny, 5);
        assert!(out.monte_carlo);
        assert!(out.p_value > 0.1);
    }

    #[test]
    fn pearson_examples() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![2.0, 4.0, 6.0, 8.0];
        assert!((pearson_r(&x, &y) - 1.0).abs() < 1e-12);
        let z: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &z) + 1.0).abs() < 1e-12);
        let c = vec![5.0; 4];
        assert_eq!(pearson_r(&x, &c), 0.0);
    }

    #[test]
    fn histogram_bins_cover_range() {
        let values = vec![0.0, 0.05, 0.5, 0.95, 1.0];
        let h = histogram(&values, 10, 0.0, 1.0);
        assert_eq!(h.iter().sum::<u64>(), 5);
        assert_eq!(h[0], 2);
        assert_eq!(h[5], 1);
        assert_eq!(h[9], 2);
    }
}
