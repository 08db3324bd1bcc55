//! Statistical and exact verification of the construction's observable
//! consequences on sampled data, plus directing-measure estimation and
//! conjugate posterior updating.
//!
//! Every test is a diagnostic, not a proof: reports carry the statistic,
//! the null description, the p-value or deviation, and the seed used for
//! any resampling, so a verdict can be replayed exactly.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::frame::WorldSet;
use crate::group::OrbitPartition;
use crate::perm::Permutation;
use crate::sampler::{Dataset, DirectingMeasure};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("orbit has {got} worlds, need at least {need}")]
    OrbitTooSmall { need: usize, got: usize },
    #[error("tuple size {0} not supported (max 3)")]
    TupleTooLarge(usize),
    #[error("dataset records no latents")]
    NoLatents,
    #[error("block index {0} out of range")]
    BadBlock(usize),
    #[error("world index {index} out of range for {count} worlds")]
    WorldOutOfRange { index: usize, count: usize },
    #[error("atom index {0} out of range")]
    BadAtom(usize),
}

/// Outcome of one statistical check, with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub null_description: String,
    pub p_value: Option<f64>,
    pub deviation: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub sample_size: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl TestReport {
    fn from_p(
        test: &str,
        statistic: f64,
        null_description: String,
        p_value: f64,
        threshold: f64,
        sample_size: usize,
        seed: u64,
    ) -> TestReport {
        TestReport {
            test: test.to_string(),
            statistic,
            null_description,
            p_value: Some(p_value),
            deviation: None,
            threshold,
            pass: p_value >= threshold,
            sample_size,
            seed,
            notes: Vec::new(),
        }
    }

    fn from_deviation(
        test: &str,
        statistic: f64,
        null_description: String,
        deviation: f64,
        tolerance: f64,
        sample_size: usize,
        seed: u64,
    ) -> TestReport {
        TestReport {
            test: test.to_string(),
            statistic,
            null_description,
            p_value: None,
            deviation: Some(deviation),
            threshold: tolerance,
            pass: deviation <= tolerance,
            sample_size,
            seed,
            notes: Vec::new(),
        }
    }

    fn vacuous(test: &str, note: &str, sample_size: usize, seed: u64) -> TestReport {
        TestReport {
            test: test.to_string(),
            statistic: 0.0,
            null_description: "vacuous".to_string(),
            p_value: None,
            deviation: Some(0.0),
            threshold: 0.0,
            pass: true,
            sample_size,
            seed,
            notes: vec![note.to_string()],
        }
    }
}

fn outcome_count(data: &Dataset) -> usize {
    1usize << data.atom_count
}

fn check_world(data: &Dataset, w: usize) -> Result<(), VerifyError> {
    if w >= data.world_count {
        return Err(VerifyError::WorldOutOfRange {
            index: w,
            count: data.world_count,
        });
    }
    Ok(())
}

/// Per-world outcome counts over replicates, one row per world of the set.
fn world_outcome_counts(data: &Dataset, worlds: &[usize]) -> Vec<Vec<u64>> {
    let cols = outcome_count(data);
    let mut rows = vec![vec![0u64; cols]; worlds.len()];
    for rep in &data.replicates {
        for (i, &w) in worlds.iter().enumerate() {
            rows[i][rep.valuation.outcome(w)] += 1;
        }
    }
    rows
}

/// Chi-square homogeneity of per-world outcome frequencies within each
/// orbit, Bonferroni-corrected across orbits. The construction forces one
/// common law per orbit, so this is its first observable consequence.
pub fn test_rigidity(
    data: &Dataset,
    partition: &OrbitPartition,
    alpha: f64,
) -> Result<TestReport, VerifyError> {
    if data.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    let testable: Vec<&WorldSet> = partition.blocks().iter().filter(|b| b.len() >= 2).collect();
    if testable.is_empty() {
        return Ok(TestReport::vacuous(
            "rigidity",
            "all orbits are singletons; homogeneity holds trivially",
            data.len(),
            data.seed,
        ));
    }
    for block in &testable {
        for w in block.iter() {
            check_world(data, w)?;
        }
    }
    let threshold = alpha / testable.len() as f64;
    let mut min_p = f64::INFINITY;
    let mut stat_at_min = 0.0;
    let mut any_mc = false;
    for (i, block) in testable.iter().enumerate() {
        let rows = world_outcome_counts(data, block.indices());
        let out = stats::homogeneity_test(&rows, data.seed ^ (0x5167 + i as u64));
        any_mc |= out.monte_carlo;
        if out.p_value < min_p {
            min_p = out.p_value;
            stat_at_min = out.statistic;
        }
    }
    let mut report = TestReport::from_p(
        "rigidity",
        stat_at_min,
        format!(
            "chi-square homogeneity of outcome frequencies across worlds, per orbit; min p over {} orbits vs alpha/{} (Bonferroni)",
            testable.len(),
            testable.len()
        ),
        min_p,
        threshold,
        data.len(),
        data.seed,
    );
    if any_mc {
        report.notes.push("Monte Carlo null used for small expected counts".into());
    }
    Ok(report)
}

fn tuple_index(data: &Dataset, rep: usize, worlds: &[usize]) -> usize {
    let k = data.atom_count;
    let mut idx = 0usize;
    for (pos, &w) in worlds.iter().enumerate() {
        idx |= data.replicates[rep].valuation.outcome(w) << (k * pos);
    }
    idx
}

/// Multiset-equivalence classes of packed outcome tuples: cells that an
/// exchangeable law must weight equally.
fn tuple_classes(m: usize, k: usize) -> Vec<Vec<usize>> {
    let cells = 1usize << (k * m);
    let mask = (1usize << k) - 1;
    let mut by_class: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for cell in 0..cells {
        let mut outcomes: Vec<usize> = (0..m).map(|pos| (cell >> (k * pos)) & mask).collect();
        outcomes.sort_unstable();
        by_class.entry(outcomes).or_default().push(cell);
    }
    by_class.into_values().collect()
}

fn subsets_capped(orbit: &[usize], m: usize, cap: usize, seed: u64) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, m, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    rec(orbit, m, 0, &mut Vec::new(), &mut all);
    if all.len() <= cap {
        return all;
    }
    // Deterministic thinning: keep a seeded pseudo-random subset.
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5b5e7);
    all.shuffle(&mut rng);
    all.truncate(cap);
    all.sort();
    all
}

/// Tests permutation invariance of m-tuple outcome distributions within one
/// orbit: counts of outcome tuples must be uniform within each multiset
/// class. m = 1 reduces to per-world homogeneity.
pub fn test_exchangeability(
    data: &Dataset,
    orbit: &WorldSet,
    m: usize,
    alpha: f64,
) -> Result<TestReport, VerifyError> {
    if data.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    if m == 0 || m > 3 {
        return Err(VerifyError::TupleTooLarge(m));
    }
    if orbit.len() < m {
        return Err(VerifyError::OrbitTooSmall {
            need: m,
            got: orbit.len(),
        });
    }
    for w in orbit.iter() {
        check_world(data, w)?;
    }
    if m == 1 {
        let partition = OrbitPartition::from_blocks(vec![orbit.clone()])
            .expect("one block is a partition");
        let mut report = test_rigidity(data, &partition, alpha)?;
        report.test = "exchangeability".into();
        report.notes.push("m = 1 reduces to rigidity".into());
        return Ok(report);
    }
    let subsets = subsets_capped(orbit.indices(), m, 20, data.seed);
    let classes = tuple_classes(m, data.atom_count);
    let threshold = alpha / subsets.len() as f64;
    let mut min_p = f64::INFINITY;
    let mut stat_at_min = 0.0;
    let mut any_mc = false;
    for (i, subset) in subsets.iter().enumerate() {
        let mut cell_counts = vec![0u64; 1usize << (data.atom_count * m)];
        for rep in 0..data.len() {
            cell_counts[tuple_index(data, rep, subset)] += 1;
        }
        let grouped: Vec<Vec<u64>> = classes
            .iter()
            .map(|class| class.iter().map(|&c| cell_counts[c]).collect())
            .collect();
        let out = stats::uniformity_test(&grouped, data.seed ^ (0xe8c4 + i as u64));
        any_mc |= out.monte_carlo;
        if out.p_value < min_p {
            min_p = out.p_value;
            stat_at_min = out.statistic;
        }
    }
    let mut report = TestReport::from_p(
        "exchangeability",
        stat_at_min,
        format!(
            "uniformity of {m}-tuple outcome counts within multiset classes; min p over {} tuples vs alpha/{} (Bonferroni)",
            subsets.len(),
            subsets.len()
        ),
        min_p,
        threshold,
        data.len(),
        data.seed,
    );
    if any_mc {
        report.notes.push("Monte Carlo null used for small expected counts".into());
    }
    Ok(report)
}

/// Split-half two-sample test per generator: the law of the projection at
/// chosen worlds against the law at their preimages. Even replicates feed
/// the first sample, odd the second, so the samples are independent.
pub fn test_invariance_mc(
    data: &Dataset,
    generators: &[Permutation],
    projection: &[usize],
    alpha: f64,
) -> Result<TestReport, VerifyError> {
    if data.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    if projection.is_empty() || projection.len() > 3 {
        return Err(VerifyError::TupleTooLarge(projection.len()));
    }
    for &w in projection {
        check_world(data, w)?;
    }
    let gens: Vec<&Permutation> = generators.iter().filter(|g| !g.is_identity()).collect();
    if gens.is_empty() {
        return Ok(TestReport::vacuous(
            "invariance",
            "no nontrivial generators; invariance holds trivially",
            data.len(),
            data.seed,
        ));
    }
    let cells = 1usize << (data.atom_count * projection.len());
    let threshold = alpha / gens.len() as f64;
    let mut min_p = f64::INFINITY;
    let mut stat_at_min = 0.0;
    let mut any_mc = false;
    for (i, g) in gens.iter().enumerate() {
        if g.degree() != data.world_count {
            return Err(VerifyError::WorldOutOfRange {
                index: g.degree(),
                count: data.world_count,
            });
        }
        let inv = g.inverse();
        let moved: Vec<usize> = projection.iter().map(|&w| inv.apply(w)).collect();
        let mut at_worlds = vec![0u64; cells];
        let mut at_preimages = vec![0u64; cells];
        for rep in 0..data.len() {
            if rep % 2 == 0 {
                at_worlds[tuple_index(data, rep, projection)] += 1;
            } else {
                at_preimages[tuple_index(data, rep, &moved)] += 1;
            }
        }
        let out = stats::two_sample_test(&at_worlds, &at_preimages, data.seed ^ (0x1e7a + i as u64));
        any_mc |= out.monte_carlo;
        if out.p_value < min_p {
            min_p = out.p_value;
            stat_at_min = out.statistic;
        }
    }
    let mut report = TestReport::from_p(
        "invariance",
        stat_at_min,
        format!(
            "split-half two-sample chi-square of the projection law vs its generator-moved law; min p over {} generators vs alpha/{} (Bonferroni)",
            gens.len(),
            gens.len()
        ),
        min_p,
        threshold,
        data.len(),
        data.seed,
    );
    if any_mc {
        report.notes.push("Monte Carlo null used for small expected counts".into());
    }
    Ok(report)
}

/// Per-replicate empirical surrogate of the directing measure on one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectingEstimate {
    /// [replicate][atom]: within-replicate frequency of the atom across the
    /// orbit's worlds.
    pub atom_freqs: Vec<Vec<f64>>,
    pub bins: usize,
    /// [atom][bin]: histogram of the per-replicate frequencies over [0,1].
    pub histograms: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BimodalSummary {
    pub low_mass: f64,
    pub low_mean: f64,
    pub low_mode: f64,
    pub high_mass: f64,
    pub high_mean: f64,
    pub high_mode: f64,
}

impl DirectingEstimate {
    /// Splits replicate frequencies of one atom at 1/2 and summarizes both
    /// clusters: mass, mean, and histogram mode.
    pub fn bimodal_summary(&self, atom: usize) -> BimodalSummary {
        let freqs: Vec<f64> = self.atom_freqs.iter().map(|f| f[atom]).collect();
        let n = freqs.len() as f64;
        let low: Vec<f64> = freqs.iter().copied().filter(|&f| f < 0.5).collect();
        let high: Vec<f64> = freqs.iter().copied().filter(|&f| f >= 0.5).collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let hist = &self.histograms[atom];
        let half = self.bins / 2;
        let center = |bin: usize| (bin as f64 + 0.5) / self.bins as f64;
        let argmax = |range: std::ops::Range<usize>| {
            range
                .clone()
                .max_by_key(|&b| hist[b])
                .map(center)
                .unwrap_or(f64::NAN)
        };
        BimodalSummary {
            low_mass: low.len() as f64 / n,
            low_mean: mean(&low),
            low_mode: argmax(0..half),
            high_mass: high.len() as f64 / n,
            high_mean: mean(&high),
            high_mode: argmax(half..self.bins),
        }
    }
}

/// Within-replicate atom frequencies across one orbit, plus histograms over
/// replicates. With a size-1 orbit the frequencies are the raw bits.
pub fn estimate_directing(
    data: &Dataset,
    orbit: &WorldSet,
) -> Result<DirectingEstimate, VerifyError> {
    if data.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    if orbit.is_empty() {
        return Err(VerifyError::OrbitTooSmall { need: 1, got: 0 });
    }
    for w in orbit.iter() {
        check_world(data, w)?;
    }
    let k = data.atom_count;
    let size = orbit.len() as f64;
    let mut atom_freqs = Vec::with_capacity(data.len());
    for rep in &data.replicates {
        let mut freqs = vec![0.0f64; k];
        for w in orbit.iter() {
            let o = rep.valuation.outcome(w);
            for (l, slot) in freqs.iter_mut().enumerate() {
                if (o >> l) & 1 == 1 {
                    *slot += 1.0;
                }
            }
        }
        for f in &mut freqs {
            *f /= size;
        }
        atom_freqs.push(freqs);
    }
    let bins = 50;
    let histograms: Vec<Vec<u64>> = (0..k)
        .map(|l| {
            let values: Vec<f64> = atom_freqs.iter().map(|f| f[l]).collect();
            stats::histogram(&values, bins, 0.0, 1.0)
        })
        .collect();
    Ok(DirectingEstimate {
        atom_freqs,
        bins,
        histograms,
    })
}

fn latent_theta(dm: &DirectingMeasure, atom: usize, atom_count: usize) -> f64 {
    match dm {
        DirectingMeasure::BernoulliProduct(theta) => theta[atom],
        DirectingMeasure::Full(p) => {
            let _ = atom_count;
            p.iter()
                .enumerate()
                .filter(|(o, _)| (o >> atom) & 1 == 1)
                .map(|(_, &x)| x)
                .sum()
        }
    }
}

/// One chance bin of the calibration table: how often the atom came true at
/// the orbit's worlds among replicates whose recorded chance fell in the bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub replicates: u64,
    pub observations: u64,
    pub mean_theta: f64,
    pub frequency: f64,
}

/// Bins replicates by the recorded latent chance of `atom` in `block` and
/// tallies the empirical frequency per bin. Empty bins carry NaN summaries.
pub fn calibration_table(
    data: &Dataset,
    partition: &OrbitPartition,
    block: usize,
    atom: usize,
    bins: usize,
) -> Result<Vec<CalibrationBin>, VerifyError> {
    if data.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    let orbit = partition
        .blocks()
        .get(block)
        .ok_or(VerifyError::BadBlock(block))?;
    if atom >= data.atom_count {
        return Err(VerifyError::BadAtom(atom));
    }
    if data.replicates.iter().any(|r| r.latents.len() <= block) {
        return Err(VerifyError::NoLatents);
    }
    for w in orbit.iter() {
        check_world(data, w)?;
    }
    let mut bin_theta_sum = vec![0.0f64; bins];
    let mut bin_success = vec![0u64; bins];
    let mut bin_reps = vec![0u64; bins];
    for rep in &data.replicates {
        let theta = latent_theta(&rep.latents[block], atom, data.atom_count);
        let bin = ((theta * bins as f64) as usize).min(bins - 1);
        bin_theta_sum[bin] += theta;
        bin_reps[bin] += 1;
        for w in orbit.iter() {
            if (rep.valuation.outcome(w) >> atom) & 1 == 1 {
                bin_success[bin] += 1;
            }
        }
    }
    Ok((0..bins)
        .map(|b| {
            let observations = bin_reps[b] * orbit.len() as u64;
            CalibrationBin {
                replicates: bin_reps[b],
                observations,
                mean_theta: bin_theta_sum[b] / bin_reps[b] as f64,
                frequency: bin_success[b] as f64 / observations as f64,
            }
        })
        .collect())
}

/// Calibration check: bin replicates by the recorded latent chance of the
/// atom, then compare each bin's empirical within-orbit frequency to the
/// bin's mean latent. Bins with too few observations are skipped with a
/// note; if every bin is skipped the verdict is a pass with a warning.
pub fn test_principal_principle(
    data: &Dataset,
    partition: &OrbitPartition,
    block: usize,
    atom: usize,
    bins: usize,
    tol: f64,
    min_bin_obs: usize,
) -> Result<TestReport, VerifyError> {
    let table = calibration_table(data, partition, block, atom, bins)?;
    let mut max_dev = 0.0f64;
    let mut skipped = 0usize;
    let mut used = 0usize;
    for bin in &table {
        if (bin.observations as usize) < min_bin_obs {
            if bin.replicates > 0 {
                skipped += 1;
            }
            continue;
        }
        used += 1;
        max_dev = max_dev.max((bin.frequency - bin.mean_theta).abs());
    }
    let mut report = if used == 0 {
        TestReport::vacuous(
            "principal-principle",
            "every bin fell below the observation floor",
            data.len(),
            data.seed,
        )
    } else {
        TestReport::from_deviation(
            "principal-principle",
            max_dev,
            format!(
                "per-bin |empirical frequency - mean recorded chance| over {used} populated bins"
            ),
            max_dev,
            tol,
            data.len(),
            data.seed,
        )
    };
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} bins below the {min_bin_obs}-observation floor skipped"));
    }
    Ok(report)
}

/// Per-orbit, per-atom Beta shapes for the Bernoulli-product model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorState {
    /// [block][atom] -> (a, b)
    pub shapes: Vec<Vec<(f64, f64)>>,
}

impl PosteriorState {
    pub fn uniform(block_count: usize, atom_count: usize) -> PosteriorState {
        PosteriorState {
            shapes: vec![vec![(1.0, 1.0); atom_count]; block_count],
        }
    }

    pub fn shape(&self, block: usize, atom: usize) -> (f64, f64) {
        self.shapes[block][atom]
    }

    /// Posterior mean of the atom's chance in the block.
    pub fn mean(&self, block: usize, atom: usize) -> f64 {
        let (a, b) = self.shapes[block][atom];
        a / (a + b)
    }
}

/// Conjugate Beta update: per block and atom, a += successes observed at the
/// block's worlds, b += failures. `observed` restricts which worlds count;
/// blocks with no observed worlds come back exactly unchanged, so learning
/// never leaks across orbits.
pub fn posterior_update(
    data: &Dataset,
    partition: &OrbitPartition,
    prior: &PosteriorState,
    observed: Option<&WorldSet>,
) -> Result<PosteriorState, VerifyError> {
    if prior.shapes.len() != partition.blocks().len() {
        return Err(VerifyError::BadBlock(prior.shapes.len()));
    }
    let mut post = prior.clone();
    for (b, block) in partition.blocks().iter().enumerate() {
        let worlds: Vec<usize> = block
            .iter()
            .filter(|&w| observed.map_or(true, |o| o.contains(w)))
            .collect();
        if worlds.is_empty() {
            continue;
        }
        for &w in &worlds {
            check_world(data, w)?;
        }
        for rep in &data.replicates {
            for &w in &worlds {
                let o = rep.valuation.outcome(w);
                for (l, shape) in post.shapes[b].iter_mut().enumerate() {
                    if (o >> l) & 1 == 1 {
                        shape.0 += 1.0;
                    } else {
                        shape.1 += 1.0;
                    }
                }
            }
        }
    }
    Ok(post)
}

/// Pearson correlation of within-replicate frequencies between two orbits,
/// with side-by-side marginal summaries. Distinct marginals are legal and
/// only flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossOrbitReport {
    pub correlation: f64,
    pub mean_freq_a: f64,
    pub mean_freq_b: f64,
    pub distinct_marginals: bool,
    pub sample_size: usize,
}

pub fn cross_orbit_report(
    data: &Dataset,
    orbit_a: &WorldSet,
    orbit_b: &WorldSet,
    atom: usize,
) -> Result<CrossOrbitReport, VerifyError> {
    if atom >= data.atom_count {
        return Err(VerifyError::BadAtom(atom));
    }
    let est_a = estimate_directing(data, orbit_a)?;
    let est_b = estimate_directing(data, orbit_b)?;
    let fa: Vec<f64> = est_a.atom_freqs.iter().map(|f| f[atom]).collect();
    let fb: Vec<f64> = est_b.atom_freqs.iter().map(|f| f[atom]).collect();
    let r = stats::pearson_r(&fa, &fb);
    let mean_a = fa.iter().sum::<f64>() / fa.len() as f64;
    let mean_b = fb.iter().sum::<f64>() / fb.len() as f64;
    // Informational: flag means further apart than sampling noise alone
    // would plausibly put them.
    let n = fa.len() as f64;
    let spread = (mean_a * (1.0 - mean_a) / n).sqrt() + (mean_b * (1.0 - mean_b) / n).sqrt();
    Ok(CrossOrbitReport {
        correlation: r,
        mean_freq_a: mean_a,
        mean_freq_b: mean_b,
        distinct_marginals: (mean_a - mean_b).abs() > 5.0 * spread.max(1e-6),
        sample_size: fa.len(),
    })
}
