//! Schedule-independence, seeded reproducibility, and test calibration
//! checked end to end. Everything here must hold bit-for-bit: the parallel
//! and sequential paths are alternative schedules of the same arithmetic.

mod common;

use modalx_core::frame::parse_frame;
use modalx_core::group::{orbit_partition, stabilizer};
use modalx_core::measure::{exact_hier_measure, symmetrize, symmetrize_seq, AtomSet};
use modalx_core::sampler::{
    empirical_distribution, sample_replicates, sample_replicates_seq, Coupling, DirectingMeasure,
    HierarchicalSpec, OrbitPrior,
};
use modalx_core::verify::{test_exchangeability, test_invariance_mc, test_rigidity};

fn cluster_orbits(frame: &modalx_core::frame::Frame) -> modalx_core::group::OrbitPartition {
    let g = stabilizer(frame);
    let cluster = frame.accessible_cluster(frame.designated()).unwrap();
    orbit_partition(&g, &cluster.without(frame.designated())).unwrap()
}

#[test]
fn symmetrize_parallel_equals_sequential_bitwise() {
    // 6 worlds, 2 atoms: 4096 entries averaged over 120 group elements.
    let frame = common::universal(5);
    let g = stabilizer(&frame);
    assert_eq!(g.order().to_string(), "120");
    for seed in 0..5u64 {
        let p = common::random_measure(6, 2, 0xD15C + seed);
        let par = symmetrize(&p, &g).unwrap();
        let seq = symmetrize_seq(&p, &g).unwrap();
        for (a, b) in par.probabilities().iter().zip(seq.probabilities()) {
            assert_eq!(a.to_bits(), b.to_bits(), "seed {seed}");
        }
    }
}

#[test]
fn sampling_parallel_equals_sequential_bitwise() {
    let frame = parse_frame(common::EXAMPLE2).unwrap();
    let partition = cluster_orbits(&frame);
    let spec = HierarchicalSpec::new(
        AtomSet::new(vec!["p".into(), "q".into()]).unwrap(),
        vec![
            OrbitPrior::BetaPerAtom(vec![(2.0, 5.0), (0.5, 0.5)]),
            OrbitPrior::Dirichlet(vec![1.0, 2.0, 3.0, 4.0]),
        ],
        DirectingMeasure::BernoulliProduct(vec![0.5, 0.5]),
        Coupling::Independent,
    )
    .unwrap();
    let par = sample_replicates(&spec, &partition, 6, 5_000, 0xFACE).unwrap();
    let seq = sample_replicates_seq(&spec, &partition, 6, 5_000, 0xFACE).unwrap();
    assert_eq!(par, seq);
    assert_eq!(par.fingerprint(), seq.fingerprint());
}

#[test]
fn dataset_csv_rewrite_is_byte_stable() {
    let frame = parse_frame(common::EXAMPLE2).unwrap();
    let partition = cluster_orbits(&frame);
    let spec = HierarchicalSpec::new(
        AtomSet::new(vec!["p".into()]).unwrap(),
        vec![
            OrbitPrior::BetaPerAtom(vec![(1.0, 1.0)]),
            OrbitPrior::Point(DirectingMeasure::BernoulliProduct(vec![0.3])),
        ],
        DirectingMeasure::BernoulliProduct(vec![0.5]),
        Coupling::Independent,
    )
    .unwrap();
    let data = sample_replicates(&spec, &partition, 6, 200, 42).unwrap();
    let mut first = Vec::new();
    data.write_csv(&mut first).unwrap();
    let reread = modalx_core::sampler::Dataset::read_csv(first.as_slice()).unwrap();
    let mut second = Vec::new();
    reread.write_csv(&mut second).unwrap();
    assert_eq!(first, second);
}

/// Over 100 fresh seeds under a correct sampler, each test family must pass
/// at least 1 - 2*alpha of the time. Bonferroni makes each family's type-I
/// rate at most alpha, so 98 of 100 leaves honest slack at alpha = 0.01.
#[test]
fn test_families_are_calibrated_under_the_null() {
    let frame = parse_frame(common::EXAMPLE2).unwrap();
    let g = stabilizer(&frame);
    let partition = cluster_orbits(&frame);
    let spec = HierarchicalSpec::new(
        AtomSet::new(vec!["p".into()]).unwrap(),
        vec![
            OrbitPrior::FiniteMixture(vec![
                (0.5, DirectingMeasure::BernoulliProduct(vec![0.2])),
                (0.5, DirectingMeasure::BernoulliProduct(vec![0.8])),
            ]),
            OrbitPrior::BetaPerAtom(vec![(2.0, 2.0)]),
        ],
        DirectingMeasure::BernoulliProduct(vec![0.5]),
        Coupling::Independent,
    )
    .unwrap();
    let alpha = 0.01;
    let reps = 100;
    let mut rigidity_ok = 0;
    let mut exchangeability_ok = 0;
    let mut invariance_ok = 0;
    for rep in 0..reps {
        let data =
            sample_replicates(&spec, &partition, 6, 5_000, 0xCA11 + rep as u64).unwrap();
        if test_rigidity(&data, &partition, alpha).unwrap().pass {
            rigidity_ok += 1;
        }
        if test_exchangeability(&data, &partition.blocks()[0], 2, alpha)
            .unwrap()
            .pass
        {
            exchangeability_ok += 1;
        }
        if test_invariance_mc(&data, g.generators(), &[1, 2], alpha)
            .unwrap()
            .pass
        {
            invariance_ok += 1;
        }
    }
    let floor = (reps as f64 * (1.0 - 2.0 * alpha)) as usize;
    assert!(rigidity_ok >= floor, "rigidity passed {rigidity_ok}/{reps}");
    assert!(
        exchangeability_ok >= floor,
        "exchangeability passed {exchangeability_ok}/{reps}"
    );
    assert!(invariance_ok >= floor, "invariance passed {invariance_ok}/{reps}");
}

/// Ten random finitely supported specs: the streaming histogram must track
/// the exact measure. Bounds are loose (n = 20k per spec); the tight
/// agreement check lives in the acceptance suite.
#[test]
fn empirical_histograms_track_exact_measures() {
    let frame = parse_frame(
        "frame three\nworld w0\nworld a1\nworld a2\ndesignated w0\nedge * *\nend\n",
    )
    .unwrap();
    let partition = cluster_orbits(&frame);
    let mut state = 0x5EEDu64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for case in 0..10 {
        let w = 0.1 + 0.8 * next();
        let spec = HierarchicalSpec::new(
            AtomSet::new(vec!["p".into()]).unwrap(),
            vec![OrbitPrior::FiniteMixture(vec![
                (w, DirectingMeasure::BernoulliProduct(vec![next()])),
                (1.0 - w, DirectingMeasure::BernoulliProduct(vec![next()])),
            ])],
            DirectingMeasure::BernoulliProduct(vec![next()]),
            Coupling::Independent,
        )
        .unwrap();
        let exact = exact_hier_measure(&spec, &partition, 3).unwrap();
        let n = 20_000;
        let hist =
            empirical_distribution(&spec, &partition, 3, n, 0x7E57 + case as u64).unwrap();
        let tv: f64 = hist
            .iter()
            .zip(exact.probabilities())
            .map(|(&c, p)| (c as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "case {case}: total variation {tv}");
    }
}
