//! Dynamic programs against exhaustive enumeration.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrep_core::graph::logsumexp_values;
use segrep_core::semicrf::{
    count_segmentations, enumerate_segmentations, log_partition, log_partition_value, nll, viterbi, SegmentLattice,
    DEFAULT_ENUMERATION_CAP,
};
use segrep_core::{Graph, NodeId, Segment, Segmentation, Tensor};

/// Independent enumeration: every way to cut `0..n` into labeled pieces.
fn all_segmentations(n: usize, max_len: usize, labels: usize) -> Vec<Vec<Segment>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for l in 1..=max_len.min(n) {
        for prefix in all_segmentations(n - l, max_len, labels) {
            for y in 0..labels {
                let mut s = prefix.clone();
                s.push(Segment::new(n - l, n, y));
                out.push(s);
            }
        }
    }
    out
}

fn random_lattice(n: usize, max_len: usize, labels: usize, seed: u64) -> SegmentLattice<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SegmentLattice::from_fn(n, max_len, labels, |_| Ok(rng.gen_range(-2.0..2.0))).unwrap()
}

fn total(lat: &SegmentLattice<f64>, segs: &[Segment]) -> f64 {
    segs.iter().map(|s| lat.get(s).unwrap()).sum()
}

fn graph_lattice(g: &mut Graph<'_>, lat: &SegmentLattice<f64>) -> SegmentLattice<NodeId> {
    lat.map(|v| g.variable(Tensor::scalar(v)))
}

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=7, 1usize..=4, 1usize..=3, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_agrees((n, l, y, _) in shape()) {
        let mine = all_segmentations(n, l, y);
        let lib = enumerate_segmentations(n, l, y, DEFAULT_ENUMERATION_CAP).unwrap();
        prop_assert_eq!(mine.len() as u128, count_segmentations(n, l, y));
        prop_assert_eq!(lib.len(), mine.len());
        for s in &lib {
            prop_assert!(s.validate(n, Some(l), y).is_ok());
        }
    }

    #[test]
    fn partition_and_viterbi_match_brute_force((n, l, y, seed) in shape()) {
        let lat = random_lattice(n, l, y, seed);
        let segs = all_segmentations(n, l, y);
        let totals: Vec<f64> = segs.iter().map(|s| total(&lat, s)).collect();
        let brute_z = logsumexp_values(&totals);
        let z = log_partition_value(&lat).unwrap();
        prop_assert!((z - brute_z).abs() <= 1e-9 * brute_z.abs().max(1.0));

        let mut g = Graph::new();
        let glat = graph_lattice(&mut g, &lat);
        let gz = log_partition(&mut g, &glat).unwrap();
        prop_assert!((g.scalar(gz) - z).abs() <= 1e-12 * z.abs().max(1.0));

        let best = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let arg = totals.iter().position(|t| *t == best).unwrap();
        let (seg, score) = viterbi(&lat).unwrap();
        prop_assert!((score - best).abs() < 1e-10);
        prop_assert_eq!(seg, Segmentation::new(segs[arg].clone()));
    }

    #[test]
    fn nll_normalizes_and_is_nonnegative((n, l, y, seed) in shape()) {
        let lat = random_lattice(n, l, y, seed);
        let mut mass = 0.0;
        for s in all_segmentations(n, l, y) {
            let mut g = Graph::new();
            let glat = graph_lattice(&mut g, &lat);
            let loss = nll(&mut g, &glat, &Segmentation::new(s)).unwrap();
            let v = g.scalar(loss);
            prop_assert!(v >= -1e-10);
            mass += (-v).exp();
        }
        prop_assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_is_marginal_minus_gold((n, l, y, seed) in shape(), pick in any::<prop::sample::Index>()) {
        let lat = random_lattice(n, l, y, seed);
        let segs = all_segmentations(n, l, y);
        let gold = segs[pick.index(segs.len())].clone();
        let totals: Vec<f64> = segs.iter().map(|s| total(&lat, s)).collect();
        let log_z = logsumexp_values(&totals);

        let mut g = Graph::new();
        let glat = graph_lattice(&mut g, &lat);
        let loss = nll(&mut g, &glat, &Segmentation::new(gold.clone())).unwrap();
        g.backward(loss).unwrap();
        for seg in lat.admissible() {
            let marginal: f64 = segs
                .iter()
                .zip(&totals)
                .filter(|(s, _)| s.contains(&seg))
                .map(|(_, t)| (t - log_z).exp())
                .sum();
            let indicator = if gold.contains(&seg) { 1.0 } else { 0.0 };
            let grad = g.grad(glat.get(&seg).unwrap()).map_or(0.0, |d| d[0]);
            prop_assert!((grad - (marginal - indicator)).abs() < 1e-8, "{seg}: {grad} vs {}", marginal - indicator);
        }
    }

    #[test]
    fn constant_shift((n, l, y, seed) in shape(), c in -3.0f64..3.0) {
        let lat = random_lattice(n, l, y, seed);
        let shifted = lat.map(|v| v + c);
        for s in all_segmentations(n, l, y) {
            let d = total(&shifted, &s) - total(&lat, &s);
            prop_assert!((d - c * s.len() as f64).abs() < 1e-9);
        }
        let single = random_lattice(n, 1, y, seed);
        let (a, _) = viterbi(&single).unwrap();
        let (b, _) = viterbi(&single.map(|v| v + c)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn logsumexp_properties(xs in prop::collection::vec(-50.0f64..50.0, 1..8), c in -100.0f64..100.0) {
        let base = logsumexp_values(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((logsumexp_values(&shifted) - (base + c)).abs() < 1e-12 * (1.0 + base.abs() + c.abs()));
        prop_assert!(base >= xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn cap_refuses_large_enumerations() {
    assert!(enumerate_segmentations(30, 4, 3, DEFAULT_ENUMERATION_CAP).is_err());
}
