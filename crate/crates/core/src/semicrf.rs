//! 0-order semi-Markov CRF inference over a segment lattice.
//!
//! A segmentation's score is the sum of its segment scores. With
//! `beta[0] = 0`,
//!
//! ```text
//! beta[j]  = logsumexp_{l <= min(L, j), y} score(j-l, j, y) + beta[j-l]
//! alpha[j] = max_{l <= min(L, j), y}       score(j-l, j, y) + alpha[j-l]
//! ```
//!
//! where `(j-l, j)` is the half-open span of a segment of length `l` ending
//! at position `j`. `beta[n]` is `log Z(x)`; the `alpha` back-pointers give
//! the best segmentation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::precondition;
use crate::graph::logsumexp_values;
use crate::{Error, Graph, NodeId, Result, Segment, Segmentation};

/// Default refusal threshold for [`enumerate_segmentations`].
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Scores for every `(start, end, label)` with `1 <= end - start <= max_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentLattice<T> {
    n: usize,
    max_len: usize,
    num_labels: usize,
    scores: Vec<Option<T>>,
}

impl<T: Copy> SegmentLattice<T> {
    pub fn new(n: usize, max_len: usize, num_labels: usize) -> Result<Self> {
        if max_len == 0 || num_labels == 0 {
            return Err(precondition("lattice needs max_len >= 1 and at least one label"));
        }
        Ok(Self {
            n,
            max_len,
            num_labels,
            scores: vec![None; n * max_len * num_labels],
        })
    }

    /// Builds a complete lattice by scoring every admissible segment.
    pub fn from_fn(
        n: usize,
        max_len: usize,
        num_labels: usize,
        mut score: impl FnMut(Segment) -> Result<T>,
    ) -> Result<Self> {
        let mut lat = Self::new(n, max_len, num_labels)?;
        for seg in lat.admissible().collect::<Vec<_>>() {
            let s = score(seg)?;
            lat.set(seg, s)?;
        }
        Ok(lat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn index(&self, seg: &Segment) -> Option<usize> {
        let len = seg.end.checked_sub(seg.start)?;
        if len == 0 || len > self.max_len || seg.end > self.n || seg.label >= self.num_labels {
            return None;
        }
        Some(((seg.end - 1) * self.max_len + (len - 1)) * self.num_labels + seg.label)
    }

    pub fn get(&self, seg: &Segment) -> Option<T> {
        self.index(seg).and_then(|i| self.scores[i])
    }

    pub fn set(&mut self, seg: Segment, score: T) -> Result<()> {
        let i = self
            .index(&seg)
            .ok_or_else(|| Error::InvalidSegmentation(format!("segment {seg} outside lattice")))?;
        self.scores[i] = Some(score);
        Ok(())
    }

    fn score(&self, seg: Segment) -> Result<T> {
        self.get(&seg)
            .ok_or_else(|| precondition(format!("lattice has no score for {seg}")))
    }

    /// Every admissible segment, ordered by end, then length, then label.
    pub fn admissible(&self) -> impl Iterator<Item = Segment> + '_ {
        (1..=self.n).flat_map(move |end| {
            (1..=self.max_len.min(end)).flat_map(move |len| {
                (0..self.num_labels).map(move |y| Segment::new(end - len, end, y))
            })
        })
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> SegmentLattice<U> {
        SegmentLattice {
            n: self.n,
            max_len: self.max_len,
            num_labels: self.num_labels,
            scores: self.scores.iter().map(|s| s.map(&mut f)).collect(),
        }
    }

    /// Sum of the member scores of a segmentation, in plain values.
    pub fn total(&self, seg: &Segmentation) -> Result<f64>
    where
        T: Into<f64>,
    {
        seg.iter().map(|s| self.score(*s).map(Into::into)).sum()
    }
}

impl SegmentLattice<NodeId> {
    /// Plain-value copy of a lattice of graph nodes.
    pub fn values(&self, g: &Graph<'_>) -> SegmentLattice<f64> {
        self.map(|id| g.scalar(id))
    }
}

/// `Psi(s) = w . S` for a segment representation `S`.
pub fn segment_score(g: &mut Graph<'_>, weight: NodeId, repr: NodeId) -> Result<NodeId> {
    g.dot(weight, repr)
}

/// Highest-scoring segmentation and its score. Ties prefer the shorter last
/// segment, then the lower label id.
pub fn viterbi(lat: &SegmentLattice<f64>) -> Result<(Segmentation, f64)> {
    if lat.n == 0 {
        return Err(precondition("viterbi on an empty sequence"));
    }
    let mut alpha = vec![f64::NEG_INFINITY; lat.n + 1];
    let mut back = vec![(0usize, 0usize); lat.n + 1];
    alpha[0] = 0.0;
    for j in 1..=lat.n {
        for l in 1..=lat.max_len.min(j) {
            for y in 0..lat.num_labels {
                let cand = lat.score(Segment::new(j - l, j, y))? + alpha[j - l];
                if cand > alpha[j] {
                    alpha[j] = cand;
                    back[j] = (l, y);
                }
            }
        }
        if alpha[j] == f64::NEG_INFINITY {
            return Err(precondition(format!("no finite path reaches position {j}")));
        }
    }
    let mut segments = Vec::new();
    let mut j = lat.n;
    while j > 0 {
        let (l, y) = back[j];
        segments.push(Segment::new(j - l, j, y));
        j -= l;
    }
    segments.reverse();
    Ok((Segmentation::new(segments), alpha[lat.n]))
}

/// Differentiable `log Z(x)`.
pub fn log_partition(g: &mut Graph<'_>, lat: &SegmentLattice<NodeId>) -> Result<NodeId> {
    if lat.n == 0 {
        return Err(precondition("log partition of an empty sequence"));
    }
    let mut beta: Vec<NodeId> = Vec::with_capacity(lat.n + 1);
    beta.push(g.constant(crate::Tensor::scalar(0.0)));
    let mut terms = Vec::new();
    for j in 1..=lat.n {
        terms.clear();
        for l in 1..=lat.max_len.min(j) {
            for y in 0..lat.num_labels {
                let s = lat.score(Segment::new(j - l, j, y))?;
                terms.push(g.add(&[s, beta[j - l]])?);
            }
        }
        let b = g.logsumexp(&terms)?;
        beta.push(b);
    }
    Ok(beta[lat.n])
}

/// `log Z(x)` on plain values.
pub fn log_partition_value(lat: &SegmentLattice<f64>) -> Result<f64> {
    if lat.n == 0 {
        return Err(precondition("log partition of an empty sequence"));
    }
    let mut beta = vec![0.0; lat.n + 1];
    let mut terms = Vec::new();
    for j in 1..=lat.n {
        terms.clear();
        for l in 1..=lat.max_len.min(j) {
            for y in 0..lat.num_labels {
                terms.push(lat.score(Segment::new(j - l, j, y))? + beta[j - l]);
            }
        }
        beta[j] = logsumexp_values(&terms);
    }
    Ok(beta[lat.n])
}

/// `log Z(x) - score(gold)`.
pub fn nll(g: &mut Graph<'_>, lat: &SegmentLattice<NodeId>, gold: &Segmentation) -> Result<NodeId> {
    gold.validate(lat.n, Some(lat.max_len), lat.num_labels)?;
    let log_z = log_partition(g, lat)?;
    let gold_scores = gold.iter().map(|s| lat.score(*s)).collect::<Result<Vec<_>>>()?;
    let gold_total = g.add(&gold_scores)?;
    let neg = g.scale(gold_total, -1.0);
    g.add(&[log_z, neg])
}

/// Number of segmentations of `n` positions with lengths `<= max_len` and
/// `num_labels` labels, saturating at `u128::MAX`.
pub fn count_segmentations(n: usize, max_len: usize, num_labels: usize) -> u128 {
    let mut counts = vec![0u128; n + 1];
    counts[0] = 1;
    for j in 1..=n {
        let mut c = 0u128;
        for l in 1..=max_len.min(j) {
            c = c.saturating_add(counts[j - l].saturating_mul(num_labels as u128));
        }
        counts[j] = c;
    }
    counts[n]
}

/// Every segmentation, for testing against the dynamic programs.
pub fn enumerate_segmentations(n: usize, max_len: usize, num_labels: usize, cap: u128) -> Result<Vec<Segmentation>> {
    let count = count_segmentations(n, max_len, num_labels);
    if count > cap {
        return Err(Error::TooManySegmentations { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut stack = Vec::new();
    fn rec(pos: usize, n: usize, max_len: usize, num_labels: usize, stack: &mut Vec<Segment>, out: &mut Vec<Segmentation>) {
        if pos == n {
            out.push(Segmentation::new(stack.clone()));
            return;
        }
        for l in 1..=max_len.min(n - pos) {
            for y in 0..num_labels {
                stack.push(Segment::new(pos, pos + l, y));
                rec(pos + l, n, max_len, num_labels, stack, out);
                stack.pop();
            }
        }
    }
    if max_len > 0 && num_labels > 0 {
        rec(0, n, max_len, num_labels, &mut stack, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn lattice_from(n: usize, l: usize, y: usize, f: impl Fn(Segment) -> f64) -> SegmentLattice<f64> {
        SegmentLattice::from_fn(n, l, y, |s| Ok(f(s))).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_segmentations(3, 3, 1, DEFAULT_ENUMERATION_CAP).unwrap().len(), 4);
        assert_eq!(enumerate_segmentations(3, 1, 1, DEFAULT_ENUMERATION_CAP).unwrap().len(), 1);
        assert_eq!(enumerate_segmentations(5, 2, 1, DEFAULT_ENUMERATION_CAP).unwrap().len(), 8);
        assert_eq!(count_segmentations(3, 3, 2), 18);
        for s in enumerate_segmentations(6, 3, 2, DEFAULT_ENUMERATION_CAP).unwrap() {
            s.validate(6, Some(3), 2).unwrap();
        }
        assert!(matches!(
            enumerate_segmentations(40, 4, 3, DEFAULT_ENUMERATION_CAP),
            Err(Error::TooManySegmentations { .. })
        ));
    }

    #[test]
    fn single_position_viterbi_picks_best_label() {
        let lat = lattice_from(1, 2, 3, |s| [0.1, 0.7, -0.2][s.label]);
        let (best, score) = viterbi(&lat).unwrap();
        assert_eq!(best.segments(), &[Segment::new(0, 1, 1)]);
        assert_eq!(score, 0.7);
    }

    #[test]
    fn viterbi_hand_scores() {
        // four segmentations of three positions:
        // [3] = 1.0; [1][2] = 0.2+0.9; [2][1] = 0.5+0.4; [1][1][1] = 0.2+0.3+0.4
        let lat = lattice_from(3, 3, 1, |s| match (s.start, s.end) {
            (0, 3) => 1.0,
            (0, 1) => 0.2,
            (1, 3) => 0.9,
            (0, 2) => 0.5,
            (2, 3) => 0.4,
            (1, 2) => 0.3,
            _ => unreachable!(),
        });
        let (best, score) = viterbi(&lat).unwrap();
        assert_eq!(best.segments(), &[Segment::new(0, 1, 0), Segment::new(1, 3, 0)]);
        assert!((score - 1.1).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_shorter_then_lower_label() {
        let lat = lattice_from(2, 2, 2, |_| 0.0);
        // [1][1] scores 0, [2] scores 0: shorter last segment wins at each step
        let (best, _) = viterbi(&lat).unwrap();
        assert_eq!(best.segments(), &[Segment::new(0, 1, 0), Segment::new(1, 2, 0)]);
    }

    #[test]
    fn partition_closed_forms() {
        let lat = lattice_from(1, 1, 2, |s| [0.3, -1.2][s.label]);
        let expect = (0.3f64.exp() + (-1.2f64).exp()).ln();
        assert!((log_partition_value(&lat).unwrap() - expect).abs() < 1e-14);

        let lat = lattice_from(3, 3, 1, |_| 0.0);
        assert!((log_partition_value(&lat).unwrap() - 4f64.ln()).abs() < 1e-14);
        let lat = lattice_from(3, 3, 2, |_| 0.0);
        assert!((log_partition_value(&lat).unwrap() - 18f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn graph_and_value_partitions_agree() {
        let mut g = Graph::new();
        let lat = SegmentLattice::from_fn(4, 2, 2, |s| {
            Ok(g.variable(Tensor::scalar(0.1 * (s.start as f64) - 0.3 * (s.label as f64) + 0.05 * s.len() as f64)))
        })
        .unwrap();
        let z = log_partition(&mut g, &lat).unwrap();
        let plain = log_partition_value(&lat.values(&g)).unwrap();
        assert!((g.scalar(z) - plain).abs() < 1e-14);
    }

    #[test]
    fn nll_edge_cases() {
        let mut g = Graph::new();
        let lat = SegmentLattice::from_fn(1, 1, 1, |_| Ok(g.variable(Tensor::scalar(2.5)))).unwrap();
        let gold = Segmentation::new(vec![Segment::new(0, 1, 0)]);
        let loss = nll(&mut g, &lat, &gold).unwrap();
        assert!(g.scalar(loss).abs() < 1e-15);

        let mut g = Graph::new();
        let lat = SegmentLattice::from_fn(3, 3, 1, |_| Ok(g.variable(Tensor::scalar(0.0)))).unwrap();
        for gold in enumerate_segmentations(3, 3, 1, 100).unwrap() {
            let loss = nll(&mut g, &lat, &gold).unwrap();
            assert!((g.scalar(loss) - 4f64.ln()).abs() < 1e-14);
        }
        let bad = Segmentation::new(vec![Segment::new(0, 2, 0)]);
        assert!(matches!(nll(&mut g, &lat, &bad), Err(Error::InvalidSegmentation(_))));
    }

    #[test]
    fn empty_sequence_rejected() {
        let lat = SegmentLattice::<f64>::new(0, 2, 1).unwrap();
        assert!(viterbi(&lat).is_err());
        assert!(log_partition_value(&lat).is_err());
    }

    #[test]
    fn segment_score_bilinear() {
        let mut g = Graph::new();
        let w = g.variable(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let s = g.variable(Tensor::vector(vec![0.4, 0.9, 1.5]));
        let score = segment_score(&mut g, w, s).unwrap();
        assert_eq!(g.scalar(score), 0.9);
        g.backward(score).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[0.4, 0.9, 1.5]);
        let zero = g.constant(Tensor::zeros(&[3]));
        let score = segment_score(&mut g, zero, s).unwrap();
        assert_eq!(g.scalar(score), 0.0);
    }
}
