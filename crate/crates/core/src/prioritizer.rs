//! Demand ordering: urgency classes first, profit segments inside each
//! class, random shuffles inside each segment.
//!
//! Segmentation is greedy and anchored at the segment maximum: requests are
//! sorted by descending profit and a new segment starts whenever appending
//! the next request would stretch the segment's profit diameter past
//! `epsilon_v`. Every emitted segment therefore satisfies the diameter bound
//! `|v_r - v_r'| <= epsilon_v` for all members.

use crate::scenario::{ODRequest, Urgency};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrioritySpec {
    /// Profit segmentation threshold.
    pub epsilon_v: f64,
    /// Number of shuffled sequences to draw (clamped to the arrangement count).
    pub k: usize,
    pub rng_seed: u64,
}

impl Default for PrioritySpec {
    fn default() -> Self {
        PrioritySpec {
            epsilon_v: 1000.0,
            k: 1,
            rng_seed: 0,
        }
    }
}

/// One ordering of the demand, with the segment structure that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ODSequence {
    pub ids: Vec<String>,
    /// End index (exclusive) of each segment block, cumulative over the
    /// whole sequence; shuffles only permute ids inside these blocks.
    pub segment_bounds: Vec<usize>,
}

/// Number of orderings consistent with the priority structure: the product
/// of the factorials of the segment sizes. Saturates at `u128::MAX` with
/// `exact` cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArrangementCount {
    pub count: u128,
    pub exact: bool,
}

/// Sequences drawn for one spec. `contains_duplicates` is set when distinct
/// sequences could not be found within the rejection-sampling budget.
#[derive(Debug, Clone)]
pub struct SequenceSet {
    pub sequences: Vec<ODSequence>,
    pub arrangements: ArrangementCount,
    pub contains_duplicates: bool,
}

/// Stable partition into the four urgency classes, most urgent first.
pub fn group_by_urgency(requests: &[ODRequest]) -> [Vec<&ODRequest>; 4] {
    let mut out: [Vec<&ODRequest>; 4] = Default::default();
    for r in requests {
        let slot = Urgency::ALL.iter().position(|u| *u == r.urgency).unwrap();
        out[slot].push(r);
    }
    out
}

/// Sorts one urgency class by descending profit (ties by id) and splits it
/// greedily into maximal runs whose profit diameter stays within `epsilon_v`.
pub fn segment_by_profit<'r>(
    class_list: &[&'r ODRequest],
    epsilon_v: f64,
) -> Vec<Vec<&'r ODRequest>> {
    let mut sorted: Vec<&ODRequest> = class_list.to_vec();
    sorted.sort_by(|a, b| b.profit.total_cmp(&a.profit).then(a.id.cmp(&b.id)));
    let mut segments: Vec<Vec<&ODRequest>> = Vec::new();
    let mut seg_max = f64::NEG_INFINITY;
    for r in sorted {
        match segments.last_mut() {
            Some(seg) if seg_max - r.profit <= epsilon_v => seg.push(r),
            _ => {
                seg_max = r.profit;
                segments.push(vec![r]);
            }
        }
    }
    segments
}

fn saturating_factorial(n: usize) -> (u128, bool) {
    let mut acc: u128 = 1;
    for i in 2..=n as u128 {
        match acc.checked_mul(i) {
            Some(v) => acc = v,
            None => return (u128::MAX, false),
        }
    }
    (acc, true)
}

/// Product over all segments of (segment size)!.
pub fn count_arrangements(segments: &[Vec<&ODRequest>]) -> ArrangementCount {
    let mut count: u128 = 1;
    let mut exact = true;
    for seg in segments {
        let (f, f_exact) = saturating_factorial(seg.len());
        exact &= f_exact;
        match count.checked_mul(f) {
            Some(v) => count = v,
            None => {
                count = u128::MAX;
                exact = false;
            }
        }
    }
    ArrangementCount { count, exact }
}

fn all_segments(requests: &[ODRequest], epsilon_v: f64) -> Vec<Vec<&ODRequest>> {
    let mut segments = Vec::new();
    for class in group_by_urgency(requests) {
        segments.extend(segment_by_profit(&class, epsilon_v));
    }
    segments
}

/// Enumerates every arrangement by taking the Cartesian product of the
/// per-segment permutations. Only called when the total count is small.
fn enumerate_all(segments: &[Vec<&ODRequest>]) -> Vec<ODSequence> {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        let mut items: Vec<usize> = (0..n).collect();
        heap_permutations(&mut items, n, &mut out);
        out.sort();
        out
    }
    fn heap_permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap_permutations(items, k - 1, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }

    let per_segment: Vec<Vec<Vec<usize>>> = segments.iter().map(|s| perms(s.len())).collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; segments.len()];
    loop {
        let mut ids = Vec::new();
        let mut bounds = Vec::new();
        for (si, (seg, &pick)) in segments.iter().zip(&choice).enumerate() {
            for &j in &per_segment[si][pick] {
                ids.push(seg[j].id.clone());
            }
            bounds.push(ids.len());
        }
        out.push(ODSequence {
            ids,
            segment_bounds: bounds,
        });
        // odometer increment
        let mut carry = true;
        for (i, c) in choice.iter_mut().enumerate() {
            if !carry {
                break;
            }
            *c += 1;
            if *c < per_segment[i].len() {
                carry = false;
            } else {
                *c = 0;
            }
        }
        if carry {
            break;
        }
    }
    out
}

const ENUMERATION_LIMIT: u128 = 65_536;

/// Draws `spec.k` orderings: urgency classes in fixed order, segments in
/// descending-profit order, an independent uniform shuffle inside each
/// segment. Deterministic for a fixed seed. When `k` meets or exceeds the
/// arrangement count the full distinct set is produced instead of sampling.
pub fn generate_sequences(requests: &[ODRequest], spec: &PrioritySpec) -> SequenceSet {
    let segments = all_segments(requests, spec.epsilon_v);
    let arrangements = count_arrangements(&segments);
    let k = spec.k.max(1);
    let k_eff = if arrangements.exact && (k as u128) > arrangements.count {
        arrangements.count as usize
    } else {
        k
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    if arrangements.exact
        && arrangements.count <= ENUMERATION_LIMIT
        && k_eff as u128 == arrangements.count
    {
        let mut all = enumerate_all(&segments);
        all.shuffle(&mut rng);
        return SequenceSet {
            sequences: all,
            arrangements,
            contains_duplicates: false,
        };
    }

    let draw = |rng: &mut ChaCha8Rng| -> ODSequence {
        let mut ids = Vec::new();
        let mut bounds = Vec::new();
        for seg in &segments {
            let mut block: Vec<&str> = seg.iter().map(|r| r.id.as_str()).collect();
            block.shuffle(rng);
            ids.extend(block.into_iter().map(String::from));
            bounds.push(ids.len());
        }
        ODSequence {
            ids,
            segment_bounds: bounds,
        }
    };

    let mut sequences = Vec::with_capacity(k_eff);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut draws = 0usize;
    let budget = k_eff.saturating_mul(10);
    while sequences.len() < k_eff && draws < budget {
        let s = draw(&mut rng);
        draws += 1;
        if seen.insert(s.ids.clone()) {
            sequences.push(s);
        }
    }
    let mut contains_duplicates = false;
    while sequences.len() < k_eff {
        // distinctness budget exhausted; fall back to accepting duplicates
        contains_duplicates = true;
        sequences.push(draw(&mut rng));
    }
    SequenceSet {
        sequences,
        arrangements,
        contains_duplicates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequence_from(segments: &[Vec<&ODRequest>]) -> ODSequence {
        let mut ids = Vec::new();
        let mut bounds = Vec::new();
        for seg in segments {
            ids.extend(seg.iter().map(|r| r.id.clone()));
            bounds.push(ids.len());
        }
        ODSequence {
            ids,
            segment_bounds: bounds,
        }
    }

    fn request(id: &str, urgency: Urgency, profit: f64) -> ODRequest {
        ODRequest {
            id: id.into(),
            origin_vertiport: "a".into(),
            dest_vertiport: "b".into(),
            urgency,
            profit,
        }
    }

    /// The 16 profit values of the published sensitivity example.
    fn profit_table() -> Vec<ODRequest> {
        [
            9481.0, 8735.0, 7988.0, 7908.0, 6957.0, 6900.0, 6522.0, 5821.0, 5800.0, 5667.0,
            5626.0, 5423.0, 4793.0, 4697.0, 3045.0, -105.0,
        ]
        .iter()
        .enumerate()
        .map(|(i, &v)| request(&format!("r{:02}", i + 1), Urgency::Normal, v))
        .collect()
    }

    fn segment_ids(segments: &[Vec<&ODRequest>]) -> Vec<Vec<String>> {
        segments
            .iter()
            .map(|s| s.iter().map(|r| r.id.clone()).collect())
            .collect()
    }

    fn named(groups: &[&[usize]]) -> Vec<Vec<String>> {
        groups
            .iter()
            .map(|g| g.iter().map(|i| format!("r{i:02}")).collect())
            .collect()
    }

    #[test]
    fn urgency_grouping_is_stable() {
        let reqs: Vec<ODRequest> = (0..12)
            .map(|i| request(&format!("q{i}"), Urgency::ALL[i % 4], i as f64))
            .collect();
        let groups = group_by_urgency(&reqs);
        assert!(groups.iter().all(|g| g.len() == 3));
        assert_eq!(groups[0][0].id, "q0");
        assert_eq!(groups[0][2].id, "q8");

        let all_normal: Vec<ODRequest> =
            (0..5).map(|i| request(&format!("n{i}"), Urgency::Normal, 0.0)).collect();
        let groups = group_by_urgency(&all_normal);
        assert_eq!(groups[2].len(), 5);
        assert!(groups[0].is_empty() && groups[1].is_empty() && groups[3].is_empty());

        let empty = group_by_urgency(&[]);
        assert!(empty.iter().all(|g| g.is_empty()));
    }

    #[test]
    fn profit_segmentation_golden_eps_100() {
        let reqs = profit_table();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        let segs = segment_by_profit(&refs, 100.0);
        assert_eq!(
            segment_ids(&segs),
            named(&[
                &[1],
                &[2],
                &[3, 4],
                &[5, 6],
                &[7],
                &[8, 9],
                &[10, 11],
                &[12],
                &[13, 14],
                &[15],
                &[16]
            ])
        );
        assert_eq!(count_arrangements(&segs).count, 32);
    }

    #[test]
    fn profit_segmentation_golden_eps_400() {
        let reqs = profit_table();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        let segs = segment_by_profit(&refs, 400.0);
        assert_eq!(
            segment_ids(&segs),
            named(&[
                &[1],
                &[2],
                &[3, 4],
                &[5, 6],
                &[7],
                &[8, 9, 10, 11, 12],
                &[13, 14],
                &[15],
                &[16]
            ])
        );
        assert_eq!(count_arrangements(&segs).count, 960);
    }

    #[test]
    fn profit_segmentation_golden_eps_800() {
        let reqs = profit_table();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        let segs = segment_by_profit(&refs, 800.0);
        assert_eq!(
            segment_ids(&segs),
            named(&[
                &[1, 2],
                &[3, 4],
                &[5, 6, 7],
                &[8, 9, 10, 11, 12],
                &[13, 14],
                &[15],
                &[16]
            ])
        );
        // 2!*2!*3!*5!*2! by the arrangement-count formula
        assert_eq!(count_arrangements(&segs).count, 5760);
    }

    #[test]
    fn diameter_property_holds_for_every_segment() {
        let reqs = profit_table();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        for eps in [100.0, 400.0, 800.0, 50.0, 2000.0] {
            for seg in segment_by_profit(&refs, eps) {
                for a in &seg {
                    for b in &seg {
                        assert!((a.profit - b.profit).abs() <= eps);
                    }
                }
            }
        }
    }

    #[test]
    fn segments_concatenate_to_sorted_order() {
        let reqs = profit_table();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        let segs = segment_by_profit(&refs, 400.0);
        let flat: Vec<f64> = segs.iter().flatten().map(|r| r.profit).collect();
        assert!(flat.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn arrangement_count_saturates() {
        let reqs: Vec<ODRequest> = (0..40)
            .map(|i| request(&format!("r{i:02}"), Urgency::Normal, 0.0))
            .collect();
        let refs: Vec<&ODRequest> = reqs.iter().collect();
        let segs = segment_by_profit(&refs, 1.0);
        let count = count_arrangements(&segs);
        // 40! overflows u128
        assert!(!count.exact);
        assert_eq!(count.count, u128::MAX);

        let singletons: Vec<ODRequest> = (0..5)
            .map(|i| request(&format!("s{i}"), Urgency::Normal, 1000.0 * i as f64))
            .collect();
        let refs: Vec<&ODRequest> = singletons.iter().collect();
        let segs = segment_by_profit(&refs, 1.0);
        assert_eq!(count_arrangements(&segs), ArrangementCount { count: 1, exact: true });
    }

    #[test]
    fn k1_with_singleton_segments_is_sorted_order() {
        let reqs: Vec<ODRequest> = [500.0, 400.0, 300.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| request(&format!("p{i}"), Urgency::Normal, v))
            .collect();
        let spec = PrioritySpec {
            epsilon_v: 10.0,
            k: 1,
            rng_seed: 42,
        };
        let set = generate_sequences(&reqs, &spec);
        assert_eq!(set.sequences.len(), 1);
        assert_eq!(set.sequences[0].ids, vec!["p0", "p1", "p2"]);
    }

    #[test]
    fn k_exhausting_arrangements_yields_distinct_sequences() {
        let reqs = profit_table();
        let spec = PrioritySpec {
            epsilon_v: 100.0,
            k: 32,
            rng_seed: 7,
        };
        let set = generate_sequences(&reqs, &spec);
        assert_eq!(set.sequences.len(), 32);
        assert!(!set.contains_duplicates);
        let distinct: HashSet<Vec<String>> =
            set.sequences.iter().map(|s| s.ids.clone()).collect();
        assert_eq!(distinct.len(), 32);
        // requesting more than the arrangement count clamps
        let set = generate_sequences(
            &reqs,
            &PrioritySpec {
                epsilon_v: 100.0,
                k: 1000,
                rng_seed: 7,
            },
        );
        assert_eq!(set.sequences.len(), 32);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let reqs = profit_table();
        let spec = PrioritySpec {
            epsilon_v: 400.0,
            k: 10,
            rng_seed: 99,
        };
        let a = generate_sequences(&reqs, &spec);
        let b = generate_sequences(&reqs, &spec);
        assert_eq!(a.sequences, b.sequences);
    }

    #[test]
    fn sequences_are_valid_permutations_with_class_and_segment_structure() {
        let mut reqs = Vec::new();
        for (i, u) in Urgency::ALL.iter().enumerate() {
            for j in 0..4 {
                reqs.push(request(
                    &format!("m{i}{j}"),
                    *u,
                    1000.0 * (4 - j) as f64 + 10.0 * (j % 2) as f64,
                ));
            }
        }
        let spec = PrioritySpec {
            epsilon_v: 50.0,
            k: 8,
            rng_seed: 3,
        };
        let set = generate_sequences(&reqs, &spec);
        let segments = all_segments(&reqs, spec.epsilon_v);
        let reference = sequence_from(&segments);
        for seq in &set.sequences {
            // permutation of the input
            let mut sorted = seq.ids.clone();
            sorted.sort();
            let mut expect: Vec<String> = reqs.iter().map(|r| r.id.clone()).collect();
            expect.sort();
            assert_eq!(sorted, expect);
            assert_eq!(seq.segment_bounds, reference.segment_bounds);
            // each segment block holds the same id set as the reference
            let mut lo = 0;
            for (&hi, ref_seg) in seq.segment_bounds.iter().zip(
                reference
                    .segment_bounds
                    .iter()
                    .scan(0, |s, &e| {
                        let block = reference.ids[*s..e].to_vec();
                        *s = e;
                        Some(block)
                    }),
            ) {
                let mut block = seq.ids[lo..hi].to_vec();
                block.sort();
                let mut expect = ref_seg.clone();
                expect.sort();
                assert_eq!(block, expect);
                lo = hi;
            }
        }
    }

    #[test]
    fn arrangement_count_matches_exhaustive_shuffle_space() {
        // brute force: count the permutations of all ids that keep every id
        // inside its segment block
        let reqs: Vec<ODRequest> = [
            ("a", Urgency::Urgent, 900.0),
            ("b", Urgency::Urgent, 890.0),
            ("c", Urgency::Normal, 500.0),
            ("d", Urgency::Normal, 495.0),
            ("e", Urgency::Normal, 490.0),
            ("f", Urgency::Low, 100.0),
        ]
        .iter()
        .map(|(id, u, v)| request(id, *u, *v))
        .collect();
        let eps = 20.0;
        let segments = all_segments(&reqs, eps);
        let expected = count_arrangements(&segments).count;

        let reference = sequence_from(&segments);
        let mut block_of = std::collections::HashMap::new();
        let mut lo = 0;
        for (bi, &hi) in reference.segment_bounds.iter().enumerate() {
            for id in &reference.ids[lo..hi] {
                block_of.insert(id.clone(), bi);
            }
            lo = hi;
        }
        // enumerate permutations of 6 ids, count structure-preserving ones
        let ids: Vec<String> = reference.ids.clone();
        let mut count = 0u128;
        let mut perm: Vec<usize> = (0..ids.len()).collect();
        loop {
            let valid = {
                let mut lo = 0;
                let mut ok = true;
                for (bi, &hi) in reference.segment_bounds.iter().enumerate() {
                    for k in lo..hi {
                        if block_of[&ids[perm[k]]] != bi {
                            ok = false;
                        }
                    }
                    lo = hi;
                }
                ok
            };
            if valid {
                count += 1;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        assert_eq!(count, expected);
    }

    fn next_permutation(p: &mut [usize]) -> bool {
        let n = p.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
        true
    }
}
