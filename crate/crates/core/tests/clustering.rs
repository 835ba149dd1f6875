mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::naive_complete_linkage;
use strel_core::clustering::{ahc_complete, linkage, normalize};

fn points(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=3).prop_flat_map(move |d| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, d), 2..=max))
}

/// Labels as a set of member sets, independent of numbering.
fn partition(labels: &[usize], order: &[usize]) -> BTreeSet<BTreeSet<usize>> {
    let k = labels.iter().copied().max().unwrap_or(0);
    (1..=k)
        .map(|c| labels.iter().zip(order).filter(|(&l, _)| l == c).map(|(_, &i)| i).collect())
        .collect()
}

proptest! {
    #[test]
    fn merges_match_brute_force(p in points(8)) {
        let got: Vec<_> = linkage(&p).unwrap().merges.iter().map(|m| (m.kept, m.absorbed, m.height)).collect();
        prop_assert_eq!(got, naive_complete_linkage(&p));
    }

    #[test]
    fn heights_never_decrease(p in points(25)) {
        let d = linkage(&p).unwrap();
        prop_assert_eq!(d.merges.len(), p.len() - 1);
        for w in d.merges.windows(2) {
            prop_assert!(w[0].height <= w[1].height);
        }
    }

    #[test]
    fn point_order_does_not_change_partition(p in points(20), k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(p.len());
        let mut order: Vec<usize> = (0..p.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut common::rng(seed));
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| p[i].clone()).collect();
        let a = ahc_complete(&p, k, false).unwrap();
        let b = ahc_complete(&shuffled, k, false).unwrap();
        let identity: Vec<usize> = (0..p.len()).collect();
        prop_assert_eq!(partition(&a.labels, &identity), partition(&b.labels, &order));
    }

    #[test]
    fn normalizing_first_is_the_same_as_the_flag(p in points(20), k in 1usize..6) {
        let k = k.min(p.len());
        let (scaled, _) = normalize(&p);
        let a = ahc_complete(&p, k, true).unwrap();
        let b = ahc_complete(&scaled, k, false).unwrap();
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn labels_are_contiguous(p in points(20), k in 1usize..6) {
        let k = k.min(p.len());
        let a = ahc_complete(&p, k, true).unwrap();
        prop_assert_eq!(a.num_clusters, k);
        let used: BTreeSet<usize> = a.labels.iter().copied().collect();
        prop_assert_eq!(used, (1..=k).collect::<BTreeSet<_>>());
    }
}
