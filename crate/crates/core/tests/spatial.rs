mod common;

use proptest::prelude::*;

use common::{random_graph, random_locations, rng, shortest_by_paths, undirected_edges};
use strel_core::spatial::{haversine, Location, SpatialModel};

fn coords() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((55.90f64..55.95, -3.25f64..-3.15), 2..16)
}

fn locations(coords: &[(f64, f64)]) -> Option<Vec<Location>> {
    let locs: Vec<Location> =
        coords.iter().enumerate().map(|(i, &(lat, lon))| Location::new(format!("p{i}"), lat, lon)).collect();
    let distinct = (0..locs.len()).all(|i| (i + 1..locs.len()).all(|j| haversine(&locs[i], &locs[j]) > 0.0));
    distinct.then_some(locs)
}

proptest! {
    #[test]
    fn enhanced_msg_bounds_stretch(c in coords(), alpha in 1.05f64..4.0) {
        let Some(locs) = locations(&c) else { return Ok(()) };
        let model = SpatialModel::enhanced_msg(locs.clone(), alpha).unwrap();
        for i in 0..locs.len() {
            let dist = model.shortest_paths(i);
            for j in 0..locs.len() {
                if i != j {
                    prop_assert!(dist[j] <= alpha * haversine(&locs[i], &locs[j]));
                }
            }
        }
    }

    #[test]
    fn mst_is_a_spanning_tree(c in coords()) {
        let Some(locs) = locations(&c) else { return Ok(()) };
        let n = locs.len();
        let model = SpatialModel::mst(locs).unwrap();
        prop_assert!(model.is_connected());
        prop_assert_eq!(model.undirected_edge_count(), n - 1);
    }

    #[test]
    fn delta_edges_grow_with_threshold(c in coords(), a in 1.0f64..3000.0, b in 1.0f64..3000.0) {
        let Some(locs) = locations(&c) else { return Ok(()) };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = undirected_edges(&SpatialModel::delta(locs.clone(), lo).unwrap());
        let large = undirected_edges(&SpatialModel::delta(locs, hi).unwrap());
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn haversine_is_symmetric(a in (-89.0f64..89.0, -179.0f64..179.0), b in (-89.0f64..89.0, -179.0f64..179.0)) {
        let (p, q) = (Location::new("p", a.0, a.1), Location::new("q", b.0, b.1));
        prop_assert_eq!(haversine(&p, &q), haversine(&q, &p));
        prop_assert_eq!(haversine(&p, &p), 0.0);
        if a != b {
            prop_assert!(haversine(&p, &q) > 0.0);
        }
    }

    #[test]
    fn induced_distance_is_a_graph_metric(seed in 0u64..10_000, n in 1usize..7) {
        let mut r = rng(seed);
        let model = random_graph(&mut r, n, seed % 2 == 0, false);
        for i in 0..n {
            prop_assert_eq!(model.induced_distance(i, i).unwrap(), 0.0);
            for j in 0..n {
                let d = model.induced_distance(i, j).unwrap();
                prop_assert!(d >= 0.0);
                if i != j {
                    prop_assert_eq!(d, shortest_by_paths(&model, i, j));
                }
                for k in 0..n {
                    let via = model.induced_distance(i, k).unwrap() + model.induced_distance(k, j).unwrap();
                    prop_assert!(d <= via);
                }
            }
        }
    }

    #[test]
    fn symmetric_models_mirror_every_edge(seed in 0u64..10_000, n in 1usize..8) {
        let model = random_graph(&mut rng(seed), n, true, false);
        prop_assert!(model.is_symmetric());
        for e in model.edges() {
            prop_assert_ne!(e.source, e.target);
            prop_assert!(e.weight > 0.0 && e.weight.is_finite());
            prop_assert_eq!(model.weight(e.target, e.source), Some(e.weight));
        }
    }
}

#[test]
fn thin_rectangle_gets_shortcut() {
    // long sides ~1100 m, short sides ~330 m: the tree detours across both short sides
    let locs = vec![
        Location::new("a", 0.0, 0.0),
        Location::new("b", 0.0, 0.01),
        Location::new("c", 0.003, 0.0),
        Location::new("d", 0.003, 0.01),
    ];
    let mst = SpatialModel::mst(locs.clone()).unwrap();
    let model = SpatialModel::enhanced_msg(locs.clone(), 1.1).unwrap();
    assert!(model.undirected_edge_count() > mst.undirected_edge_count());
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                let ratio = model.induced_distance(i, j).unwrap() / haversine(&locs[i], &locs[j]);
                assert!(ratio <= 1.1, "pair ({i}, {j}) ratio {ratio}");
            }
        }
    }
}

#[test]
fn random_sets_keep_mst_inside_enhanced_model() {
    let mut r = rng(5);
    for _ in 0..20 {
        let locs = random_locations(&mut r, 12);
        let mst = undirected_edges(&SpatialModel::mst(locs.clone()).unwrap());
        let model = undirected_edges(&SpatialModel::enhanced_msg(locs, 1.5).unwrap());
        assert!(mst.is_subset(&model));
    }
}
