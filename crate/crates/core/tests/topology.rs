mod common;

use gridsynth::topology::{compute_distances, DistanceMetric, Feeder};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distances_respect_triangle_inequality(
        parents in prop::collection::vec(any::<usize>(), 2..60),
        lengths in prop::collection::vec(0.01f64..2.0, 60),
        chords in prop::collection::vec((any::<usize>(), any::<usize>(), 0.01f64..2.0), 0..8),
        walks in prop::collection::vec(prop::collection::vec(any::<usize>(), 1..20), 100),
    ) {
        let t = common::build(&parents, &lengths[..parents.len()], &chords);
        let paths = compute_distances(&t, DistanceMetric::Kilometers).unwrap();
        for l in t.lines() {
            prop_assert!(paths.distance[l.to] <= paths.distance[l.from] + l.length_km + 1e-12);
            prop_assert!(paths.distance[l.from] <= paths.distance[l.to] + l.length_km + 1e-12);
        }
        // explicit random walks from the source
        for walk in &walks {
            let (mut at, mut total) = (t.source(), 0.0);
            for &step in walk {
                let nb = t.neighbors(at);
                let (next, line) = nb[step % nb.len()];
                total += t.lines()[line].length_km;
                at = next;
                prop_assert!(paths.distance[at] <= total + 1e-9);
            }
        }
    }

    #[test]
    fn branch_points_come_after_their_parents(t in common::tree(80)) {
        let f = Feeder::analyze(t, 3, DistanceMetric::Kilometers).unwrap();
        let mut seen = vec![false; f.topology.bus_count()];
        prop_assert_eq!(f.hierarchy.ramification[0], f.topology.source());
        for &r in &f.hierarchy.ramification {
            if let Some(p) = f.hierarchy.parent[r] {
                prop_assert!(seen[p]);
            }
            seen[r] = true;
        }
        for &b in &f.paths.order {
            if let Some(p) = f.paths.parent[b] {
                prop_assert!(f.paths.distance[p] <= f.paths.distance[b]);
            }
        }
    }

    #[test]
    fn every_bus_lies_in_its_zone_interval(t in common::tree(80), z in 1usize..8, hops in any::<bool>()) {
        let metric = if hops { DistanceMetric::Hops } else { DistanceMetric::Kilometers };
        let f = Feeder::analyze(t, z, metric).unwrap();
        let zones = &f.zones;
        prop_assert_eq!(zones.bus_zone.len(), f.topology.bus_count());
        for (b, &k) in zones.bus_zone.iter().enumerate() {
            prop_assert!((1..=z).contains(&k));
            let (lo, hi) = zones.bounds(k);
            let d = f.paths.distance[b];
            prop_assert!(lo <= d && d < hi, "bus {} at {} outside [{}, {})", b, d, lo, hi);
        }
        for (l, &k) in zones.line_zone.iter().enumerate() {
            prop_assert_eq!(k, zones.bus_zone[f.line_upstream(l)]);
        }
    }
}
