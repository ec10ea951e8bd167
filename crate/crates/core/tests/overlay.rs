use ncstream_core::sim::build_topology;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn repeated_refresh_keeps_bounds_and_connectivity() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut o = build_topology(200, 15, 4, &mut rng).unwrap();
        let edges = o.edge_count();
        for round in 0..10 {
            o.refresh_neighbors(&mut rng);
            assert!((0..200).all(|v| (1..=15).contains(&o.degree(v))));
            assert!(o.is_connected(), "seed {seed} round {round}");
            assert!((0..200).all(|v| o
                .neighbors(v)
                .iter()
                .all(|&u| u != v && o.are_adjacent(u, v))));
        }
        // Each change swaps one edge for another.
        assert_eq!(o.edge_count(), edges);
        assert_eq!((0..200).filter(|&v| o.is_malicious(v)).count(), 4);
    }
}

#[test]
fn joins_fill_neighbourhoods() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let o = build_topology(1000, 25, 50, &mut rng).unwrap();
    let full = (0..1000).filter(|&v| o.degree(v) == 25).count();
    assert!(full > 900, "only {full} peers at N_s");
}
