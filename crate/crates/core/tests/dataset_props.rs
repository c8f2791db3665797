mod common;

use std::collections::HashSet;

use linkpred::dataset::{
    build_dataset, node_pair_features, split_network, split_protocol, standardize, year_mean, DatasetKind, Partition,
    SplitSpec,
};
use linkpred::metrics::score_pairs;
use linkpred::synthetic::{power_law_cluster, SyntheticConfig};
use linkpred::{AttributedGraph, Error};
use proptest::prelude::*;

fn fixture(label: &str, seed: u64) -> AttributedGraph {
    let cfg = SyntheticConfig { nodes: 400, edges_per_node: 4, seed, ..SyntheticConfig::default() };
    power_law_cluster(&cfg, label).unwrap()
}

fn spec(seed: u64, seen: &[&str], unseen: &[&str]) -> SplitSpec {
    SplitSpec {
        positive_fraction: 0.05,
        seed,
        seen_networks: seen.iter().map(|s| s.to_string()).collect(),
        unseen_networks: unseen.iter().map(|s| s.to_string()).collect(),
        ..SplitSpec::default()
    }
}

#[test]
fn no_leakage_and_exact_balance() {
    let g = fixture("a", 1);
    for seed in 0..20 {
        let s = split_network(&g, &spec(seed, &["a"], &[])).unwrap();
        let k = (0.05 * g.edge_count() as f64).round() as usize;
        assert_eq!(s.positives.len(), k);
        assert_eq!(s.negatives.len(), k);
        assert_eq!(s.train_graph.edge_count(), g.edge_count() - k);
        for p in &s.positives {
            assert!(g.has_edge(p.u, p.v) && !s.train_graph.has_edge(p.u, p.v));
        }
        for n in &s.negatives {
            assert!(!g.has_edge(n.u, n.v) && n.u < n.v);
        }
        let distinct: HashSet<_> = s.negatives.iter().map(|n| (n.u, n.v)).collect();
        assert_eq!(distinct.len(), k);
        // only held-out edges were removed
        for (u, v) in s.train_graph.edges() {
            assert!(g.has_edge(u, v));
        }
    }
}

#[test]
fn partitions_are_balanced_and_deterministic() {
    let nets = vec![fixture("a", 1), fixture("b", 2), fixture("c", 3)];
    let sp = spec(7, &["a", "b"], &["c"]);
    let one = split_protocol(&nets, &sp).unwrap();
    let two = split_protocol(&nets, &sp).unwrap();
    for p in [Partition::Train, Partition::Test, Partition::Unseen] {
        assert_eq!(one.partition(p), two.partition(p));
        let pos = one.partition(p).iter().filter(|s| s.label == 1).count();
        let neg = one.partition(p).len() - pos;
        assert!(pos.abs_diff(neg) <= 1, "{p}: {pos} vs {neg}");
    }
    assert!(one.unseen.iter().all(|s| s.network_id == "c"));
    assert!(one.train.iter().chain(&one.test).all(|s| s.network_id != "c"));
    let train: HashSet<_> = one.train.iter().collect();
    assert!(one.test.iter().all(|s| !train.contains(s)));
    // adding a network does not change another network's samples
    let solo = split_protocol(&nets[..1], &spec(7, &["a"], &[])).unwrap();
    assert_eq!(solo.networks["a"].positives, one.networks["a"].positives);
}

#[test]
fn dense_graph_exhausts_negative_sampling() {
    let edges: Vec<(usize, usize)> = (0..6).flat_map(|u| (u + 1..6).map(move |v| (u, v))).collect();
    let g = AttributedGraph::new("k6", vec![Default::default(); 6], edges).unwrap();
    let sp = SplitSpec { positive_fraction: 0.2, ..spec(0, &["k6"], &[]) };
    assert!(matches!(split_network(&g, &sp), Err(Error::Sampling(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn features_symmetric_in_endpoints(seed in any::<u64>(), u in 0usize..400, v in 0usize..400) {
        prop_assume!(u != v);
        let g = fixture("a", seed % 5);
        let ym = year_mean(&g);
        prop_assert_eq!(node_pair_features(&g, u, v, ym).unwrap(), node_pair_features(&g, v, u, ym).unwrap());
        prop_assert_eq!(score_pairs(&g, &[(u, v)]).unwrap()[0].jc, score_pairs(&g, &[(v, u)]).unwrap()[0].jc);
    }
}

#[test]
fn standardisation_uses_train_rows_only() {
    let g = fixture("a", 4);
    let s = split_protocol(std::slice::from_ref(&g), &spec(3, &["a"], &[])).unwrap();
    let tg = &s.networks["a"].train_graph;
    let train = build_dataset(DatasetKind::Topological, &s.train, tg, None, Partition::Train).unwrap();
    let test = build_dataset(DatasetKind::Topological, &s.test, tg, None, Partition::Test).unwrap();
    let (t, others, st) = standardize(&train, std::slice::from_ref(&test)).unwrap();
    for j in 0..train.n_cols() {
        let col = train.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((st.mean[j] - mean).abs() < 1e-9);
        let tm = t.column(j).iter().sum::<f64>() / col.len() as f64;
        assert!(tm.abs() < 1e-9);
    }
    assert_eq!(others[0].n_rows(), test.n_rows());
    // rebuilding gives identical matrices
    let again = build_dataset(DatasetKind::Topological, &s.train, tg, None, Partition::Train).unwrap();
    assert_eq!(again, train);
    assert_eq!(train.to_csv(), again.to_csv());
}
