mod common;

use std::fs;

use linkpred::graph::{clustering_coefficient, degree_histogram, graph_stats, load_graph};
use linkpred::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn brute_clustering(a: &[Vec<bool>], v: usize) -> f64 {
    let nb: Vec<usize> = (0..a.len()).filter(|&w| a[v][w]).collect();
    let k = nb.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0;
    for i in 0..k {
        for j in i + 1..k {
            if a[nb[i]][nb[j]] {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (k * (k - 1)) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn clustering_matches_brute_force(n in 1usize..=8, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = common::er_graph(n, p, seed);
        let a = common::adjacency(&g);
        for v in 0..n {
            let c = clustering_coefficient(&g, v).unwrap();
            prop_assert!((c - brute_clustering(&a, v)).abs() < 1e-12);
        }
        let degree_sum: usize = (0..n).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
        let hist_nodes: usize = degree_histogram(&g).iter().map(|&(_, c)| c).sum();
        prop_assert_eq!(hist_nodes, n);
    }
}

fn write_attrs(dir: &std::path::Path, ids: &[u64]) -> std::path::PathBuf {
    let mut text = String::from("node_id,status,gender,major,minor,dorm,year,high_school\n");
    for id in ids {
        text.push_str(&format!("{id},1,2,3,0,5,2008,7\n"));
    }
    let p = dir.join("attrs.csv");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn shuffled_edge_file_gives_identical_stats() {
    let dir = tempfile::tempdir().unwrap();
    let g = common::er_graph(60, 0.1, 11);
    let ids: Vec<u64> = (0..60).map(|i| 1000 + 7 * i).collect();
    let attrs = write_attrs(dir.path(), &ids);
    let mut lines: Vec<String> = g.edges().map(|(u, v)| format!("{} {}", ids[u], ids[v])).collect();
    let mut stats = Vec::new();
    let mut r = common::rng(5);
    for round in 0..5 {
        lines.shuffle(&mut r);
        // also flip endpoint order on some lines
        let text: String = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if (i + round) % 3 == 0 {
                    let (a, b) = l.split_once(' ').unwrap();
                    format!("{b},{a}\n")
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        let path = dir.path().join(format!("edges{round}.txt"));
        fs::write(&path, text).unwrap();
        let loaded = load_graph(&path, &attrs, "x").unwrap();
        stats.push(graph_stats(&loaded).unwrap());
    }
    assert!(stats.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(stats[0].m, g.edge_count());
}

#[test]
fn load_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let attrs = write_attrs(dir.path(), &[1, 2, 3]);
    let cases = [
        ("1 2\n2 9\n", "referential"),
        ("1 2\n3 3\n", "validation"),
        ("1 2\n2 3 4\n", "parse"),
    ];
    for (text, kind) in cases {
        let p = dir.path().join("e.txt");
        fs::write(&p, text).unwrap();
        let err = load_graph(&p, &attrs, "x").unwrap_err();
        let ok = match kind {
            "referential" => matches!(err, Error::Referential(_)),
            "validation" => matches!(err, Error::Validation(_)),
            _ => matches!(err, Error::Parse { line: 2, .. }),
        };
        assert!(ok, "{text:?}: {err}");
    }
}

#[test]
fn written_files_reload_identically() {
    let dir = tempfile::tempdir().unwrap();
    let g = common::er_graph(30, 0.2, 3);
    let (e, a) = (dir.path().join("g.edges"), dir.path().join("g.csv"));
    g.write_edge_file(&e).unwrap();
    g.write_attribute_file(&a).unwrap();
    let h = load_graph(&e, &a, "er").unwrap();
    assert_eq!(g.edges().collect::<Vec<_>>(), h.edges().collect::<Vec<_>>());
    assert_eq!(graph_stats(&g).unwrap(), graph_stats(&h).unwrap());
}
