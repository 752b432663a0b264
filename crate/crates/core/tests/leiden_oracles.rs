use graphclust::leiden::{aggregate, leiden, local_move, quality, refine, LeidenConfig, QualityObjective};
use graphclust::metrics::modularity;
use graphclust::sbm::planted_partition;
use graphclust::{Graph, Partition};
use proptest::prelude::*;

/// CPM by counting: internal edges minus γ times internal pairs.
fn cpm_by_counting(g: &Graph, labels: &[usize], gamma: f64) -> f64 {
    let n = labels.len();
    let mut h = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                h += g.edge_weight(i, j).unwrap_or(0.0) - gamma;
            }
        }
    }
    h
}

/// Every set partition of `0..n` as restricted growth strings.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            rec(i + 1, max.max(c), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

fn is_connected_within(g: &Graph, members: &[usize]) -> bool {
    let inside: std::collections::HashSet<usize> = members.iter().copied().collect();
    let mut seen = std::collections::HashSet::from([members[0]]);
    let mut stack = vec![members[0]];
    while let Some(v) = stack.pop() {
        for &u in g.neighbors(v) {
            if inside.contains(&u) && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len() == members.len()
}

fn cliques_with_bridge() -> Graph {
    let mut e = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((base + i, base + j));
            }
        }
    }
    e.push((3, 4));
    Graph::from_edges(&e, 8).unwrap()
}

fn ring_of_k5() -> Graph {
    let mut e = Vec::new();
    for c in 0..4 {
        for i in 0..5 {
            for j in i + 1..5 {
                e.push((5 * c + i, 5 * c + j));
            }
        }
        e.push((5 * c + 4, (5 * c + 5) % 20));
    }
    Graph::from_edges(&e, 20).unwrap()
}

#[test]
fn local_move_recovers_cliques_from_singletons() {
    let g = cliques_with_bridge();
    let want = Partition::from_labels(&[0, 0, 0, 0, 1, 1, 1, 1]);
    // Exhaustive search confirms the two cliques are the unique CPM optimum.
    let obj = QualityObjective::cpm(0.5);
    let best = all_partitions(8)
        .into_iter()
        .max_by(|a, b| cpm_by_counting(&g, a, 0.5).total_cmp(&cpm_by_counting(&g, b, 0.5)))
        .unwrap();
    assert!(Partition::from_labels(&best).same_clustering(&want));
    for seed in 0..10 {
        let p = local_move(&g, &Partition::singletons(8), &obj, seed).unwrap();
        assert!(p.same_clustering(&want), "seed {seed}");
    }
}

#[test]
fn local_move_fixpoints() {
    let g = cliques_with_bridge();
    let p = Partition::from_labels(&[0, 0, 0, 0, 1, 1, 1, 1]);
    let q = local_move(&g, &p, &QualityObjective::cpm(0.5), 1).unwrap();
    assert!(q.same_clustering(&p));
    let single = Graph::empty(1);
    let q = local_move(&single, &Partition::singletons(1), &QualityObjective::cpm(1.0), 1).unwrap();
    assert_eq!(q.num_clusters(), 1);
}

#[test]
fn refine_splits_artificial_merge() {
    let mut e = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((base + i, base + j));
            }
        }
    }
    let g = Graph::from_edges(&e, 8).unwrap();
    let merged = Partition::single_cluster(8);
    for seed in 0..5 {
        let r = refine(&g, &merged, &QualityObjective::cpm(0.1), 0.01, seed).unwrap();
        assert!(r.refines(&merged));
        for c in r.clusters() {
            assert!(is_connected_within(&g, &c));
        }
        assert!(r.same_clustering(&Partition::from_labels(&[0, 0, 0, 0, 1, 1, 1, 1])));
    }
}

#[test]
fn refine_keeps_clique_whole() {
    let e: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
    let g = Graph::from_edges(&e, 5).unwrap();
    let r = refine(&g, &Partition::single_cluster(5), &QualityObjective::cpm(0.5), 0.01, 9).unwrap();
    assert_eq!(r.num_clusters(), 1);
}

#[test]
fn ring_of_cliques_under_cpm() {
    let g = ring_of_k5();
    let cliques = Partition::from_labels(&(0..20).map(|v| v / 5).collect::<Vec<_>>());
    let h = |labels: &[usize]| cpm_by_counting(&g, labels, 0.5);
    // Alternatives that merge whole cliques along the ring all score lower.
    for merge in all_partitions(4).into_iter().skip(1) {
        let labels: Vec<usize> = (0..20).map(|v| merge[v / 5]).collect();
        if !Partition::from_labels(&labels).same_clustering(&cliques) {
            assert!(h(&labels) < h(cliques.assignment()));
        }
    }
    for seed in 0..5 {
        let r = leiden(&g, &LeidenConfig::new(QualityObjective::cpm(0.5), seed)).unwrap();
        assert!(r.partition.same_clustering(&cliques));
        assert!((r.quality - h(cliques.assignment())).abs() < 1e-9);
    }
}

#[test]
fn reaches_exhaustive_optimum_on_small_graphs() {
    let (g, _) = planted_partition(9, 3, 0.9, 0.15, 4).unwrap();
    let obj = QualityObjective::modularity();
    let best = all_partitions(9)
        .iter()
        .map(|l| modularity(&g, &Partition::from_labels(l)).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let got = (0..5)
        .map(|s| leiden(&g, &LeidenConfig::new(obj, s)).unwrap().quality)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((got - best).abs() < 1e-9, "got {got}, optimum {best}");
}

#[test]
fn planted_partition_recovered_by_modularity() {
    let (g, z) = planted_partition(300, 5, 0.2, 0.005, 8).unwrap();
    let r = leiden(&g, &LeidenConfig::new(QualityObjective::modularity(), 1)).unwrap();
    assert!(r.partition.same_clustering(&Partition::from_labels(&z)));
    assert!((r.quality - modularity(&g, &r.partition).unwrap()).abs() < 1e-12);
}

#[test]
fn deterministic_per_seed() {
    let (g, _) = planted_partition(200, 4, 0.1, 0.02, 2).unwrap();
    let cfg = LeidenConfig::new(QualityObjective::modularity(), 77);
    let a = leiden(&g, &cfg).unwrap();
    let b = leiden(&g, &cfg).unwrap();
    assert_eq!(a.partition.assignment(), b.partition.assignment());
}

fn random_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let e: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
    Graph::from_edges(&e, n).unwrap()
}

fn objective(cpm: bool, gamma: f64) -> QualityObjective {
    if cpm {
        QualityObjective::cpm(gamma)
    } else {
        QualityObjective::modularity()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quality_matches_counting_oracles(
        n in 2usize..25,
        edges in prop::collection::vec((0usize..25, 0usize..25), 1..80),
        labels in prop::collection::vec(0usize..5, 25),
        gamma in 0.05f64..2.0,
    ) {
        let g = random_graph(n, &edges);
        prop_assume!(g.num_edges() > 0);
        let p = Partition::from_labels(&labels[..n]);
        let h = quality(&g, &p, &QualityObjective::cpm(gamma)).unwrap();
        prop_assert!((h - cpm_by_counting(&g, &labels[..n], gamma)).abs() < 1e-9);
        let q = quality(&g, &p, &QualityObjective::modularity()).unwrap();
        prop_assert!((q - modularity(&g, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn local_move_never_lowers_quality(
        n in 2usize..30,
        edges in prop::collection::vec((0usize..30, 0usize..30), 1..90),
        labels in prop::collection::vec(0usize..6, 30),
        cpm in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, &edges);
        prop_assume!(g.num_edges() > 0);
        let obj = objective(cpm, 0.3);
        let p = Partition::from_labels(&labels[..n]);
        let q = local_move(&g, &p, &obj, seed).unwrap();
        prop_assert!(quality(&g, &q, &obj).unwrap() >= quality(&g, &p, &obj).unwrap() - 1e-9);
    }

    #[test]
    fn refine_and_aggregate_invariants(
        n in 2usize..30,
        edges in prop::collection::vec((0usize..30, 0usize..30), 1..90),
        labels in prop::collection::vec(0usize..4, 30),
        cpm in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, &edges);
        prop_assume!(g.num_edges() > 0);
        let obj = objective(cpm, 0.3);
        let p = Partition::from_labels(&labels[..n]);
        let r = refine(&g, &p, &obj, 0.01, seed).unwrap();
        prop_assert!(r.refines(&p));
        for c in r.clusters() {
            prop_assert!(is_connected_within(&g, &c));
        }
        let (agg, init) = aggregate(&g, &r, &p).unwrap();
        let total: f64 = agg.graph.edges().iter().map(|e| e.2).sum::<f64>() + agg.self_weights.iter().sum::<f64>();
        prop_assert_eq!(total, g.num_edges() as f64);
        prop_assert_eq!(agg.node_sizes.iter().sum::<usize>(), n);
        prop_assert_eq!(init.num_clusters(), p.num_clusters());
    }

    #[test]
    fn communities_are_connected(
        n in 2usize..40,
        edges in prop::collection::vec((0usize..40, 0usize..40), 1..120),
        cpm in any::<bool>(),
        gamma in 0.01f64..1.0,
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, &edges);
        prop_assume!(g.num_edges() > 0);
        let r = leiden(&g, &LeidenConfig::new(objective(cpm, gamma), seed)).unwrap();
        for c in r.partition.clusters() {
            prop_assert!(is_connected_within(&g, &c));
        }
        // Never worse than leaving every node alone.
        let obj = objective(cpm, gamma);
        prop_assert!(r.quality >= quality(&g, &Partition::singletons(n), &obj).unwrap() - 1e-9);
    }
}
