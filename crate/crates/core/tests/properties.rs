use gfen::density::{reconstruct_density, SplitField};
use gfen::graph::{decompose_edges, EdgeKind};
use gfen::tree::{bin_observations, build_quantile_tree, TreeConfig};
use gfen::tv::{total_variation, tv1_prox, tv2_prox};
use gfen::Query;
use proptest::prelude::*;

fn norm(e: (usize, usize, EdgeKind)) -> (usize, usize, bool) {
    (e.0.min(e.1), e.0.max(e.1), e.2 == EdgeKind::Spatial)
}

/// Primal solution of the 1D lasso prox from its box-constrained dual.
fn tv1_dual(y: &[f64], lam: f64) -> Vec<f64> {
    let n = y.len();
    let mut x = y.to_vec();
    let mut u = vec![0.0; n.saturating_sub(1)];
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for i in 0..u.len() {
            let new = (u[i] + (x[i] - x[i + 1]) / 2.0).clamp(-lam, lam);
            let d = new - u[i];
            u[i] = new;
            x[i] -= d;
            x[i + 1] += d;
            change = change.max(d.abs());
        }
        if change < 1e-14 {
            break;
        }
    }
    x
}

fn edge_list() -> impl Strategy<Value = (usize, Vec<(usize, usize, EdgeKind)>)> {
    (2usize..12).prop_flat_map(|n| {
        let edge = (0..n, 0..n, any::<bool>()).prop_filter_map("self loop", |(a, b, s)| {
            (a != b).then_some((
                a,
                b,
                if s {
                    EdgeKind::Spatial
                } else {
                    EdgeKind::Temporal
                },
            ))
        });
        (Just(n), prop::collection::vec(edge, 0..30))
    })
}

proptest! {
    #[test]
    fn trails_cover_every_edge_once((n, edges) in edge_list()) {
        let trails = decompose_edges(n, &edges);
        let mut got: Vec<_> = trails.edge_multiset().into_iter().map(norm).collect();
        let mut want: Vec<_> = edges.iter().copied().map(norm).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn tree_leaves_partition_support(samples in prop::collection::vec(0.0f64..80.0, 20..300), depth in 1usize..5) {
        let build = build_quantile_tree(&samples, &TreeConfig { depth, ..TreeConfig::default() }).unwrap();
        let tree = build.tree;
        tree.validate().unwrap();
        let counts = bin_observations(&tree, std::slice::from_ref(&samples)).unwrap();
        prop_assert_eq!(counts.sample_sizes()[0] as usize, samples.len());
        for &y in &samples {
            let hits = tree.leaves().iter().filter(|l| l.lo <= y && y < l.hi).count();
            prop_assert!(hits == 1 || y == tree.support().1);
        }
    }

    #[test]
    fn masses_normalized(seed_betas in prop::collection::vec(-30.0f64..30.0, 7)) {
        let samples: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let tree = build_quantile_tree(&samples, &TreeConfig::balanced(3)).unwrap().tree;
        let fields: Vec<SplitField> = seed_betas.iter().map(|&b| SplitField::new(vec![b, -b])).collect();
        let model = reconstruct_density(&tree, &fields).unwrap();
        for v in 0..2 {
            prop_assert!((model.masses(v).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(model.masses(v).iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn tv1_matches_dual_solver(y in prop::collection::vec(-5.0f64..5.0, 1..30), lam in 0.0f64..4.0) {
        let a = tv1_prox(&y, lam);
        let b = tv1_dual(&y, lam);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-7, "{p} vs {q}");
        }
    }

    #[test]
    fn prox_preserves_mean_and_shrinks_variation(y in prop::collection::vec(-5.0f64..5.0, 1..40), lam in 0.0f64..5.0) {
        let sum: f64 = y.iter().sum();
        for (z, p) in [(tv1_prox(&y, lam), 1u8), (tv2_prox(&y, lam), 2)] {
            prop_assert!((z.iter().sum::<f64>() - sum).abs() < 1e-8);
            prop_assert!(total_variation(&z, p) <= total_variation(&y, p) + 1e-9);
        }
    }

    #[test]
    fn quantiles_monotone(betas in prop::collection::vec(-4.0f64..4.0, 7), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let samples: Vec<f64> = (0..64).map(|i| i as f64 * 0.5).collect();
        let tree = build_quantile_tree(&samples, &TreeConfig::balanced(3)).unwrap().tree;
        let fields: Vec<SplitField> = betas.iter().map(|&b| SplitField::new(vec![b])).collect();
        let model = reconstruct_density(&tree, &fields).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ql = model.query(0, Query::Quantile(lo)).unwrap();
        let qh = model.query(0, Query::Quantile(hi)).unwrap();
        prop_assert!(ql <= qh + 1e-12);
        let iqr = model.query(0, Query::Iqr).unwrap();
        prop_assert!(iqr >= 0.0);
    }
}
