use gfen::admm::{fit_map, AdmmOptions, NodeLoss, PenaltyConfig};
use gfen::graph::{EdgeGraph, EdgeKind};
use gfen::selection::{bayes_optimize, gp_posterior, SearchSpace};
use gfen::tree::BinomialData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> AdmmOptions {
    AdmmOptions {
        tol: 1e-10,
        max_iter: 100_000,
        ..AdmmOptions::default()
    }
}

fn grid(n: usize) -> EdgeGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            let v = s * n + t;
            if t + 1 < n {
                edges.push((v, v + 1, EdgeKind::Temporal));
            }
            if s + 1 < n {
                edges.push((v, v + n, EdgeKind::Spatial));
            }
        }
    }
    EdgeGraph::new(n * n, edges).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn relabeling_vertices_relabels_the_fit() {
    let g = grid(4);
    let n = g.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let attempts: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
    let successes: Vec<f64> = attempts
        .iter()
        .map(|&a| (a * rng.random_range(0.0..1.0)).floor())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.reverse();
    perm.swap(2, 9);
    let p = PenaltyConfig::new(0.3, 0.5, 0.2, 1.0);
    let base = fit_map(
        &NodeLoss::Binomial(BinomialData {
            attempts: attempts.clone(),
            successes: successes.clone(),
        }),
        &g,
        &p,
        &tight(),
    )
    .unwrap();
    let mut pa = vec![0.0; n];
    let mut ps = vec![0.0; n];
    for v in 0..n {
        pa[perm[v]] = attempts[v];
        ps[perm[v]] = successes[v];
    }
    let moved = fit_map(
        &NodeLoss::Binomial(BinomialData {
            attempts: pa,
            successes: ps,
        }),
        &g.permuted(&perm).unwrap(),
        &p,
        &tight(),
    )
    .unwrap();
    for v in 0..n {
        assert!((base.field.beta[v] - moved.field.beta[perm[v]]).abs() < 1e-6);
    }
}

#[test]
fn shifting_gaussian_data_shifts_the_fit() {
    let g = grid(4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let y: Vec<Option<f64>> = (0..16)
        .map(|i| (i % 5 != 0).then(|| rng.random_range(-2.0..2.0)))
        .collect();
    let p = PenaltyConfig::new(0.2, 0.4, 0.1, 0.3);
    let a = fit_map(&NodeLoss::gaussian(&y), &g, &p, &tight()).unwrap();
    let shifted: Vec<Option<f64>> = y.iter().map(|v| v.map(|x| x + 7.5)).collect();
    let b = fit_map(&NodeLoss::gaussian(&shifted), &g, &p, &tight()).unwrap();
    let back: Vec<f64> = b.field.beta.iter().map(|x| x - 7.5).collect();
    assert!(max_diff(&a.field.beta, &back) < 1e-6);
}

#[test]
fn initial_step_does_not_change_the_solution() {
    let g = EdgeGraph::chain(3, EdgeKind::Spatial);
    let loss = NodeLoss::gaussian(&[Some(-1.0), None, Some(2.0)]);
    let p = PenaltyConfig::new(0.4, 0.7, 0.0, 0.0);
    let fits: Vec<Vec<f64>> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&s| {
            let opts = AdmmOptions {
                initial_step: s,
                ..tight()
            };
            let r = fit_map(&loss, &g, &p, &opts).unwrap();
            assert!(r.converged);
            r.field.beta
        })
        .collect();
    assert!(max_diff(&fits[0], &fits[1]) < 1e-6);
    assert!(max_diff(&fits[1], &fits[2]) < 1e-6);
}

#[test]
fn gp_interpolates_as_noise_vanishes() {
    let points = vec![
        vec![0.0, 1.0],
        vec![2.0, -1.0],
        vec![3.0, 3.0],
        vec![-1.0, 0.5],
    ];
    let values = [0.3, -1.2, 2.0, 0.7];
    let (mean, var) = gp_posterior(&points, &values, 0.5, 1e-6, &points);
    for i in 0..4 {
        assert!((mean[i] - values[i]).abs() < 1e-4, "{mean:?}");
        assert!(var[i] < 1e-4);
    }
}

#[test]
fn best_so_far_never_increases() {
    let space = SearchSpace::gfen();
    let state = bayes_optimize(space, 6, 4, 3, |x| {
        Ok(x.iter().map(|v| (v - 2.0).powi(2)).sum())
    });
    assert_eq!(state.losses.len(), 24);
    let mut best = f64::INFINITY;
    let mut trace = Vec::new();
    for chunk in state.losses.chunks(4) {
        best = chunk.iter().cloned().fold(best, f64::min);
        trace.push(best);
    }
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    let i = state.select_best().unwrap();
    assert_eq!(state.losses[i], best);
}
