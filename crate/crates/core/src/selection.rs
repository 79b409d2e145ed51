//! Node-wise cross-validation and Gaussian-process Bayesian optimization of
//! the penalty weights.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{fit_map, AdmmOptions, NodeLoss, PenaltyConfig, GFL_RIDGE};
use crate::density::log_sigmoid;
use crate::error::{GfenError, Result};
use crate::graph::EdgeGraph;
use crate::tree::{BinomialData, SplitCounts};

/// Vertex fold labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Random vertex partition into `k` folds whose sizes differ by at most one.
pub fn assign_folds(n_vertices: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(GfenError::InvalidArgument("need at least 2 folds".into()));
    }
    if k > n_vertices {
        return Err(GfenError::InvalidArgument(format!(
            "{k} folds for only {n_vertices} vertices"
        )));
    }
    let mut order: Vec<usize> = (0..n_vertices).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n_vertices];
    for (i, &v) in order.iter().enumerate() {
        labels[v] = i % k;
    }
    Ok(FoldAssignment { k, labels })
}

/// Negative binomial log-likelihood of `s` successes in `n` attempts at
/// log-odds `beta`, without the binomial coefficient.
pub fn binomial_nll(n: f64, s: f64, beta: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    -(s * log_sigmoid(beta) + (n - s) * log_sigmoid(-beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub penalties: PenaltyConfig,
    /// Held-out negative log-likelihood divided by the number of data points.
    pub mean_nll: f64,
    /// Summed held-out negative log-likelihood per fold.
    pub fold_nll: Vec<f64>,
    /// Held-out data points per fold.
    pub fold_points: Vec<f64>,
    pub converged: bool,
}

fn cv_options(penalties: &PenaltyConfig, opts: &AdmmOptions) -> AdmmOptions {
    let mut o = opts.clone();
    if !penalties.has_l2() {
        o.ridge = o.ridge.max(GFL_RIDGE);
    }
    o
}

/// Held-out loss for one fold summed over the given splits.
fn fold_loss(
    splits: &[BinomialData],
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    folds: &FoldAssignment,
    fold: usize,
    opts: &AdmmOptions,
) -> Result<(f64, bool)> {
    let mut total = 0.0;
    let mut converged = true;
    for data in splits {
        let held: Vec<usize> = (0..data.len())
            .filter(|&v| folds.labels[v] == fold && data.attempts[v] > 0.0)
            .collect();
        if held.is_empty() {
            continue;
        }
        let train = data.masked(|v| folds.labels[v] == fold);
        let fit = fit_map(&NodeLoss::Binomial(train), graph, penalties, opts)?;
        converged &= fit.converged;
        total += held
            .iter()
            .map(|&v| binomial_nll(data.attempts[v], data.successes[v], fit.field.beta[v]))
            .sum::<f64>();
    }
    Ok((total, converged))
}

/// Cross-validated loss of one split field.
pub fn cv_loss(
    data: &BinomialData,
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    folds: &FoldAssignment,
    opts: &AdmmOptions,
) -> Result<CvResult> {
    let points: Vec<f64> = (0..folds.k)
        .map(|f| {
            (0..data.len())
                .filter(|&v| folds.labels[v] == f)
                .map(|v| data.attempts[v])
                .sum()
        })
        .collect();
    cv_loss_splits(
        std::slice::from_ref(data),
        &points,
        graph,
        penalties,
        folds,
        opts,
    )
}

/// Cross-validated loss of the whole tree with one shared set of penalties.
///
/// The log-density of a held-out value is the sum of the split terms along
/// its path (plus a leaf-width term that does not depend on the penalties),
/// so the loss is summed over splits and divided by the number of
/// observations.
pub fn cv_loss_tree(
    counts: &SplitCounts,
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    folds: &FoldAssignment,
    opts: &AdmmOptions,
) -> Result<CvResult> {
    let sizes = counts.sample_sizes();
    let points: Vec<f64> = (0..folds.k)
        .map(|f| {
            (0..sizes.len())
                .filter(|&v| folds.labels[v] == f)
                .map(|v| sizes[v] as f64)
                .sum()
        })
        .collect();
    let splits: Vec<BinomialData> = (0..counts.n_splits()).map(|s| counts.split(s)).collect();
    cv_loss_splits(&splits, &points, graph, penalties, folds, opts)
}

fn cv_loss_splits(
    splits: &[BinomialData],
    points: &[f64],
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    folds: &FoldAssignment,
    opts: &AdmmOptions,
) -> Result<CvResult> {
    penalties.validate()?;
    if folds.labels.len() != graph.n_vertices() {
        return Err(GfenError::InvalidArgument(
            "fold labels do not match the graph".into(),
        ));
    }
    let opts = cv_options(penalties, opts);
    let per_fold: Vec<Result<(f64, bool)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            if points[f] == 0.0 {
                log::info!("fold {f} has no held-out data points");
                return Ok((0.0, true));
            }
            fold_loss(splits, graph, penalties, folds, f, &opts)
        })
        .collect();
    let mut fold_nll = Vec::with_capacity(folds.k);
    let mut converged = true;
    for r in per_fold {
        let (nll, c) = r?;
        fold_nll.push(nll);
        converged &= c;
    }
    let n: f64 = points.iter().sum();
    let mean_nll = if n > 0.0 {
        fold_nll.iter().sum::<f64>() / n
    } else {
        0.0
    };
    Ok(CvResult {
        penalties: *penalties,
        mean_nll,
        fold_nll,
        fold_points: points.to_vec(),
        converged,
    })
}

/// Which penalty weights are searched; the others stay at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Order: spatial l1, spatial l2, temporal l1, temporal l2.
    pub active: [bool; 4],
    /// Bounds on log10 of each active weight.
    pub lo: f64,
    pub hi: f64,
}

impl SearchSpace {
    pub fn gfen() -> Self {
        Self {
            active: [true; 4],
            lo: -2.0,
            hi: 7.0,
        }
    }

    pub fn gfl() -> Self {
        Self {
            active: [true, false, true, false],
            ..Self::gfen()
        }
    }

    pub fn gmrf() -> Self {
        Self {
            active: [false, true, false, true],
            ..Self::gfen()
        }
    }

    pub fn dim(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|_| rng.random_range(self.lo..=self.hi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().all(|&v| v >= self.lo && v <= self.hi)
    }

    pub fn to_penalties(&self, x: &[f64]) -> PenaltyConfig {
        let mut out = [0.0; 4];
        let mut it = x.iter();
        for (o, &a) in out.iter_mut().zip(&self.active) {
            if a {
                *o = 10f64.powf(*it.next().expect("point has too few coordinates"));
            }
        }
        PenaltyConfig::from_array(out)
    }
}

/// Radial kernel `exp(-a |x - y|^2)`.
pub fn kernel(a: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    (-a * d2).exp()
}

/// Posterior mean and variance of the latent function at `queries` given
/// noisy `values` at `points`.
pub fn gp_posterior(
    points: &[Vec<f64>],
    values: &[f64],
    a: f64,
    sigma: f64,
    queries: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    if n == 0 {
        return (vec![0.0; queries.len()], vec![1.0; queries.len()]);
    }
    let mut jitter = 0.0;
    let chol = loop {
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(a, &points[i], &points[j]) + if i == j { sigma * sigma + jitter } else { 0.0 }
        });
        match k.cholesky() {
            Some(c) => break c,
            None => jitter = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 },
        }
    };
    let alpha = chol.solve(&DVector::from_column_slice(values));
    let mut means = Vec::with_capacity(queries.len());
    let mut vars = Vec::with_capacity(queries.len());
    for q in queries {
        let ks = DVector::from_fn(n, |i, _| kernel(a, &points[i], q));
        means.push(ks.dot(&alpha));
        let v = chol
            .l()
            .solve_lower_triangular(&ks)
            .expect("triangular solve");
        vars.push((1.0 - v.norm_squared()).max(0.0));
    }
    (means, vars)
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sd = if sd > 0.0 { sd } else { 1.0 };
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Evaluated points of a Bayesian optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesOptState {
    pub space: SearchSpace,
    /// Evaluated log10 weights (active coordinates only).
    pub points: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub bandwidth: f64,
    pub noise: f64,
    pub generation: usize,
    /// Random candidate locations drawn per proposal.
    pub pool_size: usize,
}

impl BayesOptState {
    pub fn new(space: SearchSpace) -> Self {
        Self {
            space,
            points: Vec::new(),
            losses: Vec::new(),
            bandwidth: 0.15,
            noise: 0.1,
            generation: 0,
            pool_size: 512,
        }
    }

    pub fn record(&mut self, point: Vec<f64>, loss: f64) {
        self.points.push(point);
        self.losses.push(loss);
    }

    /// Posterior mean and variance on the standardized loss scale.
    pub fn posterior(&self, queries: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        if self.points.is_empty() {
            return gp_posterior(&[], &[], self.bandwidth, self.noise, queries);
        }
        gp_posterior(
            &self.points,
            &standardize(&self.losses),
            self.bandwidth,
            self.noise,
            queries,
        )
    }

    /// Next generation of `n` points: uniform at first, then the `n` pool
    /// locations with the lowest posterior draw.
    pub fn propose_candidates<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        if self.points.is_empty() {
            return (0..n).map(|_| self.space.sample(rng)).collect();
        }
        let pool: Vec<Vec<f64>> = (0..self.pool_size.max(n))
            .map(|_| self.space.sample(rng))
            .collect();
        let (mean, var) = self.posterior(&pool);
        let mut draws: Vec<(f64, usize)> = mean
            .iter()
            .zip(&var)
            .enumerate()
            .map(|(i, (m, v))| {
                let z: f64 = rng.sample(StandardNormal);
                (m + v.sqrt() * z, i)
            })
            .collect();
        draws.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        draws
            .into_iter()
            .take(n)
            .map(|(_, i)| pool[i].clone())
            .collect()
    }

    /// Index of the evaluated point with the lowest posterior mean.
    pub fn select_best(&self) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let (mean, _) = self.posterior(&self.points);
        let mut best = 0;
        for (i, m) in mean.iter().enumerate() {
            if *m < mean[best] {
                best = i;
            }
        }
        Some(best)
    }

    pub fn best_penalties(&self) -> Option<PenaltyConfig> {
        self.select_best()
            .map(|i| self.space.to_penalties(&self.points[i]))
    }
}

/// Run `generations` rounds of `per_generation` evaluations of `objective`.
/// Candidates within a generation are evaluated in parallel; failed
/// evaluations are logged and skipped.
pub fn bayes_optimize<F>(
    space: SearchSpace,
    generations: usize,
    per_generation: usize,
    seed: u64,
    objective: F,
) -> BayesOptState
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    optimize_tracked(space, generations, per_generation, seed, objective).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// Independent penalties for every split.
    #[default]
    PerSplit,
    /// One set of penalties for the whole tree.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub generations: usize,
    pub per_generation: usize,
    pub folds: usize,
    pub seed: u64,
    pub space: SearchSpace,
    pub mode: TuneMode,
    pub admm: AdmmOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            generations: 48,
            per_generation: 6,
            folds: 5,
            seed: 0,
            space: SearchSpace::gfen(),
            mode: TuneMode::PerSplit,
            admm: AdmmOptions::default(),
        }
    }
}

/// One row of the tuning log. `split` is `None` in shared mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRecord {
    pub split: Option<usize>,
    pub generation: usize,
    pub penalties: PenaltyConfig,
    pub cv_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub split: Option<usize>,
    pub best: PenaltyConfig,
    pub best_cv_nll: f64,
    pub records: Vec<TuneRecord>,
}

fn outcome(split: Option<usize>, state: &BayesOptState, gens: &[usize]) -> Result<TuneOutcome> {
    let i = state
        .select_best()
        .ok_or_else(|| GfenError::Numerical("every candidate evaluation failed".into()))?;
    let records = state
        .points
        .iter()
        .zip(&state.losses)
        .zip(gens)
        .map(|((x, &l), &g)| TuneRecord {
            split,
            generation: g,
            penalties: state.space.to_penalties(x),
            cv_nll: l,
        })
        .collect();
    Ok(TuneOutcome {
        split,
        best: state.space.to_penalties(&state.points[i]),
        best_cv_nll: state.losses[i],
        records,
    })
}

fn optimize_tracked<F>(
    space: SearchSpace,
    generations: usize,
    per_generation: usize,
    seed: u64,
    objective: F,
) -> (BayesOptState, Vec<usize>)
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = BayesOptState::new(space);
    let mut gens = Vec::new();
    for g in 0..generations {
        state.generation = g;
        let cands = state.propose_candidates(per_generation, &mut rng);
        let losses: Vec<Result<f64>> = cands.par_iter().map(|x| objective(x)).collect();
        for (x, l) in cands.into_iter().zip(losses) {
            match l {
                Ok(v) if v.is_finite() => {
                    state.record(x, v);
                    gens.push(g);
                }
                Ok(v) => log::warn!("discarding candidate {x:?}: loss {v}"),
                Err(e) => log::warn!("discarding candidate {x:?}: {e}"),
            }
        }
    }
    state.generation = generations;
    (state, gens)
}

/// Tune penalties by cross-validation: one outcome per split in per-split
/// mode, a single outcome in shared mode.
pub fn tune(
    counts: &SplitCounts,
    graph: &EdgeGraph,
    opts: &TuneOptions,
) -> Result<Vec<TuneOutcome>> {
    let folds = assign_folds(graph.n_vertices(), opts.folds, opts.seed)?;
    match opts.mode {
        TuneMode::Shared => {
            let (state, gens) = optimize_tracked(
                opts.space,
                opts.generations,
                opts.per_generation,
                opts.seed,
                |x| {
                    cv_loss_tree(
                        counts,
                        graph,
                        &opts.space.to_penalties(x),
                        &folds,
                        &opts.admm,
                    )
                    .map(|r| r.mean_nll)
                },
            );
            Ok(vec![outcome(None, &state, &gens)?])
        }
        TuneMode::PerSplit => (0..counts.n_splits())
            .map(|s| {
                let data = counts.split(s);
                let seed = opts.seed.wrapping_add(1 + s as u64);
                let (state, gens) = optimize_tracked(
                    opts.space,
                    opts.generations,
                    opts.per_generation,
                    seed,
                    |x| {
                        cv_loss(
                            &data,
                            graph,
                            &opts.space.to_penalties(x),
                            &folds,
                            &opts.admm,
                        )
                        .map(|r| r.mean_nll)
                    },
                );
                outcome(Some(s), &state, &gens)
            })
            .collect(),
    }
}

/// CSV `split,generation,lambda_s1,lambda_s2,lambda_t1,lambda_t2,cv_nll`;
/// the split column is empty in shared mode.
pub fn write_tuning_log<W: std::io::Write>(outcomes: &[TuneOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "split",
        "generation",
        "lambda_s1",
        "lambda_s2",
        "lambda_t1",
        "lambda_t2",
        "cv_nll",
    ])?;
    for o in outcomes {
        for r in &o.records {
            let p = r.penalties;
            w.write_record([
                r.split.map(|s| s.to_string()).unwrap_or_default(),
                r.generation.to_string(),
                p.spatial_l1.to_string(),
                p.spatial_l2.to_string(),
                p.temporal_l1.to_string(),
                p.temporal_l2.to_string(),
                r.cv_nll.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fold_sizes() {
        let f = assign_folds(10, 5, 1).unwrap();
        assert_eq!(f.fold_sizes(), vec![2; 5]);
        let mut s = assign_folds(11, 5, 1).unwrap().fold_sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
        assert_eq!(
            assign_folds(11, 5, 9).unwrap(),
            assign_folds(11, 5, 9).unwrap()
        );
        assert!(assign_folds(3, 5, 0).is_err());
        assert!(assign_folds(3, 1, 0).is_err());
    }

    #[test]
    fn half_odds_nll() {
        assert_abs_diff_eq!(
            binomial_nll(2.0, 1.0, 0.0),
            2.0 * 2f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_point_posterior() {
        let sigma = 0.1;
        let (m, v) = gp_posterior(&[vec![0.3, 1.0]], &[1.7], 0.15, sigma, &[vec![0.3, 1.0]]);
        assert_abs_diff_eq!(m[0], 1.7 / (1.0 + sigma * sigma), epsilon = 1e-12);
        assert_abs_diff_eq!(v[0], 1.0 - 1.0 / (1.0 + sigma * sigma), epsilon = 1e-12);
        assert_eq!(kernel(0.15, &[1.0, 2.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn duplicate_points_get_jitter() {
        let pts = vec![vec![1.0], vec![1.0]];
        let (m, _) = gp_posterior(&pts, &[1.0, 1.0], 0.15, 0.0, &[vec![1.0]]);
        assert!(m[0].is_finite());
    }

    #[test]
    fn candidates_stay_in_box() {
        let mut st = BayesOptState::new(SearchSpace::gfen());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in st.propose_candidates(6, &mut rng) {
            assert!(st.space.contains(&x));
            st.record(x.clone(), x.iter().sum());
        }
        for x in st.propose_candidates(6, &mut rng) {
            assert!(st.space.contains(&x));
        }
    }

    #[test]
    fn best_tie_goes_to_lower_index() {
        let mut st = BayesOptState::new(SearchSpace::gfl());
        st.record(vec![0.0, 0.0], 1.0);
        assert_eq!(st.select_best(), Some(0));
        let mut st = BayesOptState::new(SearchSpace::gfl());
        st.record(vec![-1.0, 0.0], 1.0);
        st.record(vec![1.0, 0.0], 1.0);
        assert_eq!(st.select_best(), Some(0));
    }

    #[test]
    fn space_maps_inactive_to_zero() {
        let p = SearchSpace::gmrf().to_penalties(&[0.0, 1.0]);
        assert_eq!(p, PenaltyConfig::new(0.0, 1.0, 0.0, 10.0));
    }
}
