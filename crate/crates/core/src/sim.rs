//! Simulated spatiotemporal density tasks and the GFL / GFEN / GMRF
//! comparison protocol.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{fit_map, AdmmOptions, NodeLoss, PenaltyConfig, GFL_RIDGE};
use crate::density::{reconstruct_density, DensityModel, SplitField};
use crate::error::{GfenError, Result};
use crate::graph::{EdgeGraph, EdgeKind};
use crate::selection::{assign_folds, cv_loss_tree, SearchSpace};
use crate::tree::{bin_observations, build_quantile_tree, SplitCounts, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    PwConstant,
    PwLinear,
    Mixed,
}

impl EffectKind {
    pub fn code(self) -> char {
        match self {
            EffectKind::PwConstant => 'c',
            EffectKind::PwLinear => 'l',
            EffectKind::Mixed => 'm',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Constant,
    Linear,
}

/// Effect vector of length `n` from four anchors placed at
/// `0, n/3, 2n/3, n`; the remainder of `n / 3` goes to the last segment.
pub fn effect_from_anchors(segments: [Segment; 3], anchors: [f64; 4], n: usize) -> Vec<f64> {
    let bounds = [0, n / 3, 2 * (n / 3), n];
    let mut out = Vec::with_capacity(n);
    for k in 0..3 {
        let (a, b) = (bounds[k], bounds[k + 1]);
        for i in a..b {
            out.push(match segments[k] {
                Segment::Constant => anchors[k],
                Segment::Linear => {
                    anchors[k] + (anchors[k + 1] - anchors[k]) * (i - a) as f64 / (b - a) as f64
                }
            });
        }
    }
    out
}

/// Random effect vector with anchors uniform on [-1, 1].
pub fn generate_effect<R: Rng>(kind: EffectKind, n: usize, rng: &mut R) -> Vec<f64> {
    let anchors: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
    let segments = match kind {
        EffectKind::PwConstant => [Segment::Constant; 3],
        EffectKind::PwLinear => [Segment::Linear; 3],
        EffectKind::Mixed => {
            let mut s: [Segment; 3] = std::array::from_fn(|_| {
                if rng.random::<bool>() {
                    Segment::Constant
                } else {
                    Segment::Linear
                }
            });
            if s.iter().all(|x| *x == s[0]) {
                let k = rng.random_range(0..3);
                s[k] = if s[k] == Segment::Constant {
                    Segment::Linear
                } else {
                    Segment::Constant
                };
            }
            s
        }
    };
    effect_from_anchors(segments, anchors, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTask {
    pub grid: usize,
    pub spatial: EffectKind,
    pub temporal: EffectKind,
    pub sigma: f64,
    pub missing: f64,
    pub samples_per_vertex: usize,
    pub eval_per_vertex: usize,
    pub outliers: bool,
    pub seed: u64,
}

impl Default for SimTask {
    fn default() -> Self {
        Self {
            grid: 15,
            spatial: EffectKind::PwConstant,
            temporal: EffectKind::PwConstant,
            sigma: 0.2,
            missing: 0.1,
            samples_per_vertex: 10,
            eval_per_vertex: 100,
            outliers: false,
            seed: 0,
        }
    }
}

impl SimTask {
    /// Short family label, e.g. `cl` or `m+o`.
    pub fn family(&self) -> String {
        let mut s = format!("{}{}", self.spatial.code(), self.temporal.code());
        if self.outliers {
            s = format!("{}+o", self.spatial.code());
        }
        s
    }

    pub fn n_vertices(&self) -> usize {
        self.grid * self.grid
    }

    /// Grid graph: locations in a chain, time points in a path; vertex
    /// `s * grid + t`.
    pub fn graph(&self) -> EdgeGraph {
        let n = self.grid;
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                let v = s * n + t;
                if s + 1 < n {
                    edges.push((v, v + n, EdgeKind::Spatial));
                }
                if t + 1 < n {
                    edges.push((v, v + 1, EdgeKind::Temporal));
                }
            }
        }
        EdgeGraph::new(n * n, edges).expect("grid edges are valid")
    }
}

/// The seven task families: spatial x temporal effect kinds plus the mixed
/// case with outliers.
pub fn task_families() -> Vec<(EffectKind, EffectKind, bool)> {
    use EffectKind::*;
    vec![
        (PwConstant, PwConstant, false),
        (PwConstant, PwLinear, false),
        (PwConstant, Mixed, false),
        (PwLinear, PwLinear, false),
        (PwLinear, Mixed, false),
        (Mixed, Mixed, false),
        (Mixed, Mixed, true),
    ]
}

/// Two-component mixture `1/2 N(m1, sigma) + 1/2 N(m2, sigma)` per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub means: Vec<(f64, f64)>,
    pub sigma: f64,
}

impl GroundTruth {
    pub fn pdf(&self, v: usize, y: f64) -> f64 {
        let (a, b) = self.means[v];
        let s = self.sigma;
        let k = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        0.5 * k * ((-0.5 * ((y - a) / s).powi(2)).exp() + (-0.5 * ((y - b) / s).powi(2)).exp())
    }

    pub fn draw<R: Rng>(&self, v: usize, sigma: f64, rng: &mut R) -> f64 {
        let (a, b) = self.means[v];
        let m = if rng.random::<bool>() { a } else { b };
        if sigma == 0.0 {
            return m;
        }
        Normal::new(m, sigma).expect("positive sigma").sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub truth: GroundTruth,
    pub missing: Vec<bool>,
    /// Training draws per vertex; empty at missing vertices.
    pub observed: Vec<Vec<f64>>,
    /// Fresh draws from the truth at every vertex.
    pub eval: Vec<Vec<f64>>,
    pub n_outliers: usize,
}

pub fn sample_task(task: &SimTask) -> Result<SimData> {
    if !(0.0..1.0).contains(&task.missing) {
        return Err(GfenError::InvalidArgument(
            "missing fraction must be in [0, 1)".into(),
        ));
    }
    if task.grid < 3 {
        return Err(GfenError::InvalidArgument("grid must be at least 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let n = task.grid;
    let nu1 = generate_effect(task.spatial, n, &mut rng);
    let nu2 = generate_effect(task.spatial, n, &mut rng);
    let mu1 = generate_effect(task.temporal, n, &mut rng);
    let mu2 = generate_effect(task.temporal, n, &mut rng);
    let means = (0..n * n)
        .map(|v| {
            let (s, t) = (v / n, v % n);
            (nu1[s] * mu1[t], nu2[s] * mu2[t])
        })
        .collect();
    let truth = GroundTruth {
        means,
        sigma: task.sigma,
    };
    let nv = n * n;
    let n_missing = (task.missing * nv as f64).round() as usize;
    let mut missing = vec![false; nv];
    for i in sample_indices(&mut rng, nv, n_missing) {
        missing[i] = true;
    }
    let mut observed: Vec<Vec<f64>> = (0..nv)
        .map(|v| {
            if missing[v] {
                Vec::new()
            } else {
                (0..task.samples_per_vertex)
                    .map(|_| truth.draw(v, task.sigma, &mut rng))
                    .collect()
            }
        })
        .collect();
    let mut n_outliers = 0;
    if task.outliers {
        let obs: Vec<usize> = (0..nv).filter(|&v| !missing[v]).collect();
        let k = obs.len() / 2;
        let mut chosen: Vec<usize> = sample_indices(&mut rng, obs.len(), k)
            .into_iter()
            .map(|i| obs[i])
            .collect();
        chosen.sort_unstable();
        for v in chosen {
            let y = truth.draw(v, 10.0 * task.sigma, &mut rng);
            observed[v].push(y);
            n_outliers += 1;
        }
    }
    let eval = (0..nv)
        .map(|v| {
            (0..task.eval_per_vertex)
                .map(|_| truth.draw(v, task.sigma, &mut rng))
                .collect()
        })
        .collect();
    Ok(SimData {
        truth,
        missing,
        observed,
        eval,
        n_outliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gfl,
    Gfen,
    Gmrf,
}

impl Method {
    pub fn all() -> [Method; 3] {
        [Method::Gfl, Method::Gfen, Method::Gmrf]
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Gfl => "gfl",
            Method::Gfen => "gfen",
            Method::Gmrf => "gmrf",
        }
    }

    pub fn space(self) -> SearchSpace {
        match self {
            Method::Gfl => SearchSpace::gfl(),
            Method::Gfen => SearchSpace::gfen(),
            Method::Gmrf => SearchSpace::gmrf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub n_lambda: usize,
    pub folds: usize,
    pub tree_depth: usize,
    pub seed: u64,
    pub admm: AdmmOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            n_lambda: 24,
            folds: 5,
            tree_depth: 3,
            seed: 0,
            admm: AdmmOptions {
                tol: 1e-3,
                max_iter: 2000,
                ..AdmmOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub penalties: PenaltyConfig,
    pub cv_nll: f64,
    /// Mean evaluation negative log-likelihood over all vertices.
    pub eval_nll: f64,
    /// Same, restricted to missing vertices.
    pub eval_nll_missing: f64,
    /// Draws whose fit failed or produced a non-finite loss.
    pub discarded: usize,
    /// Draws scored from a fit that hit the iteration limit.
    pub unconverged: usize,
}

/// Tree on the pooled training draws: balanced quantile splits on
/// `[min, max]` padded by `3 sigma`.
pub fn sim_tree(data: &SimData, depth: usize) -> Result<crate::tree::DyadicTree> {
    let pooled: Vec<f64> = data.observed.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(GfenError::InvalidArgument("no observed draws".into()));
    }
    let lo = pooled.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * data.truth.sigma;
    let hi = pooled.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * data.truth.sigma;
    let config = TreeConfig {
        support: Some((lo, hi)),
        ..TreeConfig::balanced(depth)
    };
    Ok(build_quantile_tree(&pooled, &config)?.tree)
}

/// Fit every split with the same penalties.
pub fn fit_tree(
    counts: &SplitCounts,
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    opts: &AdmmOptions,
) -> Result<(Vec<SplitField>, bool)> {
    let mut opts = opts.clone();
    if !penalties.has_l2() {
        opts.ridge = opts.ridge.max(GFL_RIDGE);
    }
    let fits: Vec<Result<_>> = (0..counts.n_splits())
        .into_par_iter()
        .map(|s| {
            fit_map(
                &NodeLoss::Binomial(counts.split(s)),
                graph,
                penalties,
                &opts,
            )
        })
        .collect();
    let mut fields = Vec::with_capacity(fits.len());
    let mut converged = true;
    for f in fits {
        let f = f?;
        converged &= f.converged;
        fields.push(f.field);
    }
    Ok((fields, converged))
}

fn evaluate(model: &DensityModel, data: &SimData) -> (f64, f64) {
    let per_vertex: Vec<f64> = (0..data.eval.len())
        .map(|v| model.mean_nll(v, &data.eval[v]))
        .collect();
    let all = per_vertex.iter().sum::<f64>() / per_vertex.len() as f64;
    let miss: Vec<f64> = per_vertex
        .iter()
        .zip(&data.missing)
        .filter(|(_, m)| **m)
        .map(|(x, _)| *x)
        .collect();
    let miss = if miss.is_empty() {
        f64::NAN
    } else {
        miss.iter().sum::<f64>() / miss.len() as f64
    };
    (all, miss)
}

/// Mean evaluation NLL of the true density (a lower bound in expectation).
pub fn truth_nll(data: &SimData) -> f64 {
    let n = data.eval.len();
    (0..n)
        .map(|v| {
            data.eval[v]
                .iter()
                .map(|&y| -data.truth.pdf(v, y).ln())
                .sum::<f64>()
                / data.eval[v].len() as f64
        })
        .sum::<f64>()
        / n as f64
}

/// One density shared by all vertices, fitted to the pooled draws.
pub fn pooled_density(
    counts: &SplitCounts,
    tree: &crate::tree::DyadicTree,
) -> Result<DensityModel> {
    let fields: Vec<SplitField> = (0..counts.n_splits())
        .map(|s| {
            let d = counts.split(s);
            let n: f64 = d.attempts.iter().sum();
            let k: f64 = d.successes.iter().sum();
            let b = ((k + 0.5) / (n - k + 0.5)).ln();
            SplitField::new(vec![b; counts.n_vertices()])
        })
        .collect();
    reconstruct_density(tree, &fields)
}

/// Select penalties for one method by random search with node-wise CV,
/// refit on all data and score the held-out truth draws.
pub fn run_method(
    data: &SimData,
    graph: &EdgeGraph,
    counts: &SplitCounts,
    tree: &crate::tree::DyadicTree,
    method: Method,
    opts: &BenchOptions,
) -> Result<MethodResult> {
    let folds = assign_folds(graph.n_vertices(), opts.folds, opts.seed)?;
    let space = method.space();
    let mut rng = ChaCha8Rng::seed_from_u64(
        opts.seed ^ (method as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let draws: Vec<PenaltyConfig> = (0..opts.n_lambda)
        .map(|_| space.to_penalties(&space.sample(&mut rng)))
        .collect();
    let mut best: Option<(PenaltyConfig, f64)> = None;
    let mut discarded = 0;
    let mut unconverged = 0;
    for p in draws {
        match cv_loss_tree(counts, graph, &p, &folds, &opts.admm) {
            Ok(r) if r.mean_nll.is_finite() => {
                if !r.converged {
                    unconverged += 1;
                }
                if best.is_none_or(|(_, b)| r.mean_nll < b) {
                    best = Some((p, r.mean_nll));
                }
            }
            Ok(_) => {
                log::info!(
                    "{}: discarding draw {p:?} with non-finite loss",
                    method.name()
                );
                discarded += 1;
            }
            Err(e) => {
                log::info!("{}: discarding draw {p:?}: {e}", method.name());
                discarded += 1;
            }
        }
    }
    let (penalties, cv_nll) = best.ok_or_else(|| {
        GfenError::Numerical(format!(
            "{}: every hyperparameter draw failed",
            method.name()
        ))
    })?;
    let (fields, _) = fit_tree(counts, graph, &penalties, &opts.admm)?;
    let model = reconstruct_density(tree, &fields)?;
    let (eval_nll, eval_nll_missing) = evaluate(&model, data);
    Ok(MethodResult {
        method,
        penalties,
        cv_nll,
        eval_nll,
        eval_nll_missing,
        discarded,
        unconverged,
    })
}

/// Sample a task and run every requested method on it.
pub fn run_benchmark(
    task: &SimTask,
    methods: &[Method],
    opts: &BenchOptions,
) -> Result<Vec<MethodResult>> {
    let data = sample_task(task)?;
    let graph = task.graph();
    let tree = sim_tree(&data, opts.tree_depth)?;
    let counts = bin_observations(&tree, &data.observed)?;
    methods
        .iter()
        .map(|&m| run_method(&data, &graph, &counts, &tree, m, opts))
        .collect()
}

/// Pooled-density evaluation NLL at missing vertices for a sampled task.
pub fn pooled_baseline(data: &SimData, depth: usize) -> Result<(f64, f64)> {
    let tree = sim_tree(data, depth)?;
    let counts = bin_observations(&tree, &data.observed)?;
    Ok(evaluate(&pooled_density(&counts, &tree)?, data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task: String,
    pub missing: f64,
    pub method: Method,
    pub replicate: usize,
    pub lambda_s1: f64,
    pub lambda_s2: f64,
    pub lambda_t1: f64,
    pub lambda_t2: f64,
    pub eval_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: usize,
    pub replicates: usize,
    pub missing: Vec<f64>,
    pub sigma: f64,
    pub samples_per_vertex: usize,
    pub bench: BenchOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: 15,
            replicates: 8,
            missing: vec![0.1, 0.8],
            sigma: 0.2,
            samples_per_vertex: 10,
            bench: BenchOptions::default(),
        }
    }
}

impl SweepOptions {
    /// 30 x 30 grid with 48 replicates.
    pub fn full_scale() -> Self {
        Self {
            grid: 30,
            replicates: 48,
            ..Self::default()
        }
    }
}

/// All task families under every missing regime.
pub fn run_sweep(opts: &SweepOptions) -> Result<Vec<BenchRow>> {
    let mut jobs = Vec::new();
    for (mi, &missing) in opts.missing.iter().enumerate() {
        for (fi, &(spatial, temporal, outliers)) in task_families().iter().enumerate() {
            for r in 0..opts.replicates {
                let seed = opts
                    .bench
                    .seed
                    .wrapping_add(((mi * 1000 + fi) * 100_000 + r) as u64);
                let task = SimTask {
                    grid: opts.grid,
                    spatial,
                    temporal,
                    sigma: opts.sigma,
                    missing,
                    samples_per_vertex: opts.samples_per_vertex,
                    outliers,
                    seed,
                    ..SimTask::default()
                };
                jobs.push((task, r));
            }
        }
    }
    let results: Vec<Result<Vec<BenchRow>>> = jobs
        .par_iter()
        .map(|(task, r)| {
            let bench = BenchOptions {
                seed: task.seed,
                ..opts.bench.clone()
            };
            let res = run_benchmark(task, &Method::all(), &bench)?;
            Ok(res
                .into_iter()
                .map(|m| BenchRow {
                    task: task.family(),
                    missing: task.missing,
                    method: m.method,
                    replicate: *r,
                    lambda_s1: m.penalties.spatial_l1,
                    lambda_s2: m.penalties.spatial_l2,
                    lambda_t1: m.penalties.temporal_l1,
                    lambda_t2: m.penalties.temporal_l2,
                    eval_nll: m.eval_nll,
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Mean and standard error per task family, missing regime and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub missing: f64,
    pub gfl: f64,
    pub gfl_se: f64,
    pub gfen: f64,
    pub gfen_se: f64,
    pub gmrf: f64,
    pub gmrf_se: f64,
}

impl SummaryRow {
    /// GFEN has the lowest mean or is within two standard errors of it.
    pub fn gfen_competitive(&self) -> bool {
        let best = self.gfl.min(self.gmrf).min(self.gfen);
        self.gfen <= best + 2.0 * self.gfen_se.max(0.0)
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(t, m)| *t == r.task && *m == r.missing) {
            keys.push((r.task.clone(), r.missing));
        }
    }
    keys.into_iter()
        .map(|(task, missing)| {
            let stat = |method: Method| {
                let xs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.task == task && r.missing == missing && r.method == method)
                    .map(|r| r.eval_nll)
                    .collect();
                mean_se(&xs)
            };
            let (gfl, gfl_se) = stat(Method::Gfl);
            let (gfen, gfen_se) = stat(Method::Gfen);
            let (gmrf, gmrf_se) = stat(Method::Gmrf);
            SummaryRow {
                task,
                missing,
                gfl,
                gfl_se,
                gfen,
                gfen_se,
                gmrf,
                gmrf_se,
            }
        })
        .collect()
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tent_effect() {
        let e = effect_from_anchors([Segment::Linear; 3], [0.0, 1.0, 0.0, 1.0], 9);
        let want = [
            0.0,
            1.0 / 3.0,
            2.0 / 3.0,
            1.0,
            2.0 / 3.0,
            1.0 / 3.0,
            0.0,
            1.0 / 3.0,
            2.0 / 3.0,
        ];
        for (a, b) in e.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_plateaus_and_remainder() {
        let e = effect_from_anchors([Segment::Constant; 3], [0.5, -0.5, 0.2, 0.9], 10);
        assert_eq!(e, vec![0.5, 0.5, 0.5, -0.5, -0.5, -0.5, 0.2, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn equal_anchors_give_constant() {
        for seg in [
            [Segment::Constant; 3],
            [Segment::Linear; 3],
            [Segment::Constant, Segment::Linear, Segment::Constant],
        ] {
            assert!(effect_from_anchors(seg, [0.3; 4], 11)
                .iter()
                .all(|&x| x == 0.3));
        }
    }

    #[test]
    fn mixed_effect_has_both_segment_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let e = generate_effect(EffectKind::Mixed, 30, &mut rng);
            assert_eq!(e.len(), 30);
            assert!(e.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn missing_count_is_exact() {
        let task = SimTask {
            grid: 30,
            missing: 0.8,
            ..SimTask::default()
        };
        let d = sample_task(&task).unwrap();
        assert_eq!(d.missing.iter().filter(|m| **m).count(), 720);
        assert!(d
            .observed
            .iter()
            .zip(&d.missing)
            .all(|(o, m)| o.is_empty() == *m));
        assert!(d.eval.iter().all(|e| e.len() == 100));
        assert_eq!(sample_task(&task).unwrap(), d);
    }

    #[test]
    fn zero_sigma_point_masses() {
        let task = SimTask {
            sigma: 0.0,
            ..SimTask::default()
        };
        let d = sample_task(&task).unwrap();
        for (v, obs) in d.observed.iter().enumerate() {
            let (a, b) = d.truth.means[v];
            assert!(obs.iter().all(|&y| y == a || y == b));
        }
    }

    #[test]
    fn outliers_injected_at_half() {
        let task = SimTask {
            outliers: true,
            spatial: EffectKind::Mixed,
            temporal: EffectKind::Mixed,
            ..SimTask::default()
        };
        let d = sample_task(&task).unwrap();
        let observed = d.missing.iter().filter(|m| !**m).count();
        assert_eq!(d.n_outliers, observed / 2);
        assert_eq!(task.family(), "m+o");
    }

    #[test]
    fn grid_graph_counts() {
        let g = SimTask {
            grid: 4,
            ..SimTask::default()
        }
        .graph();
        assert_eq!(g.n_vertices(), 16);
        assert_eq!(g.edges().len(), 24);
    }
}
