//! Posterior sampling of a split field by Gibbs sweeps, drawing each
//! log-concave vertex conditional with adaptive rejection sampling.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Barrier;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::PenaltyConfig;
use crate::density::{log_sigmoid, sigmoid, SplitField};
use crate::error::{GfenError, Result};
use crate::graph::EdgeGraph;
use crate::tree::BinomialData;

/// Unnormalized log conditional of one vertex given its neighbors:
///
/// ```text
/// s log w + (n - s) log(1 - w) - sum_w [ l1 |b - b_w| + (l2 / 2) (b - b_w)^2 ] - ridge b^2
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub attempts: f64,
    pub successes: f64,
    /// `(neighbor value, l1, l2)` per incident edge.
    pub terms: Vec<(f64, f64, f64)>,
    pub ridge: f64,
}

impl Conditional {
    pub fn new(
        attempts: f64,
        successes: f64,
        terms: Vec<(f64, f64, f64)>,
        ridge: f64,
    ) -> Result<Self> {
        let pulls = ridge > 0.0 || terms.iter().any(|&(_, l1, l2)| l1 > 0.0 || l2 > 0.0);
        if !pulls && (successes <= 0.0 || successes >= attempts) {
            return Err(GfenError::InvalidArgument(format!(
                "improper conditional: {successes} of {attempts} with no penalty"
            )));
        }
        Ok(Self {
            attempts,
            successes,
            terms,
            ridge,
        })
    }

    pub fn value(&self, b: f64) -> f64 {
        let mut h = 0.0;
        if self.attempts > 0.0 {
            h += self.successes * log_sigmoid(b)
                + (self.attempts - self.successes) * log_sigmoid(-b);
        }
        for &(w, l1, l2) in &self.terms {
            let d = b - w;
            h -= l1 * d.abs() + 0.5 * l2 * d * d;
        }
        h - self.ridge * b * b
    }

    /// Value and a supergradient (the derivative away from the kinks).
    pub fn value_and_slope(&self, b: f64) -> (f64, f64) {
        let mut g = self.successes - self.attempts * sigmoid(b);
        for &(w, l1, l2) in &self.terms {
            let d = b - w;
            g -=
                l1 * if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                } + l2 * d;
        }
        (self.value(b), g - 2.0 * self.ridge * b)
    }

    /// Upper bound on the second derivative.
    pub fn curvature_bound(&self) -> f64 {
        -self.terms.iter().map(|t| t.2).sum::<f64>() - 2.0 * self.ridge
    }

    /// Starting bracket: the extremes of the neighbor values and the local
    /// empirical logit, pushed outward by `perturbation`.
    pub fn bracket(&self, perturbation: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if self.attempts > 0.0 {
            let m = ((self.successes + 0.5) / (self.attempts - self.successes + 0.5)).ln();
            lo = lo.min(m);
            hi = hi.max(m);
        }
        for &(w, _, _) in &self.terms {
            lo = lo.min(w);
            hi = hi.max(w);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        (lo - perturbation, hi + perturbation)
    }
}

/// Build the conditional of vertex `v` from the current field.
pub fn conditional_logdensity(
    v: usize,
    beta: &[f64],
    neighbors: &[Vec<(usize, crate::graph::EdgeKind)>],
    data: &BinomialData,
    penalties: &PenaltyConfig,
    ridge: f64,
) -> Result<Conditional> {
    let terms = neighbors[v]
        .iter()
        .map(|&(w, k)| (beta[w], penalties.l1(k), penalties.l2(k)))
        .collect();
    Conditional::new(data.attempts[v], data.successes[v], terms, ridge)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArsOptions {
    /// Outward push of the initial bracket in logit units.
    pub perturbation: f64,
    /// Number of geometric widenings tried before giving up.
    pub max_widenings: usize,
    pub max_abscissae: usize,
}

impl Default for ArsOptions {
    fn default() -> Self {
        Self {
            perturbation: 1.0,
            max_widenings: 60,
            max_abscissae: 40,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    h: f64,
    g: f64,
}

/// Upper hull of a concave function from tangents at sorted abscissae.
struct Hull {
    pts: Vec<Point>,
    /// Tangent intersections; `z[j]` separates tangents `j` and `j + 1`.
    z: Vec<f64>,
    log_area: Vec<f64>,
    total: f64,
}

impl Hull {
    fn new(pts: Vec<Point>) -> Self {
        let mut hull = Hull {
            pts,
            z: Vec::new(),
            log_area: Vec::new(),
            total: 0.0,
        };
        hull.rebuild();
        hull
    }

    fn tangent(&self, j: usize, x: f64) -> f64 {
        let p = self.pts[j];
        p.h + p.g * (x - p.x)
    }

    fn rebuild(&mut self) {
        let k = self.pts.len();
        self.z.clear();
        for j in 0..k - 1 {
            let (a, b) = (self.pts[j], self.pts[j + 1]);
            let dg = a.g - b.g;
            let z = if dg.abs() > 1e-12 * (1.0 + a.g.abs() + b.g.abs()) {
                (b.h - a.h - b.x * b.g + a.x * a.g) / dg
            } else {
                0.5 * (a.x + b.x)
            };
            self.z.push(z.clamp(a.x, b.x));
        }
        self.log_area.clear();
        for j in 0..k {
            let lo = if j == 0 {
                f64::NEG_INFINITY
            } else {
                self.z[j - 1]
            };
            let hi = if j + 1 == k { f64::INFINITY } else { self.z[j] };
            self.log_area.push(self.segment_log_area(j, lo, hi));
        }
        let m = self
            .log_area
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        self.total = m + self
            .log_area
            .iter()
            .map(|a| (a - m).exp())
            .sum::<f64>()
            .ln();
    }

    fn segment_log_area(&self, j: usize, lo: f64, hi: f64) -> f64 {
        let g = self.pts[j].g;
        let w = hi - lo;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if g == 0.0 {
            return self.pts[j].h + w.ln();
        }
        let top = if g > 0.0 {
            self.tangent(j, hi)
        } else {
            self.tangent(j, lo)
        };
        top + (-(-g.abs() * w).exp_m1()).ln() - g.abs().ln()
    }

    fn upper(&self, x: f64) -> f64 {
        let j = self.z.partition_point(|&z| z < x);
        self.tangent(j, x)
    }

    fn lower(&self, x: f64) -> f64 {
        let k = self.pts.len();
        if x < self.pts[0].x || x > self.pts[k - 1].x {
            return f64::NEG_INFINITY;
        }
        let j = self.pts.partition_point(|p| p.x < x);
        if j == 0 {
            return self.pts[0].h;
        }
        let (a, b) = (self.pts[j - 1], self.pts[j]);
        ((b.x - x) * a.h + (x - a.x) * b.h) / (b.x - a.x)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let k = self.pts.len();
        let target = rng.random::<f64>();
        let mut acc = 0.0;
        let mut j = k - 1;
        for (i, a) in self.log_area.iter().enumerate() {
            acc += (a - self.total).exp();
            if target < acc {
                j = i;
                break;
            }
        }
        let lo = if j == 0 {
            f64::NEG_INFINITY
        } else {
            self.z[j - 1]
        };
        let hi = if j + 1 == k { f64::INFINITY } else { self.z[j] };
        let g = self.pts[j].g;
        let r: f64 = rng.random();
        if g == 0.0 {
            return lo + r * (hi - lo);
        }
        let c = g.abs();
        let spread = -(-c * (hi - lo)).exp_m1();
        let off = (-r * spread).ln_1p() / c;
        if g > 0.0 {
            hi + off
        } else {
            lo - off
        }
    }

    fn insert(&mut self, p: Point) {
        let i = self.pts.partition_point(|q| q.x < p.x);
        if self.pts.get(i).is_some_and(|q| q.x == p.x) {
            return;
        }
        self.pts.insert(i, p);
        self.rebuild();
    }
}

/// One exact draw from the density proportional to `exp(h)`, where `h` is
/// concave and `h_slope` returns its value and a supergradient.
pub fn ars_sample<R, F>(
    h_slope: F,
    init_lo: f64,
    init_hi: f64,
    opts: &ArsOptions,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng,
    F: Fn(f64) -> (f64, f64),
{
    let eval = |x: f64| {
        let (h, g) = h_slope(x);
        Point { x, h, g }
    };
    let mut lo = eval(init_lo.min(init_hi));
    let mut hi = eval(init_hi.max(init_lo));
    let base = opts.perturbation.max(1e-3);
    let mut step = base;
    let mut tries = 0;
    while !(lo.g > 0.0) {
        tries += 1;
        if tries > opts.max_widenings || !lo.h.is_finite() {
            return Err(GfenError::Numerical(format!(
                "no positive slope found below {} (slope {})",
                lo.x, lo.g
            )));
        }
        lo = eval(lo.x - step);
        step *= 2.0;
    }
    step = base;
    tries = 0;
    while !(hi.g < 0.0) {
        tries += 1;
        if tries > opts.max_widenings || !hi.h.is_finite() {
            return Err(GfenError::Numerical(format!(
                "no negative slope found above {} (slope {})",
                hi.x, hi.g
            )));
        }
        hi = eval(hi.x + step);
        step *= 2.0;
    }
    let mut pts = vec![lo, hi];
    if hi.x - lo.x > 0.0 {
        pts.insert(1, eval(0.5 * (lo.x + hi.x)));
    }
    let mut hull = Hull::new(pts);
    loop {
        let x = hull.sample(rng);
        if !x.is_finite() {
            return Err(GfenError::Numerical(
                "adaptive rejection sampler produced a non-finite draw".into(),
            ));
        }
        let u: f64 = rng.random();
        let up = hull.upper(x);
        let ln_u = u.ln();
        if ln_u <= hull.lower(x) - up {
            return Ok(x);
        }
        let p = eval(x);
        if ln_u <= p.h - up {
            return Ok(x);
        }
        if hull.pts.len() < opts.max_abscissae {
            hull.insert(p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Single-threaded sweep in vertex order; reproducible.
    #[default]
    Sequential,
    /// Contiguous vertex blocks updated concurrently; neighbors may be read
    /// while another worker is updating them. Not reproducible.
    Async { threads: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    pub ridge: f64,
    pub ars: ArsOptions,
    pub mode: SweepMode,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 4000,
            thin: 1,
            seed: 0,
            ridge: 0.0,
            ars: ArsOptions::default(),
            mode: SweepMode::Sequential,
        }
    }
}

/// Retained fields of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// Sweep number (1-based) of each retained field.
    pub iterations: Vec<usize>,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexSummary {
    pub vertex: usize,
    pub post_mean: f64,
    pub q05: f64,
    pub q95: f64,
}

fn draw_vertex<R: Rng>(
    v: usize,
    beta: &[f64],
    neighbors: &[Vec<(usize, crate::graph::EdgeKind)>],
    data: &BinomialData,
    penalties: &PenaltyConfig,
    opts: &McmcOptions,
    rng: &mut R,
) -> Result<f64> {
    let cond = conditional_logdensity(v, beta, neighbors, data, penalties, opts.ridge)?;
    let (lo, hi) = cond.bracket(opts.ars.perturbation);
    let mut ars = opts.ars;
    for attempt in 0..3 {
        match ars_sample(|b| cond.value_and_slope(b), lo, hi, &ars, rng) {
            Ok(x) => return Ok(x),
            Err(e) if attempt == 2 => {
                return Err(GfenError::Numerical(format!("vertex {v}: {e}")));
            }
            Err(_) => ars.perturbation *= 10.0,
        }
    }
    unreachable!()
}

/// Gibbs sampler started at `init`, retaining sweeps after `burn_in`.
pub fn run_chain(
    data: &BinomialData,
    graph: &EdgeGraph,
    penalties: &PenaltyConfig,
    init: &SplitField,
    opts: &McmcOptions,
) -> Result<ChainOutput> {
    penalties.validate()?;
    let n = graph.n_vertices();
    if data.len() != n || init.len() != n {
        return Err(GfenError::InvalidArgument(
            "data, field and graph sizes differ".into(),
        ));
    }
    if opts.burn_in >= opts.iterations {
        return Err(GfenError::InvalidArgument(
            "burn-in must be shorter than the chain".into(),
        ));
    }
    let neighbors = graph.neighbors();
    for v in 0..n {
        conditional_logdensity(v, &init.beta, &neighbors, data, penalties, opts.ridge)?;
    }
    match opts.mode {
        SweepMode::Sequential => run_sequential(data, &neighbors, penalties, init, opts),
        SweepMode::Async { threads } => {
            run_async(data, &neighbors, penalties, init, opts, threads.max(1))
        }
    }
}

fn keep(it: usize, opts: &McmcOptions) -> bool {
    it > opts.burn_in && (it - opts.burn_in - 1).is_multiple_of(opts.thin.max(1))
}

fn run_sequential(
    data: &BinomialData,
    neighbors: &[Vec<(usize, crate::graph::EdgeKind)>],
    penalties: &PenaltyConfig,
    init: &SplitField,
    opts: &McmcOptions,
) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut beta = init.beta.clone();
    let mut out = ChainOutput {
        iterations: Vec::new(),
        samples: Vec::new(),
    };
    for it in 1..=opts.iterations {
        for v in 0..beta.len() {
            beta[v] = draw_vertex(v, &beta, neighbors, data, penalties, opts, &mut rng)?;
        }
        if keep(it, opts) {
            out.iterations.push(it);
            out.samples.push(beta.clone());
        }
    }
    Ok(out)
}

fn run_async(
    data: &BinomialData,
    neighbors: &[Vec<(usize, crate::graph::EdgeKind)>],
    penalties: &PenaltyConfig,
    init: &SplitField,
    opts: &McmcOptions,
    threads: usize,
) -> Result<ChainOutput> {
    let n = init.len();
    let shared: Vec<AtomicU64> = init
        .beta
        .iter()
        .map(|b| AtomicU64::new(b.to_bits()))
        .collect();
    let threads = threads.min(n.max(1));
    let block = n.div_ceil(threads);
    let barrier = Barrier::new(threads);
    let failed = std::sync::atomic::AtomicBool::new(false);
    let results: Vec<Result<ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let shared = &shared;
                let barrier = &barrier;
                let failed = &failed;
                scope.spawn(move || -> Result<ChainOutput> {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(t as u64));
                    let range = (t * block).min(n)..((t + 1) * block).min(n);
                    let mut local = vec![0.0; n];
                    let mut out = ChainOutput {
                        iterations: Vec::new(),
                        samples: Vec::new(),
                    };
                    let mut err = None;
                    for it in 1..=opts.iterations {
                        if err.is_none() && !failed.load(Ordering::Relaxed) {
                            for v in range.clone() {
                                for &(w, _) in &neighbors[v] {
                                    local[w] = f64::from_bits(shared[w].load(Ordering::Relaxed));
                                }
                                match draw_vertex(
                                    v, &local, neighbors, data, penalties, opts, &mut rng,
                                ) {
                                    Ok(x) => shared[v].store(x.to_bits(), Ordering::Relaxed),
                                    Err(e) => {
                                        failed.store(true, Ordering::Relaxed);
                                        err = Some(e);
                                        break;
                                    }
                                }
                            }
                        }
                        barrier.wait();
                        if t == 0 && keep(it, opts) {
                            out.iterations.push(it);
                            out.samples.push(
                                shared
                                    .iter()
                                    .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
                                    .collect(),
                            );
                        }
                        barrier.wait();
                    }
                    match err {
                        Some(e) => Err(e),
                        None => Ok(out),
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let mut first = None;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Err(e) => return Err(e),
            Ok(o) if t == 0 => first = Some(o),
            Ok(_) => {}
        }
    }
    Ok(first.expect("at least one worker"))
}

fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// Per-vertex posterior mean and 5%/95% quantiles of the retained draws.
pub fn summarize(chain: &ChainOutput) -> Vec<VertexSummary> {
    let Some(first) = chain.samples.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|v| {
            let mut xs: Vec<f64> = chain.samples.iter().map(|s| s[v]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.sort_by(f64::total_cmp);
            VertexSummary {
                vertex: v,
                post_mean: mean,
                q05: empirical_quantile(&xs, 0.05),
                q95: empirical_quantile(&xs, 0.95),
            }
        })
        .collect()
}

/// CSV `iter,vertex,beta`.
pub fn write_samples_csv<W: std::io::Write>(chain: &ChainOutput, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "vertex", "beta"])?;
    for (it, s) in chain.iterations.iter().zip(&chain.samples) {
        for (v, b) in s.iter().enumerate() {
            w.write_record([it.to_string(), v.to_string(), b.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV `vertex,post_mean,q05,q95`.
pub fn write_summary_csv<W: std::io::Write>(summary: &[VertexSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn improper_conditional_rejected() {
        assert!(Conditional::new(0.0, 0.0, vec![(1.0, 0.0, 0.0)], 0.0).is_err());
        assert!(Conditional::new(5.0, 5.0, vec![], 0.0).is_err());
        assert!(Conditional::new(5.0, 2.0, vec![], 0.0).is_ok());
    }

    #[test]
    fn gaussian_conditional_from_two_neighbors() {
        let c = Conditional::new(0.0, 0.0, vec![(1.0, 0.0, 2.0), (3.0, 0.0, 2.0)], 0.0).unwrap();
        let (_, g) = c.value_and_slope(2.0);
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.curvature_bound(), -4.0);
    }

    #[test]
    fn data_only_mode() {
        let c = Conditional::new(10.0, 3.0, vec![], 0.0).unwrap();
        let (_, g) = c.value_and_slope((0.3f64 / 0.7).ln());
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ars_standard_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = ArsOptions::default();
        let n = 10_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = ars_sample(|x| (-0.5 * x * x, -x), -2.0, 2.0, &opts, &mut rng).unwrap();
            sum += x;
            sq += x * x;
        }
        assert!((sum / n as f64).abs() < 0.05);
        assert!((sq / n as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn ars_widens_bad_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ars_sample(
            |x| (-0.5 * (x - 50.0).powi(2), 50.0 - x),
            -1.0,
            1.0,
            &ArsOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!((x - 50.0).abs() < 6.0);
    }

    #[test]
    fn ars_laplace_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Conditional::new(0.0, 0.0, vec![(0.0, 1.0, 0.0)], 0.0).unwrap();
        let n = 20_000;
        let mut abs_sum = 0.0;
        for _ in 0..n {
            abs_sum += ars_sample(
                |b| c.value_and_slope(b),
                -1.0,
                1.0,
                &ArsOptions::default(),
                &mut rng,
            )
            .unwrap()
            .abs();
        }
        assert!((abs_sum / n as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn chain_shapes_and_summary() {
        let g = EdgeGraph::chain(3, EdgeKind::Spatial);
        let data = BinomialData {
            attempts: vec![10.0, 0.0, 10.0],
            successes: vec![2.0, 0.0, 8.0],
        };
        let opts = McmcOptions {
            iterations: 50,
            burn_in: 10,
            thin: 4,
            ..McmcOptions::default()
        };
        let init = SplitField::new(vec![0.0; 3]);
        let p = PenaltyConfig::uniform(0.5, 1.0);
        let out = run_chain(&data, &g, &p, &init, &opts).unwrap();
        assert_eq!(out.samples.len(), 10);
        assert_eq!(out.iterations[0], 11);
        let again = run_chain(&data, &g, &p, &init, &opts).unwrap();
        assert_eq!(out, again);
        let s = summarize(&out);
        assert_eq!(s.len(), 3);
        assert!(s
            .iter()
            .all(|v| v.q05 <= v.post_mean && v.post_mean <= v.q95));
    }

    #[test]
    fn async_mode_runs() {
        let g = EdgeGraph::chain(6, EdgeKind::Temporal);
        let data = BinomialData {
            attempts: vec![4.0; 6],
            successes: vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0],
        };
        let opts = McmcOptions {
            iterations: 30,
            burn_in: 10,
            mode: SweepMode::Async { threads: 2 },
            ..McmcOptions::default()
        };
        let out = run_chain(
            &data,
            &g,
            &PenaltyConfig::uniform(0.0, 1.0),
            &SplitField::new(vec![0.0; 6]),
            &opts,
        )
        .unwrap();
        assert_eq!(out.samples.len(), 20);
        assert!(out.samples.iter().flatten().all(|b| b.is_finite()));
    }
}
