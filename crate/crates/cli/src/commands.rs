use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use gfen::admm::{fit_map, GFL_RIDGE};
use gfen::density::LeafDensity;
use gfen::graph::{read_adjacency_csv, read_locations_csv};
use gfen::ingest::{self, IngestConfig};
use gfen::mcmc::{self, McmcOptions};
use gfen::selection::{self, SearchSpace, TuneMode, TuneOptions};
use gfen::sim::{self, EffectKind, SimTask, SweepOptions};
use gfen::tree::SplitCounts;
use gfen::{
    bin_observations, build_graph, build_quantile_tree, reconstruct_density, DensityModel,
    DyadicTree, NodeLoss, PenaltyConfig, Query, SpatioTemporalGraph, TimeTopology, TreeConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{need, RunConfig};
use crate::manifest::{self, FitInputs, FitManifest, HashedInput, RunManifest};
use crate::{
    BenchArgs, DataArgs, FitArgs, GraphArgs, IngestArgs, ProxArgs, QueryArgs, SampleArgs,
    SimulateArgs, TreeArgs, TuneArgs,
};

/// Threshold set for the living-wage comparison, in $/hour.
pub const LIVING_WAGE: [f64; 4] = [18.56, 21.64, 32.73, 34.74];

#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Penalties selected by `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFile {
    pub shared: bool,
    pub splits: Vec<SplitPenalty>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPenalty {
    pub split: Option<usize>,
    pub penalties: PenaltyConfig,
    pub cv_nll: f64,
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn ensure_exists(path: &Path) -> anyhow::Result<()> {
    ensure!(path.exists(), "input {} does not exist", path.display());
    Ok(())
}

pub fn ingest(a: &IngestArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let trips = need(&a.trips, &cfg.paths.trips, "trips")?;
    let output = need(&a.output, &cfg.paths.observations, "output")?;
    ensure_exists(&trips)?;
    let mut ic = IngestConfig::default();
    if let Some(c) = &cfg.ingest.columns {
        ic.columns = c.clone();
    }
    if let Some(tz) = a.timezone.clone().or_else(|| cfg.ingest.timezone.clone()) {
        ic.timezone = tz;
    }
    ic.window_from = a.from.clone().or_else(|| cfg.ingest.window_from.clone());
    ic.window_to = a.to.clone().or_else(|| cfg.ingest.window_to.clone());
    ic.tz()?;

    let trips_path = trips;
    let trips = ingest::read_trips_csv(&trips_path, &ic)?;
    let (obs, report) = ingest::compute_productivity(&trips, &ic)?;
    log::info!(
        "{} trips, {} consecutive pairs, {} observations ({} idle > limit, {} negative duration, {} outside window)",
        report.trips,
        report.pairs,
        report.emitted,
        report.idle_filtered,
        report.negative_duration,
        report.outside_window
    );
    let f = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
    ingest::write_observations(&obs, std::io::BufWriter::new(f))?;
    let m = RunManifest {
        command: "ingest".into(),
        version: manifest::version(),
        inputs: vec![HashedInput::of(&trips_path)?],
        settings: serde_json::json!({ "config": ic, "report": report }),
        outputs: vec![HashedInput::of(&output)?],
    };
    let mut mpath = output.clone().into_os_string();
    mpath.push(".manifest.json");
    manifest::write_json(&m, Path::new(&mpath))?;
    Ok(())
}

pub fn graph(a: &GraphArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let locations = need(&a.locations, &cfg.paths.locations, "locations")?;
    let adjacency = need(&a.adjacency, &cfg.paths.adjacency, "adjacency")?;
    let output = need(&a.output, &cfg.paths.graph, "output")?;
    let times = a
        .times
        .or(cfg.graph.times)
        .unwrap_or(ingest::HOURS_PER_WEEK);
    let topology = match a.topology.as_deref() {
        Some("linear") => TimeTopology::Linear,
        Some(_) => TimeTopology::Cyclic,
        None => cfg.graph.time_topology.unwrap_or_default(),
    };
    let locs = read_locations_csv(&locations)?;
    let adj = read_adjacency_csv(&adjacency)?;
    let g = build_graph(&locs, &adj, times, topology)?;
    if !g.dropped().is_empty() {
        log::warn!(
            "dropped {} disconnected locations: {:?}",
            g.dropped().len(),
            g.dropped()
        );
    }
    log::info!(
        "{} vertices, {} spatial and {} temporal edges",
        g.n_vertices(),
        g.spatial_edges().len(),
        g.temporal_edges().len()
    );
    g.write_json(&output)?;
    Ok(())
}

pub fn tree(a: &TreeArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let observations = need(&a.observations, &cfg.paths.observations, "observations")?;
    let output = need(&a.output, &cfg.paths.tree, "output")?;
    let defaults = TreeConfig::default();
    let tc = TreeConfig {
        depth: a.depth.or(cfg.tree.depth).unwrap_or(defaults.depth),
        left_tail_splits: a
            .left_tail_splits
            .or(cfg.tree.left_tail_splits)
            .unwrap_or(defaults.left_tail_splits),
        right_tail_splits: a
            .tail_splits
            .or(cfg.tree.right_tail_splits)
            .unwrap_or(defaults.right_tail_splits),
        tail_cap: a
            .tail_cap
            .or(cfg.tree.tail_cap)
            .unwrap_or(defaults.tail_cap),
        support: None,
    };
    ensure!(
        tc.left_tail_splits <= 1,
        "at most one left-tail split is supported"
    );
    let obs = ingest::read_observations(&observations)?;
    let pooled: Vec<f64> = obs.iter().map(|o| o.productivity).collect();
    let build = build_quantile_tree(&pooled, &tc)?;
    log::info!(
        "tree has {} splits and {} leaves ({} requested, {} merged as degenerate)",
        build.tree.n_splits(),
        build.tree.n_leaves(),
        build.requested_splits,
        build.merged_splits
    );
    build.tree.write_json(&output)?;
    Ok(())
}

struct Loaded {
    graph: SpatioTemporalGraph,
    tree: DyadicTree,
    counts: SplitCounts,
}

fn load_data(graph: &Path, tree: &Path, observations: &Path) -> anyhow::Result<Loaded> {
    for p in [graph, tree, observations] {
        ensure_exists(p)?;
    }
    let graph = SpatioTemporalGraph::read_json(graph)?;
    let tree = DyadicTree::read_json(tree)?;
    let obs = ingest::read_observations(observations)?;
    let (per_vertex, report) = ingest::bin_to_graph(&obs, &graph)?;
    let counts = bin_observations(&tree, &per_vertex)?;
    log::info!(
        "{} observations on {} of {} vertices, {} splits",
        report.binned,
        report.nonempty_vertices,
        graph.n_vertices(),
        tree.n_splits()
    );
    Ok(Loaded {
        graph,
        tree,
        counts,
    })
}

fn data_paths(d: &DataArgs, cfg: &RunConfig) -> anyhow::Result<(PathBuf, PathBuf, PathBuf)> {
    Ok((
        need(&d.graph, &cfg.paths.graph, "graph")?,
        need(&d.tree, &cfg.paths.tree, "tree")?,
        need(&d.observations, &cfg.paths.observations, "observations")?,
    ))
}

pub fn tune(a: &TuneArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let (g, t, o) = data_paths(&a.data, cfg)?;
    let output = need(&a.output, &cfg.paths.output, "output")?;
    let defaults = TuneOptions::default();
    let mut space = SearchSpace::gfen();
    if let Some(lo) = cfg.tuning.log10_min {
        space.lo = lo;
    }
    if let Some(hi) = cfg.tuning.log10_max {
        space.hi = hi;
    }
    ensure!(
        space.lo < space.hi,
        "tuning log10 bounds must satisfy min < max"
    );
    let opts = TuneOptions {
        generations: a
            .generations
            .or(cfg.tuning.generations)
            .unwrap_or(defaults.generations),
        per_generation: a
            .per_generation
            .or(cfg.tuning.per_generation)
            .unwrap_or(defaults.per_generation),
        folds: a.folds.or(cfg.tuning.folds).unwrap_or(defaults.folds),
        seed: a.seed.or(cfg.tuning.seed).unwrap_or(defaults.seed),
        space,
        mode: if a.shared || cfg.tuning.shared == Some(true) {
            TuneMode::Shared
        } else {
            TuneMode::PerSplit
        },
        admm: cfg.solver(a.tol, a.max_iter)?,
    };
    ensure!(
        opts.generations > 0 && opts.per_generation > 0,
        "tuning schedule must be non-empty"
    );
    ensure!(opts.folds >= 2, "need at least 2 folds");
    let data = load_data(&g, &t, &o)?;
    let outcomes = selection::tune(&data.counts, &data.graph.edge_graph(), &opts)?;

    create_dir(&output)?;
    let log_path = output.join("tuning_log.csv");
    selection::write_tuning_log(
        &outcomes,
        std::io::BufWriter::new(fs::File::create(&log_path)?),
    )?;
    let file = PenaltyFile {
        shared: opts.mode == TuneMode::Shared,
        splits: outcomes
            .iter()
            .map(|o| SplitPenalty {
                split: o.split,
                penalties: o.best,
                cv_nll: o.best_cv_nll,
            })
            .collect(),
    };
    let best_path = output.join("best_lambda.json");
    manifest::write_json(&file, &best_path)?;
    let m = RunManifest {
        command: "tune".into(),
        version: manifest::version(),
        inputs: vec![
            HashedInput::of(&g)?,
            HashedInput::of(&t)?,
            HashedInput::of(&o)?,
        ],
        settings: serde_json::to_value(&opts)?,
        outputs: vec![HashedInput::of(&log_path)?, HashedInput::of(&best_path)?],
    };
    manifest::write_json(&m, &output.join("manifest.json"))?;
    for s in &file.splits {
        log::info!(
            "split {}: lambda {:?}, cv nll {:.5}",
            s.split.map_or("all".to_string(), |s| s.to_string()),
            s.penalties.to_array(),
            s.cv_nll
        );
    }
    Ok(())
}

fn penalties_for(file: &PenaltyFile, n_splits: usize) -> anyhow::Result<Vec<PenaltyConfig>> {
    if file.shared {
        ensure!(
            file.splits.len() == 1,
            "shared penalty file must hold one entry"
        );
        return Ok(file.splits.iter().map(|s| s.penalties).collect());
    }
    ensure!(
        file.splits.len() == n_splits,
        "penalty file has {} splits, tree has {n_splits}",
        file.splits.len()
    );
    Ok(file.splits.iter().map(|s| s.penalties).collect())
}

fn penalty_of(p: &[PenaltyConfig], split: usize) -> PenaltyConfig {
    if p.len() == 1 {
        p[0]
    } else {
        p[split]
    }
}

fn write_field(path: &Path, beta: &[f64]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["vertex", "beta"])?;
    for (v, b) in beta.iter().enumerate() {
        w.write_record([v.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_field(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(
            rec[1]
                .parse::<f64>()
                .with_context(|| format!("bad beta in {}", path.display()))?,
        );
    }
    Ok(out)
}

fn field_path(dir: &Path, split: usize) -> PathBuf {
    dir.join("fields").join(format!("split_{split:03}.csv"))
}

pub fn fit(a: &FitArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let output = need(&a.output, &cfg.paths.output, "output")?;
    let (inputs, penalties, solver) = match &a.manifest {
        Some(path) => {
            let m = FitManifest::read(path)?;
            ensure!(
                m.command == "fit",
                "{} is not a fit manifest",
                path.display()
            );
            for i in [&m.inputs.graph, &m.inputs.tree, &m.inputs.observations] {
                i.verify()?;
            }
            (m.inputs, m.penalties, m.solver)
        }
        None => {
            let (g, t, o) = data_paths(&a.data, cfg)?;
            for p in [&g, &t, &o] {
                ensure_exists(p)?;
            }
            let n_splits = DyadicTree::read_json(&t)?.n_splits();
            let penalties = if let Some(l) = &a.lambda {
                ensure!(l.len() == 4, "--lambda takes four comma-separated values");
                vec![PenaltyConfig::from_array([l[0], l[1], l[2], l[3]])]
            } else if let Some(p) = a.penalties.as_ref().or(cfg.paths.penalties.as_ref()) {
                ensure_exists(p)?;
                let text = fs::read_to_string(p)?;
                let file: PenaltyFile = serde_json::from_str(&text)
                    .with_context(|| format!("parsing penalties {}", p.display()))?;
                penalties_for(&file, n_splits)?
            } else if let Some(l) = cfg.penalties {
                vec![PenaltyConfig::from_array(l)]
            } else {
                bail!("missing required input --penalties or --lambda");
            };
            let inputs = FitInputs {
                graph: HashedInput::of(&g)?,
                tree: HashedInput::of(&t)?,
                observations: HashedInput::of(&o)?,
            };
            (inputs, penalties, cfg.solver(a.tol, a.max_iter)?)
        }
    };
    for p in &penalties {
        p.validate()?;
    }
    let data = load_data(
        &inputs.graph.path,
        &inputs.tree.path,
        &inputs.observations.path,
    )?;
    let n_splits = data.counts.n_splits();
    ensure!(
        penalties.len() == 1 || penalties.len() == n_splits,
        "{} penalty sets for {n_splits} splits",
        penalties.len()
    );
    let eg = data.graph.edge_graph();
    let fits: Vec<gfen::Result<gfen::FitResult>> = (0..n_splits)
        .into_par_iter()
        .map(|s| {
            let p = penalty_of(&penalties, s);
            let mut opts = solver.clone();
            if !p.has_l2() {
                opts.ridge = opts.ridge.max(GFL_RIDGE);
            }
            fit_map(&NodeLoss::Binomial(data.counts.split(s)), &eg, &p, &opts)
        })
        .collect();
    let mut fields = Vec::with_capacity(n_splits);
    let mut failed = Vec::new();
    for (s, f) in fits.into_iter().enumerate() {
        let f = f.with_context(|| format!("split {s}"))?;
        if !f.converged {
            log::warn!(
                "split {s} did not converge in {} iterations (primal {:.2e}, dual {:.2e})",
                f.iterations,
                f.primal_residual,
                f.dual_residual
            );
            failed.push(s);
        }
        fields.push(f.field);
    }
    if !failed.is_empty() && !a.allow_nonconverged {
        return Err(
            NumericalFailure(format!("solver did not converge on splits {failed:?}")).into(),
        );
    }
    let model = reconstruct_density(&data.tree, &fields)?;

    create_dir(&output.join("fields"))?;
    data.tree.write_json(&output.join("tree.json"))?;
    data.graph.write_json(&output.join("graph.json"))?;
    for (s, f) in fields.iter().enumerate() {
        write_field(&field_path(&output, s), &f.beta)?;
    }
    let density = output.join("density.csv");
    model.write_csv_file(&density)?;
    let m = FitManifest {
        command: "fit".into(),
        version: manifest::version(),
        inputs,
        penalties,
        solver,
        n_splits,
        n_vertices: data.graph.n_vertices(),
        outputs: vec![HashedInput::of(&density)?],
    };
    manifest::write_json(&m, &output.join("manifest.json"))?;
    log::info!(
        "wrote model for {} vertices to {}",
        m.n_vertices,
        output.display()
    );
    Ok(())
}

struct Model {
    graph: SpatioTemporalGraph,
    density: DensityModel,
}

fn load_model(dir: &Path) -> anyhow::Result<Model> {
    ensure!(
        dir.is_dir(),
        "model directory {} does not exist",
        dir.display()
    );
    let tree = DyadicTree::read_json(&dir.join("tree.json"))?;
    let graph = SpatioTemporalGraph::read_json(&dir.join("graph.json"))?;
    let density = DensityModel::read_csv_file(tree, &dir.join("density.csv"))?;
    ensure!(
        density.n_vertices() == graph.n_vertices(),
        "density has {} vertices, graph has {}",
        density.n_vertices(),
        graph.n_vertices()
    );
    Ok(Model { graph, density })
}

/// Parse `tail:x`, `quantile:a`, `iqr` or `mean`.
pub fn parse_query(s: &str) -> anyhow::Result<Query> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, v)) => (k, Some(v)),
        None => (s, None),
    };
    let num = || -> anyhow::Result<f64> {
        let v = arg.ok_or_else(|| anyhow::anyhow!("query {s:?} needs a value"))?;
        v.parse()
            .with_context(|| format!("bad number in query {s:?}"))
    };
    let q = match kind {
        "tail" | "tail_probability" => Query::TailProbability(num()?),
        "quantile" => {
            let a = num()?;
            ensure!((0.0..=1.0).contains(&a), "quantile level must be in [0, 1]");
            Query::Quantile(a)
        }
        "iqr" if arg.is_none() => Query::Iqr,
        "mean" if arg.is_none() => Query::Mean,
        _ => bail!("unknown query {s:?}"),
    };
    Ok(q)
}

fn query_name(q: &Query) -> String {
    match q {
        Query::TailProbability(t) => format!("tail_probability_{t}"),
        Query::Quantile(a) => format!("quantile_{a}"),
        Query::Iqr => "iqr".into(),
        Query::Mean => "mean".into(),
    }
}

fn collect_queries(
    specs: &[String],
    thresholds: &[f64],
    alphas: &[f64],
    preset: Option<&str>,
    cfg: &RunConfig,
) -> anyhow::Result<Vec<Query>> {
    let mut out = Vec::new();
    for s in specs {
        out.push(parse_query(s)?);
    }
    match preset {
        None => {}
        Some("living-wage") => out.extend(LIVING_WAGE.iter().map(|&t| Query::TailProbability(t))),
        Some(p) => bail!("unknown preset {p:?} (available: living-wage)"),
    }
    out.extend(thresholds.iter().map(|&t| Query::TailProbability(t)));
    for &a in alphas {
        ensure!((0.0..=1.0).contains(&a), "quantile level must be in [0, 1]");
        out.push(Query::Quantile(a));
    }
    if out.is_empty() {
        if let Some(t) = &cfg.query.thresholds {
            out.extend(t.iter().map(|&t| Query::TailProbability(t)));
        }
        if let Some(a) = &cfg.query.alphas {
            out.extend(a.iter().map(|&a| Query::Quantile(a)));
        }
    }
    Ok(out)
}

pub fn query(a: &QueryArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let queries = collect_queries(&a.query, &a.threshold, &a.alpha, a.preset.as_deref(), cfg)?;
    ensure!(
        !queries.is_empty(),
        "no query given (use --query, --threshold, --alpha or --preset)"
    );
    let output = need(&a.output, &cfg.paths.output, "output")?;
    let model = load_model(&a.model)?;
    if let Some(h) = a.hour {
        ensure!(
            h < model.graph.n_times(),
            "hour {h} outside 0..{}",
            model.graph.n_times()
        );
    }
    let mut tables = Vec::with_capacity(queries.len());
    for q in &queries {
        let mut rows = Vec::new();
        for v in 0..model.graph.n_vertices() {
            let hour = model.graph.time_of(v);
            if a.hour.is_some_and(|h| h != hour) {
                continue;
            }
            let value = model.density.query(v, *q)?;
            rows.push((
                model.graph.locations()[model.graph.location_of(v)].clone(),
                hour,
                value,
            ));
        }
        tables.push((query_name(q), rows));
    }
    create_dir(&output)?;
    for (name, rows) in tables {
        let mut w = csv::Writer::from_path(output.join(format!("{name}.csv")))?;
        w.write_record(["taz", "hour", "value"])?;
        for (taz, hour, value) in rows {
            w.write_record([taz, hour.to_string(), value.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn sample(a: &SampleArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let output = need(&a.output, &cfg.paths.output, "output")?;
    let queries: Vec<Query> = a
        .query
        .iter()
        .map(|s| parse_query(s))
        .collect::<anyhow::Result<_>>()?;
    let fm = FitManifest::read(&a.model.join("manifest.json"))?;
    let model = load_model(&a.model)?;
    let tree = model.density.tree().clone();
    let data = load_data(
        &a.model.join("graph.json"),
        &a.model.join("tree.json"),
        &fm.inputs.observations.path,
    )?;
    let defaults = McmcOptions::default();
    let mut opts = McmcOptions {
        iterations: a
            .iterations
            .or(cfg.mcmc.iterations)
            .unwrap_or(defaults.iterations),
        burn_in: a.burn_in.or(cfg.mcmc.burn_in).unwrap_or(defaults.burn_in),
        thin: a.thin.or(cfg.mcmc.thin).unwrap_or(defaults.thin),
        seed: a.seed.or(cfg.mcmc.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    if let Some(p) = cfg.mcmc.perturbation {
        opts.ars.perturbation = p;
    }
    ensure!(opts.thin > 0, "thin must be positive");
    ensure!(
        opts.burn_in < opts.iterations,
        "burn-in must be shorter than the chain"
    );

    let eg = data.graph.edge_graph();
    let n_splits = tree.n_splits();
    let chains: Vec<anyhow::Result<mcmc::ChainOutput>> = (0..n_splits)
        .into_par_iter()
        .map(|s| {
            let init = gfen::density::SplitField::new(read_field(&field_path(&a.model, s))?);
            let p = penalty_of(&fm.penalties, s);
            let o = McmcOptions {
                seed: opts.seed.wrapping_add(s as u64),
                ridge: if p.has_l2() { 0.0 } else { GFL_RIDGE },
                ..opts.clone()
            };
            mcmc::run_chain(&data.counts.split(s), &eg, &p, &init, &o)
                .with_context(|| format!("split {s}"))
        })
        .collect();
    let chains: Vec<mcmc::ChainOutput> = chains.into_iter().collect::<anyhow::Result<_>>()?;

    let mut bands = Vec::new();
    if !queries.is_empty() {
        let n_draws = chains[0].samples.len();
        let paths = tree.leaf_paths();
        let n_v = data.graph.n_vertices();
        for q in &queries {
            let per_vertex: Vec<anyhow::Result<(f64, f64, f64)>> = (0..n_v)
                .into_par_iter()
                .map(|v| {
                    let mut values = Vec::with_capacity(n_draws);
                    for k in 0..n_draws {
                        let masses =
                            gfen::density::leaf_masses(&paths, |s| chains[s].samples[k][v]);
                        let d = LeafDensity {
                            leaves: tree.leaves(),
                            masses: &masses,
                        };
                        values.push(q.evaluate(&d)?);
                    }
                    values.sort_by(f64::total_cmp);
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    Ok((
                        mean,
                        gfen::tree::quantile_sorted(&values, 0.05),
                        gfen::tree::quantile_sorted(&values, 0.95),
                    ))
                })
                .collect();
            let rows: Vec<(f64, f64, f64)> =
                per_vertex.into_iter().collect::<anyhow::Result<_>>()?;
            bands.push((query_name(q), rows));
        }
    }

    create_dir(&output)?;
    let mut w = csv::Writer::from_path(output.join("beta_summary.csv"))?;
    w.write_record(["split", "vertex", "post_mean", "q05", "q95"])?;
    for (s, chain) in chains.iter().enumerate() {
        for r in mcmc::summarize(chain) {
            w.write_record([
                s.to_string(),
                r.vertex.to_string(),
                r.post_mean.to_string(),
                r.q05.to_string(),
                r.q95.to_string(),
            ])?;
        }
    }
    w.flush()?;
    for (name, rows) in bands {
        let mut w = csv::Writer::from_path(output.join(format!("{name}_bands.csv")))?;
        w.write_record(["taz", "hour", "map", "post_mean", "q05", "q95"])?;
        let q = parse_query(&name_to_spec(&name))?;
        for (v, (m, lo, hi)) in rows.into_iter().enumerate() {
            let map = model.density.query(v, q)?;
            w.write_record([
                model.graph.locations()[model.graph.location_of(v)].clone(),
                model.graph.time_of(v).to_string(),
                map.to_string(),
                m.to_string(),
                lo.to_string(),
                hi.to_string(),
            ])?;
        }
        w.flush()?;
    }
    log::info!(
        "{} retained draws per split written to {}",
        chains.first().map_or(0, |c| c.samples.len()),
        output.display()
    );
    Ok(())
}

fn name_to_spec(name: &str) -> String {
    if let Some(t) = name.strip_prefix("tail_probability_") {
        format!("tail:{t}")
    } else if let Some(a) = name.strip_prefix("quantile_") {
        format!("quantile:{a}")
    } else {
        name.to_string()
    }
}

fn effect_kind(s: &str) -> anyhow::Result<EffectKind> {
    Ok(match s {
        "c" | "constant" | "pw_constant" => EffectKind::PwConstant,
        "l" | "linear" | "pw_linear" => EffectKind::PwLinear,
        "m" | "mixed" => EffectKind::Mixed,
        _ => bail!("unknown effect kind {s:?} (constant, linear, mixed)"),
    })
}

pub fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let output = a
        .output
        .clone()
        .ok_or_else(|| anyhow::anyhow!("missing required input --output"))?;
    ensure!(a.grid >= 3, "grid must be at least 3");
    ensure!(a.samples > 0, "samples per vertex must be positive");
    let task = SimTask {
        grid: a.grid,
        spatial: effect_kind(&a.spatial)?,
        temporal: effect_kind(&a.temporal)?,
        sigma: a.sigma,
        missing: a.missing,
        samples_per_vertex: a.samples,
        outliers: a.outliers,
        seed: a.seed,
        ..SimTask::default()
    };
    let data = sim::sample_task(&task)?;
    let n = task.grid;
    let ids: Vec<String> = (0..n).map(|s| format!("s{s:03}")).collect();

    create_dir(&output)?;
    let mut w = csv::Writer::from_path(output.join("locations.csv"))?;
    w.write_record(["loc_id"])?;
    for id in &ids {
        w.write_record([id])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(output.join("adjacency.csv"))?;
    w.write_record(["loc_a", "loc_b"])?;
    for s in 1..n {
        w.write_record([&ids[s - 1], &ids[s]])?;
    }
    w.flush()?;
    let mut obs = Vec::new();
    let mut eval = Vec::new();
    for v in 0..task.n_vertices() {
        let (taz, hour) = (ids[v / n].clone(), v % n);
        for &y in &data.observed[v] {
            obs.push(ingest::Observation {
                taz: taz.clone(),
                hour,
                productivity: y,
            });
        }
        for &y in &data.eval[v] {
            eval.push(ingest::Observation {
                taz: taz.clone(),
                hour,
                productivity: y,
            });
        }
    }
    ingest::write_observations(&obs, fs::File::create(output.join("observations.csv"))?)?;
    ingest::write_observations(&eval, fs::File::create(output.join("evaluation.csv"))?)?;
    manifest::write_json(&task, &output.join("task.json"))?;
    log::info!(
        "{} observations on {} of {} vertices; build the graph with --times {n} --topology linear",
        obs.len(),
        data.missing.iter().filter(|m| !**m).count(),
        task.n_vertices()
    );
    Ok(())
}

pub fn bench(a: &BenchArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let output = need(&a.output, &cfg.paths.output, "output")?;
    let mut opts = if a.full_scale {
        SweepOptions::full_scale()
    } else {
        SweepOptions::default()
    };
    if let Some(g) = a.grid {
        opts.grid = g;
    }
    if let Some(r) = a.replicates {
        opts.replicates = r;
    }
    if let Some(m) = &a.missing {
        opts.missing = m.clone();
    }
    if let Some(n) = a.n_lambda {
        opts.bench.n_lambda = n;
    }
    if let Some(f) = a.folds {
        opts.bench.folds = f;
    }
    if let Some(d) = a.depth {
        opts.bench.tree_depth = d;
    }
    if let Some(s) = a.seed {
        opts.bench.seed = s;
    }
    if let Some(t) = cfg.solver.tol {
        opts.bench.admm.tol = t;
    }
    if let Some(m) = cfg.solver.max_iter {
        opts.bench.admm.max_iter = m;
    }
    ensure!(
        opts.grid >= 3 && opts.replicates > 0 && opts.bench.n_lambda > 0,
        "bench sizes must be positive"
    );
    ensure!(
        opts.missing.iter().all(|m| (0.0..1.0).contains(m)),
        "missing fractions must be in [0, 1)"
    );
    let rows = sim::run_sweep(&opts)?;
    let summary = sim::summarize(&rows);

    create_dir(&output)?;
    let bench_path = output.join("bench.csv");
    let summary_path = output.join("summary.csv");
    sim::write_rows_csv(&rows, fs::File::create(&bench_path)?)?;
    sim::write_summary_csv(&summary, fs::File::create(&summary_path)?)?;
    let m = RunManifest {
        command: "bench".into(),
        version: manifest::version(),
        inputs: Vec::new(),
        settings: serde_json::to_value(&opts)?,
        outputs: vec![
            HashedInput::of(&bench_path)?,
            HashedInput::of(&summary_path)?,
        ],
    };
    manifest::write_json(&m, &output.join("manifest.json"))?;
    for r in &summary {
        log::info!(
            "{:>4} missing {:.1}: gfl {:.3} gfen {:.3} gmrf {:.3}{}",
            r.task,
            r.missing,
            r.gfl,
            r.gfen,
            r.gmrf,
            if r.gfen_competitive() {
                ""
            } else {
                "  (gfen not competitive)"
            }
        );
    }
    Ok(())
}

pub fn prox(a: &ProxArgs) -> anyhow::Result<()> {
    ensure!(
        a.lambda >= 0.0 && a.lambda.is_finite(),
        "lambda must be finite and non-negative"
    );
    let mut r = csv::Reader::from_path(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| anyhow::anyhow!("input needs a `y` column"))?;
    let mut y = Vec::new();
    for rec in r.records() {
        y.push(rec?[col].parse::<f64>().context("bad value in y column")?);
    }
    let z = match a.kind.as_str() {
        "tv1" => gfen::tv::tv1_prox(&y, a.lambda),
        _ => gfen::tv::tv2_prox(&y, a.lambda),
    };
    let mut w = csv::Writer::from_path(&a.output)?;
    w.write_record(["z"])?;
    for v in z {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_specs() {
        assert_eq!(
            parse_query("tail:21.64").unwrap(),
            Query::TailProbability(21.64)
        );
        assert_eq!(parse_query("quantile:0.1").unwrap(), Query::Quantile(0.1));
        assert_eq!(parse_query("iqr").unwrap(), Query::Iqr);
        assert!(parse_query("quantile:2").is_err());
        assert!(parse_query("median").is_err());
        for q in [
            Query::TailProbability(18.56),
            Query::Quantile(0.25),
            Query::Mean,
        ] {
            assert_eq!(parse_query(&name_to_spec(&query_name(&q))).unwrap(), q);
        }
    }

    #[test]
    fn presets() {
        let cfg = RunConfig::default();
        let q = collect_queries(&[], &[], &[], Some("living-wage"), &cfg).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q[1], Query::TailProbability(21.64));
        assert!(collect_queries(&[], &[], &[], Some("minimum-wage"), &cfg).is_err());
    }
}
