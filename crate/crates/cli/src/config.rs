//! Declarative run configuration (TOML). Every field is optional; command
//! flags take precedence over the file, which takes precedence over the
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use gfen::ingest::ColumnMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub graph: GraphSection,
    pub tree: TreeSection,
    pub penalties: Option<[f64; 4]>,
    pub tuning: TuningSection,
    pub solver: SolverSection,
    pub mcmc: McmcSection,
    pub ingest: IngestSection,
    pub query: QuerySection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub trips: Option<PathBuf>,
    pub locations: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub penalties: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub times: Option<usize>,
    pub time_topology: Option<gfen::TimeTopology>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSection {
    pub depth: Option<usize>,
    pub left_tail_splits: Option<usize>,
    pub right_tail_splits: Option<usize>,
    pub tail_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub generations: Option<usize>,
    pub per_generation: Option<usize>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub shared: Option<bool>,
    pub log10_min: Option<f64>,
    pub log10_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub initial_step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub perturbation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub timezone: Option<String>,
    pub window_from: Option<String>,
    pub window_to: Option<String>,
    pub columns: Option<ColumnMap>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub thresholds: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Solver options; the command-line defaults are a relative tolerance
    /// of 1e-5 and 20000 iterations.
    pub fn solver(
        &self,
        tol: Option<f64>,
        max_iter: Option<usize>,
    ) -> anyhow::Result<gfen::AdmmOptions> {
        let mut o = gfen::AdmmOptions {
            tol: 1e-5,
            max_iter: 20_000,
            ..gfen::AdmmOptions::default()
        };
        if let Some(t) = tol.or(self.solver.tol) {
            o.tol = t;
        }
        if let Some(m) = max_iter.or(self.solver.max_iter) {
            o.max_iter = m;
        }
        if let Some(s) = self.solver.initial_step {
            o.initial_step = s;
        }
        anyhow::ensure!(
            o.tol > 0.0 && o.max_iter > 0 && o.initial_step > 0.0,
            "solver settings must be positive"
        );
        Ok(o)
    }
}

/// Flag value, else config value, else an error naming the flag.
pub fn need<T: Clone>(flag: &Option<T>, cfg: &Option<T>, name: &str) -> anyhow::Result<T> {
    flag.clone()
        .or_else(|| cfg.clone())
        .ok_or_else(|| anyhow::anyhow!("missing required input --{name}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg: RunConfig = toml::from_str(
            r#"
            penalties = [1.0, 2.0, 3.0, 4.0]
            [paths]
            graph = "g.json"
            [tree]
            depth = 3
            [ingest.columns]
            driver = "drv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.tree.depth, Some(3));
        assert_eq!(cfg.penalties, Some([1.0, 2.0, 3.0, 4.0]));
        assert_eq!(cfg.ingest.columns.unwrap().driver, "drv");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[tree]\nbogus = 1\n").is_err());
    }
}
