//! Reconstruction of per-vertex discrete densities from fitted splitting
//! log-odds, and the query layer on top of them.
//!
//! Within a leaf, mass is spread uniformly; thresholds and quantiles are
//! interpolated accordingly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GfenError, Result};
use crate::tree::{DyadicTree, Leaf};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fitted log-odds of one split, one value per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitField {
    pub beta: Vec<f64>,
}

impl SplitField {
    pub fn new(beta: Vec<f64>) -> Self {
        Self { beta }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Left-child probabilities.
    pub fn omega(&self) -> Vec<f64> {
        self.beta.iter().map(|&b| sigmoid(b)).collect()
    }
}

/// Leaf masses at one vertex from the log-odds of every split at that vertex.
pub fn leaf_masses(paths: &[Vec<(usize, bool)>], betas: impl Fn(usize) -> f64) -> Vec<f64> {
    paths
        .iter()
        .map(|path| {
            path.iter()
                .map(|&(s, left)| {
                    let b = betas(s);
                    if left {
                        sigmoid(b)
                    } else {
                        sigmoid(-b)
                    }
                })
                .product()
        })
        .collect()
}

/// A discrete density over tree leaves with uniform within-leaf mass.
#[derive(Debug, Clone, Copy)]
pub struct LeafDensity<'a> {
    pub leaves: &'a [Leaf],
    pub masses: &'a [f64],
}

impl LeafDensity<'_> {
    /// Mass strictly above `threshold`.
    pub fn tail_probability(&self, threshold: f64) -> f64 {
        self.leaves
            .iter()
            .zip(self.masses)
            .map(|(l, &m)| {
                if threshold <= l.lo {
                    m
                } else if threshold >= l.hi {
                    0.0
                } else {
                    m * (l.hi - threshold) / l.width()
                }
            })
            .sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.tail_probability(y)
    }

    /// Smallest `q` with `cdf(q) >= alpha`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(GfenError::InvalidArgument(format!(
                "quantile level {alpha} outside (0, 1)"
            )));
        }
        let mut cum = 0.0;
        let mut last_hi = self.leaves[0].lo;
        for (l, &m) in self.leaves.iter().zip(self.masses) {
            if m <= 0.0 {
                continue;
            }
            if cum + m >= alpha {
                let frac = ((alpha - cum) / m).clamp(0.0, 1.0);
                return Ok(l.lo + frac * l.width());
            }
            cum += m;
            last_hi = l.hi;
        }
        Ok(last_hi)
    }

    pub fn iqr(&self) -> Result<f64> {
        Ok(self.quantile(0.75)? - self.quantile(0.25)?)
    }

    /// Mass-weighted leaf midpoints.
    pub fn mean(&self) -> f64 {
        self.leaves
            .iter()
            .zip(self.masses)
            .map(|(l, &m)| m * l.midpoint())
            .sum()
    }

    /// Density value at `y`; values outside the support use the nearest leaf.
    pub fn pdf(&self, y: f64) -> f64 {
        let i = match self.leaves.iter().position(|l| y < l.hi) {
            Some(i) => i,
            None => self.leaves.len() - 1,
        };
        self.masses[i] / self.leaves[i].width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Query {
    TailProbability(f64),
    Quantile(f64),
    Iqr,
    Mean,
}

impl Query {
    pub fn evaluate(&self, density: &LeafDensity<'_>) -> Result<f64> {
        match *self {
            Query::TailProbability(t) => Ok(density.tail_probability(t)),
            Query::Quantile(a) => density.quantile(a),
            Query::Iqr => density.iqr(),
            Query::Mean => Ok(density.mean()),
        }
    }
}

/// Per-vertex leaf probabilities assembled from one field per split.
#[derive(Debug, Clone)]
pub struct DensityModel {
    tree: DyadicTree,
    masses: Vec<Vec<f64>>,
}

/// Combine fitted split fields into per-vertex leaf masses.
pub fn reconstruct_density(tree: &DyadicTree, fields: &[SplitField]) -> Result<DensityModel> {
    if fields.len() != tree.n_splits() {
        return Err(GfenError::InvalidArgument(format!(
            "tree has {} splits but {} fields were given",
            tree.n_splits(),
            fields.len()
        )));
    }
    let n_v = fields[0].len();
    if fields.iter().any(|f| f.len() != n_v) {
        return Err(GfenError::InvalidArgument(
            "fields differ in vertex count".into(),
        ));
    }
    if fields.iter().any(|f| f.beta.iter().any(|b| !b.is_finite())) {
        return Err(GfenError::Numerical(
            "non-finite log-odds in a split field".into(),
        ));
    }
    let paths = tree.leaf_paths();
    let masses = (0..n_v)
        .map(|v| leaf_masses(&paths, |s| fields[s].beta[v]))
        .collect();
    Ok(DensityModel {
        tree: tree.clone(),
        masses,
    })
}

impl DensityModel {
    pub fn from_masses(tree: DyadicTree, masses: Vec<Vec<f64>>) -> Result<Self> {
        if masses.iter().any(|m| m.len() != tree.n_leaves()) {
            return Err(GfenError::InvalidArgument(
                "mass vector length differs from leaf count".into(),
            ));
        }
        Ok(Self { tree, masses })
    }

    pub fn tree(&self) -> &DyadicTree {
        &self.tree
    }

    pub fn n_vertices(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self, vertex: usize) -> &[f64] {
        &self.masses[vertex]
    }

    pub fn at(&self, vertex: usize) -> LeafDensity<'_> {
        LeafDensity {
            leaves: self.tree.leaves(),
            masses: &self.masses[vertex],
        }
    }

    pub fn query(&self, vertex: usize, query: Query) -> Result<f64> {
        if vertex >= self.n_vertices() {
            return Err(GfenError::InvalidArgument(format!(
                "vertex {vertex} out of range"
            )));
        }
        query.evaluate(&self.at(vertex))
    }

    /// Mean negative log density of `samples` observed at `vertex`.
    pub fn mean_nll(&self, vertex: usize, samples: &[f64]) -> f64 {
        let d = self.at(vertex);
        samples.iter().map(|&y| -d.pdf(y).ln()).sum::<f64>() / samples.len() as f64
    }

    /// CSV with header `vertex,leaf_lo,leaf_hi,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "leaf_lo", "leaf_hi", "mass"])?;
        for (v, masses) in self.masses.iter().enumerate() {
            for (l, m) in self.tree.leaves().iter().zip(masses) {
                w.write_record(&[
                    v.to_string(),
                    l.lo.to_string(),
                    l.hi.to_string(),
                    m.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a density CSV written by [`DensityModel::write_csv`] against its tree.
    pub fn read_csv_file(tree: DyadicTree, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let n_leaves = tree.n_leaves();
        let mut masses: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: usize = parse(&rec[0])?;
            let m: f64 = parse(&rec[3])?;
            if v == masses.len() {
                masses.push(Vec::with_capacity(n_leaves));
            }
            masses
                .get_mut(v)
                .ok_or_else(|| {
                    GfenError::InvalidArgument("density CSV vertices out of order".into())
                })?
                .push(m);
        }
        Self::from_masses(tree, masses)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| GfenError::InvalidArgument(format!("cannot parse {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn leaves(bounds: &[f64]) -> Vec<Leaf> {
        bounds
            .windows(2)
            .map(|w| Leaf { lo: w[0], hi: w[1] })
            .collect()
    }

    #[test]
    fn symmetric_depth_two() {
        let tree =
            DyadicTree::from_points(0.0, 1.0, &[("", 0.5), ("0", 0.25), ("1", 0.75)]).unwrap();
        let fields = vec![SplitField::new(vec![0.0]); 3];
        let m = reconstruct_density(&tree, &fields).unwrap();
        for &p in m.masses(0) {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            m.query(0, Query::Quantile(0.5)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(m.query(0, Query::Iqr).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn path_products() {
        let tree = DyadicTree::from_points(0.0, 4.0, &[("", 2.0), ("0", 1.0), ("1", 3.0)]).unwrap();
        let fields = vec![
            SplitField::new(vec![logit(0.8)]),
            SplitField::new(vec![0.0]),
            SplitField::new(vec![0.0]),
        ];
        let m = reconstruct_density(&tree, &fields).unwrap();
        let want = [0.4, 0.4, 0.1, 0.1];
        for (p, w) in m.masses(0).iter().zip(want) {
            assert_abs_diff_eq!(*p, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn tail_probabilities() {
        let l = leaves(&[0.0, 10.0, 20.0]);
        let d = LeafDensity {
            leaves: &l,
            masses: &[0.9, 0.1],
        };
        assert_abs_diff_eq!(d.tail_probability(10.0), 0.1, epsilon = 1e-15);
        let d = LeafDensity {
            leaves: &l,
            masses: &[0.5, 0.5],
        };
        assert_abs_diff_eq!(d.tail_probability(15.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mean(), 10.0, epsilon = 1e-15);
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        let l = leaves(&[0.0, 1.0]);
        let d = LeafDensity {
            leaves: &l,
            masses: &[1.0],
        };
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_skips_empty_leaves() {
        let l = leaves(&[0.0, 1.0, 2.0, 3.0]);
        let d = LeafDensity {
            leaves: &l,
            masses: &[0.5, 0.0, 0.5],
        };
        assert_abs_diff_eq!(d.quantile(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.quantile(0.75).unwrap(), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn stable_log_sigmoid() {
        assert_abs_diff_eq!(log_sigmoid(0.0), -(2f64.ln()), epsilon = 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert_abs_diff_eq!(log_sigmoid(800.0), 0.0, epsilon = 1e-15);
    }
}
