//! Dyadic partition trees over the support of a scalar response.
//!
//! A tree is stored as a list of splits. Each split owns an interval
//! `[lo, hi)` and a point `lo < c < hi`; observations below `c` go to the
//! left child. Children are either further splits or leaves.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GfenError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type", content = "index")]
pub enum Child {
    Split(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Binary address from the root: `""` for the root, `"0"` for its left child...
    pub address: String,
    pub lo: f64,
    pub hi: f64,
    pub point: f64,
    /// Depth of the split, 1 at the root.
    pub level: usize,
    pub left: Child,
    pub right: Child,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub lo: f64,
    pub hi: f64,
}

impl Leaf {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicTree {
    splits: Vec<Split>,
    leaves: Vec<Leaf>,
}

/// Construction parameters for [`build_quantile_tree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Depth of the balanced quantile part.
    pub depth: usize,
    /// Extra splits in the left tail (0 or 1).
    pub left_tail_splits: usize,
    /// Extra splits chained into the right tail.
    pub right_tail_splits: usize,
    /// Upper end of the uniform grid used for right-tail splits.
    pub tail_cap: f64,
    /// Root support override; defaults to `[min(y), max(y))`.
    pub support: Option<(f64, f64)>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            left_tail_splits: 1,
            right_tail_splits: 5,
            tail_cap: 100.0,
            support: None,
        }
    }
}

impl TreeConfig {
    pub fn balanced(depth: usize) -> Self {
        Self {
            depth,
            left_tail_splits: 0,
            right_tail_splits: 0,
            ..Self::default()
        }
    }
}

/// Result of tree construction with a report of what was realized.
#[derive(Debug, Clone)]
pub struct TreeBuild {
    pub tree: DyadicTree,
    /// Splits requested by the configuration.
    pub requested_splits: usize,
    /// Splits skipped because the split point was degenerate.
    pub merged_splits: usize,
}

/// Interpolated empirical quantile of sorted data (linear between order statistics).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

enum Plan {
    Leaf,
    Split {
        point: f64,
        left: Box<Plan>,
        right: Box<Plan>,
    },
}

/// Balanced quantile tree of the given depth plus optional tail splits.
///
/// The left tail split bisects the lowest balanced leaf. Right-tail splits
/// use the interior points of a uniform grid of `right_tail_splits + 2`
/// points on `[q_{1-2^-d}, tail_cap]` (7 points for the default 5 splits),
/// chained so that each right child is the parent of the next tail split.
/// Points that fall outside their interval are skipped and counted as merged.
pub fn build_quantile_tree(samples: &[f64], config: &TreeConfig) -> Result<TreeBuild> {
    if samples.is_empty() {
        return Err(GfenError::Tree("no samples to build the tree from".into()));
    }
    if config.depth == 0 {
        return Err(GfenError::Tree("depth must be at least 1".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(GfenError::Tree("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (root_lo, root_hi) = config
        .support
        .unwrap_or((sorted[0], sorted[sorted.len() - 1]));
    if root_lo >= root_hi {
        return Err(GfenError::Tree(format!(
            "degenerate support [{root_lo}, {root_hi})"
        )));
    }
    let d = config.depth;
    let cells = 1usize << d;
    let q = |k: usize| quantile_sorted(&sorted, k as f64 / cells as f64);

    fn balanced(
        level: usize,
        depth: usize,
        a: usize,
        width: usize,
        q: &dyn Fn(usize) -> f64,
    ) -> Plan {
        if level == depth {
            return Plan::Leaf;
        }
        let half = width / 2;
        Plan::Split {
            point: q(a + half),
            left: Box::new(balanced(level + 1, depth, a, half, q)),
            right: Box::new(balanced(level + 1, depth, a + half, half, q)),
        }
    }
    let mut plan = balanced(0, d, 0, cells, &q);

    // leftmost and rightmost balanced leaves
    let mut requested = cells - 1;
    if config.left_tail_splits > 0 {
        requested += 1;
        let point = 0.5 * (root_lo + q(1));
        let mut node = &mut plan;
        while let Plan::Split { left, .. } = node {
            node = left;
        }
        *node = Plan::Split {
            point,
            left: Box::new(Plan::Leaf),
            right: Box::new(Plan::Leaf),
        };
    }
    if config.right_tail_splits > 0 {
        requested += config.right_tail_splits;
        let start = q(cells - 1);
        let m = config.right_tail_splits + 1;
        let step = (config.tail_cap - start) / m as f64;
        let mut node = &mut plan;
        while let Plan::Split { right, .. } = node {
            node = right;
        }
        for i in 1..=config.right_tail_splits {
            *node = Plan::Split {
                point: start + step * i as f64,
                left: Box::new(Plan::Leaf),
                right: Box::new(Plan::Leaf),
            };
            let Plan::Split { right, .. } = node else {
                unreachable!()
            };
            node = right;
        }
    }

    let mut tree = DyadicTree {
        splits: Vec::new(),
        leaves: Vec::new(),
    };
    let mut merged = 0;
    tree.materialize(&plan, root_lo, root_hi, String::new(), 1, &mut merged);
    if tree.splits.is_empty() {
        return Err(GfenError::Tree(
            "all split points are degenerate; the samples have no spread".into(),
        ));
    }
    if merged > 0 {
        log::warn!(
            "merged {merged} degenerate split(s): {} of {requested} requested splits realized",
            tree.splits.len()
        );
    }
    Ok(TreeBuild {
        tree,
        requested_splits: requested,
        merged_splits: merged,
    })
}

impl DyadicTree {
    /// Build from explicit `(address, point)` pairs. Addresses missing from
    /// the list become leaves.
    pub fn from_points(lo: f64, hi: f64, points: &[(&str, f64)]) -> Result<Self> {
        fn grow(addr: &str, points: &[(&str, f64)]) -> Plan {
            match points.iter().find(|(a, _)| *a == addr) {
                None => Plan::Leaf,
                Some(&(_, point)) => Plan::Split {
                    point,
                    left: Box::new(grow(&format!("{addr}0"), points)),
                    right: Box::new(grow(&format!("{addr}1"), points)),
                },
            }
        }
        let plan = grow("", points);
        let mut tree = DyadicTree {
            splits: Vec::new(),
            leaves: Vec::new(),
        };
        let mut merged = 0;
        tree.materialize(&plan, lo, hi, String::new(), 1, &mut merged);
        if merged > 0 {
            return Err(GfenError::Tree("split point outside its interval".into()));
        }
        tree.validate()?;
        Ok(tree)
    }

    fn materialize(
        &mut self,
        plan: &Plan,
        lo: f64,
        hi: f64,
        address: String,
        level: usize,
        merged: &mut usize,
    ) -> Child {
        match plan {
            Plan::Leaf => {
                self.leaves.push(Leaf { lo, hi });
                Child::Leaf(self.leaves.len() - 1)
            }
            Plan::Split { point, left, right } => {
                if !(lo < *point && *point < hi) {
                    // drop the split and the subtree on its empty side
                    let (keep, gone) = if *point <= lo {
                        (right, left)
                    } else {
                        (left, right)
                    };
                    *merged += 1 + count_splits(gone);
                    return self.materialize(keep, lo, hi, address, level, merged);
                }
                let idx = self.splits.len();
                self.splits.push(Split {
                    address: address.clone(),
                    lo,
                    hi,
                    point: *point,
                    level,
                    left: Child::Leaf(usize::MAX),
                    right: Child::Leaf(usize::MAX),
                });
                let l =
                    self.materialize(left, lo, *point, format!("{address}0"), level + 1, merged);
                let r =
                    self.materialize(right, *point, hi, format!("{address}1"), level + 1, merged);
                self.splits[idx].left = l;
                self.splits[idx].right = r;
                Child::Split(idx)
            }
        }
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    /// Leaves in increasing order of `lo`.
    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.splits[0].lo, self.splits[0].hi)
    }

    /// Leaf index for a value. Values at or above the support maximum land
    /// in the last leaf; values below the minimum return `None`.
    pub fn locate(&self, value: f64) -> Option<usize> {
        let (lo, _) = self.support();
        if value < lo || value.is_nan() {
            return None;
        }
        let mut node = Child::Split(0);
        loop {
            match node {
                Child::Leaf(i) => return Some(i),
                Child::Split(s) => {
                    let sp = &self.splits[s];
                    node = if value < sp.point { sp.left } else { sp.right };
                }
            }
        }
    }

    /// For each leaf, the path of `(split index, went_left)` from the root.
    pub fn leaf_paths(&self) -> Vec<Vec<(usize, bool)>> {
        let mut out = vec![Vec::new(); self.leaves.len()];
        let mut stack = vec![(0usize, Vec::<(usize, bool)>::new())];
        while let Some((s, path)) = stack.pop() {
            for (child, left) in [(self.splits[s].left, true), (self.splits[s].right, false)] {
                let mut p = path.clone();
                p.push((s, left));
                match child {
                    Child::Leaf(i) => out[i] = p,
                    Child::Split(c) => stack.push((c, p)),
                }
            }
        }
        out
    }

    /// Check that children partition parents and leaves tile the root.
    pub fn validate(&self) -> Result<()> {
        if self.splits.is_empty() {
            return Err(GfenError::Tree("tree has no splits".into()));
        }
        for (i, s) in self.splits.iter().enumerate() {
            if !(s.lo < s.point && s.point < s.hi) {
                return Err(GfenError::Tree(format!(
                    "split {i} point outside its interval"
                )));
            }
            for (child, lo, hi, suffix) in
                [(s.left, s.lo, s.point, '0'), (s.right, s.point, s.hi, '1')]
            {
                let (clo, chi) = match child {
                    Child::Leaf(j) => {
                        let l = self
                            .leaves
                            .get(j)
                            .ok_or_else(|| GfenError::Tree(format!("dangling leaf {j}")))?;
                        (l.lo, l.hi)
                    }
                    Child::Split(j) => {
                        let c = self
                            .splits
                            .get(j)
                            .ok_or_else(|| GfenError::Tree(format!("dangling split {j}")))?;
                        if c.address != format!("{}{suffix}", s.address) || c.level != s.level + 1 {
                            return Err(GfenError::Tree(format!("split {j} has a bad address")));
                        }
                        (c.lo, c.hi)
                    }
                };
                if clo != lo || chi != hi {
                    return Err(GfenError::Tree(format!(
                        "child of split {i} does not match its half-interval"
                    )));
                }
            }
        }
        let (lo, hi) = self.support();
        let mut at = lo;
        for l in &self.leaves {
            if l.lo != at || l.hi <= l.lo {
                return Err(GfenError::Tree("leaves do not tile the support".into()));
            }
            at = l.hi;
        }
        if at != hi {
            return Err(GfenError::Tree(
                "leaves do not reach the support maximum".into(),
            ));
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let tree: DyadicTree = serde_json::from_reader(std::io::BufReader::new(f))?;
        tree.validate()?;
        Ok(tree)
    }
}

fn count_splits(plan: &Plan) -> usize {
    match plan {
        Plan::Leaf => 0,
        Plan::Split { left, right, .. } => 1 + count_splits(left) + count_splits(right),
    }
}

/// Per-split binomial counts for every vertex.
///
/// `attempts[s][v]` counts observations of vertex `v` that reach split `s`;
/// `successes[s][v]` counts those that go left.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCounts {
    pub attempts: Vec<Vec<u32>>,
    pub successes: Vec<Vec<u32>>,
    /// Observations at or above the support maximum assigned to the last leaf.
    pub clamped: usize,
}

impl SplitCounts {
    pub fn n_splits(&self) -> usize {
        self.attempts.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.attempts.first().map_or(0, Vec::len)
    }

    /// Root attempts, i.e. the number of observations per vertex.
    pub fn sample_sizes(&self) -> &[u32] {
        &self.attempts[0]
    }

    pub fn split(&self, s: usize) -> BinomialData {
        BinomialData {
            attempts: self.attempts[s].iter().map(|&a| a as f64).collect(),
            successes: self.successes[s].iter().map(|&a| a as f64).collect(),
        }
    }
}

/// Binomial node data for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialData {
    pub attempts: Vec<f64>,
    pub successes: Vec<f64>,
}

impl BinomialData {
    pub fn len(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attempts.is_empty()
    }

    /// Copy with the given vertices emptied (treated as missing).
    pub fn masked(&self, hide: impl Fn(usize) -> bool) -> Self {
        let mut out = self.clone();
        for v in 0..out.len() {
            if hide(v) {
                out.attempts[v] = 0.0;
                out.successes[v] = 0.0;
            }
        }
        out
    }
}

/// Count per-vertex observations into per-split attempts and successes.
///
/// Values below the support minimum are rejected with the offending
/// position (counted across vertices in order).
pub fn bin_observations(tree: &DyadicTree, observations: &[Vec<f64>]) -> Result<SplitCounts> {
    let n_splits = tree.n_splits();
    let n_v = observations.len();
    let mut attempts = vec![vec![0u32; n_v]; n_splits];
    let mut successes = vec![vec![0u32; n_v]; n_splits];
    let (lo, hi) = tree.support();
    let mut clamped = 0;
    let mut index = 0;
    for (v, obs) in observations.iter().enumerate() {
        for &y in obs {
            if !(y >= lo) {
                return Err(GfenError::BelowSupport {
                    index,
                    value: y,
                    min: lo,
                });
            }
            if y >= hi {
                clamped += 1;
            }
            let mut node = Child::Split(0);
            while let Child::Split(s) = node {
                let sp = &tree.splits[s];
                attempts[s][v] += 1;
                if y < sp.point {
                    successes[s][v] += 1;
                    node = sp.left;
                } else {
                    node = sp.right;
                }
            }
            index += 1;
        }
    }
    if clamped > 0 {
        log::info!("{clamped} observation(s) at or above the support maximum were assigned to the last leaf");
    }
    Ok(SplitCounts {
        attempts,
        successes,
        clamped,
    })
}
