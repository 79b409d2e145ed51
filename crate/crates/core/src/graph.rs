//! Spatiotemporal graphs and their edge-disjoint trail decompositions.
//!
//! Vertices are indexed location-major: vertex `loc * n_times + t`. Spatial
//! edges join equal time indices, temporal edges join consecutive time
//! indices of one location (with a wrap edge when time is cyclic).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GfenError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Spatial,
    Temporal,
}

/// Whether the time axis closes into a cycle (weekly periodicity) or is a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeTopology {
    #[default]
    Cyclic,
    Linear,
}

/// An undirected multigraph with typed edges and a fixed trail decomposition.
///
/// This is the form consumed by the solvers. It can be built from a
/// [`SpatioTemporalGraph`] or directly from an edge list.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize, EdgeKind)>,
    trails: TrailDecomposition,
}

impl EdgeGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize, EdgeKind)>) -> Result<Self> {
        for &(a, b, _) in &edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(GfenError::Graph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(GfenError::Graph(format!("self-loop at vertex {a}")));
            }
        }
        let trails = decompose_edges(n_vertices, &edges);
        Ok(Self {
            n_vertices,
            edges,
            trails,
        })
    }

    /// A path `0 - 1 - ... - (n-1)` with all edges of the given kind.
    pub fn chain(n: usize, kind: EdgeKind) -> Self {
        let edges = (1..n).map(|i| (i - 1, i, kind)).collect();
        Self::new(n, edges).expect("chain edges are valid")
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, EdgeKind)] {
        &self.edges
    }

    pub fn trails(&self) -> &TrailDecomposition {
        &self.trails
    }

    /// Neighbor lists with edge kinds. Parallel edges appear once per edge.
    pub fn neighbors(&self) -> Vec<Vec<(usize, EdgeKind)>> {
        let mut out = vec![Vec::new(); self.n_vertices];
        for &(a, b, kind) in &self.edges {
            out[a].push((b, kind));
            out[b].push((a, kind));
        }
        out
    }

    /// Relabel vertices: vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_vertices {
            return Err(GfenError::InvalidArgument(
                "permutation length differs from vertex count".into(),
            ));
        }
        let edges = self
            .edges
            .iter()
            .map(|&(a, b, k)| (perm[a], perm[b], k))
            .collect();
        Self::new(self.n_vertices, edges)
    }
}

/// One trail: a walk whose consecutive vertex pairs are distinct edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trail {
    pub vertices: Vec<usize>,
    pub kind: EdgeKind,
}

impl Trail {
    pub fn n_edges(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailDecomposition {
    pub trails: Vec<Trail>,
}

impl TrailDecomposition {
    pub fn len(&self) -> usize {
        self.trails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trails.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trail> {
        self.trails.iter()
    }

    /// All trail edges as sorted `(min, max, kind)` triples.
    pub fn edge_multiset(&self) -> Vec<(usize, usize, EdgeKind)> {
        let mut out: Vec<_> = self
            .trails
            .iter()
            .flat_map(|t| {
                t.vertices
                    .windows(2)
                    .map(move |w| (w[0].min(w[1]), w[0].max(w[1]), t.kind))
            })
            .collect();
        out.sort_by_key(|&(a, b, k)| (a, b, k == EdgeKind::Temporal));
        out
    }
}

/// Greedy edge-disjoint trail cover of an undirected multigraph.
///
/// Each trail starts at the lowest-index vertex with odd remaining degree
/// (or, failing that, the lowest-index vertex with any remaining edge) and
/// follows the lowest-index unused edge until stuck.
pub fn greedy_trails(n_vertices: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((id, b));
        adj[b].push((id, a));
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    let mut used = vec![false; edges.len()];
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut cursor = vec![0usize; n_vertices];
    let mut remaining = edges.len();
    let mut trails = Vec::new();

    while remaining > 0 {
        let start = (0..n_vertices)
            .find(|&v| degree[v] % 2 == 1)
            .or_else(|| (0..n_vertices).find(|&v| degree[v] > 0))
            .expect("remaining edges imply a vertex with positive degree");
        let mut trail = vec![start];
        let mut at = start;
        loop {
            let list = &adj[at];
            while cursor[at] < list.len() && used[list[cursor[at]].0] {
                cursor[at] += 1;
            }
            if cursor[at] == list.len() {
                break;
            }
            let (id, next) = list[cursor[at]];
            used[id] = true;
            degree[at] -= 1;
            degree[next] -= 1;
            remaining -= 1;
            trail.push(next);
            at = next;
        }
        trails.push(trail);
    }
    trails
}

/// Decompose a typed edge list: spatial and temporal edges are covered
/// separately so that no trail mixes kinds.
pub fn decompose_edges(
    n_vertices: usize,
    edges: &[(usize, usize, EdgeKind)],
) -> TrailDecomposition {
    let mut trails = Vec::new();
    for kind in [EdgeKind::Spatial, EdgeKind::Temporal] {
        let subset: Vec<(usize, usize)> = edges
            .iter()
            .filter(|e| e.2 == kind)
            .map(|&(a, b, _)| (a, b))
            .collect();
        trails.extend(
            greedy_trails(n_vertices, &subset)
                .into_iter()
                .map(|vertices| Trail { vertices, kind }),
        );
    }
    TrailDecomposition { trails }
}

/// Vertex set `S x T` with spatial and temporal edges.
#[derive(Debug, Clone)]
pub struct SpatioTemporalGraph {
    locations: Vec<String>,
    n_times: usize,
    topology: TimeTopology,
    adjacency: Vec<(usize, usize)>,
    spatial_edges: Vec<(usize, usize)>,
    temporal_edges: Vec<(usize, usize)>,
    dropped: Vec<String>,
}

impl SpatioTemporalGraph {
    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn topology(&self) -> TimeTopology {
        self.topology
    }

    pub fn n_vertices(&self) -> usize {
        self.locations.len() * self.n_times
    }

    /// Location-index pairs of the spatial adjacency (shared by every time slice).
    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    pub fn spatial_edges(&self) -> &[(usize, usize)] {
        &self.spatial_edges
    }

    pub fn temporal_edges(&self) -> &[(usize, usize)] {
        &self.temporal_edges
    }

    /// Locations removed because they were outside the largest connected component.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn vertex(&self, location: usize, time: usize) -> usize {
        location * self.n_times + time
    }

    pub fn location_of(&self, vertex: usize) -> usize {
        vertex / self.n_times
    }

    pub fn time_of(&self, vertex: usize) -> usize {
        vertex % self.n_times
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == id)
    }

    /// Location-id to index map, for bulk lookups.
    pub fn location_map(&self) -> HashMap<&str, usize> {
        self.locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// Trails: spatial trails per time slice (one greedy cover of the
    /// adjacency replicated across slices), then one temporal trail per
    /// location. Cyclic temporal trails start at the location's lowest
    /// vertex and end with the wrap edge.
    pub fn decompose_trails(&self) -> TrailDecomposition {
        let slice = greedy_trails(self.n_locations(), &self.adjacency);
        let mut trails = Vec::with_capacity(slice.len() * self.n_times + self.n_locations());
        for t in 0..self.n_times {
            for tr in &slice {
                trails.push(Trail {
                    vertices: tr.iter().map(|&l| self.vertex(l, t)).collect(),
                    kind: EdgeKind::Spatial,
                });
            }
        }
        for l in 0..self.n_locations() {
            let mut vertices: Vec<usize> = (0..self.n_times).map(|t| self.vertex(l, t)).collect();
            if self.topology == TimeTopology::Cyclic {
                vertices.push(self.vertex(l, 0));
            }
            trails.push(Trail {
                vertices,
                kind: EdgeKind::Temporal,
            });
        }
        TrailDecomposition { trails }
    }

    pub fn edge_graph(&self) -> EdgeGraph {
        let mut edges: Vec<(usize, usize, EdgeKind)> = self
            .spatial_edges
            .iter()
            .map(|&(a, b)| (a, b, EdgeKind::Spatial))
            .collect();
        edges.extend(
            self.temporal_edges
                .iter()
                .map(|&(a, b)| (a, b, EdgeKind::Temporal)),
        );
        EdgeGraph {
            n_vertices: self.n_vertices(),
            edges,
            trails: self.decompose_trails(),
        }
    }

    /// Check the structural invariants. Used after import.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vertices();
        let t_count = self.n_times;
        let mut seen = HashSet::new();
        for &(a, b) in &self.spatial_edges {
            if a >= n || b >= n {
                return Err(GfenError::Graph(format!(
                    "spatial edge ({a}, {b}) out of range"
                )));
            }
            if self.time_of(a) != self.time_of(b) || a == b {
                return Err(GfenError::Graph(format!(
                    "spatial edge ({a}, {b}) does not join two locations at one time"
                )));
            }
            seen.insert((a.min(b), a.max(b)));
        }
        for &(a, b) in &self.temporal_edges {
            if a >= n || b >= n {
                return Err(GfenError::Graph(format!(
                    "temporal edge ({a}, {b}) out of range"
                )));
            }
            let step = (self.time_of(b) + t_count - self.time_of(a)) % t_count;
            if self.location_of(a) != self.location_of(b) || (step != 1 && step != t_count - 1) {
                return Err(GfenError::Graph(format!(
                    "temporal edge ({a}, {b}) does not join consecutive times of one location"
                )));
            }
            if seen.contains(&(a.min(b), a.max(b))) {
                return Err(GfenError::Graph(format!(
                    "edge ({a}, {b}) is both spatial and temporal"
                )));
            }
        }
        if self.spatial_edges.len() != self.adjacency.len() * t_count {
            return Err(GfenError::Graph(
                "spatial edges are not replicated across all time slices".into(),
            ));
        }
        let expected_temporal = match self.topology {
            TimeTopology::Cyclic => self.n_locations() * t_count,
            TimeTopology::Linear => self.n_locations() * (t_count - 1),
        };
        if self.temporal_edges.len() != expected_temporal {
            return Err(GfenError::Graph(format!(
                "expected {expected_temporal} temporal edges, found {}",
                self.temporal_edges.len()
            )));
        }
        let comps = components(self.n_locations(), &self.adjacency);
        if comps.iter().any(|&c| c != comps[0]) {
            return Err(GfenError::Graph("spatial adjacency is disconnected".into()));
        }
        Ok(())
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            locations: self.locations.clone(),
            n_times: self.n_times,
            topology: self.topology,
            vertex_index: "location * n_times + time".into(),
            adjacency: self
                .adjacency
                .iter()
                .map(|&(a, b)| [self.locations[a].clone(), self.locations[b].clone()])
                .collect(),
            dropped: self.dropped.clone(),
            spatial_edges: self.spatial_edges.iter().map(|&(a, b)| [a, b]).collect(),
            temporal_edges: self.temporal_edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        let adjacency = file
            .adjacency
            .iter()
            .map(|[a, b]| (a.clone(), b.clone()))
            .collect::<Vec<_>>();
        let mut g = build_graph(&file.locations, &adjacency, file.n_times, file.topology)?;
        if !g.dropped.is_empty() {
            return Err(GfenError::Graph(format!(
                "graph file contains disconnected locations: {:?}",
                g.dropped
            )));
        }
        let spatial: Vec<(usize, usize)> =
            file.spatial_edges.iter().map(|e| (e[0], e[1])).collect();
        let temporal: Vec<(usize, usize)> =
            file.temporal_edges.iter().map(|e| (e[0], e[1])).collect();
        if spatial != g.spatial_edges || temporal != g.temporal_edges {
            return Err(GfenError::Graph(
                "edge lists do not match the declared locations and adjacency".into(),
            ));
        }
        g.dropped = file.dropped;
        g.validate()?;
        Ok(g)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &self.to_file())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let file: GraphFile = serde_json::from_reader(std::io::BufReader::new(f))?;
        Self::from_file(file)
    }
}

/// Serialized graph: vertex index map plus typed edge lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub locations: Vec<String>,
    pub n_times: usize,
    pub topology: TimeTopology,
    pub vertex_index: String,
    pub adjacency: Vec<[String; 2]>,
    pub dropped: Vec<String>,
    pub spatial_edges: Vec<[usize; 2]>,
    pub temporal_edges: Vec<[usize; 2]>,
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

/// Build the spatiotemporal graph from declared locations, a spatial
/// adjacency over location ids, and the number of time slots per cycle.
///
/// Locations outside the largest connected component of the adjacency are
/// dropped (ties go to the component holding the earliest declared
/// location) and listed in [`SpatioTemporalGraph::dropped`].
pub fn build_graph(
    locations: &[String],
    adjacency: &[(String, String)],
    times: usize,
    topology: TimeTopology,
) -> Result<SpatioTemporalGraph> {
    if times < 2 {
        return Err(GfenError::Graph(format!(
            "need at least 2 time slots, got {times}"
        )));
    }
    if locations.is_empty() {
        return Err(GfenError::Graph("no locations declared".into()));
    }
    let mut index = HashMap::with_capacity(locations.len());
    for (i, l) in locations.iter().enumerate() {
        if index.insert(l.as_str(), i).is_some() {
            return Err(GfenError::Graph(format!("duplicate location id {l:?}")));
        }
    }
    let mut pairs = Vec::with_capacity(adjacency.len());
    let mut seen = HashSet::with_capacity(adjacency.len());
    for (a, b) in adjacency {
        let ia = *index.get(a.as_str()).ok_or_else(|| {
            GfenError::Graph(format!("adjacency references unknown location {a:?}"))
        })?;
        let ib = *index.get(b.as_str()).ok_or_else(|| {
            GfenError::Graph(format!("adjacency references unknown location {b:?}"))
        })?;
        if ia == ib {
            return Err(GfenError::Graph(format!("self-loop at location {a:?}")));
        }
        if !seen.insert((ia.min(ib), ia.max(ib))) {
            return Err(GfenError::Graph(format!(
                "duplicate adjacency pair ({a:?}, {b:?})"
            )));
        }
        pairs.push((ia, ib));
    }

    let comp = components(locations.len(), &pairs);
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &comp {
        *sizes.entry(c).or_default() += 1;
    }
    // roots are component minima, so ties resolve to the earliest location
    let keep_root = sizes
        .iter()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
        .map(|(&r, _)| r)
        .expect("at least one location");

    let mut remap = vec![usize::MAX; locations.len()];
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, l) in locations.iter().enumerate() {
        if comp[i] == keep_root {
            remap[i] = kept.len();
            kept.push(l.clone());
        } else {
            dropped.push(l.clone());
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "dropping {} location(s) disconnected from the largest component: {:?}",
            dropped.len(),
            dropped
        );
    }
    let adjacency: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|&&(a, _)| remap[a] != usize::MAX)
        .map(|&(a, b)| (remap[a], remap[b]))
        .collect();

    let n_loc = kept.len();
    let v = |l: usize, t: usize| l * times + t;
    let mut spatial_edges = Vec::with_capacity(adjacency.len() * times);
    for t in 0..times {
        for &(a, b) in &adjacency {
            spatial_edges.push((v(a, t), v(b, t)));
        }
    }
    let mut temporal_edges = Vec::with_capacity(n_loc * times);
    for l in 0..n_loc {
        for t in 0..times - 1 {
            temporal_edges.push((v(l, t), v(l, t + 1)));
        }
        if topology == TimeTopology::Cyclic {
            temporal_edges.push((v(l, times - 1), v(l, 0)));
        }
    }

    Ok(SpatioTemporalGraph {
        locations: kept,
        n_times: times,
        topology,
        adjacency,
        spatial_edges,
        temporal_edges,
        dropped,
    })
}

/// Read a locations CSV with a `loc_id` column.
pub fn read_locations_csv(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let col = column_index(rdr.headers()?, "loc_id")?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        out.push(rec?[col].trim().to_string());
    }
    Ok(out)
}

/// Read a spatial adjacency CSV with `loc_a,loc_b` columns.
pub fn read_adjacency_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (ca, cb) = (
        column_index(&headers, "loc_a")?,
        column_index(&headers, "loc_b")?,
    );
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((rec[ca].trim().to_string(), rec[cb].trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| GfenError::InvalidArgument(format!("missing CSV column {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("L{i}")).collect()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn single_location_cycle() {
        let g = build_graph(&ids(1), &[], 3, TimeTopology::Cyclic).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.spatial_edges().len(), 0);
        assert_eq!(g.temporal_edges().len(), 3);
        let trails = g.decompose_trails();
        assert_eq!(trails.len(), 1);
        assert_eq!(trails.trails[0].vertices, vec![0, 1, 2, 0]);
        assert_eq!(trails.trails[0].kind, EdgeKind::Temporal);
    }

    #[test]
    fn two_adjacent_locations_two_times() {
        let g = build_graph(&ids(2), &[pair("L0", "L1")], 2, TimeTopology::Cyclic).unwrap();
        assert_eq!(g.n_vertices(), 4);
        assert_eq!(g.spatial_edges().len(), 2);
        assert_eq!(g.temporal_edges().len(), 4);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_self_loops() {
        let dup = build_graph(
            &ids(2),
            &[pair("L0", "L1"), pair("L1", "L0")],
            3,
            TimeTopology::Cyclic,
        );
        assert!(matches!(dup, Err(GfenError::Graph(_))));
        let sl = build_graph(&ids(2), &[pair("L0", "L0")], 3, TimeTopology::Cyclic);
        assert!(matches!(sl, Err(GfenError::Graph(_))));
        let unknown = build_graph(&ids(2), &[pair("L0", "X")], 3, TimeTopology::Cyclic);
        assert!(unknown.is_err());
        assert!(build_graph(&ids(2), &[], 1, TimeTopology::Cyclic).is_err());
    }

    #[test]
    fn drops_disconnected_locations() {
        let g = build_graph(
            &ids(4),
            &[pair("L0", "L1"), pair("L1", "L2")],
            4,
            TimeTopology::Cyclic,
        )
        .unwrap();
        assert_eq!(g.locations(), &["L0", "L1", "L2"]);
        assert_eq!(g.dropped(), &["L3"]);
        assert_eq!(g.n_vertices(), 12);
        g.validate().unwrap();
    }

    #[test]
    fn path_is_one_trail() {
        let trails = greedy_trails(3, &[(0, 1), (1, 2)]);
        assert_eq!(trails, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn star_is_two_trails() {
        let edges = [(0, 1), (0, 2), (0, 3)];
        let trails = greedy_trails(4, &edges);
        assert_eq!(trails.len(), 2);
        let mut got: Vec<(usize, usize)> = trails
            .iter()
            .flat_map(|t| t.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))))
            .collect();
        got.sort_unstable();
        let mut want = edges.to_vec();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn json_round_trip() {
        let g = build_graph(
            &ids(3),
            &[pair("L0", "L1"), pair("L1", "L2")],
            5,
            TimeTopology::Cyclic,
        )
        .unwrap();
        let file = g.to_file();
        let text = serde_json::to_string(&file).unwrap();
        let back = SpatioTemporalGraph::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.spatial_edges(), g.spatial_edges());
        assert_eq!(back.temporal_edges(), g.temporal_edges());
    }

    #[test]
    fn linear_time_has_no_wrap() {
        let g = build_graph(&ids(2), &[pair("L0", "L1")], 4, TimeTopology::Linear).unwrap();
        assert_eq!(g.temporal_edges().len(), 6);
        let t = g.decompose_trails();
        let temporal: Vec<_> = t.iter().filter(|t| t.kind == EdgeKind::Temporal).collect();
        assert_eq!(temporal[0].vertices, vec![0, 1, 2, 3]);
    }
}
