//! Density smoothing on spatiotemporal graphs with the graph-fused elastic net.
//!
//! A conditional density at every vertex of a space-by-time graph is
//! represented by a dyadic tree of binary splits. Each split carries a
//! log-odds field over the graph, smoothed by a mix of l1 (fused lasso) and
//! l2 (Laplacian) penalties on spatial and temporal edges.

pub mod admm;
pub mod density;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod mcmc;
pub mod selection;
pub mod sim;
pub mod tree;
pub mod tv;

pub use admm::{fit_map, AdmmOptions, FitResult, NodeLoss, PenaltyConfig};
pub use density::{reconstruct_density, DensityModel, Query, SplitField};
pub use error::{GfenError, Result};
pub use graph::{build_graph, EdgeGraph, EdgeKind, SpatioTemporalGraph, TimeTopology};
pub use tree::{bin_observations, build_quantile_tree, DyadicTree, TreeConfig};
