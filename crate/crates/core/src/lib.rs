//! Numerical sub-conic and sub-Finsler geometry.
//!
//! A distribution of cones `D` on a manifold defines two distances: the
//! infimum of Riemannian length over `D`-admissible paths, and the
//! sub-Finsler distance of the gauge norm obtained from the convex hull of
//! unit cone vectors. This crate computes upper bounds for both on three
//! concrete models and checks numerically that they agree.

mod error;
mod linalg;
mod lp;

pub mod cone;
pub mod flows;
pub mod gauge;
pub mod geometry;
pub mod metric;
pub mod period;
pub mod poly;

pub use cone::{ConeKind, ConeModel, NamedField};
pub use error::{Error, Result};
pub use flows::{
    bracket_flow, flow, realize_norm, zigzag, AdmissiblePath, BracketExpr, FieldExpr, LengthReport, Realization,
};
pub use gauge::{find_flat_segment, gauge_norm, gauge_value, unit_ball, BallPolytope, FlatSegment, GaugeResult};
pub use geometry::{
    adapted_frame, log_map, move_point, q_eval, riemannian_g, Frame, ManifoldPoint, Model, QuadForm, TangentVector,
};
pub use metric::{
    compare_metrics, local_connect, subconic_distance_upper, subfinsler_distance_upper, ComparisonReport,
    ConnectParams, DistanceEstimate, EstimateKind, MetricParams, PairReport, sample_pairs,
};
pub use period::{
    chain_distance, rank1_decompose, rotate_in_sphere, sphere_chain, sphere_through, tangent_sphere, SphereChain,
    TwistorSphere,
};
