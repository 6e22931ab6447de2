//! Quadrature varifolds and certified checks of monotonicity, nested
//! partitions, Q-valued graph approximation and the appendix counter-example.

pub mod approximation;
pub mod constants;
pub mod counterexample;
pub mod error;
pub mod geometry;
pub mod monotonicity;
pub mod partition;
pub mod report;
pub mod varifold;

pub use error::{Error, Result};
pub use geometry::{plane_distance, plane_from_basis, region_contains, Plane, Region, Tolerances};
pub use report::{CheckRecord, Outcome, Relation, Report};
pub use varifold::{
    build_scene, Atom, Field, FirstVariation, GraphFn, Primitive, QuadratureVarifold, SceneSpec,
    Shape, ValueSelector,
};
pub use constants::{ConstantParams, ConstantsTable, Provenance};
pub use monotonicity::{check_monotonicity, density_ratio, smallness, tilt_integral, MonotonicityOptions};
pub use partition::{
    cluster_indices, holder_certificate, nested_partition, partition_at_scale, separate,
    HolderCertificate, PartitionLadder, PartitionLevel, ValueSet,
};
pub use approximation::{
    check_conical, check_cylinder, check_tangent_cone_decay, detect_planes, extract_graph,
    graph_varifold, lipschitz_approximation, tangent_field, PlaneDecomposition, QValuedGraph,
};
pub use counterexample::{
    build_line_fan, build_sine_scene, generate_sequence, generate_sequence_exact, s_of_rho,
    verify_properties, CounterexampleSequence, MonotoneFn,
};
