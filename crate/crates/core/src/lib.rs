//! Hodge Laplacians, second fundamental forms, curvature and cohomology rings
//! estimated from point clouds sampled on embedded manifolds.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cohomology;
pub mod curvature;
pub mod error;
pub mod exterior;
pub mod geometry;
pub mod graph;
pub mod hodge;
pub mod io;
pub mod kernel;
pub mod rates;
pub mod tangent;
pub mod tensor;
pub mod zoo;

pub use cohomology::{PeriodMatrix, StructureConstantTensor};
pub use curvature::SecondFundamentalField;
pub use error::{Error, Result};
pub use exterior::{KVector, MultiIndex};
pub use geometry::{Geometry, GeometryOptions};
pub use hodge::{eigensolve, DiscreteKForm, EigenOptions, HodgeOperator, HodgeOptions, SpectralPackage};
pub use kernel::{KernelConfig, KernelSpec};
pub use tangent::ProjectionField;
pub use zoo::{sample, ManifoldSpec, PointCloud, SimplicialChain};
