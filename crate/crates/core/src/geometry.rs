//! Graph, tangent frames and second fundamental form for one cloud and kernel.

use serde::{Deserialize, Serialize};

use crate::curvature::{second_fundamental_field, BNormalization, SecondFundamentalField};
use crate::error::Result;
use crate::graph::{build_graph, NeighborGraph};
use crate::hodge::{HodgeOperator, HodgeOptions};
use crate::kernel::KernelConfig;
use crate::tangent::{projection_field_with, ProjectionField, ProjectionOptions};
use crate::zoo::PointCloud;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryOptions {
    pub projection: ProjectionOptions,
    pub b_normalization: BNormalization,
    /// Estimate B̂ (needed by curvature and by zero-order terms for k ≥ 1).
    pub curvature: bool,
}

pub struct Geometry {
    pub cloud: PointCloud,
    pub config: KernelConfig,
    pub graph: NeighborGraph,
    pub field: ProjectionField,
    pub curvature: Option<SecondFundamentalField>,
}

impl Geometry {
    pub fn build(cloud: PointCloud, config: KernelConfig, options: GeometryOptions) -> Result<Self> {
        let graph = build_graph(&cloud, &config)?;
        let field = projection_field_with(&cloud, &graph, &config, options.projection)?;
        let curvature = if options.curvature {
            Some(second_fundamental_field(
                &cloud,
                &field,
                &graph,
                &config,
                options.b_normalization,
            )?)
        } else {
            None
        };
        Ok(Self {
            cloud,
            config,
            graph,
            field,
            curvature,
        })
    }

    pub fn hodge(&self, k: usize, options: HodgeOptions) -> Result<HodgeOperator<'_>> {
        HodgeOperator::new(
            &self.cloud,
            Some(&self.field),
            &self.graph,
            &self.config,
            self.curvature.as_ref(),
            k,
            options,
        )
    }
}
