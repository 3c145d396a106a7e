//! Finsler geodesic flows on the 2-torus: minimal geodesics, Mather's alpha and
//! beta functions, heteroclinic and multibump minimizers, entropy estimates and
//! Katok-Ziller flows on the cylinder.
//!
//! Metrics are evaluated only through [`metrics::MetricModel`]. The discrete
//! engine lives in [`actiongraph`]; continuous minimizers in [`minimizers`].

pub mod actiongraph;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod geom;
pub mod harness;
pub mod katok;
pub mod mather;
pub mod metrics;
pub mod minimizers;
pub mod par;
pub mod structure;

pub use error::{Error, Result};
pub use geom::V2;
pub use metrics::{Chart, MetricKind, MetricModel, TangentVec};
