//! Heat semigroups `e^{-tH}` of generalized Laplacians `H = ∇*∇ + V` on the
//! circle, flat tori and the round 2-sphere, approximated by composing
//! explicit one-step kernels over geodesic polygons.
//!
//! The crate is organized bottom-up: [`geometry`] supplies closed-form
//! Riemannian primitives, [`bundle`] connections and potentials, [`polygon`]
//! partitions and polygon functionals, [`kernels`] the step kernels,
//! [`propagator`] their compositions, and [`oracle`] independent reference
//! values.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod polygon;
pub mod propagator;
pub mod quadrature;
pub mod stats;

pub use bundle::{Bundle, Connection, Field, Potential};
pub use error::{Error, Result};
pub use geometry::{GridQuadrature, Manifold, Point, TangentVector};
pub use kernels::{CutoffChi, StepKernelConfig, Variant};
pub use linalg::{SmallMat, C64};
pub use polygon::{GeodesicPolygon, Partition, Segment};
pub use propagator::{KernelMatrix, McEstimate, Section};
