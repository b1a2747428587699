//! Homotopy operators for `∂̄` on products of planar domains.

pub mod config;
pub mod convergence;
pub mod corpus;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod field;
pub mod form;
pub mod multi_index;
pub mod planar;
pub mod product;
pub mod quadrature;
pub mod selftest;
pub mod snapshot;
pub mod sobolev;
pub mod symbolic;

pub use domain::{BoundingBox, FactorGrid, PlanarDomain, ProductDomain, Shape};
pub use error::{DbpError, Result};
pub use field::{FactorField, SeparatedField, Term};
pub use form::FormField;
pub use multi_index::MultiIndex;
pub use planar::{ExtensionKind, PlanarCauchy};
pub use product::{ComposedOperators, FactorOperators};
