//! Planar factor operators.

pub mod cauchy;
pub mod extension;
pub mod kernel;
pub mod oracle;

pub use cauchy::PlanarCauchy;
pub use extension::{ExtensionKind, PreparedExtension};
pub use kernel::{build_kernel_table, CauchyKernelTable, Fft2};
