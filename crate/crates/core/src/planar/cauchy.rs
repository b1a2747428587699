//! The planar factor pair: solid Cauchy transform `H₁` and the skew Bergman
//! projection `P = id − H₁∂̄`.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64 as C64;

use crate::domain::PlanarDomain;
use crate::error::Result;
use crate::fd;
use crate::planar::extension::{ExtensionKind, PreparedExtension};
use crate::planar::kernel::CauchyKernelTable;

#[derive(Clone, Debug)]
pub struct PlanarCauchy {
    domain: Arc<PlanarDomain>,
    extension: Arc<PreparedExtension>,
    table: Arc<CauchyKernelTable>,
}

impl PlanarCauchy {
    pub fn new(domain: Arc<PlanarDomain>, kind: ExtensionKind) -> Result<Self> {
        let table = Arc::new(CauchyKernelTable::for_grid(domain.h(), domain.n())?);
        Self::with_table(domain, kind, table)
    }

    /// Reuses a kernel table built for the same `h` and dims.
    pub fn with_table(
        domain: Arc<PlanarDomain>,
        kind: ExtensionKind,
        table: Arc<CauchyKernelTable>,
    ) -> Result<Self> {
        domain.check_field((table.n(), table.n()))?;
        let extension = Arc::new(PreparedExtension::new(&domain, kind)?);
        Ok(PlanarCauchy {
            domain,
            extension,
            table,
        })
    }

    pub fn domain(&self) -> &Arc<PlanarDomain> {
        &self.domain
    }

    pub fn extension(&self) -> &PreparedExtension {
        &self.extension
    }

    pub fn table(&self) -> &Arc<CauchyKernelTable> {
        &self.table
    }

    /// `1/(πz) ∗ Eg` on the whole box, before restriction.
    pub fn cauchy_unrestricted(&self, g: &Array2<C64>) -> Result<Array2<C64>> {
        self.domain.check_field(g.dim())?;
        let eg = self.extension.apply(g)?;
        self.table.convolve(&eg)
    }

    /// `H₁(g dz̄)`, zero outside the mask.
    pub fn cauchy_transform(&self, g: &Array2<C64>) -> Result<Array2<C64>> {
        let mut u = self.cauchy_unrestricted(g)?;
        restrict(&mut u, self.domain.mask());
        Ok(u)
    }

    /// `Pg = g − H₁(∂̄g)`, zero outside the mask.
    pub fn skew_bergman(&self, g: &Array2<C64>) -> Result<Array2<C64>> {
        self.domain.check_field(g.dim())?;
        let dg = fd::dbar(self.domain.plan(), g, self.domain.h());
        let hg = self.cauchy_transform(&dg)?;
        let mut out = g - &hg;
        restrict(&mut out, self.domain.mask());
        Ok(out)
    }

    pub fn provenance(&self) -> String {
        format!(
            "{} n={} h={:.6e} ext={}",
            self.domain.shape(),
            self.domain.n(),
            self.domain.h(),
            self.extension.kind()
        )
    }
}

pub(crate) fn restrict(u: &mut Array2<C64>, mask: &Array2<bool>) {
    Zip::from(u).and(mask).for_each(|v, &m| {
        if !m {
            *v = C64::new(0.0, 0.0);
        }
    });
}
