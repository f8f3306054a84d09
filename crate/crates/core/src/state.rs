//! Pure and mixed states on labelled composite spaces.

use crate::error::{Error, Result};
use crate::tensor::{self, ComplexMatrix, SpaceLayout, C64};

/// Tolerance on trace and norm checks for states.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: ComplexMatrix,
    layout: SpaceLayout,
}

impl StateVector {
    pub fn new(amplitudes: ComplexMatrix, layout: SpaceLayout) -> Result<Self> {
        if amplitudes.cols() != 1 || amplitudes.rows() != layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on a layout of dimension {}",
                amplitudes.rows(),
                layout.dim()
            )));
        }
        Ok(Self { amplitudes, layout })
    }

    pub fn amplitudes(&self) -> &ComplexMatrix {
        &self.amplitudes
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// |⟨self|other⟩|, the phase-insensitive overlap.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amplitudes.inner_product(&other.amplitudes).norm()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: self.amplitudes.projector(),
            layout: self.layout.clone(),
        }
    }

    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        self.to_density().reduced(keep)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    layout: SpaceLayout,
}

impl DensityOperator {
    /// Wraps a matrix without physical validation (shape only).
    pub fn new(matrix: ComplexMatrix, layout: SpaceLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator on a layout of dimension {}",
                matrix.rows(),
                matrix.cols(),
                layout.dim()
            )));
        }
        Ok(Self { matrix, layout })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Checks Hermiticity, unit trace and positivity at tolerance `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let dev = self.matrix.hermitian_deviation();
        if dev > tensor::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = self.trace();
        if (tr - tensor::re(1.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {:.12} is not 1", tr.re)));
        }
        let min = tensor::min_eigenvalue(&self.matrix)?;
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        let m = tensor::partial_trace(&self.matrix, &self.layout, keep)?;
        let mut positions: Vec<usize> = keep
            .iter()
            .map(|l| self.layout.index_of(l))
            .collect::<Result<_>>()?;
        positions.sort_unstable();
        positions.dedup();
        let layout = SpaceLayout::new(
            positions
                .iter()
                .map(|&p| (self.layout.labels()[p].clone(), self.layout.dims()[p])),
        )?;
        Ok(DensityOperator { matrix: m, layout })
    }

    /// Purity tr(ρ²).
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Convex combination `w·self + (1-w)·other` on identical layouts.
    pub fn mix(&self, other: &DensityOperator, w: f64) -> Result<DensityOperator> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("mixing states on different layouts".into()));
        }
        Ok(DensityOperator {
            matrix: &self.matrix.scale_re(w) + &other.matrix.scale_re(1.0 - w),
            layout: self.layout.clone(),
        })
    }

    /// Applies a unitary on the whole space: U ρ U†.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<DensityOperator> {
        if u.rows() != self.matrix.rows() || !u.is_square() {
            return Err(Error::DimensionMismatch("unitary does not match state".into()));
        }
        Ok(DensityOperator {
            matrix: &(u * &self.matrix) * &u.dagger(),
            layout: self.layout.clone(),
        })
    }
}
