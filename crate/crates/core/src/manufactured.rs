//! Manufactured exact solutions built from fundamental-solution columns.
//!
//! For an exterior pole z0 the field u*(x) = Phi(x, z0) e_c (column
//! selector e_c) solves L u* = 0 on any region that excludes z0, so its
//! boundary traces provide exact data for every solver in this crate and
//! direct evaluation of u* is the error oracle.

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Boundary, Containment, Point};
use crate::kernels::{conormal_kernel_x, phi, KernelError, OperatorSpec};
use crate::potentials::{LayerDensity, PotentialError};

#[derive(Debug, Error)]
pub enum ManufacturedError {
    #[error("source point must lie strictly outside the boundary (got {0:?})")]
    SourceInsideRegion([f64; 3]),
    #[error("component {got} out of range for a {k}-component operator")]
    BadComponent { got: usize, k: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Exact solution u*(x) = Phi(x, z0) e_component.
#[derive(Debug, Clone)]
pub struct ManufacturedSolution {
    op: OperatorSpec,
    source: Point,
    component: usize,
}

impl ManufacturedSolution {
    pub fn new(op: OperatorSpec, source: Point, component: usize) -> Result<Self, ManufacturedError> {
        let k = op.component_count();
        if component >= k {
            return Err(ManufacturedError::BadComponent { got: component, k });
        }
        Ok(ManufacturedSolution {
            op,
            source,
            component,
        })
    }

    pub fn source(&self) -> Point {
        self.source
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.op
    }

    /// Rejects regions that contain the pole.
    pub fn check_exterior_to(&self, b: &Boundary) -> Result<(), ManufacturedError> {
        if b.contains(self.source, None) != Containment::Outside {
            return Err(ManufacturedError::SourceInsideRegion([
                self.source.x,
                self.source.y,
                self.source.z,
            ]));
        }
        Ok(())
    }

    /// u*(x) as a k-vector.
    pub fn value(&self, x: Point) -> Result<[f64; 3], ManufacturedError> {
        let block = phi(&self.op, x, self.source)?;
        let mut out = [0.0; 3];
        for i in 0..self.op.component_count() {
            out[i] = block.get(i, self.component);
        }
        Ok(out)
    }

    /// B0 u* sampled at the quadrature nodes of `b`.
    pub fn dirichlet_trace(&self, b: &Arc<Boundary>) -> Result<LayerDensity, ManufacturedError> {
        self.check_exterior_to(b)?;
        let k = self.op.component_count();
        let mut values = Vec::with_capacity(k * b.n_nodes());
        for node in b.nodes() {
            let v = self.value(*node)?;
            values.extend_from_slice(&v[..k]);
        }
        Ok(LayerDensity::from_values(b, k, values)?)
    }

    /// B1 u* sampled at the quadrature nodes of `b` (conormal taken along
    /// the boundary normals).
    pub fn conormal_trace(&self, b: &Arc<Boundary>) -> Result<LayerDensity, ManufacturedError> {
        self.check_exterior_to(b)?;
        let k = self.op.component_count();
        let mut values = Vec::with_capacity(k * b.n_nodes());
        for (node, normal) in b.nodes().iter().zip(b.normals()) {
            let block = conormal_kernel_x(&self.op, *node, *normal, self.source)?;
            for i in 0..k {
                values.push(block.get(i, self.component));
            }
        }
        Ok(LayerDensity::from_values(b, k, values)?)
    }

    /// Relative L2 error of `values` (point-major, k components per point)
    /// against u* over the given points.
    pub fn relative_l2_error(
        &self,
        points: &[Point],
        values: &[f64],
    ) -> Result<f64, ManufacturedError> {
        let k = self.op.component_count();
        assert_eq!(values.len(), k * points.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for (p, x) in points.iter().enumerate() {
            let exact = self.value(*x)?;
            for i in 0..k {
                let d = values[p * k + i] - exact[i];
                num += d * d;
                den += exact[i] * exact[i];
            }
        }
        Ok(if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::kernels::pde_residual;
    use approx::assert_relative_eq;

    #[test]
    fn laplace_3d_value_at_distance_four() {
        let ms = ManufacturedSolution::new(
            OperatorSpec::laplace_3d(),
            Point::new(5.0, 0.0, 0.0),
            0,
        )
        .unwrap();
        let v = ms.value(Point::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(v[0], 1.0 / (16.0 * std::f64::consts::PI), epsilon = 1e-12);
    }

    #[test]
    fn lame_column_solves_the_system() {
        let op = OperatorSpec::lame_3d(1.0, 1.0).unwrap();
        let z0 = Point::new(5.0, 0.0, 0.0);
        let r = pde_residual(&op, z0, Point::new(1.0, 0.0, 0.0), 1e-3);
        assert!(r < 1e-4, "residual {r}");
    }

    #[test]
    fn pole_inside_region_rejected() {
        let b = Boundary::build(
            Shape::Circle {
                center: Point::zeros(),
                radius: 2.0,
            },
            16,
        )
        .unwrap();
        let ms =
            ManufacturedSolution::new(OperatorSpec::laplace_2d(), Point::new(1.0, 0.0, 0.0), 0)
                .unwrap();
        assert!(ms.dirichlet_trace(&b).is_err());
        let ok = ManufacturedSolution::new(OperatorSpec::laplace_2d(), Point::new(5.0, 0.0, 0.0), 0)
            .unwrap();
        assert!(ok.dirichlet_trace(&b).is_ok());
    }

    #[test]
    fn traces_of_out_of_range_component_rejected() {
        assert!(ManufacturedSolution::new(
            OperatorSpec::laplace_2d(),
            Point::new(5.0, 0.0, 0.0),
            1
        )
        .is_err());
    }
}
