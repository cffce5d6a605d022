//! Single- and double-layer potentials over discretized boundaries.
//!
//! The single layer of a density v on a boundary S is the quadrature sum
//! V v (x) = sum_q w_q Phi(x, y_q) v_q; the double layer W u0 uses the
//! conormal kernel of [`crate::kernels::conormal_kernel_y`] (which carries
//! the leading minus of the double-layer convention). For boundary data
//! (u0, u1) = (B0 u, B1 u) of a solution u the combination
//! W u0 + V u1 reproduces u inside the boundary and vanishes outside;
//! [`green_representation`] evaluates exactly that combination.
//!
//! On-surface values are obtained without singular quadrature by offset
//! evaluation: the trace at a node x is extrapolated from evaluations at
//! x -+ eps nu(x) with eps in {eps0, eps0/2}, eps0 = 2 local node spacings
//! (two-level Richardson in eps). The conormal derivative of the single
//! layer jumps across the boundary; the jump (inner limit minus outer
//! limit) reproduces the density.

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Boundary, Containment, Point};
use crate::kernels::{conormal_kernel_x, conormal_kernel_y, phi, KernelError, OperatorSpec};

/// Multiplier on the local node spacing below which a target counts as
/// near-field for plain quadrature.
pub const NEAR_FIELD_SPACINGS: f64 = 3.0;

/// Offset factor: eps0 = OFFSET_SPACINGS * local node spacing.
pub const OFFSET_SPACINGS: f64 = 2.0;

/// Relative extrapolation disagreement above which a trace is flagged.
pub const EXTRAPOLATION_FLAG_TOL: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("density has {got} components, operator expects {expected}")]
    ComponentMismatch { got: usize, expected: usize },
    #[error("density length {got} does not match boundary node count {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("densities live on different boundaries")]
    BoundaryMismatch,
    #[error("non-finite density value at node {0}")]
    NonFinite(usize),
}

/// A k-vector valued function sampled at the quadrature nodes of a
/// boundary. Values are stored node-major: `values[q * k + i]`.
#[derive(Debug, Clone)]
pub struct LayerDensity {
    boundary: Arc<Boundary>,
    k: usize,
    values: Vec<f64>,
}

impl LayerDensity {
    pub fn zeros(boundary: &Arc<Boundary>, k: usize) -> Self {
        LayerDensity {
            boundary: boundary.clone(),
            k,
            values: vec![0.0; k * boundary.n_nodes()],
        }
    }

    /// Samples `f` at every quadrature node; only the first k components
    /// of the returned array are used.
    pub fn from_fn(boundary: &Arc<Boundary>, k: usize, f: impl Fn(Point) -> [f64; 3]) -> Self {
        let mut values = Vec::with_capacity(k * boundary.n_nodes());
        for node in boundary.nodes() {
            let v = f(*node);
            values.extend_from_slice(&v[..k]);
        }
        LayerDensity {
            boundary: boundary.clone(),
            k,
            values,
        }
    }

    pub fn from_values(
        boundary: &Arc<Boundary>,
        k: usize,
        values: Vec<f64>,
    ) -> Result<Self, PotentialError> {
        if values.len() != k * boundary.n_nodes() {
            return Err(PotentialError::LengthMismatch {
                got: values.len(),
                expected: k * boundary.n_nodes(),
            });
        }
        if let Some(q) = values.iter().position(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite(q / k));
        }
        Ok(LayerDensity {
            boundary: boundary.clone(),
            k,
            values,
        })
    }

    pub fn boundary(&self) -> &Arc<Boundary> {
        &self.boundary
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.values[q * self.k..(q + 1) * self.k]
    }

    pub fn n_nodes(&self) -> usize {
        self.boundary.n_nodes()
    }

    /// a * self + b * other on the shared boundary.
    pub fn linear_combination(
        a: f64,
        x: &LayerDensity,
        b: f64,
        y: &LayerDensity,
    ) -> Result<LayerDensity, PotentialError> {
        if !Arc::ptr_eq(&x.boundary, &y.boundary) {
            return Err(PotentialError::BoundaryMismatch);
        }
        if x.k != y.k {
            return Err(PotentialError::ComponentMismatch {
                got: y.k,
                expected: x.k,
            });
        }
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(p, q)| a * p + b * q)
            .collect();
        Ok(LayerDensity {
            boundary: x.boundary.clone(),
            k: x.k,
            values,
        })
    }

    /// Quadrature-weighted L2 norm over the boundary.
    pub fn l2_norm(&self) -> f64 {
        let w = self.boundary.weights();
        let mut s = 0.0;
        for q in 0..self.n_nodes() {
            let vq = self.node(q);
            s += w[q] * vq.iter().map(|v| v * v).sum::<f64>();
        }
        s.sqrt()
    }

    /// Relative L2 distance to `other` (relative to the norm of `other`,
    /// absolute when `other` is zero).
    pub fn relative_l2_error(&self, other: &LayerDensity) -> Result<f64, PotentialError> {
        let diff = LayerDensity::linear_combination(1.0, self, -1.0, other)?;
        let denom = other.l2_norm();
        Ok(if denom > 0.0 {
            diff.l2_norm() / denom
        } else {
            diff.l2_norm()
        })
    }
}

/// Values of a potential over a set of evaluation points, together with a
/// side tag per point and the indices of points that fell inside the
/// near-field band of the generating boundary.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub points: Vec<Point>,
    pub k: usize,
    /// Point-major storage: `values[p * k + i]`.
    pub values: Vec<f64>,
    pub sides: Vec<Containment>,
    /// Targets closer to the boundary than the near-field threshold.
    pub near_field: Vec<usize>,
}

impl PotentialField {
    pub fn value(&self, p: usize) -> &[f64] {
        &self.values[p * self.k..(p + 1) * self.k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn zeros(k: usize, points: &[Point]) -> Self {
        PotentialField {
            points: points.to_vec(),
            k,
            values: vec![0.0; k * points.len()],
            sides: Vec::with_capacity(points.len()),
            near_field: Vec::new(),
        }
    }
}

/// Result of an on-surface trace: the extrapolated values and the largest
/// relative disagreement between the two extrapolation levels. A
/// disagreement above [`EXTRAPOLATION_FLAG_TOL`] sets `flagged`.
#[derive(Debug, Clone)]
pub struct TraceResult {
    pub trace: LayerDensity,
    pub disagreement: f64,
    pub flagged: bool,
}

fn check_density(op: &OperatorSpec, v: &LayerDensity) -> Result<(), PotentialError> {
    if v.k != op.component_count() {
        return Err(PotentialError::ComponentMismatch {
            got: v.k,
            expected: op.component_count(),
        });
    }
    Ok(())
}

enum LayerKind {
    Single,
    Double,
}

fn eval_layer(
    op: &OperatorSpec,
    v: &LayerDensity,
    targets: &[Point],
    kind: LayerKind,
) -> Result<PotentialField, PotentialError> {
    check_density(op, v)?;
    let k = v.k;
    let b = v.boundary();
    let nodes = b.nodes();
    let weights = b.weights();
    let normals = b.normals();
    let mut field = PotentialField::zeros(k, targets);
    for (p, x) in targets.iter().enumerate() {
        let out = &mut field.values[p * k..(p + 1) * k];
        for q in 0..nodes.len() {
            let block = match kind {
                LayerKind::Single => phi(op, *x, nodes[q])?,
                LayerKind::Double => conormal_kernel_y(op, *x, nodes[q], normals[q])?,
            };
            let mut scaled = [0.0; 3];
            for (i, s) in scaled.iter_mut().enumerate().take(k) {
                *s = weights[q] * v.node(q)[i];
            }
            block.apply(&scaled[..k], out);
        }
        field.sides.push(b.contains(*x, None));
        if in_near_field(b, *x) {
            field.near_field.push(p);
        }
    }
    Ok(field)
}

fn in_near_field(b: &Boundary, x: Point) -> bool {
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (q, node) in b.nodes().iter().enumerate() {
        let d = (x - node).norm();
        if d < best {
            best = d;
            best_idx = q;
        }
    }
    best < NEAR_FIELD_SPACINGS * b.node_spacing(best_idx)
}

/// Discrete single layer sum_q w_q Phi(x, y_q) v_q at the given targets.
/// Targets inside the near-field band are flagged in the result.
pub fn eval_single_layer(
    op: &OperatorSpec,
    v: &LayerDensity,
    targets: &[Point],
) -> Result<PotentialField, PotentialError> {
    eval_layer(op, v, targets, LayerKind::Single)
}

/// Discrete double layer with the conormal kernel (leading minus included).
pub fn eval_double_layer(
    op: &OperatorSpec,
    u0: &LayerDensity,
    targets: &[Point],
) -> Result<PotentialField, PotentialError> {
    eval_layer(op, u0, targets, LayerKind::Double)
}

/// W(u0) + V(u1): reproduces the solution inside the boundary and zero
/// outside when (u0, u1) are the boundary data of a solution.
pub fn green_representation(
    op: &OperatorSpec,
    u0: &LayerDensity,
    u1: &LayerDensity,
    targets: &[Point],
) -> Result<PotentialField, PotentialError> {
    if !Arc::ptr_eq(u0.boundary(), u1.boundary()) {
        return Err(PotentialError::BoundaryMismatch);
    }
    let w = eval_double_layer(op, u0, targets)?;
    let s = eval_single_layer(op, u1, targets)?;
    let mut out = w;
    for (a, b) in out.values.iter_mut().zip(&s.values) {
        *a += b;
    }
    for idx in s.near_field {
        if !out.near_field.contains(&idx) {
            out.near_field.push(idx);
        }
    }
    out.near_field.sort_unstable();
    Ok(out)
}

/// Offset pair used by the extrapolated traces: for node i these are the
/// evaluation points x_i -+ eps nu_i at the two Richardson levels.
fn offset_points(b: &Boundary, i: usize, inward: bool) -> (Point, Point) {
    let eps0 = OFFSET_SPACINGS * b.node_spacing(i);
    let nu = b.normals()[i];
    let sign = if inward { -1.0 } else { 1.0 };
    (
        b.nodes()[i] + sign * eps0 * nu,
        b.nodes()[i] + sign * 0.5 * eps0 * nu,
    )
}

/// Two-level Richardson: assumes f(eps) = f0 + c eps + O(eps^2).
fn richardson(coarse: &[f64], fine: &[f64], out: &mut [f64]) -> f64 {
    let mut disagreement: f64 = 0.0;
    for i in 0..out.len() {
        out[i] = 2.0 * fine[i] - coarse[i];
        disagreement = disagreement.max((fine[i] - coarse[i]).abs());
    }
    disagreement
}

/// Boundary values of the single layer on `on`.
///
/// Disjoint surfaces use plain quadrature (identical to
/// [`eval_single_layer`] at the nodes of `on`). The self-trace, which is
/// continuous across the boundary, is computed by inward offset
/// evaluation with Richardson extrapolation.
pub fn trace_single_layer(
    op: &OperatorSpec,
    v: &LayerDensity,
    on: &Arc<Boundary>,
) -> Result<TraceResult, PotentialError> {
    check_density(op, v)?;
    let k = v.k;
    if !Arc::ptr_eq(v.boundary(), on) {
        let field = eval_single_layer(op, v, on.nodes())?;
        let trace = LayerDensity::from_values(on, k, field.values)?;
        return Ok(TraceResult {
            trace,
            disagreement: 0.0,
            flagged: false,
        });
    }
    let b = on;
    let n = b.n_nodes();
    let mut values = vec![0.0; k * n];
    let mut disagreement: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let (p_coarse, p_fine) = offset_points(b, i, true);
        let coarse = eval_single_layer(op, v, &[p_coarse])?;
        let fine = eval_single_layer(op, v, &[p_fine])?;
        let d = richardson(
            &coarse.values,
            &fine.values,
            &mut values[i * k..(i + 1) * k],
        );
        disagreement = disagreement.max(d);
        scale = scale.max(fine.max_abs());
    }
    let rel = disagreement / scale.max(f64::MIN_POSITIVE);
    Ok(TraceResult {
        trace: LayerDensity::from_values(b, k, values)?,
        disagreement: rel,
        flagged: rel > EXTRAPOLATION_FLAG_TOL,
    })
}

/// Trace of the double layer on a disjoint boundary (plain quadrature) or
/// its one-sided limit from inside the generating boundary (offset
/// extrapolation). Together with the single-layer trace this yields the
/// boundary datum of the Green combination without singular quadrature.
pub fn trace_double_layer_inner(
    op: &OperatorSpec,
    u0: &LayerDensity,
    on: &Arc<Boundary>,
) -> Result<TraceResult, PotentialError> {
    check_density(op, u0)?;
    let k = u0.k;
    if !Arc::ptr_eq(u0.boundary(), on) {
        let field = eval_double_layer(op, u0, on.nodes())?;
        let trace = LayerDensity::from_values(on, k, field.values)?;
        return Ok(TraceResult {
            trace,
            disagreement: 0.0,
            flagged: false,
        });
    }
    let b = on;
    let n = b.n_nodes();
    let mut values = vec![0.0; k * n];
    let mut disagreement: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let (p_coarse, p_fine) = offset_points(b, i, true);
        let coarse = eval_double_layer(op, u0, &[p_coarse])?;
        let fine = eval_double_layer(op, u0, &[p_fine])?;
        let d = richardson(
            &coarse.values,
            &fine.values,
            &mut values[i * k..(i + 1) * k],
        );
        disagreement = disagreement.max(d);
        scale = scale.max(fine.max_abs());
    }
    let rel = disagreement / scale.max(f64::MIN_POSITIVE);
    Ok(TraceResult {
        trace: LayerDensity::from_values(b, k, values)?,
        disagreement: rel,
        flagged: rel > EXTRAPOLATION_FLAG_TOL,
    })
}

/// Conormal derivative of the single layer at an off-surface point,
/// taken along the boundary normal of node `i`.
fn conormal_at(
    op: &OperatorSpec,
    v: &LayerDensity,
    x: Point,
    nu: Point,
) -> Result<Vec<f64>, PotentialError> {
    let k = v.k;
    let b = v.boundary();
    let mut out = vec![0.0; k];
    for q in 0..b.n_nodes() {
        let block = conormal_kernel_x(op, x, nu, b.nodes()[q])?;
        let mut scaled = [0.0; 3];
        for (i, s) in scaled.iter_mut().enumerate().take(k) {
            *s = b.weights()[q] * v.node(q)[i];
        }
        block.apply(&scaled[..k], &mut out);
    }
    Ok(out)
}

/// Jump of the conormal derivative of the single layer across its
/// boundary: inner limit minus outer limit, which reproduces the density.
/// Both one-sided limits are offset-extrapolated; the larger of the two
/// extrapolation disagreements is reported.
pub fn conormal_jump_single_layer(
    op: &OperatorSpec,
    v: &LayerDensity,
) -> Result<TraceResult, PotentialError> {
    check_density(op, v)?;
    let k = v.k;
    let b = v.boundary().clone();
    let n = b.n_nodes();
    let mut values = vec![0.0; k * n];
    let mut disagreement: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut inner = vec![0.0; k];
    let mut outer = vec![0.0; k];
    for i in 0..n {
        let nu = b.normals()[i];
        let (pc_in, pf_in) = offset_points(&b, i, true);
        let (pc_out, pf_out) = offset_points(&b, i, false);
        let d_in = richardson(
            &conormal_at(op, v, pc_in, nu)?,
            &conormal_at(op, v, pf_in, nu)?,
            &mut inner,
        );
        let d_out = richardson(
            &conormal_at(op, v, pc_out, nu)?,
            &conormal_at(op, v, pf_out, nu)?,
            &mut outer,
        );
        for c in 0..k {
            values[i * k + c] = inner[c] - outer[c];
            scale = scale.max(values[i * k + c].abs());
        }
        disagreement = disagreement.max(d_in.max(d_out));
    }
    let rel = disagreement / scale.max(f64::MIN_POSITIVE);
    Ok(TraceResult {
        trace: LayerDensity::from_values(&b, k, values)?,
        disagreement: rel,
        flagged: rel > EXTRAPOLATION_FLAG_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use approx::assert_relative_eq;

    fn unit_circle(n: usize) -> Arc<Boundary> {
        Boundary::build(
            Shape::Circle {
                center: Point::zeros(),
                radius: 1.0,
            },
            n,
        )
        .unwrap()
    }

    fn ones(b: &Arc<Boundary>) -> LayerDensity {
        LayerDensity::from_fn(b, 1, |_| [1.0, 0.0, 0.0])
    }

    /// High-resolution quadrature oracle for the uniform log potential on
    /// the unit circle: 0 inside, -ln|x| outside (with the kernel
    /// normalized so that -Delta Phi = delta).
    fn log_potential_oracle(x: Point) -> f64 {
        let n = 10_000;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let t = h * i as f64;
            let y = Point::new(t.cos(), t.sin(), 0.0);
            s += h * (-(x - y).norm().ln() / (2.0 * std::f64::consts::PI));
        }
        s
    }

    #[test]
    fn zero_density_gives_zero_field() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(32);
        let v = LayerDensity::zeros(&b, 1);
        let targets = [Point::new(0.2, 0.1, 0.0), Point::new(3.0, 0.0, 0.0)];
        let f = eval_single_layer(&op, &v, &targets).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        let w = eval_double_layer(&op, &v, &targets).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }

    #[test]
    fn uniform_log_single_layer_matches_oracle() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let v = ones(&b);
        let inside = Point::zeros();
        let outside = Point::new(std::f64::consts::E, 0.0, 0.0);
        let f = eval_single_layer(&op, &v, &[inside, outside]).unwrap();
        // Oracle: 0 inside the unit circle, -1 at |x| = e.
        assert!((f.value(0)[0] - log_potential_oracle(inside)).abs() < 1e-12);
        assert!(f.value(0)[0].abs() < 1e-12);
        assert!((f.value(1)[0] - log_potential_oracle(outside)).abs() < 1e-10);
        assert_relative_eq!(f.value(1)[0], -1.0, epsilon = 1e-10);
        assert_eq!(f.sides[0], Containment::Inside);
        assert_eq!(f.sides[1], Containment::Outside);
    }

    #[test]
    fn uniform_double_layer_gauss_identity() {
        // With -Delta Phi = delta the double layer of the unit density is
        // +1 inside and 0 outside; frozen from the quadrature oracle.
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let u0 = ones(&b);
        let f = eval_double_layer(&op, &u0, &[Point::new(0.3, -0.4, 0.0), Point::new(2.5, 1.0, 0.0)])
            .unwrap();
        assert_relative_eq!(f.value(0)[0], 1.0, epsilon = 1e-10);
        assert!(f.value(1)[0].abs() < 1e-10);
    }

    #[test]
    fn near_field_targets_are_flagged() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(64);
        let v = ones(&b);
        let spacing = 2.0 * std::f64::consts::PI / 64.0;
        let near = Point::new(1.0 + spacing, 0.0, 0.0);
        let far = Point::new(2.0, 0.0, 0.0);
        let f = eval_single_layer(&op, &v, &[near, far]).unwrap();
        assert_eq!(f.near_field, vec![0]);
    }

    #[test]
    fn component_mismatch_rejected() {
        let op = OperatorSpec::lame_3d(1.0, 1.0).unwrap();
        let b = unit_circle(16);
        let v = ones(&b);
        assert!(matches!(
            eval_single_layer(&op, &v, &[Point::new(0.0, 0.0, 2.0)]),
            Err(PotentialError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn linearity_of_single_layer() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(64);
        let v1 = LayerDensity::from_fn(&b, 1, |p| [p.x, 0.0, 0.0]);
        let v2 = LayerDensity::from_fn(&b, 1, |p| [p.y * p.y, 0.0, 0.0]);
        let combo = LayerDensity::linear_combination(2.0, &v1, -3.0, &v2).unwrap();
        let targets = [Point::new(0.4, 0.1, 0.0), Point::new(1.7, -0.2, 0.0)];
        let f1 = eval_single_layer(&op, &v1, &targets).unwrap();
        let f2 = eval_single_layer(&op, &v2, &targets).unwrap();
        let fc = eval_single_layer(&op, &combo, &targets).unwrap();
        for p in 0..targets.len() {
            let expect = 2.0 * f1.value(p)[0] - 3.0 * f2.value(p)[0];
            assert!((fc.value(p)[0] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn disjoint_trace_equals_plain_evaluation() {
        let op = OperatorSpec::laplace_2d();
        let sources = unit_circle(64);
        let targets = Boundary::build(
            Shape::Circle {
                center: Point::zeros(),
                radius: 0.5,
            },
            32,
        )
        .unwrap();
        let v = ones(&sources);
        let tr = trace_single_layer(&op, &v, &targets).unwrap();
        let field = eval_single_layer(&op, &v, targets.nodes()).unwrap();
        for q in 0..targets.n_nodes() {
            assert_eq!(tr.trace.node(q)[0], field.value(q)[0]);
        }
        assert!(!tr.flagged);
    }

    #[test]
    fn self_trace_of_uniform_log_density() {
        // Continuity: the trace equals the interior value 0 on the unit circle.
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let v = ones(&b);
        let tr = trace_single_layer(&op, &v, &b).unwrap();
        for q in 0..b.n_nodes() {
            assert!(tr.trace.node(q)[0].abs() < 5e-3, "node {q}: {}", tr.trace.node(q)[0]);
        }
    }

    #[test]
    fn zero_density_jump_is_zero() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(32);
        let v = LayerDensity::zeros(&b, 1);
        let jump = conormal_jump_single_layer(&op, &v).unwrap();
        assert_eq!(jump.trace.l2_norm(), 0.0);
    }

    #[test]
    fn jump_reproduces_cosine_density() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let v = LayerDensity::from_fn(&b, 1, |p| [p.y.atan2(p.x).cos(), 0.0, 0.0]);
        let jump = conormal_jump_single_layer(&op, &v).unwrap();
        let err = jump.trace.relative_l2_error(&v).unwrap();
        assert!(err < 1e-2, "relative L2 error {err}");
    }

    #[test]
    fn jump_error_shrinks_under_refinement() {
        let op = OperatorSpec::laplace_2d();
        let err_at = |n: usize| {
            let b = unit_circle(n);
            let v = LayerDensity::from_fn(&b, 1, |p| [p.y.atan2(p.x).cos(), 0.0, 0.0]);
            let jump = conormal_jump_single_layer(&op, &v).unwrap();
            jump.trace.relative_l2_error(&v).unwrap()
        };
        let coarse = err_at(32);
        let fine = err_at(256);
        assert!(fine < coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn lame_sphere_jump_reproduces_density() {
        // Mesh-scale tolerance: the lattice rule converges slowly for the
        // near-singular offset evaluations (1.1e-1 at 500 nodes, 5e-2 at
        // 2000).
        let op = OperatorSpec::lame_3d(1.0, 1.0).unwrap();
        let b = Boundary::build(
            Shape::Sphere {
                center: Point::zeros(),
                radius: 1.0,
            },
            2000,
        )
        .unwrap();
        let v = LayerDensity::from_fn(&b, 3, |p| [1.0 + 0.5 * p.x, 0.3 * p.y + 0.2, 0.4 * p.z]);
        let jump = conormal_jump_single_layer(&op, &v).unwrap();
        let err = jump.trace.relative_l2_error(&v).unwrap();
        assert!(err < 5e-2, "relative L2 error {err}");
    }

    #[test]
    fn inner_and_outer_single_layer_traces_agree() {
        // B0 V has no jump: inner and outer offset traces must agree
        // within the extrapolation tolerance.
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let v = LayerDensity::from_fn(&b, 1, |p| [1.0 + 0.5 * p.x, 0.0, 0.0]);
        let n = b.n_nodes();
        let mut max_diff: f64 = 0.0;
        for i in (0..n).step_by(16) {
            let (pc_in, pf_in) = offset_points(&b, i, true);
            let (pc_out, pf_out) = offset_points(&b, i, false);
            let fi = |p: Point| {
                eval_single_layer(&op, &v, &[p]).unwrap().value(0)[0]
            };
            let inner = 2.0 * fi(pf_in) - fi(pc_in);
            let outer = 2.0 * fi(pf_out) - fi(pc_out);
            max_diff = max_diff.max((inner - outer).abs());
        }
        assert!(max_diff < 5e-3, "trace mismatch {max_diff}");
    }

    /// Green representation with manufactured data: boundary data of
    /// u*(x) = Phi(x - z0) reproduce u* inside and 0 outside.
    #[test]
    fn green_representation_reproduces_manufactured_solution() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(256);
        let z0 = Point::new(5.0, 0.0, 0.0);
        let u0 = LayerDensity::from_fn(&b, 1, |p| [phi(&op, p, z0).unwrap().get(0, 0), 0.0, 0.0]);
        let u1 = LayerDensity::from_fn(&b, 1, |p| {
            let nu = (p - Point::zeros()).normalize();
            [conormal_kernel_x(&op, p, nu, z0).unwrap().get(0, 0), 0.0, 0.0]
        });
        let inside = Point::new(0.3, 0.2, 0.0);
        let outside = Point::new(3.0, 0.0, 0.0);
        let f = green_representation(&op, &u0, &u1, &[inside, outside]).unwrap();
        let exact = phi(&op, inside, z0).unwrap().get(0, 0);
        assert!((f.value(0)[0] - exact).abs() < 1e-10, "interior error");
        assert!(f.value(1)[0].abs() < 1e-10, "exterior leak");
    }

    #[test]
    fn green_zero_data_gives_zero() {
        let op = OperatorSpec::laplace_2d();
        let b = unit_circle(32);
        let z = LayerDensity::zeros(&b, 1);
        let f = green_representation(&op, &z, &z, &[Point::new(0.1, 0.0, 0.0)]).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }
}
