//! Solvers for the exterior extension problems.
//!
//! All four problems reduce to one primitive: given Dirichlet data f on an
//! interior collocation boundary, represent a solution of L u = 0 on a
//! larger domain either as a weighted sum of fundamental solutions with
//! poles on an embracing boundary (point-source collocation) or as a
//! single layer on an intermediate boundary, with the dense system solved
//! by regularized least squares.
//!
//! * inner Dirichlet / continuation: solve the primitive directly;
//! * classical Dirichlet by extension: solve the primitive against a
//!   virtual embracing boundary and restrict to the original domain;
//! * the two-trace reconstruction problem on an annulus: form the
//!   combination T = W(u00) + V(u10) from the data pair, produce a
//!   Dirichlet datum for the primitive from T (on an interior probe
//!   boundary, by on-surface limits, or through the trace-transfer
//!   operator), and recombine. With F the continuation of T from inside
//!   the data boundary, the reconstruction in the annulus is F - T.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::geometry::{Boundary, Containment, DomainLayout, GeometryError, Point};
use crate::kernels::{phi, HelmholtzBranch, KernelError, OperatorKind, OperatorSpec};
use crate::potentials::{
    eval_single_layer, green_representation, trace_double_layer_inner, trace_single_layer,
    LayerDensity, PotentialError, PotentialField, TraceResult, NEAR_FIELD_SPACINGS,
    OFFSET_SPACINGS,
};
use crate::reglinalg::{assemble, LinAlgError, RegConfig, RegularizedSystem, SolveReport, Sources};

/// Scale factor of the default interior probe boundary.
pub const DEFAULT_PROBE_SCALE: f64 = 0.6;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error("layout is missing the {0} boundary required by this solver")]
    MissingShell(&'static str),
    #[error("boundary datum lives on a different boundary than the layout expects")]
    DatumBoundaryMismatch,
    #[error("the growing Helmholtz branch admits no decaying single-layer representation; solvers accept the decaying branch only")]
    UnsupportedBranch,
    #[error("evaluation point {index} at ({x}, {y}, {z}) is outside the solution's domain of validity")]
    OutsideValidity {
        index: usize,
        x: f64,
        y: f64,
        z: f64,
    },
}

/// Which representation backs the inner Dirichlet solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Point sources on the outer embracing boundary.
    Mfs { n_sources: usize },
    /// Single-layer density on the middle boundary.
    SingleLayer,
}

/// Route from a Cauchy pair to a Dirichlet datum for the continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Evaluate the data combination on an interior probe boundary
    /// (regular quadrature only; the default).
    Probe,
    /// On-surface limits of the data combination on the data boundary
    /// (offset-extrapolated principal values).
    Pv,
    /// Transfer the outer trace back to the data boundary through the
    /// single-layer trace operator.
    Hat,
}

/// Cauchy pair on the data boundary: Dirichlet trace u00 = B0 u and
/// conormal trace u10 = B1 u.
#[derive(Debug, Clone)]
pub struct CauchyData {
    boundary: Arc<Boundary>,
    u00: LayerDensity,
    u10: LayerDensity,
}

impl CauchyData {
    pub fn new(u00: LayerDensity, u10: LayerDensity) -> Result<Self, ProblemError> {
        if !Arc::ptr_eq(u00.boundary(), u10.boundary()) {
            return Err(PotentialError::BoundaryMismatch.into());
        }
        let boundary = u00.boundary().clone();
        Ok(CauchyData { boundary, u00, u10 })
    }

    pub fn boundary(&self) -> &Arc<Boundary> {
        &self.boundary
    }

    pub fn dirichlet(&self) -> &LayerDensity {
        &self.u00
    }

    pub fn conormal(&self) -> &LayerDensity {
        &self.u10
    }

    /// The data combination W(u00) + V(u10) at off-surface targets.
    pub fn trace_combination(
        &self,
        op: &OperatorSpec,
        targets: &[Point],
    ) -> Result<PotentialField, ProblemError> {
        Ok(green_representation(op, &self.u00, &self.u10, targets)?)
    }
}

/// Region a solution may be evaluated on: strictly inside `outer` (when
/// set) and strictly outside `inner_excluded` plus its near-field band.
#[derive(Debug, Clone)]
struct Validity {
    outer: Option<Arc<Boundary>>,
    inner_excluded: Option<Arc<Boundary>>,
}

impl Validity {
    fn check(&self, targets: &[Point]) -> Result<Vec<usize>, ProblemError> {
        let mut band_hits = Vec::new();
        for (index, t) in targets.iter().enumerate() {
            let reject = |_why: &str| ProblemError::OutsideValidity {
                index,
                x: t.x,
                y: t.y,
                z: t.z,
            };
            if let Some(outer) = &self.outer {
                if outer.contains(*t, None) != Containment::Inside {
                    return Err(reject("outside the outer validity shell"));
                }
            }
            if let Some(inner) = &self.inner_excluded {
                if inner.contains(*t, None) != Containment::Outside {
                    return Err(reject("inside the excluded region"));
                }
                let band = NEAR_FIELD_SPACINGS * inner.max_node_spacing();
                if inner.distance_from_surface(*t) < band {
                    band_hits.push(index);
                }
            }
        }
        Ok(band_hits)
    }
}

#[derive(Debug, Clone)]
enum Representation {
    PointSources {
        sources: Vec<Point>,
        coeffs: DVector<f64>,
    },
    BoundaryDensity {
        density: LayerDensity,
    },
    /// continuation - [W(u00) + V(u10)] on the annulus; the trace term is
    /// omitted when the continuation already is the reconstruction.
    AnnulusReconstruction {
        continuation: Box<ExtensionSolution>,
        data: CauchyData,
        include_trace_term: bool,
    },
}

/// A solved extension problem: an evaluable representation plus the solve
/// diagnostics and the declared region of validity.
#[derive(Debug, Clone)]
pub struct ExtensionSolution {
    op: OperatorSpec,
    representation: Representation,
    validity: Validity,
    pub report: SolveReport,
    /// Propagated quality flags (extrapolation disagreements, fallbacks).
    pub warnings: Vec<String>,
}

impl ExtensionSolution {
    pub fn operator(&self) -> &OperatorSpec {
        &self.op
    }

    /// Number of coefficients in the representation.
    pub fn coefficient_count(&self) -> usize {
        match &self.representation {
            Representation::PointSources { coeffs, .. } => coeffs.len(),
            Representation::BoundaryDensity { density } => density.values().len(),
            Representation::AnnulusReconstruction { continuation, .. } => {
                continuation.coefficient_count()
            }
        }
    }

    /// Evaluates the solution at the targets. Points outside the declared
    /// domain of validity are refused; points inside an exclusion band are
    /// evaluated but flagged in `near_field`.
    pub fn evaluate(&self, targets: &[Point]) -> Result<PotentialField, ProblemError> {
        let band_hits = self.validity.check(targets)?;
        let mut field = match &self.representation {
            Representation::PointSources { sources, coeffs } => {
                let k = self.op.component_count();
                let mut field = PotentialField {
                    points: targets.to_vec(),
                    k,
                    values: vec![0.0; k * targets.len()],
                    sides: Vec::new(),
                    near_field: Vec::new(),
                };
                for (p, x) in targets.iter().enumerate() {
                    let out = &mut field.values[p * k..(p + 1) * k];
                    for (j, z) in sources.iter().enumerate() {
                        let block = phi(&self.op, *x, *z)?;
                        let mut c = [0.0; 3];
                        c[..k].copy_from_slice(&coeffs.as_slice()[j * k..(j + 1) * k]);
                        block.apply(&c[..k], out);
                    }
                }
                field
            }
            Representation::BoundaryDensity { density } => {
                eval_single_layer(&self.op, density, targets)?
            }
            Representation::AnnulusReconstruction {
                continuation,
                data,
                include_trace_term,
            } => {
                let mut field = continuation.evaluate_unchecked(targets)?;
                if *include_trace_term {
                    let trace = data.trace_combination(&self.op, targets)?;
                    for (a, b) in field.values.iter_mut().zip(&trace.values) {
                        *a -= b;
                    }
                }
                field
            }
        };
        for idx in band_hits {
            if !field.near_field.contains(&idx) {
                field.near_field.push(idx);
            }
        }
        field.near_field.sort_unstable();
        Ok(field)
    }

    /// Evaluation without the validity guard, for internal composition.
    fn evaluate_unchecked(&self, targets: &[Point]) -> Result<PotentialField, ProblemError> {
        let guard = Validity {
            outer: None,
            inner_excluded: None,
        };
        let relaxed = ExtensionSolution {
            op: self.op,
            representation: self.representation.clone(),
            validity: guard,
            report: self.report,
            warnings: Vec::new(),
        };
        relaxed.evaluate(targets)
    }

    /// Boundary residual: weighted relative L2 distance between the
    /// solution's trace on the datum boundary and the datum itself.
    pub fn boundary_residual(&self, datum: &LayerDensity) -> Result<f64, ProblemError> {
        let field = self.evaluate_unchecked(datum.boundary().nodes())?;
        let trace = LayerDensity::from_values(datum.boundary(), datum.k(), field.values)?;
        Ok(trace.relative_l2_error(datum)?)
    }
}

fn reject_growing_branch(op: &OperatorSpec) -> Result<(), ProblemError> {
    if op.kind() == OperatorKind::Helmholtz3d && op.branch() == HelmholtzBranch::Growing {
        return Err(ProblemError::UnsupportedBranch);
    }
    Ok(())
}

fn check_datum(op: &OperatorSpec, layout: &DomainLayout, f: &LayerDensity) -> Result<(), ProblemError> {
    if !Arc::ptr_eq(f.boundary(), &layout.inner) {
        return Err(ProblemError::DatumBoundaryMismatch);
    }
    if f.k() != op.component_count() {
        return Err(PotentialError::ComponentMismatch {
            got: f.k(),
            expected: op.component_count(),
        }
        .into());
    }
    Ok(())
}

/// Inner Dirichlet problem by point-source collocation: poles from the
/// nested source sequence of the outer boundary, collocation at the inner
/// boundary nodes, regularized least-squares weights.
pub fn solve_inner_dirichlet_mfs(
    op: &OperatorSpec,
    layout: &DomainLayout,
    f: &LayerDensity,
    n_sources: usize,
    reg: RegConfig,
) -> Result<ExtensionSolution, ProblemError> {
    reject_growing_branch(op)?;
    check_datum(op, layout, f)?;
    let outer = layout.outer.as_ref().ok_or(ProblemError::MissingShell("outer"))?;
    let sources = outer.source_sequence(n_sources);
    let matrix = assemble(op, Sources::Mfs(&sources), layout.inner.nodes())?;
    let rhs = DVector::from_column_slice(f.values());
    let (coeffs, report) = RegularizedSystem::new(matrix, rhs, reg)?.solve()?;
    let mut warnings = Vec::new();
    if report.discrepancy_fallback {
        warnings.push("discrepancy selection fell back to fixed alpha".into());
    }
    Ok(ExtensionSolution {
        op: *op,
        representation: Representation::PointSources { sources, coeffs },
        validity: Validity {
            outer: Some(layout.middle.clone().unwrap_or_else(|| outer.clone())),
            inner_excluded: None,
        },
        report,
        warnings,
    })
}

/// Inner Dirichlet problem by the indirect single-layer route: the
/// unknown density lives on the middle boundary's quadrature nodes.
pub fn solve_inner_dirichlet_single_layer(
    op: &OperatorSpec,
    layout: &DomainLayout,
    f: &LayerDensity,
    reg: RegConfig,
) -> Result<ExtensionSolution, ProblemError> {
    reject_growing_branch(op)?;
    check_datum(op, layout, f)?;
    let middle = layout
        .middle
        .as_ref()
        .ok_or(ProblemError::MissingShell("middle"))?;
    let matrix = assemble(
        op,
        Sources::SingleLayer {
            nodes: middle.nodes(),
            weights: middle.weights(),
        },
        layout.inner.nodes(),
    )?;
    let rhs = DVector::from_column_slice(f.values());
    let (coeffs, report) = RegularizedSystem::new(matrix, rhs, reg)?.solve()?;
    let density = LayerDensity::from_values(middle, op.component_count(), coeffs.as_slice().to_vec())?;
    let mut warnings = Vec::new();
    if report.discrepancy_fallback {
        warnings.push("discrepancy selection fell back to fixed alpha".into());
    }
    Ok(ExtensionSolution {
        op: *op,
        representation: Representation::BoundaryDensity { density },
        validity: Validity {
            outer: Some(middle.clone()),
            inner_excluded: None,
        },
        report,
        warnings,
    })
}

/// Continuation of a solution from the inner domain to the larger one:
/// the trace determines the solution, so this delegates to the chosen
/// inner Dirichlet solver with the trace as datum.
pub fn continue_solution(
    op: &OperatorSpec,
    layout: &DomainLayout,
    trace: &LayerDensity,
    method: SolverMethod,
    reg: RegConfig,
) -> Result<ExtensionSolution, ProblemError> {
    match method {
        SolverMethod::Mfs { n_sources } => solve_inner_dirichlet_mfs(op, layout, trace, n_sources, reg),
        SolverMethod::SingleLayer => solve_inner_dirichlet_single_layer(op, layout, trace, reg),
    }
}

/// Dirichlet datum for the continuation evaluated on an interior probe
/// boundary: W(u00) + V(u10) at the probe nodes, regular quadrature only.
pub fn cauchy_datum_on_probe(
    op: &OperatorSpec,
    data: &CauchyData,
    probe: &Arc<Boundary>,
) -> Result<LayerDensity, ProblemError> {
    for (i, node) in probe.nodes().iter().enumerate() {
        if data.boundary().contains(*node, None) != Containment::Inside {
            return Err(GeometryError::NestingViolation(format!(
                "probe node {i} is not strictly inside the data boundary"
            ))
            .into());
        }
    }
    let field = data.trace_combination(op, probe.nodes())?;
    Ok(LayerDensity::from_values(probe, field.k, field.values)?)
}

/// On-surface Dirichlet datum on the data boundary itself: the one-sided
/// interior limit of W(u00) + V(u10), computed by offset extrapolation
/// (this is the principal-value datum; the trace constant is contained in
/// the one-sided limit).
pub fn cauchy_datum_pv(op: &OperatorSpec, data: &CauchyData) -> Result<TraceResult, ProblemError> {
    let b = data.boundary();
    let w = trace_double_layer_inner(op, data.dirichlet(), b)?;
    let v = trace_single_layer(op, data.conormal(), b)?;
    let trace = LayerDensity::linear_combination(1.0, &w.trace, 1.0, &v.trace)?;
    Ok(TraceResult {
        trace,
        disagreement: w.disagreement.max(v.disagreement),
        flagged: w.flagged || v.flagged,
    })
}

/// Dirichlet datum via the trace-transfer route: the outer trace
/// g = [W(u00) + V(u10)] on the middle boundary is mapped back to the
/// data boundary by the single-layer trace operator (self-trace system on
/// the middle boundary, regularized), and combined with the on-surface
/// datum. Returns the datum and the report of the inner inversion.
pub fn cauchy_datum_hat(
    op: &OperatorSpec,
    layout: &DomainLayout,
    data: &CauchyData,
    reg: RegConfig,
) -> Result<(LayerDensity, SolveReport), ProblemError> {
    let middle = layout
        .middle
        .as_ref()
        .ok_or(ProblemError::MissingShell("middle"))?;
    if !Arc::ptr_eq(data.boundary(), &layout.inner) {
        return Err(ProblemError::DatumBoundaryMismatch);
    }
    let k = op.component_count();

    // g on the middle boundary (surfaces disjoint, regular quadrature).
    let g = data.trace_combination(op, middle.nodes())?;

    // Self-trace matrix on the middle boundary: Richardson-extrapolated
    // inward offsets of the single-layer rows.
    let offsets = |factor: f64| -> Vec<Point> {
        middle
            .nodes()
            .iter()
            .zip(middle.normals())
            .enumerate()
            .map(|(i, (x, nu))| x - factor * OFFSET_SPACINGS * middle.node_spacing(i) * nu)
            .collect()
    };
    let src = Sources::SingleLayer {
        nodes: middle.nodes(),
        weights: middle.weights(),
    };
    let coarse = assemble(op, src, &offsets(1.0))?;
    let src = Sources::SingleLayer {
        nodes: middle.nodes(),
        weights: middle.weights(),
    };
    let fine = assemble(op, src, &offsets(0.5))?;
    let self_trace = fine * 2.0 - coarse;

    let (density, report) =
        RegularizedSystem::new(self_trace, DVector::from_column_slice(&g.values), reg)?.solve()?;

    // Transfer to the data boundary: regular single-layer evaluation.
    let cross = assemble(
        op,
        Sources::SingleLayer {
            nodes: middle.nodes(),
            weights: middle.weights(),
        },
        layout.inner.nodes(),
    )?;
    let transferred = cross * &density;
    let transferred = LayerDensity::from_values(&layout.inner, k, transferred.as_slice().to_vec())?;

    let pv = cauchy_datum_pv(op, data)?;
    let datum = LayerDensity::linear_combination(1.0, &pv.trace, -1.0, &transferred)?;
    Ok((datum, report))
}

/// Two-trace reconstruction on the annulus between the data boundary and
/// the middle boundary. The reduction chooses how the continuation datum
/// is produced; the result evaluates on the open annulus, with the band
/// around the data boundary flagged.
pub fn solve_cauchy(
    op: &OperatorSpec,
    layout: &DomainLayout,
    data: &CauchyData,
    reduction: Reduction,
    method: SolverMethod,
    reg: RegConfig,
) -> Result<ExtensionSolution, ProblemError> {
    reject_growing_branch(op)?;
    if !Arc::ptr_eq(data.boundary(), &layout.inner) {
        return Err(ProblemError::DatumBoundaryMismatch);
    }
    let mut warnings = Vec::new();
    let (continuation, include_trace_term) = match reduction {
        Reduction::Probe => {
            let probe = match &layout.interior_probe {
                Some(p) => p.clone(),
                None => layout.inner.scaled_copy(DEFAULT_PROBE_SCALE)?,
            };
            let datum = cauchy_datum_on_probe(op, data, &probe)?;
            let probe_layout = DomainLayout::new(
                probe,
                layout.middle.clone(),
                layout.outer.clone(),
                None,
            )?;
            (
                continue_solution(op, &probe_layout, &datum, method, reg)?,
                true,
            )
        }
        Reduction::Pv => {
            let datum = cauchy_datum_pv(op, data)?;
            if datum.flagged {
                warnings.push(format!(
                    "on-surface datum extrapolation disagreement {:.2e}",
                    datum.disagreement
                ));
            }
            (
                continue_solution(op, layout, &datum.trace, method, reg)?,
                true,
            )
        }
        Reduction::Hat => {
            let (datum, inner_report) = cauchy_datum_hat(op, layout, data, reg)?;
            if inner_report.condition_estimate > 1e12 {
                warnings.push(format!(
                    "trace-transfer inversion condition {:.2e}",
                    inner_report.condition_estimate
                ));
            }
            (continue_solution(op, layout, &datum, method, reg)?, false)
        }
    };
    let report = continuation.report;
    warnings.extend(continuation.warnings.clone());
    let outer_validity = layout
        .middle
        .clone()
        .or_else(|| layout.outer.clone());
    Ok(ExtensionSolution {
        op: *op,
        representation: Representation::AnnulusReconstruction {
            continuation: Box::new(continuation),
            data: data.clone(),
            include_trace_term,
        },
        validity: Validity {
            outer: outer_validity,
            inner_excluded: Some(layout.inner.clone()),
        },
        report,
        warnings,
    })
}

/// Classical Dirichlet problem by the extension approach: solve the inner
/// Dirichlet problem against a virtual embracing boundary and restrict
/// the evaluation domain to the original one.
pub fn dirichlet_by_extension(
    op: &OperatorSpec,
    inner: &Arc<Boundary>,
    virtual_boundary: &Arc<Boundary>,
    w0: &LayerDensity,
    method: SolverMethod,
    reg: RegConfig,
) -> Result<ExtensionSolution, ProblemError> {
    let layout = match method {
        SolverMethod::Mfs { .. } => DomainLayout::new(
            inner.clone(),
            None,
            Some(virtual_boundary.clone()),
            None,
        )?,
        SolverMethod::SingleLayer => DomainLayout::new(
            inner.clone(),
            Some(virtual_boundary.clone()),
            None,
            None,
        )?,
    };
    let solution = continue_solution(op, &layout, w0, method, reg)?;
    Ok(ExtensionSolution {
        validity: Validity {
            outer: Some(inner.clone()),
            inner_excluded: None,
        },
        ..solution
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::manufactured::ManufacturedSolution;
    use crate::reglinalg::RegMethod;

    fn circle(r: f64, n: usize) -> Arc<Boundary> {
        Boundary::build(
            Shape::Circle {
                center: Point::zeros(),
                radius: r,
            },
            n,
        )
        .unwrap()
    }

    fn sphere(r: f64, n: usize) -> Arc<Boundary> {
        Boundary::build(
            Shape::Sphere {
                center: Point::zeros(),
                radius: r,
            },
            n,
        )
        .unwrap()
    }

    fn tsvd(threshold: f64) -> RegConfig {
        RegConfig::tsvd(threshold)
    }

    #[test]
    fn zero_datum_gives_zero_solution() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 32);
        let outer = circle(3.0, 32);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let f = LayerDensity::zeros(&inner, 1);
        let sol =
            solve_inner_dirichlet_mfs(&op, &layout, &f, 32, RegConfig::tikhonov(1e-10)).unwrap();
        let field = sol.evaluate(&[Point::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(field.max_abs(), 0.0);
        assert_eq!(sol.report.solution_norm, 0.0);
    }

    #[test]
    fn mfs_reproduces_manufactured_field() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let outer = circle(3.0, 64);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let f = ms.dirichlet_trace(&inner).unwrap();
        let sol = solve_inner_dirichlet_mfs(&op, &layout, &f, 64, tsvd(1e-13)).unwrap();
        assert!(
            sol.boundary_residual(&f).unwrap() < 1e-10,
            "boundary residual {}",
            sol.boundary_residual(&f).unwrap()
        );
        let probe: Vec<Point> = (0..32)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 32.0;
                Point::new(2.0 * t.cos(), 2.0 * t.sin(), 0.0)
            })
            .collect();
        let field = sol.evaluate(&probe).unwrap();
        let err = ms.relative_l2_error(&probe, &field.values).unwrap();
        assert!(err < 1e-6, "field error {err}");
    }

    #[test]
    fn mfs_error_decreases_with_sources() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let outer = circle(3.0, 64);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let f = ms.dirichlet_trace(&inner).unwrap();
        let probe = [Point::new(2.0, 0.0, 0.0), Point::new(0.0, 2.0, 0.0)];
        let mut prev = f64::INFINITY;
        for n in [8usize, 16, 32, 64] {
            let sol = solve_inner_dirichlet_mfs(&op, &layout, &f, n, tsvd(1e-13)).unwrap();
            let field = sol.evaluate(&probe).unwrap();
            let err = ms.relative_l2_error(&probe, &field.values).unwrap();
            assert!(err < prev, "error not decreasing at N={n}: {err} vs {prev}");
            prev = err;
        }
    }

    #[test]
    fn single_layer_solver_matches_manufactured_field() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 128);
        let middle = circle(2.0, 128);
        let layout = DomainLayout::new(inner.clone(), Some(middle), None, None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let f = ms.dirichlet_trace(&inner).unwrap();
        let sol = solve_inner_dirichlet_single_layer(&op, &layout, &f, tsvd(1e-12)).unwrap();
        assert!(sol.boundary_residual(&f).unwrap() < 1e-8);
        let probe: Vec<Point> = (0..16)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 16.0;
                Point::new(1.5 * t.cos(), 1.5 * t.sin(), 0.0)
            })
            .collect();
        let field = sol.evaluate(&probe).unwrap();
        let err = ms.relative_l2_error(&probe, &field.values).unwrap();
        assert!(err < 1e-4, "field error {err}");
    }

    #[test]
    fn methods_agree_on_continuation() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let middle = circle(2.0, 128);
        let outer = circle(3.0, 64);
        let layout =
            DomainLayout::new(inner.clone(), Some(middle), Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let trace = ms.dirichlet_trace(&inner).unwrap();
        let probe = [Point::new(1.8, 0.3, 0.0), Point::new(-1.2, 0.9, 0.0)];
        let a = continue_solution(
            &op,
            &layout,
            &trace,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-13),
        )
        .unwrap();
        let b = continue_solution(&op, &layout, &trace, SolverMethod::SingleLayer, tsvd(1e-12))
            .unwrap();
        let fa = a.evaluate(&probe).unwrap();
        let fb = b.evaluate(&probe).unwrap();
        let ea = ms.relative_l2_error(&probe, &fa.values).unwrap();
        let eb = ms.relative_l2_error(&probe, &fb.values).unwrap();
        for p in 0..probe.len() {
            let diff = (fa.value(p)[0] - fb.value(p)[0]).abs();
            let budget = (ea + eb) * ms.value(probe[p]).unwrap()[0].abs().max(1e-3) * 10.0;
            assert!(diff <= budget.max(1e-9), "methods disagree: {diff} > {budget}");
        }
        // Continuation agrees with the exact solution away from the data
        // boundary, not only on it.
        assert!(ea < 1e-6, "mfs continuation error {ea}");
        assert!(eb < 1e-4, "single-layer continuation error {eb}");
    }

    #[test]
    fn probe_datum_matches_solution_trace() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 256);
        let probe = circle(0.5, 64);
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let data = CauchyData::new(
            ms.dirichlet_trace(&inner).unwrap(),
            ms.conormal_trace(&inner).unwrap(),
        )
        .unwrap();
        let datum = cauchy_datum_on_probe(&op, &data, &probe).unwrap();
        let exact = ms.dirichlet_trace(&probe).unwrap();
        let err = datum.relative_l2_error(&exact).unwrap();
        assert!(err < 1e-9, "probe datum error {err}");
        // Linearity in the data pair.
        let doubled = CauchyData::new(
            LayerDensity::linear_combination(2.0, data.dirichlet(), 0.0, data.dirichlet()).unwrap(),
            LayerDensity::linear_combination(2.0, data.conormal(), 0.0, data.conormal()).unwrap(),
        )
        .unwrap();
        let datum2 = cauchy_datum_on_probe(&op, &doubled, &probe).unwrap();
        for q in 0..probe.n_nodes() {
            assert!((datum2.node(q)[0] - 2.0 * datum.node(q)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn pv_datum_matches_solution_trace() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 256);
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let data = CauchyData::new(
            ms.dirichlet_trace(&inner).unwrap(),
            ms.conormal_trace(&inner).unwrap(),
        )
        .unwrap();
        let datum = cauchy_datum_pv(&op, &data).unwrap();
        let exact = ms.dirichlet_trace(&inner).unwrap();
        let err = datum.trace.relative_l2_error(&exact).unwrap();
        assert!(err < 5e-3, "pv datum error {err}");
    }

    #[test]
    fn zero_cauchy_data_gives_zero_reconstruction() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let middle = circle(2.0, 64);
        let outer = circle(4.0, 64);
        let layout = DomainLayout::new(inner.clone(), Some(middle), Some(outer), None).unwrap();
        let data = CauchyData::new(
            LayerDensity::zeros(&inner, 1),
            LayerDensity::zeros(&inner, 1),
        )
        .unwrap();
        let sol = solve_cauchy(
            &op,
            &layout,
            &data,
            Reduction::Probe,
            SolverMethod::Mfs { n_sources: 32 },
            RegConfig::tikhonov(1e-10),
        )
        .unwrap();
        let field = sol.evaluate(&[Point::new(1.5, 0.0, 0.0)]).unwrap();
        assert_eq!(field.max_abs(), 0.0);
    }

    #[test]
    fn cauchy_probe_reconstruction_matches_oracle() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 256);
        let middle = circle(2.0, 128);
        let outer = circle(4.0, 64);
        let layout = DomainLayout::new(inner.clone(), Some(middle), Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let data = CauchyData::new(
            ms.dirichlet_trace(&inner).unwrap(),
            ms.conormal_trace(&inner).unwrap(),
        )
        .unwrap();
        let sol = solve_cauchy(
            &op,
            &layout,
            &data,
            Reduction::Probe,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-13),
        )
        .unwrap();
        let target = Point::new(1.5, 0.0, 0.0);
        let field = sol.evaluate(&[target]).unwrap();
        let exact = ms.value(target).unwrap()[0];
        assert!(
            (field.value(0)[0] - exact).abs() < 1e-4,
            "reconstruction error {}",
            (field.value(0)[0] - exact).abs()
        );
        // Evaluation inside the data boundary must be refused.
        assert!(matches!(
            sol.evaluate(&[Point::new(0.5, 0.0, 0.0)]),
            Err(ProblemError::OutsideValidity { .. })
        ));
    }

    #[test]
    fn lame_mfs_error_decreases_with_sources() {
        let op = OperatorSpec::lame_3d(1.0, 1.0).unwrap();
        let inner = sphere(1.0, 300);
        let outer = sphere(3.0, 300);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let f = ms.dirichlet_trace(&inner).unwrap();
        let probe: Vec<Point> = sphere(2.0, 48).nodes().to_vec();
        let mut prev = f64::INFINITY;
        for n in [50usize, 100, 200] {
            let sol = solve_inner_dirichlet_mfs(&op, &layout, &f, n, tsvd(1e-13)).unwrap();
            let field = sol.evaluate(&probe).unwrap();
            let err = ms.relative_l2_error(&probe, &field.values).unwrap();
            assert!(err < prev, "error not decreasing at N={n}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 1e-3, "final error {prev}");
    }

    #[test]
    fn helmholtz_single_layer_on_spheres() {
        let op = OperatorSpec::helmholtz_3d(1.0, HelmholtzBranch::Decaying).unwrap();
        let inner = sphere(1.0, 500);
        let middle = sphere(2.0, 500);
        let layout = DomainLayout::new(inner.clone(), Some(middle), None, None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let f = ms.dirichlet_trace(&inner).unwrap();
        let sol = solve_inner_dirichlet_single_layer(&op, &layout, &f, tsvd(1e-10)).unwrap();
        let probe: Vec<Point> = sphere(1.5, 48).nodes().to_vec();
        let field = sol.evaluate(&probe).unwrap();
        let err = ms.relative_l2_error(&probe, &field.values).unwrap();
        assert!(err < 1e-3, "field error {err}");
    }

    #[test]
    fn cauchy_reductions_agree() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 256);
        let middle = circle(2.0, 256);
        let outer = circle(4.0, 64);
        let layout = DomainLayout::new(inner.clone(), Some(middle), Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let data = CauchyData::new(
            ms.dirichlet_trace(&inner).unwrap(),
            ms.conormal_trace(&inner).unwrap(),
        )
        .unwrap();
        let target = Point::new(1.5, 0.0, 0.0);
        let method = SolverMethod::Mfs { n_sources: 64 };
        let probe_sol =
            solve_cauchy(&op, &layout, &data, Reduction::Probe, method, tsvd(1e-13)).unwrap();
        let reference = probe_sol.evaluate(&[target]).unwrap().value(0)[0];
        for reduction in [Reduction::Pv, Reduction::Hat] {
            let sol = solve_cauchy(&op, &layout, &data, reduction, method, tsvd(1e-6)).unwrap();
            let v = sol.evaluate(&[target]).unwrap().value(0)[0];
            assert!(
                (v - reference).abs() < 1e-2,
                "{reduction:?} route disagrees with probe: {v} vs {reference}"
            );
        }
    }

    #[test]
    fn hat_datum_reproduces_outer_trace() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 256);
        let middle = circle(2.0, 256);
        let outer = circle(4.0, 64);
        let layout =
            DomainLayout::new(inner.clone(), Some(middle.clone()), Some(outer), None).unwrap();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let data = CauchyData::new(
            ms.dirichlet_trace(&inner).unwrap(),
            ms.conormal_trace(&inner).unwrap(),
        )
        .unwrap();
        let (datum, _report) = cauchy_datum_hat(&op, &layout, &data, tsvd(1e-10)).unwrap();
        // Solving the inner Dirichlet problem with the transferred datum
        // must reproduce the exact trace on the middle boundary.
        let sol = continue_solution(
            &op,
            &layout,
            &datum,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-6),
        )
        .unwrap();
        let trace_pts = middle.nodes();
        let field = sol.evaluate(trace_pts);
        // Points on the validity shell itself: evaluate without the guard.
        let field = match field {
            Ok(f) => f,
            Err(_) => sol.evaluate_unchecked(trace_pts).unwrap(),
        };
        let exact = ms.dirichlet_trace(&middle).unwrap();
        let got = LayerDensity::from_values(&middle, 1, field.values).unwrap();
        let err = got.relative_l2_error(&exact).unwrap();
        assert!(err < 1e-2, "outer trace error {err}");
    }

    #[test]
    fn cauchy_reconstruction_converges_under_refinement() {
        let op = OperatorSpec::laplace_2d();
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let target = Point::new(1.5, 0.0, 0.0);
        let exact = ms.value(target).unwrap()[0];
        // The error floors near 7.5e-10 beyond the finest level here.
        let mut prev = f64::INFINITY;
        for (nodes, n_sources) in [(32usize, 8usize), (64, 16), (128, 32)] {
            let inner = circle(1.0, nodes);
            let middle = circle(2.0, nodes);
            let outer = circle(4.0, 64);
            let layout =
                DomainLayout::new(inner.clone(), Some(middle), Some(outer), None).unwrap();
            let data = CauchyData::new(
                ms.dirichlet_trace(&inner).unwrap(),
                ms.conormal_trace(&inner).unwrap(),
            )
            .unwrap();
            let sol = solve_cauchy(
                &op,
                &layout,
                &data,
                Reduction::Probe,
                SolverMethod::Mfs { n_sources },
                tsvd(1e-13),
            )
            .unwrap();
            let err = (sol.evaluate(&[target]).unwrap().value(0)[0] - exact).abs();
            assert!(
                err < prev,
                "error not decreasing at {nodes} nodes / {n_sources} sources: {err} vs {prev}"
            );
            prev = err;
        }
        assert!(prev < 1e-4, "finest-level error {prev}");
    }

    #[test]
    fn growing_branch_rejected_by_solvers() {
        let op = OperatorSpec::helmholtz_3d(1.0, HelmholtzBranch::Growing).unwrap();
        let inner = sphere(1.0, 64);
        let outer = sphere(3.0, 64);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let f = LayerDensity::zeros(&inner, 1);
        assert!(matches!(
            solve_inner_dirichlet_mfs(&op, &layout, &f, 16, RegConfig::default()),
            Err(ProblemError::UnsupportedBranch)
        ));
    }

    #[test]
    fn extension_solution_restricted_to_inner_domain() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let virt = circle(3.0, 64);
        let ms = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let w0 = ms.dirichlet_trace(&inner).unwrap();
        let sol = dirichlet_by_extension(
            &op,
            &inner,
            &virt,
            &w0,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-13),
        )
        .unwrap();
        let inside = Point::new(0.5, 0.3, 0.0);
        let field = sol.evaluate(&[inside]).unwrap();
        let err = (field.value(0)[0] - ms.value(inside).unwrap()[0]).abs();
        assert!(err < 1e-8, "interior error {err}");
        // Points outside the original domain are refused even though the
        // representation extends further.
        assert!(sol.evaluate(&[Point::new(2.0, 0.0, 0.0)]).is_err());
    }

    /// Separation-of-variables oracle: the harmonic extension of cos(m t)
    /// from the unit circle is r^m cos(m t).
    #[test]
    fn extension_matches_harmonic_modes() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let virt = circle(3.0, 64);
        let w0_cos1 = LayerDensity::from_fn(&inner, 1, |p| [p.y.atan2(p.x).cos(), 0.0, 0.0]);
        let sol = dirichlet_by_extension(
            &op,
            &inner,
            &virt,
            &w0_cos1,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-13),
        )
        .unwrap();
        let x = Point::new(0.5, 0.3, 0.0);
        let got = sol.evaluate(&[x]).unwrap().value(0)[0];
        // r cos t = x.
        assert!((got - 0.5).abs() < 1e-8, "mode-1 error {}", (got - 0.5).abs());

        let w0_cos3 = LayerDensity::from_fn(&inner, 1, |p| [(3.0 * p.y.atan2(p.x)).cos(), 0.0, 0.0]);
        let sol = dirichlet_by_extension(
            &op,
            &inner,
            &virt,
            &w0_cos3,
            SolverMethod::Mfs { n_sources: 64 },
            tsvd(1e-13),
        )
        .unwrap();
        for x in [Point::new(0.5, 0.3, 0.0), Point::new(-0.2, 0.6, 0.0)] {
            let got = sol.evaluate(&[x]).unwrap().value(0)[0];
            // r^3 cos 3t = x^3 - 3 x y^2.
            let exact = x.x.powi(3) - 3.0 * x.x * x.y * x.y;
            assert!((got - exact).abs() < 1e-6, "mode-3 error {}", (got - exact).abs());
        }
    }

    #[test]
    fn superposition_of_solvers() {
        let op = OperatorSpec::laplace_2d();
        let inner = circle(1.0, 64);
        let outer = circle(3.0, 64);
        let layout = DomainLayout::new(inner.clone(), None, Some(outer), None).unwrap();
        let ms1 = ManufacturedSolution::new(op, Point::new(5.0, 0.0, 0.0), 0).unwrap();
        let ms2 = ManufacturedSolution::new(op, Point::new(0.0, -4.0, 0.0), 0).unwrap();
        let f1 = ms1.dirichlet_trace(&inner).unwrap();
        let f2 = ms2.dirichlet_trace(&inner).unwrap();
        let sum = LayerDensity::linear_combination(1.0, &f1, 1.0, &f2).unwrap();
        let reg = RegConfig {
            method: RegMethod::Tikhonov { alpha: 1e-12 },
            selection: crate::reglinalg::AlphaSelection::Fixed,
        };
        let probe = [Point::new(1.9, 0.4, 0.0)];
        let s1 = solve_inner_dirichlet_mfs(&op, &layout, &f1, 48, reg).unwrap();
        let s2 = solve_inner_dirichlet_mfs(&op, &layout, &f2, 48, reg).unwrap();
        let ss = solve_inner_dirichlet_mfs(&op, &layout, &sum, 48, reg).unwrap();
        let v1 = s1.evaluate(&probe).unwrap().value(0)[0];
        let v2 = s2.evaluate(&probe).unwrap().value(0)[0];
        let vs = ss.evaluate(&probe).unwrap().value(0)[0];
        assert!(
            (vs - (v1 + v2)).abs() <= 1e-8 * (v1 + v2).abs().max(1.0),
            "superposition violated: {vs} vs {}",
            v1 + v2
        );
    }
}
