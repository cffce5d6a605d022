//! Dense collocation assembly and SVD-based regularized solves.
//!
//! Collocation matrices couple stacked k-vector source coefficients to
//! stacked target values through kernel blocks: point sources (fundamental
//! solution columns) or quadrature-weighted single-layer columns. The
//! systems are solved through one full SVD with spectral filtering:
//! Tikhonov filter factors sigma / (sigma^2 + alpha) or hard truncation
//! below a relative threshold. The Morozov discrepancy rule selects alpha
//! by bisection on the closed-form residual.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::Point;
use crate::kernels::{phi, KernelError, OperatorSpec};

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("coincident source/target pair: target {target_index}, source {source_index}")]
    CoincidentPair {
        target_index: usize,
        source_index: usize,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("matrix is identically zero")]
    ZeroMatrix,
    #[error("dimension mismatch: matrix is {rows}x{cols}, rhs has {rhs}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
    #[error("invalid regularization config: {0}")]
    InvalidConfig(String),
}

/// Column sources of a collocation matrix.
pub enum Sources<'a> {
    /// Point sources: column block j is Phi(x_i, z_j).
    Mfs(&'a [Point]),
    /// Quadrature sources: column block q is w_q Phi(x_i, y_q).
    SingleLayer {
        nodes: &'a [Point],
        weights: &'a [f64],
    },
}

/// Builds the dense (k M) x (k N) collocation matrix.
pub fn assemble(
    op: &OperatorSpec,
    sources: Sources,
    targets: &[Point],
) -> Result<DMatrix<f64>, LinAlgError> {
    let k = op.component_count();
    let (points, weights): (&[Point], Option<&[f64]>) = match sources {
        Sources::Mfs(p) => (p, None),
        Sources::SingleLayer { nodes, weights } => (nodes, Some(weights)),
    };
    let mut m = DMatrix::zeros(k * targets.len(), k * points.len());
    for (i, x) in targets.iter().enumerate() {
        for (j, z) in points.iter().enumerate() {
            let block = phi(op, *x, *z).map_err(|e| match e {
                KernelError::CoincidentPoints { .. } => LinAlgError::CoincidentPair {
                    target_index: i,
                    source_index: j,
                },
                other => LinAlgError::Kernel(other),
            })?;
            let w = weights.map_or(1.0, |w| w[j]);
            for r in 0..k {
                for c in 0..k {
                    m[(k * i + r, k * j + c)] = w * block.get(r, c);
                }
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegMethod {
    /// Tikhonov with a fixed absolute alpha >= 0.
    Tikhonov { alpha: f64 },
    /// Tikhonov with alpha = alpha_rel * sigma_max^2.
    TikhonovScaled { alpha_rel: f64 },
    /// Truncated SVD: drop singular values below threshold * sigma_max,
    /// threshold in (0, 1).
    Tsvd { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSelection {
    Fixed,
    /// Morozov discrepancy rule targeting residual = noise_level * |b|.
    Discrepancy { noise_level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegConfig {
    pub method: RegMethod,
    pub selection: AlphaSelection,
}

impl Default for RegConfig {
    /// Keeps solutions bounded without biasing noiseless convergence.
    fn default() -> Self {
        RegConfig {
            method: RegMethod::TikhonovScaled { alpha_rel: 1e-12 },
            selection: AlphaSelection::Fixed,
        }
    }
}

impl RegConfig {
    pub fn tikhonov(alpha: f64) -> Self {
        RegConfig {
            method: RegMethod::Tikhonov { alpha },
            selection: AlphaSelection::Fixed,
        }
    }

    pub fn tsvd(threshold: f64) -> Self {
        RegConfig {
            method: RegMethod::Tsvd { threshold },
            selection: AlphaSelection::Fixed,
        }
    }

    fn validate(&self) -> Result<(), LinAlgError> {
        match self.method {
            RegMethod::Tikhonov { alpha } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(LinAlgError::InvalidConfig(format!(
                        "alpha must be nonnegative, got {alpha}"
                    )));
                }
            }
            RegMethod::TikhonovScaled { alpha_rel } => {
                if !(alpha_rel >= 0.0 && alpha_rel.is_finite()) {
                    return Err(LinAlgError::InvalidConfig(format!(
                        "alpha_rel must be nonnegative, got {alpha_rel}"
                    )));
                }
            }
            RegMethod::Tsvd { threshold } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(LinAlgError::InvalidConfig(format!(
                        "tsvd threshold must lie in (0, 1), got {threshold}"
                    )));
                }
            }
        }
        if let AlphaSelection::Discrepancy { noise_level } = self.selection {
            if !(noise_level > 0.0) {
                return Err(LinAlgError::InvalidConfig(format!(
                    "discrepancy noise level must be positive, got {noise_level}"
                )));
            }
            if matches!(self.method, RegMethod::Tsvd { .. }) {
                return Err(LinAlgError::InvalidConfig(
                    "discrepancy selection applies to Tikhonov only".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Diagnostics of a regularized solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub residual_norm: f64,
    pub solution_norm: f64,
    /// sigma_max / sigma_min of the full matrix.
    pub condition_estimate: f64,
    /// Number of singular components passing the filter at least half-way.
    pub effective_rank: usize,
    pub alpha_used: f64,
    /// Discrepancy selection failed to bracket and fell back.
    pub discrepancy_fallback: bool,
}

impl SolveReport {
    pub fn zero_system() -> Self {
        SolveReport {
            residual_norm: 0.0,
            solution_norm: 0.0,
            condition_estimate: 0.0,
            effective_rank: 0,
            alpha_used: 0.0,
            discrepancy_fallback: false,
        }
    }
}

/// Dense system plus its regularization configuration.
#[derive(Debug, Clone)]
pub struct RegularizedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub reg: RegConfig,
}

impl RegularizedSystem {
    pub fn new(
        matrix: DMatrix<f64>,
        rhs: DVector<f64>,
        reg: RegConfig,
    ) -> Result<Self, LinAlgError> {
        if matrix.nrows() != rhs.len() {
            return Err(LinAlgError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                rhs: rhs.len(),
            });
        }
        reg.validate()?;
        Ok(RegularizedSystem { matrix, rhs, reg })
    }

    /// Regularized least-squares solve. Deterministic given the inputs.
    pub fn solve(&self) -> Result<(DVector<f64>, SolveReport), LinAlgError> {
        let spectrum = Spectrum::decompose(&self.matrix)?;
        let sigma_max = spectrum.sigma_max();

        let mut fallback = false;
        let alpha = match (self.reg.method, self.reg.selection) {
            (RegMethod::Tsvd { .. }, _) => 0.0,
            (method, AlphaSelection::Fixed) => match method {
                RegMethod::Tikhonov { alpha } => alpha,
                RegMethod::TikhonovScaled { alpha_rel } => alpha_rel * sigma_max * sigma_max,
                RegMethod::Tsvd { .. } => unreachable!(),
            },
            (_, AlphaSelection::Discrepancy { noise_level }) => {
                let (a, fell_back) = spectrum.discrepancy_alpha(&self.rhs, noise_level);
                fallback = fell_back;
                if fell_back {
                    // Fall back to the configured fixed alpha if any.
                    match self.reg.method {
                        RegMethod::Tikhonov { alpha } if alpha > 0.0 => alpha,
                        RegMethod::TikhonovScaled { alpha_rel } if alpha_rel > 0.0 => {
                            alpha_rel * sigma_max * sigma_max
                        }
                        _ => a,
                    }
                } else {
                    a
                }
            }
        };

        let x = match self.reg.method {
            RegMethod::Tsvd { threshold } => spectrum.solve_tsvd(&self.rhs, threshold),
            _ => spectrum.solve_tikhonov(&self.rhs, alpha),
        };

        let residual = (&self.matrix * &x - &self.rhs).norm();
        let effective_rank = match self.reg.method {
            RegMethod::Tsvd { threshold } => spectrum.rank_above(threshold * sigma_max),
            _ => {
                if alpha > 0.0 {
                    spectrum.rank_above(alpha.sqrt())
                } else {
                    spectrum.numerical_rank()
                }
            }
        };
        let report = SolveReport {
            residual_norm: residual,
            solution_norm: x.norm(),
            condition_estimate: spectrum.condition(),
            effective_rank,
            alpha_used: alpha,
            discrepancy_fallback: fallback,
        };
        Ok((x, report))
    }
}

/// Morozov bisection on the closed-form Tikhonov residual; returns the
/// alpha and whether the target could not be bracketed from below.
pub fn pick_alpha_discrepancy(
    sys: &RegularizedSystem,
    noise_level: f64,
) -> Result<(f64, bool), LinAlgError> {
    if !(noise_level > 0.0) {
        return Err(LinAlgError::InvalidConfig(format!(
            "noise level must be positive, got {noise_level}"
        )));
    }
    let spectrum = Spectrum::decompose(&sys.matrix)?;
    Ok(spectrum.discrepancy_alpha(&sys.rhs, noise_level))
}

/// sigma_max / sigma_min from the full SVD.
pub fn condition_estimate(matrix: &DMatrix<f64>) -> f64 {
    match Spectrum::decompose(matrix) {
        Ok(s) => s.condition(),
        Err(_) => f64::NAN,
    }
}

/// Full SVD with the pieces needed for filtered solves.
struct Spectrum {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    sigma: DVector<f64>,
    m: usize,
    n: usize,
}

impl Spectrum {
    fn decompose(matrix: &DMatrix<f64>) -> Result<Self, LinAlgError> {
        if matrix.iter().all(|v| *v == 0.0) {
            return Err(LinAlgError::ZeroMatrix);
        }
        let (m, n) = matrix.shape();
        let svd = matrix.clone().svd(true, true);
        Ok(Spectrum {
            u: svd.u.expect("U requested"),
            v_t: svd.v_t.expect("V^T requested"),
            sigma: svd.singular_values,
            m,
            n,
        })
    }

    fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    fn condition(&self) -> f64 {
        let max = self.sigma_max();
        let min = self.sigma.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    fn rank_above(&self, cut: f64) -> usize {
        self.sigma.iter().filter(|s| **s >= cut).count()
    }

    fn numerical_rank(&self) -> usize {
        let cut = self.sigma_max() * f64::EPSILON * self.m.max(self.n) as f64;
        self.sigma.iter().filter(|s| **s > cut).count()
    }

    /// Coefficients of the rhs in the left singular basis, plus the norm
    /// of the component outside the range of U.
    fn project(&self, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let coeffs = self.u.transpose() * b;
        let in_range = &self.u * &coeffs;
        let out_norm = (b - in_range).norm();
        (coeffs, out_norm)
    }

    fn solve_tikhonov(&self, b: &DVector<f64>, alpha: f64) -> DVector<f64> {
        let (coeffs, _) = self.project(b);
        let rank_cut = self.sigma_max() * f64::EPSILON * self.m.max(self.n) as f64;
        let mut y = DVector::zeros(self.sigma.len());
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            y[i] = if alpha > 0.0 {
                s / (s * s + alpha) * coeffs[i]
            } else if s > rank_cut {
                coeffs[i] / s
            } else {
                0.0
            };
        }
        self.v_t.transpose() * y
    }

    fn solve_tsvd(&self, b: &DVector<f64>, threshold: f64) -> DVector<f64> {
        let cut = threshold * self.sigma_max();
        let (coeffs, _) = self.project(b);
        let mut y = DVector::zeros(self.sigma.len());
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            y[i] = if s >= cut { coeffs[i] / s } else { 0.0 };
        }
        self.v_t.transpose() * y
    }

    /// Closed-form Tikhonov residual norm as a function of alpha.
    fn residual_at(&self, coeffs: &DVector<f64>, out_norm: f64, alpha: f64) -> f64 {
        let mut s2 = out_norm * out_norm;
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            let fac = alpha / (s * s + alpha);
            s2 += (fac * coeffs[i]).powi(2);
        }
        s2.sqrt()
    }

    fn discrepancy_alpha(&self, b: &DVector<f64>, noise_level: f64) -> (f64, bool) {
        let (coeffs, out_norm) = self.project(b);
        let target = noise_level * b.norm();
        let smax = self.sigma_max();
        let lo0 = 1e-16 * smax * smax;
        let hi0 = 1e4 * smax * smax;
        // Residual is nondecreasing in alpha.
        if self.residual_at(&coeffs, out_norm, hi0) <= target {
            // Over-regularized limit reaches the target: any large alpha works.
            return (hi0, false);
        }
        if self.residual_at(&coeffs, out_norm, lo0) > target {
            // Cannot reach down to the target residual.
            return (lo0, true);
        }
        let (mut lo, mut hi) = (lo0.ln(), hi0.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = self.residual_at(&coeffs, out_norm, mid.exp());
            if (r - target).abs() <= 0.05 * target {
                return (mid.exp(), false);
            }
            if r > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (0.5f64.mul_add(lo, 0.5 * hi).exp(), false)
    }
}
