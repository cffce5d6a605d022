//! Fundamental solutions and their conormal-derivative kernels.
//!
//! For each supported operator L the kernel Phi(x, y) = Phi(x - y)
//! satisfies L Phi(., y) = delta_y * I componentwise:
//!
//! * Laplace 2D, L = -Delta:      Phi(z) = -ln|z| / (2 pi)
//! * Laplace 3D, L = -Delta:      Phi(z) = 1 / (4 pi |z|)
//! * Helmholtz 3D, L = a^2-Delta: Phi(z) = exp(-a|z|) / (4 pi |z|) (decaying)
//! * Lame 3D, L = -mu Delta - (mu+lambda) grad div:
//!     Phi_ij(z) = [ (lambda+3mu) d_ij / |z| + (lambda+mu) z_i z_j / |z|^3 ]
//!                 / (8 pi mu (lambda+2mu))
//!
//! The 2D logarithmic kernel is normalized so that -Delta Phi = delta;
//! this fixes the sign of every representation formula downstream (the
//! frequently-quoted +ln|z|/2pi satisfies Delta Phi = delta instead).
//!
//! The boundary operator pair is B0 = identity and B1 the conormal
//! derivative: d/dnu for Laplace and Helmholtz, and
//! B1 u = mu du/dnu + (mu+lambda) nu div u for the Lame system.
//! [`conormal_kernel_x`] applies B1 in the first argument (no extra sign);
//! [`conormal_kernel_y`] is the double-layer kernel, i.e. minus the
//! transpose of B1 applied in the second argument.

use thiserror::Error;

use crate::geometry::Point;

/// Default coincidence guard: points closer than this factor times the
/// local scale are rejected as singular.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("coincident evaluation points: |x - y| = {dist:.3e} at x = ({x:?}), y = ({y:?})")]
    CoincidentPoints { dist: f64, x: [f64; 3], y: [f64; 3] },
    #[error("invalid operator parameter: {0}")]
    InvalidParameter(String),
}

/// Sign of the exponent in the 3D Helmholtz kernel exp(-+ a r) / (4 pi r).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmholtzBranch {
    /// exp(-a r): the branch with decay at infinity; supported by solvers.
    Decaying,
    /// exp(+a r): evaluable, but rejected by the solvers.
    Growing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Laplace2d,
    Laplace3d,
    Helmholtz3d,
    Lame3d,
}

/// An elliptic operator together with its parameters.
#[derive(Debug, Clone, Copy)]
pub struct OperatorSpec {
    kind: OperatorKind,
    wavenumber: f64,
    branch: HelmholtzBranch,
    mu: f64,
    lambda: f64,
    singular_tol: f64,
}

impl OperatorSpec {
    pub fn laplace_2d() -> Self {
        Self::base(OperatorKind::Laplace2d)
    }

    pub fn laplace_3d() -> Self {
        Self::base(OperatorKind::Laplace3d)
    }

    /// Helmholtz operator |a|^2 - Delta in R^3 with |a| = `wavenumber` > 0.
    pub fn helmholtz_3d(wavenumber: f64, branch: HelmholtzBranch) -> Result<Self, KernelError> {
        if !(wavenumber > 0.0 && wavenumber.is_finite()) {
            return Err(KernelError::InvalidParameter(format!(
                "Helmholtz wavenumber must be positive, got {wavenumber}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::Helmholtz3d,
            wavenumber,
            branch,
            ..Self::base(OperatorKind::Helmholtz3d)
        })
    }

    /// Lame system -mu Delta - (mu+lambda) grad div with mu > 0, 2mu+lambda > 0.
    pub fn lame_3d(mu: f64, lambda: f64) -> Result<Self, KernelError> {
        if !(mu > 0.0 && mu.is_finite() && lambda.is_finite() && 2.0 * mu + lambda > 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "Lame constants need mu > 0 and 2 mu + lambda > 0, got mu={mu} lambda={lambda}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::Lame3d,
            mu,
            lambda,
            ..Self::base(OperatorKind::Lame3d)
        })
    }

    fn base(kind: OperatorKind) -> Self {
        OperatorSpec {
            kind,
            wavenumber: 0.0,
            branch: HelmholtzBranch::Decaying,
            mu: 0.0,
            lambda: 0.0,
            singular_tol: DEFAULT_SINGULAR_TOL,
        }
    }

    /// Overrides the relative coincidence guard.
    pub fn with_singular_tol(mut self, tol: f64) -> Self {
        self.singular_tol = tol;
        self
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Number of solution components k (1 for scalar operators, 3 for Lame).
    pub fn component_count(&self) -> usize {
        match self.kind {
            OperatorKind::Lame3d => 3,
            _ => 1,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            OperatorKind::Laplace2d => 2,
            _ => 3,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn branch(&self) -> HelmholtzBranch {
        self.branch
    }

    pub fn lame_constants(&self) -> (f64, f64) {
        (self.mu, self.lambda)
    }

    fn check_separation(&self, x: Point, y: Point) -> Result<f64, KernelError> {
        let dist = (x - y).norm();
        let scale = x.norm().max(y.norm()).max(1.0);
        if dist <= self.singular_tol * scale {
            return Err(KernelError::CoincidentPoints {
                dist,
                x: [x.x, x.y, x.z],
                y: [y.x, y.y, y.z],
            });
        }
        Ok(dist)
    }
}

/// A k x k kernel block. Scalar kernels use k = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    k: usize,
    m: [[f64; 3]; 3],
}

impl KernelValue {
    pub fn scalar(v: f64) -> Self {
        let mut m = [[0.0; 3]; 3];
        m[0][0] = v;
        KernelValue { k: 1, m }
    }

    pub fn matrix3(m: [[f64; 3]; 3]) -> Self {
        KernelValue { k: 3, m }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Block times a k-vector.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.k {
            let mut s = 0.0;
            for j in 0..self.k {
                s += self.m[i][j] * v[j];
            }
            out[i] += s;
        }
    }

    pub fn is_finite(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| self.m[i][j].is_finite()))
    }
}

/// Evaluates Phi(x - y).
pub fn phi(op: &OperatorSpec, x: Point, y: Point) -> Result<KernelValue, KernelError> {
    let r = op.check_separation(x, y)?;
    let z = x - y;
    Ok(match op.kind {
        OperatorKind::Laplace2d => KernelValue::scalar(-r.ln() / (2.0 * std::f64::consts::PI)),
        OperatorKind::Laplace3d => KernelValue::scalar(1.0 / (4.0 * std::f64::consts::PI * r)),
        OperatorKind::Helmholtz3d => {
            let a = op.wavenumber;
            let e = match op.branch {
                HelmholtzBranch::Decaying => (-a * r).exp(),
                HelmholtzBranch::Growing => (a * r).exp(),
            };
            KernelValue::scalar(e / (4.0 * std::f64::consts::PI * r))
        }
        OperatorKind::Lame3d => {
            let (mu, lambda) = (op.mu, op.lambda);
            let c = 1.0 / (8.0 * std::f64::consts::PI * mu * (lambda + 2.0 * mu));
            let alpha = lambda + 3.0 * mu;
            let beta = lambda + mu;
            let r3 = r * r * r;
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = c * beta * z[i] * z[j] / r3;
                    if i == j {
                        v += c * alpha / r;
                    }
                    m[i][j] = v;
                }
            }
            KernelValue::matrix3(m)
        }
    })
}

/// Radial derivative dPhi/dr of the scalar kernels.
fn scalar_radial_derivative(op: &OperatorSpec, r: f64) -> f64 {
    match op.kind {
        OperatorKind::Laplace2d => -1.0 / (2.0 * std::f64::consts::PI * r),
        OperatorKind::Laplace3d => -1.0 / (4.0 * std::f64::consts::PI * r * r),
        OperatorKind::Helmholtz3d => {
            let a = op.wavenumber;
            match op.branch {
                HelmholtzBranch::Decaying => {
                    -(1.0 + a * r) * (-a * r).exp() / (4.0 * std::f64::consts::PI * r * r)
                }
                HelmholtzBranch::Growing => {
                    (a * r - 1.0) * (a * r).exp() / (4.0 * std::f64::consts::PI * r * r)
                }
            }
        }
        OperatorKind::Lame3d => unreachable!("scalar derivative on a matrix kernel"),
    }
}

/// B1 applied in x to the columns of Phi(x - y), evaluated along `nx`.
///
/// For the scalar operators this is the directional derivative of phi
/// along `nx`; for Lame it is the conormal traction-like operator
/// mu d/dnu + (mu+lambda) nu div applied to each column.
pub fn conormal_kernel_x(
    op: &OperatorSpec,
    x: Point,
    nx: Point,
    y: Point,
) -> Result<KernelValue, KernelError> {
    let r = op.check_separation(x, y)?;
    let z = x - y;
    Ok(match op.kind {
        OperatorKind::Lame3d => KernelValue::matrix3(lame_conormal(op, z, r, nx, false)),
        _ => {
            // grad Phi(z) = Phi'(r) z / r.
            let g = scalar_radial_derivative(op, r) / r;
            KernelValue::scalar(g * nx.dot(&z))
        }
    })
}

/// Double-layer kernel: minus the transpose of B1 applied in y to
/// Phi(x - .). For the scalar radial kernels this coincides with
/// [`conormal_kernel_x`] evaluated with the same normal.
pub fn conormal_kernel_y(
    op: &OperatorSpec,
    x: Point,
    y: Point,
    ny: Point,
) -> Result<KernelValue, KernelError> {
    let r = op.check_separation(x, y)?;
    let z = x - y;
    Ok(match op.kind {
        OperatorKind::Lame3d => KernelValue::matrix3(lame_conormal(op, z, r, ny, true)),
        _ => {
            let g = scalar_radial_derivative(op, r) / r;
            KernelValue::scalar(g * ny.dot(&z))
        }
    })
}

/// Conormal kernel of the Kelvin-type matrix.
///
/// With c = 1/(8 pi mu (lambda+2mu)), alpha = lambda+3mu, beta = lambda+mu:
///   [B1,x Phi]_ij = mu c / r^3 [ -alpha d_ij (nu.z) + beta (nu_j z_i - nu_i z_j)
///                                - 3 beta z_i z_j (nu.z) / r^2 ]
/// The y-side double-layer kernel is the transpose of the x-side one
/// (the sign from differentiating in y cancels the leading minus).
fn lame_conormal(op: &OperatorSpec, z: Point, r: f64, nu: Point, transpose: bool) -> [[f64; 3]; 3] {
    let (mu, lambda) = (op.mu, op.lambda);
    let c = 1.0 / (8.0 * std::f64::consts::PI * mu * (lambda + 2.0 * mu));
    let alpha = lambda + 3.0 * mu;
    let beta = lambda + mu;
    let nz = nu.dot(&z);
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = beta * (nu[j] * z[i] - nu[i] * z[j]) / r3 - 3.0 * beta * z[i] * z[j] * nz / r5;
            if i == j {
                v -= alpha * nz / r3;
            }
            v *= mu * c;
            if transpose {
                m[j][i] = v;
            } else {
                m[i][j] = v;
            }
        }
    }
    m
}

/// Central-difference application of L to each column of Phi(., y) at x;
/// returns the largest residual relative to the magnitude of the
/// individual second-difference terms. Decays as O(h^2) for the exact
/// kernels.
pub fn pde_residual(op: &OperatorSpec, y: Point, x: Point, h: f64) -> f64 {
    assert!(
        (x - y).norm() > 10.0 * h,
        "pde_residual requires |x - y| > 10 h"
    );
    let k = op.component_count();
    let dim = op.ambient_dim();
    let col = |p: Point, j: usize| -> [f64; 3] {
        let v = phi(op, p, y).expect("separated points");
        let mut out = [0.0; 3];
        for i in 0..k {
            out[i] = v.get(i, j);
        }
        out
    };
    let e = |d: usize| -> Point {
        let mut v = Point::zeros();
        v[d] = h;
        v
    };

    let mut worst: f64 = 0.0;
    for j in 0..k {
        let center = col(x, j);
        // Pure second differences d^2/dx_d^2 per component.
        let mut second = [[0.0; 3]; 3]; // [d][component]
        for d in 0..dim {
            let plus = col(x + e(d), j);
            let minus = col(x - e(d), j);
            for i in 0..k {
                second[d][i] = (plus[i] - 2.0 * center[i] + minus[i]) / (h * h);
            }
        }
        // Normalize by the whole Hessian: the pure second derivatives of
        // the radial kernels vanish together along diagonal directions,
        // where only the mixed entries stay O(1).
        let hessian_scale = |component: usize| -> f64 {
            let mut s: f64 = (0..dim).map(|d| second[d][component].abs()).sum();
            for d in 0..dim {
                for f in (d + 1)..dim {
                    let pp = col(x + e(d) + e(f), j)[component];
                    let pm = col(x + e(d) - e(f), j)[component];
                    let mp = col(x - e(d) + e(f), j)[component];
                    let mm = col(x - e(d) - e(f), j)[component];
                    s += ((pp - pm - mp + mm) / (4.0 * h * h)).abs();
                }
            }
            s
        };
        match op.kind {
            OperatorKind::Laplace2d | OperatorKind::Laplace3d => {
                let lap: f64 = (0..dim).map(|d| second[d][0]).sum();
                let scale = hessian_scale(0);
                worst = worst.max((-lap).abs() / scale.max(f64::MIN_POSITIVE));
            }
            OperatorKind::Helmholtz3d => {
                let lap: f64 = (0..dim).map(|d| second[d][0]).sum();
                let a2 = op.wavenumber * op.wavenumber;
                let res = a2 * center[0] - lap;
                let scale = a2 * center[0].abs() + hessian_scale(0);
                worst = worst.max(res.abs() / scale.max(f64::MIN_POSITIVE));
            }
            OperatorKind::Lame3d => {
                let (mu, lambda) = (op.mu, op.lambda);
                // Mixed derivatives d_i d_l u_l via 4-point stencils.
                let mut graddiv = [0.0; 3]; // component i of grad(div u)
                let mut graddiv_scale = [0.0; 3];
                for i in 0..3 {
                    for l in 0..3 {
                        let dd = if i == l {
                            second[i][l]
                        } else {
                            let pp = col(x + e(i) + e(l), j)[l];
                            let pm = col(x + e(i) - e(l), j)[l];
                            let mp = col(x - e(i) + e(l), j)[l];
                            let mm = col(x - e(i) - e(l), j)[l];
                            (pp - pm - mp + mm) / (4.0 * h * h)
                        };
                        graddiv[i] += dd;
                        graddiv_scale[i] += dd.abs();
                    }
                }
                for i in 0..3 {
                    let lap_i: f64 = (0..3).map(|d| second[d][i]).sum();
                    let res = -mu * lap_i - (mu + lambda) * graddiv[i];
                    let scale = mu * (0..3).map(|d| second[d][i].abs()).sum::<f64>()
                        + (mu + lambda) * graddiv_scale[i];
                    worst = worst.max(res.abs() / scale.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    worst
}
