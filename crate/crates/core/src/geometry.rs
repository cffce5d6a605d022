//! Closed boundaries of nested domains with attached quadrature rules.
//!
//! A [`Boundary`] discretizes a closed curve (2D, embedded in the z = 0
//! plane) or a closed surface (3D) into quadrature nodes, positive weights,
//! outward unit normals and, for curves, signed curvatures. Smooth 2D
//! curves use nodes equispaced in parameter with trapezoidal weights
//! (spectrally accurate for analytic curves); spheres and ellipsoids use a
//! deterministic Fibonacci-style lattice with per-node area weights;
//! triangulated surfaces use the centroid rule per triangle.
//!
//! [`Boundary::source_sequence`] exposes a fixed nested ordering of points
//! on the boundary: the first N points are always a prefix of the first N'
//! points for N' > N, and the sequence is dense on the boundary as N grows.

use std::sync::Arc;

use thiserror::Error;

/// Points and vectors live in R^3; 2D geometry uses the z = 0 plane.
pub type Point = nalgebra::Vector3<f64>;

/// Golden-ratio conjugate, the azimuth increment of the sphere lattice.
const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid shape parameter: {0}")]
    InvalidShape(String),
    #[error("n_nodes must be at least 4, got {0}")]
    TooFewNodes(usize),
    #[error("triangulated surface is not watertight: {0}")]
    NotWatertight(String),
    #[error("domain layout nesting violated: {0}")]
    NestingViolation(String),
}

/// Shape description consumed by [`Boundary::build`].
#[derive(Debug, Clone)]
pub enum Shape {
    Circle {
        center: Point,
        radius: f64,
    },
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
    },
    Sphere {
        center: Point,
        radius: f64,
    },
    Ellipsoid {
        center: Point,
        a: f64,
        b: f64,
        c: f64,
    },
    /// Star-shaped 2D curve r(t) = base + sum_k (cos_amps[k-1] cos kt + sin_amps[k-1] sin kt).
    Star {
        center: Point,
        base_radius: f64,
        cos_amps: Vec<f64>,
        sin_amps: Vec<f64>,
    },
    /// Closed triangle mesh; nodes are triangle centroids.
    Triangulated {
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    },
}

impl Shape {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Ellipse { .. } | Shape::Star { .. } => 2,
            _ => 3,
        }
    }
}

/// Nodes, weights (units of surface measure), outward unit normals and
/// optional curvatures (2D only) of a discretized closed boundary.
#[derive(Debug, Clone)]
pub struct QuadratureSet {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
    pub curvatures: Option<Vec<f64>>,
}

impl QuadratureSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Containment classification returned by [`Boundary::contains`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Outside,
    OnBoundary,
}

/// A closed discretized boundary. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Boundary {
    shape: Shape,
    n_nodes: usize,
    quadrature: QuadratureSet,
}

impl Boundary {
    /// Builds the boundary and its quadrature rule.
    ///
    /// `n_nodes` is the requested node count; for triangulated shapes the
    /// actual count is the triangle count and `n_nodes` is ignored.
    pub fn build(shape: Shape, n_nodes: usize) -> Result<Arc<Self>, GeometryError> {
        if !matches!(shape, Shape::Triangulated { .. }) && n_nodes < 4 {
            return Err(GeometryError::TooFewNodes(n_nodes));
        }
        validate_shape(&shape)?;
        let quadrature = match &shape {
            Shape::Circle { center, radius } => circle_rule(*center, *radius, n_nodes),
            Shape::Ellipse { center, a, b } => ellipse_rule(*center, *a, *b, n_nodes),
            Shape::Star {
                center,
                base_radius,
                cos_amps,
                sin_amps,
            } => star_rule(*center, *base_radius, cos_amps, sin_amps, n_nodes),
            Shape::Sphere { center, radius } => sphere_rule(*center, *radius, n_nodes),
            Shape::Ellipsoid { center, a, b, c } => ellipsoid_rule(*center, *a, *b, *c, n_nodes),
            Shape::Triangulated {
                vertices,
                triangles,
            } => triangle_rule(vertices, triangles)?,
        };
        let n_nodes = quadrature.len();
        Ok(Arc::new(Boundary {
            shape,
            n_nodes,
            quadrature,
        }))
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn ambient_dim(&self) -> usize {
        self.shape.ambient_dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn quadrature(&self) -> &QuadratureSet {
        &self.quadrature
    }

    pub fn nodes(&self) -> &[Point] {
        &self.quadrature.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.quadrature.weights
    }

    pub fn normals(&self) -> &[Point] {
        &self.quadrature.normals
    }

    /// Local node spacing near node `i`: arc length per node in 2D,
    /// square root of the node area in 3D.
    pub fn node_spacing(&self, i: usize) -> f64 {
        let w = self.quadrature.weights[i];
        match self.ambient_dim() {
            2 => w,
            _ => w.sqrt(),
        }
    }

    /// Largest node spacing over the boundary.
    pub fn max_node_spacing(&self) -> f64 {
        (0..self.n_nodes)
            .map(|i| self.node_spacing(i))
            .fold(0.0, f64::max)
    }

    /// A length scale of the shape (diameter-like), used for tolerances.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => 2.0 * radius,
            Shape::Ellipse { a, b, .. } => 2.0 * a.max(*b),
            Shape::Ellipsoid { a, b, c, .. } => 2.0 * a.max(*b).max(*c),
            Shape::Star {
                base_radius,
                cos_amps,
                sin_amps,
                ..
            } => {
                let pert: f64 = cos_amps.iter().chain(sin_amps).map(|v| v.abs()).sum();
                2.0 * (base_radius + pert)
            }
            Shape::Triangulated { vertices, .. } => {
                let c = centroid(vertices);
                2.0 * vertices
                    .iter()
                    .map(|v| (v - c).norm())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// The first `n` points of the fixed nested point sequence on the
    /// boundary. `source_sequence(n)` is a prefix of `source_sequence(m)`
    /// for n < m, and the sequence is dense on the boundary.
    ///
    /// Curves order their parameter by the van der Corput radical-inverse;
    /// spheres and ellipsoids combine a radical-inverse height with
    /// golden-angle azimuths; meshes enumerate centroids in bit-reversed
    /// index order.
    pub fn source_sequence(&self, n: usize) -> Vec<Point> {
        match &self.shape {
            Shape::Circle { .. } | Shape::Ellipse { .. } | Shape::Star { .. } => (0..n)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * van_der_corput(j as u64);
                    self.curve_point(t)
                })
                .collect(),
            Shape::Sphere { center, radius } => (0..n)
                .map(|j| center + *radius * unit_sphere_seq_point(j as u64))
                .collect(),
            Shape::Ellipsoid { center, a, b, c } => (0..n)
                .map(|j| {
                    let s = unit_sphere_seq_point(j as u64);
                    center + Point::new(a * s.x, b * s.y, c * s.z)
                })
                .collect(),
            Shape::Triangulated { .. } => {
                let nodes = self.nodes();
                let m = nodes.len();
                let bits = (m.max(2) - 1).ilog2() + 1;
                let mut out = Vec::with_capacity(n.min(m));
                let mut j = 0u64;
                while out.len() < n.min(m) {
                    let idx = reverse_bits(j, bits) as usize;
                    if idx < m {
                        out.push(nodes[idx]);
                    }
                    j += 1;
                }
                out
            }
        }
    }

    /// Classifies a point against the boundary. Points within
    /// `tol` (default `1e-9 * diameter` when `None`) of the surface
    /// report [`Containment::OnBoundary`].
    pub fn contains(&self, x: Point, tol: Option<f64>) -> Containment {
        let tol = tol.unwrap_or(1e-9 * self.diameter());
        match &self.shape {
            Shape::Triangulated {
                vertices,
                triangles,
            } => mesh_contains(vertices, triangles, x, tol),
            _ => {
                // All parametric shapes here are star-shaped about their
                // center: compare |x - c| with the surface radius along
                // the ray through x.
                let c = self.center();
                let d = x - c;
                let r = d.norm();
                let rs = self.surface_radius(d);
                if (r - rs).abs() <= tol {
                    Containment::OnBoundary
                } else if r < rs {
                    Containment::Inside
                } else {
                    Containment::Outside
                }
            }
        }
    }

    /// Signed distance proxy: negative inside, positive outside.
    /// Exact for circles and spheres, a radial estimate otherwise.
    pub fn distance_from_surface(&self, x: Point) -> f64 {
        match &self.shape {
            Shape::Triangulated {
                vertices,
                triangles,
            } => {
                let d = mesh_min_distance(vertices, triangles, x);
                match mesh_contains(vertices, triangles, x, 0.0) {
                    Containment::Inside => -d,
                    _ => d,
                }
            }
            _ => {
                let c = self.center();
                let d = x - c;
                d.norm() - self.surface_radius(d)
            }
        }
    }

    /// A copy of this boundary scaled by `factor` about its centroid,
    /// with the same node count.
    pub fn scaled_copy(&self, factor: f64) -> Result<Arc<Self>, GeometryError> {
        if !(factor > 0.0) {
            return Err(GeometryError::InvalidShape(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let shape = match &self.shape {
            Shape::Circle { center, radius } => Shape::Circle {
                center: *center,
                radius: radius * factor,
            },
            Shape::Ellipse { center, a, b } => Shape::Ellipse {
                center: *center,
                a: a * factor,
                b: b * factor,
            },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: *center,
                radius: radius * factor,
            },
            Shape::Ellipsoid { center, a, b, c } => Shape::Ellipsoid {
                center: *center,
                a: a * factor,
                b: b * factor,
                c: c * factor,
            },
            Shape::Star {
                center,
                base_radius,
                cos_amps,
                sin_amps,
            } => Shape::Star {
                center: *center,
                base_radius: base_radius * factor,
                cos_amps: cos_amps.iter().map(|v| v * factor).collect(),
                sin_amps: sin_amps.iter().map(|v| v * factor).collect(),
            },
            Shape::Triangulated {
                vertices,
                triangles,
            } => {
                let c = centroid(vertices);
                Shape::Triangulated {
                    vertices: vertices.iter().map(|v| c + factor * (v - c)).collect(),
                    triangles: triangles.clone(),
                }
            }
        };
        Boundary::build(shape, self.n_nodes)
    }

    fn center(&self) -> Point {
        match &self.shape {
            Shape::Circle { center, .. }
            | Shape::Ellipse { center, .. }
            | Shape::Sphere { center, .. }
            | Shape::Ellipsoid { center, .. }
            | Shape::Star { center, .. } => *center,
            Shape::Triangulated { vertices, .. } => centroid(vertices),
        }
    }

    /// Distance from the center to the surface along direction `d`.
    fn surface_radius(&self, d: Point) -> f64 {
        match &self.shape {
            Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => *radius,
            Shape::Ellipse { a, b, .. } => {
                let n = d.norm();
                if n == 0.0 {
                    return a.min(*b);
                }
                let u = d / n;
                1.0 / ((u.x / a).powi(2) + (u.y / b).powi(2)).sqrt()
            }
            Shape::Ellipsoid { a, b, c, .. } => {
                let n = d.norm();
                if n == 0.0 {
                    return a.min(*b).min(*c);
                }
                let u = d / n;
                1.0 / ((u.x / a).powi(2) + (u.y / b).powi(2) + (u.z / c).powi(2)).sqrt()
            }
            Shape::Star {
                base_radius,
                cos_amps,
                sin_amps,
                ..
            } => {
                let t = d.y.atan2(d.x);
                star_radius(*base_radius, cos_amps, sin_amps, t)
            }
            Shape::Triangulated { .. } => unreachable!("handled by mesh paths"),
        }
    }

    /// Point on a 2D parametric curve at parameter t.
    fn curve_point(&self, t: f64) -> Point {
        match &self.shape {
            Shape::Circle { center, radius } => {
                center + Point::new(radius * t.cos(), radius * t.sin(), 0.0)
            }
            Shape::Ellipse { center, a, b } => center + Point::new(a * t.cos(), b * t.sin(), 0.0),
            Shape::Star {
                center,
                base_radius,
                cos_amps,
                sin_amps,
            } => {
                let r = star_radius(*base_radius, cos_amps, sin_amps, t);
                center + Point::new(r * t.cos(), r * t.sin(), 0.0)
            }
            _ => unreachable!("curve_point is 2D only"),
        }
    }
}

fn validate_shape(shape: &Shape) -> Result<(), GeometryError> {
    let bad = |msg: String| Err(GeometryError::InvalidShape(msg));
    match shape {
        Shape::Circle { radius, .. } | Shape::Sphere { radius, .. } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return bad(format!("radius must be positive and finite, got {radius}"));
            }
        }
        Shape::Ellipse { a, b, .. } => {
            if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                return bad(format!("semi-axes must be positive, got a={a} b={b}"));
            }
        }
        Shape::Ellipsoid { a, b, c, .. } => {
            if !(*a > 0.0 && *b > 0.0 && *c > 0.0 && a.is_finite() && b.is_finite() && c.is_finite())
            {
                return bad(format!("semi-axes must be positive, got a={a} b={b} c={c}"));
            }
        }
        Shape::Star {
            base_radius,
            cos_amps,
            sin_amps,
            ..
        } => {
            if !(base_radius.is_finite() && *base_radius > 0.0) {
                return bad(format!("base radius must be positive, got {base_radius}"));
            }
            // Sampled positivity check of r(t).
            for i in 0..1024 {
                let t = 2.0 * std::f64::consts::PI * (i as f64) / 1024.0;
                if star_radius(*base_radius, cos_amps, sin_amps, t) <= 0.0 {
                    return bad("star radius function is not positive everywhere".into());
                }
            }
        }
        Shape::Triangulated {
            vertices,
            triangles,
        } => {
            if triangles.len() < 4 {
                return bad(format!(
                    "mesh needs at least 4 triangles, got {}",
                    triangles.len()
                ));
            }
            for (t, tri) in triangles.iter().enumerate() {
                for &v in tri {
                    if v >= vertices.len() {
                        return bad(format!("triangle {t} references missing vertex {v}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn star_radius(base: f64, cos_amps: &[f64], sin_amps: &[f64], t: f64) -> f64 {
    let mut r = base;
    for (k, a) in cos_amps.iter().enumerate() {
        r += a * ((k + 1) as f64 * t).cos();
    }
    for (k, b) in sin_amps.iter().enumerate() {
        r += b * ((k + 1) as f64 * t).sin();
    }
    r
}

fn star_radius_deriv(cos_amps: &[f64], sin_amps: &[f64], t: f64) -> (f64, f64) {
    let mut dr = 0.0;
    let mut ddr = 0.0;
    for (i, a) in cos_amps.iter().enumerate() {
        let k = (i + 1) as f64;
        dr -= a * k * (k * t).sin();
        ddr -= a * k * k * (k * t).cos();
    }
    for (i, b) in sin_amps.iter().enumerate() {
        let k = (i + 1) as f64;
        dr += b * k * (k * t).cos();
        ddr -= b * k * k * (k * t).sin();
    }
    (dr, ddr)
}

fn circle_rule(center: Point, radius: f64, n: usize) -> QuadratureSet {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut curvatures = Vec::with_capacity(n);
    for i in 0..n {
        let t = h * i as f64;
        let u = Point::new(t.cos(), t.sin(), 0.0);
        nodes.push(center + radius * u);
        normals.push(u);
        curvatures.push(1.0 / radius);
    }
    QuadratureSet {
        nodes,
        weights: vec![radius * h; n],
        normals,
        curvatures: Some(curvatures),
    }
}

fn ellipse_rule(center: Point, a: f64, b: f64, n: usize) -> QuadratureSet {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut curvatures = Vec::with_capacity(n);
    for i in 0..n {
        let t = h * i as f64;
        nodes.push(center + Point::new(a * t.cos(), b * t.sin(), 0.0));
        // gamma'(t) = (-a sin t, b cos t)
        let speed = ((a * t.sin()).powi(2) + (b * t.cos()).powi(2)).sqrt();
        weights.push(speed * h);
        normals.push(Point::new(b * t.cos() / speed, a * t.sin() / speed, 0.0));
        curvatures.push(a * b / speed.powi(3));
    }
    QuadratureSet {
        nodes,
        weights,
        normals,
        curvatures: Some(curvatures),
    }
}

fn star_rule(
    center: Point,
    base: f64,
    cos_amps: &[f64],
    sin_amps: &[f64],
    n: usize,
) -> QuadratureSet {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut curvatures = Vec::with_capacity(n);
    for i in 0..n {
        let t = h * i as f64;
        let r = star_radius(base, cos_amps, sin_amps, t);
        let (dr, ddr) = star_radius_deriv(cos_amps, sin_amps, t);
        let (ct, st) = (t.cos(), t.sin());
        nodes.push(center + Point::new(r * ct, r * st, 0.0));
        // gamma'(t) = (r' cos - r sin, r' sin + r cos)
        let gx = dr * ct - r * st;
        let gy = dr * st + r * ct;
        let speed = (gx * gx + gy * gy).sqrt();
        weights.push(speed * h);
        // Outward normal for counterclockwise parametrization.
        normals.push(Point::new(gy / speed, -gx / speed, 0.0));
        let kappa = (r * r + 2.0 * dr * dr - r * ddr) / speed.powi(3);
        curvatures.push(kappa);
    }
    QuadratureSet {
        nodes,
        weights,
        normals,
        curvatures: Some(curvatures),
    }
}

/// Point j of the nested unit-sphere sequence: radical-inverse height,
/// golden-angle azimuth.
fn unit_sphere_seq_point(j: u64) -> Point {
    let z = 1.0 - 2.0 * van_der_corput(j);
    let phi = 2.0 * std::f64::consts::PI * ((j as f64) * GOLDEN_FRAC).fract();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Point::new(s * phi.cos(), s * phi.sin(), z)
}

/// Fibonacci-lattice quadrature on the sphere: n near-uniform nodes with
/// equal area weights.
fn sphere_rule(center: Point, radius: f64, n: usize) -> QuadratureSet {
    let mut nodes = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let phi = 2.0 * std::f64::consts::PI * ((i as f64) * GOLDEN_FRAC).fract();
        let s = (1.0 - z * z).max(0.0).sqrt();
        let u = Point::new(s * phi.cos(), s * phi.sin(), z);
        nodes.push(center + radius * u);
        normals.push(u);
    }
    let w = 4.0 * std::f64::consts::PI * radius * radius / n as f64;
    QuadratureSet {
        nodes,
        weights: vec![w; n],
        normals,
        curvatures: None,
    }
}

fn ellipsoid_rule(center: Point, a: f64, b: f64, c: f64, n: usize) -> QuadratureSet {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let sphere_w = 4.0 * std::f64::consts::PI / n as f64;
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let phi = 2.0 * std::f64::consts::PI * ((i as f64) * GOLDEN_FRAC).fract();
        let s = (1.0 - z * z).max(0.0).sqrt();
        let u = Point::new(s * phi.cos(), s * phi.sin(), z);
        nodes.push(center + Point::new(a * u.x, b * u.y, c * u.z));
        // Area element of s -> (a sx, b sy, c sz): abc * |D^{-1} s|.
        let dinv = Point::new(u.x / a, u.y / b, u.z / c);
        weights.push(sphere_w * a * b * c * dinv.norm());
        normals.push(dinv / dinv.norm());
    }
    QuadratureSet {
        nodes,
        weights,
        normals,
        curvatures: None,
    }
}

fn centroid(vertices: &[Point]) -> Point {
    vertices.iter().sum::<Point>() / vertices.len() as f64
}

fn triangle_rule(
    vertices: &[Point],
    triangles: &[[usize; 3]],
) -> Result<QuadratureSet, GeometryError> {
    check_watertight(vertices, triangles)?;
    // Orient outward: flip everything if the signed volume is negative.
    let vol6: f64 = triangles
        .iter()
        .map(|t| vertices[t[0]].dot(&vertices[t[1]].cross(&vertices[t[2]])))
        .sum();
    let flip = vol6 < 0.0;

    let mut nodes = Vec::with_capacity(triangles.len());
    let mut weights = Vec::with_capacity(triangles.len());
    let mut normals = Vec::with_capacity(triangles.len());
    for t in triangles {
        let (v0, v1, v2) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let cross = (v1 - v0).cross(&(v2 - v0));
        let area2 = cross.norm();
        if area2 <= 0.0 {
            return Err(GeometryError::InvalidShape(
                "degenerate (zero-area) triangle in mesh".into(),
            ));
        }
        nodes.push((v0 + v1 + v2) / 3.0);
        weights.push(0.5 * area2);
        let n = cross / area2;
        normals.push(if flip { -n } else { n });
    }
    Ok(QuadratureSet {
        nodes,
        weights,
        normals,
        curvatures: None,
    })
}

/// Watertight check: every directed edge must appear exactly once and be
/// matched by its reverse (closed, consistently oriented 2-manifold).
fn check_watertight(vertices: &[Point], triangles: &[[usize; 3]]) -> Result<(), GeometryError> {
    use std::collections::HashMap;
    let _ = vertices;
    let mut edges: HashMap<(usize, usize), i64> = HashMap::new();
    for t in triangles {
        for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edges.entry(e).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &edges {
        if count != 1 {
            return Err(GeometryError::NotWatertight(format!(
                "directed edge ({a},{b}) appears {count} times"
            )));
        }
        if edges.get(&(b, a)).copied().unwrap_or(0) != 1 {
            return Err(GeometryError::NotWatertight(format!(
                "edge ({a},{b}) has no reversed mate"
            )));
        }
    }
    Ok(())
}

fn mesh_contains(
    vertices: &[Point],
    triangles: &[[usize; 3]],
    x: Point,
    tol: f64,
) -> Containment {
    if tol > 0.0 && mesh_min_distance(vertices, triangles, x) <= tol {
        return Containment::OnBoundary;
    }
    // Ray cast along a fixed direction unlikely to graze edges.
    let dir = Point::new(0.579_837_281, 0.702_918_374, 0.412_938_171).normalize();
    let mut crossings = 0usize;
    for t in triangles {
        if ray_hits_triangle(x, dir, vertices[t[0]], vertices[t[1]], vertices[t[2]]) {
            crossings += 1;
        }
    }
    if crossings % 2 == 1 {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

fn ray_hits_triangle(orig: Point, dir: Point, v0: Point, v1: Point, v2: Point) -> bool {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return false;
    }
    let inv = 1.0 / det;
    let s = orig - v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 0.0
}

fn mesh_min_distance(vertices: &[Point], triangles: &[[usize; 3]], x: Point) -> f64 {
    triangles
        .iter()
        .map(|t| point_triangle_distance(x, vertices[t[0]], vertices[t[1]], vertices[t[2]]))
        .fold(f64::INFINITY, f64::min)
}

fn point_triangle_distance(p: Point, a: Point, b: Point, c: Point) -> f64 {
    // Projection onto the triangle plane clamped to the triangle.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - v * ab).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - w * ac).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - w * (c - b)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + v * ab + w * ac)).norm()
}

/// Base-2 radical inverse (van der Corput sequence), vdc(0) = 0.
pub fn van_der_corput(mut j: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 0.5;
    while j > 0 {
        if j & 1 == 1 {
            result += f;
        }
        f *= 0.5;
        j >>= 1;
    }
    result
}

fn reverse_bits(j: u64, bits: u32) -> u64 {
    j.reverse_bits() >> (64 - bits)
}

/// Nested-domain configuration with verified strict nesting.
///
/// `inner` is the data boundary; `middle` carries the single-layer density;
/// `outer` hosts fundamental-solution sources; `interior_probe` lies
/// strictly inside `inner`.
#[derive(Debug, Clone)]
pub struct DomainLayout {
    pub inner: Arc<Boundary>,
    pub middle: Option<Arc<Boundary>>,
    pub outer: Option<Arc<Boundary>>,
    pub interior_probe: Option<Arc<Boundary>>,
    min_separation: f64,
}

impl DomainLayout {
    pub fn new(
        inner: Arc<Boundary>,
        middle: Option<Arc<Boundary>>,
        outer: Option<Arc<Boundary>>,
        interior_probe: Option<Arc<Boundary>>,
    ) -> Result<Self, GeometryError> {
        let mut min_separation = f64::INFINITY;
        let mut check =
            |inner_b: &Boundary, outer_b: &Boundary, what: &str| -> Result<(), GeometryError> {
                for (i, node) in inner_b.nodes().iter().enumerate() {
                    if outer_b.contains(*node, None) != Containment::Inside {
                        return Err(GeometryError::NestingViolation(format!(
                            "{what}: node {i} at ({}, {}, {}) is not strictly inside",
                            node.x, node.y, node.z
                        )));
                    }
                }
                let sep = shell_separation(inner_b, outer_b);
                if !(sep > 0.0) {
                    return Err(GeometryError::NestingViolation(format!(
                        "{what}: shells touch (separation {sep})"
                    )));
                }
                min_separation = min_separation.min(sep);
                Ok(())
            };
        if let Some(m) = &middle {
            check(&inner, m, "inner inside middle")?;
            if let Some(o) = &outer {
                check(m, o, "middle inside outer")?;
            }
        } else if let Some(o) = &outer {
            check(&inner, o, "inner inside outer")?;
        }
        if let Some(p) = &interior_probe {
            check(p, &inner, "probe inside inner")?;
        }
        Ok(DomainLayout {
            inner,
            middle,
            outer,
            interior_probe,
            min_separation,
        })
    }

    /// Smallest node-wise separation found between consecutive shells.
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }
}

fn shell_separation(inner: &Boundary, outer: &Boundary) -> f64 {
    let mut sep = f64::INFINITY;
    for p in inner.nodes() {
        for q in outer.nodes() {
            sep = sep.min((p - q).norm());
        }
    }
    sep
}
