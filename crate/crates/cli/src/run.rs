//! Experiment execution: builds geometry and data from a parsed config,
//! runs the requested solver or study sweep, and writes `report.csv` and
//! `field.csv`.
//!
//! Outputs are bytewise deterministic for a fixed config and seed: rows
//! are emitted in study-declaration order (regardless of worker
//! scheduling) and every float is printed in scientific notation with 12
//! fractional digits. Wall times go to stderr only.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use ext_solver_core::geometry::{Boundary, DomainLayout, Point, Shape};
use ext_solver_core::kernels::{
    conormal_kernel_x, pde_residual, phi, HelmholtzBranch, OperatorSpec,
};
use ext_solver_core::manufactured::ManufacturedSolution;
use ext_solver_core::potentials::LayerDensity;
use ext_solver_core::problems::{
    dirichlet_by_extension, solve_cauchy, CauchyData, ExtensionSolution, SolverMethod,
};
use ext_solver_core::problems::continue_solution;
use ext_solver_core::reglinalg::{AlphaSelection, RegConfig, RegMethod};

use crate::config::{
    ExperimentConfig, MethodConfig, OperatorKindConfig, ProbeConfig, ProblemKind,
    RegMethodConfig, ShellConfig, ShellKind,
};
use crate::noise::perturb;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Build(String),
}

impl RunError {
    fn build(e: impl std::fmt::Display) -> Self {
        RunError::Build(e.to_string())
    }
}

/// Outcome of a harness invocation, mapped to the process exit code:
/// 0 clean, 1 completed with flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Flagged,
}

pub fn build_operator(cfg: &ExperimentConfig) -> Result<OperatorSpec, RunError> {
    let o = &cfg.operator;
    Ok(match o.kind {
        OperatorKindConfig::Laplace2d => OperatorSpec::laplace_2d(),
        OperatorKindConfig::Laplace3d => OperatorSpec::laplace_3d(),
        OperatorKindConfig::Helmholtz3d => {
            OperatorSpec::helmholtz_3d(o.wavenumber, o.branch).map_err(RunError::build)?
        }
        OperatorKindConfig::Lame3d => {
            OperatorSpec::lame_3d(o.mu, o.lambda).map_err(RunError::build)?
        }
    })
}

fn read_triangle_soup(path: &Path) -> Result<(Vec<Point>, Vec<[usize; 3]>), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read mesh file {}: {e}", path.display())))?;
    let mut vertices: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|_| {
            RunError::Config(format!(
                "{}:{}: expected nine floats per triangle",
                path.display(),
                lineno + 1
            ))
        })?;
        if vals.len() != 9 {
            return Err(RunError::Config(format!(
                "{}:{}: expected nine floats, got {}",
                path.display(),
                lineno + 1,
                vals.len()
            )));
        }
        let mut tri = [0usize; 3];
        for v in 0..3 {
            let p = Point::new(vals[3 * v], vals[3 * v + 1], vals[3 * v + 2]);
            let key = (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
            let idx = *index.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            });
            tri[v] = idx;
        }
        triangles.push(tri);
    }
    Ok((vertices, triangles))
}

pub fn build_boundary(
    shell: &ShellConfig,
    node_override: Option<usize>,
    radius_override: Option<f64>,
) -> Result<Arc<Boundary>, RunError> {
    let n = node_override.unwrap_or(shell.n_nodes);
    let r = radius_override.unwrap_or(shell.radius);
    let shape = match shell.kind {
        ShellKind::Circle => Shape::Circle {
            center: shell.center,
            radius: r,
        },
        ShellKind::Sphere => Shape::Sphere {
            center: shell.center,
            radius: r,
        },
        ShellKind::Ellipse => Shape::Ellipse {
            center: shell.center,
            a: shell.axes[0],
            b: shell.axes[1],
        },
        ShellKind::Ellipsoid => Shape::Ellipsoid {
            center: shell.center,
            a: shell.axes[0],
            b: shell.axes[1],
            c: shell.axes[2],
        },
        ShellKind::Star => Shape::Star {
            center: shell.center,
            base_radius: r,
            cos_amps: shell.cos_amps.clone(),
            sin_amps: shell.sin_amps.clone(),
        },
        ShellKind::Triangulated => {
            let (vertices, triangles) =
                read_triangle_soup(shell.mesh_file.as_ref().expect("validated by parser"))?;
            Shape::Triangulated {
                vertices,
                triangles,
            }
        }
    };
    Boundary::build(shape, n).map_err(RunError::build)
}

fn probe_points(probe: &ProbeConfig) -> Vec<Point> {
    if probe.is_sphere {
        let sphere = Boundary::build(
            Shape::Sphere {
                center: probe.center,
                radius: probe.radius,
            },
            probe.count,
        )
        .expect("probe sphere");
        sphere.nodes().to_vec()
    } else {
        (0..probe.count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / probe.count as f64;
                probe.center + Point::new(probe.radius * t.cos(), probe.radius * t.sin(), 0.0)
            })
            .collect()
    }
}

/// Default probe set: a mid-shell ring (or an interior ring for the
/// extension approach, whose solution lives inside the data boundary).
fn default_probes(cfg: &ExperimentConfig) -> Vec<ProbeConfig> {
    let is_sphere = !matches!(cfg.operator.kind, OperatorKindConfig::Laplace2d);
    let inner_r = cfg.inner.radius;
    let radius = match cfg.problem.kind {
        ProblemKind::DirichletExtension => 0.5 * inner_r,
        _ => {
            let outer_r = cfg
                .middle
                .as_ref()
                .map(|s| s.radius)
                .or_else(|| cfg.outer.as_ref().map(|s| s.radius))
                .unwrap_or(2.0 * inner_r);
            0.5 * (inner_r + outer_r)
        }
    };
    vec![ProbeConfig {
        name: "mid".to_string(),
        is_sphere,
        radius,
        count: if is_sphere { 128 } else { 64 },
        center: cfg.inner.center,
    }]
}

fn reg_config(cfg: &ExperimentConfig) -> RegConfig {
    let method = match cfg.reg.method {
        RegMethodConfig::Tikhonov => RegMethod::Tikhonov { alpha: cfg.reg.alpha },
        RegMethodConfig::TikhonovScaled => RegMethod::TikhonovScaled {
            alpha_rel: cfg.reg.alpha_rel,
        },
        RegMethodConfig::Tsvd => RegMethod::Tsvd {
            threshold: cfg.reg.tau,
        },
    };
    let selection = match cfg.reg.discrepancy {
        Some(delta) => AlphaSelection::Discrepancy { noise_level: delta },
        None => AlphaSelection::Fixed,
    };
    RegConfig { method, selection }
}

fn reg_strength(cfg: &ExperimentConfig) -> f64 {
    match cfg.reg.method {
        RegMethodConfig::Tikhonov => cfg.reg.alpha,
        RegMethodConfig::TikhonovScaled => cfg.reg.alpha_rel,
        RegMethodConfig::Tsvd => cfg.reg.tau,
    }
}

/// Per-row sweep overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub n_sources: Option<usize>,
    pub n_nodes: Option<usize>,
    pub noise: Option<f64>,
    pub outer_radius: Option<f64>,
}

/// One report row plus the field dump of the solved problem.
#[derive(Debug, Clone)]
pub struct RowOutput {
    pub n_sources: usize,
    pub n_nodes: usize,
    pub alpha: f64,
    pub delta: f64,
    pub radius: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    pub condition_estimate: f64,
    pub effective_rank: usize,
    pub alpha_used: f64,
    pub field_errors: Vec<f64>,
    pub flags: Vec<String>,
    pub field_points: Vec<Point>,
    pub field_values: Vec<f64>,
    pub k: usize,
}

/// Tabulated boundary data: one line per inner node, k floats for a
/// Dirichlet datum or 2k floats for a Cauchy pair.
fn read_boundary_data(
    path: &Path,
    boundary: &Arc<Boundary>,
    k: usize,
    pair: bool,
) -> Result<(LayerDensity, Option<LayerDensity>), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read data file {}: {e}", path.display())))?;
    let per_line = if pair { 2 * k } else { k };
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|_| {
            RunError::Config(format!("{}:{}: bad float", path.display(), lineno + 1))
        })?;
        if vals.len() != per_line {
            return Err(RunError::Config(format!(
                "{}:{}: expected {per_line} values, got {}",
                path.display(),
                lineno + 1,
                vals.len()
            )));
        }
        first.extend_from_slice(&vals[..k]);
        if pair {
            second.extend_from_slice(&vals[k..]);
        }
        count += 1;
    }
    if count != boundary.n_nodes() {
        return Err(RunError::Config(format!(
            "{}: {count} data lines for {} boundary nodes",
            path.display(),
            boundary.n_nodes()
        )));
    }
    let u0 = LayerDensity::from_values(boundary, k, first).map_err(RunError::build)?;
    let u1 = if pair {
        Some(LayerDensity::from_values(boundary, k, second).map_err(RunError::build)?)
    } else {
        None
    };
    Ok((u0, u1))
}

fn noised(density: &LayerDensity, delta: f64, seed: u64) -> Result<(LayerDensity, f64), RunError> {
    let mut values = density.values().to_vec();
    let achieved = perturb(&mut values, delta, seed);
    Ok((
        LayerDensity::from_values(density.boundary(), density.k(), values)
            .map_err(RunError::build)?,
        achieved,
    ))
}

/// Executes one solve with the given overrides.
pub fn execute_single(cfg: &ExperimentConfig, ov: &Overrides) -> Result<RowOutput, RunError> {
    let op = build_operator(cfg)?;
    let k = op.component_count();
    let inner = build_boundary(&cfg.inner, ov.n_nodes, None)?;
    let middle = cfg
        .middle
        .as_ref()
        .map(|s| build_boundary(s, ov.n_nodes, None))
        .transpose()?;
    let outer = cfg
        .outer
        .as_ref()
        .map(|s| build_boundary(s, None, ov.outer_radius))
        .transpose()?;
    let probe_shell = cfg
        .probe_shell
        .as_ref()
        .map(|s| build_boundary(s, None, None))
        .transpose()?;

    let delta = ov.noise.unwrap_or(cfg.data.noise);
    let manufactured = cfg
        .data
        .source_point
        .map(|z0| ManufacturedSolution::new(op, z0, cfg.data.component).map_err(RunError::build))
        .transpose()?;

    let method = match cfg.problem.method {
        MethodConfig::Mfs => SolverMethod::Mfs {
            n_sources: ov.n_sources.unwrap_or(cfg.problem.mfs_sources),
        },
        MethodConfig::SingleLayer => SolverMethod::SingleLayer,
    };
    let reg = reg_config(cfg);

    let solution: ExtensionSolution = match cfg.problem.kind {
        ProblemKind::InnerDirichlet | ProblemKind::Continuation => {
            let layout = DomainLayout::new(inner.clone(), middle.clone(), outer.clone(), None)
                .map_err(RunError::build)?;
            let datum = match (&manufactured, &cfg.data.boundary_data_file) {
                (Some(ms), _) => ms.dirichlet_trace(&inner).map_err(RunError::build)?,
                (None, Some(path)) => read_boundary_data(path, &inner, k, false)?.0,
                (None, None) => unreachable!("validated by the config parser"),
            };
            let (datum, _) = noised(&datum, delta, cfg.data.seed)?;
            continue_solution(&op, &layout, &datum, method, reg).map_err(RunError::build)?
        }
        ProblemKind::Cauchy => {
            let layout = DomainLayout::new(
                inner.clone(),
                middle.clone(),
                outer.clone(),
                probe_shell.clone(),
            )
            .map_err(RunError::build)?;
            let (u00, u10) = match (&manufactured, &cfg.data.boundary_data_file) {
                (Some(ms), _) => (
                    ms.dirichlet_trace(&inner).map_err(RunError::build)?,
                    ms.conormal_trace(&inner).map_err(RunError::build)?,
                ),
                (None, Some(path)) => {
                    let (u0, u1) = read_boundary_data(path, &inner, k, true)?;
                    (u0, u1.expect("pair requested"))
                }
                (None, None) => unreachable!("validated by the config parser"),
            };
            let (u00, _) = noised(&u00, delta, cfg.data.seed)?;
            let data = CauchyData::new(u00, u10).map_err(RunError::build)?;
            solve_cauchy(&op, &layout, &data, cfg.problem.reduction, method, reg)
                .map_err(RunError::build)?
        }
        ProblemKind::DirichletExtension => {
            let virtual_boundary = outer
                .clone()
                .ok_or_else(|| RunError::Config("dirichlet-extension needs [geometry.outer] as the virtual boundary".into()))?;
            let datum = match (&manufactured, &cfg.data.boundary_data_file) {
                (Some(ms), _) => ms.dirichlet_trace(&inner).map_err(RunError::build)?,
                (None, Some(path)) => read_boundary_data(path, &inner, k, false)?.0,
                (None, None) => unreachable!("validated by the config parser"),
            };
            let (datum, _) = noised(&datum, delta, cfg.data.seed)?;
            dirichlet_by_extension(&op, &inner, &virtual_boundary, &datum, method, reg)
                .map_err(RunError::build)?
        }
    };

    let probes = if cfg.probes.is_empty() {
        default_probes(cfg)
    } else {
        cfg.probes.clone()
    };

    let mut field_points = Vec::new();
    let mut field_values = Vec::new();
    let mut field_errors = Vec::new();
    let mut flags: Vec<String> = solution.warnings.clone();
    for probe in &probes {
        let points = probe_points(probe);
        let field = solution.evaluate(&points).map_err(RunError::build)?;
        if !field.near_field.is_empty() {
            flags.push(format!(
                "probe {}: {} points in the near-field band",
                probe.name,
                field.near_field.len()
            ));
        }
        let err = match &manufactured {
            Some(ms) => ms
                .relative_l2_error(&points, &field.values)
                .map_err(RunError::build)?,
            None => f64::NAN,
        };
        field_errors.push(err);
        field_points.extend_from_slice(&points);
        field_values.extend_from_slice(&field.values);
    }
    if solution.report.discrepancy_fallback {
        flags.push("discrepancy fallback".to_string());
    }

    Ok(RowOutput {
        n_sources: solution.coefficient_count() / k,
        n_nodes: inner.n_nodes(),
        alpha: reg_strength(cfg),
        delta,
        radius: outer
            .as_ref()
            .map(|b| b.diameter() / 2.0)
            .or_else(|| middle.as_ref().map(|b| b.diameter() / 2.0))
            .unwrap_or_else(|| inner.diameter() / 2.0),
        residual_norm: solution.report.residual_norm,
        solution_norm: solution.report.solution_norm,
        condition_estimate: solution.report.condition_estimate,
        effective_rank: solution.report.effective_rank,
        alpha_used: solution.report.alpha_used,
        field_errors,
        flags,
        field_points,
        field_values,
        k,
    })
}

/// Study sweeps expressed as override lists, in declaration order.
pub fn study_overrides(cfg: &ExperimentConfig, study: StudyKind) -> Result<Vec<Overrides>, RunError> {
    match study {
        StudyKind::Solve => Ok(vec![Overrides::default()]),
        StudyKind::Convergence => {
            if !cfg.study.n_list.is_empty() {
                Ok(cfg
                    .study
                    .n_list
                    .iter()
                    .map(|n| Overrides {
                        n_sources: Some(*n),
                        ..Default::default()
                    })
                    .collect())
            } else if !cfg.study.node_list.is_empty() {
                Ok(cfg
                    .study
                    .node_list
                    .iter()
                    .map(|n| Overrides {
                        n_nodes: Some(*n),
                        ..Default::default()
                    })
                    .collect())
            } else {
                Err(RunError::Config(
                    "study-convergence needs `n_list` or `node_list` in [study]".into(),
                ))
            }
        }
        StudyKind::Noise => {
            if cfg.study.noise_list.is_empty() {
                return Err(RunError::Config(
                    "study-noise needs `noise_list` in [study]".into(),
                ));
            }
            Ok(cfg
                .study
                .noise_list
                .iter()
                .map(|d| Overrides {
                    noise: Some(*d),
                    ..Default::default()
                })
                .collect())
        }
        StudyKind::Conditioning => {
            if cfg.study.radius_list.is_empty() {
                return Err(RunError::Config(
                    "study-conditioning needs `radius_list` in [study]".into(),
                ));
            }
            Ok(cfg
                .study
                .radius_list
                .iter()
                .map(|r| Overrides {
                    outer_radius: Some(*r),
                    ..Default::default()
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Solve,
    Convergence,
    Noise,
    Conditioning,
}

fn worker_count(rows: usize) -> usize {
    let cap = std::env::var("EXT_SOLVER_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|v| *v >= 1);
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    cap.unwrap_or(available).min(rows.max(1))
}

/// Runs all study rows (in parallel when permitted) and returns them in
/// declaration order.
pub fn run_rows(cfg: &ExperimentConfig, overrides: &[Overrides]) -> Result<Vec<RowOutput>, RunError> {
    let workers = worker_count(overrides.len());
    if workers <= 1 || overrides.len() <= 1 {
        let mut rows = Vec::with_capacity(overrides.len());
        for ov in overrides {
            let t0 = std::time::Instant::now();
            rows.push(execute_single(cfg, ov)?);
            eprintln!("row {} solved in {:.3}s", rows.len(), t0.elapsed().as_secs_f64());
        }
        return Ok(rows);
    }
    let mut results: Vec<Option<Result<RowOutput, RunError>>> =
        (0..overrides.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results_mutex = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= overrides.len() {
                    break;
                }
                let t0 = std::time::Instant::now();
                let out = execute_single(cfg, &overrides[i]);
                eprintln!("row {} solved in {:.3}s", i + 1, t0.elapsed().as_secs_f64());
                results_mutex.lock().unwrap()[i] = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

fn fmt_float(v: f64) -> String {
    // Scientific notation with 12 fractional digits (13 significant).
    format!("{v:.12e}")
}

pub fn probe_names(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.probes.is_empty() {
        default_probes(cfg).iter().map(|p| p.name.clone()).collect()
    } else {
        cfg.probes.iter().map(|p| p.name.clone()).collect()
    }
}

pub fn write_report_csv(
    path: &Path,
    probe_names: &[String],
    rows: &[RowOutput],
) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    let mut header = vec![
        "n_sources".to_string(),
        "n_nodes".to_string(),
        "alpha".to_string(),
        "delta".to_string(),
        "radius".to_string(),
        "residual_norm".to_string(),
        "solution_norm".to_string(),
        "condition_estimate".to_string(),
        "effective_rank".to_string(),
        "alpha_used".to_string(),
    ];
    for name in probe_names {
        header.push(format!("field_error_{name}"));
    }
    header.push("flags".to_string());
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        let mut cells = vec![
            row.n_sources.to_string(),
            row.n_nodes.to_string(),
            fmt_float(row.alpha),
            fmt_float(row.delta),
            fmt_float(row.radius),
            fmt_float(row.residual_norm),
            fmt_float(row.solution_norm),
            fmt_float(row.condition_estimate),
            row.effective_rank.to_string(),
            fmt_float(row.alpha_used),
        ];
        for e in &row.field_errors {
            cells.push(fmt_float(*e));
        }
        cells.push(row.flags.join("; "));
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_field_csv(path: &Path, dim: usize, row: &RowOutput) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    if dim == 2 {
        writeln!(f, "x,y,component,value")?;
    } else {
        writeln!(f, "x,y,z,component,value")?;
    }
    for (p, point) in row.field_points.iter().enumerate() {
        for c in 0..row.k {
            let v = row.field_values[p * row.k + c];
            if dim == 2 {
                writeln!(
                    f,
                    "{},{},{c},{}",
                    fmt_float(point.x),
                    fmt_float(point.y),
                    fmt_float(v)
                )?;
            } else {
                writeln!(
                    f,
                    "{},{},{},{c},{}",
                    fmt_float(point.x),
                    fmt_float(point.y),
                    fmt_float(point.z),
                    fmt_float(v)
                )?;
            }
        }
    }
    Ok(())
}

/// Full harness run: solves/sweeps and writes the CSV pair into `out_dir`.
pub fn run(cfg: &ExperimentConfig, study: StudyKind, out_dir: &Path) -> Result<Outcome, RunError> {
    let overrides = study_overrides(cfg, study)?;
    let rows = run_rows(cfg, &overrides)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Config(format!("cannot create output dir: {e}")))?;
    let names = probe_names(cfg);
    write_report_csv(&out_dir.join("report.csv"), &names, &rows)
        .map_err(|e| RunError::Config(format!("cannot write report.csv: {e}")))?;
    let dim = match cfg.operator.kind {
        OperatorKindConfig::Laplace2d => 2,
        _ => 3,
    };
    let last = rows.last().expect("at least one row");
    write_field_csv(&out_dir.join("field.csv"), dim, last)
        .map_err(|e| RunError::Config(format!("cannot write field.csv: {e}")))?;
    let flagged = rows.iter().any(|r| !r.flags.is_empty());
    Ok(if flagged { Outcome::Flagged } else { Outcome::Clean })
}

/// Deterministic pseudo-random points for the kernel self-checks.
fn check_points(dim: usize, n: usize) -> Vec<(Point, Point)> {
    // Low-discrepancy angles, radii in [0.5, 1.5].
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * (i as f64 * 0.618_033_988_749_894_9).fract();
        let b = std::f64::consts::PI * (i as f64 * 0.754_877_666_246_692_9).fract();
        let r = 0.5 + (i as f64 * 0.569_840_290_998_053_3).fract();
        let x = if dim == 2 {
            Point::new(r * a.cos(), r * a.sin(), 0.0)
        } else {
            Point::new(
                r * b.sin() * a.cos(),
                r * b.sin() * a.sin(),
                r * b.cos(),
            )
        };
        let y = Point::zeros();
        out.push((x, y));
    }
    out
}

/// Kernel invariant suite for one operator: residual size and O(h^2)
/// decay, kernel symmetry, and conormal-vs-finite-difference agreement.
pub fn check_kernel(op: &OperatorSpec) -> bool {
    let dim = op.ambient_dim();
    let mut ok = true;
    for (x, y) in check_points(dim, 20) {
        let r1 = pde_residual(op, y, x, 1e-3);
        let r2 = pde_residual(op, y, x, 5e-4);
        if !(r1 < 1e-4) {
            ok = false;
        }
        if !(r1 / r2 > 2.5 && r1 / r2 < 6.0) {
            ok = false;
        }
        // Symmetry.
        let a = phi(op, x, y).expect("separated");
        let b = phi(op, y, x).expect("separated");
        let k = op.component_count();
        for i in 0..k {
            for j in 0..k {
                if (a.get(i, j) - b.get(j, i)).abs() > 1e-12 {
                    ok = false;
                }
            }
        }
        // Conormal against a central difference of phi.
        let nu = (x - y).normalize();
        let h = 1e-6;
        let exact = conormal_kernel_x(op, x, nu, y).expect("separated");
        for i in 0..k {
            for j in 0..k {
                let fp = phi(op, x + h * nu, y).unwrap().get(i, j);
                let fm = phi(op, x - h * nu, y).unwrap().get(i, j);
                let fd = (fp - fm) / (2.0 * h);
                // Compare only the pure normal-derivative part for scalars.
                if k == 1 && (exact.get(i, j) - fd).abs() > 1e-6 {
                    ok = false;
                }
            }
        }
    }
    ok
}

/// Runs the kernel suite for all four operators (using the configured
/// Helmholtz and Lame parameters when a config is supplied). Prints one
/// PASS/FAIL line per operator.
pub fn check_kernels(cfg: Option<&ExperimentConfig>) -> Outcome {
    let (wavenumber, mu, lambda) = match cfg {
        Some(c) => (c.operator.wavenumber, c.operator.mu, c.operator.lambda),
        None => (1.0, 1.0, 1.0),
    };
    let ops: Vec<(&str, OperatorSpec)> = vec![
        ("laplace2d", OperatorSpec::laplace_2d()),
        ("laplace3d", OperatorSpec::laplace_3d()),
        (
            "helmholtz3d",
            OperatorSpec::helmholtz_3d(wavenumber, HelmholtzBranch::Decaying)
                .expect("positive wavenumber"),
        ),
        (
            "lame3d",
            OperatorSpec::lame_3d(mu, lambda).expect("valid Lame constants"),
        ),
    ];
    let mut all_ok = true;
    for (name, op) in &ops {
        let ok = check_kernel(op);
        println!("{name} {}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    }
    if all_ok {
        Outcome::Clean
    } else {
        Outcome::Flagged
    }
}
