//! Flat sectioned key-value experiment configs.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments, arrays
//! as comma lists. Every diagnostic carries the offending line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use ext_solver_core::geometry::Point;
use ext_solver_core::kernels::HelmholtzBranch;
use ext_solver_core::problems::Reduction;

#[derive(Debug, Error)]
#[error("{path}:{line}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(path: &str, line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKindConfig {
    Laplace2d,
    Laplace3d,
    Helmholtz3d,
    Lame3d,
}

#[derive(Debug, Clone)]
pub struct OperatorConfig {
    pub kind: OperatorKindConfig,
    pub wavenumber: f64,
    pub branch: HelmholtzBranch,
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellKind {
    Circle,
    Ellipse,
    Sphere,
    Ellipsoid,
    Star,
    Triangulated,
}

#[derive(Debug, Clone)]
pub struct ShellConfig {
    pub kind: ShellKind,
    pub center: Point,
    pub radius: f64,
    pub axes: [f64; 3],
    pub cos_amps: Vec<f64>,
    pub sin_amps: Vec<f64>,
    pub mesh_file: Option<PathBuf>,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    InnerDirichlet,
    Continuation,
    Cauchy,
    DirichletExtension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodConfig {
    Mfs,
    SingleLayer,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub method: MethodConfig,
    pub reduction: Reduction,
    pub mfs_sources: usize,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub source_point: Option<Point>,
    pub component: usize,
    pub noise: f64,
    pub seed: u64,
    pub boundary_data_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegMethodConfig {
    Tikhonov,
    TikhonovScaled,
    Tsvd,
}

#[derive(Debug, Clone)]
pub struct RegularizationConfig {
    pub method: RegMethodConfig,
    pub alpha: f64,
    pub alpha_rel: f64,
    pub tau: f64,
    pub discrepancy: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct StudyConfig {
    pub n_list: Vec<usize>,
    pub node_list: Vec<usize>,
    pub noise_list: Vec<f64>,
    pub radius_list: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub name: String,
    pub is_sphere: bool,
    pub radius: f64,
    pub count: usize,
    pub center: Point,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub operator: OperatorConfig,
    pub inner: ShellConfig,
    pub middle: Option<ShellConfig>,
    pub outer: Option<ShellConfig>,
    pub probe_shell: Option<ShellConfig>,
    pub problem: ProblemConfig,
    pub data: DataConfig,
    pub reg: RegularizationConfig,
    pub study: StudyConfig,
    pub probes: Vec<ProbeConfig>,
    pub output_dir: Option<PathBuf>,
}

/// One parsed `key = value` with its source line.
#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Default)]
struct Sections {
    // section -> key -> entry; keys keep their declaration order per section.
    map: BTreeMap<String, Vec<(String, Entry)>>,
    order: Vec<String>,
}

impl Sections {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let entries = self.map.get_mut(section)?;
        for (k, e) in entries.iter_mut() {
            if k == key && !e.used {
                e.used = true;
                return Some((e.value.clone(), e.line));
            }
        }
        None
    }

    fn section_lines(&self, section: &str) -> Vec<(String, usize)> {
        self.map
            .get(section)
            .map(|entries| {
                entries
                    .iter()
                    .map(|(k, e)| (k.clone(), e.line))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn has(&self, section: &str) -> bool {
        self.map.contains_key(section)
    }

    fn unused(&self) -> Option<(String, String, usize)> {
        for section in &self.order {
            if let Some(entries) = self.map.get(section) {
                for (k, e) in entries {
                    if !e.used {
                        return Some((section.clone(), k.clone(), e.line));
                    }
                }
            }
        }
        None
    }
}

fn parse_sections(path_label: &str, text: &str) -> Result<Sections, ConfigError> {
    let mut sections = Sections::default();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| {
                ConfigError::new(path_label, line_no, "unterminated section header")
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(ConfigError::new(path_label, line_no, "empty section name"));
            }
            sections.map.entry(name.clone()).or_default();
            if !sections.order.contains(&name) {
                sections.order.push(name.clone());
            }
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(
                path_label,
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let section = current.clone().ok_or_else(|| {
            ConfigError::new(path_label, line_no, "key outside of any [section]")
        })?;
        sections.map.get_mut(&section).unwrap().push((
            key.trim().to_string(),
            Entry {
                value: value.trim().to_string(),
                line: line_no,
                used: false,
            },
        ));
    }
    Ok(sections)
}

struct Reader<'a> {
    path: &'a str,
    sections: Sections,
}

impl<'a> Reader<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.path, line, message)
    }

    fn optional(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.sections.take(section, key)
    }

    fn required(&mut self, section: &str, key: &str) -> Result<(String, usize), ConfigError> {
        self.optional(section, key).ok_or_else(|| {
            ConfigError::new(
                self.path,
                0,
                format!("missing required key `{key}` in section [{section}]"),
            )
        })
    }

    fn parse_f64(&self, raw: &str, line: usize) -> Result<f64, ConfigError> {
        raw.parse::<f64>()
            .map_err(|_| self.err(line, format!("expected a number, got `{raw}`")))
    }

    fn parse_usize(&self, raw: &str, line: usize) -> Result<usize, ConfigError> {
        raw.parse::<usize>()
            .map_err(|_| self.err(line, format!("expected a nonnegative integer, got `{raw}`")))
    }

    fn parse_list_f64(&self, raw: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
        raw.split(',')
            .map(|s| self.parse_f64(s.trim(), line))
            .collect()
    }

    fn parse_list_usize(&self, raw: &str, line: usize) -> Result<Vec<usize>, ConfigError> {
        raw.split(',')
            .map(|s| self.parse_usize(s.trim(), line))
            .collect()
    }

    fn parse_point(&self, raw: &str, line: usize, dim: usize) -> Result<Point, ConfigError> {
        let vals = self.parse_list_f64(raw, line)?;
        if vals.len() != dim {
            return Err(self.err(
                line,
                format!("expected {dim} coordinates, got {}", vals.len()),
            ));
        }
        let mut p = Point::zeros();
        for (i, v) in vals.iter().enumerate() {
            p[i] = *v;
        }
        Ok(p)
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(&label, 0, format!("cannot read config: {e}")))?;
    parse_config_str(&label, &text)
}

/// Known sections and their keys; [probes] accepts arbitrary names.
const KNOWN_SECTIONS: &[(&str, &[&str])] = &[
    ("operator", &["kind", "wavenumber", "branch", "mu", "lambda"]),
    ("problem", &["kind", "method", "reduction", "mfs_sources"]),
    (
        "data",
        &["source_point", "component", "noise", "seed", "boundary_data_file"],
    ),
    (
        "regularization",
        &["method", "alpha", "alpha_rel", "tau", "selection", "delta"],
    ),
    ("study", &["n_list", "node_list", "noise_list", "radius_list"]),
    ("output", &["dir"]),
];

const SHELL_KEYS: &[&str] = &[
    "kind", "center", "radius", "a", "b", "c", "cos_amps", "sin_amps", "mesh_file", "n_nodes",
];

fn validate_names(label: &str, sections: &Sections) -> Result<(), ConfigError> {
    for section in &sections.order {
        let allowed: Option<&[&str]> = if section == "probes" {
            None // any probe name
        } else if section.starts_with("geometry.") {
            let shell = &section["geometry.".len()..];
            if !["inner", "middle", "outer", "probe"].contains(&shell) {
                let line = sections
                    .section_lines(section)
                    .first()
                    .map(|(_, l)| *l)
                    .unwrap_or(0);
                return Err(ConfigError::new(
                    label,
                    line,
                    format!("unknown geometry shell `{shell}` (expected inner/middle/outer/probe)"),
                ));
            }
            Some(SHELL_KEYS)
        } else {
            match KNOWN_SECTIONS.iter().find(|(name, _)| name == section) {
                Some((_, keys)) => Some(keys),
                None => {
                    let line = sections
                        .section_lines(section)
                        .first()
                        .map(|(_, l)| *l)
                        .unwrap_or(0);
                    return Err(ConfigError::new(
                        label,
                        line,
                        format!("unknown section [{section}]"),
                    ));
                }
            }
        };
        let mut seen = Vec::new();
        for (key, line) in sections.section_lines(section) {
            if let Some(allowed) = allowed {
                if !allowed.contains(&key.as_str()) {
                    return Err(ConfigError::new(
                        label,
                        line,
                        format!("unknown key `{key}` in section [{section}]"),
                    ));
                }
            }
            if seen.contains(&key) {
                return Err(ConfigError::new(
                    label,
                    line,
                    format!("duplicate key `{key}` in section [{section}]"),
                ));
            }
            seen.push(key);
        }
    }
    Ok(())
}

pub fn parse_config_str(label: &str, text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = parse_sections(label, text)?;
    validate_names(label, &sections)?;
    let mut r = Reader {
        path: label,
        sections,
    };

    let operator = parse_operator(&mut r)?;
    let dim = match operator.kind {
        OperatorKindConfig::Laplace2d => 2,
        _ => 3,
    };

    let inner = parse_shell(&mut r, "geometry.inner", dim)?
        .ok_or_else(|| ConfigError::new(label, 0, "missing [geometry.inner] section"))?;
    let middle = parse_shell(&mut r, "geometry.middle", dim)?;
    let outer = parse_shell(&mut r, "geometry.outer", dim)?;
    let probe_shell = parse_shell(&mut r, "geometry.probe", dim)?;

    let problem = parse_problem(&mut r)?;
    let data = parse_data(&mut r, dim)?;
    let reg = parse_reg(&mut r)?;
    let study = parse_study(&mut r)?;
    let probes = parse_probes(&mut r, dim)?;
    let output_dir = r
        .optional("output", "dir")
        .map(|(v, _)| PathBuf::from(v));

    if let Some((section, key, line)) = r.sections.unused() {
        return Err(ConfigError::new(
            label,
            line,
            format!("unknown key `{key}` in section [{section}]"),
        ));
    }
    Ok(ExperimentConfig {
        operator,
        inner,
        middle,
        outer,
        probe_shell,
        problem,
        data,
        reg,
        study,
        probes,
        output_dir,
    })
}

fn parse_operator(r: &mut Reader) -> Result<OperatorConfig, ConfigError> {
    let (kind_raw, kind_line) = r.required("operator", "kind")?;
    let kind = match kind_raw.as_str() {
        "laplace2d" => OperatorKindConfig::Laplace2d,
        "laplace3d" => OperatorKindConfig::Laplace3d,
        "helmholtz3d" => OperatorKindConfig::Helmholtz3d,
        "lame3d" => OperatorKindConfig::Lame3d,
        other => {
            return Err(r.err(kind_line, format!("unknown operator kind `{other}`")));
        }
    };
    let wavenumber = match r.optional("operator", "wavenumber") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1.0,
    };
    let branch = match r.optional("operator", "branch") {
        Some((v, line)) => match v.as_str() {
            "decaying" => HelmholtzBranch::Decaying,
            "growing" => HelmholtzBranch::Growing,
            other => return Err(r.err(line, format!("unknown branch `{other}`"))),
        },
        None => HelmholtzBranch::Decaying,
    };
    let mu = match r.optional("operator", "mu") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1.0,
    };
    let lambda = match r.optional("operator", "lambda") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1.0,
    };
    Ok(OperatorConfig {
        kind,
        wavenumber,
        branch,
        mu,
        lambda,
    })
}

fn parse_shell(
    r: &mut Reader,
    section: &str,
    dim: usize,
) -> Result<Option<ShellConfig>, ConfigError> {
    if !r.sections.has(section) {
        return Ok(None);
    }
    let (kind_raw, kind_line) = r.required(section, "kind")?;
    let kind = match kind_raw.as_str() {
        "circle" => ShellKind::Circle,
        "ellipse" => ShellKind::Ellipse,
        "sphere" => ShellKind::Sphere,
        "ellipsoid" => ShellKind::Ellipsoid,
        "star" => ShellKind::Star,
        "triangulated" => ShellKind::Triangulated,
        other => return Err(r.err(kind_line, format!("unknown shape kind `{other}`"))),
    };
    let shape_dim = match kind {
        ShellKind::Circle | ShellKind::Ellipse | ShellKind::Star => 2,
        _ => 3,
    };
    if shape_dim != dim {
        return Err(r.err(
            kind_line,
            format!("shape `{kind_raw}` is {shape_dim}D but the operator is {dim}D"),
        ));
    }
    let center = match r.optional(section, "center") {
        Some((v, line)) => r.parse_point(&v, line, dim)?,
        None => Point::zeros(),
    };
    let radius = match r.optional(section, "radius") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1.0,
    };
    let mut axes = [1.0; 3];
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        if let Some((v, line)) = r.optional(section, name) {
            axes[i] = r.parse_f64(&v, line)?;
        }
    }
    let cos_amps = match r.optional(section, "cos_amps") {
        Some((v, line)) => r.parse_list_f64(&v, line)?,
        None => Vec::new(),
    };
    let sin_amps = match r.optional(section, "sin_amps") {
        Some((v, line)) => r.parse_list_f64(&v, line)?,
        None => Vec::new(),
    };
    let mesh_file = r.optional(section, "mesh_file").map(|(v, _)| PathBuf::from(v));
    if kind == ShellKind::Triangulated && mesh_file.is_none() {
        return Err(r.err(kind_line, "triangulated shells need `mesh_file`"));
    }
    let n_nodes = match r.optional(section, "n_nodes") {
        Some((v, line)) => r.parse_usize(&v, line)?,
        None => if dim == 2 { 128 } else { 400 },
    };
    Ok(Some(ShellConfig {
        kind,
        center,
        radius,
        axes,
        cos_amps,
        sin_amps,
        mesh_file,
        n_nodes,
    }))
}

fn parse_problem(r: &mut Reader) -> Result<ProblemConfig, ConfigError> {
    let (kind_raw, kind_line) = r.required("problem", "kind")?;
    let kind = match kind_raw.as_str() {
        "inner-dirichlet" => ProblemKind::InnerDirichlet,
        "continuation" => ProblemKind::Continuation,
        "cauchy" => ProblemKind::Cauchy,
        "dirichlet-extension" => ProblemKind::DirichletExtension,
        other => return Err(r.err(kind_line, format!("unknown problem kind `{other}`"))),
    };
    let method = match r.optional("problem", "method") {
        Some((v, line)) => match v.as_str() {
            "mfs" => MethodConfig::Mfs,
            "single-layer" => MethodConfig::SingleLayer,
            other => return Err(r.err(line, format!("unknown method `{other}`"))),
        },
        None => MethodConfig::Mfs,
    };
    let reduction = match r.optional("problem", "reduction") {
        Some((v, line)) => match v.as_str() {
            "probe" => Reduction::Probe,
            "pv" => Reduction::Pv,
            "hat" => Reduction::Hat,
            other => return Err(r.err(line, format!("unknown reduction `{other}`"))),
        },
        None => Reduction::Probe,
    };
    let mfs_sources = match r.optional("problem", "mfs_sources") {
        Some((v, line)) => r.parse_usize(&v, line)?,
        None => 64,
    };
    Ok(ProblemConfig {
        kind,
        method,
        reduction,
        mfs_sources,
    })
}

fn parse_data(r: &mut Reader, dim: usize) -> Result<DataConfig, ConfigError> {
    let source_point = match r.optional("data", "source_point") {
        Some((v, line)) => Some(r.parse_point(&v, line, dim)?),
        None => None,
    };
    let component = match r.optional("data", "component") {
        Some((v, line)) => r.parse_usize(&v, line)?,
        None => 0,
    };
    let noise = match r.optional("data", "noise") {
        Some((v, line)) => {
            let n = r.parse_f64(&v, line)?;
            if n < 0.0 {
                return Err(r.err(line, "noise level must be nonnegative"));
            }
            n
        }
        None => 0.0,
    };
    let seed = match r.optional("data", "seed") {
        Some((v, line)) => v
            .parse::<u64>()
            .map_err(|_| r.err(line, format!("expected an integer seed, got `{v}`")))?,
        None => 0,
    };
    let boundary_data_file = r
        .optional("data", "boundary_data_file")
        .map(|(v, _)| PathBuf::from(v));
    if source_point.is_none() && boundary_data_file.is_none() {
        return Err(ConfigError::new(
            r.path,
            0,
            "section [data] needs either `source_point` or `boundary_data_file`",
        ));
    }
    Ok(DataConfig {
        source_point,
        component,
        noise,
        seed,
        boundary_data_file,
    })
}

fn parse_reg(r: &mut Reader) -> Result<RegularizationConfig, ConfigError> {
    let method = match r.optional("regularization", "method") {
        Some((v, line)) => match v.as_str() {
            "tikhonov" => RegMethodConfig::Tikhonov,
            "tikhonov-scaled" => RegMethodConfig::TikhonovScaled,
            "tsvd" => RegMethodConfig::Tsvd,
            other => return Err(r.err(line, format!("unknown regularization method `{other}`"))),
        },
        None => RegMethodConfig::TikhonovScaled,
    };
    let alpha = match r.optional("regularization", "alpha") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 0.0,
    };
    let alpha_rel = match r.optional("regularization", "alpha_rel") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1e-12,
    };
    let tau = match r.optional("regularization", "tau") {
        Some((v, line)) => r.parse_f64(&v, line)?,
        None => 1e-12,
    };
    let discrepancy = match r.optional("regularization", "selection") {
        Some((v, line)) => match v.as_str() {
            "fixed" => None,
            "discrepancy" => {
                let (d, dline) = r.required("regularization", "delta")?;
                Some(r.parse_f64(&d, dline)?)
            }
            other => return Err(r.err(line, format!("unknown selection `{other}`"))),
        },
        None => None,
    };
    Ok(RegularizationConfig {
        method,
        alpha,
        alpha_rel,
        tau,
        discrepancy,
    })
}

fn parse_study(r: &mut Reader) -> Result<StudyConfig, ConfigError> {
    let mut study = StudyConfig::default();
    if let Some((v, line)) = r.optional("study", "n_list") {
        study.n_list = r.parse_list_usize(&v, line)?;
    }
    if let Some((v, line)) = r.optional("study", "node_list") {
        study.node_list = r.parse_list_usize(&v, line)?;
    }
    if let Some((v, line)) = r.optional("study", "noise_list") {
        study.noise_list = r.parse_list_f64(&v, line)?;
    }
    if let Some((v, line)) = r.optional("study", "radius_list") {
        study.radius_list = r.parse_list_f64(&v, line)?;
    }
    Ok(study)
}

fn parse_probes(r: &mut Reader, dim: usize) -> Result<Vec<ProbeConfig>, ConfigError> {
    let mut probes = Vec::new();
    for (name, _) in r.sections.section_lines("probes") {
        let (value, line) = match r.optional("probes", &name) {
            Some(v) => v,
            None => continue, // already consumed (duplicate name)
        };
        let parts: Vec<&str> = value.split(',').map(str::trim).collect();
        if parts.len() < 3 {
            return Err(r.err(line, "probe needs `kind,radius,count[,center...]`"));
        }
        let is_sphere = match parts[0] {
            "circle" => false,
            "sphere" => true,
            other => return Err(r.err(line, format!("unknown probe kind `{other}`"))),
        };
        if is_sphere != (dim == 3) {
            return Err(r.err(line, "probe dimensionality does not match the operator"));
        }
        let radius = r.parse_f64(parts[1], line)?;
        let count = r.parse_usize(parts[2], line)?;
        let center = if parts.len() > 3 {
            let coords = parts[3..].join(",");
            r.parse_point(&coords, line, dim)?
        } else {
            Point::zeros()
        };
        probes.push(ProbeConfig {
            name,
            is_sphere,
            radius,
            count,
            center,
        });
    }
    Ok(probes)
}
