//! Experiment configuration.
//!
//! A run is described by a flat text file of `key = value` lines with `#`
//! comments and dotted section prefixes (`problem.c = 0.1`). Every key has a
//! default equal to the reference data set — `c = 0.1`, `d = 0`,
//! `ω = (0.2, 0.5)`, `T = 1/2`, `y0(x) = sin(πx)`, standard weight pair — so
//! an empty file is a valid configuration. Parse errors carry the offending
//! line number.
//!
//! The recognized keys, by section:
//!
//! ```text
//! problem.formulation  mf1 | mf2 | mf3            (default mf1)
//! problem.c            diffusion coefficient      (0.1)
//! problem.d            zeroth-order potential     (0)
//! problem.omega        control support "a,b"      (0.2,0.5)
//! problem.t_final      final time                 (0.5)
//! problem.y0           sine1 | custom-series      (sine1)
//! problem.y0_modes     sine coefficients "1,0.5"  (used with custom-series)
//! problem.epsilon      terminal penalty           (1e-2; mf3 requires 0)
//! problem.r            augmentation parameter     (1)
//! problem.eta          norm parameter             (defaults to r)
//! weights.kind         standard | unit            (standard)
//! weights.k1           exponential constant       (0.75)
//! weights.s            polynomial exponent of ρ0  (1.5)
//! mesh.nx              space cells                (40)
//! mesh.nt              time cells                 (20)
//! mesh.family          list "20x10,40x20,..."     (empty: single nx×nt)
//! solver.path          direct | cg | infsup       (direct)
//! solver.gamma         CG relative tolerance      (1e-10)
//! solver.infsup_tol    power-iteration tolerance  (1e-10)
//! solver.maxit         iteration cap              (30000)
//! solver.dirichlet     eliminate | keep           (eliminate)
//! solver.quad_order    Gauss points per direction (4)
//! oracle.modes         series truncation          (100)
//! oracle.enabled       true | false               (true)
//! output.dir           output directory           ("out")
//! output.dump_matrices true | false               (false)
//! output.dump_fields   true | false               (false)
//! ```

use std::path::PathBuf;

use thiserror::Error;

use crate::assembly::{
    assemble_mf1, assemble_mf2, assemble_mf3norm, AssemblyError, AssemblyOptions, Coefficient,
    Formulation, InitialData, MixedSystem, ProblemSpec,
};
use crate::mesh::{DirichletMode, SpaceTimeMesh};
use crate::weights::{WeightKind, WeightSpec};

/// Errors from reading a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A malformed line; carries the 1-based line number.
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    /// A consistency failure between fields (detected after parsing).
    #[error("{0}")]
    Invalid(String),
}

fn line_err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Line { line, msg: msg.into() }
}

/// Which solution algorithm a run should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Sparse symmetric-indefinite factorization of the full block system.
    Direct,
    /// Conjugate gradient on the dual functional in the multiplier variable.
    Cg,
    /// Power iteration for the discrete inf-sup constant (no solve).
    InfSup,
}

/// Initial-datum selector. The concrete function is always a sine series;
/// `Sine1` is the single first mode used by the reference experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSelector {
    Sine1,
    /// Coefficients of `Σ aₖ sin((k+1)πx)` from `problem.y0_modes`.
    CustomSeries(Vec<f64>),
}

/// Weight-family selector: the standard blow-up pair or unit weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightChoice {
    Standard,
    Unit,
}

/// A fully-resolved run description. See the module docs for the text format.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // problem
    pub formulation: Formulation,
    pub c: f64,
    pub d: f64,
    pub omega: (f64, f64),
    pub t_final: f64,
    pub y0: InitialSelector,
    pub epsilon: f64,
    pub r: f64,
    /// Norm parameter η; `None` means "track r" (the default coupling).
    pub eta: Option<f64>,
    // weights
    pub weight_kind: WeightChoice,
    pub k1: f64,
    pub s: f64,
    // mesh
    pub nx: usize,
    pub nt: usize,
    /// Optional mesh family for table runs; empty means the single `nx × nt`.
    pub family: Vec<(usize, usize)>,
    // solver
    pub path: SolverPath,
    pub gamma: f64,
    pub infsup_tol: f64,
    pub maxit: usize,
    pub dirichlet: DirichletMode,
    pub quad_order: usize,
    // oracle
    pub oracle_modes: usize,
    pub oracle_enabled: bool,
    // output
    pub out_dir: PathBuf,
    pub dump_matrices: bool,
    pub dump_fields: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            formulation: Formulation::Mf1,
            c: 0.1,
            d: 0.0,
            omega: (0.2, 0.5),
            t_final: 0.5,
            y0: InitialSelector::Sine1,
            epsilon: 1e-2,
            r: 1.0,
            eta: None,
            weight_kind: WeightChoice::Standard,
            k1: 0.75,
            s: 1.5,
            nx: 40,
            nt: 20,
            family: Vec::new(),
            path: SolverPath::Direct,
            gamma: 1e-10,
            infsup_tol: 1e-10,
            maxit: 30_000,
            dirichlet: DirichletMode::Eliminate,
            quad_order: 4,
            oracle_modes: 100,
            oracle_enabled: true,
            out_dir: PathBuf::from("out"),
            dump_matrices: false,
            dump_fields: false,
        }
    }
}

fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| line_err(line, format!("{key}: expected a number, got `{value}`")))
}

fn parse_usize(value: &str, key: &str, line: usize) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|_| line_err(line, format!("{key}: expected a nonnegative integer, got `{value}`")))
}

fn parse_bool(value: &str, key: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(line_err(line, format!("{key}: expected true/false, got `{value}`"))),
    }
}

fn parse_pair(value: &str, key: &str, line: usize) -> Result<(f64, f64), ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(line_err(line, format!("{key}: expected `a,b`, got `{value}`")));
    }
    Ok((parse_f64(parts[0], key, line)?, parse_f64(parts[1], key, line)?))
}

fn parse_mesh_list(value: &str, key: &str, line: usize) -> Result<Vec<(usize, usize)>, ConfigError> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (nx, nt) = item
            .split_once(['x', 'X'])
            .ok_or_else(|| line_err(line, format!("{key}: expected `NXxNT`, got `{item}`")))?;
        out.push((
            parse_usize(nx.trim(), key, line)?,
            parse_usize(nt.trim(), key, line)?,
        ));
    }
    if out.is_empty() {
        return Err(line_err(line, format!("{key}: empty mesh list")));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses a configuration text, starting from the defaults.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| line_err(line, format!("expected `key = value`, got `{stripped}`")))?;
            self.set(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "problem.formulation" => {
                self.formulation = match value {
                    "mf1" => Formulation::Mf1,
                    "mf2" => Formulation::Mf2,
                    "mf3" | "mf3norm" => Formulation::Mf3Norm,
                    _ => {
                        return Err(line_err(
                            line,
                            format!("{key}: expected mf1|mf2|mf3, got `{value}`"),
                        ))
                    }
                }
            }
            "problem.c" => self.c = parse_f64(value, key, line)?,
            "problem.d" => self.d = parse_f64(value, key, line)?,
            "problem.omega" => self.omega = parse_pair(value, key, line)?,
            "problem.t_final" => self.t_final = parse_f64(value, key, line)?,
            "problem.y0" => {
                self.y0 = match value {
                    "sine1" => InitialSelector::Sine1,
                    "custom-series" => match self.y0 {
                        InitialSelector::CustomSeries(_) => self.y0.clone(),
                        InitialSelector::Sine1 => InitialSelector::CustomSeries(vec![1.0]),
                    },
                    _ => {
                        return Err(line_err(
                            line,
                            format!("{key}: expected sine1|custom-series, got `{value}`"),
                        ))
                    }
                }
            }
            "problem.y0_modes" => {
                let mut modes = Vec::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    modes.push(parse_f64(item, key, line)?);
                }
                if modes.is_empty() {
                    return Err(line_err(line, format!("{key}: empty coefficient list")));
                }
                self.y0 = InitialSelector::CustomSeries(modes);
            }
            "problem.epsilon" => self.epsilon = parse_f64(value, key, line)?,
            "problem.r" => self.r = parse_f64(value, key, line)?,
            "problem.eta" => self.eta = Some(parse_f64(value, key, line)?),
            "weights.kind" => {
                self.weight_kind = match value {
                    "standard" => WeightChoice::Standard,
                    "unit" => WeightChoice::Unit,
                    _ => {
                        return Err(line_err(
                            line,
                            format!("{key}: expected standard|unit, got `{value}`"),
                        ))
                    }
                }
            }
            "weights.k1" => self.k1 = parse_f64(value, key, line)?,
            "weights.s" => self.s = parse_f64(value, key, line)?,
            "mesh.nx" => self.nx = parse_usize(value, key, line)?,
            "mesh.nt" => self.nt = parse_usize(value, key, line)?,
            "mesh.family" => self.family = parse_mesh_list(value, key, line)?,
            "solver.path" => {
                self.path = match value {
                    "direct" => SolverPath::Direct,
                    "cg" => SolverPath::Cg,
                    "infsup" => SolverPath::InfSup,
                    _ => {
                        return Err(line_err(
                            line,
                            format!("{key}: expected direct|cg|infsup, got `{value}`"),
                        ))
                    }
                }
            }
            "solver.gamma" => self.gamma = parse_f64(value, key, line)?,
            "solver.infsup_tol" => self.infsup_tol = parse_f64(value, key, line)?,
            "solver.maxit" => self.maxit = parse_usize(value, key, line)?,
            "solver.dirichlet" => {
                self.dirichlet = match value {
                    "eliminate" => DirichletMode::Eliminate,
                    "keep" => DirichletMode::Keep,
                    _ => {
                        return Err(line_err(
                            line,
                            format!("{key}: expected eliminate|keep, got `{value}`"),
                        ))
                    }
                }
            }
            "solver.quad_order" => {
                let q = parse_usize(value, key, line)?;
                if q == 0 || q > 16 {
                    return Err(line_err(line, format!("{key}: order must be in 1..=16")));
                }
                self.quad_order = q;
            }
            "oracle.modes" => self.oracle_modes = parse_usize(value, key, line)?,
            "oracle.enabled" => self.oracle_enabled = parse_bool(value, key, line)?,
            "output.dir" => self.out_dir = PathBuf::from(value),
            "output.dump_matrices" => self.dump_matrices = parse_bool(value, key, line)?,
            "output.dump_fields" => self.dump_fields = parse_bool(value, key, line)?,
            _ => return Err(line_err(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// The effective norm parameter: η when set, else r.
    pub fn effective_eta(&self) -> f64 {
        self.eta.unwrap_or(self.r)
    }

    /// The meshes this run covers: the family if one was given, otherwise the
    /// single `nx × nt` grid.
    pub fn meshes(&self) -> Vec<(usize, usize)> {
        if self.family.is_empty() {
            vec![(self.nx, self.nt)]
        } else {
            self.family.clone()
        }
    }

    /// Builds the continuous problem data from the configuration.
    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        let (rho0, rho) = match self.weight_kind {
            WeightChoice::Standard => (
                WeightSpec {
                    kind: WeightKind::PolyExp { s: self.s, k1: self.k1 },
                    t_final: self.t_final,
                },
                WeightSpec {
                    kind: WeightKind::PolyExp { s: 0.0, k1: self.k1 },
                    t_final: self.t_final,
                },
            ),
            WeightChoice::Unit => (
                WeightSpec::unit(self.t_final),
                WeightSpec::unit(self.t_final),
            ),
        };
        let y0 = match &self.y0 {
            InitialSelector::Sine1 => InitialData::SineModes(vec![1.0]),
            InitialSelector::CustomSeries(modes) => InitialData::SineModes(modes.clone()),
        };
        let spec = ProblemSpec {
            c: Coefficient::Const(self.c),
            d: Coefficient::Const(self.d),
            omega: self.omega,
            t_final: self.t_final,
            y0,
            epsilon: self.epsilon,
            r: self.r,
            eta: self.effective_eta(),
            rho0,
            rho,
        };
        spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }

    /// The discretization knobs of this configuration.
    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions { quad_order: self.quad_order, phi_mode: self.dirichlet }
    }

    /// Assembles the configured formulation on an `nx × nt` grid.
    pub fn assemble(&self, nx: usize, nt: usize) -> Result<MixedSystem, AssemblyError> {
        let spec = self
            .problem()
            .map_err(|e| AssemblyError::Config(e.to_string()))?;
        let mesh = SpaceTimeMesh::new(nx, nt, self.t_final)?;
        let opts = self.assembly_options();
        match self.formulation {
            Formulation::Mf1 => assemble_mf1(&mesh, &spec, &opts),
            Formulation::Mf2 => assemble_mf2(&mesh, &spec, &opts),
            Formulation::Mf3Norm => assemble_mf3norm(&mesh, &spec, &opts),
        }
    }
}
