//! Line-oriented `key = value` run configuration with `#` comments and
//! dotted section prefixes. Unknown keys are rejected; every applied default
//! and every override lands in the run log exactly once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Grid;
use crate::params::{build_params, ParamError, PhysicalParams};
use crate::solver::{Amplitudes, Scheme, SolverConfig};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: missing `=` separator")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    TypeMismatch {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("key `{key}`: {message}")]
    Constraint { key: String, message: String },
    #[error("override `{arg}` is not of the form key=value")]
    BadOverride { arg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Epsilon,
    Stiffness,
}

/// Fully validated run configuration (physics, grid, solver, initial data,
/// experiment selection, output directory).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub mach: f64,
    pub reynolds: f64,
    pub prandtl: f64,
    pub visc_ratio: f64,
    pub chi: f64,
    pub n1: usize,
    pub n2: usize,
    pub solver: SolverConfig,
    pub amplitudes: Amplitudes,
    pub sweep_kind: SweepKind,
    pub eps_list: Vec<f64>,
    pub sweep_parallel: bool,
    /// Reynolds number used for the stiffness-benchmark template (large, so
    /// the viscous explicit limit does not mask the acoustic one).
    pub stiffness_reynolds: f64,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "physics.gamma",
    "physics.mach",
    "physics.reynolds",
    "physics.prandtl",
    "physics.visc_ratio",
    "physics.chi",
    "grid.n1",
    "grid.n2",
    "solver.scheme",
    "solver.dt",
    "solver.t_end",
    "solver.diag_stride",
    "solver.dealias",
    "solver.cfl_acoustic",
    "solver.cfl_viscous",
    "solver.linearized",
    "initial.a_phi",
    "initial.a_psi",
    "initial.a_theta",
    "sweep.kind",
    "sweep.eps_list",
    "sweep.parallel",
    "sweep.stiffness_reynolds",
    "output.dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    File,
    Override,
}

#[derive(Debug, Default)]
struct RawConfig {
    values: BTreeMap<String, (String, usize, Source)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line_text) in text.lines().enumerate() {
            let line = idx + 1;
            let body = match line_text.find('#') {
                Some(p) => &line_text[..p],
                None => line_text,
            };
            if body.trim().is_empty() {
                continue;
            }
            let eq = body.find('=').ok_or(ConfigError::Syntax { line })?;
            let key = body[..eq].trim().to_string();
            let value = body[eq + 1..].trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            if raw.values.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line, key });
            }
            raw.values.insert(key, (value, line, Source::File));
        }
        Ok(raw)
    }

    fn apply_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let eq = arg.find('=').ok_or_else(|| ConfigError::BadOverride {
            arg: arg.to_string(),
        })?;
        let key = arg[..eq].trim().to_string();
        let value = arg[eq + 1..].trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line: 0, key });
        }
        self.values.insert(key, (value, 0, Source::Override));
        Ok(())
    }
}

struct Finalizer<'a> {
    raw: &'a RawConfig,
    log: Vec<String>,
}

impl<'a> Finalizer<'a> {
    fn lookup(&mut self, key: &str, default: &str) -> (String, usize, bool) {
        match self.raw.values.get(key) {
            Some((v, line, src)) => {
                let tag = match src {
                    Source::File => "set",
                    Source::Override => "override",
                };
                self.log.push(format!("{tag} {key} = {v}"));
                (v.clone(), *line, true)
            }
            None => {
                self.log.push(format!("default {key} = {default}"));
                (default.to_string(), 0, false)
            }
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let (v, line, _) = self.lookup(key, &format!("{default}"));
        v.parse().map_err(|_| ConfigError::TypeMismatch {
            line,
            key: key.to_string(),
            expected: "a real number",
            value: v,
        })
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let (v, line, _) = self.lookup(key, &format!("{default}"));
        v.parse().map_err(|_| ConfigError::TypeMismatch {
            line,
            key: key.to_string(),
            expected: "a non-negative integer",
            value: v,
        })
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let (v, line, _) = self.lookup(key, &format!("{default}"));
        match v.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(ConfigError::TypeMismatch {
                line,
                key: key.to_string(),
                expected: "true or false",
                value: v,
            }),
        }
    }

    fn scheme(&mut self, key: &str, default: Scheme) -> Result<Scheme, ConfigError> {
        let (v, line, _) = self.lookup(key, default.name());
        match v.as_str() {
            "imex_cnab" => Ok(Scheme::ImexCnab),
            "explicit_rk4" => Ok(Scheme::ExplicitRk4),
            _ => Err(ConfigError::TypeMismatch {
                line,
                key: key.to_string(),
                expected: "imex_cnab or explicit_rk4",
                value: v,
            }),
        }
    }

    fn sweep_kind(&mut self, key: &str) -> Result<SweepKind, ConfigError> {
        let (v, line, _) = self.lookup(key, "epsilon");
        match v.as_str() {
            "epsilon" => Ok(SweepKind::Epsilon),
            "stiffness" => Ok(SweepKind::Stiffness),
            _ => Err(ConfigError::TypeMismatch {
                line,
                key: key.to_string(),
                expected: "epsilon or stiffness",
                value: v,
            }),
        }
    }

    fn eps_list(&mut self, key: &str, default: &str) -> Result<Vec<f64>, ConfigError> {
        let (v, line, _) = self.lookup(key, default);
        v.split(',')
            .map(|piece| {
                piece.trim().parse().map_err(|_| ConfigError::TypeMismatch {
                    line,
                    key: key.to_string(),
                    expected: "a comma-separated list of reals",
                    value: v.clone(),
                })
            })
            .collect()
    }
}

/// Default Mach number: eps = 0.1 at gamma = 1.4.
pub fn default_mach() -> f64 {
    0.1 / 1.4_f64.sqrt()
}

fn param_error_key(e: &ParamError) -> &'static str {
    match e {
        ParamError::Gamma(_) => "physics.gamma",
        ParamError::Mach(_) => "physics.mach",
        ParamError::Reynolds(_) => "physics.reynolds",
        ParamError::Prandtl(_) => "physics.prandtl",
        ParamError::Chi(_) => "physics.chi",
        ParamError::BulkViscosity(_) => "physics.visc_ratio",
        ParamError::NotFinite(name) => match *name {
            "gamma" => "physics.gamma",
            "mach" => "physics.mach",
            "reynolds" => "physics.reynolds",
            "prandtl" => "physics.prandtl",
            "chi" => "physics.chi",
            _ => "physics.visc_ratio",
        },
    }
}

/// Parses a configuration text, applying defaults for omitted keys. Returns
/// the validated config and the run log (one line per key).
pub fn parse_config(text: &str) -> Result<(RunConfig, Vec<String>), ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Same, with `--set key=value` overrides applied on top of the file.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    for arg in overrides {
        raw.apply_override(arg)?;
    }
    let mut fin = Finalizer {
        raw: &raw,
        log: Vec::new(),
    };
    let cfg = RunConfig {
        gamma: fin.f64("physics.gamma", 1.4)?,
        mach: fin.f64("physics.mach", default_mach())?,
        reynolds: fin.f64("physics.reynolds", 1.0)?,
        prandtl: fin.f64("physics.prandtl", 0.72)?,
        visc_ratio: fin.f64("physics.visc_ratio", 1.0 / 3.0)?,
        chi: fin.f64("physics.chi", 1.0)?,
        n1: fin.usize("grid.n1", 64)?,
        n2: fin.usize("grid.n2", 64)?,
        solver: SolverConfig {
            scheme: fin.scheme("solver.scheme", Scheme::ImexCnab)?,
            dt: fin.f64("solver.dt", 2e-3)?,
            t_end: fin.f64("solver.t_end", 5.0)?,
            diag_stride: fin.usize("solver.diag_stride", 25)?,
            dealias_on: fin.bool("solver.dealias", true)?,
            cfl_acoustic: fin.f64("solver.cfl_acoustic", 0.5)?,
            cfl_viscous: fin.f64("solver.cfl_viscous", 0.2)?,
            linearized: fin.bool("solver.linearized", false)?,
        },
        amplitudes: Amplitudes::new(
            fin.f64("initial.a_phi", 1.0)?,
            fin.f64("initial.a_psi", 1.0)?,
            fin.f64("initial.a_theta", 1.0)?,
        ),
        sweep_kind: fin.sweep_kind("sweep.kind")?,
        eps_list: fin.eps_list("sweep.eps_list", "0.2,0.1,0.05,0.025")?,
        sweep_parallel: fin.bool("sweep.parallel", false)?,
        stiffness_reynolds: fin.f64("sweep.stiffness_reynolds", 300.0)?,
        output_dir: PathBuf::from(fin.lookup("output.dir", "out").0),
    };
    let log = fin.log;
    cfg.validate()?;
    Ok((cfg, log))
}

impl RunConfig {
    /// Builds the validated physical parameters, naming the offending key on
    /// constraint violations.
    pub fn params(&self) -> Result<PhysicalParams, ConfigError> {
        build_params(
            self.gamma,
            self.mach,
            self.reynolds,
            self.prandtl,
            self.visc_ratio,
            self.chi,
        )
        .map_err(|e| ConfigError::Constraint {
            key: param_error_key(&e).to_string(),
            message: e.to_string(),
        })
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.n1, self.n2).map_err(|e| ConfigError::Constraint {
            key: if matches!(e, crate::grid::GridError::BadN1(_)) {
                "grid.n1".to_string()
            } else {
                "grid.n2".to_string()
            },
            message: e.to_string(),
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.grid()?;
        self.solver.validate().map_err(|e| ConfigError::Constraint {
            key: "solver".to_string(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Serializes every key explicitly; parsing the output reproduces the
    /// config exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("physics.gamma", format!("{}", self.gamma));
        kv("physics.mach", format!("{}", self.mach));
        kv("physics.reynolds", format!("{}", self.reynolds));
        kv("physics.prandtl", format!("{}", self.prandtl));
        kv("physics.visc_ratio", format!("{}", self.visc_ratio));
        kv("physics.chi", format!("{}", self.chi));
        kv("grid.n1", format!("{}", self.n1));
        kv("grid.n2", format!("{}", self.n2));
        kv("solver.scheme", self.solver.scheme.name().to_string());
        kv("solver.dt", format!("{}", self.solver.dt));
        kv("solver.t_end", format!("{}", self.solver.t_end));
        kv("solver.diag_stride", format!("{}", self.solver.diag_stride));
        kv("solver.dealias", format!("{}", self.solver.dealias_on));
        kv("solver.cfl_acoustic", format!("{}", self.solver.cfl_acoustic));
        kv("solver.cfl_viscous", format!("{}", self.solver.cfl_viscous));
        kv("solver.linearized", format!("{}", self.solver.linearized));
        kv("initial.a_phi", format!("{}", self.amplitudes.a_phi));
        kv("initial.a_psi", format!("{}", self.amplitudes.a_psi));
        kv("initial.a_theta", format!("{}", self.amplitudes.a_theta));
        kv(
            "sweep.kind",
            match self.sweep_kind {
                SweepKind::Epsilon => "epsilon".to_string(),
                SweepKind::Stiffness => "stiffness".to_string(),
            },
        );
        kv(
            "sweep.eps_list",
            self.eps_list
                .iter()
                .map(|e| format!("{e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("sweep.parallel", format!("{}", self.sweep_parallel));
        kv(
            "sweep.stiffness_reynolds",
            format!("{}", self.stiffness_reynolds),
        );
        kv("output.dir", self.output_dir.display().to_string());
        s
    }
}
