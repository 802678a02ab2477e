//! Run configuration as flat `key = value` text.
//!
//! ```text
//! # physical parameters
//! m = 2
//! rho = 2
//! g = 9.81
//! M = 10
//! # exponents; nu1 defaults to nu2 / (2 - nu2)
//! nu2 = 0.5
//! # discretization
//! kernel_n = 200
//! n_x = 20
//! dt = 0.01
//! t_end = 6
//! # initial data: rigid offset, or profile files with columns s,value
//! xp0 = 0.5
//! xp1 = 0
//! y0_file = y0.csv
//! y1_file = y1.csv
//! settling_threshold = 1e-4
//! out_dir = out
//! ```
//!
//! Blank lines and text after `#` are ignored. Relative paths are resolved
//! against the directory of the configuration file.

use std::path::{Path, PathBuf};

use crate::closed_loop::{InitialData, Profile, DEFAULT_T1_THRESHOLD};
use crate::error::{CraneError, Result};
use crate::model::{CraneParams, UniformGrid};
use crate::transport::cfl_check;

const KEYS: &[&str] = &[
    "m",
    "rho",
    "g",
    "M",
    "nu1",
    "nu2",
    "kernel_n",
    "n_x",
    "dt",
    "t_end",
    "xp0",
    "xp1",
    "y0_file",
    "y1_file",
    "settling_threshold",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: CraneParams,
    pub kernel_n: usize,
    pub n_x: usize,
    pub dt: f64,
    pub t_end: f64,
    pub xp0: f64,
    pub xp1: f64,
    pub y0_file: Option<PathBuf>,
    pub y1_file: Option<PathBuf>,
    pub settling_threshold: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: CraneParams::default(),
            kernel_n: 200,
            n_x: 20,
            dt: 0.01,
            t_end: 6.0,
            xp0: 0.5,
            xp1: 0.0,
            y0_file: None,
            y1_file: None,
            settling_threshold: DEFAULT_T1_THRESHOLD,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(field: &str, rule: impl Into<String>) -> CraneError {
    CraneError::InvalidParameter {
        field: field.into(),
        rule: rule.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.kernel_n < 2 {
            return Err(invalid("kernel_n", "kernel_n must be at least 2"));
        }
        if self.n_x < 2 {
            return Err(invalid("n_x", "n_x must be at least 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "dt must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "t_end must be non-negative"));
        }
        if !(self.settling_threshold > 0.0) {
            return Err(invalid(
                "settling_threshold",
                "settling_threshold must be positive",
            ));
        }
        if !(self.xp0.is_finite() && self.xp1.is_finite()) {
            return Err(invalid("xp0", "platform initial state must be finite"));
        }
        cfl_check(
            self.dt,
            UniformGrid::new(self.n_x).dx(),
            &self.params.derived(),
        )?;
        Ok(())
    }

    /// Sets one key as it would appear in a configuration file; relative
    /// paths stay relative to the working directory. Setting `nu2` also
    /// resets `nu1` to its homogeneous value. No validation is done here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        assign(self, key.trim(), value.trim(), Path::new("")).map_err(|rule| invalid(key, rule))?;
        if key.trim() == "nu2" {
            self.params.nu1 = self.params.homogeneous_nu1();
        }
        Ok(())
    }

    /// Builds the initial data, reading profile files when configured.
    /// Missing profiles default to the rigid values `y0 = xp0`, `y1 = xp1`.
    pub fn initial_data(&self) -> Result<InitialData> {
        let nodes = self.n_x + 1;
        let y0 = match &self.y0_file {
            Some(p) => read_profile(p)?,
            None => Profile::constant(self.xp0, nodes),
        };
        let y1 = match &self.y1_file {
            Some(p) => read_profile(p)?,
            None => Profile::constant(self.xp1, nodes),
        };
        let init = InitialData {
            y0,
            y1,
            xp0: self.xp0,
            xp1: self.xp1,
        };
        init.validate()?;
        Ok(init)
    }
}

fn assign(
    cfg: &mut RunConfig,
    key: &str,
    value: &str,
    base: &Path,
) -> std::result::Result<(), String> {
    let number = || {
        value
            .parse::<f64>()
            .map_err(|_| format!("`{key}` expects a number, found `{value}`"))
    };
    let count = || {
        value
            .parse::<usize>()
            .map_err(|_| format!("`{key}` expects a non-negative integer, found `{value}`"))
    };
    let path = || {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    match key {
        "m" => cfg.params.m = number()?,
        "rho" => cfg.params.rho = number()?,
        "g" => cfg.params.g = number()?,
        "M" => cfg.params.platform_mass = number()?,
        "nu1" => cfg.params.nu1 = number()?,
        "nu2" => cfg.params.nu2 = number()?,
        "kernel_n" => cfg.kernel_n = count()?,
        "n_x" => cfg.n_x = count()?,
        "dt" => cfg.dt = number()?,
        "t_end" => cfg.t_end = number()?,
        "xp0" => cfg.xp0 = number()?,
        "xp1" => cfg.xp1 = number()?,
        "y0_file" => cfg.y0_file = Some(path()),
        "y1_file" => cfg.y1_file = Some(path()),
        "settling_threshold" => cfg.settling_threshold = number()?,
        "out_dir" => cfg.out_dir = path(),
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Parses configuration text. `origin` names the source in error messages
/// and anchors relative paths.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let base = origin.parent().unwrap_or_else(|| Path::new(""));
    let name = origin.display().to_string();
    let mut cfg = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut nu1_set = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| CraneError::Parse {
            path: name.clone(),
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let key = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| err(format!("unknown key `{key}`")))?;
        if seen.contains(&key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        seen.push(key);
        if value.is_empty() {
            return Err(err(format!("missing value for `{key}`")));
        }
        assign(&mut cfg, key, value, base).map_err(err)?;
        nu1_set |= key == "nu1";
    }
    if !nu1_set {
        cfg.params.nu1 = cfg.params.homogeneous_nu1();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CraneError::io(path, e))?;
    parse_config(&text, path)
}

/// Reads a two-column `s,value` CSV. A non-numeric first row is treated
/// as a header.
pub fn read_profile(path: &Path) -> Result<Profile> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CraneError::io(path, io),
            other => CraneError::Parse {
                path: name.clone(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    let (mut s, mut v) = (Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(k + 1);
        let err = |message: String| CraneError::Parse {
            path: name.clone(),
            line,
            message,
        };
        if record.len() != 2 {
            return Err(err(format!("expected 2 columns, found {}", record.len())));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                s.push(a);
                v.push(b);
            }
            _ if k == 0 => continue,
            _ => {
                return Err(err(format!(
                    "non-numeric row `{},{}`",
                    &record[0], &record[1]
                )))
            }
        }
    }
    Profile::new(s, v)
}
