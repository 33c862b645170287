//! JSON run configuration shared by every subcommand.
//!
//! ```json
//! {
//!   "system": {
//!     "oscillators": [
//!       { "mass": "exp(0.1*t)", "omega": 1, "force": "0.2*sin(t)" },
//!       { "mass": { "csv": "m2.csv" }, "omega": 2 }
//!     ],
//!     "coupling": "0.6*exp(0.1*t)",
//!     "hbar": 1.0
//!   },
//!   "interval": { "start": 0, "end": 2 },
//!   "kernel": { "final_x1": { "min": -2, "max": 2, "n": 5 }, ... },
//!   "output": { "directory": "out", "formats": ["csv", "json"] }
//! }
//! ```
//!
//! Expressions are strings in the time-function grammar, bare numbers, or
//! `{"csv": path}` tables (paths relative to the config file).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::GaussianPacket;
use crate::system::{OscillatorSpec, SystemSpec, DEFAULT_DECOUPLING_TOL};
use crate::timefn::{Table, TimeFunction};
use crate::verify::{Criterion, GridSettings, VerifySettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRef {
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSource {
    Number(f64),
    Expression(String),
    Table(TableRef),
}

impl ExprSource {
    pub fn resolve(&self, base: &Path) -> Result<TimeFunction> {
        match self {
            ExprSource::Number(v) => Ok(TimeFunction::from(*v)),
            ExprSource::Expression(s) => s.parse(),
            ExprSource::Table(t) => {
                let path = base.join(&t.csv);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read table {}: {e}", path.display())))?;
                Ok(TimeFunction::Tabulated(Table::from_csv(&text)?))
            }
        }
    }
}

fn one() -> ExprSource {
    ExprSource::Number(1.0)
}

fn zero() -> ExprSource {
    ExprSource::Number(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    #[serde(default = "one")]
    pub mass: ExprSource,
    pub omega: ExprSource,
    #[serde(default = "zero")]
    pub force: ExprSource,
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub oscillators: [OscillatorConfig; 2],
    #[serde(default = "zero")]
    pub coupling: ExprSource,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub start: f64,
    pub end: f64,
}

/// `n` evenly spaced points from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_DECOUPLING_TOL
}

fn default_samples() -> usize {
    33
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoupleTask {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Number of Ω_j² samples written to the report.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for DecoupleTask {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), samples: default_samples() }
    }
}

fn unit_scale() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTask {
    pub final_x1: Range,
    pub final_x2: Range,
    pub initial: Vec<[f64; 2]>,
    /// Multiplies each mode's default ω₀; the kernel must not depend on it.
    #[serde(default = "unit_scale")]
    pub gauge_scale: [f64; 2],
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_lab_grid() -> GridSettings {
    VerifySettings::default().lab_grid
}

fn default_mode_grid() -> GridSettings {
    VerifySettings::default().mode_grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn yes() -> bool {
    true
}

fn default_dt() -> f64 {
    1e-3
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { enabled: true, dt: default_dt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateTask {
    pub packet: GaussianPacket,
    #[serde(default = "default_lab_grid")]
    pub lab_grid: GridSettings,
    #[serde(default = "default_mode_grid")]
    pub mode_grid: GridSettings,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// A criterion named either by number (1–10) or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CriterionRef {
    Number(usize),
    Name(String),
}

impl CriterionRef {
    pub fn resolve(&self) -> Result<Criterion> {
        match self {
            CriterionRef::Number(n) => n.to_string().parse(),
            CriterionRef::Name(s) => s.parse(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    /// Criteria to run; all ten when absent.
    #[serde(default)]
    pub criteria: Option<Vec<CriterionRef>>,
    #[serde(default)]
    pub settings: VerifySettings,
}

impl VerifyTask {
    pub fn criteria(&self) -> Result<Vec<Criterion>> {
        match &self.criteria {
            None => Ok(Criterion::ALL.to_vec()),
            Some(list) => list.iter().map(CriterionRef::resolve).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    /// CSV data files are written only when `csv` is listed; JSON reports
    /// are always written.
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: default_formats() }
    }
}

impl OutputConfig {
    pub fn wants_csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub interval: Option<IntervalConfig>,
    #[serde(default)]
    pub decouple: Option<DecoupleTask>,
    #[serde(default)]
    pub kernel: Option<KernelTask>,
    #[serde(default)]
    pub propagate: Option<PropagateTask>,
    #[serde(default)]
    pub verify: Option<VerifyTask>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Schema-level parse; no files are touched.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running the pipeline:
    /// expressions parse, tables exist and load, the interval is sane and
    /// grid sizes are usable. CSV paths resolve against `base`.
    pub fn validate(&self, base: &Path) -> Result<()> {
        if let Some(iv) = &self.interval {
            if !(iv.start.is_finite() && iv.end.is_finite() && iv.end > iv.start) {
                return Err(Error::Config(format!("interval must satisfy start < end, got [{}, {}]", iv.start, iv.end)));
            }
        }
        if let Some(sys) = &self.system {
            if !(sys.hbar > 0.0 && sys.hbar.is_finite()) {
                return Err(Error::Config(format!("hbar must be positive, got {}", sys.hbar)));
            }
            for o in &sys.oscillators {
                for e in [&o.mass, &o.omega, &o.force] {
                    e.resolve(base)?;
                }
            }
            sys.coupling.resolve(base)?;
        }
        if let Some(k) = &self.kernel {
            for r in [k.final_x1, k.final_x2] {
                if r.n == 0 || !r.min.is_finite() || !r.max.is_finite() {
                    return Err(Error::Config("kernel endpoint ranges need n ≥ 1 and finite bounds".into()));
                }
            }
            if k.gauge_scale.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Config("gauge_scale entries must be positive".into()));
            }
        }
        if let Some(p) = &self.propagate {
            check_grid(&p.lab_grid, true)?;
            check_grid(&p.mode_grid, false)?;
            if !(p.oracle.dt > 0.0) {
                return Err(Error::Config("oracle dt must be positive".into()));
            }
            if p.packet.sigma.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Config("packet widths must be positive".into()));
            }
        }
        if let Some(v) = &self.verify {
            v.criteria()?;
            let s = &v.settings;
            check_grid(&s.lab_grid, true)?;
            check_grid(&s.mode_grid, false)?;
            check_grid(&s.semigroup_grid, false)?;
            if !(s.dt > 0.0) {
                return Err(Error::Config("verify dt must be positive".into()));
            }
        }
        Ok(())
    }

    /// The system section, or a configuration error naming the command.
    pub fn build_system(&self, base: &Path, hbar_override: Option<f64>) -> Result<SystemSpec> {
        let sys = self.system.as_ref().ok_or_else(|| Error::Config("missing `system` section".into()))?;
        let iv = self.interval.ok_or_else(|| Error::Config("missing `interval` section".into()))?;
        let osc = |o: &OscillatorConfig| -> Result<OscillatorSpec> {
            Ok(OscillatorSpec::new(o.mass.resolve(base)?, o.omega.resolve(base)?, o.force.resolve(base)?))
        };
        let oscillators = [osc(&sys.oscillators[0])?, osc(&sys.oscillators[1])?];
        let hbar = hbar_override.unwrap_or(sys.hbar);
        SystemSpec::new(oscillators, sys.coupling.resolve(base)?, hbar, (iv.start, iv.end))
    }
}

fn check_grid(g: &GridSettings, power_of_two: bool) -> Result<()> {
    if g.n < 4 || !(g.half_width > 0.0) || !g.half_width.is_finite() || (power_of_two && !g.n.is_power_of_two()) {
        return Err(Error::Config(format!(
            "grid of {} points on ±{} is not usable{}",
            g.n,
            g.half_width,
            if power_of_two { " (lab grids need a power of two ≥ 4)" } else { "" }
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOSE: &str = r#"{
        "system": {
            "oscillators": [
                { "mass": "exp(0.1*t)", "omega": 1, "force": "0.2*sin(t)" },
                { "mass": "2*exp(0.1*t)", "omega": "2" }
            ],
            "coupling": "0.6*exp(0.1*t)"
        },
        "interval": { "start": 0, "end": 2 },
        "decouple": {}
    }"#;

    #[test]
    fn parses_and_builds_system() {
        let cfg = RunConfig::from_json(BOSE).unwrap();
        cfg.validate(Path::new(".")).unwrap();
        let spec = cfg.build_system(Path::new("."), None).unwrap();
        assert_eq!(spec.hbar(), 1.0);
        assert!((spec.mass(1, 0.0) - 2.0).abs() < 1e-15);
        assert_eq!(spec.force(1, 1.0), 0.0);
        assert_eq!(cfg.decouple.unwrap().tolerance, DEFAULT_DECOUPLING_TOL);
        let spec = RunConfig::from_json(BOSE).unwrap().build_system(Path::new("."), Some(0.5)).unwrap();
        assert_eq!(spec.hbar(), 0.5);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_expressions() {
        assert!(matches!(RunConfig::from_json(r#"{"sistem": {}}"#), Err(Error::Config(_))));
        assert!(RunConfig::from_json("[1, 2").is_err());
        let bad = BOSE.replace("0.2*sin(t)", "0.2*sin(");
        let cfg = RunConfig::from_json(&bad).unwrap();
        assert!(matches!(cfg.validate(Path::new(".")), Err(Error::Syntax { .. })));
        let missing = BOSE.replace("\"2*exp(0.1*t)\"", "{\"csv\": \"/nonexistent/m2.csv\"}");
        let cfg = RunConfig::from_json(&missing).unwrap();
        assert!(matches!(cfg.validate(Path::new(".")), Err(Error::Config(_))));
        let backwards = BOSE.replace("\"end\": 2", "\"end\": -1");
        assert!(RunConfig::from_json(&backwards).unwrap().validate(Path::new(".")).is_err());
    }

    #[test]
    fn table_sources_resolve_relative_to_base() {
        let dir = std::env::temp_dir().join(format!("tdco-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let rows: String = (0..=40).map(|k| format!("{},{}\n", k as f64 * 0.1, 1.0 + 0.05 * k as f64 * 0.1)).collect();
        fs::write(dir.join("m.csv"), format!("t,value\n{rows}")).unwrap();
        let text = BOSE.replace("\"exp(0.1*t)\"", "{\"csv\": \"m.csv\"}");
        let cfg = RunConfig::from_json(&text).unwrap();
        cfg.validate(&dir).unwrap();
        let spec = cfg.build_system(&dir, None).unwrap();
        assert!((spec.mass(0, 1.0) - 1.05).abs() < 1e-9);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn verify_section_defaults_and_selection() {
        let cfg = RunConfig::from_json(r#"{"verify": {"criteria": [1, "gauge"]}}"#).unwrap();
        let v = cfg.verify.unwrap();
        assert_eq!(v.criteria().unwrap(), vec![Criterion::Mehler, Criterion::Gauge]);
        assert_eq!(v.settings, VerifySettings::default());
        let all = RunConfig::from_json(r#"{"verify": {}}"#).unwrap().verify.unwrap();
        assert_eq!(all.criteria().unwrap().len(), 10);
        let none = RunConfig::from_json(r#"{"verify": {"criteria": []}}"#).unwrap().verify.unwrap();
        assert!(none.criteria().unwrap().is_empty());
        let bad = RunConfig::from_json(r#"{"verify": {"criteria": [11]}}"#).unwrap();
        assert!(bad.validate(Path::new(".")).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(Range { min: -1.0, max: 1.0, n: 3 }.points(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(Range { min: 2.0, max: 5.0, n: 1 }.points(), vec![2.0]);
    }
}
