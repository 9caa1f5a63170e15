//! Run configuration and subcommand pipelines for the `esscher` binary.
//!
//! A run is a pure function of the configuration document: the binary adds
//! only the choice of subcommand, the config path and the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use esscher_core::asymptotics::{log_phi_at, moments_at};
use esscher_core::diagnostics::{
    assemble_report, default_lambda_grid, lemma_records, luc_records, write_report, DiagnosticsConfig, PassThresholds,
    Verdict, J_MAX_LIMIT,
};
use esscher_core::grid::{linear_grid, log_grid};
use esscher_core::karamata::{
    check_corollaries, check_lemma_2_3, classify, corollary_grid, TrendRecord, TrendSettings, VariationClass,
    VariationKind,
};
use esscher_core::model::ValidationReport;
use esscher_core::oracle::{evaluate, MomentSet, DEFAULT_TOL};
use esscher_core::tilt::TiltPoint;
use esscher_core::{builtin_model, validate_model, TailModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Config = 1,
    Failed = 2,
    Numerical = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(esscher_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(esscher_core::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Config(_) | CliError::Model(_) => Exit::Config,
            CliError::Numerical(_) | CliError::Output(_) => Exit::Numerical,
        }
    }
}

/// Either `builtin` with `params`, or `g` with optional `q`, `domain_low`
/// and `label`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<TailModel, CliError> {
        match (&self.builtin, &self.g) {
            (Some(name), None) => {
                if self.q.is_some() || self.domain_low.is_some() {
                    return Err(CliError::Config(
                        "q and domain_low apply to expression models only".into(),
                    ));
                }
                let mut m = builtin_model(name, &self.params).map_err(CliError::Model)?;
                if let Some(l) = &self.label {
                    m.label = l.clone();
                }
                Ok(m)
            }
            (None, Some(g)) => {
                if !self.params.is_empty() {
                    return Err(CliError::Config("params apply to builtin models only".into()));
                }
                let q = self.q.as_deref().unwrap_or("0");
                let label = self.label.clone().unwrap_or_else(|| format!("g = {g}"));
                TailModel::from_sources(g, q, self.domain_low.unwrap_or(0.0), label).map_err(CliError::Model)
            }
            (Some(_), Some(_)) => Err(CliError::Config("model takes either builtin or g, not both".into())),
            (None, None) => Err(CliError::Config("model needs builtin or g".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub geometric: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            start: 10.0,
            stop: 1e4,
            points: 7,
            geometric: true,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::Config("t_grid.points must be positive".into()));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.stop < self.start {
            return Err(CliError::Config(format!(
                "t_grid needs finite start <= stop, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        if self.geometric {
            if self.start.is_nan() || self.start <= 0.0 {
                return Err(CliError::Config("a geometric t_grid needs start > 0".into()));
            }
            Ok(log_grid(self.start, self.stop, self.points))
        } else {
            Ok(linear_grid(self.start, self.stop, self.points))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the oracle quadratures.
    pub quadrature: f64,
    pub pass: PassThresholds,
    pub trend: TrendSettings,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quadrature: DEFAULT_TOL,
            pass: PassThresholds::default(),
            trend: TrendSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Directory for report files; `--out` takes precedence.
    pub dir: Option<PathBuf>,
    pub json: bool,
    pub csv: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: None,
            json: true,
            csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_psi_alphas")]
    pub psi_alphas: Vec<u32>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_j_max() -> usize {
    6
}

fn default_psi_alphas() -> Vec<u32> {
    (0..=4).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if !(2..=J_MAX_LIMIT).contains(&cfg.j_max) {
            return Err(CliError::Config(format!(
                "j_max must lie in 2..={J_MAX_LIMIT}, got {}",
                cfg.j_max
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn diagnostics(&self) -> Result<DiagnosticsConfig, CliError> {
        let cfg = DiagnosticsConfig {
            t_grid: self.t_grid.points()?,
            j_max: self.j_max,
            quadrature_tol: self.tolerances.quadrature,
            thresholds: self.tolerances.pass.clone(),
            trend: self.tolerances.trend,
            lambda_grid: self.lambda_grid.clone(),
            psi_alphas: self.psi_alphas.clone(),
        };
        cfg.check().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// Text for stdout and the exit status of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub exit: Exit,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

/// Validation, then classification when validation passes.
fn classify_model(m: &TailModel, s: &TrendSettings) -> (ValidationReport, VariationClass) {
    let validation = validate_model(m);
    if !validation.passed() {
        let mut cls = VariationClass::unsupported("model validation failed");
        cls.notes
            .extend(validation.failures().map(|c| format!("{}: {}", c.name, c.detail)));
        return (validation, cls);
    }
    let cls = classify(m, s);
    (validation, cls)
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let (_, cls) = classify_model(&m, &cfg.tolerances.trend);
    let exit = if cls.is_supported() { Exit::Pass } else { Exit::Failed };
    Ok(Outcome {
        stdout: to_json(&cls),
        exit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub label: String,
    pub t: f64,
    pub tilt_point: Option<TiltPoint>,
    pub exact: MomentSet,
    pub asymptotic: Option<MomentSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn cmd_evaluate(cfg: &RunConfig, t: f64) -> Result<Outcome, CliError> {
    if !t.is_finite() {
        return Err(CliError::Config(format!("--t must be finite, got {t}")));
    }
    let m = cfg.model.build()?;
    let (tp, exact) = evaluate(&m, t, cfg.j_max, cfg.tolerances.quadrature).map_err(CliError::Numerical)?;
    let mut notes = Vec::new();
    let asymptotic = match &tp {
        Some(tp) if t > 0.0 => Some(moments_at(
            tp,
            log_phi_at(&m, tp).map_err(CliError::Numerical)?,
            cfg.j_max,
        )),
        Some(_) => {
            notes.push("the saddlepoint equivalents describe t -> infinity; omitted for t <= 0".into());
            None
        }
        None => {
            notes.push("no saddlepoint: t lies below the range of h; asymptotic side omitted".into());
            None
        }
    };
    let out = Evaluation {
        label: m.label.clone(),
        t,
        tilt_point: tp,
        exact,
        asymptotic,
        notes,
    };
    Ok(Outcome {
        stdout: to_json(&out),
        exit: Exit::Pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub label: String,
    pub validation: ValidationReport,
    pub classification: VariationClass,
    pub trend_records: Vec<TrendRecord>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Hypothesis checks only: validation, classification, corollaries and the
/// little-o quantities, without any quadrature.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let s = &cfg.tolerances.trend;
    let (validation, cls) = classify_model(&m, s);
    let mut failures: Vec<String> = Vec::new();
    let mut records = Vec::new();
    if cls.is_supported() {
        match corollary_grid(&m, &cls, s) {
            Ok(ts) => {
                match check_corollaries(&m, &cls, &ts, s) {
                    Ok(r) => records.extend(r),
                    Err(e) => failures.push(format!("corollaries: {e}")),
                }
                if cls.kind == VariationKind::RapidlyVarying {
                    match check_lemma_2_3(&m, &ts, s) {
                        Ok(r) => records.extend(r),
                        Err(e) => failures.push(format!("inverse-derivative relations: {e}")),
                    }
                }
                records.extend(luc_records(&m, &cls, &ts, s));
                records.extend(lemma_records(&m, &ts, s));
            }
            Err(e) => failures.push(format!("trend grid: {e}")),
        }
        failures.extend(
            records
                .iter()
                .filter(|r| !r.passed)
                .map(|r| format!("{}: expected {:?}, observed {:?}", r.label, r.expected, r.verdict)),
        );
    } else {
        failures.extend(cls.notes.iter().cloned());
    }
    let passed = cls.is_supported() && failures.is_empty();
    let out = Verification {
        label: m.label.clone(),
        validation,
        classification: cls,
        trend_records: records,
        passed,
        failures,
    };
    Ok(Outcome {
        stdout: to_json(&out),
        exit: if passed { Exit::Pass } else { Exit::Failed },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub label: String,
    pub verdict: Verdict,
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Writes the report into `out`, or the configured directory, or `report/`.
pub fn cmd_report(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let dcfg = cfg.diagnostics()?;
    let report = assemble_report(&m, &dcfg).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.dir.clone())
        .unwrap_or_else(|| PathBuf::from("report"));
    let files =
        write_report(&report, &dir, cfg.outputs.json, cfg.outputs.csv).map_err(|e| CliError::Output(e.to_string()))?;
    let summary = ReportSummary {
        label: report.label.clone(),
        verdict: report.verdict,
        failures: report.failures.clone(),
        files,
    };
    Ok(Outcome {
        stdout: to_json(&summary),
        exit: if report.verdict == Verdict::Pass {
            Exit::Pass
        } else {
            Exit::Failed
        },
    })
}
