//! The versioned JSON envelope every command writes.

use std::path::Path;

use mlaudit::audits::{OmissionAuditReport, OverfitComparison, UnderspecReport};
use mlaudit::explain::{ImportanceReport, ShapleySummary};
use mlaudit::models::{ModelSpec, TuneResult};
use mlaudit::validation::{ContrastReport, CvResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub version: u32,
    pub tool_version: String,
    pub command: CommandEcho,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandEcho {
    pub argv: Vec<String>,
    /// Space-separated subcommand path, e.g. `audit omission`.
    pub subcommand: String,
    /// Every parsed flag, defaults included.
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub generator: String,
    pub spec: Value,
    pub rows: usize,
    pub csv: String,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPayload {
    /// The fitted spec, or the tuning template when tuning is nested.
    pub spec: ModelSpec,
    pub tuning: Option<TuneResult>,
    pub nested_tuning: bool,
    pub result: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastPayload {
    pub spec: ModelSpec,
    pub tuning: Option<TuneResult>,
    pub nested_tuning: bool,
    pub report: ContrastReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyPayload {
    pub model_id: String,
    pub background_rows: Vec<usize>,
    /// Dataset rows explained; `summary.rows` index into this list.
    pub explained_rows: Vec<usize>,
    pub summary: ShapleySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunePayload {
    pub result: TuneResult,
    pub model_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Synth(SynthSummary),
    Cv(CvPayload),
    Contrast(ContrastPayload),
    Omission(OmissionAuditReport),
    Underspec(UnderspecReport),
    Overfit(OverfitComparison),
    Importance(ImportanceReport),
    Shapley(ShapleyPayload),
    Tune(TunePayload),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Synth(_) => "synth",
            Payload::Cv(_) => "cv",
            Payload::Contrast(_) => "contrast",
            Payload::Omission(_) => "omission",
            Payload::Underspec(_) => "underspec",
            Payload::Overfit(_) => "overfit",
            Payload::Importance(_) => "importance",
            Payload::Shapley(_) => "shapley",
            Payload::Tune(_) => "tune",
        }
    }
}

impl ReportDocument {
    pub fn new(argv: Vec<String>, subcommand: &str, config: Value, payload: Payload) -> Self {
        ReportDocument {
            version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: CommandEcho {
                argv,
                subcommand: subcommand.into(),
                config,
            },
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            payload,
        }
    }

    /// Pretty JSON that parses back to an identical document and
    /// re-serializes to the same bytes. Non-finite floats fail here, since
    /// they serialize as `null` and cannot be read back as numbers.
    pub fn to_json(&self) -> Result<String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::json("report", e))?;
        let back = Self::from_json(&text).map_err(|e| CliError::NotCanonical(e.to_string()))?;
        let again = serde_json::to_string_pretty(&back).map_err(|e| CliError::json("report", e))?;
        if again != text {
            return Err(CliError::NotCanonical("re-serialized bytes differ".into()));
        }
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDocument =
            serde_json::from_str(text).map_err(|e| CliError::json("report", e))?;
        if doc.version != REPORT_VERSION {
            return Err(mlaudit::Error::InvalidArgument(format!(
                "unsupported report version {} (expected {REPORT_VERSION})",
                doc.version
            ))
            .into());
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Json { source, .. } => CliError::json(path.display().to_string(), source),
            other => other,
        })
    }
}
