//! Minimal SARIF 2.1.0 subset: parse, validate, emit, and flatten into
//! analyzer-agnostic findings.
//!
//! Only the fields needed for a minimal report are modeled. Unknown fields
//! are ignored on parse and never emitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SARIF_SCHEMA_URI: &str = "https://json.schemastore.org/sarif-2.1.0.json";
pub const SARIF_VERSION: &str = "2.1.0";

#[derive(Debug, Error)]
pub enum SarifError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {path}: {detail}")]
    SchemaViolation { path: String, detail: String },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// Result severity. Round-trips through its lowercase SARIF text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
    None,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
            Severity::None => "none",
        }
    }

    /// Case-insensitive parse of the four SARIF levels. Anything else is rejected.
    pub fn parse(text: &str) -> Option<Severity> {
        match text.to_ascii_lowercase().as_str() {
            "error" => Some(Severity::Error),
            "warning" => Some(Severity::Warning),
            "note" => Some(Severity::Note),
            "none" => Some(Severity::None),
            _ => Option::None,
        }
    }
}

/// 1-based line/column range locating a finding within a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start_line: u32,
    pub end_line: u32,
    pub start_column: u32,
    pub end_column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalLocation {
    /// Forward-slash relative path, no leading slash.
    pub artifact_uri: String,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMeta {
    pub id: String,
    pub short_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub rule_id: String,
    pub rule_index: usize,
    pub level: Severity,
    pub message: String,
    pub location: PhysicalLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub tool_name: String,
    pub tool_version: String,
    pub rules: Vec<RuleMeta>,
    pub results: Vec<ResultEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarifLog {
    pub schema_uri: String,
    pub version: String,
    pub runs: Vec<Run>,
}

/// Flattened view: one Finding per ResultEntry with rule metadata resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub analyzer_id: String,
    pub rule_id: String,
    pub rule_description: String,
    pub level: Severity,
    pub message: String,
    pub path: String,
    pub region: Region,
}

/// Normalize a path to forward-slash relative form.
pub fn normalize_path(path: &str) -> String {
    let p = path.replace('\\', "/");
    p.trim_start_matches('/').to_string()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

use serde_json::Value;

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value, SarifError> {
    obj.get(key).ok_or_else(|| SarifError::SchemaViolation {
        path: format!("{path}.{key}"),
        detail: "missing required field".into(),
    })
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, SarifError> {
    v.as_str().ok_or_else(|| SarifError::SchemaViolation {
        path: path.into(),
        detail: "expected a string".into(),
    })
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SarifError> {
    v.as_array().ok_or_else(|| SarifError::SchemaViolation {
        path: path.into(),
        detail: "expected an array".into(),
    })
}

fn as_u32(v: &Value, path: &str) -> Result<u32, SarifError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| SarifError::SchemaViolation {
            path: path.into(),
            detail: "expected a non-negative integer".into(),
        })
}

fn parse_region(v: &Value, path: &str) -> Result<Region, SarifError> {
    let start_line = as_u32(field(v, "startLine", path)?, &format!("{path}.startLine"))?;
    let end_line = match v.get("endLine") {
        Some(e) => as_u32(e, &format!("{path}.endLine"))?,
        None => start_line,
    };
    let start_column = match v.get("startColumn") {
        Some(c) => as_u32(c, &format!("{path}.startColumn"))?,
        None => 1,
    };
    let end_column = match v.get("endColumn") {
        Some(c) => as_u32(c, &format!("{path}.endColumn"))?,
        None => start_column,
    };
    Ok(Region {
        start_line,
        end_line,
        start_column,
        end_column,
    })
}

fn parse_result(v: &Value, rules: &[RuleMeta], path: &str) -> Result<ResultEntry, SarifError> {
    let rule_id = as_str(field(v, "ruleId", path)?, &format!("{path}.ruleId"))?.to_string();
    let rule_index = field(v, "ruleIndex", path)?
        .as_u64()
        .ok_or_else(|| SarifError::SchemaViolation {
            path: format!("{path}.ruleIndex"),
            detail: "expected a non-negative integer".into(),
        })? as usize;
    if rule_index >= rules.len() {
        return Err(SarifError::SchemaViolation {
            path: format!("{path}.ruleIndex"),
            detail: format!("index {rule_index} out of range for {} rules", rules.len()),
        });
    }
    if rules[rule_index].id != rule_id {
        return Err(SarifError::SchemaViolation {
            path: format!("{path}.ruleId"),
            detail: format!(
                "ruleId {rule_id:?} does not match rules[{rule_index}].id {:?}",
                rules[rule_index].id
            ),
        });
    }
    let level_text = as_str(field(v, "level", path)?, &format!("{path}.level"))?;
    let level = Severity::parse(level_text).ok_or_else(|| SarifError::SchemaViolation {
        path: format!("{path}.level"),
        detail: format!("unknown severity {level_text:?}"),
    })?;
    let message_path = format!("{path}.message");
    let message = as_str(
        field(field(v, "message", path)?, "text", &message_path)?,
        &format!("{message_path}.text"),
    )?
    .to_string();
    if message.is_empty() {
        return Err(SarifError::SchemaViolation {
            path: format!("{message_path}.text"),
            detail: "message must be non-empty".into(),
        });
    }

    let locations_path = format!("{path}.locations");
    let locations = as_array(field(v, "locations", path)?, &locations_path)?;
    let loc = locations
        .first()
        .ok_or_else(|| SarifError::SchemaViolation {
            path: locations_path.clone(),
            detail: "locations must be non-empty".into(),
        })?;
    let phys_path = format!("{locations_path}[0].physicalLocation");
    let phys = field(loc, "physicalLocation", &format!("{locations_path}[0]"))?;
    let art_path = format!("{phys_path}.artifactLocation");
    let uri = as_str(
        field(field(phys, "artifactLocation", &phys_path)?, "uri", &art_path)?,
        &format!("{art_path}.uri"),
    )?;
    let region = parse_region(
        field(phys, "region", &phys_path)?,
        &format!("{phys_path}.region"),
    )?;

    Ok(ResultEntry {
        rule_id,
        rule_index,
        level,
        message,
        location: PhysicalLocation {
            artifact_uri: normalize_path(uri),
            region,
        },
    })
}

fn parse_run(v: &Value, path: &str) -> Result<Run, SarifError> {
    let tool_path = format!("{path}.tool");
    let driver_path = format!("{tool_path}.driver");
    let driver = field(field(v, "tool", path)?, "driver", &tool_path)?;
    let tool_name = as_str(
        field(driver, "name", &driver_path)?,
        &format!("{driver_path}.name"),
    )?
    .to_string();
    // "version" is authoritative; fall back to semanticVersion.
    let tool_version = match driver.get("version").or_else(|| driver.get("semanticVersion")) {
        Some(v) => as_str(v, &format!("{driver_path}.version"))?.to_string(),
        None => {
            return Err(SarifError::SchemaViolation {
                path: format!("{driver_path}.version"),
                detail: "missing required field".into(),
            })
        }
    };

    let mut rules = Vec::new();
    if let Some(rules_v) = driver.get("rules") {
        let rules_path = format!("{driver_path}.rules");
        for (i, r) in as_array(rules_v, &rules_path)?.iter().enumerate() {
            let rule_path = format!("{rules_path}[{i}]");
            let id = as_str(field(r, "id", &rule_path)?, &format!("{rule_path}.id"))?.to_string();
            if id.is_empty() {
                return Err(SarifError::SchemaViolation {
                    path: format!("{rule_path}.id"),
                    detail: "rule id must be non-empty".into(),
                });
            }
            let sd_path = format!("{rule_path}.shortDescription");
            let short_description = as_str(
                field(field(r, "shortDescription", &rule_path)?, "text", &sd_path)?,
                &format!("{sd_path}.text"),
            )?
            .to_string();
            rules.push(RuleMeta {
                id,
                short_description,
            });
        }
    }

    let mut results = Vec::new();
    if let Some(results_v) = v.get("results") {
        let results_path = format!("{path}.results");
        for (i, r) in as_array(results_v, &results_path)?.iter().enumerate() {
            results.push(parse_result(r, &rules, &format!("{results_path}[{i}]"))?);
        }
    }

    Ok(Run {
        tool_name,
        tool_version,
        rules,
        results,
    })
}

/// Parse SARIF 2.1.0 JSON text into the subset data model.
///
/// Unknown fields are ignored. Structural problems report the offending
/// JSON path.
pub fn parse_sarif(text: &str) -> Result<SarifLog, SarifError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| SarifError::MalformedJson(e.to_string()))?;

    let schema_uri = as_str(field(&value, "$schema", "$")?, "$.$schema")?.to_string();
    let version = as_str(field(&value, "version", "$")?, "$.version")?.to_string();
    if version != SARIF_VERSION {
        return Err(SarifError::SchemaViolation {
            path: "$.version".into(),
            detail: format!("expected \"{SARIF_VERSION}\", got {version:?}"),
        });
    }

    let runs_v = as_array(field(&value, "runs", "$")?, "$.runs")?;
    let mut runs = Vec::with_capacity(runs_v.len());
    for (i, r) in runs_v.iter().enumerate() {
        runs.push(parse_run(r, &format!("$.runs[{i}]"))?);
    }

    Ok(SarifLog {
        schema_uri,
        version,
        runs,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Check every type invariant. Returns one description per violation,
/// each naming the field path and the violated rule; empty iff valid.
pub fn validate(log: &SarifLog) -> Vec<String> {
    let mut violations = Vec::new();

    if log.version != SARIF_VERSION {
        violations.push(format!(
            "version: must equal \"{SARIF_VERSION}\", got {:?}",
            log.version
        ));
    }
    if log.runs.is_empty() {
        violations.push("runs: must be non-empty".to_string());
    }

    for (ri, run) in log.runs.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for (i, rule) in run.rules.iter().enumerate() {
            if rule.id.is_empty() {
                violations.push(format!("runs[{ri}].rules[{i}].id: must be non-empty"));
            }
            if !seen.insert(rule.id.as_str()) {
                violations.push(format!(
                    "runs[{ri}].rules: duplicate rule id {:?}",
                    rule.id
                ));
            }
        }
        for (i, result) in run.results.iter().enumerate() {
            let p = format!("runs[{ri}].results[{i}]");
            if result.rule_index >= run.rules.len() {
                violations.push(format!(
                    "{p}.ruleIndex: index {} out of range for {} rules",
                    result.rule_index,
                    run.rules.len()
                ));
            } else if run.rules[result.rule_index].id != result.rule_id {
                violations.push(format!(
                    "{p}.ruleId: {:?} does not match rules[{}].id",
                    result.rule_id, result.rule_index
                ));
            }
            if result.message.is_empty() {
                violations.push(format!("{p}.message: must be non-empty"));
            }
            let uri = &result.location.artifact_uri;
            if uri.starts_with('/') || uri.contains('\\') {
                violations.push(format!(
                    "{p}.locations[0].physicalLocation.artifactLocation.uri: must be a forward-slash relative path"
                ));
            }
            let rg = &result.location.region;
            let rp = format!("{p}.locations[0].physicalLocation.region");
            if rg.start_line < 1 {
                violations.push(format!("{rp}.startLine: must be ≥ 1"));
            }
            if rg.start_column < 1 {
                violations.push(format!("{rp}.startColumn: must be ≥ 1"));
            }
            if rg.end_line < rg.start_line {
                violations.push(format!("{rp}.endLine: must be ≥ startLine"));
            }
            if rg.start_line == rg.end_line && rg.end_column < rg.start_column {
                violations.push(format!(
                    "{rp}.endColumn: must be ≥ startColumn on a single-line region"
                ));
            }
        }
    }

    violations
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

// Wire structs carry the exact emitted field set in listing order; serde
// preserves declared field order, which keeps emission deterministic.
mod wire {
    use serde::Serialize;

    #[derive(Serialize)]
    pub struct Log<'a> {
        #[serde(rename = "$schema")]
        pub schema: &'a str,
        pub version: &'a str,
        pub runs: Vec<Run<'a>>,
    }

    #[derive(Serialize)]
    pub struct Run<'a> {
        pub tool: Tool<'a>,
        pub results: Vec<ResultEntry<'a>>,
    }

    #[derive(Serialize)]
    pub struct Tool<'a> {
        pub driver: Driver<'a>,
    }

    #[derive(Serialize)]
    pub struct Driver<'a> {
        pub name: &'a str,
        #[serde(rename = "semanticVersion")]
        pub semantic_version: &'a str,
        pub version: &'a str,
        pub rules: Vec<Rule<'a>>,
    }

    #[derive(Serialize)]
    pub struct Rule<'a> {
        pub id: &'a str,
        #[serde(rename = "shortDescription")]
        pub short_description: Text<'a>,
    }

    #[derive(Serialize)]
    pub struct Text<'a> {
        pub text: &'a str,
    }

    #[derive(Serialize)]
    pub struct ResultEntry<'a> {
        #[serde(rename = "ruleId")]
        pub rule_id: &'a str,
        #[serde(rename = "ruleIndex")]
        pub rule_index: usize,
        pub level: &'a str,
        pub message: Text<'a>,
        pub locations: Vec<Location<'a>>,
    }

    #[derive(Serialize)]
    pub struct Location<'a> {
        #[serde(rename = "physicalLocation")]
        pub physical_location: PhysicalLocation<'a>,
    }

    #[derive(Serialize)]
    pub struct PhysicalLocation<'a> {
        #[serde(rename = "artifactLocation")]
        pub artifact_location: ArtifactLocation<'a>,
        pub region: Region,
    }

    #[derive(Serialize)]
    pub struct ArtifactLocation<'a> {
        pub uri: &'a str,
    }

    #[derive(Serialize)]
    pub struct Region {
        #[serde(rename = "startLine")]
        pub start_line: u32,
        #[serde(rename = "endLine")]
        pub end_line: u32,
        #[serde(rename = "startColumn")]
        pub start_column: u32,
        #[serde(rename = "endColumn")]
        pub end_column: u32,
    }
}

/// Emit a SARIF log as UTF-8 JSON bytes: 2-space indentation, listing-order
/// keys, byte-identical across calls for equal input.
pub fn emit_sarif(log: &SarifLog) -> Result<Vec<u8>, SarifError> {
    let violations = validate(log);
    if !violations.is_empty() {
        return Err(SarifError::InvariantViolation(violations.join("; ")));
    }

    let wire = wire::Log {
        schema: SARIF_SCHEMA_URI,
        version: SARIF_VERSION,
        runs: log
            .runs
            .iter()
            .map(|run| wire::Run {
                tool: wire::Tool {
                    driver: wire::Driver {
                        name: &run.tool_name,
                        semantic_version: &run.tool_version,
                        version: &run.tool_version,
                        rules: run
                            .rules
                            .iter()
                            .map(|r| wire::Rule {
                                id: &r.id,
                                short_description: wire::Text {
                                    text: &r.short_description,
                                },
                            })
                            .collect(),
                    },
                },
                results: run
                    .results
                    .iter()
                    .map(|r| wire::ResultEntry {
                        rule_id: &r.rule_id,
                        rule_index: r.rule_index,
                        level: r.level.as_str(),
                        message: wire::Text { text: &r.message },
                        locations: vec![wire::Location {
                            physical_location: wire::PhysicalLocation {
                                artifact_location: wire::ArtifactLocation {
                                    uri: &r.location.artifact_uri,
                                },
                                region: wire::Region {
                                    start_line: r.location.region.start_line,
                                    end_line: r.location.region.end_line,
                                    start_column: r.location.region.start_column,
                                    end_column: r.location.region.end_column,
                                },
                            },
                        }],
                    })
                    .collect(),
            })
            .collect(),
    };

    let mut bytes = serde_json::to_vec_pretty(&wire)
        .map_err(|e| SarifError::MalformedJson(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Flatten all runs into findings, in run-then-result order.
pub fn findings_of(log: &SarifLog, analyzer_id: &str) -> Vec<Finding> {
    let mut findings = Vec::new();
    for run in &log.runs {
        for result in &run.results {
            let rule_description = run
                .rules
                .get(result.rule_index)
                .map(|r| r.short_description.clone())
                .unwrap_or_default();
            findings.push(Finding {
                analyzer_id: analyzer_id.to_string(),
                rule_id: result.rule_id.clone(),
                rule_description,
                level: result.level,
                message: result.message.clone(),
                path: result.location.artifact_uri.clone(),
                region: result.location.region,
            });
        }
    }
    findings
}
