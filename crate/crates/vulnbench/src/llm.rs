//! The project-analysis pipeline: aggregate a project into one prompt, call
//! a chat-completion endpoint, extract the fenced JSON finding array, and
//! convert the drafts into SARIF.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProjectSource;
use crate::sarif::{
    normalize_path, PhysicalLocation, Region, ResultEntry, RuleMeta, Run, SarifLog, Severity,
    SARIF_SCHEMA_URI, SARIF_VERSION,
};

/// System prompt sent with every analysis request. Stored as a checked
/// resource; a checksum test pins its exact bytes.
pub const SYSTEM_PROMPT: &str = include_str!("../resources/system_prompt.txt");

fn default_retry_backoff_ms() -> u64 {
    1000
}

fn default_concurrency() -> usize {
    1
}

/// Backend endpoint, auth, and limits for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub analyzer_id: String,
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: String,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    /// Request timeout in seconds.
    pub timeout: f64,
    #[serde(default)]
    pub max_retries: u32,
    /// Base backoff in milliseconds, doubled per retry (1s/2s by default).
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: u64,
    /// Maximum in-flight requests for this model.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    pub project_id: String,
}

/// One finding object as returned by the model, before SARIF conversion.
/// Line/column values are kept signed; models emit 0 or negative values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindingDraft {
    pub rule_id: String,
    pub rule_description: String,
    pub level: Severity,
    pub message: String,
    pub path: String,
    pub category: String,
    pub start_line: i64,
    pub end_line: i64,
    pub start_column: i64,
    pub end_column: i64,
}

#[derive(Debug, Clone)]
pub struct RawModelResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Wall-clock seconds around the full request, retries included.
    pub latency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisRun {
    pub analyzer_id: String,
    pub project_id: String,
    pub sarif: SarifLog,
    /// Wall-clock seconds, rounded half-up to 3 decimals.
    pub wall_time: f64,
    pub draft_count: usize,
    pub rejected_draft_count: usize,
    /// False when the time was not actually measured (external imports
    /// without a timing sidecar).
    pub timing_measured: bool,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("project has no files")]
    EmptyProject,
    #[error("auth token environment variable {0} is unset or empty")]
    AuthMissing(String),
    #[error("transport error after {attempts} attempt(s): {detail}")]
    TransportError { attempts: u32, detail: String },
    #[error("provider returned HTTP {status}: {message}")]
    ProviderError { status: u16, message: String },
    #[error("response carries neither a ```json fence nor a JSON array")]
    NoFindingsPayload,
    #[error("fenced payload is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("analyzer {analyzer_id}, project {project_id}: {source}")]
    Analysis {
        analyzer_id: String,
        project_id: String,
        #[source]
        source: Box<LlmError>,
    },
}

/// Round half-up to 3 decimals (timing convention used throughout).
pub fn round3(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

/// Build the aggregated project prompt: every file in lexicographic path
/// order, each preceded by a `// File: <path>` header line.
pub fn build_prompt(src: &ProjectSource) -> Result<PromptBundle, LlmError> {
    if src.files.is_empty() {
        return Err(LlmError::EmptyProject);
    }
    let mut user_message = String::new();
    for (path, content) in &src.files {
        user_message.push_str("// File: ");
        user_message.push_str(path);
        user_message.push('\n');
        user_message.push_str(content);
        user_message.push_str("\n\n");
    }
    Ok(PromptBundle {
        system_message: SYSTEM_PROMPT.to_string(),
        user_message,
        project_id: src.project_id.clone(),
    })
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Send one chat-completion request (system + user message). HTTP 429 and
/// 5xx responses and transport failures are retried up to `max_retries`
/// with exponential backoff.
pub fn request_analysis(
    prompt: &PromptBundle,
    cfg: &ModelConfig,
) -> Result<RawModelResponse, LlmError> {
    let token = std::env::var(&cfg.auth_token_env)
        .ok()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| LlmError::AuthMissing(cfg.auth_token_env.clone()))?;

    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs_f64(cfg.timeout))
        .build()
        .map_err(|e| LlmError::TransportError {
            attempts: 0,
            detail: e.to_string(),
        })?;

    let body = ChatRequest {
        model: &cfg.model_name,
        messages: [
            ChatMessage {
                role: "system",
                content: &prompt.system_message,
            },
            ChatMessage {
                role: "user",
                content: &prompt.user_message,
            },
        ],
        temperature: cfg.temperature,
        max_tokens: cfg.max_output_tokens,
    };

    let start = Instant::now();
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let outcome = client
            .post(&cfg.endpoint_url)
            .bearer_auth(&token)
            .json(&body)
            .send();

        let retryable = match &outcome {
            Ok(resp) => {
                let status = resp.status();
                status.as_u16() == 429 || status.is_server_error()
            }
            Err(_) => true,
        };

        match outcome {
            Ok(resp) if resp.status().is_success() => {
                let parsed: ChatResponse =
                    resp.json().map_err(|e| LlmError::TransportError {
                        attempts: attempt,
                        detail: format!("invalid response body: {e}"),
                    })?;
                let content = parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| LlmError::TransportError {
                        attempts: attempt,
                        detail: "response carries no choices".into(),
                    })?;
                let usage = parsed.usage.unwrap_or_default();
                return Ok(RawModelResponse {
                    content,
                    prompt_tokens: usage.prompt_tokens,
                    completion_tokens: usage.completion_tokens,
                    latency: start.elapsed().as_secs_f64(),
                });
            }
            Ok(resp) if retryable && attempt <= cfg.max_retries => {
                drop(resp);
            }
            Ok(resp) => {
                let status = resp.status().as_u16();
                let message = resp.text().unwrap_or_default();
                return Err(if retryable {
                    LlmError::TransportError {
                        attempts: attempt,
                        detail: format!("HTTP {status} after retries: {message}"),
                    }
                } else {
                    LlmError::ProviderError { status, message }
                });
            }
            Err(e) if attempt <= cfg.max_retries => {
                let _ = e;
            }
            Err(e) => {
                return Err(LlmError::TransportError {
                    attempts: attempt,
                    detail: e.to_string(),
                });
            }
        }

        let backoff = cfg.retry_backoff_ms << (attempt - 1).min(8);
        std::thread::sleep(Duration::from_millis(backoff));
    }
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Find the first balanced top-level JSON array in `text`, respecting
/// string literals and escapes.
fn first_json_array(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(off) = text[search_from..].find('[') {
        let start = search_from + off;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, &b) in bytes[start..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'[' | b'{' => depth += 1,
                b']' | b'}' => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        let candidate = &text[start..start + i + 1];
                        if serde_json::from_str::<serde_json::Value>(candidate).is_ok() {
                            return Some(candidate);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        search_from = start + 1;
    }
    None
}

fn required_str(obj: &serde_json::Value, key: &str) -> Option<String> {
    obj.get(key).and_then(|v| v.as_str()).map(str::to_string)
}

fn required_int(obj: &serde_json::Value, key: &str) -> Option<i64> {
    obj.get(key).and_then(|v| v.as_i64())
}

fn draft_from_object(obj: &serde_json::Value) -> Option<FindingDraft> {
    Some(FindingDraft {
        rule_id: required_str(obj, "RuleId")?,
        rule_description: required_str(obj, "RuleDescription")?,
        level: Severity::parse(&required_str(obj, "Level")?)?,
        message: required_str(obj, "Message")?,
        path: required_str(obj, "Path")?,
        category: required_str(obj, "Category")?,
        start_line: required_int(obj, "StartLine")?,
        end_line: required_int(obj, "EndLine")?,
        start_column: required_int(obj, "StartColumn")?,
        end_column: required_int(obj, "EndColumn")?,
    })
}

/// Extract finding drafts from a model response.
///
/// Parses the first ```json fenced block; without a fence, falls back to the
/// first top-level JSON array in the content. Objects missing required
/// fields or with an unparseable Level are counted as rejected, not fatal.
pub fn extract_findings(
    resp: &RawModelResponse,
) -> Result<(Vec<FindingDraft>, usize), LlmError> {
    let payload: &str = if let Some(fence_at) = resp.content.find("```json") {
        let after = &resp.content[fence_at + "```json".len()..];
        let end = after.find("```").unwrap_or(after.len());
        after[..end].trim()
    } else if let Some(array) = first_json_array(&resp.content) {
        array
    } else {
        return Err(LlmError::NoFindingsPayload);
    };

    let value: serde_json::Value =
        serde_json::from_str(payload).map_err(|e| LlmError::MalformedJson(e.to_string()))?;
    let array = value
        .as_array()
        .ok_or_else(|| LlmError::MalformedJson("payload is not a JSON array".into()))?;

    let mut drafts = Vec::new();
    let mut rejected = 0usize;
    for element in array {
        match draft_from_object(element) {
            Some(draft) => drafts.push(draft),
            None => rejected += 1,
        }
    }
    Ok((drafts, rejected))
}

// ---------------------------------------------------------------------------
// SARIF conversion
// ---------------------------------------------------------------------------

fn clamp_line(v: i64) -> u32 {
    v.clamp(1, u32::MAX as i64) as u32
}

/// Convert drafts into a single-run SARIF log. Rules are deduplicated by
/// rule id in first-appearance order. Regions are clamped to 1-based values
/// (model regions are otherwise carried through as returned); the number of
/// adjusted regions is reported alongside the log.
pub fn drafts_to_sarif(
    drafts: &[FindingDraft],
    analyzer_id: &str,
    model_name: &str,
) -> (SarifLog, usize) {
    let mut rules: Vec<RuleMeta> = Vec::new();
    let mut results = Vec::new();
    let mut normalized = 0usize;

    for draft in drafts {
        let rule_index = match rules.iter().position(|r| r.id == draft.rule_id) {
            Some(i) => i,
            None => {
                rules.push(RuleMeta {
                    id: draft.rule_id.clone(),
                    short_description: draft.rule_description.clone(),
                });
                rules.len() - 1
            }
        };

        let start_line = clamp_line(draft.start_line);
        let end_line = clamp_line(draft.end_line).max(start_line);
        let start_column = clamp_line(draft.start_column);
        let mut end_column = clamp_line(draft.end_column);
        if start_line == end_line {
            end_column = end_column.max(start_column);
        }
        if (start_line as i64, end_line as i64, start_column as i64, end_column as i64)
            != (draft.start_line, draft.end_line, draft.start_column, draft.end_column)
        {
            normalized += 1;
        }

        results.push(ResultEntry {
            rule_id: draft.rule_id.clone(),
            rule_index,
            level: draft.level,
            message: draft.message.clone(),
            location: PhysicalLocation {
                artifact_uri: normalize_path(&draft.path),
                region: Region {
                    start_line,
                    end_line,
                    start_column,
                    end_column,
                },
            },
        });
    }

    let log = SarifLog {
        schema_uri: SARIF_SCHEMA_URI.to_string(),
        version: SARIF_VERSION.to_string(),
        runs: vec![Run {
            tool_name: analyzer_id.to_string(),
            tool_version: model_name.to_string(),
            rules,
            results,
        }],
    };
    (log, normalized)
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

fn with_context(analyzer_id: &str, project_id: &str, source: LlmError) -> LlmError {
    LlmError::Analysis {
        analyzer_id: analyzer_id.to_string(),
        project_id: project_id.to_string(),
        source: Box::new(source),
    }
}

/// build_prompt → request_analysis → extract_findings → drafts_to_sarif,
/// timed end to end.
pub fn analyze_project(src: &ProjectSource, cfg: &ModelConfig) -> Result<AnalysisRun, LlmError> {
    let start = Instant::now();
    let wrap = |e| with_context(&cfg.analyzer_id, &src.project_id, e);

    let prompt = build_prompt(src).map_err(wrap)?;
    let response = request_analysis(&prompt, cfg).map_err(wrap)?;
    let (drafts, rejected) = extract_findings(&response).map_err(wrap)?;
    let (sarif, _normalized) = drafts_to_sarif(&drafts, &cfg.analyzer_id, &cfg.model_name);

    Ok(AnalysisRun {
        analyzer_id: cfg.analyzer_id.clone(),
        project_id: src.project_id.clone(),
        sarif,
        wall_time: round3(start.elapsed().as_secs_f64()),
        draft_count: drafts.len() + rejected,
        rejected_draft_count: rejected,
        timing_measured: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn source(files: &[(&str, &str)]) -> ProjectSource {
        ProjectSource {
            project_id: "P01".into(),
            root_dir: PathBuf::new(),
            files: files
                .iter()
                .map(|(p, c)| (p.to_string(), c.to_string()))
                .collect(),
        }
    }

    #[test]
    fn prompt_concatenates_files_with_headers() {
        let src = source(&[("a.cs", "x"), ("b.cs", "y")]);
        let bundle = build_prompt(&src).unwrap();
        assert_eq!(bundle.user_message, "// File: a.cs\nx\n\n// File: b.cs\ny\n\n");
        assert_eq!(bundle.project_id, "P01");
    }

    #[test]
    fn empty_content_file_still_gets_header() {
        let src = source(&[("a.cs", "")]);
        let bundle = build_prompt(&src).unwrap();
        assert_eq!(bundle.user_message, "// File: a.cs\n\n\n");
    }

    #[test]
    fn system_message_is_the_stored_resource() {
        let src = source(&[("a.cs", "x")]);
        let bundle = build_prompt(&src).unwrap();
        assert_eq!(bundle.system_message, SYSTEM_PROMPT);
        assert!(bundle
            .system_message
            .starts_with("You are a static code analysis engine."));
    }

    #[test]
    fn empty_project_is_an_error() {
        let src = source(&[]);
        assert!(matches!(build_prompt(&src), Err(LlmError::EmptyProject)));
    }

    #[test]
    fn prompt_is_deterministic() {
        let src = source(&[("a.cs", "x"), ("b.cs", "y")]);
        assert_eq!(build_prompt(&src).unwrap(), build_prompt(&src).unwrap());
    }

    fn response(content: &str) -> RawModelResponse {
        RawModelResponse {
            content: content.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
            latency: 0.0,
        }
    }

    const COMPLETE_OBJECT: &str = r#"{"RuleId":"SQL_INJECTION","RuleDescription":"SQL Injection vulnerability","Level":"Error","Message":"query built from user input","Path":"Controllers/UserController.cs","Category":"SQL Injection","StartLine":27,"EndLine":27,"StartColumn":17,"EndColumn":66}"#;

    #[test]
    fn fenced_empty_array_yields_nothing() {
        let (drafts, rejected) = extract_findings(&response("```json\n[]\n```")).unwrap();
        assert!(drafts.is_empty());
        assert_eq!(rejected, 0);
    }

    #[test]
    fn complete_object_becomes_a_draft() {
        let content = format!("```json\n[{COMPLETE_OBJECT}]\n```");
        let (drafts, rejected) = extract_findings(&response(&content)).unwrap();
        assert_eq!(drafts.len(), 1);
        assert_eq!(rejected, 0);
        assert_eq!(drafts[0].rule_id, "SQL_INJECTION");
        assert_eq!(drafts[0].level, Severity::Error);
        assert_eq!(drafts[0].start_line, 27);
    }

    #[test]
    fn missing_path_is_rejected_not_fatal() {
        let broken = COMPLETE_OBJECT.replace("\"Path\":\"Controllers/UserController.cs\",", "");
        let content = format!("```json\n[{COMPLETE_OBJECT},{broken}]\n```");
        let (drafts, rejected) = extract_findings(&response(&content)).unwrap();
        assert_eq!(drafts.len(), 1);
        assert_eq!(rejected, 1);
    }

    #[test]
    fn unparseable_level_is_rejected() {
        let broken = COMPLETE_OBJECT.replace("\"Level\":\"Error\"", "\"Level\":\"Fatal\"");
        let content = format!("```json\n[{broken}]\n```");
        let (drafts, rejected) = extract_findings(&response(&content)).unwrap();
        assert!(drafts.is_empty());
        assert_eq!(rejected, 1);
    }

    #[test]
    fn unfenced_array_is_found() {
        let content = format!("Here are my findings: [{COMPLETE_OBJECT}] — hope that helps");
        let (drafts, rejected) = extract_findings(&response(&content)).unwrap();
        assert_eq!(drafts.len(), 1);
        assert_eq!(rejected, 0);
    }

    #[test]
    fn prose_without_payload_is_an_error() {
        assert!(matches!(
            extract_findings(&response("No issues found.")),
            Err(LlmError::NoFindingsPayload)
        ));
    }

    #[test]
    fn broken_fence_is_malformed_json() {
        assert!(matches!(
            extract_findings(&response("```json\n[{\"RuleId\": }\n```")),
            Err(LlmError::MalformedJson(_))
        ));
    }

    #[test]
    fn brackets_inside_strings_do_not_confuse_fallback() {
        let content = format!(
            "note [not json] then [{COMPLETE_OBJECT}]",
        );
        let (drafts, _) = extract_findings(&response(&content)).unwrap();
        assert_eq!(drafts.len(), 1);
    }

    fn draft() -> FindingDraft {
        FindingDraft {
            rule_id: "SQL_INJECTION".into(),
            rule_description: "SQL Injection vulnerability".into(),
            level: Severity::Error,
            message: "bad query".into(),
            path: "a.cs".into(),
            category: "SQL Injection".into(),
            start_line: 3,
            end_line: 3,
            start_column: 1,
            end_column: 10,
        }
    }

    #[test]
    fn duplicate_rule_ids_are_deduplicated() {
        let mut second = draft();
        second.message = "another".into();
        let (log, _) = drafts_to_sarif(&[draft(), second], "gpt-4.1", "gpt-4.1-2025");
        let run = &log.runs[0];
        assert_eq!(run.rules.len(), 1);
        assert_eq!(run.results.len(), 2);
        assert!(run.results.iter().all(|r| r.rule_index == 0));
        assert_eq!(run.tool_name, "gpt-4.1");
        assert_eq!(run.tool_version, "gpt-4.1-2025");
    }

    #[test]
    fn empty_drafts_give_valid_empty_sarif() {
        let (log, normalized) = drafts_to_sarif(&[], "m", "m");
        assert!(crate::sarif::validate(&log).is_empty());
        assert!(log.runs[0].results.is_empty());
        assert_eq!(normalized, 0);
    }

    #[test]
    fn zero_start_line_is_clamped_and_counted() {
        let mut d = draft();
        d.start_line = 0;
        d.end_line = 0;
        let (log, normalized) = drafts_to_sarif(&[d], "m", "m");
        let region = log.runs[0].results[0].location.region;
        assert_eq!(region.start_line, 1);
        assert_eq!(region.end_line, 1);
        assert_eq!(normalized, 1);
    }

    #[test]
    fn converted_sarif_always_validates() {
        let mut inverted = draft();
        inverted.start_line = 10;
        inverted.end_line = 2;
        inverted.start_column = 9;
        inverted.end_column = -4;
        let (log, normalized) = drafts_to_sarif(&[draft(), inverted], "m", "m");
        assert!(crate::sarif::validate(&log).is_empty(), "{:?}", crate::sarif::validate(&log));
        assert_eq!(normalized, 1);
    }

    #[test]
    fn round3_is_half_up() {
        assert_eq!(round3(12.7406), 12.741);
        assert_eq!(round3(12.7404), 12.740);
        assert_eq!(round3(0.0005), 0.001);
    }

    #[test]
    fn auth_missing_before_any_network_activity() {
        let cfg = ModelConfig {
            analyzer_id: "m".into(),
            endpoint_url: "http://127.0.0.1:1/v1/chat/completions".into(),
            model_name: "m".into(),
            auth_token_env: "VULNBENCH_TEST_UNSET_TOKEN".into(),
            max_output_tokens: 16,
            temperature: 0.0,
            timeout: 1.0,
            max_retries: 0,
            retry_backoff_ms: 1,
            concurrency: 1,
        };
        let prompt = PromptBundle {
            system_message: SYSTEM_PROMPT.into(),
            user_message: "x".into(),
            project_id: "P".into(),
        };
        assert!(matches!(
            request_analysis(&prompt, &cfg),
            Err(LlmError::AuthMissing(_))
        ));
    }
}
