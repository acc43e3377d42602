//! Finding-to-ground-truth assignment under a location-strictness policy.
//!
//! True positives are chosen by a maximum-cardinality one-to-one matching so
//! the TP count never depends on report ordering; duplicate findings on an
//! already-claimed vulnerability stay unmatched and count toward FP.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CanonicalCategory, GroundTruthManifest};
use crate::sarif::{normalize_path, Finding};

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("findings and manifest refer to different projects")]
    ProjectMismatch,
    #[error("inconsistent report: {0}")]
    InconsistentReport(String),
}

/// How strictly a finding's location must agree with the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationStrictness {
    /// Line intervals must intersect.
    RegionOverlap,
    /// Start lines must be equal.
    SameLine,
    /// Region is ignored entirely (the LLM exception).
    FileOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub strictness: LocationStrictness,
    pub require_category_match: bool,
    /// Ordered keyword table; first match in table order wins.
    pub category_synonyms: Vec<(String, CanonicalCategory)>,
}

/// Built-in keyword table. Scan order matters: earlier entries win.
pub fn builtin_synonyms() -> Vec<(String, CanonicalCategory)> {
    use CanonicalCategory::*;
    [
        ("sql", SqlInjection),
        ("xss", Xss),
        ("cross-site", Xss),
        ("secret", HardcodedSecret),
        ("credential", HardcodedSecret),
        ("hardcoded", HardcodedSecret),
        ("command", CommandInjection),
        ("crypt", WeakCrypto),
        ("md5", WeakCrypto),
        ("sha1", WeakCrypto),
        ("des", WeakCrypto),
        ("weak_algorithm", WeakCrypto),
        ("outdated", OutdatedDependency),
        ("deprecated", OutdatedDependency),
        ("vulnerable_library", OutdatedDependency),
        ("dependency", OutdatedDependency),
        ("deserial", InsecureDeserialization),
        ("auth", AuthIssue),
        ("valid", InputValidation),
        ("saniti", InputValidation),
        ("path traversal", InsecureFileHandling),
        ("upload", InsecureFileHandling),
        ("file", InsecureFileHandling),
    ]
    .into_iter()
    .map(|(k, c)| (k.to_string(), c))
    .collect()
}

impl MatchPolicy {
    pub fn new(strictness: LocationStrictness) -> Self {
        MatchPolicy {
            strictness,
            require_category_match: true,
            category_synonyms: builtin_synonyms(),
        }
    }

    /// Default for live LLM runs: file-level matching only.
    pub fn llm_default() -> Self {
        Self::new(LocationStrictness::FileOnly)
    }

    /// Default for imported static-tool SARIF: region overlap.
    pub fn sarif_import_default() -> Self {
        Self::new(LocationStrictness::RegionOverlap)
    }
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self::new(LocationStrictness::RegionOverlap)
    }
}

/// The finding↔truth assignment for one (analyzer, project) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    /// (finding index, vulnerability id), one-to-one.
    pub pairs: Vec<(usize, String)>,
    pub unmatched_findings: Vec<usize>,
    pub unmatched_vulns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCounts {
    pub total_found: usize,
    pub true_positives: usize,
    pub known_vulnerabilities: usize,
}

fn token_match(haystack_lower: &str, keyword: &str) -> bool {
    haystack_lower
        .split(|c: char| !c.is_ascii_alphanumeric())
        .any(|token| token == keyword)
}

/// Map free-form category text onto the closed taxonomy: case-insensitive
/// keyword scan, first hit in table order wins, no hit means `Other`.
/// Short crypto tokens ("des", "md5", "sha1") only match whole words so
/// "Deserialization" is not mistaken for the DES cipher.
pub fn normalize_category(
    free_text: &str,
    synonyms: &[(String, CanonicalCategory)],
) -> CanonicalCategory {
    let lower = free_text.to_lowercase();
    for (keyword, category) in synonyms {
        let hit = match keyword.as_str() {
            "des" | "md5" | "sha1" => token_match(&lower, keyword),
            _ => lower.contains(keyword.as_str()),
        };
        if hit {
            return *category;
        }
    }
    CanonicalCategory::Other
}

/// Category of a finding, inferred from its rule id, rule description, and
/// message (SARIF findings carry no category field of their own).
pub fn finding_category(
    finding: &Finding,
    synonyms: &[(String, CanonicalCategory)],
) -> CanonicalCategory {
    let combined = format!(
        "{} {} {}",
        finding.rule_id, finding.rule_description, finding.message
    );
    normalize_category(&combined, synonyms)
}

fn compatible(
    finding: &Finding,
    finding_cat: CanonicalCategory,
    vuln: &crate::corpus::KnownVulnerability,
    policy: &MatchPolicy,
) -> bool {
    if normalize_path(&finding.path) != normalize_path(&vuln.path) {
        return false;
    }
    if policy.require_category_match && finding_cat != vuln.category {
        return false;
    }
    match policy.strictness {
        LocationStrictness::FileOnly => true,
        LocationStrictness::SameLine => finding.region.start_line == vuln.region.start_line,
        LocationStrictness::RegionOverlap => {
            finding.region.start_line <= vuln.region.end_line
                && vuln.region.start_line <= finding.region.end_line
        }
    }
}

// Kuhn's augmenting-path algorithm; instances here are tens of nodes.
fn augment(
    vuln: usize,
    adj: &[Vec<usize>],
    visited: &mut [bool],
    owner: &mut [Option<usize>],
) -> bool {
    for &finding in &adj[vuln] {
        if visited[finding] {
            continue;
        }
        visited[finding] = true;
        if owner[finding].is_none() || augment(owner[finding].unwrap(), adj, visited, owner) {
            owner[finding] = Some(vuln);
            return true;
        }
    }
    false
}

/// Maximum-cardinality one-to-one assignment of findings to known
/// vulnerabilities under the policy. Ties break by manifest order then
/// finding order.
pub fn match_findings(
    findings: &[Finding],
    manifest: &GroundTruthManifest,
    policy: &MatchPolicy,
) -> MatchReport {
    let categories: Vec<CanonicalCategory> = findings
        .iter()
        .map(|f| finding_category(f, &policy.category_synonyms))
        .collect();

    // adjacency: vuln (manifest order) -> compatible finding indices (in order)
    let adj: Vec<Vec<usize>> = manifest
        .vulnerabilities
        .iter()
        .map(|vuln| {
            findings
                .iter()
                .enumerate()
                .filter(|(i, f)| compatible(f, categories[*i], vuln, policy))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; findings.len()];
    for vuln in 0..adj.len() {
        let mut visited = vec![false; findings.len()];
        augment(vuln, &adj, &mut visited, &mut owner);
    }

    let mut matched_vuln: Vec<Option<usize>> = vec![None; adj.len()];
    for (finding, &assigned) in owner.iter().enumerate() {
        if let Some(vuln) = assigned {
            matched_vuln[vuln] = Some(finding);
        }
    }

    let pairs: Vec<(usize, String)> = manifest
        .vulnerabilities
        .iter()
        .enumerate()
        .filter_map(|(vi, v)| matched_vuln[vi].map(|fi| (fi, v.id.clone())))
        .collect();
    let unmatched_findings: Vec<usize> = (0..findings.len())
        .filter(|i| owner[*i].is_none())
        .collect();
    let unmatched_vulns: Vec<String> = manifest
        .vulnerabilities
        .iter()
        .enumerate()
        .filter(|(vi, _)| matched_vuln[*vi].is_none())
        .map(|(_, v)| v.id.clone())
        .collect();

    MatchReport {
        pairs,
        unmatched_findings,
        unmatched_vulns,
    }
}

/// Carry the raw counts through, with the TP bound checked.
pub fn confusion_counts(
    report: &MatchReport,
    total_found: usize,
    known: usize,
) -> Result<RawCounts, MatcherError> {
    let tp = report.pairs.len();
    if tp > total_found.min(known) {
        return Err(MatcherError::InconsistentReport(format!(
            "{tp} pairs exceed min(total_found {total_found}, known {known})"
        )));
    }
    Ok(RawCounts {
        total_found,
        true_positives: tp,
        known_vulnerabilities: known,
    })
}
