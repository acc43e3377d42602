//! Benchmark project loading, ground-truth manifests, and corpus statistics.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sarif::{normalize_path, Region};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file is not valid UTF-8: {0}")]
    Encoding(PathBuf),
    #[error("no files matched under {0}")]
    EmptyProject(PathBuf),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("project mismatch: source {source_id:?} vs manifest {manifest_id:?}")]
    ProjectMismatch {
        source_id: String,
        manifest_id: String,
    },
    #[error("manifest path {path:?} does not resolve to a loaded file")]
    DanglingManifestPath { path: String },
}

/// Closed vulnerability taxonomy; `Other` is the only catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalCategory {
    SqlInjection,
    Xss,
    HardcodedSecret,
    CommandInjection,
    WeakCrypto,
    OutdatedDependency,
    InsecureDeserialization,
    AuthIssue,
    InputValidation,
    InsecureFileHandling,
    Other,
}

impl CanonicalCategory {
    pub fn parse(text: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(text.to_string())).ok()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CanonicalCategory::SqlInjection => "sql_injection",
            CanonicalCategory::Xss => "xss",
            CanonicalCategory::HardcodedSecret => "hardcoded_secret",
            CanonicalCategory::CommandInjection => "command_injection",
            CanonicalCategory::WeakCrypto => "weak_crypto",
            CanonicalCategory::OutdatedDependency => "outdated_dependency",
            CanonicalCategory::InsecureDeserialization => "insecure_deserialization",
            CanonicalCategory::AuthIssue => "auth_issue",
            CanonicalCategory::InputValidation => "input_validation",
            CanonicalCategory::InsecureFileHandling => "insecure_file_handling",
            CanonicalCategory::Other => "other",
        }
    }
}

/// A project loaded from disk: relative paths plus UTF-8 contents,
/// lexicographically ordered so prompts are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectSource {
    pub project_id: String,
    pub root_dir: PathBuf,
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnownVulnerability {
    pub id: String,
    pub category: CanonicalCategory,
    pub path: String,
    pub region: ManifestRegion,
    pub description: String,
}

/// Region as spelled in the manifest file (camelCase SARIF-style keys).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestRegion {
    pub start_line: u32,
    pub end_line: u32,
    pub start_column: u32,
    pub end_column: u32,
}

impl From<ManifestRegion> for Region {
    fn from(r: ManifestRegion) -> Region {
        Region {
            start_line: r.start_line,
            end_line: r.end_line,
            start_column: r.start_column,
            end_column: r.end_column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroundTruthManifest {
    pub project_id: String,
    pub vulnerabilities: Vec<KnownVulnerability>,
}

impl GroundTruthManifest {
    /// Every manifest path must resolve to a loaded file.
    pub fn verify_against(&self, src: &ProjectSource) -> Result<(), CorpusError> {
        let loaded: HashSet<&str> = src.files.iter().map(|(p, _)| p.as_str()).collect();
        for vuln in &self.vulnerabilities {
            if !loaded.contains(normalize_path(&vuln.path).as_str()) {
                return Err(CorpusError::DanglingManifestPath {
                    path: vuln.path.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub file_count: usize,
    /// Unicode code points summed over file contents (whitespace included).
    pub char_count: usize,
    pub vuln_count: usize,
}

fn extension_matches(path: &Path, extensions: &[String]) -> bool {
    let ext = match path.extension().and_then(|e| e.to_str()) {
        Some(e) => e.to_ascii_lowercase(),
        None => return false,
    };
    extensions
        .iter()
        .any(|wanted| wanted.trim_start_matches('.').eq_ignore_ascii_case(&ext))
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0
        && entry.file_type().is_dir()
        && entry
            .file_name()
            .to_str()
            .map(|n| n.starts_with('.'))
            .unwrap_or(false)
}

/// Load a project by scanning `root_dir` recursively for files with one of
/// the given extensions (case-insensitive, leading dot optional). Hidden
/// directories are skipped. The project id is the directory name.
pub fn load_project(root_dir: &Path, extensions: &[String]) -> Result<ProjectSource, CorpusError> {
    let project_id = root_dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("project")
        .to_string();

    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root_dir)
        .into_iter()
        .filter_entry(|e| !is_hidden(e))
    {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root_dir.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        if !entry.file_type().is_file() || !extension_matches(entry.path(), extensions) {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| CorpusError::Io {
            path: entry.path().to_path_buf(),
            source: e,
        })?;
        let content = String::from_utf8(bytes)
            .map_err(|_| CorpusError::Encoding(entry.path().to_path_buf()))?;
        let rel = entry
            .path()
            .strip_prefix(root_dir)
            .expect("walkdir yields paths under root")
            .to_string_lossy()
            .into_owned();
        files.push((normalize_path(&rel), content));
    }

    if files.is_empty() {
        return Err(CorpusError::EmptyProject(root_dir.to_path_buf()));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));

    Ok(ProjectSource {
        project_id,
        root_dir: root_dir.to_path_buf(),
        files,
    })
}

/// Load and validate a `groundtruth.json` manifest.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruthManifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;

    // Categories are parsed by hand so an out-of-taxonomy string surfaces
    // as UnknownCategory rather than a generic serde error.
    let raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CorpusError::MalformedManifest(e.to_string()))?;
    if let Some(vulns) = raw.get("vulnerabilities").and_then(|v| v.as_array()) {
        for v in vulns {
            if let Some(cat) = v.get("category").and_then(|c| c.as_str()) {
                if CanonicalCategory::parse(cat).is_none() {
                    return Err(CorpusError::UnknownCategory(cat.to_string()));
                }
            }
        }
    }

    let manifest: GroundTruthManifest = serde_json::from_str(&text)
        .map_err(|e| CorpusError::MalformedManifest(e.to_string()))?;

    let mut seen = HashSet::new();
    for vuln in &manifest.vulnerabilities {
        if !seen.insert(vuln.id.as_str()) {
            return Err(CorpusError::MalformedManifest(format!(
                "duplicate vulnerability id {:?}",
                vuln.id
            )));
        }
    }
    Ok(manifest)
}

/// File, character, and vulnerability counts for one project.
pub fn corpus_stats(
    src: &ProjectSource,
    manifest: &GroundTruthManifest,
) -> Result<ProjectStats, CorpusError> {
    if src.project_id != manifest.project_id {
        return Err(CorpusError::ProjectMismatch {
            source_id: src.project_id.clone(),
            manifest_id: manifest.project_id.clone(),
        });
    }
    Ok(ProjectStats {
        file_count: src.files.len(),
        char_count: src.files.iter().map(|(_, c)| c.chars().count()).sum(),
        vuln_count: manifest.vulnerabilities.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, rel: &str, content: &str) {
        let path = dir.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    #[test]
    fn loads_matching_files_recursively() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "a.cs", "class A {}");
        write(tmp.path(), "b.CS", "class B {}");
        write(tmp.path(), "sub/c.cs", "class C {}");
        write(tmp.path(), "proj.csproj", "<Project/>");
        write(tmp.path(), "app.sln", "sln");
        write(tmp.path(), "notes.txt", "skip me");
        write(tmp.path(), ".git/objects/x.cs", "skip me too");

        let src = load_project(
            tmp.path(),
            &["cs".into(), ".csproj".into(), "sln".into()],
        )
        .unwrap();
        let paths: Vec<&str> = src.files.iter().map(|(p, _)| p.as_str()).collect();
        assert_eq!(paths, vec!["a.cs", "app.sln", "b.CS", "proj.csproj", "sub/c.cs"]);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_project(tmp.path(), &["cs".into()]),
            Err(CorpusError::EmptyProject(_))
        ));
    }

    #[test]
    fn non_matching_extension_is_excluded() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "a.cs", "x");
        write(tmp.path(), "readme.txt", "y");
        let src = load_project(tmp.path(), &["cs".into()]).unwrap();
        assert_eq!(src.files.len(), 1);
        assert_eq!(src.files[0].0, "a.cs");
    }

    #[test]
    fn non_utf8_file_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("bad.cs"), [0xff, 0xfe, 0x00]).unwrap();
        match load_project(tmp.path(), &["cs".into()]) {
            Err(CorpusError::Encoding(p)) => assert!(p.ends_with("bad.cs")),
            other => panic!("expected Encoding error, got {other:?}"),
        }
    }

    #[test]
    fn load_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "z.cs", "z");
        write(tmp.path(), "a.cs", "a");
        write(tmp.path(), "m/n.cs", "n");
        let first = load_project(tmp.path(), &["cs".into()]).unwrap();
        let second = load_project(tmp.path(), &["cs".into()]).unwrap();
        assert_eq!(first, second);
    }

    const MANIFEST: &str = r#"{
      "projectId": "S01",
      "vulnerabilities": [
        {"id": "V1", "category": "sql_injection", "path": "Controllers/UserController.cs",
         "region": {"startLine": 27, "endLine": 27, "startColumn": 17, "endColumn": 66},
         "description": "user input concatenated into query"}
      ]
    }"#;

    #[test]
    fn parses_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("groundtruth.json");
        fs::write(&path, MANIFEST).unwrap();
        let manifest = load_ground_truth(&path).unwrap();
        assert_eq!(manifest.project_id, "S01");
        assert_eq!(manifest.vulnerabilities.len(), 1);
        assert_eq!(
            manifest.vulnerabilities[0].category,
            CanonicalCategory::SqlInjection
        );
    }

    #[test]
    fn empty_manifest_is_valid() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("groundtruth.json");
        fs::write(&path, r#"{"projectId":"S00","vulnerabilities":[]}"#).unwrap();
        let manifest = load_ground_truth(&path).unwrap();
        assert!(manifest.vulnerabilities.is_empty());
    }

    #[test]
    fn duplicate_vuln_id_is_malformed() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("groundtruth.json");
        let dup = MANIFEST.replace(
            "]\n    }",
            r#",{"id": "V1", "category": "xss", "path": "a.cs",
               "region": {"startLine":1,"endLine":1,"startColumn":1,"endColumn":2},
               "description": "dup"}]
            }"#,
        );
        fs::write(&path, dup).unwrap();
        assert!(matches!(
            load_ground_truth(&path),
            Err(CorpusError::MalformedManifest(_))
        ));
    }

    #[test]
    fn unknown_category_is_its_own_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("groundtruth.json");
        fs::write(&path, MANIFEST.replace("sql_injection", "quantum_leak")).unwrap();
        match load_ground_truth(&path) {
            Err(CorpusError::UnknownCategory(c)) => assert_eq!(c, "quantum_leak"),
            other => panic!("expected UnknownCategory, got {other:?}"),
        }
    }

    #[test]
    fn stats_count_code_points() {
        let src = ProjectSource {
            project_id: "P".into(),
            root_dir: PathBuf::new(),
            files: vec![("a.cs".into(), "abc".into())],
        };
        let manifest = GroundTruthManifest {
            project_id: "P".into(),
            vulnerabilities: vec![],
        };
        assert_eq!(
            corpus_stats(&src, &manifest).unwrap(),
            ProjectStats {
                file_count: 1,
                char_count: 3,
                vuln_count: 0
            }
        );

        let src2 = ProjectSource {
            project_id: "P".into(),
            root_dir: PathBuf::new(),
            files: vec![("a.cs".into(), "ab".into()), ("b.cs".into(), "c".into())],
        };
        let manifest2: GroundTruthManifest = serde_json::from_str(
            r#"{"projectId":"P","vulnerabilities":[
                {"id":"V1","category":"xss","path":"a.cs",
                 "region":{"startLine":1,"endLine":1,"startColumn":1,"endColumn":1},
                 "description":"d"},
                {"id":"V2","category":"other","path":"b.cs",
                 "region":{"startLine":1,"endLine":1,"startColumn":1,"endColumn":1},
                 "description":"d"}]}"#,
        )
        .unwrap();
        assert_eq!(
            corpus_stats(&src2, &manifest2).unwrap(),
            ProjectStats {
                file_count: 2,
                char_count: 3,
                vuln_count: 2
            }
        );
    }

    #[test]
    fn stats_reject_mismatched_projects() {
        let src = ProjectSource {
            project_id: "A".into(),
            root_dir: PathBuf::new(),
            files: vec![("a.cs".into(), "x".into())],
        };
        let manifest = GroundTruthManifest {
            project_id: "B".into(),
            vulnerabilities: vec![],
        };
        assert!(matches!(
            corpus_stats(&src, &manifest),
            Err(CorpusError::ProjectMismatch { .. })
        ));
    }

    #[test]
    fn manifest_paths_must_resolve() {
        let manifest: GroundTruthManifest = serde_json::from_str(MANIFEST).unwrap();
        let src = ProjectSource {
            project_id: "S01".into(),
            root_dir: PathBuf::new(),
            files: vec![("other.cs".into(), "x".into())],
        };
        assert!(matches!(
            manifest.verify_against(&src),
            Err(CorpusError::DanglingManifestPath { .. })
        ));
    }
}
