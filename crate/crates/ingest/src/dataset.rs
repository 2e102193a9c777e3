//! CSV dataset loading.
//!
//! The canonical schema uses the `RepositoryRecord` field names as headers and
//! ISO-8601 timestamps. A [`ColumnMapping`] renames headers for datasets that
//! use a different layout.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ce_core::RepositoryRecord;
use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};

pub const REQUIRED_COLUMNS: [&str; 21] = [
    "owner",
    "name",
    "created_at",
    "last_commit",
    "is_fork",
    "commits",
    "contributors",
    "watchers",
    "stargazers",
    "forks",
    "total_issues",
    "open_issues",
    "total_pull_requests",
    "open_pull_requests",
    "merged_pull_requests",
    "resolved_issues",
    "issue_comments",
    "pr_comments",
    "branches",
    "releases",
    "license_id",
];

pub const OPTIONAL_COLUMNS: [&str; 1] = ["last_release"];

/// Canonical field name → header in the input file. Unmapped fields use their
/// canonical name. `full_name`, if mapped, supplies `owner/name` in one column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    /// Columns that may be absent; missing values default to zero / empty.
    #[serde(default)]
    pub optional: Vec<String>,
    /// Abort on the first malformed row instead of reporting it.
    #[serde(default)]
    pub strict: bool,
}

impl ColumnMapping {
    fn header_for<'a>(&'a self, field: &'a str) -> &'a str {
        self.columns.get(field).map_or(field, String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rejections: Vec<RowRejection>,
}

pub fn load_dataset(
    path: &Path,
    mapping: &ColumnMapping,
) -> Result<(Vec<RepositoryRecord>, ParseReport)> {
    let file = File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file, mapping)
}

enum Source {
    Column(usize),
    Split(usize),
    Missing,
}

struct Layout {
    sources: BTreeMap<&'static str, Source>,
}

impl Layout {
    fn resolve(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let full_name = mapping.columns.get("full_name").and_then(|h| find(h));
        let mut sources = BTreeMap::new();
        for field in REQUIRED_COLUMNS.iter().chain(OPTIONAL_COLUMNS.iter()) {
            let source = match find(mapping.header_for(field)) {
                Some(i) => Source::Column(i),
                None => match (*field, full_name) {
                    ("owner" | "name", Some(i)) => Source::Split(i),
                    _ if OPTIONAL_COLUMNS.contains(field)
                        || mapping.optional.iter().any(|o| o == field) =>
                    {
                        Source::Missing
                    }
                    _ => {
                        return Err(IngestError::MissingColumn(
                            mapping.header_for(field).to_string(),
                        ))
                    }
                },
            };
            sources.insert(*field, source);
        }
        Ok(Self { sources })
    }

    fn raw<'r>(
        &self,
        record: &'r csv::StringRecord,
        field: &str,
    ) -> std::result::Result<Option<&'r str>, String> {
        match self.sources[field] {
            Source::Column(i) => record
                .get(i)
                .map(|v| Some(v.trim()))
                .ok_or_else(|| format!("missing value for {field}")),
            Source::Split(i) => {
                let full = record
                    .get(i)
                    .ok_or_else(|| format!("missing value for {field}"))?;
                let (owner, name) = full
                    .trim()
                    .split_once('/')
                    .ok_or_else(|| format!("{full:?} is not of the form owner/name"))?;
                Ok(Some(if field == "owner" { owner } else { name }))
            }
            Source::Missing => Ok(None),
        }
    }
}

fn parse_timestamp(value: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(value) {
        return Ok(t.with_timezone(&Utc));
    }
    for format in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S%.f",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(value, format) {
            return Ok(t.and_utc());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("{value:?} is not an ISO-8601 timestamp"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        _ => Err(format!("{value:?} is not a boolean")),
    }
}

fn parse_row(
    layout: &Layout,
    record: &csv::StringRecord,
) -> std::result::Result<RepositoryRecord, String> {
    let text = |field: &str| -> std::result::Result<String, String> {
        Ok(layout.raw(record, field)?.unwrap_or_default().to_string())
    };
    let count = |field: &str| -> std::result::Result<u64, String> {
        match layout.raw(record, field)? {
            None | Some("") => Ok(0),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| format!("{field}: {v:?} is not a nonnegative integer")),
        }
    };
    let timestamp = |field: &str| -> std::result::Result<Option<DateTime<Utc>>, String> {
        match layout.raw(record, field)? {
            None | Some("") => Ok(None),
            Some(v) => parse_timestamp(v)
                .map(Some)
                .map_err(|e| format!("{field}: {e}")),
        }
    };
    let required_timestamp =
        |field: &str| timestamp(field)?.ok_or_else(|| format!("{field} is empty"));

    let repo = RepositoryRecord {
        owner: text("owner")?,
        name: text("name")?,
        created_at: required_timestamp("created_at")?,
        last_commit: required_timestamp("last_commit")?,
        is_fork: parse_bool(&text("is_fork")?).map_err(|e| format!("is_fork: {e}"))?,
        license_id: text("license_id")?,
        commits: count("commits")?,
        contributors: count("contributors")?,
        watchers: count("watchers")?,
        stargazers: count("stargazers")?,
        forks: count("forks")?,
        total_issues: count("total_issues")?,
        open_issues: count("open_issues")?,
        total_pull_requests: count("total_pull_requests")?,
        open_pull_requests: count("open_pull_requests")?,
        merged_pull_requests: count("merged_pull_requests")?,
        resolved_issues: count("resolved_issues")?,
        issue_comments: count("issue_comments")?,
        pr_comments: count("pr_comments")?,
        branches: count("branches")?,
        releases: count("releases")?,
        last_release: timestamp("last_release")?,
    };
    if repo.owner.is_empty() || repo.name.is_empty() {
        return Err("empty repository owner or name".into());
    }
    repo.validate().map_err(|e| e.to_string())?;
    Ok(repo)
}

/// Parses every data row; malformed rows are reported, not returned.
pub fn read_dataset<R: Read>(
    input: R,
    mapping: &ColumnMapping,
) -> Result<(Vec<RepositoryRecord>, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Io(e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let layout = Layout::resolve(&headers, mapping)?;

    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for (index, row) in reader.records().enumerate() {
        let row_number = index + 1;
        report.rows_read += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() != headers.len() {
                Err(format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    r.len()
                ))
            } else {
                parse_row(&layout, &r)
            }
        });
        match parsed {
            Ok(record) => records.push(record),
            Err(reason) => {
                if mapping.strict {
                    return Err(IngestError::ParseFailure {
                        row: row_number,
                        message: reason,
                    });
                }
                log::warn!("rejected row {row_number}: {reason}");
                report.rows_rejected += 1;
                report.rejections.push(RowRejection {
                    row: row_number,
                    reason,
                });
            }
        }
    }
    Ok((records, report))
}

fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes records in the canonical schema that [`read_dataset`] accepts.
pub fn write_dataset<W: Write>(output: W, records: &[RepositoryRecord]) -> Result<()> {
    let io = |e: csv::Error| IngestError::Io(e.to_string());
    let mut writer = csv::Writer::from_writer(output);
    writer
        .write_record(REQUIRED_COLUMNS.iter().chain(OPTIONAL_COLUMNS.iter()))
        .map_err(io)?;
    for r in records {
        let counts = [
            r.commits,
            r.contributors,
            r.watchers,
            r.stargazers,
            r.forks,
            r.total_issues,
            r.open_issues,
            r.total_pull_requests,
            r.open_pull_requests,
            r.merged_pull_requests,
            r.resolved_issues,
            r.issue_comments,
            r.pr_comments,
            r.branches,
            r.releases,
        ];
        let mut row = vec![
            r.owner.clone(),
            r.name.clone(),
            format_timestamp(&r.created_at),
            format_timestamp(&r.last_commit),
            r.is_fork.to_string(),
        ];
        row.extend(counts.iter().map(u64::to_string));
        row.push(r.license_id.clone());
        row.push(
            r.last_release
                .as_ref()
                .map(format_timestamp)
                .unwrap_or_default(),
        );
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush().map_err(|e| IngestError::Io(e.to_string()))
}
