//! Judgment datasets: the CSV wire format and per-agent grouping.
//!
//! A dataset is a flat table of probability judgments on the 0-100 scale,
//! one row per trial. Loading is fail-fast: the first malformed cell aborts
//! with its line number and field name, because a silently skipped row will
//! bias every statistic computed downstream.

use crate::tasks::TaskId;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Expected header, in order. `timestamp` is the one optional column.
const COLUMNS: [&str; 6] = [
    "agent_id",
    "prompt_style",
    "content_domain",
    "task_id",
    "response",
    "trial_index",
];

/// How the judgment was elicited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Direct,
    Cot,
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptStyle::Direct => "direct",
            PromptStyle::Cot => "cot",
        })
    }
}

/// An unrecognized prompt style label.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("unknown prompt style {0:?} (expected \"direct\" or \"cot\")")]
pub struct ParsePromptStyleError(pub String);

impl FromStr for PromptStyle {
    type Err = ParsePromptStyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(PromptStyle::Direct),
            "cot" => Ok(PromptStyle::Cot),
            _ => Err(ParsePromptStyleError(s.to_string())),
        }
    }
}

/// One trial: a single 0-100 judgment on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub agent_id: String,
    pub prompt_style: PromptStyle,
    pub content_domain: String,
    pub task_id: TaskId,
    /// Raw response on the 0-100 scale.
    pub response: f64,
    pub trial_index: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// What failed while reading a dataset, and where.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header column {index} is {found:?}, expected {expected:?}")]
    Header {
        index: usize,
        found: String,
        expected: String,
    },
    #[error("line {line}, field `{field}`: {message}")]
    Field {
        line: u64,
        field: &'static str,
        message: String,
    },
}

/// A loaded judgment table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<JudgmentRecord>,
}

/// Identity of one analysis unit: an agent under one prompt style within one
/// content domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub agent_id: String,
    pub prompt_style: PromptStyle,
    pub content_domain: String,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.agent_id, self.prompt_style, self.content_domain
        )
    }
}

/// All records belonging to one [`GroupKey`].
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGroup {
    pub key: GroupKey,
    pub records: Vec<JudgmentRecord>,
}

impl AgentGroup {
    /// (task, response / 100) pairs, the estimator's input scale.
    pub fn normalized_judgments(&self) -> Vec<(TaskId, f64)> {
        self.records
            .iter()
            .map(|r| (r.task_id, r.response / 100.0))
            .collect()
    }
}

impl Dataset {
    pub fn new(records: Vec<JudgmentRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Reads and validates a CSV file.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file)
    }

    /// Reads and validates CSV content from any reader.
    pub fn from_reader(reader: impl Read) -> Result<Self, DataError> {
        let mut csv = csv::ReaderBuilder::new().from_reader(reader);

        let headers = csv.headers()?.clone();
        for (index, expected) in COLUMNS.iter().enumerate() {
            match headers.get(index) {
                Some(found) if found == *expected => {}
                other => {
                    return Err(DataError::Header {
                        index,
                        found: other.unwrap_or("<missing>").to_string(),
                        expected: expected.to_string(),
                    })
                }
            }
        }
        let has_timestamp = match headers.get(COLUMNS.len()) {
            None => false,
            Some("timestamp") => true,
            Some(found) => {
                return Err(DataError::Header {
                    index: COLUMNS.len(),
                    found: found.to_string(),
                    expected: "timestamp".to_string(),
                })
            }
        };

        let mut records = Vec::new();
        for row in csv.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |index: usize, name: &'static str| -> Result<&str, DataError> {
                row.get(index).ok_or(DataError::Field {
                    line,
                    field: name,
                    message: "missing value".to_string(),
                })
            };

            let agent_id = field(0, "agent_id")?.trim().to_string();
            if agent_id.is_empty() {
                return Err(DataError::Field {
                    line,
                    field: "agent_id",
                    message: "must not be empty".to_string(),
                });
            }
            let prompt_style =
                field(1, "prompt_style")?
                    .parse()
                    .map_err(|e: ParsePromptStyleError| DataError::Field {
                        line,
                        field: "prompt_style",
                        message: e.to_string(),
                    })?;
            let content_domain = field(2, "content_domain")?.trim().to_string();
            let task_id = field(3, "task_id")?.parse().map_err(|e| {
                DataError::Field {
                    line,
                    field: "task_id",
                    message: format!("{e}"),
                }
            })?;
            let response_text = field(4, "response")?.trim();
            let response: f64 = response_text.parse().map_err(|_| DataError::Field {
                line,
                field: "response",
                message: format!("{response_text:?} is not a number"),
            })?;
            if !(0.0..=100.0).contains(&response) {
                return Err(DataError::Field {
                    line,
                    field: "response",
                    message: format!("{response} lies outside the 0-100 scale"),
                });
            }
            let trial_text = field(5, "trial_index")?.trim();
            let trial_index: u32 = trial_text.parse().map_err(|_| DataError::Field {
                line,
                field: "trial_index",
                message: format!("{trial_text:?} is not a non-negative integer"),
            })?;
            let timestamp = if has_timestamp {
                match field(6, "timestamp")?.trim() {
                    "" => None,
                    t => Some(t.to_string()),
                }
            } else {
                None
            };

            records.push(JudgmentRecord {
                agent_id,
                prompt_style,
                content_domain,
                task_id,
                response,
                trial_index,
                timestamp,
            });
        }
        Ok(Self { records })
    }

    /// Writes the dataset back out. The `timestamp` column is emitted only
    /// when at least one record carries one.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        crate::fsutil::write_atomic(path.as_ref(), &buf).map_err(|source| DataError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn to_writer(&self, writer: impl Write) -> Result<(), DataError> {
        let with_timestamp = self.records.iter().any(|r| r.timestamp.is_some());
        let mut csv = csv::Writer::from_writer(writer);

        let mut header: Vec<&str> = COLUMNS.to_vec();
        if with_timestamp {
            header.push("timestamp");
        }
        csv.write_record(&header)?;

        for r in &self.records {
            let mut row = vec![
                r.agent_id.clone(),
                r.prompt_style.to_string(),
                r.content_domain.clone(),
                r.task_id.to_string(),
                format!("{}", r.response),
                r.trial_index.to_string(),
            ];
            if with_timestamp {
                row.push(r.timestamp.clone().unwrap_or_default());
            }
            csv.write_record(&row)?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Keeps only records matching the predicate.
    pub fn filter(&self, mut keep: impl FnMut(&JudgmentRecord) -> bool) -> Dataset {
        Dataset::new(self.records.iter().filter(|r| keep(r)).cloned().collect())
    }

    /// Splits into per-(agent, style, domain) groups, sorted by key so
    /// iteration order never depends on row order in the file.
    pub fn groups(&self) -> Vec<AgentGroup> {
        let mut grouped: std::collections::BTreeMap<GroupKey, Vec<JudgmentRecord>> =
            std::collections::BTreeMap::new();
        for r in &self.records {
            let key = GroupKey {
                agent_id: r.agent_id.clone(),
                prompt_style: r.prompt_style,
                content_domain: r.content_domain.clone(),
            };
            grouped.entry(key).or_default().push(r.clone());
        }
        grouped
            .into_iter()
            .map(|(key, records)| AgentGroup { key, records })
            .collect()
    }

    /// Canonical row order: agent, style, domain, battery position, trial.
    pub fn sort_canonical(&mut self) {
        self.records.sort_by(|a, b| {
            (
                &a.agent_id,
                a.prompt_style,
                &a.content_domain,
                a.task_id,
                a.trial_index,
            )
                .cmp(&(
                    &b.agent_id,
                    b.prompt_style,
                    &b.content_domain,
                    b.task_id,
                    b.trial_index,
                ))
        });
    }
}
