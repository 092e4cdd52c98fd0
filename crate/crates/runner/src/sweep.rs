//! Collecting the eleven-task battery from a chat-completion endpoint.
//!
//! A sweep issues `repeats` requests per task with bounded concurrency,
//! appends every request's final outcome to a JSONL transcript before any
//! parsing happens, and returns the parsed [`Dataset`] in canonical
//! (task-major, trial-minor) order no matter how the requests interleaved
//! on the wire. Individual failures — transport errors that survive the
//! retry budget, or responses the parser rejects — are recorded and the
//! sweep continues; only a task left with zero usable records aborts it.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use collider_core::data::{Dataset, JudgmentRecord, PromptStyle};
use collider_core::tasks::TaskId;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::parse::{parse_response, ParseMethod};
use crate::template::PromptTemplate;

/// Where and how to reach the endpoint.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    /// Base URL of the API, e.g. `http://localhost:8080/v1`. The
    /// `/chat/completions` path is appended unless already present.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token. The
    /// header is attached only when the variable is set and non-empty, so
    /// local stubs need no key material at all.
    pub api_key_env: Option<String>,
    /// Upper bound on simultaneously outstanding requests. Must be ≥ 1.
    pub max_in_flight: usize,
    /// Per-request timeout.
    pub timeout: Duration,
    /// Extra attempts after the first, so a request is sent at most
    /// `retries + 1` times.
    pub retries: u32,
    /// Wait before the first retry; doubles on each subsequent one. A
    /// Retry-After header from the endpoint overrides the wait for that
    /// retry.
    pub initial_backoff: Duration,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
            retries: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

/// HTTP-level fate of one request, before parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestOutcome {
    Ok,
    Failed,
}

/// One JSONL transcript line: the final outcome of one request. Carries
/// everything needed to rebuild the corresponding dataset record offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task_id: TaskId,
    pub trial_index: u32,
    pub agent_id: String,
    pub prompt_style: PromptStyle,
    pub content_domain: String,
    pub model: String,
    pub prompt: String,
    /// How many times the request went out (1 = no retries needed).
    pub attempts: u32,
    pub outcome: RequestOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// No usable HTTP response within the retry budget.
    Transport,
    /// The endpoint answered, but no valid judgment could be extracted.
    Parse,
}

/// A request that produced no dataset record, located by task and trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestFailure {
    pub task_id: TaskId,
    pub trial_index: u32,
    pub kind: FailureKind,
    pub message: String,
}

/// Everything a completed sweep produced.
#[derive(Debug)]
pub struct SweepOutcome {
    /// Parsed records in canonical order.
    pub dataset: Dataset,
    /// Requests that yielded no record, sorted by (task, trial).
    pub failures: Vec<RequestFailure>,
    /// Which extraction path produced each record, sorted by (task, trial).
    pub parse_methods: Vec<(TaskId, u32, ParseMethod)>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("cannot write transcript {path}: {source}")]
    Transcript {
        path: PathBuf,
        source: io::Error,
    },
    #[error("all {requests} requests for task {task} failed; last error: {last_error}")]
    TaskExhausted {
        task: TaskId,
        requests: u32,
        last_error: String,
    },
}

fn endpoint_url(base_url: &str) -> String {
    let trimmed = base_url.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

struct AttemptFailure {
    message: String,
    retry_after: Option<Duration>,
}

/// One POST; any outcome other than a 2xx body with extractable content is
/// a retryable failure.
async fn send_once(
    client: &reqwest::Client,
    url: &str,
    model: &str,
    bearer: Option<&str>,
    prompt: &str,
) -> Result<String, AttemptFailure> {
    let body = serde_json::json!({
        "model": model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": 0.0,
    });
    let mut request = client.post(url).json(&body);
    if let Some(token) = bearer {
        request = request.bearer_auth(token);
    }
    let response = request.send().await.map_err(|e| AttemptFailure {
        message: format!("transport: {e}"),
        retry_after: None,
    })?;
    let status = response.status();
    let retry_after = response
        .headers()
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let text = response.text().await.map_err(|e| AttemptFailure {
        message: format!("reading body: {e}"),
        retry_after,
    })?;
    if !status.is_success() {
        return Err(AttemptFailure {
            message: format!("endpoint returned {status}"),
            retry_after,
        });
    }
    let value: Value = serde_json::from_str(&text).map_err(|e| AttemptFailure {
        message: format!("malformed completion body: {e}"),
        retry_after: None,
    })?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| AttemptFailure {
            message: "completion body has no choices[0].message.content".to_string(),
            retry_after: None,
        })
}

async fn request_with_retries(
    client: &reqwest::Client,
    url: &str,
    config: &EndpointConfig,
    bearer: Option<&str>,
    prompt: &str,
) -> (u32, Result<String, String>) {
    let mut backoff = config.initial_backoff;
    let mut attempts = 0;
    loop {
        attempts += 1;
        match send_once(client, url, &config.model_name, bearer, prompt).await {
            Ok(text) => return (attempts, Ok(text)),
            Err(failure) => {
                if attempts > config.retries {
                    return (attempts, Err(failure.message));
                }
                tokio::time::sleep(failure.retry_after.unwrap_or(backoff)).await;
                backoff *= 2;
            }
        }
    }
}

fn append_line(file: &mut File, entry: &TranscriptEntry) -> io::Result<()> {
    let line = serde_json::to_string(entry).map_err(io::Error::other)?;
    file.write_all(line.as_bytes())?;
    file.write_all(b"\n")?;
    file.flush()
}

/// Runs the full battery against the endpoint.
///
/// Issues `repeats` requests for each of the eleven tasks, at most
/// `config.max_in_flight` outstanding at a time, and appends one transcript
/// line per request's final outcome — before that response is parsed — so
/// the transcript is complete even if parsing rejects everything.
pub async fn run_sweep(
    config: &EndpointConfig,
    template: &PromptTemplate,
    repeats: u32,
    agent_id: &str,
    content_domain: &str,
    transcript_path: &Path,
) -> Result<SweepOutcome, SweepError> {
    if repeats == 0 {
        return Err(SweepError::Config("repeats must be at least 1".into()));
    }
    if config.max_in_flight == 0 {
        return Err(SweepError::Config("max_in_flight must be at least 1".into()));
    }

    let bearer = config
        .api_key_env
        .as_deref()
        .and_then(|name| std::env::var(name).ok())
        .filter(|token| !token.is_empty());

    let client = reqwest::Client::builder()
        .timeout(config.timeout)
        .build()
        .map_err(|e| SweepError::Config(format!("http client: {e}")))?;

    let mut transcript = OpenOptions::new()
        .create(true)
        .append(true)
        .open(transcript_path)
        .map_err(|source| SweepError::Transcript {
            path: transcript_path.to_path_buf(),
            source,
        })?;

    let url = endpoint_url(&config.base_url);
    let prompts: Vec<(TaskId, String)> = TaskId::ALL
        .iter()
        .map(|&task| (task, template.render(task)))
        .collect();

    let jobs = prompts
        .iter()
        .flat_map(|(task, prompt)| (0..repeats).map(move |trial| (*task, trial, prompt.as_str())));

    let mut responses = futures::stream::iter(jobs)
        .map(|(task, trial, prompt)| {
            let client = &client;
            let url = url.as_str();
            let bearer = bearer.as_deref();
            async move {
                let (attempts, result) =
                    request_with_retries(client, url, config, bearer, prompt).await;
                (task, trial, prompt, attempts, result)
            }
        })
        .buffer_unordered(config.max_in_flight);

    let mut records = Vec::new();
    let mut failures: Vec<RequestFailure> = Vec::new();
    let mut methods: Vec<(TaskId, u32, ParseMethod)> = Vec::new();
    let mut last_error: [Option<String>; 11] = Default::default();

    // This loop is the single transcript writer; appends happen in
    // completion order and always precede parsing.
    while let Some((task, trial, prompt, attempts, result)) = responses.next().await {
        let entry = TranscriptEntry {
            task_id: task,
            trial_index: trial,
            agent_id: agent_id.to_string(),
            prompt_style: template.style,
            content_domain: content_domain.to_string(),
            model: config.model_name.clone(),
            prompt: prompt.to_string(),
            attempts,
            outcome: if result.is_ok() {
                RequestOutcome::Ok
            } else {
                RequestOutcome::Failed
            },
            response_text: result.as_ref().ok().cloned(),
            error: result.as_ref().err().cloned(),
        };
        append_line(&mut transcript, &entry).map_err(|source| SweepError::Transcript {
            path: transcript_path.to_path_buf(),
            source,
        })?;

        match result {
            Ok(text) => match parse_response(template.style, &text) {
                Ok(parsed) => {
                    records.push(JudgmentRecord {
                        agent_id: agent_id.to_string(),
                        prompt_style: template.style,
                        content_domain: content_domain.to_string(),
                        task_id: task,
                        response: parsed.value,
                        trial_index: trial,
                        timestamp: None,
                    });
                    methods.push((task, trial, parsed.method));
                }
                Err(err) => {
                    let message = err.to_string();
                    last_error[task.index()] = Some(message.clone());
                    failures.push(RequestFailure {
                        task_id: task,
                        trial_index: trial,
                        kind: FailureKind::Parse,
                        message,
                    });
                }
            },
            Err(message) => {
                last_error[task.index()] = Some(message.clone());
                failures.push(RequestFailure {
                    task_id: task,
                    trial_index: trial,
                    kind: FailureKind::Transport,
                    message,
                });
            }
        }
    }
    drop(responses);

    for task in TaskId::ALL {
        if !records.iter().any(|r| r.task_id == task) {
            return Err(SweepError::TaskExhausted {
                task,
                requests: repeats,
                last_error: last_error[task.index()]
                    .take()
                    .unwrap_or_else(|| "no error recorded".to_string()),
            });
        }
    }

    let mut dataset = Dataset::new(records);
    dataset.sort_canonical();
    failures.sort_by_key(|f| (f.task_id, f.trial_index));
    methods.sort_by_key(|&(task, trial, _)| (task, trial));

    Ok(SweepOutcome {
        dataset,
        failures,
        parse_methods: methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{StubReply, StubServer};
    use std::time::Instant;

    fn fast_config(url: String) -> EndpointConfig {
        let mut config = EndpointConfig::new(url, "stub-model");
        config.initial_backoff = Duration::from_millis(10);
        config
    }

    fn direct() -> PromptTemplate {
        PromptTemplate::default_for(PromptStyle::Direct)
    }

    #[test]
    fn endpoint_url_appends_the_path_once() {
        assert_eq!(
            endpoint_url("http://h:1/v1"),
            "http://h:1/v1/chat/completions"
        );
        assert_eq!(
            endpoint_url("http://h:1/v1/"),
            "http://h:1/v1/chat/completions"
        );
        assert_eq!(
            endpoint_url("http://h:1/v1/chat/completions"),
            "http://h:1/v1/chat/completions"
        );
    }

    #[tokio::test]
    async fn echo_stub_round_trips_the_battery() {
        let server = StubServer::start(|_| StubReply::content("42")).await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let outcome = run_sweep(
            &fast_config(server.url()),
            &direct(),
            2,
            "stub-agent",
            "neutral",
            &transcript,
        )
        .await
        .unwrap();

        assert_eq!(outcome.dataset.len(), 22);
        assert!(outcome.failures.is_empty());
        assert!(outcome
            .dataset
            .records
            .iter()
            .all(|r| r.response == 42.0 && r.agent_id == "stub-agent"));
        assert!(outcome
            .parse_methods
            .iter()
            .all(|&(_, _, m)| m == ParseMethod::SingleNumber));
        assert_eq!(server.hits(), 22);

        // Canonical order: task-major, trial-minor.
        let order: Vec<(TaskId, u32)> = outcome
            .dataset
            .records
            .iter()
            .map(|r| (r.task_id, r.trial_index))
            .collect();
        let expected: Vec<(TaskId, u32)> = TaskId::ALL
            .into_iter()
            .flat_map(|t| (0..2).map(move |i| (t, i)))
            .collect();
        assert_eq!(order, expected);

        let lines = std::fs::read_to_string(&transcript).unwrap();
        assert_eq!(lines.lines().count(), 22);
    }

    #[tokio::test]
    async fn dataset_is_reconstructible_from_the_transcript() {
        let server = StubServer::start(|hit| StubReply::content(format!("{}", 30 + hit % 5))).await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let outcome = run_sweep(
            &fast_config(server.url()),
            &direct(),
            2,
            "a",
            "d",
            &transcript,
        )
        .await
        .unwrap();

        let mut rebuilt = Vec::new();
        for line in std::fs::read_to_string(&transcript).unwrap().lines() {
            let entry: TranscriptEntry = serde_json::from_str(line).unwrap();
            assert_eq!(entry.outcome, RequestOutcome::Ok);
            let parsed =
                parse_response(entry.prompt_style, entry.response_text.as_ref().unwrap()).unwrap();
            rebuilt.push(JudgmentRecord {
                agent_id: entry.agent_id,
                prompt_style: entry.prompt_style,
                content_domain: entry.content_domain,
                task_id: entry.task_id,
                response: parsed.value,
                trial_index: entry.trial_index,
                timestamp: None,
            });
        }
        let mut rebuilt = Dataset::new(rebuilt);
        rebuilt.sort_canonical();
        assert_eq!(rebuilt, outcome.dataset);
    }

    #[tokio::test]
    async fn a_transient_500_is_retried() {
        let server = StubServer::start(|hit| {
            if hit == 0 {
                StubReply::status(500)
            } else {
                StubReply::content("63")
            }
        })
        .await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let outcome = run_sweep(
            &fast_config(server.url()),
            &direct(),
            1,
            "a",
            "d",
            &transcript,
        )
        .await
        .unwrap();

        assert_eq!(outcome.dataset.len(), 11);
        assert!(outcome.failures.is_empty());
        assert_eq!(server.hits(), 12);

        // Exactly one transcript entry needed a second attempt.
        let attempts: Vec<u32> = std::fs::read_to_string(&transcript)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<TranscriptEntry>(l).unwrap().attempts)
            .collect();
        assert_eq!(attempts.iter().filter(|&&a| a == 2).count(), 1);
        assert_eq!(attempts.iter().filter(|&&a| a == 1).count(), 10);
    }

    #[tokio::test]
    async fn retry_after_overrides_the_backoff() {
        let server = StubServer::start(|hit| {
            if hit == 0 {
                StubReply::status(429).with_retry_after(0)
            } else {
                StubReply::content("50")
            }
        })
        .await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        // A 5s backoff would blow the elapsed budget; the Retry-After of 0s
        // must take precedence for the test to finish quickly.
        let mut config = fast_config(server.url());
        config.initial_backoff = Duration::from_secs(5);
        config.retries = 1;

        let started = Instant::now();
        let outcome = run_sweep(&config, &direct(), 1, "a", "d", &transcript)
            .await
            .unwrap();
        assert_eq!(outcome.dataset.len(), 11);
        assert_eq!(server.hits(), 12);
        assert!(
            started.elapsed() < Duration::from_secs(2),
            "retry waited {:?}, Retry-After was ignored",
            started.elapsed()
        );
    }

    #[tokio::test]
    async fn a_malformed_response_is_isolated() {
        // With max_in_flight = 1, requests go out strictly task-major, so
        // hit 3 is task II, trial 1.
        let server = StubServer::start(|hit| {
            if hit == 3 {
                StubReply::content("I would rather not say.")
            } else {
                StubReply::content("42")
            }
        })
        .await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let mut config = fast_config(server.url());
        config.max_in_flight = 1;

        let outcome = run_sweep(&config, &direct(), 2, "a", "d", &transcript)
            .await
            .unwrap();

        assert_eq!(outcome.dataset.len(), 21);
        assert_eq!(outcome.failures.len(), 1);
        let failure = &outcome.failures[0];
        assert_eq!(failure.task_id, TaskId::II);
        assert_eq!(failure.trial_index, 1);
        assert_eq!(failure.kind, FailureKind::Parse);

        // The rejected response still reached the transcript.
        let lines = std::fs::read_to_string(&transcript).unwrap();
        assert_eq!(lines.lines().count(), 22);
        assert!(lines.contains("I would rather not say."));
    }

    #[tokio::test]
    async fn in_flight_requests_respect_the_bound() {
        let server = StubServer::start(|_| {
            StubReply::content("42").with_delay(Duration::from_millis(40))
        })
        .await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let mut config = fast_config(server.url());
        config.max_in_flight = 3;

        let outcome = run_sweep(&config, &direct(), 2, "a", "d", &transcript)
            .await
            .unwrap();
        assert_eq!(outcome.dataset.len(), 22);
        let peak = server.peak_in_flight();
        assert!(peak <= 3, "peak in-flight was {peak}");
        // The delays are long enough that the limit is actually reached.
        assert_eq!(peak, 3);
    }

    #[tokio::test]
    async fn a_task_with_no_usable_records_fails_the_sweep() {
        // Task I's only request returns prose; every other task is fine.
        let server = StubServer::start(|hit| {
            if hit == 0 {
                StubReply::content("no number here")
            } else {
                StubReply::content("42")
            }
        })
        .await;
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("sweep.jsonl");

        let mut config = fast_config(server.url());
        config.max_in_flight = 1;
        config.retries = 0;

        let err = run_sweep(&config, &direct(), 1, "a", "d", &transcript)
            .await
            .unwrap_err();
        match err {
            SweepError::TaskExhausted { task, requests, .. } => {
                assert_eq!(task, TaskId::I);
                assert_eq!(requests, 1);
            }
            other => panic!("expected TaskExhausted, got {other:?}"),
        }
    }

    #[tokio::test]
    async fn zero_repeats_is_a_config_error() {
        let config = EndpointConfig::new("http://localhost:1/v1", "m");
        let err = run_sweep(
            &config,
            &direct(),
            0,
            "a",
            "d",
            Path::new("/tmp/unused.jsonl"),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, SweepError::Config(_)));
    }
}
