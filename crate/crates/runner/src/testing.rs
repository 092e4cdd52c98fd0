//! A minimal in-process chat-completion endpoint for tests.
//!
//! Speaks just enough HTTP/1.1 for a client that sends one POST per
//! connection: read headers plus a Content-Length body, reply with a
//! scripted status and chat-completion envelope, close. Per-hit behavior is
//! a plain function of the hit index, and the server counts concurrent
//! requests so backpressure claims are observable rather than assumed.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

/// What the stub sends back for one request.
pub struct StubReply {
    pub status: u16,
    /// Assistant message content, wrapped in the completion envelope.
    pub content: String,
    /// Verbatim body override; bypasses the envelope entirely.
    pub raw_body: Option<String>,
    /// Hold the response this long (the request counts as in-flight).
    pub delay: Duration,
    /// Retry-After header value, in seconds.
    pub retry_after: Option<u64>,
}

impl StubReply {
    /// A 200 whose assistant message is `text`.
    pub fn content(text: impl Into<String>) -> Self {
        Self {
            status: 200,
            content: text.into(),
            raw_body: None,
            delay: Duration::ZERO,
            retry_after: None,
        }
    }

    /// A bare status with an empty envelope.
    pub fn status(code: u16) -> Self {
        Self {
            status: code,
            content: String::new(),
            raw_body: None,
            delay: Duration::ZERO,
            retry_after: None,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_retry_after(mut self, seconds: u64) -> Self {
        self.retry_after = Some(seconds);
        self
    }

    pub fn with_raw_body(mut self, body: impl Into<String>) -> Self {
        self.raw_body = Some(body.into());
        self
    }
}

type Behavior = dyn Fn(usize) -> StubReply + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
    accept_task: JoinHandle<()>,
}

impl StubServer {
    /// Binds an ephemeral port and starts serving. `behavior` maps the
    /// zero-based hit index to the reply for that request.
    pub async fn start(behavior: impl Fn(usize) -> StubReply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0")
            .await
            .expect("bind stub listener");
        let addr = listener.local_addr().expect("stub listener address");
        let behavior: Arc<Behavior> = Arc::new(behavior);
        let hits = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));

        let accept_task = {
            let hits = hits.clone();
            let peak = peak.clone();
            tokio::spawn(async move {
                loop {
                    let Ok((stream, _)) = listener.accept().await else {
                        break;
                    };
                    let behavior = behavior.clone();
                    let hits = hits.clone();
                    let in_flight = in_flight.clone();
                    let peak = peak.clone();
                    tokio::spawn(async move {
                        let _ = handle(stream, behavior, hits, in_flight, peak).await;
                    });
                }
            })
        };

        Self {
            addr,
            hits,
            peak,
            accept_task,
        }
    }

    /// Base URL in the shape `EndpointConfig` expects; the client appends
    /// the chat-completions path itself.
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Highest number of requests handled simultaneously.
    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.accept_task.abort();
    }
}

/// Reads one request — headers, then exactly Content-Length body bytes —
/// and discards it.
async fn read_request(stream: &mut TcpStream) -> std::io::Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    let header_end = loop {
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        let mut chunk = [0u8; 1024];
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        buf.extend_from_slice(&chunk[..n]);
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_ascii_lowercase();
    let content_length = headers
        .lines()
        .find_map(|line| line.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let mut remaining = content_length.saturating_sub(buf.len() - header_end);
    let mut chunk = [0u8; 1024];
    while remaining > 0 {
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            break;
        }
        remaining = remaining.saturating_sub(n);
    }
    Ok(())
}

async fn handle(
    mut stream: TcpStream,
    behavior: Arc<Behavior>,
    hits: Arc<AtomicUsize>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
) -> std::io::Result<()> {
    read_request(&mut stream).await?;

    // The request counts as in-flight from fully received to fully
    // answered, which is the window the backpressure contract bounds.
    let hit_index = hits.fetch_add(1, Ordering::SeqCst);
    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    peak.fetch_max(now, Ordering::SeqCst);

    let reply = behavior(hit_index);
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }

    let body = reply.raw_body.unwrap_or_else(|| {
        serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": reply.content } }]
        })
        .to_string()
    });
    let reason = match reply.status {
        200 => "OK",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        _ => "Status",
    };
    let mut head = format!(
        "HTTP/1.1 {} {}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n",
        reply.status,
        reason,
        body.len(),
    );
    if let Some(seconds) = reply.retry_after {
        head.push_str(&format!("retry-after: {seconds}\r\n"));
    }
    head.push_str("\r\n");

    let written = async {
        stream.write_all(head.as_bytes()).await?;
        stream.write_all(body.as_bytes()).await?;
        stream.flush().await
    }
    .await;

    in_flight.fetch_sub(1, Ordering::SeqCst);
    written
}
