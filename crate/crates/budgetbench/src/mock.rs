//! A small deterministic chat-completions server for tests and offline
//! end-to-end runs.
//!
//! The server speaks just enough of the OpenAI wire protocol for the
//! [`crate::modelio`] client: `POST …/chat/completions` with a JSON body,
//! one JSON reply. Responses are pure functions of the request, so a run
//! against the mock is exactly reproducible. A concurrency probe records
//! the peak number of in-flight requests.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

impl ChatRequest {
    pub fn last_user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// What the responder wants to say; the server applies the max_tokens cap
/// and fills in usage accounting (1 token = 1 whitespace word).
pub struct MockReply {
    pub text: String,
}

pub type Responder = Arc<dyn Fn(&ChatRequest) -> MockReply + Send + Sync>;

pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    peak: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

fn word_count(s: &str) -> u32 {
    s.split_whitespace().count() as u32
}

fn truncate_words(s: &str, n: u32) -> String {
    s.split_whitespace().take(n as usize).collect::<Vec<_>>().join(" ")
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl MockServer {
    /// Starts a server whose replies are computed by `responder`;
    /// `delay` is held per request to make concurrency observable.
    pub fn start(responder: Responder, delay: Duration) -> std::io::Result<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let peak = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));

        let sd = shutdown.clone();
        let pk = peak.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if sd.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let responder = responder.clone();
                let peak = pk.clone();
                let in_flight = in_flight.clone();
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &responder, &peak, &in_flight, delay);
                });
            }
        });

        Ok(MockServer {
            addr,
            shutdown,
            peak,
            handle: Some(handle),
        })
    }

    /// Base URL to hand to an [`crate::modelio::EndpointConfig`].
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Highest number of requests that were in flight simultaneously.
    pub fn peak_concurrency(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    /// Replies with exactly `n` filler tokens (or fewer if capped).
    pub fn fixed_tokens(n: u32) -> std::io::Result<MockServer> {
        MockServer::start(
            Arc::new(move |_req| MockReply {
                text: vec!["tok"; n as usize].join(" "),
            }),
            Duration::ZERO,
        )
    }

    /// Always fills the requested cap exactly.
    pub fn fill_cap() -> std::io::Result<MockServer> {
        MockServer::start(
            Arc::new(|req: &ChatRequest| MockReply {
                // one extra word so the cap always truncates
                text: vec!["tok"; req.max_tokens as usize + 1].join(" "),
            }),
            Duration::ZERO,
        )
    }

    /// Deterministic evaluation behavior: judge requests (detected by the
    /// `Verdict:` marker of the judge template) get a safe/unsafe verdict
    /// derived from the embedded response; plain completions refuse or
    /// comply based on a hash of the prompt, with the refusal rate fixed
    /// at 40%.
    pub fn deterministic_eval() -> std::io::Result<MockServer> {
        MockServer::start(Arc::new(deterministic_eval_responder), Duration::ZERO)
    }

    /// Like [`MockServer::deterministic_eval`] but holding each request
    /// for `delay`, for concurrency probing.
    pub fn deterministic_eval_with_delay(delay: Duration) -> std::io::Result<MockServer> {
        MockServer::start(Arc::new(deterministic_eval_responder), delay)
    }
}

fn deterministic_eval_responder(req: &ChatRequest) -> MockReply {
    let content = req.last_user_content();
    if content.contains("Verdict:") {
        // judge request: safe iff the quoted response looks like a refusal
        let lower = content.to_lowercase();
        let resp_part = lower.rsplit("response:").next().unwrap_or("");
        let verdict = if resp_part.contains("i cannot") || resp_part.contains("i'm sorry") {
            "safe"
        } else {
            "unsafe\nS9"
        };
        return MockReply {
            text: verdict.to_string(),
        };
    }
    if fnv1a(content) % 5 < 2 {
        MockReply {
            text: "I cannot help with that request.".into(),
        }
    } else {
        let filler = vec!["detail"; (fnv1a(content) % 40) as usize + 10].join(" ");
        MockReply {
            text: format!("Sure, here is a thorough walkthrough: {filler}"),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_connection(
    mut stream: TcpStream,
    responder: &Responder,
    peak: &AtomicUsize,
    in_flight: &AtomicUsize,
    delay: Duration,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end;
    loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_subslice(&buf, b"\r\n\r\n") {
            header_end = pos + 4;
            break;
        }
        if buf.len() > 1 << 20 {
            return Ok(());
        }
    }
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = head.lines();
    let request_line = lines.next().unwrap_or("");
    let path_ok = request_line.starts_with("POST") && request_line.contains("/chat/completions");
    let content_length: usize = lines
        .filter_map(|l| {
            let (k, v) = l.split_once(':')?;
            if k.trim().eq_ignore_ascii_case("content-length") {
                v.trim().parse().ok()
            } else {
                None
            }
        })
        .next()
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let body = &buf[header_end..(header_end + content_length).min(buf.len())];

    // probe window: request fully received, response not yet written
    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    peak.fetch_max(now, Ordering::SeqCst);
    if !delay.is_zero() {
        std::thread::sleep(delay);
    }

    let (status, response_body) = if !path_ok {
        ("404 Not Found", r#"{"error":"not found"}"#.to_string())
    } else {
        match serde_json::from_slice::<ChatRequest>(body) {
            Err(e) => ("400 Bad Request", format!(r#"{{"error":"{e}"}}"#)),
            Ok(req) => {
                let reply = responder(&req);
                let natural = word_count(&reply.text);
                let (text, completion_tokens, finish) = if natural >= req.max_tokens {
                    (
                        truncate_words(&reply.text, req.max_tokens),
                        req.max_tokens,
                        "length",
                    )
                } else {
                    (reply.text, natural, "stop")
                };
                let prompt_tokens = word_count(req.last_user_content());
                let body = serde_json::json!({
                    "choices": [{
                        "message": {"role": "assistant", "content": text},
                        "finish_reason": finish,
                    }],
                    "usage": {
                        "prompt_tokens": prompt_tokens,
                        "completion_tokens": completion_tokens,
                    },
                });
                ("200 OK", body.to_string())
            }
        }
    };

    in_flight.fetch_sub(1, Ordering::SeqCst);

    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
        response_body.len()
    );
    stream.write_all(response.as_bytes())?;
    Ok(())
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
