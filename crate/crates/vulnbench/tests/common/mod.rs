//! Minimal in-process chat-completion stub for integration tests.
//!
//! Listens on an ephemeral loopback port and answers each POST with whatever
//! the handler closure returns for (request index, request body). The accept
//! loop runs on a detached thread; it ends when the test process exits.

// not every test binary uses every helper
#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub struct StubReply {
    pub status: u16,
    pub body: String,
}

pub struct StubServer {
    pub endpoint_url: String,
    pub requests_seen: Arc<AtomicUsize>,
}

/// An OpenAI-style chat-completion body whose assistant message is `content`.
pub fn chat_completion(content: &str) -> StubReply {
    let body = serde_json::json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }],
        "usage": { "prompt_tokens": 120, "completion_tokens": 80 }
    });
    StubReply {
        status: 200,
        body: body.to_string(),
    }
}

pub fn error_reply(status: u16, message: &str) -> StubReply {
    StubReply {
        status,
        body: serde_json::json!({ "error": { "message": message } }).to_string(),
    }
}

fn status_text(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<String> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    Some(String::from_utf8_lossy(&buf[header_end..]).to_string())
}

/// Start a stub on an ephemeral port. `handler` maps (0-based request
/// index, request body JSON) to the reply.
pub fn spawn<F>(handler: F) -> StubServer
where
    F: Fn(usize, &str) -> StubReply + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
    let addr = listener.local_addr().expect("stub local addr");
    let requests_seen = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&requests_seen);

    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(body) = read_request(&mut stream) else {
                continue;
            };
            let index = counter.fetch_add(1, Ordering::SeqCst);
            let reply = handler(index, &body);
            let response = format!(
                "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                status_text(reply.status),
                reply.body.len(),
                reply.body
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });

    StubServer {
        endpoint_url: format!("http://{addr}/v1/chat/completions"),
        requests_seen,
    }
}
