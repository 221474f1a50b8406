use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use houseplan::llm_client::{ChatError, ChatMessage, ChatRequest, ChatService, HttpChat, HttpConfig};

fn config(port: u16, retries: u32, timeout_ms: u64) -> HttpConfig {
    HttpConfig {
        endpoint: format!("http://127.0.0.1:{port}/v1/chat/completions"),
        api_key: Some("test-key".into()),
        timeout: Duration::from_millis(timeout_ms),
        retries,
        backoff: Duration::from_millis(10),
        max_concurrency: 2,
    }
}

fn request() -> ChatRequest {
    ChatRequest::new("m", vec![ChatMessage::system("s"), ChatMessage::user("hello")])
}

/// Reads one HTTP request (headers plus a content-length body) and returns
/// the raw head and body.
fn read_request(stream: &mut TcpStream) -> (String, String) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut head = String::new();
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        head.push_str(&line);
        if line == "\r\n" || line.is_empty() {
            break;
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).unwrap();
    (head, String::from_utf8(body).unwrap())
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let msg = format!(
        "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(msg.as_bytes()).unwrap();
}

#[test]
fn silent_server_times_out_after_all_attempts() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let accepted = Arc::new(AtomicUsize::new(0));
    let count = accepted.clone();
    thread::spawn(move || {
        let mut held = Vec::new();
        for s in listener.incoming() {
            count.fetch_add(1, Ordering::SeqCst);
            // Keep the socket open and never answer.
            held.push(s.unwrap());
        }
    });
    let client = HttpChat::new(config(port, 2, 200));
    let started = Instant::now();
    let err = client.complete(&request()).unwrap_err();
    assert_eq!(err, ChatError::Timeout { attempts: 3 });
    assert_eq!(accepted.load(Ordering::SeqCst), 3);
    assert!(started.elapsed() < Duration::from_secs(10));
}

#[test]
fn server_error_is_retried_then_succeeds() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (i, s) in listener.incoming().take(2).enumerate() {
            let mut s = s.unwrap();
            let (head, body) = read_request(&mut s);
            assert!(head.to_ascii_lowercase().contains("authorization: bearer test-key"));
            bodies.push(body);
            if i == 0 {
                respond(&mut s, "503 Service Unavailable", "{}");
            } else {
                respond(
                    &mut s,
                    "200 OK",
                    r#"{"choices":[{"message":{"role":"assistant","content":"done"}}],"usage":{"prompt_tokens":7,"completion_tokens":2}}"#,
                );
            }
        }
        bodies
    });
    let client = HttpChat::new(config(port, 2, 2000));
    let resp = client.complete(&request()).unwrap();
    assert_eq!(resp.content, "done");
    assert_eq!(resp.usage.prompt_tokens, 7);
    assert_eq!(resp.usage.completion_tokens, 2);
    let bodies = handle.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(sent["model"], "m");
    assert_eq!(sent["messages"][1]["role"], "user");
    assert_eq!(sent["messages"][1]["content"], "hello");
}

#[test]
fn client_error_is_not_retried() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let accepted = Arc::new(AtomicUsize::new(0));
    let count = accepted.clone();
    thread::spawn(move || {
        for s in listener.incoming() {
            count.fetch_add(1, Ordering::SeqCst);
            let mut s = s.unwrap();
            read_request(&mut s);
            respond(&mut s, "400 Bad Request", r#"{"error":"bad"}"#);
        }
    });
    let client = HttpChat::new(config(port, 3, 2000));
    match client.complete(&request()) {
        Err(ChatError::HttpStatus { code, body }) => {
            assert_eq!(code, 400);
            assert!(body.contains("bad"));
        }
        other => panic!("expected HTTP 400, got {other:?}"),
    }
    assert_eq!(accepted.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_reply_is_a_decode_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    thread::spawn(move || {
        let mut s = listener.incoming().next().unwrap().unwrap();
        read_request(&mut s);
        respond(&mut s, "200 OK", r#"{"choices":[]}"#);
    });
    let client = HttpChat::new(config(port, 0, 2000));
    assert!(matches!(client.complete(&request()), Err(ChatError::Decode(_))));
}

#[test]
fn invalid_request_never_reaches_the_network() {
    // Nothing listens on this port; validation must fail first.
    let client = HttpChat::new(config(1, 0, 200));
    let empty = ChatRequest::new("m", vec![]);
    assert!(matches!(client.complete(&empty), Err(ChatError::InvalidRequest(_))));
}
