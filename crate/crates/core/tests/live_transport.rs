use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use t2sql_core::llm::{ChatMessage, ChatRequest, LiveTransport, LlmError, Transport};

struct Captured {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves one canned HTTP response per accepted connection, in order.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                authorization,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

fn ok_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3}
    })
    .to_string()
}

fn request() -> ChatRequest {
    ChatRequest {
        model: "m".into(),
        messages: vec![ChatMessage::user("hello")],
        temperature: 0.0,
        max_tokens: 16,
    }
}

#[test]
fn posts_openai_compatible_request() {
    let (base, seen) = serve(vec![(200, ok_body("SELECT 1"))]);
    let transport = LiveTransport::new(format!("{base}/v1/"), Some("secret".into())).unwrap();
    let resp = transport.send(&request()).unwrap();
    assert_eq!(resp.content, "SELECT 1");
    assert_eq!(resp.usage.prompt_tokens, 11);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer secret"));
    assert_eq!(seen[0].body["messages"][0]["role"], "user");
    assert_eq!(seen[0].body["temperature"], 0.0);
    assert_eq!(seen[0].body["max_tokens"], 16);
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (base, seen) = serve(vec![
        (503, "{}".into()),
        (429, "{}".into()),
        (200, ok_body("done")),
    ]);
    let transport = LiveTransport::new(base, None)
        .unwrap()
        .with_retry(3, Duration::from_millis(10));
    assert_eq!(transport.send(&request()).unwrap().content, "done");
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert!(seen.lock().unwrap()[0].authorization.is_none());
}

#[test]
fn gives_up_after_max_attempts() {
    let (base, seen) = serve(vec![(500, "{}".into()), (500, "{}".into())]);
    let transport = LiveTransport::new(base, None)
        .unwrap()
        .with_retry(2, Duration::from_millis(10));
    match transport.send(&request()) {
        Err(LlmError::Transport(msg)) => assert!(msg.contains("2 attempts"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, seen) = serve(vec![(400, r#"{"error":"bad"}"#.into())]);
    let transport = LiveTransport::new(base, None)
        .unwrap()
        .with_retry(3, Duration::from_millis(10));
    match transport.send(&request()) {
        Err(LlmError::Transport(msg)) => assert!(msg.contains("400"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}
