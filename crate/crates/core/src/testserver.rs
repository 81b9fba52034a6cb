//! One-shot HTTP server for exercising the real client code paths in
//! tests without a network.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;

/// Answers `responses` in order, records each raw request (head + body),
/// then shuts down. Returns the base URL `http://host:port`.
pub fn serve(responses: Vec<String>) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for response in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut filled = 0usize;
            loop {
                let n = stream.read(&mut buf[filled..]).unwrap();
                filled += n;
                let text = String::from_utf8_lossy(&buf[..filled]);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_len = text
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    if filled >= header_end + 4 + content_len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            tx.send(String::from_utf8_lossy(&buf[..filled]).into_owned()).unwrap();
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), rx)
}

/// 200 response shaped like a chat-completion result.
pub fn ok_response(content: &str) -> String {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string();
    text_response(&body)
}

/// 200 response with an arbitrary body.
pub fn text_response(body: &str) -> String {
    format!(
        "HTTP/1.1 200 OK\r\ncontent-type: text/plain; charset=utf-8\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        body.len(),
        body
    )
}

/// Empty-body response with the given status line, e.g. "404 Not Found".
pub fn error_response(status: &str) -> String {
    format!("HTTP/1.1 {status}\r\ncontent-length: 0\r\nconnection: close\r\n\r\n")
}
