//! Minimal HTTP endpoint that replays canned planner replies.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Canned {
    /// Reply with `{"text": ...}`.
    Text(String),
    /// Hold the connection open past any sensible client timeout.
    Stall(Duration),
    /// Reply with an HTTP error status.
    Status(u16),
}

pub struct Stub {
    pub url: String,
    pub bodies: Arc<Mutex<Vec<String>>>,
}

/// Serves the replies in order, one per connection.
pub fn serve(replies: Vec<Canned>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/plan", listener.local_addr().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = bodies.clone();
    thread::spawn(move || {
        for reply in replies {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            seen.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
            let (status, payload) = match reply {
                Canned::Text(t) => (200, serde_json::json!({ "text": t }).to_string()),
                Canned::Stall(d) => {
                    thread::sleep(d);
                    (200, "{}".to_string())
                }
                Canned::Status(code) => (code, "{}".to_string()),
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    Stub { url, bodies }
}
