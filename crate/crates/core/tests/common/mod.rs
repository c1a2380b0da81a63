#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

pub enum Reply {
    Json(Value),
    Status(u16, String),
    Delayed(Duration, Value),
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub authorization: Option<String>,
    pub path: String,
    pub body: Value,
}

pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
}

impl MockServer {
    pub fn requests(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }
}

pub fn completion(content: &str) -> Value {
    json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }],
        "usage": { "prompt_tokens": 11, "completion_tokens": 7, "completion_tokens_details": { "reasoning_tokens": 3 } }
    })
}

fn handle(mut stream: TcpStream, handler: &(dyn Fn(&Value) -> Reply + Send + Sync), log: &Mutex<Vec<Recorded>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').unwrap_or((line, ""));
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap_or(0),
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0u8; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    log.lock().unwrap().push(Recorded { authorization, path, body: body.clone() });
    let (status, text) = match handler(&body) {
        Reply::Json(v) => (200, v.to_string()),
        Reply::Status(code, text) => (code, text),
        Reply::Delayed(d, v) => {
            thread::sleep(d);
            (200, v.to_string())
        }
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    let _ = stream.flush();
}

/// A chat-completion endpoint on a local port answering with `handler`.
pub fn serve(handler: impl Fn(&Value) -> Reply + Send + Sync + 'static) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (h, l) = (handler.clone(), log.clone());
            thread::spawn(move || handle(stream, &*h, &l));
        }
    });
    MockServer { url, requests }
}

pub fn last_user_message(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .to_string()
}

pub fn scripted_engine() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_scripted-uci"))
}

pub fn agentchess() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_agentchess"))
}

/// Writes a scripted-uci script and returns the engine arguments for it.
pub fn engine_script(dir: &Path, name: &str, script: &Value) -> Vec<String> {
    let path = dir.join(name);
    std::fs::write(&path, script.to_string()).unwrap();
    vec![path.display().to_string()]
}
