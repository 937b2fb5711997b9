#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::json;
use twinsim_gateway::transport::{HttpRequest, HttpResponse, Transport, TransportError};
use twinsim_gateway::{Endpoint, Sleeper};

pub fn endpoint() -> Endpoint {
    Endpoint {
        base_url: "http://provider.test".into(),
        path: "/v1/chat/completions".into(),
        api_key_env: None,
        timeout_secs: 5,
    }
}

pub fn chat_ok(text: &str) -> HttpResponse {
    HttpResponse {
        status: 200,
        body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
        retry_after: None,
    }
}

pub fn status(code: u16) -> HttpResponse {
    HttpResponse { status: code, body: format!("status {code}"), retry_after: None }
}

/// Replies from a fixed script, then falls back to echoing the last user message.
#[derive(Default)]
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<HttpResponse, TransportError>>>,
    pub calls: AtomicUsize,
    pub bodies: Mutex<Vec<serde_json::Value>>,
}

impl ScriptedTransport {
    pub fn new(script: Vec<Result<HttpResponse, TransportError>>) -> Self {
        ScriptedTransport { script: Mutex::new(script.into()), ..Default::default() }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ScriptedTransport {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.bodies.lock().unwrap().push(request.body.clone());
        if let Some(next) = self.script.lock().unwrap().pop_front() {
            return next;
        }
        let messages = request.body["messages"].as_array().cloned().unwrap_or_default();
        let last = messages.last().and_then(|m| m["content"].as_str()).unwrap_or("");
        Ok(chat_ok(&format!("echo: {last}")))
    }
}

#[derive(Default)]
pub struct RecordingSleeper {
    pub delays: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays.lock().unwrap().push(d);
    }
}
