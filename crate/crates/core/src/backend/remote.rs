//! OpenAI-compatible HTTP providers (`/chat/completions`, `/embeddings`).

use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::{digest, normalize, prompt_text, BackendConfig, BackendError, CallRecord, ChatBackend, ChatMessage, EmbeddingProvider};

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

struct Http {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    calls: Mutex<Vec<CallRecord>>,
}

impl Http {
    fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            config,
            client,
            calls: Mutex::new(Vec::new()),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &Value, request_digest: String) -> Result<Value, BackendError> {
        let key = std::env::var(&self.config.api_key_env).map_err(|_| BackendError::MissingKey(self.config.api_key_env.clone()))?;
        let url = self.url(path);
        let policy = &self.config.retry;
        let mut attempts = 0;
        let result = loop {
            attempts += 1;
            let outcome = self
                .client
                .post(&url)
                .bearer_auth(&key)
                .json(body)
                .send()
                .map_err(|e| {
                    Failure::Retryable(BackendError::Transport {
                        attempts,
                        msg: e.to_string(),
                    })
                })
                .and_then(|resp| {
                    let status = resp.status();
                    let text = resp.text().map_err(|e| {
                        Failure::Retryable(BackendError::Transport {
                            attempts,
                            msg: e.to_string(),
                        })
                    })?;
                    if status.is_success() {
                        serde_json::from_str::<Value>(&text).map_err(|e| Failure::Fatal(BackendError::Malformed(e.to_string())))
                    } else {
                        let err = BackendError::Http {
                            status: status.as_u16(),
                            body: text.chars().take(200).collect(),
                        };
                        if status.as_u16() == 429 || status.is_server_error() {
                            Err(Failure::Retryable(err))
                        } else {
                            Err(Failure::Fatal(err))
                        }
                    }
                });
            match outcome {
                Ok(v) => break Ok(v),
                Err(Failure::Fatal(e)) => break Err(e),
                Err(Failure::Retryable(e)) if attempts >= policy.attempts => {
                    break Err(match e {
                        BackendError::Transport { msg, .. } => BackendError::Transport { attempts, msg },
                        other => other,
                    })
                }
                Err(Failure::Retryable(e)) => {
                    log::warn!("{} attempt {attempts} failed: {e}", path);
                    std::thread::sleep(policy.delay(attempts));
                }
            }
        };
        self.calls.lock().unwrap().push(CallRecord {
            request_digest,
            response_digest: result.as_ref().ok().map(|v| digest(&v.to_string())),
            attempts,
        });
        result
    }
}

pub struct RemoteChat {
    http: Http,
}

impl RemoteChat {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        Ok(Self { http: Http::new(config)? })
    }
}

impl ChatBackend for RemoteChat {
    fn name(&self) -> &str {
        "remote"
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let cfg = &self.http.config;
        let body = json!({
            "model": cfg.model,
            "messages": messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        });
        let resp = self.http.post("chat/completions", &body, digest(&prompt_text(messages)))?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
    }

    fn calls(&self) -> Vec<CallRecord> {
        self.http.calls.lock().unwrap().clone()
    }
}

pub struct RemoteEmbedding {
    http: Http,
}

impl RemoteEmbedding {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        Ok(Self { http: Http::new(config)? })
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.http.calls.lock().unwrap().clone()
    }
}

impl EmbeddingProvider for RemoteEmbedding {
    fn id(&self) -> String {
        format!("remote:{}", self.http.config.embedding_model)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "model": self.http.config.embedding_model, "input": texts });
        let resp = self.http.post("embeddings", &body, digest(&texts.join("\n")))?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Malformed("missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(BackendError::Malformed(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                data.len()
            )));
        }
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(data.len());
        for item in data {
            let v: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| BackendError::Malformed("missing embedding".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| BackendError::Malformed("non-numeric embedding".into())))
                .collect::<Result<_, _>>()?;
            if let Some(first) = out.first() {
                if first.len() != v.len() {
                    return Err(BackendError::DimensionMismatch {
                        expected: first.len(),
                        got: v.len(),
                    });
                }
            }
            out.push(normalize(v)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod stub {
    //! Minimal HTTP/1.1 server replying with canned `(status, body)` pairs.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    pub struct Stub {
        pub url: String,
        pub hits: Arc<Mutex<Vec<String>>>,
    }

    pub fn serve(replies: Vec<(u16, String)>) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let hits = Arc::new(Mutex::new(Vec::new()));
        let seen = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream);
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h == "\r\n" || h.is_empty() {
                        break;
                    }
                    if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                seen.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        Stub { url, hits }
    }
}
