//! Shared test support: a minimal HTTP server speaking the wire protocol
//! and independent brute-force metric oracles.

// Each test binary compiles its own copy and uses a subset.
#![allow(dead_code)]

pub mod oracles;

use pragrank::backend::{Backend, DecodingMethod, DecodingSpec, Prompt, ToyLm};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

pub const PINNED_TS: &str = "946684800"; // 2000-01-01T00:00:00Z

pub fn run_cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pragrank"))
        .args(args)
        .current_dir(dir)
        .env_remove("PRAGRANK_BACKEND_URL")
        .env_remove("PRAGRANK_MAX_CONCURRENCY")
        .output()
        .expect("binary runs")
}

pub fn run_cli_ok(dir: &Path, args: &[&str]) {
    let out = run_cli(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// The reference pipeline chain the goldens pin down: fixture ->
/// generate -> answer -> score -> sweep -> aggregate (summary, curves).
pub fn run_pipeline_chain(dir: &Path) -> Vec<&'static str> {
    run_cli_ok(
        dir,
        &[
            "fixture",
            "-o",
            "instances.jsonl",
            "--seed",
            "7",
            "--count",
            "20",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "generate",
            "instances.jsonl",
            "-o",
            "pools_generated.jsonl",
            "--backend",
            "toy",
            "--n",
            "10",
            "--decoding",
            "nucleus,p=0.95,temp=1.5",
            "--seed",
            "42",
            "--max-new-tokens",
            "24",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "answer",
            "instances.jsonl",
            "--pools",
            "pools_generated.jsonl",
            "-o",
            "pools_answered.jsonl",
            "--backend",
            "toy",
            "--beam-size",
            "5",
            "--max-new-tokens",
            "8",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "score",
            "instances.jsonl",
            "--pools",
            "pools_answered.jsonl",
            "-o",
            "pools_scored.jsonl",
            "--backend",
            "toy",
            "--objectives",
            "answer,source",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "sweep",
            "instances.jsonl",
            "--pools",
            "pools_scored.jsonl",
            "-o",
            "report.json",
            "--seed",
            "11",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "aggregate",
            "report.json",
            "--table",
            "summary",
            "-o",
            "summary.csv",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    run_cli_ok(
        dir,
        &[
            "aggregate",
            "report.json",
            "--table",
            "curves",
            "-o",
            "curves.csv",
            "--run-timestamp",
            PINNED_TS,
        ],
    );
    vec![
        "instances.jsonl",
        "pools_generated.jsonl",
        "pools_answered.jsonl",
        "pools_scored.jsonl",
        "report.json",
        "summary.csv",
        "curves.csv",
    ]
}

pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn json(value: serde_json::Value) -> Self {
        Self {
            status: 200,
            body: value.to_string(),
        }
    }

    pub fn error(status: u16) -> Self {
        Self {
            status,
            body: "{}".to_string(),
        }
    }
}

type Handler = dyn Fn(&str, serde_json::Value) -> HttpResponse + Send + Sync;

/// Tiny single-threaded HTTP/1.1 server for exercising the wire client.
pub struct MockServer {
    addr: std::net::SocketAddr,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(
        handler: impl Fn(&str, serde_json::Value) -> HttpResponse + Send + Sync + 'static,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().unwrap();
        let shutdown = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);

        let shutdown_flag = shutdown.clone();
        let request_count = requests.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if shutdown_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                request_count.fetch_add(1, Ordering::SeqCst);
                let _ = serve_one(stream, handler.as_ref());
            }
        });

        Self {
            addr,
            shutdown,
            requests,
            handle: Some(handle),
        }
    }

    /// Server backed by a real toy model, for end-to-end wire runs.
    pub fn start_toy_backed(corpus: &str) -> Self {
        let lm = ToyLm::from_corpus(corpus).expect("valid corpus");
        Self::start(move |path, body| toy_wire_handler(&lm, path, body))
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(mut stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = head.lines();
    let request_line = lines.next().unwrap_or("");
    let path = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("/")
        .to_string();
    let content_length: usize = lines
        .filter_map(|l| l.split_once(':'))
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.trim().parse().ok())
        .unwrap_or(0);

    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    let parsed: serde_json::Value =
        serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let response = handler(&path, parsed);
    let reason = if response.status == 200 {
        "OK"
    } else {
        "Error"
    };
    let payload = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        reason,
        response.body.len(),
        response.body
    );
    stream.write_all(payload.as_bytes())?;
    stream.flush()
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

/// Serve /v1/score, /v1/generate, and /v1/metric from a toy model, the
/// way a real logprob-capable server would.
pub fn toy_wire_handler(lm: &ToyLm, path: &str, body: serde_json::Value) -> HttpResponse {
    match path {
        "/v1/score" => {
            let prompt = body["prompt"].as_str().unwrap_or_default().to_string();
            let continuation = body["continuation"].as_str().unwrap_or_default();
            if continuation.is_empty() {
                return HttpResponse::error(400);
            }
            match lm.score(&Prompt::plain(prompt), continuation) {
                Ok(lp) => HttpResponse::json(serde_json::json!({
                    "total_logprob": encode_logprob(lp),
                    "token_logprobs": [],
                })),
                Err(_) => HttpResponse::error(400),
            }
        }
        "/v1/generate" => {
            let prompt = body["prompt"].as_str().unwrap_or_default().to_string();
            let n = body["n"].as_u64().unwrap_or(1) as usize;
            let method: DecodingMethod = match body["method"].as_str().unwrap_or("").parse() {
                Ok(m) => m,
                Err(_) => return HttpResponse::error(400),
            };
            let spec = DecodingSpec {
                method,
                temperature: body["temperature"].as_f64().unwrap_or(1.0),
                beam_size: body["beam_size"].as_u64().map(|v| v as usize),
                k: body["k"].as_u64().map(|v| v as usize),
                p: body["p"].as_f64(),
                max_new_tokens: body["max_new_tokens"].as_u64().unwrap_or(8) as usize,
                seed: body["seed"].as_u64().unwrap_or(0),
            };
            match lm.generate(&Prompt::plain(prompt), n, &spec) {
                Ok(texts) => {
                    let candidates: Vec<serde_json::Value> = texts
                        .into_iter()
                        .map(|t| {
                            serde_json::json!({
                                "text": t.text,
                                "total_logprob": encode_logprob(t.total_logprob),
                                "token_logprobs": t.token_logprobs,
                            })
                        })
                        .collect();
                    HttpResponse::json(serde_json::json!({ "candidates": candidates }))
                }
                Err(_) => HttpResponse::error(400),
            }
        }
        "/v1/metric" => {
            // Stand-in learned metric: ROUGE-1 F1 against the references.
            let candidate = body["candidate"].as_str().unwrap_or_default();
            let references = body["references"].as_array().cloned().unwrap_or_default();
            let score = references
                .iter()
                .filter_map(|r| r.as_str())
                .map(|r| {
                    let c = pragrank::metrics::TokenSeq::from_text(candidate);
                    let t = pragrank::metrics::TokenSeq::from_text(r);
                    pragrank::metrics::rouge_n(&c, &t, 1).f1
                })
                .fold(0.0f64, f64::max);
            HttpResponse::json(serde_json::json!({ "score": score }))
        }
        _ => HttpResponse::error(404),
    }
}

fn encode_logprob(lp: f64) -> serde_json::Value {
    if lp == f64::NEG_INFINITY {
        serde_json::Value::String("-inf".to_string())
    } else {
        serde_json::json!(lp)
    }
}
