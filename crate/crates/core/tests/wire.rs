//! Wire-client behavior against a scripted HTTP server: payload
//! passthrough, retry policy, status mapping, and response validation.

mod common;

use common::{HttpResponse, MockServer};
use pragrank::backend::{Backend, DecodingSpec, HttpBackend, Prompt, ToyLm};
use pragrank::metrics::MetricEval;
use pragrank::Error;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

fn fast(backend: HttpBackend) -> HttpBackend {
    backend.with_retry(3, Duration::from_millis(5))
}

#[test]
fn score_passthrough_and_neg_inf_token() {
    let server = MockServer::start(|path, body| {
        assert_eq!(path, "/v1/score");
        assert_eq!(body["prompt"], "sys\n\nuser text");
        assert_eq!(body["continuation"], "target");
        assert_eq!(body["chat"]["system"], "sys");
        assert_eq!(body["chat"]["user"], "user text");
        HttpResponse::json(serde_json::json!({
            "total_logprob": -3.5,
            "token_logprobs": [-1.5, -2.0],
        }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    let prompt = Prompt {
        system: Some("sys".into()),
        user: "user text".into(),
    };
    assert_eq!(backend.score(&prompt, "target").unwrap(), -3.5);

    let inf_server = MockServer::start(|_, _| {
        HttpResponse::json(serde_json::json!({ "total_logprob": "-inf", "token_logprobs": [] }))
    });
    let backend = fast(HttpBackend::new(&inf_server.url()));
    let lp = backend.score(&Prompt::plain("p"), "c").unwrap();
    assert_eq!(lp, f64::NEG_INFINITY);
}

#[test]
fn plain_prompts_omit_the_chat_field() {
    let server = MockServer::start(|_, body| {
        assert!(body.get("chat").is_none());
        HttpResponse::json(serde_json::json!({ "total_logprob": -1.0 }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    assert_eq!(backend.score(&Prompt::plain("p"), "c").unwrap(), -1.0);
}

#[test]
fn generate_round_trips_canned_candidates() {
    let server = MockServer::start(|path, body| {
        assert_eq!(path, "/v1/generate");
        assert_eq!(body["method"], "nucleus");
        assert_eq!(body["p"], 0.95);
        assert_eq!(body["n"], 2);
        assert_eq!(body["seed"], 42);
        HttpResponse::json(serde_json::json!({
            "candidates": [
                {"text": "first", "total_logprob": -1.0, "token_logprobs": [-0.5, -0.5]},
                {"text": "second", "total_logprob": -2.0, "token_logprobs": []},
            ]
        }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    let spec = DecodingSpec::nucleus(0.95, 1.5, 8, 42);
    let out = backend.generate(&Prompt::plain("p"), 2, &spec).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].text, "first");
    assert_eq!(out[1].total_logprob, -2.0);
}

#[test]
fn diverse_beam_passes_through_to_the_server() {
    let server = MockServer::start(|_, body| {
        assert_eq!(body["method"], "diverse_beam");
        assert_eq!(body["beam_size"], 4);
        HttpResponse::json(serde_json::json!({
            "candidates": [{"text": "x", "total_logprob": -1.0, "token_logprobs": []}]
        }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    let spec = DecodingSpec {
        method: pragrank::backend::DecodingMethod::DiverseBeam,
        beam_size: Some(4),
        ..DecodingSpec::greedy(8)
    };
    let out = backend.generate(&Prompt::plain("p"), 1, &spec).unwrap();
    assert_eq!(out[0].text, "x");
}

#[test]
fn transient_failures_are_retried_then_succeed() {
    let hits = AtomicUsize::new(0);
    let server = MockServer::start(move |_, _| {
        if hits.fetch_add(1, Ordering::SeqCst) < 2 {
            HttpResponse::error(503)
        } else {
            HttpResponse::json(serde_json::json!({ "total_logprob": -1.25 }))
        }
    });
    let backend = fast(HttpBackend::new(&server.url()));
    assert_eq!(backend.score(&Prompt::plain("p"), "c").unwrap(), -1.25);
    assert_eq!(server.request_count(), 3);
}

#[test]
fn persistent_failure_becomes_backend_unavailable_after_three_attempts() {
    let server = MockServer::start(|_, _| HttpResponse::error(500));
    let backend = fast(HttpBackend::new(&server.url()));
    match backend.score(&Prompt::plain("p"), "c") {
        Err(Error::BackendUnavailable(msg)) => assert!(msg.contains("3 attempts"), "{msg}"),
        other => panic!("expected BackendUnavailable, got {other:?}"),
    }
    assert_eq!(server.request_count(), 3);
}

#[test]
fn status_413_maps_to_tokenization_overflow_without_retry() {
    let server = MockServer::start(|_, _| HttpResponse::error(413));
    let backend = fast(HttpBackend::new(&server.url()));
    assert!(matches!(
        backend.score(&Prompt::plain("p"), "c"),
        Err(Error::TokenizationOverflow)
    ));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn client_4xx_fails_fast() {
    let server = MockServer::start(|_, _| HttpResponse::error(400));
    let backend = fast(HttpBackend::new(&server.url()));
    assert!(matches!(
        backend.score(&Prompt::plain("p"), "c"),
        Err(Error::BackendUnavailable(_))
    ));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn inconsistent_token_logprobs_are_rejected() {
    let server = MockServer::start(|_, _| {
        HttpResponse::json(serde_json::json!({
            "total_logprob": -3.0,
            "token_logprobs": [-1.0, -1.0],
        }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    match backend.score(&Prompt::plain("p"), "c") {
        Err(Error::BackendUnavailable(msg)) => assert!(msg.contains("inconsistent"), "{msg}"),
        other => panic!("expected BackendUnavailable, got {other:?}"),
    }
}

#[test]
fn positive_logprob_is_malformed() {
    let server =
        MockServer::start(|_, _| HttpResponse::json(serde_json::json!({ "total_logprob": 0.5 })));
    let backend = fast(HttpBackend::new(&server.url()));
    assert!(matches!(
        backend.score(&Prompt::plain("p"), "c"),
        Err(Error::BackendUnavailable(_))
    ));
}

#[test]
fn wrong_candidate_count_is_rejected() {
    let server = MockServer::start(|_, _| {
        HttpResponse::json(serde_json::json!({
            "candidates": [{"text": "only", "total_logprob": -1.0, "token_logprobs": []}]
        }))
    });
    let backend = fast(HttpBackend::new(&server.url()));
    let spec = DecodingSpec::standard(1.0, 4, 0);
    match backend.generate(&Prompt::plain("p"), 3, &spec) {
        Err(Error::BackendUnavailable(msg)) => assert!(msg.contains("3 candidates"), "{msg}"),
        other => panic!("expected BackendUnavailable, got {other:?}"),
    }
}

#[test]
fn toy_backed_server_agrees_with_local_model() {
    let corpus = "a bad cab dad had a fad";
    let server = MockServer::start_toy_backed(corpus);
    let wire = fast(HttpBackend::new(&server.url()));
    let local = ToyLm::from_corpus(corpus).unwrap();

    let prompt = Prompt::plain("bad");
    for continuation in ["a", "dab", "fad a"] {
        let over_wire = wire.score(&prompt, continuation).unwrap();
        let in_process = local.score(&prompt, continuation).unwrap();
        assert!((over_wire - in_process).abs() < 1e-12);
    }

    let spec = DecodingSpec::nucleus(0.9, 1.2, 6, 42);
    let remote = wire.generate(&prompt, 4, &spec).unwrap();
    let expected = local.generate(&prompt, 4, &spec).unwrap();
    assert_eq!(remote, expected);
}

#[test]
fn ext_metric_client_round_trip() {
    let server = MockServer::start(|path, body| {
        assert_eq!(path, "/v1/metric");
        assert_eq!(body["candidate"], "a b");
        HttpResponse::json(serde_json::json!({ "score": 0.625 }))
    });
    let client = pragrank::backend::ExtMetricClient::new(&server.url(), "quality");
    assert_eq!(client.id(), "ext:quality");
    assert_eq!(client.eval("a b", "ref text").unwrap(), 0.625);
}

#[test]
fn ext_metric_flows_through_evaluate_and_sweep() {
    let corpus = "a bad cab dad had a fad bead head";
    let server = MockServer::start_toy_backed(corpus);
    let url = server.url();
    let dir = tempfile::tempdir().unwrap();

    common::run_cli_ok(
        dir.path(),
        &["fixture", "-o", "instances.jsonl", "--count", "4"],
    );
    common::run_cli_ok(
        dir.path(),
        &[
            "generate",
            "instances.jsonl",
            "-o",
            "pools.jsonl",
            "--backend",
            "toy",
            "--n",
            "3",
            "--decoding",
            "standard",
            "--seed",
            "2",
        ],
    );
    common::run_cli_ok(
        dir.path(),
        &[
            "answer",
            "instances.jsonl",
            "--pools",
            "pools.jsonl",
            "-o",
            "answered.jsonl",
            "--backend",
            "toy",
            "--use-gold-answers",
        ],
    );
    common::run_cli_ok(
        dir.path(),
        &[
            "score",
            "instances.jsonl",
            "--pools",
            "answered.jsonl",
            "-o",
            "scored.jsonl",
            "--backend",
            "toy",
            "--objectives",
            "answer,source",
        ],
    );

    // Sweep with a mixed native/external metric set.
    common::run_cli_ok(
        dir.path(),
        &[
            "sweep",
            "instances.jsonl",
            "--pools",
            "scored.jsonl",
            "-o",
            "report.json",
            "--metrics",
            "rouge1,ext:relevance",
            "--ext-metric-url",
            &url,
            "--lambda-grid",
            "0,1",
            "--alpha-grid",
            "0,1",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let metrics: Vec<&str> = report["metadata"]["metrics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(metrics, ["rouge1", "ext:relevance"]);
    assert!(server.request_count() > 0);

    // The mock metric endpoint is ROUGE-1 under the hood, so the two
    // columns agree cell for cell.
    let cells = report["cells"].as_array().unwrap();
    let find = |metric: &str, rule: &str| -> Vec<f64> {
        cells
            .iter()
            .filter(|c| c["metric"] == metric && c["rule"] == rule)
            .map(|c| c["mean"].as_f64().unwrap())
            .collect()
    };
    assert_eq!(
        find("rouge1", "answer_rec"),
        find("ext:relevance", "answer_rec")
    );

    // Evaluate with the external metric only.
    common::run_cli_ok(
        dir.path(),
        &[
            "rank",
            "instances.jsonl",
            "--pools",
            "scored.jsonl",
            "-o",
            "sel.jsonl",
            "--rule",
            "random",
            "--seed",
            "5",
        ],
    );
    common::run_cli_ok(
        dir.path(),
        &[
            "evaluate",
            "instances.jsonl",
            "--pools",
            "scored.jsonl",
            "--selections",
            "sel.jsonl",
            "-o",
            "eval.jsonl",
            "--metrics",
            "ext:relevance",
            "--ext-metric-url",
            &url,
        ],
    );
    let eval = std::fs::read_to_string(dir.path().join("eval.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(eval.lines().next().unwrap()).unwrap();
    assert!(first["scores"]["ext:relevance"].is_number());
}
