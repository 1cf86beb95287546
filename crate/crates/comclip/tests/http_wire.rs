//! Wire-contract tests for the three model services, against a tiny
//! in-process HTTP server: request shapes, auth header, retry policy,
//! response validation, and fixture recording.

mod common;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use comclip::client::{
    CaptionerClient, EncoderClient, FixtureMode, LlmClient, LlmClientConfig, TextCompletion,
};
use comclip::encoder::{EncoderBackend, RemoteBackend};
use common::*;

#[derive(Clone, Debug)]
struct Captured {
    path: String,
    headers: HashMap<String, String>,
    body: serde_json::Value,
}

type Responder = dyn Fn(usize, &Captured) -> (u16, String) + Send + Sync;

struct TestServer {
    endpoint: String,
    requests: Arc<Mutex<Vec<Captured>>>,
    hits: Arc<AtomicUsize>,
}

impl TestServer {
    fn start(responder: Arc<Responder>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}", listener.local_addr().unwrap());
        let requests: Arc<Mutex<Vec<Captured>>> = Arc::default();
        let hits = Arc::new(AtomicUsize::new(0));
        let reqs = Arc::clone(&requests);
        let hit_counter = Arc::clone(&hits);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let responder = Arc::clone(&responder);
                let reqs = Arc::clone(&reqs);
                let hit_counter = Arc::clone(&hit_counter);
                std::thread::spawn(move || {
                    stream
                        .set_read_timeout(Some(Duration::from_secs(5)))
                        .unwrap();
                    let Some(captured) = read_request(&mut stream) else {
                        return;
                    };
                    let n = hit_counter.fetch_add(1, Ordering::SeqCst);
                    reqs.lock().unwrap().push(captured.clone());
                    let (status, body) = responder(n, &captured);
                    let reason = if status < 400 { "OK" } else { "ERR" };
                    let response = format!(
                        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.write_all(response.as_bytes());
                });
            }
        });
        Self {
            endpoint,
            requests,
            hits,
        }
    }

    fn request(&self, i: usize) -> Captured {
        self.requests.lock().unwrap()[i].clone()
    }

    fn hit_count(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<Captured> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end;
    loop {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            header_end = pos + 4;
            break;
        }
    }
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = head.lines();
    let request_line = lines.next()?;
    let path = request_line.split_whitespace().nth(1)?.to_string();
    let mut headers = HashMap::new();
    for line in lines {
        if let Some((k, v)) = line.split_once(':') {
            headers.insert(k.trim().to_lowercase(), v.trim().to_string());
        }
    }
    let content_length: usize = headers
        .get("content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = buf[header_end..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    Some(Captured {
        path,
        headers,
        body,
    })
}

fn llm_config(endpoint: &str) -> LlmClientConfig {
    LlmClientConfig {
        endpoint: Some(endpoint.to_string()),
        timeout: Duration::from_secs(5),
        ..Default::default()
    }
}

#[test]
fn llm_complete_request_shape_and_auth() {
    let server = TestServer::start(Arc::new(|_, _| {
        (200, r#"{"text":"a reply"}"#.to_string())
    }));
    let client = LlmClient::new(LlmClientConfig {
        token: Some("sekrit".to_string()),
        ..llm_config(&server.endpoint)
    });
    let reply = client.complete("what is in the picture?").unwrap();
    assert_eq!(reply, "a reply");

    let req = server.request(0);
    assert_eq!(req.path, "/complete");
    assert_eq!(req.body["prompt"], "what is in the picture?");
    assert_eq!(req.body["max_tokens"], 512);
    assert_eq!(req.headers["authorization"], "Bearer sekrit");
}

#[test]
fn llm_retries_on_server_error_then_succeeds() {
    let server = TestServer::start(Arc::new(|n, _| {
        if n == 0 {
            (500, r#"{"oops":true}"#.to_string())
        } else {
            (200, r#"{"text":"recovered"}"#.to_string())
        }
    }));
    let client = LlmClient::new(llm_config(&server.endpoint));
    assert_eq!(client.complete("x").unwrap(), "recovered");
    assert_eq!(server.hit_count(), 2);
}

#[test]
fn llm_client_error_is_not_retried() {
    let server = TestServer::start(Arc::new(|_, _| (404, "{}".to_string())));
    let client = LlmClient::new(llm_config(&server.endpoint));
    let err = client.complete("x").unwrap_err();
    assert!(matches!(
        err,
        comclip::client::ClientError::Http { status: 404 }
    ));
    assert_eq!(server.hit_count(), 1);
}

#[test]
fn llm_record_mode_persists_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(Arc::new(|_, _| {
        (200, r#"{"text":"record me"}"#.to_string())
    }));
    let client = LlmClient::new(LlmClientConfig {
        fixtures: FixtureMode::Record(dir.path().to_path_buf()),
        ..llm_config(&server.endpoint)
    });
    assert_eq!(client.complete("prompt one").unwrap(), "record me");
    assert_eq!(server.hit_count(), 1);
    // second call replays the recorded response; the server stays quiet
    assert_eq!(client.complete("prompt one").unwrap(), "record me");
    assert_eq!(server.hit_count(), 1);
    assert_eq!(dir.path().read_dir().unwrap().count(), 1);
}

#[test]
fn captioner_wire_and_box_clamping() {
    let server = TestServer::start(Arc::new(|_, _| {
        (
            200,
            r#"{"captions":[
                {"text":"a cat","box":[0,0,8,9]},
                {"text":"way out","box":[0,0,99,99]},
                {"text":"a table","box":[2,2,6,6]}
            ]}"#
            .to_string(),
        )
    }));
    let client = CaptionerClient::new(Some(server.endpoint.clone()), FixtureMode::Off);
    let mut r = rng(1);
    let image = random_image(&mut r, 8, 8);
    let captions = client.dense_captions(&image).unwrap();
    assert_eq!(captions.len(), 2, "out-of-bounds caption dropped");
    assert_eq!(captions[0].region.y2, 8, "one-pixel overshoot clamped");

    let req = server.request(0);
    assert_eq!(req.path, "/dense_captions");
    use base64::Engine as _;
    let png = base64::engine::general_purpose::STANDARD
        .decode(req.body["image_b64"].as_str().unwrap())
        .unwrap();
    let decoded = image::load_from_memory(&png).unwrap().into_rgb8();
    assert_eq!(decoded.as_raw().as_slice(), image.pixels());
}

#[test]
fn encoder_backend_normalizes_at_the_boundary() {
    let server = TestServer::start(Arc::new(|_, req| {
        let modality = req.body["modality"].as_str().unwrap().to_string();
        assert!(req.body.get("payload_b64").is_some() || req.body.get("text").is_some());
        let values = if modality == "image" {
            "[3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0]"
        } else {
            "[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]"
        };
        (200, format!(r#"{{"dim":8,"values":{values}}}"#))
    }));
    let backend = RemoteBackend::new(
        "remote-test".into(),
        8,
        "remote".into(),
        EncoderClient::new(Some(server.endpoint.clone()), FixtureMode::Off),
    );
    let mut r = rng(2);
    let image = random_image(&mut r, 6, 6);
    let img_emb = backend.encode_image(&image).unwrap();
    assert!(img_emb.normalized);
    assert!((img_emb.l2_norm() - 1.0).abs() < 1e-6);
    assert!((img_emb.values[0] - 0.6).abs() < 1e-6);
    assert!((img_emb.values[2] - 0.8).abs() < 1e-6);

    let txt_emb = backend.encode_text("a cat").unwrap();
    assert_eq!(txt_emb.values[1], 1.0);

    let req0 = server.request(0);
    assert_eq!(req0.path, "/encode");
    assert_eq!(req0.body["modality"], "image");
}

#[test]
fn encoder_dim_mismatch_rejected() {
    let server = TestServer::start(Arc::new(|_, _| {
        (200, r#"{"dim":4,"values":[1.0,0.0,0.0,0.0]}"#.to_string())
    }));
    let backend = RemoteBackend::new(
        "remote-test".into(),
        8,
        "remote".into(),
        EncoderClient::new(Some(server.endpoint.clone()), FixtureMode::Off),
    );
    let mut r = rng(3);
    let image = random_image(&mut r, 4, 4);
    let err = backend.encode_image(&image).unwrap_err();
    assert!(matches!(
        err,
        comclip::encoder::EncoderError::DimMismatch { expected: 8, got: 4 }
    ));
}

#[test]
fn malformed_response_is_bad_response() {
    let server = TestServer::start(Arc::new(|_, _| (200, "not json" .to_string())));
    let client = LlmClient::new(llm_config(&server.endpoint));
    let err = client.complete("x").unwrap_err();
    assert!(matches!(
        err,
        comclip::client::ClientError::BadResponse(_)
    ));
}
