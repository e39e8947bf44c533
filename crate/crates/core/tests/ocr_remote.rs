use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use memeforge_core::ocr_client::{extract_remote, CaptionSource, OcrError, OcrMode};
use memeforge_core::OcrConfig;

struct Seen {
    hits: AtomicUsize,
    last_body: Mutex<Vec<u8>>,
    last_key: Mutex<String>,
}

/// Serves the canned `(status, body)` responses in order, repeating the last.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/parse/image", listener.local_addr().unwrap());
    let seen = Arc::new(Seen { hits: AtomicUsize::new(0), last_body: Mutex::default(), last_key: Mutex::default() });
    let state = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if let Some(v) = lower.strip_prefix("apikey:") {
                    *state.last_key.lock().unwrap() = v.trim().to_string();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            *state.last_body.lock().unwrap() = body;
            let n = state.hits.fetch_add(1, Ordering::SeqCst);
            let (status, text) = responses[n.min(responses.len() - 1)];
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (url, seen)
}

fn cfg(endpoint: String, retries: u32) -> OcrConfig {
    OcrConfig {
        endpoint,
        api_key: "k3y".into(),
        timeout: 5.0,
        max_retries: retries,
        backoff_base: 0.01,
        mode: OcrMode::Remote,
        ..Default::default()
    }
}

const OK: &str = r#"{"ParsedResults":[{"ParsedText":"yeh  khana\r\nbahut swaad hai"}],"IsErroredOnProcessing":false}"#;

#[test]
fn joins_parsed_lines() {
    let (url, seen) = serve(vec![(200, OK)]);
    let rec = extract_remote("m1", b"PNGDATA", &cfg(url, 3)).unwrap();
    assert_eq!(rec.raw_text, "yeh khana bahut swaad hai");
    assert_eq!(rec.source, CaptionSource::Remote);
    assert!(rec.warning.is_none());
    assert_eq!(seen.hits.load(Ordering::SeqCst), 1);
    assert_eq!(*seen.last_key.lock().unwrap(), "k3y");
    let body = seen.last_body.lock().unwrap();
    assert!(body.windows(7).any(|w| w == b"PNGDATA"));
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, seen) = serve(vec![(503, "{}"), (429, "{}"), (200, OK)]);
    let rec = extract_remote("m2", b"x", &cfg(url, 3)).unwrap();
    assert_eq!(rec.raw_text, "yeh khana bahut swaad hai");
    assert_eq!(seen.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn gives_up_after_configured_attempts() {
    let (url, seen) = serve(vec![(500, "{}")]);
    let err = extract_remote("m3", b"x", &cfg(url, 2)).unwrap_err();
    assert!(matches!(err, OcrError::OcrServiceError(_)), "{err:?}");
    assert_eq!(seen.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(403, r#"{"error":"bad key"}"#)]);
    assert!(matches!(extract_remote("m4", b"x", &cfg(url, 4)), Err(OcrError::OcrServiceError(_))));
    assert_eq!(seen.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn error_flag_in_body_is_fatal() {
    let (url, seen) =
        serve(vec![(200, r#"{"ParsedResults":[],"IsErroredOnProcessing":true,"ErrorMessage":["file too large"]}"#)]);
    match extract_remote("m5", b"x", &cfg(url, 3)) {
        Err(OcrError::OcrServiceError(msg)) => assert!(msg.contains("file too large")),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn empty_text_is_a_warning() {
    let (url, _) = serve(vec![(200, r#"{"ParsedResults":[{"ParsedText":"  \r\n"}],"IsErroredOnProcessing":false}"#)]);
    let rec = extract_remote("m6", b"x", &cfg(url, 1)).unwrap();
    assert_eq!(rec.raw_text, "");
    assert!(rec.warning.is_some());
}

#[test]
fn dead_endpoint_times_out() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = extract_remote("m7", b"x", &cfg(format!("http://127.0.0.1:{port}/"), 2)).unwrap_err();
    assert!(matches!(err, OcrError::OcrTimeout { attempts: 2, .. }), "{err:?}");
}

#[test]
fn slow_service_hits_the_timeout() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    thread::spawn(move || {
        let held: Vec<_> = listener.incoming().take(2).collect();
        thread::sleep(std::time::Duration::from_secs(3));
        drop(held);
    });
    let c = OcrConfig { timeout: 0.3, ..cfg(url, 2) };
    let start = std::time::Instant::now();
    assert!(matches!(extract_remote("m8", b"x", &c), Err(OcrError::OcrTimeout { attempts: 2, .. })));
    assert!(start.elapsed().as_secs_f64() < 2.5);
}
