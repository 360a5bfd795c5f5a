use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use collex::extract::{extract_all, extract_entities, ExtractError, Gazetteer, RemoteConfig, RemoteExtractor};

#[derive(Clone, Copy)]
enum Mode {
    Ok,
    Status500,
    Garbage,
}

#[derive(Default)]
struct Gauge {
    active: AtomicUsize,
    peak: AtomicUsize,
    requests: AtomicUsize,
}

/// Minimal HTTP/1.1 server answering every request on its own thread.
fn mock(mode: Mode) -> (String, Arc<Gauge>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/extract", listener.local_addr().unwrap());
    let gauge = Arc::new(Gauge::default());
    let g = gauge.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let g = g.clone();
            thread::spawn(move || handle(stream, mode, &g));
        }
    });
    (url, gauge)
}

fn handle(stream: TcpStream, mode: Mode, g: &Gauge) {
    let now = g.active.fetch_add(1, Ordering::SeqCst) + 1;
    g.peak.fetch_max(now, Ordering::SeqCst);
    g.requests.fetch_add(1, Ordering::SeqCst);
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let text: Vec<char> = req["text"].as_str().unwrap().chars().collect();
    thread::sleep(Duration::from_millis(15));
    let (status, payload) = match mode {
        Mode::Ok => {
            let mut ents = vec![serde_json::json!({"start": 0, "end": 1, "type": "DRUG"})];
            let pat: Vec<char> = "fever".chars().collect();
            for i in 0..text.len().saturating_sub(pat.len() - 1) {
                if text[i..i + pat.len()] == pat[..] {
                    ents.push(serde_json::json!({"start": i, "end": i + pat.len(), "type": "SYMPTOM"}));
                }
            }
            ("200 OK", serde_json::json!({ "entities": ents }).to_string())
        }
        Mode::Status500 => ("500 Internal Server Error", "{}".to_string()),
        Mode::Garbage => ("200 OK", "{\"entities\": 7}".to_string()),
    };
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    g.active.fetch_sub(1, Ordering::SeqCst);
}

fn remote(url: &str, in_flight: usize) -> RemoteExtractor {
    let mut cfg = RemoteConfig::new(url);
    cfg.timeout = Duration::from_secs(5);
    cfg.max_in_flight = in_flight;
    RemoteExtractor::new(cfg)
}

#[test]
fn symptom_spans_use_char_offsets() {
    let (url, _) = mock(Mode::Ok);
    let ms = extract_entities("t1", "très fever and fever", &remote(&url, 1)).unwrap();
    let got: Vec<(usize, usize, &str)> = ms.iter().map(|m| (m.start, m.end, m.surface.as_str())).collect();
    assert_eq!(got, [(5, 10, "fever"), (15, 20, "fever")]);
}

#[test]
fn server_errors_are_unavailable() {
    let (url, _) = mock(Mode::Status500);
    let e = extract_entities("t9", "fever", &remote(&url, 1)).unwrap_err();
    assert!(matches!(e, ExtractError::Unavailable { .. }), "{e}");
    assert_eq!(e.tweet_id(), "t9");
}

#[test]
fn malformed_body_is_invalid_response() {
    let (url, _) = mock(Mode::Garbage);
    let e = extract_entities("t3", "fever", &remote(&url, 1)).unwrap_err();
    assert!(matches!(e, ExtractError::InvalidResponse { .. }), "{e}");
}

#[test]
fn refused_connection_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let e = extract_entities("t1", "fever", &remote(&format!("http://127.0.0.1:{port}/x"), 1)).unwrap_err();
    assert!(matches!(e, ExtractError::Unavailable { .. }));
}

#[test]
fn in_flight_limit_and_order_independence() {
    let (url, gauge) = mock(Mode::Ok);
    let docs: Vec<(String, String)> = (0..24)
        .map(|i| (format!("t{i:02}"), if i % 3 == 0 { format!("day {i} fever again") } else { format!("fine on day {i}") }))
        .collect();
    let ex = remote(&url, 3);
    let got = extract_all(&docs, &ex, ex.config().max_in_flight).unwrap();
    assert_eq!(gauge.requests.load(Ordering::SeqCst), 24);
    let peak = gauge.peak.load(Ordering::SeqCst);
    assert!((1..=3).contains(&peak), "peak {peak}");

    let gaz = Gazetteer::new(["fever"]).unwrap();
    let expect = extract_all(&docs, &gaz, 1).unwrap();
    assert_eq!(got, expect);
    let mut rev = docs.clone();
    rev.reverse();
    let mut back = extract_all(&rev, &ex, 2).unwrap();
    back.reverse();
    assert_eq!(back, expect);
}
