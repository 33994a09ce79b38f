//! Minimal HTTP/1.1 embedding server for client contract tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use oowm_core::embedding::HashingEmbedder;

pub type DelayFn = Arc<dyn Fn(&[String]) -> u64 + Send + Sync>;

#[derive(Clone)]
pub enum Behavior {
    /// Hashing embeddings of the requested width. `delay_ms` sees the texts
    /// of each request and decides how long to hold the response.
    Embed { dimension: usize, delay_ms: DelayFn },
    /// Answer every request with this status and an empty JSON body.
    Status(u16),
    /// Fail the first `n` requests with 503, then embed normally.
    FailFirst(usize),
}

impl Behavior {
    pub fn embed(dimension: usize) -> Self {
        Behavior::Embed {
            dimension,
            delay_ms: Arc::new(|_| 0),
        }
    }
}

pub struct StubServer {
    pub url: String,
    requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    port: u16,
}

impl StubServer {
    pub fn start(behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (count, halt) = (requests.clone(), stop.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                if halt.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let n = count.fetch_add(1, Ordering::SeqCst);
                let behavior = behavior.clone();
                thread::spawn(move || {
                    let _ = handle(stream, &behavior, n);
                });
            }
        });
        StubServer {
            url: format!("http://127.0.0.1:{port}"),
            requests,
            stop,
            port,
        }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
    }
}

fn handle(stream: TcpStream, behavior: &Behavior, index: usize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let texts: Vec<String> = serde_json::from_slice::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| serde_json::from_value(v["texts"].clone()).ok())
        .unwrap_or_default();

    let embed = |dimension: usize| {
        let e = HashingEmbedder::new(dimension);
        let rows: Vec<Vec<f64>> = texts.iter().map(|t| e.embed(t).values().to_vec()).collect();
        (200, serde_json::json!({ "embeddings": rows }).to_string())
    };
    let (status, payload) = match behavior {
        Behavior::Embed {
            dimension,
            delay_ms,
        } => {
            thread::sleep(Duration::from_millis(delay_ms(&texts)));
            embed(*dimension)
        }
        Behavior::Status(code) => (*code, "{}".to_string()),
        Behavior::FailFirst(n) if index < *n => (503, "{}".to_string()),
        Behavior::FailFirst(_) => embed(oowm_core::embedding::DEFAULT_DIMENSION),
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}
