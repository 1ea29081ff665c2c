#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::thread::JoinHandle;

use protbeam::wire::handle_request;
use protbeam_core::MaskedLogitProvider;

type Handler = dyn Fn(&str, &str, &[u8]) -> (u16, String) + Send + Sync;

/// Loopback HTTP server; stops when dropped.
pub struct TestServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn new(handler: Box<Handler>) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let s = Arc::clone(&server);
        let thread = std::thread::spawn(move || {
            for mut req in s.incoming_requests() {
                let mut body = Vec::new();
                let _ = req.as_reader().read_to_end(&mut body);
                let (status, text) = handler(req.method().as_str(), req.url(), &body);
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let resp = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
                let _ = req.respond(resp);
            }
        });
        TestServer {
            url: format!("http://127.0.0.1:{port}"),
            server,
            thread: Some(thread),
        }
    }

    /// Serves the model wire protocol for `provider`.
    pub fn model<P: MaskedLogitProvider + 'static>(provider: P) -> Self {
        Self::new(Box::new(move |m, p, b| handle_request(&provider, m, p, b)))
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_protbeam"))
}

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

pub fn protbeam(dir: &Path, args: &[&str]) -> Outcome {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(dir: &Path, args: &[&str]) {
    let o = protbeam(dir, args);
    assert_eq!(o.code, 0, "protbeam {args:?} failed: {}", o.stderr);
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn read_bytes(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Tab-separated rows, header first.
pub fn tsv(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split('\t').map(String::from).collect()).collect()
}

pub fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].clone()).collect()
}
