//! Tool server: the skill library over newline-delimited JSON with
//! JSON-RPC style error codes.
//!
//! Requests: `{"id": 1, "method": "tools/list"}` or
//! `{"id": 2, "method": "tools/call", "params": {"name": "push", "arguments": {"side": "left"}}}`.
//! Every request line yields exactly one response line carrying the same id.
//! Skill failures are ordinary results with `"success": false`.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::{json, Value};

use crate::scenegen::SceneSnapshot;
use crate::simworld::SceneState;
use crate::skills::{execute, manifest_json, RequestError, Skill, SkillConfig};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;

/// Longest accepted request line in bytes.
pub const MAX_LINE: usize = 1 << 20;

/// One connection's view of the world.
#[derive(Debug, Clone)]
pub struct Session {
    pub scene: SceneState,
    pub config: SkillConfig,
    pub seed: u64,
    pub level: u8,
    last_id: Option<i64>,
    pub calls: usize,
}

fn error_response(id: Value, code: i64, message: impl Into<String>) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "error": {"code": code, "message": message.into()}})
}

fn result_response(id: Value, result: Value) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "result": result})
}

impl Session {
    pub fn new(scene: SceneState, config: SkillConfig, seed: u64, level: u8) -> Self {
        Self {
            scene,
            config,
            seed,
            level,
            last_id: None,
            calls: 0,
        }
    }

    /// Handles one request document and returns one response document
    /// (without the trailing newline).
    pub fn handle_message(&mut self, bytes: &[u8]) -> Vec<u8> {
        let resp = self.handle_value(bytes);
        serde_json::to_vec(&resp).expect("responses serialize")
    }

    fn handle_value(&mut self, bytes: &[u8]) -> Value {
        let req: Value = match serde_json::from_slice(bytes) {
            Ok(v) => v,
            Err(e) => return error_response(Value::Null, PARSE_ERROR, format!("parse error: {e}")),
        };
        let Value::Object(req) = req else {
            return error_response(Value::Null, INVALID_REQUEST, "request must be an object");
        };
        let id = match req.get("id") {
            Some(Value::Number(n)) if n.as_i64().is_some() => n.as_i64().expect("checked"),
            Some(other) => {
                return error_response(other.clone(), INVALID_REQUEST, "`id` must be an integer")
            }
            None => return error_response(Value::Null, INVALID_REQUEST, "missing `id`"),
        };
        let idv = json!(id);
        if self.last_id.is_some_and(|last| id <= last) {
            return error_response(
                idv,
                INVALID_REQUEST,
                format!(
                    "ids must increase; previous was {}",
                    self.last_id.expect("set")
                ),
            );
        }
        self.last_id = Some(id);
        let method = match req.get("method") {
            Some(Value::String(m)) => m.as_str(),
            _ => return error_response(idv, INVALID_REQUEST, "missing string `method`"),
        };
        match method {
            "tools/list" => result_response(idv, json!({"tools": manifest_json()})),
            "tools/call" => self.call(idv, req.get("params")),
            other => error_response(idv, METHOD_NOT_FOUND, format!("unknown method `{other}`")),
        }
    }

    fn call(&mut self, id: Value, params: Option<&Value>) -> Value {
        let Some(Value::Object(params)) = params else {
            return error_response(id, INVALID_PARAMS, "`params` must be an object");
        };
        let Some(Value::String(name)) = params.get("name") else {
            return error_response(id, INVALID_PARAMS, "`params.name` must be a string");
        };
        let skill = match Skill::from_call(name, params.get("arguments")) {
            Ok(s) => s,
            Err(e @ RequestError::UnknownTool(_)) => {
                return error_response(id, METHOD_NOT_FOUND, e.to_string())
            }
            Err(e @ RequestError::InvalidArguments(_)) => {
                return error_response(id, INVALID_PARAMS, e.to_string())
            }
        };
        let ran = catch_unwind(AssertUnwindSafe(|| {
            execute(&self.scene, &skill, &self.config)
        }));
        match ran {
            Ok((scene, result)) => {
                self.scene = scene;
                self.calls += 1;
                result_response(
                    id,
                    serde_json::to_value(&result).expect("results serialize"),
                )
            }
            Err(_) => error_response(id, INTERNAL_ERROR, "skill execution failed"),
        }
    }

    pub fn snapshot(&self) -> Option<SceneSnapshot> {
        SceneSnapshot::capture(&self.scene, self.seed, self.level).ok()
    }

    pub fn persist(&self, path: &std::path::Path) -> io::Result<()> {
        let snap = self
            .snapshot()
            .ok_or_else(|| io::Error::other("scene has no target to snapshot"))?;
        let mut text = serde_json::to_string_pretty(&snap).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// Reads one line of at most [`MAX_LINE`] bytes. `Ok(None)` at end of input.
fn read_line(r: &mut impl BufRead, buf: &mut Vec<u8>) -> io::Result<Option<bool>> {
    buf.clear();
    let n = io::Read::take(&mut *r, MAX_LINE as u64 + 1).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(None);
    }
    let oversized = buf.len() > MAX_LINE && buf.last() != Some(&b'\n');
    if oversized {
        // discard the rest of the line
        let mut sink = Vec::new();
        r.read_until(b'\n', &mut sink)?;
    }
    while matches!(buf.last(), Some(b'\n' | b'\r')) {
        buf.pop();
    }
    Ok(Some(oversized))
}

/// Serves one session over a line-oriented stream until end of input or a
/// transport error. Blank lines are ignored.
pub fn serve_stream(
    session: &mut Session,
    reader: impl BufRead,
    mut writer: impl Write,
) -> io::Result<()> {
    let mut reader = reader;
    let mut buf = Vec::new();
    while let Some(oversized) = read_line(&mut reader, &mut buf)? {
        let resp = if oversized {
            serde_json::to_vec(&error_response(
                Value::Null,
                PARSE_ERROR,
                "request line too long",
            ))
            .expect("responses serialize")
        } else if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        } else {
            session.handle_message(&buf)
        };
        writer.write_all(&resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Serves on stdin/stdout, then writes the final snapshot if a path is given.
pub fn serve_stdio(mut session: Session, snapshot: Option<PathBuf>) -> io::Result<()> {
    let stdin = io::stdin();
    let served = serve_stream(&mut session, stdin.lock(), io::stdout().lock());
    if let Some(p) = snapshot {
        session.persist(&p)?;
    }
    served
}

/// Accepts connections, one session thread each, each starting from a fresh
/// copy of `template`. Snapshots land in `snapshot_dir` as
/// `session-<n>.json`. Stops after `max_connections` if given.
pub fn serve_tcp(
    listener: TcpListener,
    template: Session,
    snapshot_dir: Option<PathBuf>,
    max_connections: Option<usize>,
) -> io::Result<()> {
    let counter = AtomicUsize::new(0);
    std::thread::scope(|s| -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = match stream {
                Ok(st) => st,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let session = template.clone();
            let dir = snapshot_dir.clone();
            s.spawn(move || handle_connection(stream, session, n, dir));
            if max_connections.is_some_and(|m| n + 1 >= m) {
                break;
            }
        }
        Ok(())
    })
}

fn handle_connection(stream: TcpStream, mut session: Session, n: usize, dir: Option<PathBuf>) {
    let peer = stream.peer_addr().ok();
    let served = stream
        .try_clone()
        .and_then(|w| serve_stream(&mut session, BufReader::new(stream), w));
    if let Err(e) = served {
        log::warn!("session {n} ({peer:?}) closed: {e}");
    }
    if let Some(d) = dir {
        let path = d.join(format!("session-{n}.json"));
        if let Err(e) = session.persist(&path) {
            log::warn!("could not write {}: {e}", path.display());
        }
    }
}
