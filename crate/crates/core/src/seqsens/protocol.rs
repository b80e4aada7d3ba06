//! Newline-delimited JSON protocol for external samplers and models.
//!
//! Requests carry an `"op"` of `hello`, `sample`, `classify` or `shutdown`;
//! every response echoes the request `"id"`, and `{"error": ...}` reports a
//! failure for that request only. Transports are a spawned subprocess's
//! standard streams, a TCP socket, or an in-process mock.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{IndexSet, NeighborSampler, Sequence, TaskModel, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Answer to `{"op":"hello"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloInfo {
    pub name: String,
    pub roles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub serial_only: bool,
}

impl HelloInfo {
    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r == role)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// One line that crossed the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub line: String,
}

/// Renders entries as `> request` / `< response` lines.
pub fn format_transcript(entries: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(match e.direction {
            Direction::Sent => "> ",
            Direction::Received => "< ",
        });
        out.push_str(&e.line);
        out.push('\n');
    }
    out
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (direction, rest) = if let Some(rest) = line.strip_prefix("> ") {
            (Direction::Sent, rest)
        } else if let Some(rest) = line.strip_prefix("< ") {
            (Direction::Received, rest)
        } else {
            return Err(Error::Parse {
                source_name: "transcript".into(),
                line: i + 1,
                message: "lines must start with '> ' or '< '".into(),
            });
        };
        out.push(TranscriptEntry {
            direction,
            line: rest.to_string(),
        });
    }
    Ok(out)
}

/// A line-oriented duplex channel to an oracle.
pub struct Connection {
    label: String,
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    server: Option<thread::JoinHandle<()>>,
    timeout: Duration,
    transcript: Vec<TranscriptEntry>,
}

fn pump<R: BufRead + Send + 'static>(reader: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in reader.lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl Connection {
    /// Runs `command` through `sh -c` and talks over its standard streams.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        Ok(Self {
            label: format!("cmd:{command}"),
            writer: Some(Box::new(stdin)),
            lines: pump(BufReader::new(stdout)),
            child: Some(child),
            server: None,
            timeout: DEFAULT_TIMEOUT,
            transcript: Vec::new(),
        })
    }

    pub fn connect_tcp(address: &str) -> Result<Self> {
        let addr = address
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::invalid(format!("cannot resolve {address}")))?;
        let stream = TcpStream::connect_timeout(&addr, DEFAULT_TIMEOUT)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self {
            label: format!("tcp:{address}"),
            writer: Some(Box::new(stream)),
            lines: pump(reader),
            child: None,
            server: None,
            timeout: DEFAULT_TIMEOUT,
            transcript: Vec::new(),
        })
    }

    /// A [`serve`] loop on a background thread.
    pub fn in_process(config: MockConfig) -> Result<Self> {
        let (client_reader, server_writer) = std::io::pipe()?;
        let (server_reader, client_writer) = std::io::pipe()?;
        let server = thread::spawn(move || {
            let _ = serve(BufReader::new(server_reader), server_writer, &config);
        });
        Ok(Self {
            label: "mock".into(),
            writer: Some(Box::new(client_writer)),
            lines: pump(BufReader::new(client_reader)),
            child: None,
            server: Some(server),
            timeout: DEFAULT_TIMEOUT,
            transcript: Vec::new(),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn send_line(&mut self, line: &str) -> Result<()> {
        debug_assert!(!line.contains('\n'));
        self.transcript.push(TranscriptEntry {
            direction: Direction::Sent,
            line: line.to_string(),
        });
        let w = self
            .writer
            .as_mut()
            .ok_or_else(|| Error::protocol("connection already closed"))?;
        let sent = w.write_all(line.as_bytes()).and_then(|_| w.write_all(b"\n")).and_then(|_| w.flush());
        sent.map_err(|e| Error::protocol(format!("oracle closed its input: {e}")))
    }

    /// Next line from the oracle, `None` once it closed its output.
    pub fn recv_line(&mut self) -> Result<Option<String>> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => {
                self.transcript.push(TranscriptEntry {
                    direction: Direction::Received,
                    line: line.clone(),
                });
                Ok(Some(line))
            }
            Ok(Err(e)) => Err(Error::protocol(format!("reading from oracle failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::protocol(format!(
                "no response within {} s",
                self.timeout.as_secs_f64()
            ))),
            Err(RecvTimeoutError::Disconnected) => Ok(None),
        }
    }

    /// Sends one line and waits for one line back.
    pub fn exchange(&mut self, line: &str) -> Result<String> {
        self.send_line(line)?;
        self.recv_line()?
            .ok_or_else(|| Error::protocol(format!("oracle closed the connection after {line}")))
    }

    /// Closes our side and reaps the oracle.
    pub fn close(&mut self) {
        self.writer = None;
        if let Some(mut child) = self.child.take() {
            for _ in 0..100 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(20));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(server) = self.server.take() {
            let _ = server.join();
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.close();
    }
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection").field("label", &self.label).finish()
    }
}

fn parse_response(line: &str, id: &Value) -> Result<serde_json::Map<String, Value>> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Error::protocol(format!("unparseable response ({e}): {line}")))?;
    let Value::Object(obj) = value else {
        return Err(Error::protocol(format!("response is not a JSON object: {line}")));
    };
    if let Some(err) = obj.get("error") {
        let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(Error::Oracle(msg));
    }
    if obj.get("id") != Some(id) {
        return Err(Error::protocol(format!("response does not echo id {id}: {line}")));
    }
    Ok(obj)
}

/// Typed requests over a shared [`Connection`].
pub struct OracleClient {
    conn: Mutex<Connection>,
    hello: HelloInfo,
    next_id: AtomicU64,
}

impl OracleClient {
    pub fn new(mut conn: Connection) -> Result<Self> {
        let line = conn.exchange(&json!({"op": "hello"}).to_string())?;
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::protocol(format!("unparseable hello ({e}): {line}")))?;
        if let Some(err) = value.get("error") {
            return Err(Error::Oracle(err.to_string()));
        }
        let hello: HelloInfo =
            serde_json::from_value(value).map_err(|e| Error::protocol(format!("malformed hello ({e}): {line}")))?;
        if hello.has_role("model") && hello.num_classes.unwrap_or(0) == 0 {
            return Err(Error::protocol("model oracle must declare num_classes >= 1"));
        }
        Ok(Self {
            conn: Mutex::new(conn),
            hello,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn hello(&self) -> &HelloInfo {
        &self.hello
    }

    fn call(&self, mut request: serde_json::Map<String, Value>) -> Result<serde_json::Map<String, Value>> {
        let id = Value::from(format!("q{}", self.next_id.fetch_add(1, Ordering::Relaxed)));
        request.insert("id".into(), id.clone());
        let line = Value::Object(request).to_string();
        let reply = self.conn.lock().expect("connection lock poisoned").exchange(&line)?;
        parse_response(&reply, &id)
    }

    pub fn sample(&self, tokens: &[String], subset: &[usize], m: usize, seed: u64) -> Result<Vec<Vec<String>>> {
        if !self.hello.has_role("sampler") {
            return Err(Error::invalid(format!("oracle {} is not a sampler", self.hello.name)));
        }
        let mut req = serde_json::Map::new();
        req.insert("op".into(), "sample".into());
        req.insert("tokens".into(), json!(tokens));
        req.insert("subset".into(), json!(subset));
        req.insert("m".into(), json!(m));
        req.insert("seed".into(), json!(seed));
        let obj = self.call(req)?;
        let samples = obj.get("samples").cloned().unwrap_or(Value::Null);
        serde_json::from_value(samples).map_err(|e| Error::protocol(format!("bad samples field: {e}")))
    }

    pub fn classify(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if !self.hello.has_role("model") {
            return Err(Error::invalid(format!("oracle {} is not a model", self.hello.name)));
        }
        let mut req = serde_json::Map::new();
        req.insert("op".into(), "classify".into());
        req.insert("tokens".into(), json!(tokens));
        let obj = self.call(req)?;
        let scores = obj.get("scores").cloned().unwrap_or(Value::Null);
        serde_json::from_value(scores).map_err(|e| Error::protocol(format!("bad scores field: {e}")))
    }

    /// Sends `shutdown` and closes the connection.
    pub fn shutdown(&self) {
        let mut conn = self.conn.lock().expect("connection lock poisoned");
        let _ = conn.send_line(&json!({"op": "shutdown"}).to_string());
        conn.close();
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.conn.lock().expect("connection lock poisoned").transcript().to_vec()
    }
}

/// Sampler half of a remote oracle.
pub struct RemoteSampler {
    client: Arc<OracleClient>,
    vocab: Arc<Vocabulary>,
}

impl RemoteSampler {
    pub fn new(client: Arc<OracleClient>, vocab: Arc<Vocabulary>) -> Result<Self> {
        if !client.hello().has_role("sampler") {
            return Err(Error::invalid(format!("oracle {} has no sampler role", client.hello().name)));
        }
        Ok(Self { client, vocab })
    }
}

impl NeighborSampler for RemoteSampler {
    fn name(&self) -> String {
        format!("remote:{}", self.client.hello().name)
    }

    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        let positions: Vec<usize> = subset.positions().collect();
        let raw = self.client.sample(&self.vocab.decode(x), &positions, m, seed)?;
        raw.into_iter()
            .map(|s| {
                Sequence::new(s.iter().map(|t| self.vocab.intern(t)).collect())
                    .map_err(|_| Error::protocol("oracle returned an empty sample"))
            })
            .collect()
    }

    fn serial_only(&self) -> bool {
        self.client.hello().serial_only
    }
}

/// Model half of a remote oracle.
pub struct RemoteModel {
    client: Arc<OracleClient>,
    vocab: Arc<Vocabulary>,
    num_classes: usize,
}

impl RemoteModel {
    pub fn new(client: Arc<OracleClient>, vocab: Arc<Vocabulary>) -> Result<Self> {
        let hello = client.hello();
        if !hello.has_role("model") {
            return Err(Error::invalid(format!("oracle {} has no model role", hello.name)));
        }
        let num_classes = hello.num_classes.unwrap_or(1);
        Ok(Self {
            client,
            vocab,
            num_classes,
        })
    }
}

impl TaskModel for RemoteModel {
    fn name(&self) -> String {
        format!("remote:{}", self.client.hello().name)
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        self.client.classify(&self.vocab.decode(x))
    }

    fn serial_only(&self) -> bool {
        self.client.hello().serial_only
    }
}

/// Misbehaviour the mock oracle can be told to show.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Samples also change a position outside the subset.
    MutateOutside,
    /// Samples gain an extra token.
    WrongLength,
    /// Responses carry a different id.
    WrongId,
    /// One sample too few.
    WrongCount,
    /// Scores of 1.5.
    ScoreOutOfRange,
    /// Sample and classify responses are cut in half.
    Truncated,
    /// Sample and classify answer with an error object.
    ErrorReply,
    /// Hello omits the roles.
    BadHello,
}

impl Fault {
    pub const ALL: [Fault; 9] = [
        Fault::None,
        Fault::MutateOutside,
        Fault::WrongLength,
        Fault::WrongId,
        Fault::WrongCount,
        Fault::ScoreOutOfRange,
        Fault::Truncated,
        Fault::ErrorReply,
        Fault::BadHello,
    ];
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::from(s)).map_err(|_| Error::invalid(format!("unknown fault {s:?}")))
    }
}

/// Configuration of the built-in mock oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct MockConfig {
    pub name: String,
    pub alphabet: Vec<String>,
    pub num_classes: usize,
    pub fault: Fault,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            name: "mock".into(),
            alphabet: ["a", "b", "c", "d"].map(String::from).to_vec(),
            num_classes: 1,
            fault: Fault::None,
        }
    }
}

/// Deterministic score in `[-1,1]` for class `c` of a token sequence.
pub fn mock_score(tokens: &[String], class: usize) -> f64 {
    let mut h = Sha256::new();
    h.update((class as u64).to_le_bytes());
    for t in tokens {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    let digest = h.finalize();
    let u = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    // 53 high bits give an exact double in [0,1]
    (u >> 11) as f64 / ((1u64 << 53) - 1) as f64 * 2.0 - 1.0
}

fn error_reply(id: Option<&Value>, message: impl Into<String>) -> Value {
    let mut obj = serde_json::Map::new();
    if let Some(id) = id {
        obj.insert("id".into(), id.clone());
    }
    obj.insert("error".into(), Value::from(message.into()));
    Value::Object(obj)
}

#[derive(Deserialize)]
struct SampleRequest {
    tokens: Vec<String>,
    subset: Vec<usize>,
    m: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct ClassifyRequest {
    tokens: Vec<String>,
}

fn mock_sample(req: &SampleRequest, config: &MockConfig) -> std::result::Result<Vec<Vec<String>>, String> {
    let n = req.tokens.len();
    if n == 0 {
        return Err("tokens must be nonempty".into());
    }
    if req.subset.is_empty() || req.subset.iter().any(|&p| p == 0 || p > n) {
        return Err(format!("subset must be nonempty positions within 1..={n}"));
    }
    let mut rng = rng_from_seed(req.seed);
    let mut out: Vec<Vec<String>> = (0..req.m)
        .map(|_| {
            let mut s = req.tokens.clone();
            for &p in &req.subset {
                s[p - 1] = config.alphabet[rng.random_range(0..config.alphabet.len())].clone();
            }
            s
        })
        .collect();
    match config.fault {
        Fault::MutateOutside => {
            if let Some(q) = (1..=n).find(|q| !req.subset.contains(q)) {
                for s in &mut out {
                    s[q - 1] = format!("{}~", s[q - 1]);
                }
            }
        }
        Fault::WrongLength => out.iter_mut().for_each(|s| s.push("extra".into())),
        Fault::WrongCount => {
            out.pop();
        }
        _ => {}
    }
    Ok(out)
}

fn mock_respond(line: &str, config: &MockConfig) -> (Option<String>, bool) {
    let request: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return (Some(error_reply(None, format!("malformed request: {e}")).to_string()), false),
    };
    let id = request.get("id");
    let op = request.get("op").and_then(Value::as_str).unwrap_or("");
    let reply_id = if config.fault == Fault::WrongId {
        Some(Value::from("not-the-id"))
    } else {
        id.cloned()
    };
    let faulty = |v: Value| -> String {
        let text = v.to_string();
        match config.fault {
            Fault::Truncated => text[..text.len() / 2].to_string(),
            _ => text,
        }
    };
    let reply = match op {
        "hello" => {
            let mut v = json!({
                "name": config.name,
                "roles": ["sampler", "model"],
                "num_classes": config.num_classes,
                "serial_only": false,
            });
            if config.fault == Fault::BadHello {
                v.as_object_mut().expect("object").remove("roles");
            }
            v.to_string()
        }
        "shutdown" => return (None, true),
        "sample" | "classify" if config.fault == Fault::ErrorReply => {
            error_reply(id, "mock failure requested").to_string()
        }
        "sample" => match serde_json::from_value::<SampleRequest>(request.clone()) {
            Err(e) => error_reply(id, format!("bad sample request: {e}")).to_string(),
            Ok(req) => match mock_sample(&req, config) {
                Err(e) => error_reply(id, e).to_string(),
                Ok(samples) => faulty(json!({"id": reply_id, "samples": samples})),
            },
        },
        "classify" => match serde_json::from_value::<ClassifyRequest>(request.clone()) {
            Err(e) => error_reply(id, format!("bad classify request: {e}")).to_string(),
            Ok(req) if req.tokens.is_empty() => error_reply(id, "tokens must be nonempty").to_string(),
            Ok(req) => {
                let scores: Vec<f64> = (0..config.num_classes)
                    .map(|c| {
                        if config.fault == Fault::ScoreOutOfRange {
                            1.5
                        } else {
                            mock_score(&req.tokens, c)
                        }
                    })
                    .collect();
                faulty(json!({"id": reply_id, "scores": scores}))
            }
        },
        other => error_reply(id, format!("unknown op {other:?}")).to_string(),
    };
    (Some(reply), false)
}

/// Answers requests from `reader` until `shutdown` or end of input.
pub fn serve<R: BufRead, W: Write>(reader: R, mut writer: W, config: &MockConfig) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, stop) = mock_respond(&line, config);
        if let Some(reply) = reply {
            writer.write_all(reply.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        if stop {
            break;
        }
    }
    Ok(())
}

/// Serves TCP clients one at a time until one of them sends `shutdown`.
pub fn serve_tcp(listener: TcpListener, config: &MockConfig) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        let mut shutdown = false;
        let mut writer = stream;
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (reply, stop) = mock_respond(&line, config);
            if let Some(reply) = reply {
                writer.write_all(reply.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
            }
            if stop {
                shutdown = true;
                break;
            }
        }
        if shutdown {
            break;
        }
    }
    Ok(())
}

/// One failed conformance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub endpoint: String,
    pub exchanges: usize,
    pub passed_checks: usize,
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// What a request line obliges the oracle to answer.
enum Expect {
    Hello,
    Samples { tokens: Vec<String>, subset: Vec<usize>, m: usize },
    Scores,
    /// Malformed or invalid request: an error object.
    Error { why: &'static str },
    Nothing,
}

fn expectation(request: &str) -> (Expect, Option<Value>) {
    let Ok(value) = serde_json::from_str::<Value>(request) else {
        return (Expect::Error { why: "truncated request" }, None);
    };
    let id = value.get("id").cloned();
    let expect = match value.get("op").and_then(Value::as_str) {
        Some("hello") => Expect::Hello,
        Some("shutdown") => Expect::Nothing,
        Some("sample") => match serde_json::from_value::<SampleRequest>(value.clone()) {
            Ok(r) if !r.tokens.is_empty()
                && !r.subset.is_empty()
                && r.subset.iter().all(|&p| p >= 1 && p <= r.tokens.len()) =>
            {
                Expect::Samples {
                    tokens: r.tokens,
                    subset: r.subset,
                    m: r.m,
                }
            }
            _ => Expect::Error { why: "invalid sample request" },
        },
        Some("classify") => match serde_json::from_value::<ClassifyRequest>(value.clone()) {
            Ok(r) if !r.tokens.is_empty() => Expect::Scores,
            _ => Expect::Error { why: "invalid classify request" },
        },
        _ => Expect::Error { why: "unknown op" },
    };
    (expect, id)
}

/// Checks request/response pairs, tracking what `hello` announced.
struct Validator {
    num_classes: Option<usize>,
    passed: usize,
    violations: Vec<Violation>,
}

impl Validator {
    fn new() -> Self {
        Self {
            num_classes: None,
            passed: 0,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, check: &str, detail: impl FnOnce() -> String, payload: &str) -> bool {
        if ok {
            self.passed += 1;
        } else {
            self.violations.push(Violation {
                check: check.into(),
                detail: detail(),
                payload: Some(payload.to_string()),
            });
        }
        ok
    }

    fn exchange(&mut self, request: &str, response: Option<&str>) {
        let (expect, id) = expectation(request);
        if let Expect::Nothing = expect {
            return;
        }
        let Some(response) = response else {
            self.violations.push(Violation {
                check: "response".into(),
                detail: "no response to request".into(),
                payload: Some(request.to_string()),
            });
            return;
        };
        let parsed = serde_json::from_str::<Value>(response);
        if !self.check(
            matches!(parsed, Ok(Value::Object(_))),
            "json",
            || "response is not a complete JSON object".into(),
            response,
        ) {
            return;
        }
        let obj = parsed.expect("checked").as_object().cloned().expect("checked");
        if let Expect::Error { why } = expect {
            self.check(
                obj.contains_key("error"),
                "malformed-probe",
                || format!("{why} was not answered with an error object"),
                response,
            );
            if id.is_some() {
                self.check(
                    obj.get("id") == id.as_ref(),
                    "id-echo",
                    || "error response does not echo the id".into(),
                    response,
                );
            }
            return;
        }
        if let Expect::Hello = expect {
            self.hello(&obj, response);
            return;
        }
        if !self.check(
            !obj.contains_key("error"),
            "error-reply",
            || format!("valid request answered with error {}", obj["error"]),
            response,
        ) {
            return;
        }
        self.check(
            obj.get("id") == id.as_ref(),
            "id-echo",
            || {
                format!(
                    "expected id {}, got {}",
                    id.clone().unwrap_or(Value::Null),
                    obj.get("id").cloned().unwrap_or(Value::Null)
                )
            },
            response,
        );
        match expect {
            Expect::Samples { tokens, subset, m } => self.samples(&obj, &tokens, &subset, m, response),
            Expect::Scores => self.scores(&obj, response),
            _ => {}
        }
    }

    fn hello(&mut self, obj: &serde_json::Map<String, Value>, response: &str) {
        match serde_json::from_value::<HelloInfo>(Value::Object(obj.clone())) {
            Err(e) => {
                self.check(false, "hello", || format!("malformed hello: {e}"), response);
            }
            Ok(h) => {
                let known = h.roles.iter().all(|r| r == "sampler" || r == "model");
                self.check(
                    !h.roles.is_empty() && known,
                    "hello-roles",
                    || format!("roles must be a nonempty subset of sampler/model, got {:?}", h.roles),
                    response,
                );
                self.check(
                    obj.get("serial_only").is_some_and(Value::is_boolean),
                    "hello-serial-only",
                    || "serial_only must be a boolean".into(),
                    response,
                );
                if h.has_role("model") {
                    self.check(
                        h.num_classes.is_some_and(|d| d >= 1),
                        "hello-num-classes",
                        || "a model must declare num_classes >= 1".into(),
                        response,
                    );
                }
                self.num_classes = h.num_classes;
            }
        }
    }

    fn samples(
        &mut self,
        obj: &serde_json::Map<String, Value>,
        tokens: &[String],
        subset: &[usize],
        m: usize,
        response: &str,
    ) {
        let samples: Option<Vec<Vec<String>>> = obj.get("samples").and_then(|s| serde_json::from_value(s.clone()).ok());
        let Some(samples) = samples else {
            self.check(false, "samples-field", || "samples must be a list of token lists".into(), response);
            return;
        };
        self.check(
            samples.len() == m,
            "sample-count",
            || format!("asked for {m} samples, got {}", samples.len()),
            response,
        );
        for (k, s) in samples.iter().enumerate() {
            if !self.check(
                s.len() == tokens.len(),
                "length-preserved",
                || format!("sample {k} has length {}, input has {}", s.len(), tokens.len()),
                response,
            ) {
                continue;
            }
            let outside = (1..=tokens.len()).find(|q| !subset.contains(q) && s[q - 1] != tokens[q - 1]);
            self.check(
                outside.is_none(),
                "outside-subset-unchanged",
                || {
                    let q = outside.expect("failed check");
                    format!("sample {k} changed position {q} outside subset {subset:?}")
                },
                response,
            );
        }
    }

    fn scores(&mut self, obj: &serde_json::Map<String, Value>, response: &str) {
        let scores: Option<Vec<f64>> = obj.get("scores").and_then(|s| serde_json::from_value(s.clone()).ok());
        let Some(scores) = scores else {
            self.check(false, "scores-field", || "scores must be a list of numbers".into(), response);
            return;
        };
        if let Some(d) = self.num_classes {
            self.check(
                scores.len() == d,
                "score-count",
                || format!("expected {d} scores, got {}", scores.len()),
                response,
            );
        }
        self.check(
            scores.iter().all(|s| s.is_finite() && (-1.0..=1.0).contains(s)),
            "score-range",
            || format!("scores {scores:?} leave [-1,1]"),
            response,
        );
    }
}

/// Validates a recorded `> request` / `< response` transcript.
pub fn check_transcript(endpoint: &str, entries: &[TranscriptEntry]) -> ConformanceReport {
    let mut v = Validator::new();
    let mut exchanges = 0;
    let mut i = 0;
    while i < entries.len() {
        let e = &entries[i];
        match e.direction {
            Direction::Sent => {
                let response = entries
                    .get(i + 1)
                    .filter(|r| r.direction == Direction::Received)
                    .map(|r| r.line.as_str());
                let (expect, _) = expectation(&e.line);
                let consumed = response.is_some() && !matches!(expect, Expect::Nothing);
                v.exchange(&e.line, if consumed { response } else { None });
                exchanges += 1;
                i += if consumed { 2 } else { 1 };
            }
            Direction::Received => {
                v.violations.push(Violation {
                    check: "unsolicited".into(),
                    detail: "response without a pending request".into(),
                    payload: Some(e.line.clone()),
                });
                i += 1;
            }
        }
    }
    ConformanceReport {
        endpoint: endpoint.into(),
        exchanges,
        passed_checks: v.passed,
        violations: v.violations,
    }
}

fn probe_requests() -> Vec<String> {
    let sent = |t: &[&str]| t.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let fixtures = [
        (sent(&["the", "movie", "was", "good"]), vec![3usize], 5usize, 1u64),
        (sent(&["a", "b", "a", "b", "a", "b"]), vec![2, 3, 5], 4, 7),
        (sent(&["x"]), vec![1], 3, 11),
    ];
    let mut out = vec![json!({"op": "hello"}).to_string()];
    for (k, (tokens, subset, m, seed)) in fixtures.iter().enumerate() {
        out.push(
            json!({"op": "sample", "id": format!("s{k}"), "tokens": tokens, "subset": subset, "m": m, "seed": seed})
                .to_string(),
        );
        out.push(json!({"op": "classify", "id": format!("c{k}"), "tokens": tokens}).to_string());
    }
    let truncated = json!({"op": "sample", "id": "p0", "tokens": ["a", "b"], "subset": [1], "m": 2, "seed": 0})
        .to_string();
    out.push(truncated[..truncated.len() / 2].to_string());
    out.push(json!({"op": "frobnicate", "id": "p1"}).to_string());
    out.push(json!({"op": "sample", "id": "p2", "tokens": ["a", "b"], "subset": [3], "m": 2, "seed": 0}).to_string());
    out.push(json!({"op": "classify", "id": "p3", "tokens": []}).to_string());
    out.push(json!({"op": "hello"}).to_string());
    out
}

/// Drives the full suite against a live endpoint: hello, samples, scores,
/// malformed probes, then shutdown. The connection's transcript records
/// every line.
pub fn check_connection(conn: &mut Connection) -> ConformanceReport {
    let mut v = Validator::new();
    let mut exchanges = 0;
    for request in probe_requests() {
        exchanges += 1;
        match conn.exchange(&request) {
            Ok(response) => v.exchange(&request, Some(&response)),
            Err(e) => {
                v.violations.push(Violation {
                    check: "transport".into(),
                    detail: e.to_string(),
                    payload: Some(request),
                });
                break;
            }
        }
    }
    exchanges += 1;
    let closed = conn
        .send_line(&json!({"op": "shutdown"}).to_string())
        .and_then(|_| conn.recv_line());
    match closed {
        Ok(None) => v.passed += 1,
        Ok(Some(extra)) => v.violations.push(Violation {
            check: "shutdown".into(),
            detail: "endpoint kept talking after shutdown".into(),
            payload: Some(extra),
        }),
        Err(e) => v.violations.push(Violation {
            check: "shutdown".into(),
            detail: e.to_string(),
            payload: None,
        }),
    }
    ConformanceReport {
        endpoint: conn.label().to_string(),
        exchanges,
        passed_checks: v.passed,
        violations: v.violations,
    }
}
