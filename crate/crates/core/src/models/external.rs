//! Client side of the audit wire protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use super::protocol::{encode_points, write_message, Handshake, Request, Response};
use super::{Backend, ModelOracle};
use crate::error::{AuditError, OracleError};
use crate::point::{check_dim, PointVector};

/// Points per request message.
pub const DEFAULT_MAX_BATCH: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    /// `tcp:host:port`
    Tcp(String),
    /// `stdio:program arg...`, spawned as a child speaking on stdin/stdout.
    Stdio(Vec<String>),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Self, AuditError> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.rsplit_once(':').is_none() {
                return Err(AuditError::InvalidParameter(format!("endpoint '{s}' needs host:port")));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(AuditError::InvalidParameter("stdio endpoint needs a command".into()));
            }
            Ok(Endpoint::Stdio(argv))
        } else {
            Err(AuditError::InvalidParameter(format!("endpoint '{s}' must start with tcp: or stdio:")))
        }
    }
}

fn transport(message: impl Into<String>, acknowledged: u64) -> OracleError {
    OracleError::Transport { message: message.into(), acknowledged }
}

fn protocol(message: impl Into<String>, acknowledged: u64) -> OracleError {
    OracleError::Protocol { message: message.into(), acknowledged }
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    next_id: u64,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

pub struct ExternalModel {
    n: usize,
    arity: usize,
    max_batch: usize,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel").field("n", &self.n).field("arity", &self.arity).finish()
    }
}

impl ExternalModel {
    /// Read the handshake from an already-open stream pair.
    pub fn from_streams(
        mut reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self, OracleError> {
        let mut line = String::new();
        let read = reader.read_line(&mut line).map_err(|e| transport(format!("reading handshake: {e}"), 0))?;
        if read == 0 {
            return Err(transport("connection closed before handshake", 0));
        }
        let hs: Handshake =
            serde_json::from_str(line.trim()).map_err(|e| protocol(format!("bad handshake '{}': {e}", line.trim()), 0))?;
        check_dim(hs.n).map_err(|e| protocol(format!("handshake: {e}"), 0))?;
        if hs.labels < 2 {
            return Err(protocol(format!("handshake declares {} labels", hs.labels), 0));
        }
        Ok(Self {
            n: hs.n,
            arity: hs.labels,
            max_batch: DEFAULT_MAX_BATCH,
            conn: Mutex::new(Connection { reader, writer, next_id: 1, child: None }),
        })
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    fn roundtrip(conn: &mut Connection, xs: &[PointVector], binary: bool, acked: u64) -> Result<Vec<i32>, OracleError> {
        let id = conn.next_id;
        conn.next_id += 1;
        write_message(&mut conn.writer, &Request { id, xs: encode_points(xs) })
            .map_err(|e| transport(format!("sending request {id}: {e}"), acked))?;
        let mut line = String::new();
        let read = conn.reader.read_line(&mut line).map_err(|e| transport(format!("awaiting response {id}: {e}"), acked))?;
        if read == 0 {
            return Err(transport(format!("connection closed while awaiting response {id}"), acked));
        }
        let resp: Response = serde_json::from_str(line.trim())
            .map_err(|e| protocol(format!("unparseable response to request {id}: {e}"), acked))?;
        if resp.id() != id {
            return Err(protocol(format!("response id {} does not match request {id}", resp.id()), acked));
        }
        match resp {
            Response::Error { error, .. } => Err(OracleError::Remote { id, message: error, acknowledged: acked }),
            Response::Labels { ys, .. } => {
                if ys.len() != xs.len() {
                    return Err(protocol(format!("request {id}: {} labels for {} points", ys.len(), xs.len()), acked));
                }
                ys.into_iter()
                    .map(|y| match (binary, y) {
                        // 0/1-coded binary servers are recoded to -1/+1.
                        (true, 0) | (true, -1) => Ok(-1),
                        (true, 1) => Ok(1),
                        (true, other) => Err(protocol(format!("binary label {other} in response {id}"), acked)),
                        (false, y) => i32::try_from(y).map_err(|_| protocol(format!("label {y} out of range"), acked)),
                    })
                    .collect()
            }
        }
    }
}

impl Backend for ExternalModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        let mut conn = self.conn.lock().map_err(|_| transport("connection lock poisoned", 0))?;
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(self.max_batch) {
            let ys = Self::roundtrip(&mut conn, chunk, self.arity == 2, out.len() as u64)?;
            out.extend(ys);
        }
        Ok(out)
    }
}

/// Open a connection and read the handshake. `timeout` bounds each read on TCP.
pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<ModelOracle, OracleError> {
    let (model, name) = match endpoint {
        Endpoint::Tcp(addr) => {
            let sock = addr
                .to_socket_addrs()
                .map_err(|e| transport(format!("resolving {addr}: {e}"), 0))?
                .next()
                .ok_or_else(|| transport(format!("{addr} resolves to nothing"), 0))?;
            let stream =
                TcpStream::connect_timeout(&sock, timeout).map_err(|e| transport(format!("connecting to {addr}: {e}"), 0))?;
            stream.set_read_timeout(Some(timeout)).map_err(|e| transport(e.to_string(), 0))?;
            stream.set_nodelay(true).ok();
            let reader = stream.try_clone().map_err(|e| transport(e.to_string(), 0))?;
            (ExternalModel::from_streams(Box::new(BufReader::new(reader)), Box::new(stream))?, format!("tcp:{addr}"))
        }
        Endpoint::Stdio(argv) => {
            let mut child = Command::new(&argv[0])
                .args(&argv[1..])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| transport(format!("spawning {}: {e}", argv[0]), 0))?;
            let stdin = child.stdin.take().ok_or_else(|| transport("child has no stdin", 0))?;
            let stdout = child.stdout.take().ok_or_else(|| transport("child has no stdout", 0))?;
            let model = ExternalModel::from_streams(Box::new(BufReader::new(stdout)), Box::new(stdin))?;
            model.conn.lock().map_err(|_| transport("connection lock poisoned", 0))?.child = Some(child);
            (model, format!("stdio:{}", argv.join(" ")))
        }
    };
    Ok(ModelOracle::new(model, name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_forms() {
        assert_eq!(Endpoint::parse("tcp:127.0.0.1:9009").unwrap(), Endpoint::Tcp("127.0.0.1:9009".into()));
        assert_eq!(
            Endpoint::parse("stdio:python3 -m adapter").unwrap(),
            Endpoint::Stdio(vec!["python3".into(), "-m".into(), "adapter".into()])
        );
        assert!(Endpoint::parse("udp:1").is_err());
        assert!(Endpoint::parse("tcp:nohost").is_err());
        assert!(Endpoint::parse("stdio:").is_err());
    }

    #[test]
    fn handshake_validation() {
        let bad = |s: &'static str| {
            ExternalModel::from_streams(Box::new(BufReader::new(s.as_bytes())), Box::new(Vec::new())).unwrap_err()
        };
        assert!(matches!(bad(""), OracleError::Transport { .. }));
        assert!(matches!(bad("{\"n\":0,\"labels\":2}\n"), OracleError::Protocol { .. }));
        assert!(matches!(bad("{\"n\":3,\"labels\":1}\n"), OracleError::Protocol { .. }));
        assert!(matches!(bad("hello\n"), OracleError::Protocol { .. }));
    }
}
