//! Audit wire protocol: newline-delimited JSON over a byte stream.
//!
//! ```text
//! server -> client  {"n":8,"labels":2}
//! client -> server  {"id":1,"xs":[[1,-1,...],...]}
//! server -> client  {"id":1,"ys":[1,-1,...]}   or   {"id":1,"error":"..."}
//! ```
//!
//! Ids strictly increase per connection and each response echoes the id of the
//! outstanding request. [`serve`] is a reference server used for conformance tests.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ModelOracle;
use crate::point::PointVector;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub n: usize,
    pub labels: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub xs: Vec<Vec<i8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Labels { id: u64, ys: Vec<i64> },
    Error { id: u64, error: String },
}

impl Response {
    pub fn id(&self) -> u64 {
        match self {
            Response::Labels { id, .. } | Response::Error { id, .. } => *id,
        }
    }
}

pub fn encode_points(xs: &[PointVector]) -> Vec<Vec<i8>> {
    xs.iter().map(|x| x.signs()).collect()
}

/// One JSON document followed by `\n`.
pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, msg)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Serve `model` until EOF. Malformed requests get an error message carrying the
/// request id when one can be recovered, and the connection stays open.
pub fn serve<R: BufRead, W: Write>(model: &ModelOracle, reader: R, mut writer: W) -> io::Result<()> {
    write_message(&mut writer, &Handshake { n: model.dim(), labels: model.arity() })?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => answer(model, req),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()))
                    .unwrap_or(0);
                Response::Error { id, error: format!("malformed request: {e}") }
            }
        };
        write_message(&mut writer, &response)?;
    }
    Ok(())
}

fn answer(model: &ModelOracle, req: Request) -> Response {
    let mut points = Vec::with_capacity(req.xs.len());
    for x in &req.xs {
        if x.len() != model.dim() {
            return Response::Error {
                id: req.id,
                error: format!("point has {} coordinates, expected {}", x.len(), model.dim()),
            };
        }
        match PointVector::from_signs(x) {
            Ok(p) => points.push(p),
            Err(e) => return Response::Error { id: req.id, error: e.to_string() },
        }
    }
    match model.label_all(&points) {
        Ok(ys) => Response::Labels { id: req.id, ys: ys.into_iter().map(i64::from).collect() },
        Err(e) => Response::Error { id: req.id, error: e.to_string() },
    }
}
