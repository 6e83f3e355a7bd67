//! Host side of the external generator protocol (version 1).
//!
//! The generator runs as a child process. The host writes one JSON request
//! per line to its stdin and reads exactly one JSON response line per
//! request from its stdout. Requests are strictly serialized.
//!
//! ```text
//! > {"command":"handshake","payload":{"protocol":1}}
//! < {"status":"ok","payload":{"protocol":1,"capabilities":{"seeded":true}}}
//! > {"command":"fit","payload":{"labels":["flight","fare"],"pairs":[{"text":"book a flight","label":1}]}}
//! < {"status":"ok","payload":{}}
//! > {"command":"generate","payload":{"class":1,"count":2,"seed":7,"max_len":40}}
//! < {"status":"ok","payload":{"sentences":["book a flight to boston","book a flight"]}}
//! > {"command":"shutdown","payload":{}}
//! < {"status":"ok","payload":{}}
//! ```
//!
//! Failures are reported as `{"status":"error","payload":{"message":"..."}}`
//! and do not end the session. A response that does not arrive within the
//! configured timeout, or a closed stdout, is a generator failure.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::condlm::{GenerationParams, Sample};
use crate::corpus::{tokenize, ClassId, Dataset, LabelMap, LabeledSentence};
use crate::generator::SentenceGenerator;
use crate::{Error, Result, Stage};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "payload", rename_all = "lowercase")]
pub enum Request {
    Handshake { protocol: u32 },
    Fit { labels: Vec<String>, pairs: Vec<FitPair> },
    Generate { class: ClassId, count: usize, seed: u64, max_len: usize },
    Shutdown {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPair {
    pub text: String,
    pub label: ClassId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub status: Status,
    #[serde(default)]
    pub payload: Value,
}

fn failure(msg: impl Into<String>) -> Error {
    Error::Stage {
        stage: Stage::Generator,
        source: Box::new(Error::Protocol(msg.into())),
    }
}

/// A running generator process.
pub struct ExternalGenerator {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    labels: Option<LabelMap>,
    capabilities: Value,
}

impl ExternalGenerator {
    /// Launches `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failure(format!("cannot launch `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut g = Self {
            command: command.to_owned(),
            child,
            stdin,
            lines: rx,
            timeout,
            labels: None,
            capabilities: Value::Null,
        };
        let payload = g.call(&Request::Handshake {
            protocol: PROTOCOL_VERSION,
        })?;
        let version = payload.get("protocol").and_then(Value::as_u64);
        if version != Some(u64::from(PROTOCOL_VERSION)) {
            return Err(failure(format!(
                "handshake: expected protocol {PROTOCOL_VERSION}, got {version:?}"
            )));
        }
        g.capabilities = payload.get("capabilities").cloned().unwrap_or(Value::Null);
        Ok(g)
    }

    pub fn capabilities(&self) -> &Value {
        &self.capabilities
    }

    /// Sends one request and waits for its response. An `error` status is
    /// returned as [`Error::Protocol`] wrapped in the generator stage.
    pub fn call(&mut self, req: &Request) -> Result<Value> {
        let resp = self.roundtrip(req)?;
        match resp.status {
            Status::Ok => Ok(resp.payload),
            Status::Error => {
                let msg = resp
                    .payload
                    .get("message")
                    .and_then(Value::as_str)
                    .unwrap_or("unspecified error");
                Err(failure(msg.to_owned()))
            }
        }
    }

    /// Writes a raw line and returns the parsed response.
    pub fn roundtrip_raw(&mut self, line: &str) -> Result<Response> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| failure("generator stdin already closed"))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| failure(format!("`{}` is not accepting input: {e}", self.command)))?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(failure(format!("reading response: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(failure(format!(
                    "no response from `{}` within {:?}",
                    self.command, self.timeout
                )));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().ok();
                return Err(failure(format!(
                    "`{}` exited before responding ({})",
                    self.command,
                    status.map_or("unknown status".into(), |s| s.to_string())
                )));
            }
        };
        serde_json::from_str(&line).map_err(|e| failure(format!("malformed response `{line}`: {e}")))
    }

    fn roundtrip(&mut self, req: &Request) -> Result<Response> {
        let line = serde_json::to_string(req)?;
        self.roundtrip_raw(&line)
    }

    /// Sends the training pairs (the fine-tuning step).
    pub fn fit(&mut self, d: &Dataset) -> Result<()> {
        let pairs = d
            .items()
            .iter()
            .map(|s| FitPair {
                text: s.text.clone(),
                label: s.label,
            })
            .collect();
        self.call(&Request::Fit {
            labels: d.labels().names().to_vec(),
            pairs,
        })?;
        self.labels = Some(d.labels().clone());
        Ok(())
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.call(&Request::Shutdown {})?;
        self.stdin = None;
        let _ = self.child.wait();
        Ok(())
    }
}

impl Drop for ExternalGenerator {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            let _ = self.roundtrip(&Request::Shutdown {});
            self.stdin = None;
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl SentenceGenerator for ExternalGenerator {
    fn describe(&self) -> String {
        format!("external generator `{}`", self.command)
    }

    fn supports(&self, class: ClassId) -> bool {
        self.labels.as_ref().is_some_and(|l| l.contains(class))
    }

    /// Every sample of a batch records the batch seed as its `gen_seed`.
    /// Sentences longer than `max_len` tokens are cut and flagged truncated.
    fn generate(
        &mut self,
        class: ClassId,
        count: usize,
        seed: u64,
        params: &GenerationParams,
    ) -> Result<Vec<Sample>> {
        params.validate()?;
        let payload = self.call(&Request::Generate {
            class,
            count,
            seed,
            max_len: params.max_len,
        })?;
        let sentences: Vec<String> = payload
            .get("sentences")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| failure(format!("bad `sentences` payload: {e}")))?
            .ok_or_else(|| failure("response lacks `sentences`"))?;
        if sentences.len() != count {
            return Err(failure(format!(
                "asked for {count} sentences, received {}",
                sentences.len()
            )));
        }
        sentences
            .into_iter()
            .map(|text| {
                let mut tokens = tokenize(&text);
                if tokens.is_empty() {
                    return Err(failure("generator returned an empty sentence"));
                }
                let truncated = tokens.len() > params.max_len;
                tokens.truncate(params.max_len);
                Ok(Sample {
                    sentence: LabeledSentence::from_tokens(tokens, class)?,
                    truncated,
                    gen_seed: seed,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let r = Request::Generate { class: 2, count: 3, seed: 5, max_len: 40 };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"command":"generate","payload":{"class":2,"count":3,"seed":5,"max_len":40}}"#
        );
        assert_eq!(
            serde_json::to_string(&Request::Shutdown {}).unwrap(),
            r#"{"command":"shutdown","payload":{}}"#
        );
        assert_eq!(
            serde_json::to_string(&Request::Handshake { protocol: 1 }).unwrap(),
            r#"{"command":"handshake","payload":{"protocol":1}}"#
        );
        let resp: Response = serde_json::from_str(r#"{"status":"error","payload":{"message":"x"}}"#).unwrap();
        assert_eq!(resp.status, Status::Error);
    }
}
