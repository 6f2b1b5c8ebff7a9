//! Line-delimited JSON bridge to trackers running in another process.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"hello","version":1,"name":"<tracker>","frames":"path|inline"}
//! -> {"type":"init","frame":"<path|b64>","bbox":[x,y,w,h]}
//! <- {"type":"ok"} | {"type":"err","msg":"..."}
//! -> {"type":"frame","frame":"<path|b64>"}
//! <- {"type":"bbox","x":..,"y":..,"w":..,"h":..,"score":..}
//! -> {"type":"bye"}
//! ```
//!
//! One request is in flight at a time. Any timeout, disconnect or malformed
//! reply fails the session; later calls return [`BridgeError::SessionFailed`].

pub mod adapter;
mod client;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{bridge_connect, BridgeTracker};

use crate::tracker::FrameError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot reach tracker: {0}")]
    Connect(std::io::Error),
    #[error("protocol version mismatch: client {client}, server {server}")]
    VersionMismatch { client: u32, server: u32 },
    #[error("no reply within {0} ms")]
    Timeout(u64),
    #[error("tracker disconnected")]
    Disconnected,
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("tracker error: {0}")]
    Remote(String),
    #[error("session already failed: {0}")]
    SessionFailed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// How frames travel over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMode {
    /// A path to a PNG file readable by the peer.
    Path,
    /// Base64-encoded PNG bytes.
    Inline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello { version: u32 },
    Init { frame: String, bbox: [f64; 4] },
    Frame { frame: String },
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Reply {
    Hello { version: u32, name: String, frames: FrameMode },
    Ok,
    Err { msg: String },
    Bbox { x: f64, y: f64, w: f64, h: f64, score: f64 },
}

impl Request {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

impl Reply {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }

    pub fn parse(line: &str) -> Result<Reply, BridgeError> {
        serde_json::from_str(line.trim()).map_err(|e| BridgeError::Malformed(format!("{e}: {line}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Spawn a program and talk over its stdin/stdout.
    Stdio {
        program: String,
        args: Vec<String>,
    },
    Tcp {
        addr: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeEndpoint {
    pub transport: Transport,
    pub timeout_ms: u64,
    /// Version announced in our hello; must equal the server's.
    pub protocol_version: u32,
}

impl BridgeEndpoint {
    pub fn tcp(addr: impl Into<String>) -> Self {
        Self {
            transport: Transport::Tcp { addr: addr.into() },
            timeout_ms: DEFAULT_TIMEOUT_MS,
            protocol_version: PROTOCOL_VERSION,
        }
    }

    pub fn stdio(program: impl Into<String>, args: &[&str]) -> Self {
        Self {
            transport: Transport::Stdio { program: program.into(), args: args.iter().map(|s| s.to_string()).collect() },
            timeout_ms: DEFAULT_TIMEOUT_MS,
            protocol_version: PROTOCOL_VERSION,
        }
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = ms;
        self
    }
}

impl fmt::Display for BridgeEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.transport {
            Transport::Tcp { addr } => write!(f, "tcp://{addr}"),
            Transport::Stdio { program, args } => {
                write!(f, "stdio:{program}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for BridgeEndpoint {
    type Err = String;

    /// `tcp://host:port`, `host:port` or `stdio:<program> [args..]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace();
            let program = parts.next().ok_or("stdio endpoint needs a program")?;
            let args: Vec<&str> = parts.collect();
            return Ok(BridgeEndpoint::stdio(program, &args));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        if addr.rsplit_once(':').is_none_or(|(h, p)| h.is_empty() || p.parse::<u16>().is_err()) {
            return Err(format!("'{s}' is neither tcp://host:port nor stdio:<program>"));
        }
        Ok(BridgeEndpoint::tcp(addr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_are_bit_exact() {
        assert_eq!(Request::Hello { version: 1 }.to_line(), r#"{"type":"hello","version":1}"#);
        assert_eq!(Request::Bye.to_line(), r#"{"type":"bye"}"#);
        assert_eq!(
            Request::Init { frame: "/tmp/a.png".into(), bbox: [1.0, 2.5, 3.0, 4.0] }.to_line(),
            r#"{"type":"init","frame":"/tmp/a.png","bbox":[1.0,2.5,3.0,4.0]}"#
        );
        assert_eq!(Request::Frame { frame: "x".into() }.to_line(), r#"{"type":"frame","frame":"x"}"#);
    }

    #[test]
    fn parses_replies() {
        let r = Reply::parse(r#"{"type":"bbox","x":10,"y":20,"w":30,"h":40,"score":0.9}"#).unwrap();
        assert_eq!(r, Reply::Bbox { x: 10.0, y: 20.0, w: 30.0, h: 40.0, score: 0.9 });
        assert_eq!(
            Reply::parse(r#"{"type":"hello","version":1,"name":"echo","frames":"inline"}"#).unwrap(),
            Reply::Hello { version: 1, name: "echo".into(), frames: FrameMode::Inline }
        );
        assert_eq!(Reply::parse(r#"{"type":"ok"}"#).unwrap(), Reply::Ok);
        assert!(matches!(
            Reply::parse(r#"{"type":"bbox","x":10,"y":20,"h":40,"score":0.9}"#),
            Err(BridgeError::Malformed(_))
        ));
        assert!(Reply::parse("not json").is_err());
        assert!(Reply::parse(r#"{"type":"teleport"}"#).is_err());
    }

    #[test]
    fn endpoint_strings() {
        assert_eq!("tcp://127.0.0.1:9000".parse::<BridgeEndpoint>().unwrap(), BridgeEndpoint::tcp("127.0.0.1:9000"));
        assert_eq!("localhost:1".parse::<BridgeEndpoint>().unwrap(), BridgeEndpoint::tcp("localhost:1"));
        assert_eq!(
            "stdio:python3 adapters/echo_tracker.py --delay-ms 5".parse::<BridgeEndpoint>().unwrap(),
            BridgeEndpoint::stdio("python3", &["adapters/echo_tracker.py", "--delay-ms", "5"])
        );
        assert!("nonsense".parse::<BridgeEndpoint>().is_err());
        assert!("stdio:".parse::<BridgeEndpoint>().is_err());
        let e = BridgeEndpoint::stdio("a", &["b"]);
        assert_eq!(e.to_string().parse::<BridgeEndpoint>().unwrap(), e);
    }
}
