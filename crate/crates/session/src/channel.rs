//! The operator channel: newline-delimited JSON over TCP between a running
//! episode and one operator console.
//!
//! Server to console, every tick a `telemetry` message and every
//! `frame_every` ticks a `frame` message:
//!
//! ```text
//! {"type":"telemetry","tick":12,"t":1.2,"depth":10.0,"altitude":50.0,"heading":0.0,"mode":"tracking"}
//! {"type":"frame","seq":12,"png_b64":"iVBOR...","box":{"x":..,"y":..,"w":..,"h":..},"mode":"tracking","confidence":0.93}
//! ```
//!
//! Console to server:
//!
//! ```text
//! {"type":"init_box","box":{"x":140,"y":100,"w":40,"h":30}}
//! {"type":"override","surge":0.2,"sway":0,"heave":0,"yaw":-0.1}
//! {"type":"release"}
//! {"type":"reinit"}                       (optionally with "box")
//! ```
//!
//! Only one console is served at a time; a second connection receives an
//! `error` message and is closed. Outbound messages go through a bounded
//! queue, so a console that stops reading loses messages instead of
//! slowing the control loop.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::Engine;
use reefloop_core::tracker::Frame;
use reefloop_core::BBox;
use reefloop_sim::{ControlCommand, TrackerMode};
use serde::{Deserialize, Serialize};

use crate::episode::{Operator, OperatorCommand, OperatorView, TickRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Telemetry {
        tick: u64,
        t: f64,
        depth: f64,
        altitude: f64,
        heading: f64,
        mode: TrackerMode,
    },
    Frame {
        seq: u64,
        png_b64: String,
        #[serde(rename = "box")]
        bbox: Option<BBox>,
        mode: TrackerMode,
        confidence: Option<f64>,
    },
    Error {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConsoleMessage {
    InitBox {
        #[serde(rename = "box")]
        bbox: BBox,
    },
    Override {
        surge: f64,
        #[serde(default)]
        sway: f64,
        heave: f64,
        yaw: f64,
    },
    Release,
    Reinit {
        #[serde(rename = "box", default)]
        bbox: Option<BBox>,
    },
}

impl From<ConsoleMessage> for OperatorCommand {
    fn from(m: ConsoleMessage) -> Self {
        match m {
            ConsoleMessage::InitBox { bbox } => OperatorCommand::InitBox { bbox },
            ConsoleMessage::Override { surge, sway, heave, yaw } => {
                OperatorCommand::Override { command: ControlCommand::new(surge, sway, heave, yaw).clamped() }
            }
            ConsoleMessage::Release => OperatorCommand::Release,
            ConsoleMessage::Reinit { bbox } => OperatorCommand::Reinit { bbox },
        }
    }
}

fn to_line<T: Serialize>(msg: &T) -> String {
    let mut s = serde_json::to_string(msg).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    /// Send a frame every this many ticks.
    pub frame_every: u64,
    /// Outbound messages buffered per console before dropping.
    pub queue: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { frame_every: 1, queue: 32 }
    }
}

struct Console {
    id: u64,
    tx: SyncSender<String>,
    stream: TcpStream,
}

#[derive(Default)]
struct Shared {
    /// Outbound queue and socket of the connected console.
    console: Mutex<Option<Console>>,
    stop: AtomicBool,
    dropped: AtomicU64,
    connections: AtomicU64,
}

/// Accepts consoles on a background thread and relays their commands.
pub struct ConsoleServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    commands: Receiver<OperatorCommand>,
    config: ChannelConfig,
    acceptor: Option<JoinHandle<()>>,
}

impl ConsoleServer {
    pub fn bind(addr: &str, config: ChannelConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let (tx, commands) = mpsc::channel();
        let acceptor = {
            let shared = shared.clone();
            thread::spawn(move || accept_loop(listener, shared, tx, config.queue))
        };
        log::info!("operator channel listening on {addr}");
        Ok(Self { addr, shared, commands, config, acceptor: Some(acceptor) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Outbound messages dropped because a console fell behind.
    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    pub fn connections(&self) -> u64 {
        self.shared.connections.load(Ordering::Relaxed)
    }

    pub fn is_connected(&self) -> bool {
        self.shared.console.lock().expect("not poisoned").is_some()
    }

    /// Flag that ends an episode driven by this server.
    pub fn stop_handle(&self) -> StopHandle {
        StopHandle(self.shared.clone())
    }

    fn send(&self, msg: &ServerMessage) {
        let mut console = self.shared.console.lock().expect("not poisoned");
        if let Some(c) = console.as_ref() {
            match c.tx.try_send(to_line(msg)) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => {
                    self.shared.dropped.fetch_add(1, Ordering::Relaxed);
                }
                Err(TrySendError::Disconnected(_)) => *console = None,
            }
        }
    }
}

impl Drop for ConsoleServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(c) = self.shared.console.lock().expect("not poisoned").take() {
            let _ = c.stream.shutdown(std::net::Shutdown::Both);
        }
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

#[derive(Clone)]
pub struct StopHandle(Arc<Shared>);

impl StopHandle {
    pub fn stop(&self) {
        self.0.stop.store(true, Ordering::Relaxed);
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, commands: Sender<OperatorCommand>, queue: usize) {
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                let mut console = shared.console.lock().expect("not poisoned");
                if console.is_some() {
                    log::warn!("refusing second operator console from {peer}");
                    let mut stream = stream;
                    let reason = "another operator console is already connected".to_string();
                    let _ = stream.write_all(to_line(&ServerMessage::Error { reason }).as_bytes());
                    continue;
                }
                log::info!("operator console connected from {peer}");
                let id = shared.connections.fetch_add(1, Ordering::Relaxed);
                let (tx, rx) = mpsc::sync_channel(queue.max(1));
                match (stream.try_clone(), stream.try_clone()) {
                    (Ok(read_half), Ok(handle)) => {
                        *console = Some(Console { id, tx: tx.clone(), stream: handle });
                        drop(console);
                        thread::spawn(move || write_loop(stream, rx));
                        let shared = shared.clone();
                        let commands = commands.clone();
                        thread::spawn(move || read_loop(read_half, id, tx, shared, commands));
                    }
                    (Err(e), _) | (_, Err(e)) => log::warn!("cannot serve console {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn write_loop(mut stream: TcpStream, rx: Receiver<String>) {
    for line in rx {
        if stream.write_all(line.as_bytes()).is_err() {
            break;
        }
    }
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

fn read_loop(
    stream: TcpStream,
    id: u64,
    own: SyncSender<String>,
    shared: Arc<Shared>,
    commands: Sender<OperatorCommand>,
) {
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ConsoleMessage>(&line) {
            Ok(msg) => {
                if commands.send(msg.into()).is_err() {
                    break;
                }
            }
            Err(e) => {
                let reason = format!("bad message: {e}");
                if own.try_send(to_line(&ServerMessage::Error { reason })).is_err() {
                    shared.dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
    log::info!("operator console disconnected");
    let mut console = shared.console.lock().expect("not poisoned");
    // only clear the slot if it is still ours
    if console.as_ref().is_some_and(|c| c.id == id) {
        *console = None;
    }
}

/// [`Operator`] backed by whatever console is connected to the server.
pub struct ConsoleOperator<'a> {
    server: &'a ConsoleServer,
}

impl<'a> ConsoleOperator<'a> {
    pub fn new(server: &'a ConsoleServer) -> Self {
        Self { server }
    }
}

impl Operator for ConsoleOperator<'_> {
    fn name(&self) -> String {
        "console".into()
    }

    fn poll(&mut self, _view: &OperatorView) -> Vec<OperatorCommand> {
        self.server.commands.try_iter().collect()
    }

    fn observe(&mut self, record: &TickRecord, frame: Option<&Frame>) {
        self.server.send(&ServerMessage::Telemetry {
            tick: record.tick,
            t: record.t,
            depth: record.sensors.depth,
            altitude: record.sensors.dvl_altitude,
            heading: record.sensors.compass_heading,
            mode: record.mode,
        });
        let every = self.server.config.frame_every.max(1);
        if record.tick % every != 0 || !self.server.is_connected() {
            return;
        }
        let Some(png) = frame.and_then(|f| f.to_png().ok()) else { return };
        self.server.send(&ServerMessage::Frame {
            seq: record.tick,
            png_b64: base64::engine::general_purpose::STANDARD.encode(png),
            bbox: record.tracker.map(|s| s.bbox),
            mode: record.mode,
            confidence: record.tracker.map(|s| s.confidence),
        });
    }

    fn wants_frames(&self) -> bool {
        true
    }

    fn stop_requested(&self) -> bool {
        self.server.shared.stop.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn console_messages_parse() {
        let m: ConsoleMessage = serde_json::from_str(r#"{"type":"init_box","box":{"x":1,"y":2,"w":3,"h":4}}"#).unwrap();
        assert_eq!(m, ConsoleMessage::InitBox { bbox: BBox::new(1.0, 2.0, 3.0, 4.0) });
        let m: ConsoleMessage = serde_json::from_str(r#"{"type":"reinit"}"#).unwrap();
        assert_eq!(m, ConsoleMessage::Reinit { bbox: None });
        let m: ConsoleMessage =
            serde_json::from_str(r#"{"type":"override","surge":2,"sway":0,"heave":-0.5,"yaw":0.1}"#).unwrap();
        assert_eq!(
            OperatorCommand::from(m),
            OperatorCommand::Override { command: ControlCommand::new(1.0, 0.0, -0.5, 0.1) }
        );
        assert!(serde_json::from_str::<ConsoleMessage>(r#"{"type":"warp"}"#).is_err());
    }

    #[test]
    fn server_messages_have_wire_names() {
        let line = to_line(&ServerMessage::Frame {
            seq: 3,
            png_b64: "AA==".into(),
            bbox: None,
            mode: TrackerMode::Manual,
            confidence: None,
        });
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["type"], "frame");
        assert_eq!(v["mode"], "manual");
        assert!(v["box"].is_null());
    }
}
