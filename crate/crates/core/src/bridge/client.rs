use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use tempfile::TempDir;

use super::{BridgeEndpoint, BridgeError, FrameMode, Reply, Request, Transport};
use crate::geometry::BBox;
use crate::tracker::{check_init_box, Frame, TrackStatus, Tracker, TrackerError, TrackerOutput};

type LineResult = Result<String, std::io::ErrorKind>;

/// Client side of a bridged tracker session.
pub struct BridgeTracker {
    endpoint: BridgeEndpoint,
    name: String,
    frame_mode: FrameMode,
    writer: Box<dyn Write + Send>,
    lines: Receiver<LineResult>,
    child: Option<Child>,
    scratch: Option<TempDir>,
    failed: Option<String>,
    initialized: bool,
    frame_dims: Option<(u32, u32)>,
    last_latency_ms: f64,
}

fn spawn_reader<R: Read + Send + 'static>(reader: R) -> Receiver<LineResult> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    let _ = tx.send(Err(std::io::ErrorKind::UnexpectedEof));
                    return;
                }
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e.kind()));
                    return;
                }
            }
        }
    });
    rx
}

/// Connect, exchange hellos and return a handle implementing [`Tracker`].
pub fn bridge_connect(endpoint: &BridgeEndpoint) -> Result<BridgeTracker, BridgeError> {
    let timeout = Duration::from_millis(endpoint.timeout_ms);
    let (writer, lines, child): (Box<dyn Write + Send>, _, _) = match &endpoint.transport {
        Transport::Tcp { addr } => {
            let sock = addr
                .to_socket_addrs()
                .map_err(BridgeError::Connect)?
                .next()
                .ok_or_else(|| BridgeError::Connect(std::io::ErrorKind::AddrNotAvailable.into()))?;
            let stream = TcpStream::connect_timeout(&sock, timeout).map_err(BridgeError::Connect)?;
            stream.set_nodelay(true)?;
            let reader = stream.try_clone()?;
            (Box::new(stream), spawn_reader(reader), None)
        }
        Transport::Stdio { program, args } => {
            let mut child = Command::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(BridgeError::Connect)?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            (Box::new(stdin), spawn_reader(stdout), Some(child))
        }
    };
    let mut client = BridgeTracker {
        endpoint: endpoint.clone(),
        name: String::new(),
        frame_mode: FrameMode::Inline,
        writer,
        lines,
        child,
        scratch: None,
        failed: None,
        initialized: false,
        frame_dims: None,
        last_latency_ms: 0.0,
    };
    let hello = client.request(&Request::Hello { version: endpoint.protocol_version })?;
    match hello {
        Reply::Hello { version, name, frames } => {
            if version != endpoint.protocol_version {
                client.fail(format!("version {version}"));
                return Err(BridgeError::VersionMismatch { client: endpoint.protocol_version, server: version });
            }
            client.name = name;
            client.frame_mode = frames;
            Ok(client)
        }
        Reply::Err { msg } => {
            client.fail(msg.clone());
            Err(BridgeError::Remote(msg))
        }
        other => {
            let msg = format!("expected hello, got {other:?}");
            client.fail(msg.clone());
            Err(BridgeError::Malformed(msg))
        }
    }
}

impl BridgeTracker {
    pub fn endpoint(&self) -> &BridgeEndpoint {
        &self.endpoint
    }

    pub fn remote_name(&self) -> &str {
        &self.name
    }

    pub fn frame_mode(&self) -> FrameMode {
        self.frame_mode
    }

    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }

    /// Round trip of the most recent request, in milliseconds.
    pub fn last_latency_ms(&self) -> f64 {
        self.last_latency_ms
    }

    fn fail(&mut self, reason: String) {
        if self.failed.is_none() {
            log::warn!("bridge session to {} failed: {reason}", self.endpoint);
            self.failed = Some(reason);
        }
    }

    /// Send one request and wait for exactly one reply.
    pub fn request(&mut self, req: &Request) -> Result<Reply, BridgeError> {
        if let Some(reason) = &self.failed {
            return Err(BridgeError::SessionFailed(reason.clone()));
        }
        let mut line = req.to_line();
        line.push('\n');
        let started = Instant::now();
        if let Err(e) = self.writer.write_all(line.as_bytes()).and_then(|_| self.writer.flush()) {
            self.fail(format!("write: {e}"));
            return Err(BridgeError::Disconnected);
        }
        let timeout = Duration::from_millis(self.endpoint.timeout_ms);
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(Ok(text)) => text,
            Ok(Err(kind)) => {
                self.fail(format!("read: {kind}"));
                return Err(BridgeError::Disconnected);
            }
            Err(RecvTimeoutError::Timeout) => {
                self.fail(format!("timeout after {} ms", self.endpoint.timeout_ms));
                return Err(BridgeError::Timeout(self.endpoint.timeout_ms));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.fail("reader closed".into());
                return Err(BridgeError::Disconnected);
            }
        };
        self.last_latency_ms = started.elapsed().as_secs_f64() * 1e3;
        Reply::parse(&reply).inspect_err(|e| self.fail(e.to_string()))
    }

    fn encode_frame(&mut self, frame: &Frame) -> Result<String, BridgeError> {
        match self.frame_mode {
            FrameMode::Inline => Ok(base64::engine::general_purpose::STANDARD.encode(frame.to_png()?)),
            FrameMode::Path => {
                if let Some(src) = &frame.source {
                    let abs = src.canonicalize().unwrap_or_else(|_| src.clone());
                    return Ok(abs.to_string_lossy().into_owned());
                }
                if self.scratch.is_none() {
                    self.scratch = Some(tempfile::tempdir()?);
                }
                let path = self.scratch.as_ref().expect("created above").path().join("frame.png");
                frame.save_png(&path)?;
                Ok(path.to_string_lossy().into_owned())
            }
        }
    }

    fn expect_ok(&mut self, reply: Reply) -> Result<(), BridgeError> {
        match reply {
            Reply::Ok => Ok(()),
            Reply::Err { msg } => Err(BridgeError::Remote(msg)),
            other => {
                let msg = format!("expected ok, got {other:?}");
                self.fail(msg.clone());
                Err(BridgeError::Malformed(msg))
            }
        }
    }
}

impl Tracker for BridgeTracker {
    fn name(&self) -> String {
        format!("bridge:{}", self.endpoint)
    }

    fn init(&mut self, frame: &Frame, bbox: BBox) -> Result<(), TrackerError> {
        check_init_box(frame, &bbox)?;
        let encoded = self.encode_frame(frame)?;
        let reply = self.request(&Request::Init { frame: encoded, bbox: bbox.to_array() })?;
        self.expect_ok(reply)?;
        self.initialized = true;
        self.frame_dims = Some(frame.dims());
        Ok(())
    }

    fn track(&mut self, frame: &Frame) -> Result<TrackerOutput, TrackerError> {
        if !self.initialized {
            return Err(TrackerError::NotInitialized);
        }
        if let Some(dims) = self.frame_dims {
            if dims != frame.dims() {
                return Err(TrackerError::FrameSizeChanged { from: dims, to: frame.dims() });
            }
        }
        let encoded = self.encode_frame(frame)?;
        match self.request(&Request::Frame { frame: encoded })? {
            Reply::Bbox { x, y, w, h, score } => {
                let bbox = BBox::new(x, y, w, h).clamp_inside(frame.width as f64, frame.height as f64);
                Ok(TrackerOutput {
                    bbox,
                    confidence: if score.is_finite() { score.clamp(0.0, 1.0) } else { 0.0 },
                    latency_ms: self.last_latency_ms,
                    status: TrackStatus::Ready,
                })
            }
            Reply::Err { msg } => Err(BridgeError::Remote(msg).into()),
            other => {
                let msg = format!("expected bbox, got {other:?}");
                self.fail(msg.clone());
                Err(BridgeError::Malformed(msg).into())
            }
        }
    }
}

impl Drop for BridgeTracker {
    fn drop(&mut self) {
        if self.failed.is_none() {
            let _ = self
                .writer
                .write_all(format!("{}\n", Request::Bye.to_line()).as_bytes())
                .and_then(|_| self.writer.flush());
        }
        if let Some(mut child) = self.child.take() {
            // give the peer a moment to exit on bye, then make sure it is gone
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
