//! Server side of the bridge protocol, for hosting a tracker behind a
//! socket or stdio. Used for test doubles and to expose the built-in
//! trackers to other clients.

use std::io::{self, BufRead, Write};
use std::path::Path;

use base64::Engine;

use super::{BridgeError, FrameMode, Reply, Request, PROTOCOL_VERSION};
use crate::geometry::BBox;
use crate::tracker::{Frame, Tracker};

pub trait AdapterTracker {
    fn name(&self) -> String;

    fn frame_mode(&self) -> FrameMode {
        FrameMode::Inline
    }

    fn init(&mut self, frame: Frame, bbox: BBox) -> Result<(), String>;

    /// Box and score for the next frame.
    fn track(&mut self, frame: Frame) -> Result<(BBox, f64), String>;
}

/// Replies with the init box forever, score 1.
#[derive(Debug, Default)]
pub struct EchoAdapter {
    bbox: Option<BBox>,
}

impl AdapterTracker for EchoAdapter {
    fn name(&self) -> String {
        "echo".into()
    }

    fn init(&mut self, _frame: Frame, bbox: BBox) -> Result<(), String> {
        self.bbox = Some(bbox);
        Ok(())
    }

    fn track(&mut self, _frame: Frame) -> Result<(BBox, f64), String> {
        self.bbox.map(|b| (b, 1.0)).ok_or_else(|| "not initialized".into())
    }
}

/// Serves any in-process [`Tracker`] over the protocol.
pub struct TrackerAdapter<T: Tracker> {
    pub tracker: T,
    pub mode: FrameMode,
}

impl<T: Tracker> AdapterTracker for TrackerAdapter<T> {
    fn name(&self) -> String {
        self.tracker.name()
    }

    fn frame_mode(&self) -> FrameMode {
        self.mode
    }

    fn init(&mut self, frame: Frame, bbox: BBox) -> Result<(), String> {
        self.tracker.init(&frame, bbox).map_err(|e| e.to_string())
    }

    fn track(&mut self, frame: Frame) -> Result<(BBox, f64), String> {
        self.tracker.track(&frame).map(|o| (o.bbox, o.confidence)).map_err(|e| e.to_string())
    }
}

/// Turn a `frame` field back into pixels.
pub fn decode_frame(field: &str, mode: FrameMode) -> Result<Frame, BridgeError> {
    match mode {
        FrameMode::Path => Ok(Frame::load_png(Path::new(field), 0.0)?),
        FrameMode::Inline => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(field)
                .map_err(|e| BridgeError::Malformed(format!("frame payload: {e}")))?;
            Ok(Frame::from_png(&bytes, 0.0)?)
        }
    }
}

fn send<W: Write>(writer: &mut W, reply: &Reply) -> io::Result<()> {
    writer.write_all(reply.to_line().as_bytes())?;
    writer.write_all(b"\n")?;
    writer.flush()
}

/// Serve one session until `bye` or end of input.
pub fn serve_connection<R: BufRead, W: Write, A: AdapterTracker + ?Sized>(
    reader: R,
    mut writer: W,
    tracker: &mut A,
) -> io::Result<()> {
    serve_connection_with_version(reader, &mut writer, tracker, PROTOCOL_VERSION)
}

pub fn serve_connection_with_version<R: BufRead, W: Write, A: AdapterTracker + ?Sized>(
    reader: R,
    mut writer: W,
    tracker: &mut A,
    version: u32,
) -> io::Result<()> {
    let mode = tracker.frame_mode();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Err(e) => Reply::Err { msg: format!("bad request: {e}") },
            Ok(Request::Hello { .. }) => Reply::Hello { version, name: tracker.name(), frames: mode },
            Ok(Request::Bye) => return Ok(()),
            Ok(Request::Init { frame, bbox }) => match decode_frame(&frame, mode) {
                Err(e) => Reply::Err { msg: e.to_string() },
                Ok(f) => match tracker.init(f, BBox::from_array(bbox)) {
                    Ok(()) => Reply::Ok,
                    Err(msg) => Reply::Err { msg },
                },
            },
            Ok(Request::Frame { frame }) => match decode_frame(&frame, mode) {
                Err(e) => Reply::Err { msg: e.to_string() },
                Ok(f) => match tracker.track(f) {
                    Ok((b, score)) => Reply::Bbox { x: b.x, y: b.y, w: b.w, h: b.h, score },
                    Err(msg) => Reply::Err { msg },
                },
            },
        };
        send(&mut writer, &reply)?;
    }
    Ok(())
}
