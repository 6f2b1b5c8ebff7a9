use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::Command;
use std::thread;
use std::time::Duration;

use reefloop_core::bridge::adapter::{serve_connection, serve_connection_with_version, EchoAdapter, TrackerAdapter};
use reefloop_core::bridge::{bridge_connect, BridgeEndpoint, BridgeError, FrameMode};
use reefloop_core::metrics::fps_stats;
use reefloop_core::synthetic::{compose, Background, Placement, Sprite};
use reefloop_core::tracker::{Frame, NccTracker, Tracker, TrackerConfig, TrackerError};
use reefloop_core::BBox;

fn frame(x: i64, t: f64) -> Frame {
    let s = Sprite::textured(20, 14, 2, 4);
    compose(96, 72, &Background::Noise { seed: 2, cell: 3 }, &[Placement { sprite: &s, x, y: 30 }], t)
}

/// Bind a local port and run `f` on the first accepted connection.
fn one_shot_server<F>(f: F) -> String
where
    F: FnOnce(BufReader<std::net::TcpStream>, std::net::TcpStream) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        f(reader, stream);
    });
    addr
}

/// Reply to each request line with the next canned reply.
fn scripted(replies: Vec<&'static str>, stall_after: Option<usize>) -> String {
    one_shot_server(move |reader, mut out| {
        for (i, line) in reader.lines().enumerate() {
            if line.is_err() {
                return;
            }
            if stall_after == Some(i) {
                thread::sleep(Duration::from_millis(800));
            }
            match replies.get(i) {
                Some(r) => {
                    let _ = out.write_all(format!("{r}\n").as_bytes());
                }
                None => return,
            }
        }
    })
}

const HELLO: &str = r#"{"type":"hello","version":1,"name":"stub","frames":"inline"}"#;

#[test]
fn echo_double_returns_init_box_forever() {
    let addr = one_shot_server(|r, w| serve_connection(r, w, &mut EchoAdapter::default()).unwrap());
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
    assert_eq!(t.remote_name(), "echo");
    let init = BBox::new(10.0, 30.0, 20.0, 14.0);
    t.init(&frame(10, 0.0), init).unwrap();
    for k in 1..20 {
        let out = t.track(&frame(10 + k, k as f64 * 0.1)).unwrap();
        assert_eq!(out.bbox, init);
        assert_eq!(out.confidence, 1.0);
        assert!(out.latency_ms >= 0.0);
    }
}

#[test]
fn bridged_ncc_matches_in_process_ncc() {
    for mode in [FrameMode::Inline, FrameMode::Path] {
        let addr = one_shot_server(move |r, w| {
            let mut a = TrackerAdapter { tracker: NccTracker::new(TrackerConfig::fixed_template()), mode };
            serve_connection(r, w, &mut a).unwrap()
        });
        let mut remote = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
        assert_eq!(remote.frame_mode(), mode);
        let mut local = NccTracker::new(TrackerConfig::fixed_template());
        let init = BBox::new(10.0, 30.0, 20.0, 14.0);
        remote.init(&frame(10, 0.0), init).unwrap();
        local.init(&frame(10, 0.0), init).unwrap();
        for k in 1..15 {
            let f = frame(10 + 3 * k, k as f64 * 0.1);
            let a = remote.track(&f).unwrap();
            let b = local.track(&f).unwrap();
            assert_eq!(a.bbox, b.bbox);
            assert_eq!(a.confidence, b.confidence);
        }
    }
}

#[test]
fn version_mismatch_is_rejected() {
    let addr = one_shot_server(|r, w| {
        let _ = serve_connection_with_version(r, w, &mut EchoAdapter::default(), 1);
    });
    let mut ep = BridgeEndpoint::tcp(addr);
    ep.protocol_version = 2;
    match bridge_connect(&ep) {
        Err(BridgeError::VersionMismatch { client: 2, server: 1 }) => {}
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("handshake should fail"),
    }
}

#[test]
fn connection_refused() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    assert!(matches!(bridge_connect(&BridgeEndpoint::tcp(format!("127.0.0.1:{port}"))), Err(BridgeError::Connect(_))));
}

#[test]
fn timeout_fails_the_session() {
    let addr =
        scripted(vec![HELLO, r#"{"type":"ok"}"#, r#"{"type":"bbox","x":1,"y":2,"w":3,"h":4,"score":1}"#], Some(2));
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr).with_timeout_ms(200)).unwrap();
    t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)).unwrap();
    match t.track(&frame(11, 0.1)) {
        Err(TrackerError::Bridge(BridgeError::Timeout(200))) => {}
        other => panic!("expected timeout, got {other:?}"),
    }
    assert!(t.is_failed());
    // the late reply must not be accepted as the answer to a later frame
    thread::sleep(Duration::from_millis(800));
    assert!(matches!(t.track(&frame(12, 0.2)), Err(TrackerError::Bridge(BridgeError::SessionFailed(_)))));
}

#[test]
fn handshake_timeout() {
    let addr = scripted(vec![HELLO], Some(0));
    assert!(matches!(bridge_connect(&BridgeEndpoint::tcp(addr).with_timeout_ms(150)), Err(BridgeError::Timeout(150))));
}

#[test]
fn parses_bbox_reply() {
    let addr =
        scripted(vec![HELLO, r#"{"type":"ok"}"#, r#"{"type":"bbox","x":10,"y":20,"w":30,"h":40,"score":0.9}"#], None);
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
    t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)).unwrap();
    let out = t.track(&frame(10, 0.1)).unwrap();
    assert_eq!(out.bbox, BBox::new(10.0, 20.0, 30.0, 40.0));
    assert_eq!(out.confidence, 0.9);
}

#[test]
fn malformed_reply_fails_the_session() {
    let addr = scripted(vec![HELLO, r#"{"type":"ok"}"#, r#"{"type":"bbox","x":10,"y":20,"h":40,"score":0.9}"#], None);
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
    t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)).unwrap();
    assert!(matches!(t.track(&frame(10, 0.1)), Err(TrackerError::Bridge(BridgeError::Malformed(_)))));
    assert!(t.is_failed());
}

#[test]
fn remote_error_on_init() {
    let addr = scripted(vec![HELLO, r#"{"type":"err","msg":"no gpu"}"#], None);
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
    match t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)) {
        Err(TrackerError::Bridge(BridgeError::Remote(m))) => assert_eq!(m, "no gpu"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn disconnect_mid_stream() {
    let addr = scripted(vec![HELLO, r#"{"type":"ok"}"#], None);
    let mut t = bridge_connect(&BridgeEndpoint::tcp(addr)).unwrap();
    t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)).unwrap();
    assert!(matches!(t.track(&frame(10, 0.1)), Err(TrackerError::Bridge(BridgeError::Disconnected))));
    assert!(t.is_failed());
}

fn adapter_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../adapters/echo_tracker.py")
}

fn have_python() -> bool {
    Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn reference_adapter_latency_matches_its_own_timing() {
    if !have_python() {
        eprintln!("python3 not found; skipping reference adapter test");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("timing.log");
    let script = adapter_script();
    let ep = BridgeEndpoint::stdio(
        "python3",
        &[script.to_str().unwrap(), "--delay-ms", "20", "--log", log.to_str().unwrap()],
    );
    let mut t = bridge_connect(&ep).unwrap();
    assert_eq!(t.remote_name(), "echo-py");
    assert_eq!(t.frame_mode(), FrameMode::Path);
    let init = BBox::new(10.0, 30.0, 20.0, 14.0);
    t.init(&frame(10, 0.0), init).unwrap();
    let mut latencies = Vec::new();
    for k in 1..=50 {
        let out = t.track(&frame(10 + k % 9, k as f64 * 0.1)).unwrap();
        assert_eq!(out.bbox, init);
        latencies.push(out.latency_ms);
    }
    drop(t);
    let measured = fps_stats(&latencies).unwrap();
    let own: Vec<f64> = std::fs::read_to_string(&log).unwrap().lines().map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(own.len(), 50);
    let own = fps_stats(&own).unwrap();
    let rel = (measured.mean_fps - own.mean_fps).abs() / own.mean_fps;
    assert!(rel < 0.05, "client {:.2} fps vs adapter {:.2} fps", measured.mean_fps, own.mean_fps);
}

#[test]
fn reference_adapter_inline_frames() {
    if !have_python() {
        return;
    }
    let script = adapter_script();
    let ep = BridgeEndpoint::stdio("python3", &[script.to_str().unwrap(), "--frames", "inline"]);
    let mut t = bridge_connect(&ep).unwrap();
    assert_eq!(t.frame_mode(), FrameMode::Inline);
    t.init(&frame(10, 0.0), BBox::new(10.0, 30.0, 20.0, 14.0)).unwrap();
    assert_eq!(t.track(&frame(10, 0.1)).unwrap().bbox, BBox::new(10.0, 30.0, 20.0, 14.0));
}
