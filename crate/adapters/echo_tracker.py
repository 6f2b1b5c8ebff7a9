#!/usr/bin/env python3
"""Reference tracker adapter for the reefloop bridge protocol.

Speaks newline-delimited JSON on stdin/stdout (or one TCP connection with
--port) and answers every frame with the init box. Use it as a template for
wrapping a real tracker: replace EchoTracker.init/track.

    python3 echo_tracker.py [--port N] [--delay-ms MS] [--frames path|inline] [--log FILE]

--log writes one line per frame request with the time spent between reading
the request and flushing the reply, in milliseconds.
"""

import argparse
import json
import socket
import sys
import time

PROTOCOL_VERSION = 1


class EchoTracker:
    name = "echo-py"

    def __init__(self, delay_ms):
        self.delay = delay_ms / 1000.0
        self.box = None

    def init(self, frame, box):
        self.box = box

    def track(self, frame):
        if self.delay > 0:
            time.sleep(self.delay)
        x, y, w, h = self.box
        return {"x": x, "y": y, "w": w, "h": h, "score": 1.0}


def serve(rfile, wfile, tracker, frames, log):
    def send(msg):
        wfile.write(json.dumps(msg, separators=(",", ":")) + "\n")
        wfile.flush()

    for line in rfile:
        start = time.perf_counter()
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except ValueError as e:
            send({"type": "err", "msg": "bad request: %s" % e})
            continue
        kind = req.get("type")
        if kind == "hello":
            send({"type": "hello", "version": PROTOCOL_VERSION, "name": tracker.name, "frames": frames})
        elif kind == "init":
            tracker.init(req["frame"], req["bbox"])
            send({"type": "ok"})
        elif kind == "frame":
            if tracker.box is None:
                send({"type": "err", "msg": "not initialized"})
                continue
            reply = tracker.track(req["frame"])
            reply["type"] = "bbox"
            send(reply)
            if log:
                log.write("%.6f\n" % ((time.perf_counter() - start) * 1000.0))
                log.flush()
        elif kind == "bye":
            return
        else:
            send({"type": "err", "msg": "unknown request type %r" % kind})


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--port", type=int, help="serve one TCP connection instead of stdio")
    ap.add_argument("--delay-ms", type=float, default=0.0, help="simulated processing time per frame")
    ap.add_argument("--frames", choices=["path", "inline"], default="path")
    ap.add_argument("--log", help="append per-frame processing times (ms) to this file")
    args = ap.parse_args()

    log = open(args.log, "a") if args.log else None
    tracker = EchoTracker(args.delay_ms)
    if args.port is None:
        serve(sys.stdin, sys.stdout, tracker, args.frames, log)
        return
    with socket.create_server(("127.0.0.1", args.port)) as srv:
        conn, _ = srv.accept()
        with conn, conn.makefile("r") as rfile, conn.makefile("w") as wfile:
            serve(rfile, wfile, tracker, args.frames, log)


if __name__ == "__main__":
    main()
