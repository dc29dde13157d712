"""Lockstep wire protocol between the robot server and the perception client.

Every message is a 4-byte big-endian length followed by a canonical JSON
object (sorted keys, no whitespace, shortest round-trip floats) carrying a
``type`` field. Session flow::

    client HELLO  -> server HELLO
    client CONFIG (request) -> server CONFIG (authoritative)
    server FRAME t -> client COMMAND t   (repeated, strictly alternating)
    server RESULT, server BYE
"""
from __future__ import annotations

import json
import logging
import socket
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from .results import TrialResult
from .scenario import Scenario, ScenarioError, scenario_from_dict
from .session import PerceptionClient, RobotServer, run_in_process
from .tracking.trackers import TRACKER_KINDS, EgoMotionHint

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "follow-sim/1"
MAX_PAYLOAD = 1 << 24
MESSAGE_TYPES = ("HELLO", "CONFIG", "FRAME", "COMMAND", "RESULT", "BYE")
_REQUIRED = {
    "HELLO": ("protocol_version",),
    "CONFIG": ("scenario", "tracker", "seed"),
    "FRAME": ("tick_index", "observation", "ego"),
    "COMMAND": ("tick_index", "command", "status"),
    "RESULT": ("result",),
    "BYE": (),
}


class TransportError(Exception):
    pass


class EncodingError(TransportError):
    pass


class FramingError(TransportError):
    pass


class ProtocolError(TransportError):
    pass


class HandshakeError(ProtocolError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type: str
    payload: Dict[str, Any] = field(default_factory=dict)


def canonical_json(obj: Any) -> bytes:
    try:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    except (TypeError, ValueError) as e:
        raise EncodingError(f"payload is not canonical JSON: {e}") from None
    return text.encode("utf-8")


def frame_bytes(obj: Dict[str, Any]) -> bytes:
    data = canonical_json(obj)
    if len(data) > MAX_PAYLOAD:
        raise EncodingError(f"payload of {len(data)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack(">I", len(data)) + data


def _validate(mtype: str, payload: Dict[str, Any]) -> None:
    if mtype not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {mtype!r}")
    missing = [k for k in _REQUIRED[mtype] if k not in payload]
    if missing:
        raise ProtocolError(f"{mtype} message missing field(s) {', '.join(missing)}")


def encode_message(m: WireMessage) -> bytes:
    if "type" in m.payload:
        raise EncodingError("payload must not carry its own 'type' key")
    _validate(m.type, m.payload)
    return frame_bytes({**m.payload, "type": m.type})


def _parse(data: bytes, expected_version: Optional[str]) -> WireMessage:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed payload: {e}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise ProtocolError("payload must be an object with a string 'type'")
    mtype = obj.pop("type")
    _validate(mtype, obj)
    if mtype == "HELLO" and expected_version is not None and obj["protocol_version"] != expected_version:
        raise HandshakeError(
            f"protocol version mismatch: peer speaks {obj['protocol_version']!r}, expected {expected_version!r}"
        )
    return WireMessage(mtype, obj)


def decode_message(data: bytes, expected_version: Optional[str] = PROTOCOL_VERSION) -> WireMessage:
    """Decode exactly one complete frame."""
    if len(data) < 4:
        raise FramingError(f"truncated length prefix ({len(data)} of 4 bytes)")
    (n,) = struct.unpack(">I", data[:4])
    body = data[4:]
    if len(body) < n:
        raise FramingError(f"truncated payload: prefix claims {n} bytes, {len(body)} delivered")
    if len(body) > n:
        raise FramingError(f"{len(body) - n} trailing bytes after frame")
    return _parse(body, expected_version)


# -- socket plumbing ------------------------------------------------------------


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError as e:
            raise FramingError(f"connection error: {e}") from None
        if not chunk:
            raise FramingError(f"peer closed connection ({len(buf)} of {n} bytes received)")
        buf.extend(chunk)
    return bytes(buf)


def read_message(sock: socket.socket, expected_version: Optional[str] = PROTOCOL_VERSION) -> WireMessage:
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    if n > MAX_PAYLOAD:
        raise FramingError(f"frame of {n} bytes exceeds limit")
    return _parse(_recv_exact(sock, n), expected_version)


def send_message(sock: socket.socket, m: WireMessage) -> None:
    try:
        sock.sendall(encode_message(m))
    except OSError as e:
        raise FramingError(f"connection error: {e}") from None


def _expect(m: WireMessage, mtype: str) -> WireMessage:
    if m.type != mtype:
        raise ProtocolError(f"expected {mtype}, got {m.type}")
    return m


# -- sessions --------------------------------------------------------------------


def serve_session(sock: socket.socket, default_scenario: Optional[Scenario] = None, transcript: Optional[List] = None) -> TrialResult:
    """Run one trial as the robot side over a connected socket."""

    def recv() -> WireMessage:
        m = read_message(sock, expected_version=None)
        if transcript is not None:
            transcript.append(("recv", m.type, m.payload.get("tick_index")))
        return m

    def send(m: WireMessage) -> None:
        if transcript is not None:
            transcript.append(("send", m.type, m.payload.get("tick_index")))
        send_message(sock, m)

    hello = _expect(recv(), "HELLO")
    send(WireMessage("HELLO", {"protocol_version": PROTOCOL_VERSION}))
    if hello.payload["protocol_version"] != PROTOCOL_VERSION:
        raise HandshakeError(f"client speaks {hello.payload['protocol_version']!r}")

    req = _expect(recv(), "CONFIG").payload
    if req["tracker"] not in TRACKER_KINDS:
        raise ProtocolError(f"unknown tracker {req['tracker']!r}")
    if req["scenario"] is not None:
        try:
            scenario = scenario_from_dict(req["scenario"])
        except ScenarioError as e:
            raise ProtocolError(f"bad scenario in CONFIG: {e}") from None
    elif default_scenario is not None:
        scenario = default_scenario
    else:
        raise ProtocolError("CONFIG carries no scenario and the server has no default")
    seed = int(req["seed"]) if req["seed"] is not None else scenario.seed
    send(WireMessage("CONFIG", {"scenario": scenario.to_dict(), "tracker": req["tracker"], "seed": seed}))

    server = RobotServer(scenario, req["tracker"], seed)
    while not server.done:
        frame = server.frame()
        frame["observation"] = frame["observation"].to_dict()
        send(WireMessage("FRAME", frame))
        reply = recv()
        if reply.type != "COMMAND":
            raise ProtocolError(f"expected COMMAND for tick {frame['tick_index']}, got {reply.type}")
        if reply.payload["tick_index"] != frame["tick_index"]:
            raise ProtocolError(
                f"alternation violated: COMMAND tick {reply.payload['tick_index']} answers FRAME {frame['tick_index']}"
            )
        server.apply(reply.payload["tick_index"], reply.payload["command"], reply.payload["status"])
    result = server.result()
    send(WireMessage("RESULT", {"result": result.to_dict()}))
    send(WireMessage("BYE"))
    return result


def client_session(
    sock: socket.socket,
    tracker_kind: str,
    seed: Optional[int] = None,
    scenario: Optional[Scenario] = None,
    version: str = PROTOCOL_VERSION,
) -> TrialResult:
    """Run one trial as the perception side; returns Aborted if the server vanishes."""
    send_message(sock, WireMessage("HELLO", {"protocol_version": version}))
    _expect(read_message(sock, expected_version=version), "HELLO")
    send_message(
        sock,
        WireMessage(
            "CONFIG",
            {"scenario": None if scenario is None else scenario.to_dict(), "tracker": tracker_kind, "seed": seed},
        ),
    )
    cfg = _expect(read_message(sock), "CONFIG").payload
    client = PerceptionClient(scenario_from_dict(cfg["scenario"]), cfg["tracker"], int(cfg["seed"]))
    expected_tick = 0
    result: Optional[TrialResult] = None
    try:
        while True:
            m = read_message(sock)
            if m.type == "FRAME":
                if result is not None or m.payload["tick_index"] != expected_tick:
                    raise ProtocolError(f"unexpected FRAME {m.payload['tick_index']} (expected {expected_tick})")
                cmd, status = client.step(m.payload)
                send_message(sock, WireMessage("COMMAND", {"tick_index": expected_tick, "command": cmd, "status": status}))
                expected_tick += 1
            elif m.type == "RESULT":
                result = TrialResult.from_dict(m.payload["result"])
            elif m.type == "BYE":
                break
            else:
                raise ProtocolError(f"unexpected {m.type} during trial")
    except FramingError as e:
        log.warning("session aborted: %s", e)
        return client.aborted_result()
    if result is None:
        return client.aborted_result()
    return result


def parse_endpoint(endpoint: str) -> Tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def open_server_socket(host: str = "127.0.0.1", port: int = 0) -> socket.socket:
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen()
    return srv


def serve_forever(
    srv: socket.socket,
    default_scenario: Optional[Scenario] = None,
    max_sessions: Optional[int] = None,
    on_result: Optional[Callable[[TrialResult], None]] = None,
) -> int:
    """Accept and run sessions one after another; returns sessions served."""
    served = 0
    while max_sessions is None or served < max_sessions:
        conn, addr = srv.accept()
        with conn:
            try:
                result = serve_session(conn, default_scenario)
                if on_result:
                    on_result(result)
            except TransportError as e:
                log.warning("session with %s failed: %s", addr, e)
        served += 1
    return served


def run_session(
    role: str,
    endpoint: Optional[str],
    scenario: Optional[Scenario],
    tracker_kind: str,
    seed: Optional[int],
) -> TrialResult:
    """Run one trial as ``server``, ``client`` or ``inprocess``."""
    if role == "inprocess":
        assert scenario is not None
        return run_in_process(scenario, tracker_kind, scenario.seed if seed is None else seed)
    host, port = parse_endpoint(endpoint or "127.0.0.1:0")
    if role == "client":
        with socket.create_connection((host, port), timeout=30) as sock:
            return client_session(sock, tracker_kind, seed, scenario)
    if role == "server":
        with open_server_socket(host, port) as srv:
            conn, _ = srv.accept()
            with conn:
                return serve_session(conn, scenario)
    raise ValueError(f"unknown role {role!r}")


__all__ = [
    "EgoMotionHint",
    "EncodingError",
    "FramingError",
    "HandshakeError",
    "MESSAGE_TYPES",
    "PROTOCOL_VERSION",
    "ProtocolError",
    "TransportError",
    "WireMessage",
    "client_session",
    "decode_message",
    "encode_message",
    "frame_bytes",
    "open_server_socket",
    "read_message",
    "run_session",
    "send_message",
    "serve_forever",
    "serve_session",
]
