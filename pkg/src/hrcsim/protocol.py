"""Message catalog and framing for the robot-console wire protocol.

Frames are a 4-byte big-endian length prefix followed by a UTF-8 JSON body:

    {"seq": <int>, "t": <sim seconds>, "type": <catalog tag>,
     "correlation_id": <int, optional>, "payload": {...}}

The catalog is a closed set; decoding an unknown tag is an error. Every
catalog message round-trips encode -> decode losslessly (floats are emitted
with full precision and NaN/Infinity are rejected on both sides).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

HEADER = struct.Struct(">I")


class CodecError(ValueError):
    pass


class UnencodableValue(CodecError):
    pass


class Truncated(CodecError):
    pass


class UnknownType(CodecError):
    pass


class MalformedBody(CodecError):
    pass


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_pose(d) -> bool:
    return (
        isinstance(d, dict)
        and isinstance(d.get("position"), list)
        and len(d["position"]) == 3
        and all(_is_num(v) for v in d["position"])
        and isinstance(d.get("orientation"), list)
        and len(d["orientation"]) == 4
        and all(_is_num(v) for v in d["orientation"])
    )


def _need(payload: dict, key: str, check) -> bool:
    return key in payload and check(payload[key])


def _v_hello(p):
    return True  # client hello may be empty; server hello carries the snapshot


def _v_calibrate(p):
    return _need(p, "marker_pose_in_viewer", _is_pose) and _need(p, "marker_to_base", _is_pose)


def _v_calibration_result(p):
    return (
        _need(p, "base_in_viewer", _is_pose)
        and _need(p, "marker_pose_used", _is_pose)
        and _need(p, "timestamp", _is_num)
    )


def _v_object_pose_request(p):
    return _need(p, "object_id", lambda v: isinstance(v, str))


def _v_object_pose_response(p):
    return _need(p, "object_id", lambda v: isinstance(v, str)) and _need(p, "pose", _is_pose)


def _v_trajectory(p):
    return (
        _need(p, "act_id", lambda v: isinstance(v, int))
        and _need(p, "medium", lambda v: v in ("m", "am"))
        and _need(p, "start_time", _is_num)
        and _need(p, "points", lambda pts: isinstance(pts, list) and all(
            isinstance(pt, dict)
            and _is_num(pt.get("t", None))
            and isinstance(pt.get("q"), list)
            and all(_is_num(v) for v in pt["q"])
            for pt in pts
        ))
    )


def _v_joint_state(p):
    return _need(p, "q", lambda q: isinstance(q, list) and all(_is_num(v) for v in q))


def _v_user_input(p):
    return _need(p, "pressed", lambda v: isinstance(v, bool))


def _v_intervention(p):
    return _need(p, "object_id", lambda v: isinstance(v, str)) and _need(p, "new_pose", _is_pose)


def _v_plan_status(p):
    return (
        _need(p, "cursor", lambda v: isinstance(v, int))
        and _need(p, "phase", lambda v: isinstance(v, str))
        and _need(p, "instruction", lambda v: isinstance(v, str))
    )


def _v_collision_event(p):
    return _need(p, "contacts", lambda v: isinstance(v, list))


def _v_act_completed(p):
    return _need(p, "act_id", lambda v: isinstance(v, int))


def _v_error(p):
    return _need(p, "message", lambda v: isinstance(v, str))


CATALOG = {
    "hello": _v_hello,
    "calibrate": _v_calibrate,
    "calibration_result": _v_calibration_result,
    "object_pose_request": _v_object_pose_request,
    "object_pose_response": _v_object_pose_response,
    "trajectory": _v_trajectory,
    "joint_state": _v_joint_state,
    "user_input": _v_user_input,
    "intervention": _v_intervention,
    "plan_status": _v_plan_status,
    "collision_event": _v_collision_event,
    "act_completed": _v_act_completed,
    "error": _v_error,
}


@dataclass
class Envelope:
    seq: int
    t: float
    type: str
    payload: dict = field(default_factory=dict)
    correlation_id: int | None = None

    def body_dict(self) -> dict:
        d = {"seq": self.seq, "t": self.t, "type": self.type}
        if self.correlation_id is not None:
            d["correlation_id"] = self.correlation_id
        d["payload"] = self.payload
        return d


def encode_body(env: Envelope) -> bytes:
    if env.type not in CATALOG:
        raise UnknownType(env.type)
    if not CATALOG[env.type](env.payload):
        raise MalformedBody(f"invalid payload for {env.type!r}")
    try:
        body = json.dumps(env.body_dict(), allow_nan=False, separators=(",", ":"))
    except ValueError as exc:
        raise UnencodableValue(str(exc)) from None
    return body.encode("utf-8")


def encode(env: Envelope) -> bytes:
    """Length-prefixed frame bytes for one envelope."""
    body = encode_body(env)
    return HEADER.pack(len(body)) + body


def _reject_constant(name):
    raise MalformedBody(f"non-finite constant {name!r} in body")


def decode_body(body: bytes) -> Envelope:
    try:
        d = json.loads(body.decode("utf-8"), parse_constant=_reject_constant)
    except MalformedBody:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedBody(str(exc)) from None
    if not isinstance(d, dict):
        raise MalformedBody("body is not an object")
    try:
        mtype = d["type"]
        seq = d["seq"]
        t = d["t"]
        payload = d["payload"]
    except KeyError as exc:
        raise MalformedBody(f"missing field {exc}") from None
    if not isinstance(mtype, str) or mtype not in CATALOG:
        raise UnknownType(repr(mtype))
    if not isinstance(seq, int) or not _is_num(t) or not isinstance(payload, dict):
        raise MalformedBody("bad envelope field types")
    corr = d.get("correlation_id")
    if corr is not None and not isinstance(corr, int):
        raise MalformedBody("correlation_id must be an integer")
    if not CATALOG[mtype](payload):
        raise MalformedBody(f"invalid payload for {mtype!r}")
    return Envelope(seq=seq, t=t, type=mtype, payload=payload, correlation_id=corr)


def decode(data: bytes) -> Envelope:
    """Decode exactly one frame; Truncated if incomplete, MalformedBody if
    trailing bytes follow the frame."""
    if len(data) < HEADER.size:
        raise Truncated(f"need {HEADER.size} header bytes, have {len(data)}")
    (length,) = HEADER.unpack_from(data)
    if len(data) - HEADER.size < length:
        raise Truncated(f"body of {length} bytes, only {len(data) - HEADER.size} available")
    if len(data) - HEADER.size > length:
        raise MalformedBody("trailing bytes after frame")
    return decode_body(data[HEADER.size:])


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Envelope]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < HEADER.size:
                return out
            (length,) = HEADER.unpack_from(self._buf)
            end = HEADER.size + length
            if len(self._buf) < end:
                return out
            body = bytes(self._buf[HEADER.size:end])
            del self._buf[:end]
            out.append(decode_body(body))

    @property
    def pending(self) -> int:
        return len(self._buf)
