"""Domain types, validation, and JSONL dataset serialization.

Everything here is an immutable value: safe to share between threads and to
key dictionaries with. RSSI is integer dBm in [-100, 0]; -100 doubles as the
"not heard" noise floor downstream. Coordinates are decimal meters with the
origin at the southwest corner, x pointing east and y pointing north.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import BinaryIO, Iterable, Mapping, Optional, Sequence

from .errors import (
    EmptyReadings,
    InvalidArea,
    MalformedBssid,
    MalformedRecord,
    OutOfBoundsPosition,
    OutOfRangeRssi,
)

RSSI_MIN = -100
RSSI_MAX = 0

_BSSID_RE = re.compile(r"^([0-9a-fA-F]{2})([:-])(?:[0-9a-fA-F]{2}\2){4}[0-9a-fA-F]{2}$")


class Band(Enum):
    """WiFi band of one radio; each band of a physical AP is a distinct source."""

    GHZ_2_4 = "2.4"
    GHZ_5 = "5"


class Heading(Enum):
    """Cardinal direction the device faces, clockwise from North."""

    N = 0
    E = 90
    S = 180
    W = 270

    @property
    def degrees(self) -> int:
        return self.value

    @classmethod
    def from_degrees(cls, degrees: int) -> "Heading":
        return cls(degrees)


HEADINGS = (Heading.N, Heading.E, Heading.S, Heading.W)


def parse_bssid(text: str) -> str:
    """Canonicalize a MAC address to lowercase colon form.

    Accepts colon- or hyphen-separated octet pairs in either case.
    """
    if not isinstance(text, str) or not _BSSID_RE.match(text):
        raise MalformedBssid(f"bssid: not a 6-octet MAC: {text!r}")
    return text.replace("-", ":").lower()


@dataclass(frozen=True)
class AccessPointId:
    """One radio of an access point. Identity is (bssid, band); ssid is display only."""

    bssid: str
    band: Band
    ssid: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bssid", parse_bssid(self.bssid))

    def key(self) -> tuple[str, str]:
        return (self.bssid, self.band.value)


@dataclass(frozen=True)
class ReferencePoint:
    point_id: str
    x: float
    y: float


@dataclass(frozen=True)
class SurveyArea:
    """Abstract rectangular survey area with declared reference points."""

    width: float
    height: float
    reference_points: tuple[ReferencePoint, ...] = ()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.width) and self.width > 0):
            raise InvalidArea(f"width must be positive and finite, got {self.width}")
        if not (math.isfinite(self.height) and self.height > 0):
            raise InvalidArea(f"height must be positive and finite, got {self.height}")
        object.__setattr__(self, "reference_points", tuple(self.reference_points))
        seen: set[str] = set()
        for rp in self.reference_points:
            if rp.point_id in seen:
                raise InvalidArea(f"duplicate point_id {rp.point_id!r}")
            seen.add(rp.point_id)
            if not self.contains(rp.x, rp.y):
                raise InvalidArea(
                    f"reference point {rp.point_id!r} at ({rp.x}, {rp.y}) "
                    f"outside {self.width}x{self.height} area"
                )

    def contains(self, x: float, y: float) -> bool:
        return (
            math.isfinite(x)
            and math.isfinite(y)
            and 0.0 <= x <= self.width
            and 0.0 <= y <= self.height
        )

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "reference_points": [
                {"point_id": rp.point_id, "x": rp.x, "y": rp.y}
                for rp in self.reference_points
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SurveyArea":
        try:
            rps = tuple(
                ReferencePoint(str(rp["point_id"]), float(rp["x"]), float(rp["y"]))
                for rp in obj.get("reference_points", [])
            )
            return cls(float(obj["width"]), float(obj["height"]), rps)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArea(f"malformed area object: {exc}") from exc


@dataclass(frozen=True)
class FingerprintSample:
    """One survey observation at a known reference point."""

    point_id: str
    x: float
    y: float
    heading: Heading
    timestamp: datetime
    device_id: str
    readings: Mapping[AccessPointId, int]

    def __post_init__(self) -> None:
        # dict preserves insertion order, which serialization relies on
        object.__setattr__(self, "readings", dict(self.readings))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FingerprintSample):
            return NotImplemented
        return (
            self.point_id == other.point_id
            and self.x == other.x
            and self.y == other.y
            and self.heading == other.heading
            and self.timestamp == other.timestamp
            and self.device_id == other.device_id
            and self.readings == other.readings
        )


def validate_sample(sample: FingerprintSample, area: SurveyArea) -> FingerprintSample:
    """Return the sample unchanged iff all invariants hold and (x,y) is in the area."""
    if not sample.readings:
        raise EmptyReadings("readings: sample contains no RSS readings")
    for ap, rssi in sample.readings.items():
        if not (RSSI_MIN <= rssi <= RSSI_MAX):
            raise OutOfRangeRssi(
                f"readings[{ap.bssid}/{ap.band.value}]: rssi {rssi} outside "
                f"[{RSSI_MIN}, {RSSI_MAX}]"
            )
    if not area.contains(sample.x, sample.y):
        raise OutOfBoundsPosition(
            f"(x, y): ({sample.x}, {sample.y}) outside "
            f"{area.width}x{area.height} area"
        )
    return sample


# ---------------------------------------------------------------------------
# JSONL wire format
#
# One record per line, UTF-8:
#   {"point_id":"rp-07","x":3.0,"y":2.0,"heading_deg":0,"t":"...Z",
#    "device_id":"dev-1","readings":[{"bssid":"..","band":"5","ssid":"..","rssi":-61}]}
# Keys exactly as shown; unknown keys rejected; rssi must be a JSON integer.
# ---------------------------------------------------------------------------

_RECORD_KEYS = {"point_id", "x", "y", "heading_deg", "t", "device_id", "readings"}
_READING_KEYS = {"bssid", "band", "ssid", "rssi"}
_BAND_BY_WIRE = {b.value: b for b in Band}


def render_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    text = ts.astimezone(timezone.utc).isoformat()
    return text.replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    # Python 3.10's fromisoformat does not accept the Z suffix
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return ts.astimezone(timezone.utc)


def sample_to_record(sample: FingerprintSample) -> dict:
    readings = []
    for ap, rssi in sample.readings.items():
        entry: dict = {"bssid": ap.bssid, "band": ap.band.value}
        if ap.ssid is not None:
            entry["ssid"] = ap.ssid
        entry["rssi"] = rssi
        readings.append(entry)
    return {
        "point_id": sample.point_id,
        "x": sample.x,
        "y": sample.y,
        "heading_deg": sample.heading.degrees,
        "t": render_timestamp(sample.timestamp),
        "device_id": sample.device_id,
        "readings": readings,
    }


def record_to_sample(obj: object) -> FingerprintSample:
    """Decode one JSON record dict; raises ValueError on any schema violation."""
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    missing = _RECORD_KEYS - obj.keys()
    if missing:
        raise ValueError(f"missing key {sorted(missing)[0]!r}")
    unknown = obj.keys() - _RECORD_KEYS
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r}")
    if not isinstance(obj["point_id"], str):
        raise ValueError("point_id must be a string")
    if not isinstance(obj["device_id"], str):
        raise ValueError("device_id must be a string")
    x, y = obj["x"], obj["y"]
    for name, value in (("x", x), ("y", y)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{name} must be a JSON number")
    if obj["heading_deg"] not in (0, 90, 180, 270):
        raise ValueError(f"heading_deg must be one of 0/90/180/270, got {obj['heading_deg']!r}")
    if not isinstance(obj["t"], str):
        raise ValueError("t must be a string")
    try:
        ts = parse_timestamp(obj["t"])
    except ValueError as exc:
        raise ValueError(f"t: {exc}") from exc
    if not isinstance(obj["readings"], list) or not obj["readings"]:
        raise ValueError("readings must be a non-empty array")

    readings: dict[AccessPointId, int] = {}
    for i, entry in enumerate(obj["readings"]):
        if not isinstance(entry, dict):
            raise ValueError(f"readings[{i}] is not an object")
        if "bssid" not in entry or "band" not in entry or "rssi" not in entry:
            raise ValueError(f"readings[{i}]: missing bssid/band/rssi")
        unknown = entry.keys() - _READING_KEYS
        if unknown:
            raise ValueError(f"readings[{i}]: unknown key {sorted(unknown)[0]!r}")
        band = _BAND_BY_WIRE.get(entry["band"])
        if band is None:
            raise ValueError(f"readings[{i}]: band must be \"2.4\" or \"5\"")
        ssid = entry.get("ssid")
        if ssid is not None and not isinstance(ssid, str):
            raise ValueError(f"readings[{i}]: ssid must be a string")
        rssi = entry["rssi"]
        if isinstance(rssi, bool) or not isinstance(rssi, int):
            raise ValueError(f"readings[{i}]: rssi must be a JSON integer")
        try:
            ap = AccessPointId(entry["bssid"], band, ssid)
        except MalformedBssid as exc:
            raise ValueError(f"readings[{i}]: {exc}") from exc
        if ap in readings:
            raise ValueError(f"readings[{i}]: duplicate access point {ap.bssid}/{band.value}")
        readings[ap] = rssi

    return FingerprintSample(
        point_id=obj["point_id"],
        x=float(x),
        y=float(y),
        heading=Heading.from_degrees(obj["heading_deg"]),
        timestamp=ts,
        device_id=obj["device_id"],
        readings=readings,
    )


def sample_to_line(sample: FingerprintSample) -> bytes:
    return json.dumps(sample_to_record(sample), separators=(",", ":")).encode() + b"\n"


def write_jsonl(samples: Iterable[FingerprintSample], sink: BinaryIO) -> int:
    """Write samples as newline-delimited JSON; returns the byte count written."""
    total = 0
    for sample in samples:
        total += sink.write(sample_to_line(sample))
    return total


def read_jsonl(source: BinaryIO) -> list[FingerprintSample]:
    """Read a JSONL sample stream; raises MalformedRecord (1-based line) on any defect."""
    samples: list[FingerprintSample] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("utf-8", errors="strict").strip("\r\n")
        if not line:
            raise MalformedRecord(lineno, "blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from exc
        try:
            samples.append(record_to_sample(obj))
        except ValueError as exc:
            raise MalformedRecord(lineno, str(exc)) from exc
    return samples


def observation_readings_to_json(readings: Mapping[AccessPointId, int]) -> list[dict]:
    """Shared "readings" array encoding used by samples, observations, and the API."""
    out = []
    for ap, rssi in readings.items():
        entry: dict = {"bssid": ap.bssid, "band": ap.band.value}
        if ap.ssid is not None:
            entry["ssid"] = ap.ssid
        entry["rssi"] = rssi
        out.append(entry)
    return out


def readings_from_json(entries: Sequence[dict]) -> dict[AccessPointId, int]:
    """Decode a "readings" array; raises ValueError on schema violations."""
    fake = {"point_id": "", "x": 0.0, "y": 0.0, "heading_deg": 0,
            "t": "2024-01-01T00:00:00Z", "device_id": "", "readings": list(entries)}
    return dict(record_to_sample(fake).readings)
