"""Reproducible stand-in for phone WiFi scanning.

Log-distance path loss with lognormal shadowing over a virtual room:

    r = P_tx - PL0 - 10 n log10(max(d, d0)/d0) - body + X,   X ~ N(0, sigma_sh^2)

Body attenuation applies to APs more than 90 degrees off the facing
direction, which is what makes the four survey headings informative.
Readings are rounded to integer dBm and clamped to [-100, 0]; marginally
detectable APs (pre-clamp below -95 dBm) drop out with probability 0.5,
exercising the localizer's missing-AP path. Every output is a pure function
of (scenario, arguments, seed): per-position substreams are spawned from the
scenario seed, so generation order and parallelism cannot change results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegeneratePath, OutOfBounds
from .localize import Observation
from .model import (
    HEADINGS,
    AccessPointId,
    Band,
    FingerprintSample,
    Heading,
    ReferencePoint,
    SurveyArea,
)

REFERENCE_DISTANCE = 1.0  # d0, m
DROPOUT_THRESHOLD = -95  # dBm, pre-clamp integer value
DROPOUT_PROBABILITY = 0.5

# seed-stream namespaces, so surveys, walks, and test draws never collide
_STREAM_SURVEY = 0
_STREAM_WALK = 1
_STREAM_PROBE = 2

_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)

_HEADING_VECTORS = {
    Heading.N: (0.0, 1.0),
    Heading.E: (1.0, 0.0),
    Heading.S: (0.0, -1.0),
    Heading.W: (-1.0, 0.0),
}


@dataclass(frozen=True)
class PathLossParams:
    tx_power_dbm: float = 15.0
    ref_loss_db: float = 40.0
    exponent: float = 2.4
    shadowing_std_db: float = 4.0
    body_attenuation_db: float = 3.0

    def __post_init__(self) -> None:
        if not self.exponent > 0:
            raise ValueError(f"path loss exponent must be > 0, got {self.exponent}")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing_std_db must be >= 0")
        if self.body_attenuation_db < 0:
            raise ValueError("body_attenuation_db must be >= 0")


# typical indoor values; configuration, not ground truth
DEFAULT_PARAMS = {
    Band.GHZ_2_4: PathLossParams(ref_loss_db=40.0, exponent=2.4),
    Band.GHZ_5: PathLossParams(ref_loss_db=46.0, exponent=2.8),
}


@dataclass(frozen=True)
class VirtualAp:
    ap: AccessPointId
    x: float
    y: float
    params: PathLossParams


@dataclass(frozen=True)
class SimScenario:
    area: SurveyArea
    aps: tuple[VirtualAp, ...]
    rng_seed: int

    def __post_init__(self) -> None:
        if not self.aps:
            raise ValueError("scenario needs at least one access point")
        object.__setattr__(self, "aps", tuple(self.aps))
        for vap in self.aps:
            if not self.area.contains(vap.x, vap.y):
                raise OutOfBounds(
                    f"AP {vap.ap.bssid}/{vap.ap.band.value} at ({vap.x}, {vap.y}) "
                    "outside the area"
                )
        seen = set()
        for vap in self.aps:
            if vap.ap in seen:
                raise ValueError(f"duplicate AP {vap.ap.bssid}/{vap.ap.band.value}")
            seen.add(vap.ap)


def _stream(seed: int, namespace: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(namespace, index)))


@lru_cache(maxsize=8)
def _scenario_arrays(scenario: SimScenario):
    positions = np.array([[vap.x, vap.y] for vap in scenario.aps])
    tx = np.array([vap.params.tx_power_dbm for vap in scenario.aps])
    ref_loss = np.array([vap.params.ref_loss_db for vap in scenario.aps])
    exponent = np.array([vap.params.exponent for vap in scenario.aps])
    shadowing = np.array([vap.params.shadowing_std_db for vap in scenario.aps])
    body = np.array([vap.params.body_attenuation_db for vap in scenario.aps])
    return positions, tx, ref_loss, exponent, shadowing, body


def _scan_baseline(
    scenario: SimScenario, position: tuple[float, float], heading: Heading
) -> np.ndarray:
    """Deterministic per-AP RSS before shadowing, dBm."""
    ap_xy, tx, ref_loss, exponent, shadowing, body = _scenario_arrays(scenario)
    delta = ap_xy - np.asarray(position, dtype=float)
    d = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), REFERENCE_DISTANCE)
    loss = ref_loss + 10.0 * exponent * np.log10(d / REFERENCE_DISTANCE)
    hx, hy = _HEADING_VECTORS[heading]
    behind = delta[:, 0] * hx + delta[:, 1] * hy < 0.0
    return tx - loss - np.where(behind, body, 0.0)


def _scan(
    scenario: SimScenario,
    baseline: np.ndarray,
    rng: np.random.Generator,
    dropout: bool,
    timestamp: datetime,
) -> Observation:
    shadowing = _scenario_arrays(scenario)[4]
    shadows = rng.standard_normal(len(baseline))
    r = np.floor(baseline + shadowing * shadows + 0.5).astype(np.int64)
    keep = np.ones(len(r), dtype=bool)
    if dropout:
        # one uniform per AP regardless of candidacy, so perturbing one AP's
        # params can never shift another AP's dropout outcome
        u = rng.random(len(r))
        keep[(r < DROPOUT_THRESHOLD) & (u < DROPOUT_PROBABILITY)] = False
        if not keep.any():
            # dropout removed everything; keep the strongest so the scan is non-empty
            keep[int(np.argmax(r))] = True
    clamped = np.clip(r, -100, 0)
    readings = {
        scenario.aps[i].ap: int(clamped[i]) for i in np.flatnonzero(keep)
    }
    return Observation(readings=readings, timestamp=timestamp)


def simulate_rssi(
    scenario: SimScenario,
    position: tuple[float, float],
    heading: Heading,
    rng: np.random.Generator,
    dropout: bool = True,
    timestamp: datetime = _EPOCH,
) -> Observation:
    """One scan at a position and facing direction, drawing noise from rng."""
    x, y = position
    if not scenario.area.contains(x, y):
        raise OutOfBounds(f"scan position ({x}, {y}) outside the area")
    return _scan(scenario, _scan_baseline(scenario, position, heading), rng, dropout, timestamp)


def simulate_survey(
    scenario: SimScenario,
    rps: Sequence[ReferencePoint],
    scans_per_cell: int,
    dropout: bool = True,
    device_id: str = "sim-0",
) -> list[FingerprintSample]:
    """Survey every (reference point, heading) scans_per_cell times.

    Emits |rps| * 4 * scans_per_cell samples, deterministic given the seed.
    """
    if scans_per_cell < 1:
        raise ValueError("scans_per_cell must be >= 1")
    samples: list[FingerprintSample] = []
    counter = 0
    for rp_index, rp in enumerate(rps):
        rng = _stream(scenario.rng_seed, _STREAM_SURVEY, rp_index)
        for heading in HEADINGS:
            baseline = _scan_baseline(scenario, (rp.x, rp.y), heading)
            for _ in range(scans_per_cell):
                obs = _scan(
                    scenario,
                    baseline,
                    rng,
                    dropout,
                    _EPOCH + timedelta(seconds=counter),
                )
                samples.append(
                    FingerprintSample(
                        point_id=rp.point_id,
                        x=rp.x,
                        y=rp.y,
                        heading=heading,
                        timestamp=obs.timestamp,
                        device_id=device_id,
                        readings=obs.readings,
                    )
                )
                counter += 1
    return samples


def _nearest_cardinal(dx: float, dy: float) -> Heading:
    best = Heading.N
    best_dot = -math.inf
    for heading in HEADINGS:
        hx, hy = _HEADING_VECTORS[heading]
        dot = hx * dx + hy * dy
        if dot > best_dot:
            best, best_dot = heading, dot
    return best


def simulate_walk(
    scenario: SimScenario,
    waypoints: Sequence[tuple[float, float]],
    speed: float,
    scan_period: float,
    dropout: bool = True,
) -> list[tuple[Observation, tuple[float, float]]]:
    """Scans along a polyline at constant speed, each with its ground truth.

    Positions are interpolated at scan_period intervals; both endpoints are
    always emitted. The simulated facing direction is the nearest cardinal to
    the direction of travel.
    """
    if speed <= 0:
        raise ValueError("speed must be > 0")
    if scan_period <= 0:
        raise ValueError("scan_period must be > 0")
    pts = [(float(x), float(y)) for x, y in waypoints]
    for x, y in pts:
        if not scenario.area.contains(x, y):
            raise OutOfBounds(f"waypoint ({x}, {y}) outside the area")

    seg_lengths = [
        math.hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1])
        for i in range(len(pts) - 1)
    ]
    total = sum(seg_lengths)
    if len(pts) < 2 or total <= 0.0:
        raise DegeneratePath("walk has zero total length")

    segments = [i for i, length in enumerate(seg_lengths) if length > 0.0]

    def locate(s: float) -> tuple[tuple[float, float], Heading]:
        remaining = s
        for n, i in enumerate(segments):
            length = seg_lengths[i]
            if remaining <= length or n == len(segments) - 1:
                a, b = pts[i], pts[i + 1]
                t = min(1.0, remaining / length)
                pos = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
                return pos, _nearest_cardinal(b[0] - a[0], b[1] - a[1])
            remaining -= length
        raise AssertionError("unreachable")

    step = speed * scan_period
    distances = []
    s = 0.0
    while s < total - 1e-12:
        distances.append(s)
        s += step
    distances.append(total)

    rng = _stream(scenario.rng_seed, _STREAM_WALK)
    out: list[tuple[Observation, tuple[float, float]]] = []
    for k, s in enumerate(distances):
        pos, heading = locate(s)
        obs = simulate_rssi(
            scenario,
            pos,
            heading,
            rng,
            dropout=dropout,
            timestamp=_EPOCH + timedelta(seconds=k * scan_period),
        )
        out.append((obs, pos))
    return out


def probe_rng(scenario: SimScenario) -> np.random.Generator:
    """Stream for benchmark test draws, separate from survey and walk streams."""
    return _stream(scenario.rng_seed, _STREAM_PROBE)


def grid_reference_points(area: SurveyArea, spacing: float) -> list[ReferencePoint]:
    """Interior grid offset half a spacing from the walls, row-major ids."""
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    nx = int(math.floor(area.width / spacing - 0.5 + 1e-9)) + 1
    ny = int(math.floor(area.height / spacing - 0.5 + 1e-9)) + 1
    rps = []
    for j in range(ny):
        for i in range(nx):
            rps.append(
                ReferencePoint(
                    point_id=f"rp-{j * nx + i:04d}",
                    x=(i + 0.5) * spacing,
                    y=(j + 0.5) * spacing,
                )
            )
    return rps


def default_scenario(
    width: float = 14.0,
    height: float = 14.0,
    n_physical_aps: int = 6,
    seed: int = 0,
    shadowing_std_db: float = 4.0,
) -> SimScenario:
    """Dual-band APs on a deterministic ring inside the room."""
    area = SurveyArea(width=width, height=height)
    aps: list[VirtualAp] = []
    cx, cy = width / 2.0, height / 2.0
    for k in range(n_physical_aps):
        angle = 2.0 * math.pi * k / n_physical_aps
        x = cx + 0.42 * width * math.cos(angle)
        y = cy + 0.42 * height * math.sin(angle)
        for band_idx, band in enumerate((Band.GHZ_2_4, Band.GHZ_5)):
            params = replace(DEFAULT_PARAMS[band], shadowing_std_db=shadowing_std_db)
            aps.append(
                VirtualAp(
                    ap=AccessPointId(f"02:00:00:00:{k:02x}:{band_idx:02x}", band),
                    x=x,
                    y=y,
                    params=params,
                )
            )
    return SimScenario(area=area, aps=tuple(aps), rng_seed=seed)


# -- persistence (scenario.json) ----------------------------------------------

def scenario_to_json(scenario: SimScenario) -> dict:
    return {
        "area": scenario.area.to_json(),
        "aps": [
            {
                "bssid": vap.ap.bssid,
                "band": vap.ap.band.value,
                "x": vap.x,
                "y": vap.y,
                "tx_power": vap.params.tx_power_dbm,
                "ref_loss": vap.params.ref_loss_db,
                "exponent": vap.params.exponent,
                "shadowing_std": vap.params.shadowing_std_db,
                "body_attenuation": vap.params.body_attenuation_db,
            }
            for vap in scenario.aps
        ],
        "seed": scenario.rng_seed,
    }


def scenario_from_json(obj: dict) -> SimScenario:
    try:
        area = SurveyArea.from_json(obj["area"])
        aps = tuple(
            VirtualAp(
                ap=AccessPointId(a["bssid"], Band(a["band"])),
                x=float(a["x"]),
                y=float(a["y"]),
                params=PathLossParams(
                    tx_power_dbm=float(a["tx_power"]),
                    ref_loss_db=float(a["ref_loss"]),
                    exponent=float(a["exponent"]),
                    shadowing_std_db=float(a["shadowing_std"]),
                    body_attenuation_db=float(a["body_attenuation"]),
                ),
            )
            for a in obj["aps"]
        )
        return SimScenario(area=area, aps=aps, rng_seed=int(obj["seed"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario: {exc!r}") from exc


def load_scenario(path: str) -> SimScenario:
    with open(path, "r", encoding="utf-8") as f:
        return scenario_from_json(json.load(f))


def save_scenario(scenario: SimScenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_json(scenario), f, indent=2)
        f.write("\n")
