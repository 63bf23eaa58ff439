"""Per-cell empirical RSS distributions.

Fits one normal distribution to the RSS readings of every
(reference point, heading, access point) group of a survey. Group statistics
are computed from exact integer sums, so the result is independent of sample
order bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import EmptyInput, UnknownReferencePoint
from .model import (
    AccessPointId,
    Band,
    FingerprintSample,
    Heading,
    ReferencePoint,
    SurveyArea,
)

SIGMA_FLOOR = 1.0  # dB; real RSSI quantization is about +/-1 dB
MIN_PRESENCE = 0.2
RP_MATCH_TOLERANCE = 0.01  # m; absorbs decimal representation jitter only

CellKey = tuple[str, Heading, AccessPointId]


@dataclass(frozen=True)
class CellDistribution:
    mean_dbm: float
    std_dbm: float
    sample_count: int


@dataclass(frozen=True)
class SparseRadioMap:
    area: SurveyArea
    cells: Mapping[CellKey, CellDistribution]
    ap_index: tuple[AccessPointId, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", dict(self.cells))


def _rp_lookup(area: SurveyArea):
    """Bucket reference points on a 1 cm grid for O(1) coordinate matching."""
    buckets: dict[tuple[int, int], list[ReferencePoint]] = {}
    scale = 1.0 / RP_MATCH_TOLERANCE
    for rp in area.reference_points:
        key = (round(rp.x * scale), round(rp.y * scale))
        buckets.setdefault(key, []).append(rp)

    def match(x: float, y: float) -> ReferencePoint | None:
        cx, cy = round(x * scale), round(y * scale)
        best: ReferencePoint | None = None
        best_d = RP_MATCH_TOLERANCE + 1e-9
        for bx in (cx - 1, cx, cx + 1):
            for by in (cy - 1, cy, cy + 1):
                for rp in buckets.get((bx, by), ()):
                    d = math.hypot(rp.x - x, rp.y - y)
                    if d < best_d:
                        best, best_d = rp, d
        return best

    return match


def fit_distributions(
    samples: Iterable[FingerprintSample],
    area: SurveyArea,
    min_presence: float = MIN_PRESENCE,
) -> SparseRadioMap:
    """Fit a Gaussian per (reference point, heading, access point).

    An AP enters a cell only if it was heard in at least min_presence of that
    cell's scans; mean is over the scans where it was heard, std is the n-1
    sample standard deviation clamped to SIGMA_FLOOR (n=1 gets the floor).
    """
    samples = list(samples)
    if not samples:
        raise EmptyInput("no samples to fit")
    match = _rp_lookup(area)

    # (point_id, heading) -> scan count; (point_id, heading, ap) -> [sum, sumsq, n]
    scan_counts: dict[tuple[str, Heading], int] = {}
    sums: dict[CellKey, list[int]] = {}
    for sample in samples:
        rp = match(sample.x, sample.y)
        if rp is None:
            raise UnknownReferencePoint(
                f"sample at ({sample.x}, {sample.y}) matches no declared "
                f"reference point within {RP_MATCH_TOLERANCE} m"
            )
        group = (rp.point_id, sample.heading)
        scan_counts[group] = scan_counts.get(group, 0) + 1
        for ap, rssi in sample.readings.items():
            acc = sums.setdefault((rp.point_id, sample.heading, ap), [0, 0, 0])
            acc[0] += rssi
            acc[1] += rssi * rssi
            acc[2] += 1

    cells: dict[CellKey, CellDistribution] = {}
    aps: set[AccessPointId] = set()
    for (point_id, heading, ap), (total, total_sq, n) in sums.items():
        if n / scan_counts[(point_id, heading)] < min_presence:
            continue
        mean = total / n
        if n >= 2:
            var = max(0.0, (total_sq - total * total / n) / (n - 1))
            std = max(SIGMA_FLOOR, math.sqrt(var))
        else:
            std = SIGMA_FLOOR
        cells[(point_id, heading, ap)] = CellDistribution(mean, std, n)
        aps.add(ap)

    ap_index = tuple(sorted(aps, key=AccessPointId.key))
    return SparseRadioMap(area=area, cells=cells, ap_index=ap_index)


def coverage_report(radio_map: SparseRadioMap) -> dict[tuple[Heading, AccessPointId], int]:
    """Count reference points with a fitted cell, per (heading, access point)."""
    counts: dict[tuple[Heading, AccessPointId], int] = {}
    for (_, heading, ap) in radio_map.cells:
        counts[(heading, ap)] = counts.get((heading, ap), 0) + 1
    return counts


# -- persistence (sessions/<id>/sparse_map.json) -----------------------------

def sparse_map_to_json(radio_map: SparseRadioMap) -> dict:
    cells = sorted(
        radio_map.cells.items(),
        key=lambda kv: (kv[0][0], kv[0][1].degrees, kv[0][2].key()),
    )
    return {
        "area": radio_map.area.to_json(),
        "cells": [
            {
                "point_id": point_id,
                "heading": heading.name,
                "bssid": ap.bssid,
                "band": ap.band.value,
                "mean_dbm": dist.mean_dbm,
                "std_dbm": dist.std_dbm,
                "sample_count": dist.sample_count,
            }
            for (point_id, heading, ap), dist in cells
        ],
        "ap_index": [{"bssid": ap.bssid, "band": ap.band.value} for ap in radio_map.ap_index],
    }


def sparse_map_from_json(obj: dict) -> SparseRadioMap:
    area = SurveyArea.from_json(obj["area"])
    cells: dict[CellKey, CellDistribution] = {}
    for c in obj["cells"]:
        ap = AccessPointId(c["bssid"], Band(c["band"]))
        key = (c["point_id"], Heading[c["heading"]], ap)
        cells[key] = CellDistribution(
            float(c["mean_dbm"]), float(c["std_dbm"]), int(c["sample_count"])
        )
    ap_index = tuple(
        AccessPointId(a["bssid"], Band(a["band"])) for a in obj["ap_index"]
    )
    return SparseRadioMap(area=area, cells=cells, ap_index=ap_index)
