"""Online phase: maximum-likelihood position estimation over the dense map.

Scoring treats the access points as independent Gaussians (naive Bayes):
a cell's log-likelihood is the sum of log N(r; mu, sigma) over the APs
present in both the observation and the map's surfaces for that heading.
All arithmetic stays in log space. APs the scan missed contribute nothing
(no noise-floor imputation penalty), and unknown APs in the scan are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np

from . import kernels
from .errors import EmptyInput, EmptyRadioMap, InsufficientOverlap
from .gpr import DenseRadioMap
from .model import HEADINGS, AccessPointId, Heading

MIN_MATCH = 3  # common APs below this give a too weakly constrained likelihood
TOP_K = 5


@dataclass(frozen=True)
class Observation:
    readings: Mapping[AccessPointId, int]
    timestamp: datetime
    heading_hint: Optional[Heading] = None

    def __post_init__(self) -> None:
        if not self.readings:
            raise EmptyInput("observation has no readings")
        object.__setattr__(self, "readings", dict(self.readings))


@dataclass(frozen=True)
class TopCell:
    cell: int
    heading: Heading
    log_likelihood: float


@dataclass(frozen=True)
class PositionEstimate:
    x: float
    y: float
    heading_est: Heading
    log_likelihood: float
    top_cells: tuple[TopCell, ...]
    matched_ap_count: int


@dataclass(frozen=True)
class AccuracyRecord:
    ground_truth: tuple[float, float]
    estimate: PositionEstimate
    error_m: float


@dataclass(frozen=True)
class EvalSummary:
    mean_error_m: float
    std_error_m: float
    n: int
    skipped: int


def _common_aps(obs: Observation, radio_map: DenseRadioMap, heading: Heading) -> list[AccessPointId]:
    common = [
        ap for ap in obs.readings if (heading, ap) in radio_map.surfaces
    ]
    common.sort(key=AccessPointId.key)
    return common


def _heading_loglik(
    obs: Observation, radio_map: DenseRadioMap, heading: Heading, common: Sequence[AccessPointId]
) -> np.ndarray:
    values = np.array([float(obs.readings[ap]) for ap in common])
    means = np.stack([radio_map.surfaces[(heading, ap)].mean_dbm for ap in common])
    stds = np.stack([radio_map.surfaces[(heading, ap)].std_dbm for ap in common])
    return kernels.gaussian_loglik(
        np.ascontiguousarray(values),
        np.ascontiguousarray(means),
        np.ascontiguousarray(stds),
    )


def score_cell(
    obs: Observation,
    radio_map: DenseRadioMap,
    cell: int,
    heading: Heading,
    min_match: int = MIN_MATCH,
) -> Optional[float]:
    """Log-likelihood of one (cell, heading), or None when overlap is too thin."""
    common = _common_aps(obs, radio_map, heading)
    if len(common) < min_match:
        return None
    ll = 0.0
    for ap in common:
        surface = radio_map.surfaces[(heading, ap)]
        mu = surface.mean_dbm[cell]
        sigma = surface.std_dbm[cell]
        d = obs.readings[ap] - mu
        ll += -0.5 * math.log(2.0 * math.pi * sigma * sigma) - d * d / (2.0 * sigma * sigma)
    return ll


def localize(
    obs: Observation,
    radio_map: DenseRadioMap,
    k: int = TOP_K,
    min_match: int = MIN_MATCH,
) -> PositionEstimate:
    """Score every (cell, heading) pair and return the weighted top-k estimate.

    The heading is the one whose best cell attains the maximum log-likelihood
    (heading_hint restricts the search to a single surface set); the position
    is the likelihood-weighted centroid of that heading's top-k cells with
    weights exp(LL - LL_max). Ties break to the earlier heading in N,E,S,W
    order and the lower cell index.
    """
    if not radio_map.surfaces:
        raise EmptyRadioMap("radio map has no surfaces")
    headings = (obs.heading_hint,) if obs.heading_hint is not None else HEADINGS

    best_heading: Optional[Heading] = None
    best_ll: Optional[np.ndarray] = None
    best_cell = -1
    best_common = 0
    for heading in headings:
        common = _common_aps(obs, radio_map, heading)
        if len(common) < min_match:
            continue
        ll = _heading_loglik(obs, radio_map, heading, common)
        cell = int(np.argmax(ll))  # first occurrence wins: lower index
        if best_heading is None or ll[cell] > best_ll[best_cell]:
            best_heading, best_ll, best_cell, best_common = heading, ll, cell, len(common)

    if best_heading is None:
        raise InsufficientOverlap(
            f"no heading shares at least {min_match} access points with the observation"
        )

    k = max(1, min(k, len(best_ll)))
    order = np.argsort(-best_ll, kind="stable")[:k]  # stable: index breaks ties
    ll_max = best_ll[best_cell]
    weights = np.exp(best_ll[order] - ll_max)
    centers = np.array([radio_map.cell_center(int(c)) for c in order])
    centroid = weights @ centers / weights.sum()
    x = min(radio_map.width, max(0.0, float(centroid[0])))
    y = min(radio_map.height, max(0.0, float(centroid[1])))

    top_cells = tuple(
        TopCell(cell=int(c), heading=best_heading, log_likelihood=float(best_ll[c]))
        for c in order
    )
    return PositionEstimate(
        x=x,
        y=y,
        heading_est=best_heading,
        log_likelihood=float(ll_max),
        top_cells=top_cells,
        matched_ap_count=best_common,
    )


def euclidean_error(a: tuple[float, float], b: tuple[float, float]) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return math.sqrt(dx * dx + dy * dy)


def evaluate(
    obs_with_truth: Iterable[tuple[Observation, tuple[float, float]]],
    radio_map: DenseRadioMap,
    k: int = TOP_K,
    min_match: int = MIN_MATCH,
) -> tuple[list[AccuracyRecord], EvalSummary]:
    """Localize each observation and compare against its ground truth.

    Observations with insufficient AP overlap are counted as skipped and
    excluded from the mean/std summary (n-1 std; a single record reports 0).
    """
    pairs = list(obs_with_truth)
    if not pairs:
        raise EmptyInput("nothing to evaluate")
    records: list[AccuracyRecord] = []
    skipped = 0
    for obs, truth in pairs:
        try:
            estimate = localize(obs, radio_map, k=k, min_match=min_match)
        except InsufficientOverlap:
            skipped += 1
            continue
        error = euclidean_error((estimate.x, estimate.y), truth)
        records.append(AccuracyRecord(ground_truth=truth, estimate=estimate, error_m=error))

    if records:
        errors = [r.error_m for r in records]
        mean = sum(errors) / len(errors)
        if len(errors) >= 2:
            var = sum((e - mean) ** 2 for e in errors) / (len(errors) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0
        summary = EvalSummary(mean_error_m=mean, std_error_m=std, n=len(errors), skipped=skipped)
    else:
        summary = EvalSummary(mean_error_m=math.nan, std_error_m=math.nan, n=0, skipped=skipped)
    return records, summary


# -- artifact formats ---------------------------------------------------------

CSV_HEADER = "gt_x,gt_y,est_x,est_y,heading_est,error_m,matched_aps"


def records_to_csv(records: Iterable[AccuracyRecord], sink: TextIO) -> None:
    """CSV with full-precision floats; summary goes in the JSON sidecar."""
    sink.write(CSV_HEADER + "\n")
    for r in records:
        est = r.estimate
        sink.write(
            f"{r.ground_truth[0]!r},{r.ground_truth[1]!r},{est.x!r},{est.y!r},"
            f"{est.heading_est.name},{r.error_m!r},{est.matched_ap_count}\n"
        )


def summary_to_json(summary: EvalSummary) -> dict:
    return {
        "mean_error_m": summary.mean_error_m,
        "std_error_m": summary.std_error_m,
        "n": summary.n,
        "skipped": summary.skipped,
    }


def estimate_to_json(est: PositionEstimate) -> dict:
    return {
        "x": est.x,
        "y": est.y,
        "heading_est": est.heading_est.name,
        "log_likelihood": est.log_likelihood,
        "matched_ap_count": est.matched_ap_count,
        "top_cells": [
            {"cell": tc.cell, "heading": tc.heading.name, "log_likelihood": tc.log_likelihood}
            for tc in est.top_cells
        ],
    }
