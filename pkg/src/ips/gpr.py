"""Gaussian process regression over reference-point statistics.

Turns the sparse per-RP Gaussians into a dense grid of Gaussians per
(heading, access point): one GP interpolates the empirical means, a second
interpolates the empirical standard deviations, so every dense cell carries a
full normal distribution rather than only a smoothed mean.

The kernel is squared-exponential, k(a, b) = sf^2 * exp(-|a-b|^2 / (2 l^2)),
with a constant mean equal to the training-target average: far from data the
prediction reverts to the average observed RSS. Fitting is by Cholesky
factorization of K + sn^2 I with escalating jitter as numerical hygiene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .empirical import SIGMA_FLOOR, SparseRadioMap
from .errors import DuplicateInput, EmptySparseMap, InsufficientData, SingularKernel
from .model import AccessPointId, Band, Heading, SurveyArea

SIGMA_CAP = 15.0  # dB; upper clamp for interpolated spread

Point = tuple[float, float]
TrainingPoint = tuple[Point, float]
HyperPolicy = Literal["fixed", "grid-search"]


@dataclass(frozen=True)
class GprHyperparams:
    signal_std: float  # dB
    length_scale: float  # m
    noise_std: float  # dB

    def __post_init__(self) -> None:
        if not self.signal_std > 0:
            raise ValueError(f"signal_std must be > 0, got {self.signal_std}")
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")

    def to_json(self) -> dict:
        return {
            "signal_std": self.signal_std,
            "length_scale": self.length_scale,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GprHyperparams":
        return cls(
            float(obj["signal_std"]), float(obj["length_scale"]), float(obj["noise_std"])
        )


DEFAULT_HYPERPARAMS = GprHyperparams(signal_std=6.0, length_scale=3.0, noise_std=2.0)

# grid-search candidate sweep, ordered so that a strictly-greater likelihood
# scan realizes the tie-break: smallest length scale, then signal, then noise
HYPERPARAM_GRID = tuple(
    GprHyperparams(sf, ell, sn)
    for ell, sf, sn in product((1.0, 2.0, 3.0, 5.0, 8.0), (3.0, 6.0, 10.0), (1.0, 2.0, 4.0))
)


@dataclass(frozen=True)
class GprModel:
    inputs: np.ndarray  # (n, 2)
    targets_centered: np.ndarray  # (n,)
    target_offset: float
    hyperparams: GprHyperparams
    cholesky_lower: np.ndarray  # L with L L^T = K + sn^2 I (+ jitter)
    alpha: np.ndarray  # (K + sn^2 I)^-1 (y - offset)


def _as_arrays(points: Sequence[TrainingPoint]) -> tuple[np.ndarray, np.ndarray]:
    coords = np.array([[p[0][0], p[0][1]] for p in points], dtype=float)
    values = np.array([p[1] for p in points], dtype=float)
    return coords, values


def gpr_fit(points: Sequence[TrainingPoint], hyperparams: GprHyperparams) -> GprModel:
    """Fit a GP to ((x, y), value) points; duplicates must be averaged beforehand."""
    if len(points) < 1:
        raise InsufficientData("gpr_fit needs at least one training point")
    coords, values = _as_arrays(points)
    if len({(x, y) for x, y in coords.tolist()}) != len(points):
        raise DuplicateInput("duplicate (x, y) training inputs")

    offset = float(values.mean())
    centered = values - offset
    sf2 = hyperparams.signal_std**2
    base = kernels.se_kernel(coords, coords, hyperparams.signal_std, hyperparams.length_scale)
    base = base + hyperparams.noise_std**2 * np.eye(len(points))

    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(base + jitter * np.eye(len(points)))
            break
        except np.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = 1e-8 * sf2
            elif jitter < 1e-2 * sf2 * (1 - 1e-12):
                jitter *= 10.0
            else:
                raise SingularKernel(
                    f"Cholesky failed after jitter escalation to {jitter:g}"
                ) from None

    alpha = solve_triangular(
        L.T, solve_triangular(L, centered, lower=True), lower=False
    )
    return GprModel(
        inputs=coords,
        targets_centered=centered,
        target_offset=offset,
        hyperparams=hyperparams,
        cholesky_lower=L,
        alpha=alpha,
    )


def gpr_predict(model: GprModel, probes: Sequence[Point]) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and (latent, >= 0) variance at each probe."""
    if len(probes) == 0:
        return np.empty(0), np.empty(0)
    q = np.asarray(probes, dtype=float).reshape(-1, 2)
    h = model.hyperparams
    k_star = kernels.se_kernel(model.inputs, q, h.signal_std, h.length_scale)  # (n, m)
    mean = k_star.T @ model.alpha + model.target_offset
    v = solve_triangular(model.cholesky_lower, k_star, lower=True)
    var = h.signal_std**2 - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def log_marginal_likelihood(model: GprModel) -> float:
    """log p(y | X) of the fitted model (GP evidence)."""
    n = len(model.targets_centered)
    fit_term = -0.5 * float(model.targets_centered @ model.alpha)
    det_term = -float(np.sum(np.log(np.diag(model.cholesky_lower))))
    return fit_term + det_term - 0.5 * n * math.log(2.0 * math.pi)


def select_hyperparams(
    points: Sequence[TrainingPoint],
    grid: Sequence[GprHyperparams] = HYPERPARAM_GRID,
) -> GprHyperparams:
    """Pick the candidate maximizing the log marginal likelihood.

    Ties go to the smallest length scale, then signal std, then noise std.
    """
    if len(points) < 3:
        raise InsufficientData(f"hyperparameter search needs >= 3 points, got {len(points)}")
    ordered = sorted(grid, key=lambda h: (h.length_scale, h.signal_std, h.noise_std))
    best: GprHyperparams | None = None
    best_lml = -math.inf
    for candidate in ordered:
        try:
            lml = log_marginal_likelihood(gpr_fit(points, candidate))
        except SingularKernel:
            continue
        if lml > best_lml:
            best, best_lml = candidate, lml
    if best is None:
        raise SingularKernel("every hyperparameter candidate failed to factorize")
    return best


# ---------------------------------------------------------------------------
# Dense radio map
# ---------------------------------------------------------------------------

SurfaceKey = tuple[Heading, AccessPointId]


@dataclass(frozen=True)
class Surface:
    mean_dbm: np.ndarray  # (nx*ny,) row-major, index = j*nx + i
    std_dbm: np.ndarray
    hyperparams: GprHyperparams


@dataclass(frozen=True)
class DenseRadioMap:
    """GPR-densified grid of Gaussians; the deployable fingerprint."""

    width: float
    height: float
    spacing: float
    nx: int
    ny: int
    surfaces: Mapping[SurfaceKey, Surface]
    skipped: tuple[SurfaceKey, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "surfaces", dict(self.surfaces))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_center(self, index: int) -> Point:
        j, i = divmod(index, self.nx)
        return ((i + 0.5) * self.spacing, (j + 0.5) * self.spacing)

    def cell_centers(self) -> np.ndarray:
        xs = (np.arange(self.nx) + 0.5) * self.spacing
        ys = (np.arange(self.ny) + 0.5) * self.spacing
        gx, gy = np.meshgrid(xs, ys)  # row-major: y varies over rows
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_containing(self, x: float, y: float) -> int:
        i = min(self.nx - 1, max(0, int(x / self.spacing)))
        j = min(self.ny - 1, max(0, int(y / self.spacing)))
        return j * self.nx + i

    def headings_present(self) -> tuple[Heading, ...]:
        return tuple(sorted({h for h, _ in self.surfaces}, key=lambda h: h.degrees))


def grid_shape(width: float, height: float, spacing: float) -> tuple[int, int]:
    """Ceiling rule: full coverage of non-integer room dimensions."""
    nx = math.ceil(width / spacing - 1e-9)
    ny = math.ceil(height / spacing - 1e-9)
    return nx, ny


def densify(
    sparse: SparseRadioMap,
    spacing: float,
    hyper_policy: HyperPolicy = "fixed",
    fixed_hyperparams: GprHyperparams = DEFAULT_HYPERPARAMS,
) -> DenseRadioMap:
    """Interpolate every (heading, access point) surface onto the cell grid.

    Surfaces with fewer than 3 fitted reference points are omitted (a 2-D GP
    is unconstrained below that) and listed in the skip report. The std
    surface reuses the hyperparameters selected on the mean surface and its
    predictions are clamped to [SIGMA_FLOOR, SIGMA_CAP].
    """
    if not sparse.cells:
        raise EmptySparseMap("sparse map has no fitted cells")
    if not spacing > 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")

    area = sparse.area
    rp_coords = {rp.point_id: (rp.x, rp.y) for rp in area.reference_points}
    nx, ny = grid_shape(area.width, area.height, spacing)

    # gather training points per surface
    groups: dict[SurfaceKey, list[tuple[Point, float, float]]] = {}
    for (point_id, heading, ap), dist in sparse.cells.items():
        groups.setdefault((heading, ap), []).append(
            (rp_coords[point_id], dist.mean_dbm, dist.std_dbm)
        )

    probe_grid = DenseRadioMap(
        width=area.width, height=area.height, spacing=spacing, nx=nx, ny=ny, surfaces={}
    )
    probes = probe_grid.cell_centers()

    surfaces: dict[SurfaceKey, Surface] = {}
    skipped: list[SurfaceKey] = []
    for key in sorted(groups, key=lambda k: (k[0].degrees, k[1].key())):
        entries = sorted(groups[key])  # deterministic training order
        if len(entries) < 3:
            skipped.append(key)
            continue
        mean_points = [(pt, mu) for pt, mu, _ in entries]
        std_points = [(pt, sd) for pt, _, sd in entries]
        if hyper_policy == "grid-search":
            hyper = select_hyperparams(mean_points)
        elif hyper_policy == "fixed":
            hyper = fixed_hyperparams
        else:
            raise ValueError(f"unknown hyper_policy {hyper_policy!r}")
        mean_pred, _ = gpr_predict(gpr_fit(mean_points, hyper), probes)
        std_pred, _ = gpr_predict(gpr_fit(std_points, hyper), probes)
        surfaces[key] = Surface(
            mean_dbm=mean_pred,
            std_dbm=np.clip(std_pred, SIGMA_FLOOR, SIGMA_CAP),
            hyperparams=hyper,
        )

    return DenseRadioMap(
        width=area.width,
        height=area.height,
        spacing=spacing,
        nx=nx,
        ny=ny,
        surfaces=surfaces,
        skipped=tuple(skipped),
    )


# -- persistence (radiomap.json) ---------------------------------------------

def dense_map_to_json(dense: DenseRadioMap) -> dict:
    ordered = sorted(dense.surfaces.items(), key=lambda kv: (kv[0][0].degrees, kv[0][1].key()))
    return {
        "grid": {
            "width": dense.width,
            "height": dense.height,
            "spacing": dense.spacing,
            "nx": dense.nx,
            "ny": dense.ny,
        },
        "surfaces": [
            {
                "heading": heading.name,
                "bssid": ap.bssid,
                "band": ap.band.value,
                "hyperparams": surface.hyperparams.to_json(),
                "mean": surface.mean_dbm.tolist(),
                "std": surface.std_dbm.tolist(),
            }
            for (heading, ap), surface in ordered
        ],
    }


def dense_map_from_json(obj: dict) -> DenseRadioMap:
    grid = obj["grid"]
    surfaces: dict[SurfaceKey, Surface] = {}
    n = int(grid["nx"]) * int(grid["ny"])
    for s in obj["surfaces"]:
        mean = np.asarray(s["mean"], dtype=float)
        std = np.asarray(s["std"], dtype=float)
        if len(mean) != n or len(std) != n:
            raise ValueError("surface array length does not match the grid")
        key = (Heading[s["heading"]], AccessPointId(s["bssid"], Band(s["band"])))
        surfaces[key] = Surface(mean, std, GprHyperparams.from_json(s["hyperparams"]))
    return DenseRadioMap(
        width=float(grid["width"]),
        height=float(grid["height"]),
        spacing=float(grid["spacing"]),
        nx=int(grid["nx"]),
        ny=int(grid["ny"]),
        surfaces=surfaces,
    )
