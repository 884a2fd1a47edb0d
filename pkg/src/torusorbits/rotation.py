"""Rotation vectors against empirical measures, Birkhoff averaging, and
irrotational normalization of lifts.

The space of invariant probability measures is unobservable, so everything
here quantifies over a finite user-supplied battery of empirical measures
(grid approximations of Lebesgue, time averages of orbits). Positive results
are therefore always "with respect to the battery"; only the negative
direction (a nonzero rotation vector) is a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .torusmaps import Compose, TorusMap, mod_torus, translation
from .mcg import IDENTITY


class NotIsotopicToIdentity(ValueError):
    """Operation needs a lift whose mapping class is the identity."""


def _require_isotopic(tmap: TorusMap) -> None:
    if tmap.mapping_class != IDENTITY:
        raise NotIsotopicToIdentity(
            f"mapping class {tmap.mapping_class.rows()} is not the identity"
        )


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A weighted point cloud on the torus: atoms in [0,1)^2, weights >= 0
    summing to 1 within 1e-12."""

    points: np.ndarray
    weights: np.ndarray
    name: str = "measure"

    def __post_init__(self):
        pts = mod_torus(np.atleast_2d(np.asarray(self.points, float)))
        w = np.asarray(self.weights, float).ravel()
        if pts.shape[0] != w.shape[0] or pts.shape[1] != 2:
            raise ValueError("points and weights must have matching lengths")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]

    @staticmethod
    def atom(p, name: str = "atom") -> "EmpiricalMeasure":
        return EmpiricalMeasure(np.asarray([p], float), np.array([1.0]), name)

    @staticmethod
    def uniform(points, name: str = "uniform") -> "EmpiricalMeasure":
        pts = np.atleast_2d(np.asarray(points, float))
        n = pts.shape[0]
        return EmpiricalMeasure(pts, np.full(n, 1.0 / n), name)

    @staticmethod
    def lebesgue_grid(n: int) -> "EmpiricalMeasure":
        grid = (np.arange(n) + 0.5) / n
        pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        return EmpiricalMeasure.uniform(pts, name=f"lebesgue-{n}x{n}")


def rho_mu(tmap: TorusMap, measure: EmpiricalMeasure) -> np.ndarray:
    """Mean displacement of the lift over the measure: sum w_i (psi(x_i) - x_i)."""
    _require_isotopic(tmap)
    disp = tmap.evaluate(measure.points) - measure.points
    return measure.weights @ disp


def birkhoff_average(tmap: TorusMap, x0, n: int) -> np.ndarray:
    """(psi^n(x0) - x0) / n by n forward evaluations of the lift."""
    _require_isotopic(tmap)
    if n < 1:
        raise ValueError("horizon must be >= 1")
    x0 = np.asarray(x0, float)
    return (tmap.iterate(x0, n) - x0) / n


def invariant_measure_estimate(
    tmap: TorusMap, x0, n: int, burn_in: int = 0
) -> EmpiricalMeasure:
    """Uniform weights on the orbit points with indices burn_in..n-1, reduced
    to the torus. Exactly repeated atoms are merged."""
    _require_isotopic(tmap)
    if not (n > burn_in >= 0):
        raise ValueError("need n > burn_in >= 0")
    pts = []
    cur = mod_torus(np.asarray(x0, float))
    for i in range(n):
        if i >= burn_in:
            pts.append(cur.copy())
        cur = mod_torus(tmap.evaluate(cur))
    arr = np.asarray(pts)
    uniq, counts = np.unique(arr, axis=0, return_counts=True)
    weights = counts / counts.sum()
    return EmpiricalMeasure(uniq, weights, name=f"orbit-{n}")


def pushforward(measure: EmpiricalMeasure, tmap: TorusMap) -> EmpiricalMeasure:
    """Image measure: apply the map to every atom mod Z^2, weights unchanged."""
    pts = mod_torus(tmap.evaluate(measure.points))
    return EmpiricalMeasure(pts, measure.weights, name=f"push:{measure.name}")


def morphism_check(f: TorusMap, g: TorusMap, measure: EmpiricalMeasure) -> float:
    """|| rho_mu(f o g) - rho_mu(f) - rho_mu(g) ||.

    Meaningful (and small) only when the measure is invariant for both maps;
    for non-invariant measures the residual is reported, not asserted.
    """
    lhs = rho_mu(Compose(f, g), measure)
    rhs = rho_mu(f, measure) + rho_mu(g, measure)
    return float(np.linalg.norm(lhs - rhs))


# ------------------------------------------------------------ rotation set


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Strictly convex hull (Andrew monotone chain), counterclockwise,
    starting from the lexicographically smallest vertex; collinear interior
    points are dropped."""
    pts = np.unique(np.atleast_2d(np.asarray(points, float)), axis=0)
    if pts.shape[0] <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if not hull:
        return pts[:1]
    return np.asarray(hull)


@dataclass
class RotationEstimate:
    """Birkhoff displacement averages from many starts, plus their hull."""

    samples: list[tuple[np.ndarray, int, np.ndarray]]  # (x0, horizon, average)
    hull: np.ndarray

    def diameter(self) -> float:
        avgs = np.asarray([s[2] for s in self.samples])
        if avgs.shape[0] < 2:
            return 0.0
        diffs = avgs[:, None, :] - avgs[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=-1)))

    def csv_rows(self) -> list[list]:
        return [
            [float(x0[0]), float(x0[1]), int(n), float(avg[0]), float(avg[1])]
            for x0, n, avg in self.samples
        ]

    def to_json(self) -> dict:
        return {
            "samples": [
                {"x0": [float(x0[0]), float(x0[1])], "n": int(n),
                 "average": [float(avg[0]), float(avg[1])]}
                for x0, n, avg in self.samples
            ],
            "hull": [[float(v[0]), float(v[1])] for v in self.hull],
        }


def rotation_set_estimate(
    tmap: TorusMap, grid_n: int, n: int, seed: int = 0
) -> RotationEstimate:
    """Averages from a grid_n x grid_n grid plus grid_n seeded random starts.

    Starts are sorted before averaging so the output is independent of any
    evaluation order; all orbits advance in one vectorized batch.
    """
    _require_isotopic(tmap)
    grid = np.arange(grid_n) / grid_n
    starts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    starts = np.concatenate([starts, rng.uniform(0, 1, size=(grid_n, 2))], axis=0)
    order = np.lexsort((starts[:, 1], starts[:, 0]))
    starts = starts[order]

    cur = starts.copy()
    for _ in range(n):
        cur = tmap.evaluate(cur)
    avgs = (cur - starts) / n
    samples = [(starts[i], n, avgs[i]) for i in range(starts.shape[0])]
    return RotationEstimate(samples, convex_hull(avgs))


# ------------------------------------------------- irrotational handling


@dataclass
class IrrotationalResult:
    """Outcome of normalizing a lift against a battery of measures.

    When ``normalized`` is set, the returned lift is the input composed with
    the translation by -v and every battery rotation vector is within tol of
    zero. Otherwise ``residuals`` reports per-measure distances to the
    nearest common integer vector.
    """

    normalized: Optional[TorusMap]
    v: Optional[tuple[int, int]]
    rho_values: list[np.ndarray]
    residuals: list[float]
    measure_names: list[str]

    @property
    def irrotational(self) -> bool:
        return self.normalized is not None

    def to_json(self) -> dict:
        return {
            "irrotational_wrt_battery": self.irrotational,
            "lift_shift": list(self.v) if self.v is not None else None,
            "rho": [[float(r[0]), float(r[1])] for r in self.rho_values],
            "residuals": [float(r) for r in self.residuals],
            "battery": list(self.measure_names),
        }


def normalize_irrotational(
    tmap: TorusMap, measures: Sequence[EmpiricalMeasure], tol: float = 1e-3
) -> IrrotationalResult:
    """Shift the lift by an integer vector so all battery rotation vectors
    vanish, when possible.

    The common integer vector is the half-to-even rounding of the mean rho;
    acceptance requires every measure's rho to be within tol of it in the
    max norm.
    """
    _require_isotopic(tmap)
    if not measures:
        raise ValueError("battery must contain at least one measure")
    rhos = [rho_mu(tmap, mu) for mu in measures]
    names = [mu.name for mu in measures]
    mean = np.mean(rhos, axis=0)
    v = np.round(mean)  # numpy rounds half to even
    residuals = [float(np.max(np.abs(r - v))) for r in rhos]
    if max(residuals) <= tol:
        shifted = Compose(translation((-v[0], -v[1])), tmap)
        return IrrotationalResult(shifted, (int(v[0]), int(v[1])), rhos, residuals, names)
    return IrrotationalResult(None, None, rhos, residuals, names)


def irrotational_power(
    tmap: TorusMap,
    measures: Sequence[EmpiricalMeasure],
    tol: float = 1e-3,
    m_cap: int = 64,
) -> Optional[tuple[int, IrrotationalResult]]:
    """Least m <= m_cap such that the m-th power normalizes irrotationally.

    The m-th power's rotation vector is the displacement of every atom after
    m steps of the same lift, so all powers are tested in one orbit sweep;
    the arithmetic is identical to normalize_irrotational(Power(map, m)).
    """
    from .torusmaps import Power

    _require_isotopic(tmap)
    names = [mu.name for mu in measures]
    cur = [mu.points.copy() for mu in measures]
    for m in range(1, m_cap + 1):
        rhos = []
        for i, mu in enumerate(measures):
            cur[i] = tmap.evaluate(cur[i])
            rhos.append(mu.weights @ (cur[i] - mu.points))
        mean = np.mean(rhos, axis=0)
        v = np.round(mean)
        residuals = [float(np.max(np.abs(r - v))) for r in rhos]
        if max(residuals) <= tol:
            power = Power(tmap, m) if m > 1 else tmap
            shifted = Compose(translation((-v[0], -v[1])), power)
            result = IrrotationalResult(
                shifted, (int(v[0]), int(v[1])), rhos, residuals, names
            )
            return m, result
    return None


def build_battery(
    maps: Sequence[TorusMap],
    grid_n: int = 128,
    time_average_count: int = 10,
    horizon: int = 100_000,
    burn_in: int = 1_000,
    seed: int = 0,
) -> list[EmpiricalMeasure]:
    """Default measure battery: a Lebesgue grid plus seeded time averages.

    Time-average measures are distributed round-robin over the supplied
    (isotopic-to-identity) maps from seeded random starts, with all starts of
    one map advanced in a single vectorized orbit. Reports must name the
    battery, so each measure carries a descriptive name.
    """
    battery = [EmpiricalMeasure.lebesgue_grid(grid_n)]
    if not maps or time_average_count == 0:
        return battery
    rng = np.random.default_rng(seed)
    starts = rng.uniform(0, 1, size=(time_average_count, 2))
    owners = [i % len(maps) for i in range(time_average_count)]
    slots: list[Optional[EmpiricalMeasure]] = [None] * time_average_count

    for map_idx in sorted(set(owners)):
        mine = [i for i in range(time_average_count) if owners[i] == map_idx]
        cur = mod_torus(starts[mine])
        kept = np.empty((horizon - burn_in, len(mine), 2))
        for step in range(horizon):
            if step >= burn_in:
                kept[step - burn_in] = cur
            cur = mod_torus(maps[map_idx].evaluate(cur))
        for col, i in enumerate(mine):
            uniq, counts = np.unique(kept[:, col, :], axis=0, return_counts=True)
            slots[i] = EmpiricalMeasure(
                uniq, counts / counts.sum(),
                name=f"time-average-{i}(map{map_idx},n={horizon})",
            )
    battery.extend(mu for mu in slots if mu is not None)
    return battery
