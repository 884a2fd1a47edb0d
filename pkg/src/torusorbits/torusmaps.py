"""Lifts of torus maps to the plane.

A leaf is an affine map with declared integer mapping class plus a finite
trigonometric perturbation, which makes deck equivariance
psi(x + v) = psi(x) + A v structural and the Jacobian analytic. Composites,
inverses, and powers are kept as expression trees (composed trigonometric
polynomials are not trigonometric polynomials), with the mapping class and a
displacement bound propagated exactly / soundly along the tree. All
evaluation is numpy-vectorized over inputs of shape (..., 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .mcg import IDENTITY, IntMatrix2

TWO_PI = 2.0 * np.pi

NEWTON_MAX_ITER = 64
NEWTON_TOL = 1e-12
INVERSE_BOUND_GRID = 64
INVERSE_BOUND_SAFETY = 1.5


class NewtonDivergence(RuntimeError):
    """An inverse-node solve failed to converge."""


class SingularJacobian(RuntimeError):
    """A Jacobian determinant fell below 1e-12 where an inverse was needed."""


class InputFormatError(ValueError):
    """Malformed map / group JSON."""


def mod_torus(x: np.ndarray) -> np.ndarray:
    """Reduce plane points to the fundamental domain [0,1)^2."""
    arr = np.asarray(x, float)
    return arr - np.floor(arr)


def torus_dist(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean distance on the torus (shortest representative)."""
    d = np.abs(np.asarray(p, float) - np.asarray(q, float)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return np.sqrt(np.sum(d * d, axis=-1))


def singular_values(m: np.ndarray) -> tuple[float, float]:
    """(sigma_max, sigma_min) of a real 2x2 matrix, by the closed form."""
    m = np.asarray(m, float)
    p = float(np.sum(m * m))
    q = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    disc = max(p * p - 4.0 * q * q, 0.0)
    root = np.sqrt(disc)
    hi = np.sqrt(max((p + root) / 2.0, 0.0))
    lo = np.sqrt(max((p - root) / 2.0, 0.0))
    return hi, lo


def _solve2(j: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched 2x2 solve j @ delta = r -> (delta, |det|). Shapes (...,2,2), (...,2)."""
    det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
    safe = np.where(np.abs(det) < 1e-300, 1.0, det)
    dx = (r[..., 0] * j[..., 1, 1] - r[..., 1] * j[..., 0, 1]) / safe
    dy = (r[..., 1] * j[..., 0, 0] - r[..., 0] * j[..., 1, 0]) / safe
    return np.stack([dx, dy], axis=-1), np.abs(det)


def newton_solve(
    func,
    jac,
    x0: np.ndarray,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched Newton iteration on func(x) = 0.

    Returns (solutions, converged mask); points whose Jacobian degenerates or
    that fail to reach ``tol`` are reported as non-converged, not raised.
    """
    x = np.array(x0, float, copy=True)
    flat = x.reshape(-1, 2)
    alive = np.ones(flat.shape[0], dtype=bool)
    converged = np.zeros(flat.shape[0], dtype=bool)
    for _ in range(max_iter):
        if not alive.any():
            break
        pts = flat[alive]
        res = np.asarray(func(pts), float)
        good = np.linalg.norm(res, axis=-1) <= tol
        if good.any():
            idx = np.flatnonzero(alive)[good]
            converged[idx] = True
            alive[idx] = False
            pts = pts[~good]
            res = res[~good]
            if pts.size == 0:
                continue
        j = np.asarray(jac(pts), float)
        delta, absdet = _solve2(j, res)
        bad = absdet < 1e-12
        idx = np.flatnonzero(alive)
        if bad.any():
            alive[idx[bad]] = False
            idx = idx[~bad]
            delta = delta[~bad]
        flat[idx] = flat[idx] - delta
    # final residual check for points that used all iterations
    if alive.any():
        pts = flat[alive]
        res = np.asarray(func(pts), float)
        good = np.linalg.norm(res, axis=-1) <= tol
        converged[np.flatnonzero(alive)[good]] = True
    return flat.reshape(x.shape), converged.reshape(x.shape[:-1])


@dataclass(frozen=True)
class FourierTerm:
    k: tuple[int, int]
    cos: tuple[float, float]
    sin: tuple[float, float]

    def __post_init__(self):
        if tuple(self.k) == (0, 0):
            raise InputFormatError("fourier frequency (0,0) belongs in the translation")


class TorusMap:
    """Base class: a lift of a torus map with exact class bookkeeping."""

    @property
    def mapping_class(self) -> IntMatrix2:
        raise NotImplementedError

    @property
    def disp_bound(self) -> float:
        """A sound bound K with sup_x ||psi(x) - A x|| <= K."""
        raise NotImplementedError

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    # conveniences shared by every node -------------------------------

    def __call__(self, x):
        return self.evaluate(x)

    def class_matrix(self) -> np.ndarray:
        m = self.mapping_class
        return np.array([[m.a, m.b], [m.c, m.d]], float)

    def iterate(self, x: np.ndarray, n: int) -> np.ndarray:
        out = np.asarray(x, float)
        step = self if n >= 0 else Inverse(self)
        for _ in range(abs(n)):
            out = step.evaluate(out)
        return out


@dataclass(frozen=True)
class Leaf(TorusMap):
    """psi(x) = A x + t + sum_k [ c_k cos(2 pi <k,x>) + s_k sin(2 pi <k,x>) ]."""

    matrix: IntMatrix2
    translation: tuple[float, float] = (0.0, 0.0)
    terms: tuple[FourierTerm, ...] = ()

    @property
    def mapping_class(self) -> IntMatrix2:
        return self.matrix

    @cached_property
    def _arrays(self):
        a = np.array(self.matrix.rows(), float)
        t = np.array(self.translation, float)
        ks = np.array([term.k for term in self.terms], float).reshape(-1, 2)
        cs = np.array([term.cos for term in self.terms], float).reshape(-1, 2)
        ss = np.array([term.sin for term in self.terms], float).reshape(-1, 2)
        return a, t, ks, cs, ss

    @cached_property
    def disp_bound(self) -> float:
        _, t, _, cs, ss = self._arrays
        return float(np.linalg.norm(t)
                     + np.sum(np.linalg.norm(cs, axis=-1))
                     + np.sum(np.linalg.norm(ss, axis=-1)))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        a, t, ks, cs, ss = self._arrays
        x = np.asarray(x, float)
        out = x @ a.T + t
        if len(self.terms):
            phase = TWO_PI * (x @ ks.T)            # (..., nterms)
            out = out + np.cos(phase) @ cs + np.sin(phase) @ ss
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        a, _, ks, cs, ss = self._arrays
        x = np.asarray(x, float)
        j = np.broadcast_to(a, x.shape[:-1] + (2, 2)).copy()
        if len(self.terms):
            phase = TWO_PI * (x @ ks.T)
            # d/dx_j of the trig sum: 2 pi k_j (s_k cos - c_k sin)
            radial = (np.cos(phase)[..., None] * ss
                      - np.sin(phase)[..., None] * cs)   # (..., nterms, 2)
            j = j + TWO_PI * np.einsum("...ki,kj->...ij", radial, ks)
        return j

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.rows(),
            "translation": [float(v) for v in self.translation],
            "fourier": [
                {"k": [int(v) for v in t.k],
                 "cos": [float(v) for v in t.cos],
                 "sin": [float(v) for v in t.sin]}
                for t in self.terms
            ],
        }


@dataclass(frozen=True)
class Compose(TorusMap):
    outer: TorusMap
    inner: TorusMap

    @cached_property
    def mapping_class(self) -> IntMatrix2:
        return self.outer.mapping_class * self.inner.mapping_class

    @cached_property
    def disp_bound(self) -> float:
        # ||f(g(x)) - Af Ag x|| <= Kf + ||Af||op Kg
        op_norm, _ = singular_values(self.outer.class_matrix())
        return self.outer.disp_bound + op_norm * self.inner.disp_bound

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.outer.evaluate(self.inner.evaluate(x))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        inner_val = self.inner.evaluate(x)
        return self.outer.jacobian(inner_val) @ self.inner.jacobian(x)

    def to_json(self) -> dict:
        return {"compose": [self.outer.to_json(), self.inner.to_json()]}


@dataclass(frozen=True)
class Inverse(TorusMap):
    base: TorusMap

    @cached_property
    def mapping_class(self) -> IntMatrix2:
        return self.base.mapping_class.inverse()

    @cached_property
    def disp_bound(self) -> float:
        # no closed form through an inverse: sample ||f^-1(x) - A^-1 x|| on a
        # grid (the displacement is Z^2-periodic) and widen by a safety factor
        grid = np.linspace(0.0, 1.0, INVERSE_BOUND_GRID, endpoint=False)
        xs = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        vals = self.evaluate(xs)
        a_inv = np.linalg.inv(self.class_matrix())
        disp = vals - xs @ a_inv.T
        return float(np.max(np.linalg.norm(disp, axis=-1)) * INVERSE_BOUND_SAFETY)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, float)
        base = self.base
        a_inv = np.linalg.inv(base.class_matrix())
        f0 = base.evaluate(np.zeros(2))
        flat_y = y.reshape(-1, 2)
        pts = ((flat_y - f0) @ a_inv.T).copy()    # warm start A^-1 (y - f(0))

        converged = np.zeros(flat_y.shape[0], dtype=bool)
        for _ in range(NEWTON_MAX_ITER):
            res = base.evaluate(pts) - flat_y
            converged = np.linalg.norm(res, axis=-1) <= NEWTON_TOL
            if converged.all():
                break
            j = base.jacobian(pts)
            delta, absdet = _solve2(j, res)
            if np.any(absdet < 1e-12):
                raise SingularJacobian("singular Jacobian inside inverse solve")
            active = ~converged
            pts[active] = pts[active] - delta[active]
        else:
            res = base.evaluate(pts) - flat_y
            converged = np.linalg.norm(res, axis=-1) <= NEWTON_TOL
        if not converged.all():
            raise NewtonDivergence(
                f"inverse solve failed for {int((~converged).sum())} of {converged.size} points"
            )
        return pts.reshape(y.shape)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        pre = self.evaluate(x)
        j = self.base.jacobian(pre)
        det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        if np.any(np.abs(det) < 1e-12):
            raise SingularJacobian("base Jacobian is singular along the inverse")
        inv = np.empty_like(j)
        inv[..., 0, 0] = j[..., 1, 1] / det
        inv[..., 0, 1] = -j[..., 0, 1] / det
        inv[..., 1, 0] = -j[..., 1, 0] / det
        inv[..., 1, 1] = j[..., 0, 0] / det
        return inv

    def to_json(self) -> dict:
        return {"inverse": self.base.to_json()}


@dataclass(frozen=True)
class Power(TorusMap):
    base: TorusMap
    n: int

    @cached_property
    def mapping_class(self) -> IntMatrix2:
        return self.base.mapping_class ** self.n

    @cached_property
    def disp_bound(self) -> float:
        if self.n == 0:
            return 0.0
        step = self.base if self.n > 0 else Inverse(self.base)
        op_norm, _ = singular_values(step.class_matrix())
        k_step = step.disp_bound
        total, factor = 0.0, 1.0
        for _ in range(abs(self.n)):
            total += factor * k_step
            factor *= op_norm
        return total

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.base.iterate(x, self.n)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        if self.n == 0:
            return np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()
        step = self.base if self.n > 0 else Inverse(self.base)
        j = None
        cur = x
        for _ in range(abs(self.n)):
            js = step.jacobian(cur)
            j = js if j is None else js @ j
            cur = step.evaluate(cur)
        return j

    def to_json(self) -> dict:
        return {"power": {"base": self.base.to_json(), "n": self.n}}


def identity_map() -> Leaf:
    return Leaf(IDENTITY)


def inverse_map(tmap: TorusMap) -> TorusMap:
    """Invert a lift, exactly for term-free affine leaves.

    A x + t inverts to A^-1 x - A^-1 t in closed form; everything else gets
    an Inverse node solved by Newton iteration at evaluation time.
    """
    if isinstance(tmap, Leaf) and not tmap.terms:
        a_inv = tmap.matrix.inverse()
        t = np.array(tmap.translation, float)
        shift = -(np.array(a_inv.rows(), float) @ t)
        return Leaf(a_inv, (float(shift[0]), float(shift[1])))
    return Inverse(tmap)


def translation(v: Sequence[float]) -> Leaf:
    return Leaf(IDENTITY, (float(v[0]), float(v[1])))


def affine(matrix: IntMatrix2, t: Sequence[float] = (0.0, 0.0)) -> Leaf:
    return Leaf(matrix, (float(t[0]), float(t[1])))


# -------------------------------------------------------------- checking


@dataclass(frozen=True)
class DiffeoCheck:
    """Grid screening of local invertibility; evidence, not proof."""

    valid: bool
    min_abs_det: Optional[float] = None
    suspect_point: Optional[tuple[float, float]] = None

    def to_json(self) -> dict:
        out = {"valid": self.valid, "screening": True}
        if self.valid:
            out["min_abs_det"] = self.min_abs_det
        else:
            out["suspect_point"] = list(self.suspect_point)
        return out


def validate_diffeo(tmap: TorusMap, grid_n: int = 32) -> DiffeoCheck:
    """Sample det(J) on a grid over the fundamental domain.

    Valid requires one sign throughout and |det| >= 1e-6; the first offending
    sample point is reported otherwise.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    grid = np.linspace(0.0, 1.0, grid_n, endpoint=False)
    xs = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
    j = tmap.jacobian(xs)
    det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
    sign = np.sign(det[0])
    bad = (np.sign(det) != sign) | (np.abs(det) < 1e-6)
    if bad.any():
        p = xs[int(np.argmax(bad))]
        return DiffeoCheck(False, suspect_point=(float(p[0]), float(p[1])))
    return DiffeoCheck(True, min_abs_det=float(np.min(np.abs(det))))


def check_equivariance(tmap: TorusMap, samples: int = 32, seed: int = 0) -> float:
    """Max residual of psi(x+v) - psi(x) - A v over sampled x and |v| <= 2."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 2.0, size=(samples, 2))
    a = tmap.class_matrix()
    base = tmap.evaluate(xs)
    worst = 0.0
    for v1 in range(-2, 3):
        for v2 in range(-2, 3):
            v = np.array([v1, v2], float)
            res = tmap.evaluate(xs + v) - base - v @ a.T
            worst = max(worst, float(np.max(np.linalg.norm(res, axis=-1))))
    return worst


@dataclass(frozen=True)
class GroupSpec:
    """Named generator maps, with an optional marked element label."""

    labels: tuple[str, ...]
    maps: tuple[TorusMap, ...]
    psi_label: Optional[str] = None

    def __post_init__(self):
        if len(self.labels) != len(self.maps) or not self.labels:
            raise InputFormatError("generators must be a nonempty list of labeled maps")
        if len(set(self.labels)) != len(self.labels):
            raise InputFormatError("generator labels must be unique")
        if self.psi_label is not None and self.psi_label not in self.labels:
            raise InputFormatError(f"marked label {self.psi_label!r} is not a generator")

    def classes(self) -> list[IntMatrix2]:
        return [m.mapping_class for m in self.maps]

    def validate(self, grid_n: int = 32) -> dict[str, DiffeoCheck]:
        return {lbl: validate_diffeo(m, grid_n) for lbl, m in zip(self.labels, self.maps)}


def word_to_map(word: Sequence[int], maps: Sequence[TorusMap]) -> TorusMap:
    """Evaluate a signed-index word as a composition of generator maps.

    Word order matches matrix order: (1, 2) means g1 * g2, the map g1 o g2,
    so mapping classes multiply in the same order as the word.
    """
    if not word:
        return identity_map()
    factors = []
    for idx in word:
        if idx == 0 or abs(idx) > len(maps):
            raise ValueError(f"word index {idx} out of range")
        m = maps[abs(idx) - 1]
        factors.append(m if idx > 0 else inverse_map(m))
    out = factors[-1]
    for f in reversed(factors[:-1]):
        out = Compose(f, out)
    return out


# ---------------------------------------------------------------- JSON


def parse_map(obj) -> TorusMap:
    """Parse the JSON tree format for lifts.

    Leaves: {"matrix": [[a,b],[c,d]], "translation": [tx,ty], "fourier": [...]},
    nodes: {"compose": [outer, inner]}, {"inverse": m},
    {"power": {"base": m, "n": n}}.
    """
    if not isinstance(obj, dict):
        raise InputFormatError(f"map node must be an object, got {type(obj).__name__}")
    if "compose" in obj:
        parts = obj["compose"]
        if not isinstance(parts, list) or len(parts) != 2:
            raise InputFormatError('"compose" takes exactly two maps')
        return Compose(parse_map(parts[0]), parse_map(parts[1]))
    if "inverse" in obj:
        return Inverse(parse_map(obj["inverse"]))
    if "power" in obj:
        node = obj["power"]
        try:
            return Power(parse_map(node["base"]), int(node["n"]))
        except (KeyError, TypeError) as exc:
            raise InputFormatError(f'bad "power" node: {exc}') from exc
    if "matrix" in obj:
        try:
            matrix = IntMatrix2.from_rows(obj["matrix"])
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"bad matrix: {exc}") from exc
        translation = obj.get("translation", [0.0, 0.0])
        if len(translation) != 2:
            raise InputFormatError("translation must have two entries")
        terms = []
        for raw in obj.get("fourier", []):
            try:
                terms.append(FourierTerm(
                    (int(raw["k"][0]), int(raw["k"][1])),
                    (float(raw["cos"][0]), float(raw["cos"][1])) if "cos" in raw else (0.0, 0.0),
                    (float(raw["sin"][0]), float(raw["sin"][1])) if "sin" in raw else (0.0, 0.0),
                ))
            except (KeyError, TypeError, IndexError) as exc:
                raise InputFormatError(f"bad fourier term {raw!r}: {exc}") from exc
        return Leaf(matrix, (float(translation[0]), float(translation[1])), tuple(terms))
    raise InputFormatError(f"unrecognized map node with keys {sorted(obj)}")


def parse_group(obj) -> GroupSpec:
    """Parse {"generators": [{"label": ..., "map": {...}}, ...], "psi": label?}."""
    if not isinstance(obj, dict) or "generators" not in obj:
        raise InputFormatError('group JSON needs a "generators" list')
    labels, maps = [], []
    for entry in obj["generators"]:
        if not isinstance(entry, dict) or "label" not in entry or "map" not in entry:
            raise InputFormatError('each generator needs "label" and "map"')
        labels.append(str(entry["label"]))
        maps.append(parse_map(entry["map"]))
    return GroupSpec(tuple(labels), tuple(maps), obj.get("psi"))


def group_to_json(group: GroupSpec) -> dict:
    out = {
        "generators": [
            {"label": lbl, "map": m.to_json()}
            for lbl, m in zip(group.labels, group.maps)
        ]
    }
    if group.psi_label is not None:
        out["psi"] = group.psi_label
    return out
