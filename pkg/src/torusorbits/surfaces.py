"""Circle, annulus, Klein bottle, and Mobius strip variants.

Everything reduces to the torus machinery through covers and products: circle
pairs embed as product maps, the annulus doubles to the torus with a mirrored
second copy (C0 gluing only; smoothness across the seams is not certified),
the Klein bottle lifts through its orientation double cover with deck
involution (x, y) -> (x + 1/2, -y), and the Mobius strip goes through the
annulus with deck involution (x, s) -> (x + 1/2, 1 - s).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .fixedpoints import (
    OrbitReport,
    PipelineFailure,
    PipelineParams,
    find_finite_orbit,
)
from .mcg import IntMatrix2, lefschetz_number
from .rotation import EmpiricalMeasure
from .torusmaps import (
    Compose,
    FourierTerm,
    GroupSpec,
    InputFormatError,
    Leaf,
    TorusMap,
    mod_torus,
)

TWO_PI = 2.0 * np.pi


class WrongCount(RuntimeError):
    """An orientation-reversing circle map did not yield exactly two roots."""


class SeamDiscontinuity(RuntimeError):
    """The annulus map does not send boundary to boundary within tolerance."""


class ClassNotInteger(RuntimeError):
    """Displacement growth of a doubled map did not round to integers."""


class NotEquivariant(RuntimeError):
    """The map does not commute with the required deck involution."""


# ------------------------------------------------------------------ circle


@dataclass(frozen=True)
class CircleLift:
    """g(x) = degree * x + t + sum_k [c_k cos(2 pi k x) + s_k sin(2 pi k x)],
    a lift of a circle map of degree +1 or -1."""

    degree: int
    translation: float = 0.0
    terms: tuple[tuple[int, float, float], ...] = ()  # (k, cos, sin), k >= 1

    def __post_init__(self):
        if self.degree not in (1, -1):
            raise InputFormatError("circle lift degree must be +1 or -1")
        for k, _, _ in self.terms:
            if k < 1:
                raise InputFormatError("circle frequencies must be positive")

    def evaluate(self, x):
        x = np.asarray(x, float)
        out = self.degree * x + self.translation
        for k, c, s in self.terms:
            out = out + c * np.cos(TWO_PI * k * x) + s * np.sin(TWO_PI * k * x)
        return out

    def derivative(self, x):
        x = np.asarray(x, float)
        out = np.full_like(x, float(self.degree))
        for k, c, s in self.terms:
            out = out + TWO_PI * k * (s * np.cos(TWO_PI * k * x) - c * np.sin(TWO_PI * k * x))
        return out

    def monotone_screen(self, grid_n: int = 1024) -> float:
        """min of degree * g' over a grid; positive means the sampled lift is
        strictly monotone the right way (homeomorphism screening)."""
        xs = np.arange(grid_n) / grid_n
        return float(np.min(self.degree * self.derivative(xs)))

    def iterate(self, x, n: int):
        out = np.asarray(x, float)
        for _ in range(n):
            out = self.evaluate(out)
        return out

    def to_json(self) -> dict:
        return {
            "surface": "circle",
            "degree": int(self.degree),
            "translation": float(self.translation),
            "terms": [{"k": int(k), "cos": float(c), "sin": float(s)}
                      for k, c, s in self.terms],
        }

    @staticmethod
    def from_json(obj) -> "CircleLift":
        try:
            terms = tuple(
                (int(t["k"]), float(t.get("cos", 0.0)), float(t.get("sin", 0.0)))
                for t in obj.get("terms", [])
            )
            return CircleLift(int(obj["degree"]), float(obj.get("translation", 0.0)), terms)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"bad circle lift: {exc}") from exc


def circle_rotation_number(lift, x0: float, n: int) -> float:
    """(g^n(x0) - x0) / n for a degree +1 lift."""
    if lift.degree != 1:
        raise ValueError("rotation numbers need an orientation-preserving lift")
    if n < 1:
        raise ValueError("horizon must be >= 1")
    return float((lift.iterate(float(x0), n) - x0) / n)


def reversing_fixed_points(lift, tol: float = 1e-12) -> tuple[float, float]:
    """The two circle fixed points of an orientation-reversing homeomorphism.

    Roots of g(x) - x over the integers are bracketed on a 1024-point grid
    and bisected to ``tol``; the clusters mod 1 must number exactly two.
    """
    if lift.degree != -1:
        raise ValueError("fixed-point pairs need an orientation-reversing lift")
    if hasattr(lift, "monotone_screen") and lift.monotone_screen() <= 0:
        raise ValueError("lift failed the homeomorphism screening")
    grid_n = 1024
    xs = np.linspace(0.0, 1.0, grid_n + 1)
    u = lift.evaluate(xs) - xs

    roots: list[float] = []
    for m in range(int(np.ceil(u.min())) - 1, int(np.floor(u.max())) + 2):
        h = u - m
        for i in range(grid_n):
            a, b = h[i], h[i + 1]
            if a == 0.0:
                roots.append(float(xs[i]))
                continue
            if a * b < 0:
                lo, hi = float(xs[i]), float(xs[i + 1])
                flo = a
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    fmid = float(lift.evaluate(mid) - mid - m)
                    if fmid == 0.0:
                        lo = hi = mid
                        break
                    if flo * fmid < 0:
                        hi = mid
                    else:
                        lo, flo = mid, fmid
                roots.append(0.5 * (lo + hi))
    if u[grid_n] == 0.0:
        roots.append(1.0)

    merged: list[float] = []
    for r in sorted(r % 1.0 for r in roots):
        if all(min(abs(r - c), 1.0 - abs(r - c)) > 1e-6 for c in merged):
            merged.append(r)
    if len(merged) != 2:
        raise WrongCount(f"expected 2 fixed points, found {len(merged)}: {merged}")
    return (merged[0], merged[1])


def product_map(g1: CircleLift, g2: CircleLift) -> Leaf:
    """(g1, g2)(x, y) = (g1(x), g2(y)) as a torus lift with diagonal class."""
    cls = IntMatrix2(g1.degree, 0, 0, g2.degree)
    terms = tuple(
        FourierTerm((k, 0), (c, 0.0), (s, 0.0)) for k, c, s in g1.terms
    ) + tuple(
        FourierTerm((0, k), (0.0, c), (0.0, s)) for k, c, s in g2.terms
    )
    return Leaf(cls, (g1.translation, g2.translation), terms)


# ----------------------------------------------------------------- annulus


BOUNDARY_FLAGS = ("preserves-components", "swaps-components")


@dataclass(frozen=True)
class AnnulusMap:
    """A map of the annulus S^1 x [0,1] as an affine part plus x-trig terms.

    f(x, s) = M (x, s) + t + trig, with M = [[a, p], [0, q]]: a = +/-1 is the
    x-degree, p a shear, and (q, t2) the affine action on the strip
    coordinate. Boundary circles must land on boundary circles; the flag
    records whether the two components are preserved or swapped.
    """

    degree: int
    shear: float
    s_scale: float
    s_offset: float
    x_translation: float
    terms: tuple[FourierTerm, ...] = ()
    boundary: str = "preserves-components"

    def __post_init__(self):
        if self.degree not in (1, -1):
            raise InputFormatError("annulus x-degree must be +1 or -1")
        if self.boundary not in BOUNDARY_FLAGS:
            raise InputFormatError(f"boundary flag must be one of {BOUNDARY_FLAGS}")

    @cached_property
    def _arrays(self):
        m = np.array([[float(self.degree), self.shear], [0.0, self.s_scale]])
        t = np.array([self.x_translation, self.s_offset])
        ks = np.array([term.k for term in self.terms], float).reshape(-1, 2)
        cs = np.array([term.cos for term in self.terms], float).reshape(-1, 2)
        ss = np.array([term.sin for term in self.terms], float).reshape(-1, 2)
        return m, t, ks, cs, ss

    def evaluate(self, pts):
        m, t, ks, cs, ss = self._arrays
        pts = np.asarray(pts, float)
        out = pts @ m.T + t
        if len(self.terms):
            phase = TWO_PI * (pts @ ks.T)
            out = out + np.cos(phase) @ cs + np.sin(phase) @ ss
        return out

    def jacobian(self, pts):
        m, _, ks, cs, ss = self._arrays
        pts = np.asarray(pts, float)
        j = np.broadcast_to(m, pts.shape[:-1] + (2, 2)).copy()
        if len(self.terms):
            phase = TWO_PI * (pts @ ks.T)
            radial = (np.cos(phase)[..., None] * ss - np.sin(phase)[..., None] * cs)
            j = j + TWO_PI * np.einsum("...ki,kj->...ij", radial, ks)
        return j

    def boundary_images(self, samples: int = 256) -> tuple[np.ndarray, np.ndarray]:
        xs = np.arange(samples) / samples
        low = self.evaluate(np.stack([xs, np.zeros(samples)], axis=-1))
        high = self.evaluate(np.stack([xs, np.ones(samples)], axis=-1))
        return low[:, 1], high[:, 1]

    def seam_mismatch(self, samples: int = 256) -> float:
        """Distance of the boundary-circle images from the boundary values the
        flag demands; this is exactly what must vanish for the double to be
        continuous across the seams."""
        low, high = self.boundary_images(samples)
        if self.boundary == "preserves-components":
            t_low, t_high = 0.0, 1.0
        else:
            t_low, t_high = 1.0, 0.0
        return float(max(np.max(np.abs(low - t_low)), np.max(np.abs(high - t_high))))

    def validate(self, tol: float = 1e-9, samples: int = 256) -> None:
        mism = self.seam_mismatch(samples)
        if mism > tol:
            raise SeamDiscontinuity(
                f"boundary images deviate by {mism:.3e} from the {self.boundary} pattern"
            )
        xs = np.arange(samples) / samples
        for s in (0.25, 0.5, 0.75):
            img = self.evaluate(np.stack([xs, np.full(samples, s)], axis=-1))
            if np.any(img[:, 1] < -tol) or np.any(img[:, 1] > 1 + tol):
                raise InputFormatError("second coordinate leaves the strip [0,1]")

    def to_json(self) -> dict:
        return {
            "surface": "annulus",
            "matrix": [[int(self.degree), float(self.shear)],
                       [0.0, float(self.s_scale)]],
            "translation": [float(self.x_translation), float(self.s_offset)],
            "fourier": [
                {"k": [int(v) for v in t.k],
                 "cos": [float(v) for v in t.cos],
                 "sin": [float(v) for v in t.sin]}
                for t in self.terms
            ],
            "boundary": self.boundary,
        }

    @staticmethod
    def from_json(obj) -> "AnnulusMap":
        try:
            (a, p), (zero, q) = obj["matrix"]
            if float(zero) != 0.0:
                raise InputFormatError("annulus matrix must have a zero lower-left entry")
            t1, t2 = obj.get("translation", [0.0, 0.0])
            terms = tuple(
                FourierTerm(
                    (int(raw["k"][0]), int(raw["k"][1])),
                    tuple(float(v) for v in raw.get("cos", (0.0, 0.0))),
                    tuple(float(v) for v in raw.get("sin", (0.0, 0.0))),
                )
                for raw in obj.get("fourier", [])
            )
            return AnnulusMap(
                degree=int(a), shear=float(p), s_scale=float(q),
                s_offset=float(t2), x_translation=float(t1),
                terms=terms, boundary=obj.get("boundary", "preserves-components"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"bad annulus map: {exc}") from exc

    def compose_deck(self) -> "AnnulusMap":
        """tau o f where tau(x, s) = (x + 1/2, 1 - s), the Mobius deck map."""
        new_terms = tuple(
            FourierTerm(t.k, (t.cos[0], -t.cos[1]), (t.sin[0], -t.sin[1]))
            for t in self.terms
        )
        flag = "swaps-components" if self.boundary == "preserves-components" \
            else "preserves-components"
        return AnnulusMap(
            degree=self.degree, shear=-self.shear, s_scale=-self.s_scale,
            s_offset=1.0 - self.s_offset, x_translation=self.x_translation + 0.5,
            terms=new_terms, boundary=flag,
        )


MOBIUS_DECK = AnnulusMap(
    degree=1, shear=0.0, s_scale=-1.0, s_offset=1.0, x_translation=0.5,
    boundary="swaps-components",
)


# ---------------------------------------------------------------- doubling


class DoubledAnnulusMap(TorusMap):
    """The double of an annulus map on the torus.

    Chart: the first annulus copy occupies y in [0, 1/2] via s = 2y, the
    mirrored copy occupies y in [1/2, 1] via s = 2 - 2y. Images stay in the
    chart of their source point, which glues continuously exactly when the
    map sends boundary to boundary (checked at construction). The gluing is
    C0 only: Jacobians are chart-wise and not certified on the seams.
    """

    def __init__(self, annulus: AnnulusMap, seam_tol: float = 1e-6):
        mism = annulus.seam_mismatch()
        if mism > seam_tol:
            raise SeamDiscontinuity(
                f"seam mismatch {mism:.3e} exceeds tolerance {seam_tol:.1e}"
            )
        self.annulus = annulus
        self.seam_tol = seam_tol
        self._y_degree = 1 if annulus.boundary == "preserves-components" else -1
        self._recover_class()

    def _chart(self, y):
        yf = y - np.floor(y)
        copy1 = yf > 0.5
        s = np.where(copy1, 2.0 - 2.0 * yf, 2.0 * yf)
        return yf, copy1, s

    def evaluate(self, pts):
        pts = np.asarray(pts, float)
        x, y = pts[..., 0], pts[..., 1]
        yshift = np.floor(y)
        _, copy1, s = self._chart(y)
        img = self.annulus.evaluate(np.stack([x, s], axis=-1))
        x1, s1 = img[..., 0], img[..., 1]
        beta = 0.0 if self._y_degree == 1 else -1.0
        y1 = np.where(copy1, 1.0 - 0.5 * s1 + beta, 0.5 * s1)
        return np.stack([x1, y1 + self._y_degree * yshift], axis=-1)

    def jacobian(self, pts):
        pts = np.asarray(pts, float)
        x, y = pts[..., 0], pts[..., 1]
        _, copy1, s = self._chart(y)
        ja = self.annulus.jacobian(np.stack([x, s], axis=-1))
        ds_dy = np.where(copy1, -2.0, 2.0)
        sign = np.where(copy1, -0.5, 0.5)
        j = np.empty_like(ja)
        j[..., 0, 0] = ja[..., 0, 0]
        j[..., 0, 1] = ja[..., 0, 1] * ds_dy
        j[..., 1, 0] = sign * ja[..., 1, 0]
        j[..., 1, 1] = sign * ja[..., 1, 1] * ds_dy
        return j

    def _recover_class(self):
        # displacement growth around the two torus loops, rounded to integers
        rng = np.random.default_rng(5)
        xs = rng.uniform(0.05, 0.45, size=(8, 2))  # stay off the seams
        base = self.evaluate(xs)
        col1 = self.evaluate(xs + [1.0, 0.0]) - base
        col2 = self.evaluate(xs + [0.0, 1.0]) - base
        cols = np.stack([col1, col2], axis=-1)
        rounded = np.round(cols)
        if np.max(np.abs(cols - rounded)) > 1e-9:
            raise ClassNotInteger(
                f"loop displacements {cols[0]} are not integral"
            )
        if np.max(np.abs(rounded - rounded[0])) > 0:
            raise ClassNotInteger("loop displacements vary across sample points")
        m = rounded[0].astype(int)
        try:
            self._class = IntMatrix2(int(m[0, 0]), int(m[0, 1]),
                                     int(m[1, 0]), int(m[1, 1]))
        except ValueError as exc:
            raise ClassNotInteger(str(exc)) from exc

    @property
    def mapping_class(self) -> IntMatrix2:
        return self._class

    @cached_property
    def disp_bound(self) -> float:
        grid = np.linspace(0.0, 1.0, 64, endpoint=False)
        pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        disp = self.evaluate(pts) - pts @ self.class_matrix().T
        return float(np.max(np.linalg.norm(disp, axis=-1)) * 1.5)

    def restrict_first_copy(self, pts):
        """Evaluate back in annulus coordinates from the first copy (oracle
        hook: doubling then restricting must reproduce the original map)."""
        pts = np.asarray(pts, float)
        img = self.evaluate(np.stack([pts[..., 0], pts[..., 1] / 2.0], axis=-1))
        return np.stack([img[..., 0], 2.0 * mod_torus(img[..., 1:2])[..., 0]], axis=-1)

    def to_json(self) -> dict:
        return {"double": self.annulus.to_json()}


def double_annulus(annulus: AnnulusMap, seam_tol: float = 1e-6) -> DoubledAnnulusMap:
    """Double the annulus map across the mirrored chart; see DoubledAnnulusMap."""
    doubled = DoubledAnnulusMap(annulus, seam_tol)
    want = -1 if annulus.boundary == "swaps-components" else 1
    cls = doubled.mapping_class
    if cls.a != annulus.degree or cls.c != 0 or cls.d != want:
        raise ClassNotInteger(
            f"recovered class {cls.rows()} conflicts with the boundary flag"
        )
    return doubled


# ------------------------------------------------------------ Klein bottle

KLEIN_DECK = Leaf(IntMatrix2(1, 0, 0, -1), (0.5, 0.0))


@dataclass
class KleinLiftPair:
    """The two torus lifts of a Klein-bottle map and their Lefschetz data.

    Results are phrased at the cover level: ``offset`` is the constant
    integer vector by which psi o sigma and sigma o psi differ as lifts.
    """

    lifts: tuple[TorusMap, TorusMap]
    classes: tuple[IntMatrix2, IntMatrix2]
    lefschetz: tuple[int, int]
    offset: tuple[int, int]
    declared_klein_lefschetz: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "classes": [c.rows() for c in self.classes],
            "lefschetz_pair": list(self.lefschetz),
            "deck_offset": list(self.offset),
            "declared_klein_lefschetz": self.declared_klein_lefschetz,
        }


def klein_lifts(
    tmap: TorusMap,
    check_tol: float = 1e-9,
    declared_lefschetz: Optional[int] = None,
    samples: int = 64,
    seed: int = 0,
) -> KleinLiftPair:
    """Split a sigma-equivariant torus lift into the two lifts of the induced
    Klein-bottle map and report their Lefschetz numbers.

    Equivariance is accepted up to a constant integer offset, since lifts of
    the same Klein map are only defined up to deck translations. The pair of
    Lefschetz numbers is checked against {2 L, 0} when L is declared.
    """
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 2.0, size=(samples, 2))
    diff = tmap.evaluate(KLEIN_DECK.evaluate(xs)) - KLEIN_DECK.evaluate(tmap.evaluate(xs))
    d0 = diff[0]
    if np.max(np.linalg.norm(diff - d0, axis=-1)) > check_tol:
        raise NotEquivariant("psi o sigma - sigma o psi is not constant")
    w = np.round(d0)
    if np.max(np.abs(d0 - w)) > check_tol:
        raise NotEquivariant(
            f"deck commutator offset {d0} is not an integer vector"
        )

    other = Compose(KLEIN_DECK, tmap)
    classes = (tmap.mapping_class, other.mapping_class)
    lefs = (lefschetz_number(classes[0]), lefschetz_number(classes[1]))
    if 0 not in lefs:
        raise NotEquivariant(
            f"lift Lefschetz pair {lefs} lacks the structural zero"
        )
    if declared_lefschetz is not None:
        if sorted(lefs) != sorted((2 * declared_lefschetz, 0)):
            raise ValueError(
                f"lift pair {lefs} does not match 2*{declared_lefschetz} and 0"
            )
    return KleinLiftPair(
        lifts=(tmap, other),
        classes=classes,
        lefschetz=lefs,
        offset=(int(w[0]), int(w[1])),
        declared_klein_lefschetz=declared_lefschetz,
    )


# ------------------------------------------------------------ Mobius strip


class _BoundaryCircle:
    """Circle lift induced on the single Mobius boundary by an annulus lift."""

    def __init__(self, annulus: AnnulusMap):
        self.annulus = annulus
        self.degree = annulus.degree
        self.shift = 0.5 if annulus.boundary == "swaps-components" else 0.0

    def evaluate(self, x):
        x = np.asarray(x, float)
        pts = np.stack([x, np.zeros_like(x)], axis=-1)
        return self.annulus.evaluate(pts)[..., 0] + self.shift

    def iterate(self, x, n: int):
        out = np.asarray(x, float)
        for _ in range(n):
            out = self.evaluate(out)
        return out


@dataclass
class MobiusReport:
    """Everything the Mobius reduction produced, phrased at the cover level."""

    swapping_lift: str                 # "input" or "deck-composed"
    doubled_class: IntMatrix2
    doubled_lefschetz: int
    interior: Optional[OrbitReport | PipelineFailure]
    boundary_degree: int
    boundary_rotation: Optional[float]
    boundary_points: Optional[tuple[float, ...]]

    def to_json(self) -> dict:
        if self.interior is None:
            interior = None
        else:
            interior = self.interior.to_json()
        return {
            "swapping_lift": self.swapping_lift,
            "doubled_class": self.doubled_class.rows(),
            "doubled_lefschetz": self.doubled_lefschetz,
            "interior": interior,
            "boundary": {
                "degree": self.boundary_degree,
                "rotation_number": self.boundary_rotation,
                "fixed_points": list(self.boundary_points) if self.boundary_points else None,
            },
        }


def _check_mobius_equivariance(amap: AnnulusMap, tol: float, samples: int = 64):
    rng = np.random.default_rng(1)
    pts = np.stack([rng.uniform(-1, 2, samples), rng.uniform(0, 1, samples)], axis=-1)
    lhs = amap.evaluate(MOBIUS_DECK.evaluate(pts))
    rhs = MOBIUS_DECK.evaluate(amap.evaluate(pts))
    diff = lhs - rhs
    d0 = diff[0]
    if np.max(np.linalg.norm(diff - d0, axis=-1)) > tol:
        raise NotEquivariant("map does not commute with the Mobius deck involution")
    if abs(d0[1]) > tol or abs(d0[0] - round(d0[0])) > tol:
        raise NotEquivariant(
            f"deck commutator offset {d0} is not an integer x-translation"
        )


def mobius_reduce(
    amap: AnnulusMap,
    tol: float = 1e-9,
    seam_tol: float = 1e-6,
    battery: Optional[Sequence[EmpiricalMeasure]] = None,
    params: Optional[PipelineParams] = None,
    rotation_horizon: int = 4096,
) -> MobiusReport:
    """Analyze a Mobius-strip map through its annulus lift.

    Checks equivariance under the deck involution, selects the
    boundary-swapping lift among {f, tau o f}, doubles it, runs the
    finite-orbit pipeline on the double when its Lefschetz number is nonzero,
    and analyzes the induced boundary-circle map either way.
    """
    _check_mobius_equivariance(amap, tol)
    if amap.boundary == "swaps-components":
        swapping, which = amap, "input"
    else:
        swapping, which = amap.compose_deck(), "deck-composed"

    doubled = double_annulus(swapping, seam_tol)
    lef = lefschetz_number(doubled.mapping_class)
    interior: Optional[OrbitReport | PipelineFailure] = None
    if lef != 0:
        group = GroupSpec(("double",), (doubled,))
        interior = find_finite_orbit(group, battery=battery, params=params)

    boundary = _BoundaryCircle(swapping)
    rotation: Optional[float] = None
    points: Optional[tuple[float, ...]] = None
    if boundary.degree == -1:
        p, q = reversing_fixed_points(boundary, tol=1e-12)
        points = (p, q)
    else:
        x0 = 0.0
        rotation = float((boundary.iterate(x0, rotation_horizon) - x0) / rotation_horizon)
        frac = rotation - round(rotation)
        if abs(frac) <= 1e-9:
            # integer rotation number: the starting point's orbit is a
            # boundary fixed-orbit representative
            points = (0.0,)
    return MobiusReport(
        swapping_lift=which,
        doubled_class=doubled.mapping_class,
        doubled_lefschetz=lef,
        interior=interior,
        boundary_degree=boundary.degree,
        boundary_rotation=rotation,
        boundary_points=points,
    )
