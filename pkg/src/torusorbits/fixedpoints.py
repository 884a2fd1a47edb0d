"""Fixed-point localization for lifts and the finite-orbit pipeline.

A lift whose class has no eigenvalue 1 moves far-away points a lot:
||psi(x) - x|| >= C ||x|| - K with C = sigma_min(A - Id) and K the
displacement bound, so its fixed points live in a computable ball. The
pipeline classifies the mapping classes, picks the special element, finds
its lift fixed points, normalizes the isotopic-to-identity generators
against a measure battery, searches a common fixed point, and closes the
group orbit. The common fixed point is guaranteed to exist for nilpotent
groups but not constructively, so the numeric search may fail on valid
inputs; failures name their stage and never claim more than they checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mcg import (
    IDENTITY,
    IntMatrix2,
    McgClassification,
    NoSpecialElement,
    Word,
    classify_nilpotent_subgroup,
    lefschetz_number,
    has_one_in_spectrum,
    select_special_element,
)
from .rotation import EmpiricalMeasure, build_battery, irrotational_power
from .torusmaps import (
    Compose,
    GroupSpec,
    TorusMap,
    mod_torus,
    newton_solve,
    singular_values,
    torus_dist,
    translation,
    word_to_map,
)


class OneInSpectrum(ValueError):
    """The mapping class has eigenvalue 1, so no fixed-point region exists."""


PIPELINE_STAGES = (
    "not-nilpotent",
    "no-special-element",
    "no-psi-fixed-point",
    "irrotational-power",
    "no-common-fixed-point",
    "orbit-not-closed",
)


@dataclass(frozen=True)
class FixRegion:
    """Ball ||x|| <= radius containing Fix of the lift, with slack ``margin``."""

    c: float
    k: float
    margin: float = 0.5

    def __post_init__(self):
        if self.c <= 0:
            raise OneInSpectrum("C = sigma_min(A - Id) must be positive")

    @property
    def radius(self) -> float:
        return (self.k + self.margin) / self.c

    def to_json(self) -> dict:
        return {"c": self.c, "k": self.k, "margin": self.margin, "radius": self.radius}


def fix_region(tmap: TorusMap, margin: float = 0.5) -> FixRegion:
    """C from the exact 2x2 singular-value formula, K from the cached bound."""
    cls = tmap.mapping_class
    if has_one_in_spectrum(cls):
        raise OneInSpectrum(f"1 is an eigenvalue of {cls.rows()}")
    m = np.array(cls.rows(), float) - np.eye(2)
    _, sigma_min = singular_values(m)
    return FixRegion(c=float(sigma_min), k=float(tmap.disp_bound), margin=margin)


@dataclass(frozen=True)
class FixedPointRecord:
    """One torus fixed point of the map induced by the lift.

    ``lift`` is the integer vector w such that T_w o psi fixes ``location``
    (as a plane point); ``index`` is the sign of det(D psi - Id) there, or
    None when that determinant is within 1e-8 of zero (degenerate).
    """

    location: tuple[float, float]
    residual: float
    index: Optional[int]
    lift: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "location": list(self.location),
            "residual": self.residual,
            "index": self.index if self.index is not None else "degenerate",
            "lift_v": list(self.lift),
        }


@dataclass
class FixedPointSearch:
    records: list[FixedPointRecord]
    newton_failures: int
    attempts: int

    def to_json(self) -> dict:
        return {
            "records": [r.to_json() for r in self.records],
            "newton_failures": self.newton_failures,
            "attempts": self.attempts,
        }


def find_torus_fixed_points(
    tmap: TorusMap,
    region: FixRegion,
    grid_n: int = 64,
    tol: float = 1e-12,
) -> FixedPointSearch:
    """Solve psi(x) - x = v over all admissible integer vectors v.

    Any solution reachable from seeds in the unit square satisfies
    ||v|| = ||(A - Id) x + (psi(x) - A x)|| <= ||A - Id||op (r + 1) + K,
    with r the larger of the region radius and the seed square's diameter;
    the enumeration adds 1 of slack on top. Newton runs from a grid_n^2 seed
    grid per v; non-converged seeds are dropped and counted. Solutions are
    reduced mod Z^2 and de-duplicated within 10 * tol.
    """
    a = tmap.class_matrix()
    op_norm, _ = singular_values(a - np.eye(2))
    r_eff = max(region.radius, np.sqrt(2.0))
    v_bound = op_norm * (r_eff + 1.0) + region.k + 1.0
    v_max = int(np.floor(v_bound))

    grid = (np.arange(grid_n) + 0.5) / grid_n
    seeds = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)

    eye = np.eye(2)
    solutions: list[np.ndarray] = []
    failures = 0
    attempts = 0
    for v1 in range(-v_max, v_max + 1):
        for v2 in range(-v_max, v_max + 1):
            if v1 * v1 + v2 * v2 > v_bound * v_bound:
                continue
            v = np.array([v1, v2], float)
            attempts += seeds.shape[0]
            sols, ok = newton_solve(
                lambda p: tmap.evaluate(p) - p - v,
                lambda p: tmap.jacobian(p) - eye,
                seeds,
                tol=tol,
            )
            failures += int((~ok).sum())
            if ok.any():
                solutions.append(sols[ok])

    records: list[FixedPointRecord] = []
    if solutions:
        pts = mod_torus(np.concatenate(solutions, axis=0))
        disp = tmap.evaluate(pts) - pts
        lifts = np.round(-disp)
        residuals = np.linalg.norm(disp + lifts, axis=-1)
        keep = residuals <= tol
        pts, lifts, residuals = pts[keep], lifts[keep], residuals[keep]

        # coarse pre-clustering on a fine grid (well below the 10*tol merge
        # radius) collapses the bulk of coincident Newton limits cheaply; the
        # exact greedy pass below enforces the real radius
        if pts.shape[0]:
            key = np.floor(pts / max(tol * 0.1, 1e-14)).astype(np.int64)
            _, first = np.unique(key, axis=0, return_index=True)
            sel = np.sort(first)
            pts, lifts, residuals = pts[sel], lifts[sel], residuals[sel]

        order = np.lexsort((pts[:, 1], pts[:, 0], residuals))
        accepted: list[int] = []
        for i in order:
            if accepted:
                dists = torus_dist(pts[i], pts[np.asarray(accepted)])
                if np.min(dists) <= 10 * tol:
                    continue
            accepted.append(int(i))
        accepted.sort(key=lambda i: (pts[i, 0], pts[i, 1]))

        for i in accepted:
            j = tmap.jacobian(pts[i]) - eye
            det = float(j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])
            index = None if abs(det) < 1e-8 else (1 if det > 0 else -1)
            records.append(FixedPointRecord(
                location=(float(pts[i, 0]), float(pts[i, 1])),
                residual=float(residuals[i]),
                index=index,
                lift=(int(lifts[i, 0]), int(lifts[i, 1])),
            ))
    return FixedPointSearch(records, failures, attempts)


@dataclass(frozen=True)
class IndexSum:
    status: str  # "pass" | "mismatch" | "degenerate"
    total: Optional[int]
    expected: int

    def to_json(self) -> dict:
        return {"status": self.status, "sum": self.total, "expected": self.expected}


def index_sum_check(records: Sequence[FixedPointRecord], cls: IntMatrix2) -> IndexSum:
    """Compare the sum of fixed-point indices with det(Id - A)."""
    expected = lefschetz_number(cls)
    if any(r.index is None for r in records):
        return IndexSum("degenerate", None, expected)
    total = sum(r.index for r in records)
    return IndexSum("pass" if total == expected else "mismatch", total, expected)


# ------------------------------------------------------------ the pipeline


@dataclass
class PipelineParams:
    grid_n: int = 64
    newton_tol: float = 1e-12
    rot_tol: float = 1e-3
    orbit_tol: float = 1e-9
    margin: float = 0.5
    m_cap: Optional[int] = None       # default: 4 * L(psi)^2
    orbit_cap: int = 4096
    word_cap: int = 12
    element_cap: int = 10_000
    measure_grid: int = 128
    battery_time_averages: int = 10
    battery_horizon: int = 100_000
    battery_burn_in: int = 1_000
    seed: int = 0


@dataclass
class PipelineFailure:
    stage: str
    diagnostics: dict
    stage_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.stage not in PIPELINE_STAGES:
            raise ValueError(f"unknown stage {self.stage}")

    @property
    def exit_code(self) -> int:
        return 10 + PIPELINE_STAGES.index(self.stage)

    def to_json(self) -> dict:
        return {
            "status": "failure",
            "stage": self.stage,
            "diagnostics": self.diagnostics,
            "stage_log": self.stage_log,
        }


@dataclass
class OrbitReport:
    points: np.ndarray
    generator_residuals: dict[str, float]
    psi_word: Word
    lift_v: tuple[int, int]
    region: FixRegion
    stage_log: list

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def max_residual(self) -> float:
        return max(self.generator_residuals.values())

    def to_json(self) -> dict:
        return {
            "status": "orbit",
            "psi_word": list(self.psi_word),
            "lift_v": list(self.lift_v),
            "region": self.region.to_json(),
            "orbit": [[float(p[0]), float(p[1])] for p in self.points],
            "residuals": {k: float(v) for k, v in self.generator_residuals.items()},
            "stage_log": self.stage_log,
        }


def classification_json(cls: McgClassification) -> dict:
    out: dict = {"kind": cls.kind}
    if cls.root is not None:
        out["root"] = cls.root.rows()
    if cls.root_word is not None:
        out["root_word"] = list(cls.root_word)
    if cls.generator_powers is not None:
        out["generator_powers"] = [list(p) for p in cls.generator_powers]
    if cls.conjugator is not None:
        out["conjugator"] = cls.conjugator.to_json()
    if cls.table is not None:
        out["table"] = [
            {"matrix": m.rows(), "word": list(w)} for m, w in cls.table
        ]
    if cls.witness_word is not None:
        out["witness_word"] = list(cls.witness_word)
        out["witness_matrix"] = cls.witness_matrix.rows()
    if cls.group_order is not None:
        out["group_order"] = cls.group_order
    if cls.note:
        out["note"] = cls.note
    return out


def _stacked_residual(lifts: Sequence[TorusMap], p: np.ndarray) -> float:
    return max(float(np.linalg.norm(m.evaluate(p) - p)) for m in lifts)


def _gauss_newton_polish(
    lifts: Sequence[TorusMap], p0: np.ndarray, tol: float, iters: int = 20
) -> np.ndarray:
    """Least-squares polish of the stacked system g_i(x) - x = 0."""
    best = p0.copy()
    best_res = _stacked_residual(lifts, best)
    cur = p0.copy()
    eye = np.eye(2)
    for _ in range(iters):
        res = np.concatenate([m.evaluate(cur) - cur for m in lifts])
        jac = np.concatenate([m.jacobian(cur) - eye for m in lifts], axis=0)
        step, *_ = np.linalg.lstsq(jac, res, rcond=None)
        cur = cur - step
        r = _stacked_residual(lifts, cur)
        if r < best_res:
            best, best_res = cur.copy(), r
        if best_res <= tol:
            break
    return best


def _close_orbit(
    group: GroupSpec, start: np.ndarray, radius: float, cap: int
) -> Optional[np.ndarray]:
    """BFS orbit closure on the torus with the given clustering radius."""
    points = [mod_torus(start)]
    queue = [0]
    while queue:
        idx = queue.pop(0)
        for m in group.maps:
            img = mod_torus(m.evaluate(points[idx]))
            if all(torus_dist(img, q) > radius for q in points):
                if len(points) >= cap:
                    return None
                points.append(img)
                queue.append(len(points) - 1)
    return np.asarray(points)


def find_finite_orbit(
    group: GroupSpec,
    battery: Optional[Sequence[EmpiricalMeasure]] = None,
    params: Optional[PipelineParams] = None,
) -> OrbitReport | PipelineFailure:
    """Run the finite-orbit construction end to end.

    Stages: classify the mapping classes; select the special element B and
    build psi from its word; bound and find psi-lift fixed points; replace
    each isotopic-to-identity generator by its least irrotational power
    (w.r.t. the battery); search a common fixed point among psi's lift fixed
    points with a stacked-system polish; close the orbit under the original
    generators. Every stage appends to the log that both outcomes carry.
    """
    params = params or PipelineParams()
    log: list = []

    # stage 1: classification and special element
    classes = group.classes()
    cls = classify_nilpotent_subgroup(
        classes, element_cap=params.element_cap, word_cap=params.word_cap
    )
    log.append({"stage": "classify", "classification": classification_json(cls)})
    if cls.kind in ("not-nilpotent", "inconclusive"):
        return PipelineFailure(
            "not-nilpotent",
            {"classification": classification_json(cls),
             "inconclusive": cls.kind == "inconclusive"},
            log,
        )
    try:
        b_mat, b_word = select_special_element(cls)
    except NoSpecialElement as exc:
        return PipelineFailure("no-special-element", {"reason": str(exc)}, log)
    psi = word_to_map(b_word, group.maps)
    assert psi.mapping_class == b_mat
    assert lefschetz_number(b_mat) != 0
    log.append({
        "stage": "special-element",
        "matrix": b_mat.rows(),
        "word": list(b_word),
        "lefschetz": lefschetz_number(b_mat),
    })

    # stage 2: fixed points of the psi lift
    region = fix_region(psi, margin=params.margin)
    search = find_torus_fixed_points(psi, region, params.grid_n, params.newton_tol)
    check = index_sum_check(search.records, b_mat)
    log.append({
        "stage": "psi-fixed-points",
        "region": region.to_json(),
        "found": len(search.records),
        "newton_failures": search.newton_failures,
        "index_sum": check.to_json(),
    })
    if not search.records:
        return PipelineFailure(
            "no-psi-fixed-point",
            {"region": region.to_json(), "newton_failures": search.newton_failures},
            log,
        )

    # stage 3: irrotational powers of the identity-class generators
    m_cap = params.m_cap
    if m_cap is None:
        m_cap = 4 * lefschetz_number(b_mat) ** 2
    id_gens = [
        (lbl, m) for lbl, m in zip(group.labels, group.maps)
        if m.mapping_class == IDENTITY
    ]
    if battery is None:
        battery = build_battery(
            [m for _, m in id_gens],
            grid_n=params.measure_grid,
            time_average_count=params.battery_time_averages,
            horizon=params.battery_horizon,
            burn_in=params.battery_burn_in,
            seed=params.seed,
        )
    normalized: list[tuple[str, TorusMap]] = []
    for lbl, m in id_gens:
        out = irrotational_power(m, battery, tol=params.rot_tol, m_cap=m_cap)
        if out is None:
            return PipelineFailure(
                "irrotational-power",
                {"generator": lbl, "m_cap": m_cap,
                 "battery": [mu.name for mu in battery]},
                log,
            )
        power, result = out
        normalized.append((lbl, result.normalized))
        log.append({
            "stage": "irrotational",
            "generator": lbl,
            "power": power,
            "lift_shift": list(result.v),
            "battery_outcome": result.to_json(),
        })

    # stage 4: common fixed point among psi's lift fixed points
    records = sorted(
        search.records,
        key=lambda r: (np.hypot(*r.lift), r.lift, r.location),
    )
    accepted_point: Optional[np.ndarray] = None
    accepted_record: Optional[FixedPointRecord] = None
    best_seen = np.inf
    for rec in records:
        lift = Compose(translation(rec.lift), psi)
        system = [m for _, m in normalized] + [lift]
        p = np.asarray(rec.location, float)
        res = _stacked_residual(system, p)
        if res > params.orbit_tol:
            p = _gauss_newton_polish(system, p, params.orbit_tol)
            res = _stacked_residual(system, p)
        best_seen = min(best_seen, res)
        if res <= params.orbit_tol:
            accepted_point, accepted_record = p, rec
            log.append({
                "stage": "common-fixed-point",
                "point": [float(p[0]), float(p[1])],
                "residual": res,
                "psi_lift_v": list(rec.lift),
            })
            break
    if accepted_point is None:
        return PipelineFailure(
            "no-common-fixed-point",
            {"candidates": len(records), "best_stacked_residual": float(best_seen),
             "tol": params.orbit_tol},
            log,
        )

    # stage 5: orbit closure under the original generators
    radius = 10 * params.orbit_tol
    points = _close_orbit(group, accepted_point, radius, params.orbit_cap)
    if points is None:
        return PipelineFailure(
            "orbit-not-closed",
            {"orbit_cap": params.orbit_cap, "cluster_radius": radius},
            log,
        )
    residuals: dict[str, float] = {}
    for lbl, m in zip(group.labels, group.maps):
        imgs = mod_torus(m.evaluate(points))
        dists = np.array([
            np.min(torus_dist(img[None, :], points)) for img in imgs
        ])
        residuals[lbl] = float(np.max(dists))
    if max(residuals.values()) > radius:
        return PipelineFailure(
            "orbit-not-closed",
            {"residuals": residuals, "cluster_radius": radius},
            log,
        )
    log.append({
        "stage": "orbit",
        "size": int(points.shape[0]),
        "residuals": {k: float(v) for k, v in residuals.items()},
    })
    return OrbitReport(
        points=points,
        generator_residuals=residuals,
        psi_word=b_word,
        lift_v=accepted_record.lift,
        region=region,
        stage_log=log,
    )
