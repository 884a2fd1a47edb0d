"""FastAPI service wrapping the analysis library.

Each handler validates its input, forwards to one library operation, and
serializes the outcome; the CLI calls the same handlers in-process. Malformed
input maps to HTTP 400, domain-level refusals (spectrum conditions, failed
screenings, divergent solves) to HTTP 422. Pipeline failures are ordinary
200 responses whose result carries the failure stage: a group without a
finite-orbit certificate is an analysis outcome, not a transport error.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import LANE_ROTATION
from ..fixedpoints import (
    OneInSpectrum,
    classification_json,
    find_finite_orbit,
    find_torus_fixed_points,
    fix_region,
    index_sum_check,
)
from ..mcg import (
    GroupStructureError,
    IntMatrix2,
    NoSpecialElement,
    classify_nilpotent_subgroup,
    lefschetz_number,
)
from ..rotation import NotIsotopicToIdentity, rotation_set_estimate
from ..surfaces import (
    AnnulusMap,
    CircleLift,
    ClassNotInteger,
    NotEquivariant,
    SeamDiscontinuity,
    WrongCount,
    circle_rotation_number,
    double_annulus,
    klein_lifts,
    mobius_reduce,
    reversing_fixed_points,
)
from ..torusmaps import (
    InputFormatError,
    NewtonDivergence,
    SingularJacobian,
    parse_group,
    parse_map,
)
from .schemas import (
    AnnulusRequest,
    CircleRequest,
    ClassifyRequest,
    GroupRequest,
    KleinRequest,
    LefschetzRequest,
    MapRequest,
    MobiusRequest,
    Report,
    envelope,
)

DOMAIN_ERRORS = (
    OneInSpectrum,
    NoSpecialElement,
    GroupStructureError,
    NotIsotopicToIdentity,
    NewtonDivergence,
    SingularJacobian,
    NotEquivariant,
    SeamDiscontinuity,
    ClassNotInteger,
    WrongCount,
)


def _parse_matrix(rows) -> IntMatrix2:
    try:
        return IntMatrix2.from_rows(rows)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"bad matrix {rows!r}: {exc}") from exc


# ------------------------------------------------------------- handlers


def classify_result(req: ClassifyRequest) -> dict:
    if not req.matrices:
        raise InputFormatError("at least one generator matrix is required")
    gens = [_parse_matrix(rows) for rows in req.matrices]
    cls = classify_nilpotent_subgroup(
        gens, element_cap=req.config.element_cap, word_cap=req.config.word_cap
    )
    return {"classification": classification_json(cls)}


def lefschetz_result(req: LefschetzRequest) -> dict:
    m = _parse_matrix(req.matrix)
    value = lefschetz_number(m)
    return {
        "matrix": m.rows(),
        "lefschetz": value,
        "one_in_spectrum": value == 0,
    }


def rotation_set_result(req: MapRequest) -> dict:
    tmap = parse_map(req.map)
    est = rotation_set_estimate(
        tmap,
        grid_n=req.config.grid_n,
        n=req.config.birkhoff_n,
        seed=req.config.stream_seed(LANE_ROTATION),
    )
    return est.to_json()


def fixed_points_result(req: MapRequest) -> dict:
    tmap = parse_map(req.map)
    region = fix_region(tmap)
    search = find_torus_fixed_points(
        tmap, region, grid_n=req.config.grid_n, tol=req.config.newton_tol
    )
    return {
        "region": region.to_json(),
        "search": search.to_json(),
        "index_sum": index_sum_check(search.records, tmap.mapping_class).to_json(),
    }


def finite_orbit_result(req: GroupRequest) -> dict:
    group = parse_group(req.group)
    out = find_finite_orbit(group, battery=None, params=req.config.pipeline_params())
    return out.to_json()


def verify_result(req: GroupRequest) -> dict:
    group = parse_group(req.group)
    screening = {
        lbl: chk.to_json()
        for lbl, chk in group.validate(max(req.config.grid_n, 16)).items()
    }
    out = find_finite_orbit(group, battery=None, params=req.config.pipeline_params())
    blob = out.to_json()
    stages = {entry["stage"]: entry for entry in blob["stage_log"]}
    result = {
        "status": blob["status"],
        "screening": screening,
        "classification": stages.get("classify", {}).get("classification"),
        "special_element": stages.get("special-element"),
        "psi_fixed_points": stages.get("psi-fixed-points"),
        "report": blob,
    }
    return result


def circle_result(req: CircleRequest) -> dict:
    lift = CircleLift.from_json(req.lift)
    if req.op == "rotation-number":
        n = req.n if req.n is not None else req.config.birkhoff_n
        value = circle_rotation_number(lift, req.x0, n)
        return {"op": req.op, "x0": req.x0, "n": n, "rotation_number": value}
    p, q = reversing_fixed_points(lift, tol=req.config.newton_tol)
    return {"op": req.op, "fixed_points": [p, q]}


def double_annulus_result(req: AnnulusRequest) -> dict:
    amap = AnnulusMap.from_json(req.annulus)
    doubled = double_annulus(amap)
    cls = doubled.mapping_class
    return {
        "class": cls.rows(),
        "lefschetz": lefschetz_number(cls),
        "seam_mismatch": amap.seam_mismatch(),
        "displacement_bound": doubled.disp_bound,
        "boundary": amap.boundary,
    }


def klein_result(req: KleinRequest) -> dict:
    tmap = parse_map(req.map)
    pair = klein_lifts(
        tmap,
        check_tol=req.config.orbit_tol,
        declared_lefschetz=req.declared_lefschetz,
    )
    return pair.to_json()


def mobius_result(req: MobiusRequest) -> dict:
    amap = AnnulusMap.from_json(req.annulus)
    report = mobius_reduce(
        amap,
        tol=req.config.orbit_tol,
        battery=None,
        params=req.config.pipeline_params(),
    )
    return report.to_json()


HANDLERS = {
    "classify": (ClassifyRequest, classify_result, "/classify"),
    "lefschetz": (LefschetzRequest, lefschetz_result, "/lefschetz"),
    "rotation-set": (MapRequest, rotation_set_result, "/rotation-set"),
    "fixed-points": (MapRequest, fixed_points_result, "/fixed-points"),
    "finite-orbit": (GroupRequest, finite_orbit_result, "/finite-orbit"),
    "verify": (GroupRequest, verify_result, "/verify"),
    "circle": (CircleRequest, circle_result, "/circle"),
    "double-annulus": (AnnulusRequest, double_annulus_result, "/double-annulus"),
    "klein": (KleinRequest, klein_result, "/klein"),
    "mobius": (MobiusRequest, mobius_result, "/mobius"),
}


# ----------------------------------------------------------------- routes


app = FastAPI(title="torusorbits", version=__version__)


def _run(handler, req) -> Report:
    try:
        return envelope(req.config, handler(req))
    except InputFormatError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except DOMAIN_ERRORS + (ValueError,) as exc:
        raise HTTPException(
            status_code=422,
            detail={"error": type(exc).__name__, "message": str(exc)},
        ) from exc


@app.get("/")
def index():
    return {
        "service": "torusorbits",
        "version": __version__,
        "endpoints": sorted(path for _, _, path in HANDLERS.values()),
    }


@app.post("/classify", response_model=Report)
def post_classify(req: ClassifyRequest):
    return _run(classify_result, req)


@app.post("/lefschetz", response_model=Report)
def post_lefschetz(req: LefschetzRequest):
    return _run(lefschetz_result, req)


@app.post("/rotation-set", response_model=Report)
def post_rotation_set(req: MapRequest):
    return _run(rotation_set_result, req)


@app.post("/fixed-points", response_model=Report)
def post_fixed_points(req: MapRequest):
    return _run(fixed_points_result, req)


@app.post("/finite-orbit", response_model=Report)
def post_finite_orbit(req: GroupRequest):
    return _run(finite_orbit_result, req)


@app.post("/verify", response_model=Report)
def post_verify(req: GroupRequest):
    return _run(verify_result, req)


@app.post("/circle", response_model=Report)
def post_circle(req: CircleRequest):
    return _run(circle_result, req)


@app.post("/double-annulus", response_model=Report)
def post_double_annulus(req: AnnulusRequest):
    return _run(double_annulus_result, req)


@app.post("/klein", response_model=Report)
def post_klein(req: KleinRequest):
    return _run(klein_result, req)


@app.post("/mobius", response_model=Report)
def post_mobius(req: MobiusRequest):
    return _run(mobius_result, req)
