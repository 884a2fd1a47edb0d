"""Batch CLI: a thin client of the analysis service.

Each subcommand reads a JSON input file, builds the corresponding request,
dispatches it (in-process by default, or to a running server with --server),
and writes the report. Exit codes: 0 success, 2 malformed input, 3
inconclusive classification, 4 domain error (precondition or solver
refusal), 10 + stage index for finite-orbit pipeline failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional

from .config import RunConfig
from .fixedpoints import PIPELINE_STAGES
from .service.app import DOMAIN_ERRORS, HANDLERS
from .service.schemas import envelope
from .torusmaps import InputFormatError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3
EXIT_DOMAIN = 4


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path} is not valid JSON: {exc}") from exc


def _load_config(args) -> RunConfig:
    if args.config:
        blob = _load_json(args.config)
        try:
            config = RunConfig(**blob)
        except Exception as exc:
            raise InputFormatError(f"bad config {args.config}: {exc}") from exc
    else:
        config = RunConfig()
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _build_request(command: str, args, config: RunConfig):
    model, _, _ = HANDLERS[command]
    data = _load_json(args.input)
    fields: dict = {"config": config}
    if command == "classify":
        if isinstance(data, dict) and "matrices" in data:
            fields["matrices"] = data["matrices"]
        else:
            fields["matrices"] = data
    elif command == "lefschetz":
        if isinstance(data, dict) and "matrix" in data:
            fields["matrix"] = data["matrix"]
        else:
            fields["matrix"] = data
    elif command in ("rotation-set", "fixed-points", "klein"):
        fields["map"] = data
        if command == "klein" and args.declared_lefschetz is not None:
            fields["declared_lefschetz"] = args.declared_lefschetz
    elif command in ("finite-orbit", "verify"):
        fields["group"] = data
    elif command == "circle":
        fields["lift"] = data
        fields["op"] = args.op
        fields["x0"] = args.x0
        if args.n is not None:
            fields["n"] = args.n
    elif command == "double-annulus":
        fields["annulus"] = data
    else:
        raise InputFormatError(f"unknown command {command}")
    try:
        return model(**fields)
    except Exception as exc:
        raise InputFormatError(f"bad request: {exc}") from exc


def _dispatch(command: str, request, server: Optional[str]) -> dict:
    _, handler, path = HANDLERS[command]
    if server is None:
        result = handler(request)
        return envelope(request.config, result).model_dump(mode="json")
    import httpx

    resp = httpx.post(server.rstrip("/") + path,
                      json=request.model_dump(mode="json"), timeout=600.0)
    if resp.status_code == 400:
        raise InputFormatError(str(resp.json().get("detail")))
    if resp.status_code == 422:
        detail = resp.json().get("detail")
        raise RuntimeError(f"domain error from server: {detail}")
    resp.raise_for_status()
    return resp.json()


def _to_csv(command: str, payload: dict) -> str:
    if command != "rotation-set":
        raise InputFormatError(f"--format csv is not defined for {command}")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x0x", "x0y", "n", "rx", "ry"])
    for row in payload["result"]["samples"]:
        writer.writerow([row["x0"][0], row["x0"][1], row["n"],
                         row["average"][0], row["average"][1]])
    return buf.getvalue()


def _exit_code(command: str, payload: dict) -> int:
    result = payload.get("result", {})
    if command == "classify":
        kind = result.get("classification", {}).get("kind")
        return EXIT_INCONCLUSIVE if kind == "inconclusive" else EXIT_OK
    if command in ("finite-orbit", "verify"):
        if result.get("status") == "failure":
            stage = result.get("stage") or result.get("report", {}).get("stage")
            return 10 + PIPELINE_STAGES.index(stage)
        return EXIT_OK
    return EXIT_OK


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusorbits",
        description="Finite-orbit analysis of groups acting on the torus",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="input JSON file")
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--seed", type=int, default=None, help="override the seed")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--server", help="base URL of a running service")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common],
                   help="classify generator mapping classes")
    sub.add_parser("lefschetz", parents=[common],
                   help="Lefschetz number of a mapping class")
    sub.add_parser("rotation-set", parents=[common],
                   help="Birkhoff averages and their hull")
    sub.add_parser("fixed-points", parents=[common],
                   help="torus fixed points of a lift")
    sub.add_parser("finite-orbit", parents=[common],
                   help="run the finite-orbit pipeline")
    sub.add_parser("verify", parents=[common],
                   help="full report: screening, classification, pipeline")
    circle = sub.add_parser("circle", parents=[common], help="circle-map analyses")
    circle.add_argument("--op", choices=("rotation-number", "fixed-points"),
                        default="rotation-number")
    circle.add_argument("--x0", type=float, default=0.0)
    circle.add_argument("--n", type=int, default=None)
    sub.add_parser("double-annulus", parents=[common],
                   help="double an annulus map over the torus")
    klein = sub.add_parser("klein", parents=[common],
                           help="Klein-bottle lift pair of an equivariant map")
    klein.add_argument("--declared-lefschetz", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        request = _build_request(args.command, args, config)
        payload = _dispatch(args.command, request, args.server)
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DOMAIN_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, RuntimeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    if args.format == "csv":
        try:
            text = _to_csv(args.command, payload)
        except InputFormatError as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _write(text, args.out)
    return _exit_code(args.command, payload)


if __name__ == "__main__":
    sys.exit(main())
