"""Command-line interface.

Exit codes: 0 success or certified, 1 refuted, 2 usage error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from chshcert import bounds
from chshcert.bounds import EpsilonObjective, ReducedPoint
from chshcert.certifier import (
    DEFAULT_MAX_DEPTH,
    CertificateReport,
    ConfigMismatchError,
    CheckpointFormatError,
    Status,
    certify,
    load_checkpoint,
    problem_from_config,
    resume,
)
from chshcert.chsh_model import (
    REFERENCE_PARAMS,
    StateFamilyParams,
    Strategy,
    chsh_score,
    oracle_fidelity,
    reduce_strategy,
)
from chshcert.qubit_algebra import InvalidParameterError
from chshcert.threshold_search import (
    MaximizerConfig,
    ScanConfig,
    reference_problem,
    scan,
    threshold_candidate,
)

REPORT_SCHEMA = "chshcert.report"
REPORT_VERSION = 1

EXIT_OK, EXIT_REFUTED, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
_EXIT_FOR_STATUS = {Status.CERTIFIED: EXIT_OK, Status.REFUTED: EXIT_REFUTED, Status.BUDGET_EXCEEDED: EXIT_BUDGET}

BRANCHES = {"plus": 1, "minus": -1, "both": 0}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Parsed command parameters, echoed into every report."""

    command: str
    params: dict
    seed: int
    workers: int
    out: Optional[str]
    format: str

    def echo(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "workers": self.workers, "out": self.out, "format": self.format}

    def digest(self) -> str:
        text = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# Reports -------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, Status):
        return v.value
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def make_report(run: RunConfig, verdict: str, results: dict, timestamps: Optional[dict] = None) -> dict:
    report = {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "config": run.echo(),
        "config_hash": run.digest(),
        "verdict": verdict,
        "results": results,
    }
    if timestamps:
        report["timestamps"] = timestamps
    return _jsonable(report)


def _human(report: dict) -> str:
    rows = [("verdict", report.get("verdict"))]

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else k, x)
        elif isinstance(v, list) and len(v) > 12:
            rows.append((prefix, f"[{len(v)} entries]"))
        else:
            rows.append((prefix, v))

    walk("", report.get("results", {}))
    rows.append(("command", report["config"]["command"]))
    rows.append(("config_hash", report["config_hash"][:16]))
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def render_report(report: dict, fmt: str) -> str:
    if fmt == "structured":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    if fmt == "human":
        return _human(report)
    raise UsageError(f"unknown format {fmt!r}")


def parse_report(text: str) -> dict:
    data = json.loads(text)
    if data.get("schema") != REPORT_SCHEMA or "schema_version" not in data:
        raise ValueError("not a report document")
    return data


def emit_report(report: dict, fmt: str, path: Optional[str] = None, stream=None) -> None:
    """Write the rendered report to ``path`` if given, else to ``stream`` (stdout)."""
    text = render_report(report, fmt)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)


def certificate_results(r: CertificateReport) -> dict:
    return {
        "status": r.status.value,
        "boxes_processed": r.boxes_processed,
        "max_center_value": r.max_center_value,
        "argmax": r.argmax,
        "witness": r.witness,
        "witness_value": r.witness_value,
        "frontier_size": r.frontier_size,
        "rounds": r.rounds,
        "evaluated_by_depth": r.evaluated_by_depth,
        "eliminated_by_depth": r.eliminated_by_depth,
        "excluded_by_depth": r.excluded_by_depth,
        "problem": r.config,
        "problem_hash": r.config_hash,
    }


# Subcommands -----------------------------------------------------------------------

def _params(a) -> StateFamilyParams:
    return StateFamilyParams(a.nu, a.pc, a.q)


def cmd_score(a):
    s = chsh_score(a.nu)
    return EXIT_OK, "ok", {"nu": a.nu, "chsh": s, "comparison_fidelity": bounds.comparison_fidelity_bound(s)}


def cmd_eval(a):
    p = _params(a)
    x = ReducedPoint.from_array(a.point)
    b = BRANCHES[a.branch]
    residual = bounds.residual_cube_certificate(p)
    res = {
        "point": x.as_array(),
        "epsilon": bounds.epsilon_rho(x, p, b),
        "epsilon_plus": bounds.epsilon_rho(x, p, 1),
        "epsilon_minus": bounds.epsilon_rho(x, p, -1),
        "gradient": bounds.grad_epsilon_rho(x, p, b),
        "fidelity_bound": 0.25 * (1 + bounds.epsilon_rho(x, p, b)),
        "iota_sup": {r: bounds.iota_sup(p, r) for r in bounds.LIPSCHITZ_READINGS},
        "lambda_max_T": residual.lambda_max,
        "residual_valid": residual.valid,
        "chsh": chsh_score(p.nu),
    }
    return EXIT_OK, "ok", res


def cmd_oracle(a):
    p = _params(a)
    rng = np.random.default_rng(a.seed)
    worst, violations = -math.inf, 0
    for _ in range(a.samples):
        strat = Strategy.random(rng)
        x, _branch = reduce_strategy(strat)
        gap = 4 * oracle_fidelity(p, strat) - 1 - bounds.epsilon_rho(x, p, 0)
        worst = max(worst, gap)
        violations += gap > a.tolerance
    verdict = "ok" if violations == 0 else "violated"
    return (EXIT_OK if violations == 0 else EXIT_REFUTED), verdict, {
        "samples": a.samples, "violations": violations, "max_gap": worst, "tolerance": a.tolerance,
    }


def _progress(state):
    logging.getLogger("chshcert").info(
        "round %d: %d boxes, pending chunks %d, max %r", state.rounds, state.boxes, len(state.stack), state.fmax
    )


def _certify_common(a, problem):
    r = certify(problem, workers=a.workers, checkpoint_path=a.checkpoint,
                checkpoint_interval=a.checkpoint_interval, progress=_progress if a.verbose else None)
    return r


def cmd_certify(a):
    p = _params(a)
    problem = reference_problem(
        p, branch=BRANCHES[a.branch], threshold=a.threshold, lipschitz_reading=a.lipschitz,
        lower=a.lower, upper=a.upper, initial_delta=a.delta0, max_depth=a.max_depth,
        budget=a.budget, fp_margin=a.fp_margin,
    )
    r = _certify_common(a, problem)
    res = certificate_results(r)
    res["lambda_max_T"] = bounds.residual_cube_certificate(p).lambda_max
    res["iota_sup"] = problem.lipschitz
    return _EXIT_FOR_STATUS[r.status], r.status.value, res


def cmd_resume(a):
    data = load_checkpoint(a.checkpoint)
    meta = data["config"]["meta"]
    if meta.get("kind") != "epsilon_rho":
        raise UsageError("checkpoint does not describe a bound certification")
    obj = EpsilonObjective(meta["nu"], meta["p_C"], meta["branch"])
    problem = problem_from_config(data["config"], obj, max_depth=a.max_depth, budget=a.budget)
    r = resume(data, problem, workers=a.workers, checkpoint_path=a.checkpoint,
               checkpoint_interval=a.checkpoint_interval, progress=_progress if a.verbose else None)
    return _EXIT_FOR_STATUS[r.status], r.status.value, certificate_results(r)


def cmd_scan(a):
    cfg = ScanConfig(
        nu_start=a.nu_start, nu_end=a.nu_end, nu_step=a.nu_step, pc_tolerance=a.pc_tol, pc_grid=a.pc_grid,
        maximizer=MaximizerConfig(grid_points=a.grid_points, seed=a.seed), certify_budget=a.certify_budget,
        workers=a.workers,
    )
    rows = scan(cfg)
    if a.csv:
        write_scan_csv(rows, a.csv)
    cand = threshold_candidate(rows)
    res = {
        "rows": [{"nu": r.nu, "best_pc": r.best_pc, "eps_max": r.eps_max, "chsh": r.chsh, "certified": r.certified}
                 for r in rows],
        "candidate_nu": None if cand is None else cand.nu,
        "candidate_chsh": None if cand is None else cand.chsh,
    }
    return EXIT_OK, "ok", res


def write_scan_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(scan_csv(rows))


def scan_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nu", "best_pc", "eps_max", "chsh", "certified"])
    for r in rows:
        w.writerow([repr(float(r.nu)), repr(float(r.best_pc)), repr(float(r.eps_max)), repr(float(r.chsh)),
                    str(bool(r.certified)).lower()])
    return buf.getvalue()


def cmd_repro(a):
    a.nu, a.pc, a.q, a.branch = REFERENCE_PARAMS.nu, REFERENCE_PARAMS.p_C, REFERENCE_PARAMS.q, "both"
    a.lower, a.upper = list(bounds.DOMAIN_LOWER), list(bounds.DOMAIN_UPPER)
    code, verdict, res = cmd_certify(a)
    valid = res["lambda_max_T"] < 0
    if verdict == Status.CERTIFIED.value and not valid:
        verdict, code = Status.BUDGET_EXCEEDED.value, EXIT_BUDGET
    res["residual_valid"] = valid
    res["chsh"] = chsh_score(REFERENCE_PARAMS.nu)
    res["statement"] = "extractability <= 1/2" if verdict == Status.CERTIFIED.value else "not established"
    return code, verdict, res


# Parser ------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("human", "structured"), default="human")
    p.add_argument("--out", default=None, help="write the report to this file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timestamps", action="store_true", help="add wall-clock times to the report")
    p.add_argument("-v", "--verbose", action="store_true")


def _state_flags(p):
    p.add_argument("--nu", type=float, default=REFERENCE_PARAMS.nu)
    p.add_argument("--pc", type=float, default=REFERENCE_PARAMS.p_C)
    p.add_argument("--q", type=float, default=REFERENCE_PARAMS.q)
    p.add_argument("--branch", choices=tuple(BRANCHES), default="both")


def _run_flags(p, with_problem=True):
    p.add_argument("--budget", type=int, default=10**9)
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--checkpoint-interval", type=float, default=60.0)
    if with_problem:
        p.add_argument("--threshold", type=float, default=1.0)
        p.add_argument("--delta0", type=float, default=bounds.EXCLUDED_EDGE)
        p.add_argument("--fp-margin", type=float, default=1e-9)
        p.add_argument("--lipschitz", choices=bounds.LIPSCHITZ_READINGS, default="printed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chshcert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="CHSH score of the state family")
    p.add_argument("--nu", type=float, default=REFERENCE_PARAMS.nu)
    _common(p)

    p = sub.add_parser("eval", help="evaluate the bound at a reduced point")
    _state_flags(p)
    p.add_argument("--point", type=float, nargs=5, default=list(bounds.X_EXC),
                   metavar=("A0", "A1", "B0", "B1", "THETA"))
    _common(p)

    p = sub.add_parser("oracle", help="compare exact fidelities of random strategies with the bound")
    _state_flags(p)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--tolerance", type=float, default=1e-9)
    _common(p)

    p = sub.add_parser("certify", help="branch-and-bound certification of the bound")
    _state_flags(p)
    _run_flags(p)
    p.add_argument("--lower", type=float, nargs=5, default=list(bounds.DOMAIN_LOWER))
    p.add_argument("--upper", type=float, nargs=5, default=list(bounds.DOMAIN_UPPER))
    _common(p)

    p = sub.add_parser("resume", help="continue a certification from its checkpoint")
    _run_flags(p, with_problem=False)
    _common(p)

    p = sub.add_parser("scan", help="scan nu and optimize p_C")
    p.add_argument("--nu-start", type=float, default=0.0)
    p.add_argument("--nu-end", type=float, default=0.1)
    p.add_argument("--nu-step", type=float, default=0.001)
    p.add_argument("--pc-tol", type=float, default=1e-6)
    p.add_argument("--pc-grid", type=int, default=100)
    p.add_argument("--grid-points", type=int, default=9)
    p.add_argument("--certify-budget", type=int, default=0)
    p.add_argument("--csv", default=None, help="write scan rows as CSV")
    _common(p)

    p = sub.add_parser("repro", help="certify the reference example on the full domain")
    _run_flags(p)
    _common(p)
    return parser


COMMANDS = {
    "score": cmd_score, "eval": cmd_eval, "oracle": cmd_oracle, "certify": cmd_certify,
    "resume": cmd_resume, "scan": cmd_scan, "repro": cmd_repro,
}

_NOT_ECHOED = {"command", "format", "out", "seed", "workers", "timestamps", "verbose", "checkpoint_interval"}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if a.verbose:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if a.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    run = RunConfig(
        command=a.command,
        params={k: v for k, v in sorted(vars(a).items()) if k not in _NOT_ECHOED},
        seed=a.seed, workers=a.workers, out=a.out, format=a.format,
    )
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        code, verdict, results = COMMANDS[a.command](a)
    except (InvalidParameterError, UsageError, ConfigMismatchError, CheckpointFormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    stamps = None
    if a.timestamps:
        stamps = {"started": started, "finished": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    report = make_report(run, verdict, results, stamps)
    try:
        emit_report(report, a.format, a.out)
    except OSError as e:
        print(f"error: cannot write report: {e}", file=sys.stderr)
        return EXIT_USAGE
    return code


def main() -> None:
    sys.exit(dispatch())
