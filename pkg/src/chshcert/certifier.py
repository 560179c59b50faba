"""Lipschitz branch and bound: prove ``f <= threshold`` on a box.

A box with center ``c`` and half edge ``h`` is eliminated once
``f(c) + sqrt(n) h L <= threshold - fp_margin``; otherwise it is split into
its ``2^n`` half-size children. Boxes live on a dyadic integer lattice: at
depth ``d`` a box is an integer index vector ``k`` with lower corner
``lower + k * step / 2^d``. Children of ``k`` are ``2k + e`` for
``e in {0, 1}^n``, so the tiling is exact and checkpoints are bit-exact.

Work is scheduled in rounds of a fixed number of tasks. Each task runs a
depth-first search from one chunk of boxes up to a fixed box budget and hands
back what is left. The schedule does not depend on the number of workers, so
reports are identical for any pool size.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
import logging
import math
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = "chshcert.checkpoint"
CHECKPOINT_VERSION = 1
DEFAULT_BUDGET = 10**9
DEFAULT_MAX_DEPTH = 40

# Boxes sticking out of an exclusion by less than this fraction of their
# edge still count as inside; this only absorbs rounding of lattice corners.
_EXCLUSION_SLACK = 1e-9


class Status(str, Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted-at-point"
    BUDGET_EXCEEDED = "budget-exceeded"


class ConfigMismatchError(ValueError):
    """A checkpoint was produced by a different problem configuration."""


class CheckpointFormatError(ValueError):
    """A checkpoint file is not readable by this version."""


# Box geometry -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HyperBox:
    center: np.ndarray
    half_edge: float
    depth: int = 0

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.half_edge > 0:
            raise ValueError("half_edge must be positive")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_edge

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_edge

    @property
    def volume(self) -> float:
        return float((2 * self.half_edge) ** self.n)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


def box_upper_bound(f_center: float, half_edge: float, n: int, lipschitz: float) -> float:
    """Largest value a function with gradient norm <= lipschitz can take on the box."""
    return f_center + math.sqrt(n) * half_edge * lipschitz


def min_grid_step(gap: float, lipschitz: float, n: int) -> float:
    """Edge length at which every box whose center sits ``gap`` below the threshold is eliminated."""
    if gap <= 0 or lipschitz <= 0 or n <= 0:
        raise ValueError("gap, lipschitz and n must be positive")
    return 2 * gap / (lipschitz * math.sqrt(n))


def subdivide(b: HyperBox) -> list[HyperBox]:
    h = b.half_edge / 2
    return [
        HyperBox(b.center + h * np.array(signs), h, b.depth + 1)
        for signs in itertools.product((-1.0, 1.0), repeat=b.n)
    ]


# Problem ------------------------------------------------------------------------

def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]


@dataclass(frozen=True, eq=False)
class CertProblem:
    """Prove ``objective(x) <= threshold`` for ``x`` in ``[lower, upper]`` minus exclusions.

    ``objective`` maps an ``(m, n)`` array of points to ``m`` values. Set
    ``vectorized=False`` for a scalar function of one point. ``initial_delta``
    is an upper bound on the edge of the initial grid; the actual step is the
    largest value dividing every axis into whole cells. ``budget`` caps the
    cumulative number of evaluated boxes.
    """

    objective: Callable
    lower: Sequence[float]
    upper: Sequence[float]
    lipschitz: float
    threshold: float
    exclusions: Sequence = ()
    fp_margin: float = 1e-9
    initial_delta: Optional[float] = None
    max_depth: int = DEFAULT_MAX_DEPTH
    budget: int = DEFAULT_BUDGET
    vectorized: bool = True
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0 or not np.all(hi > lo):
            raise ValueError("domain needs matching bounds with upper > lower")
        if not (self.lipschitz >= 0 and math.isfinite(self.lipschitz)):
            raise ValueError("lipschitz must be a finite nonnegative number")
        if not self.fp_margin >= 0:
            raise ValueError("fp_margin must be nonnegative")
        if self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.initial_delta is not None and not self.initial_delta > 0:
            raise ValueError("initial_delta must be positive")
        excl = []
        for e in self.exclusions:
            elo, ehi = (np.array(v, dtype=float).reshape(-1) for v in e)
            if elo.shape != lo.shape or ehi.shape != lo.shape or np.any(ehi < elo):
                raise ValueError("exclusion boxes must match the domain dimension")
            excl.append((elo, ehi))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "exclusions", tuple(excl))
        object.__setattr__(self, "meta", dict(self.meta))
        # Initial grid: one step for all axes, dividing each axis exactly.
        lengths = hi - lo
        shortest = float(lengths.min())
        delta = shortest if self.initial_delta is None else min(self.initial_delta, shortest)
        step = shortest / math.ceil(shortest / delta - 1e-9)
        counts = np.rint(lengths / step).astype(np.int64)
        if np.any(np.abs(counts * step - lengths) > 1e-9 * lengths):
            raise ValueError("grid step must divide every axis length")
        object.__setattr__(self, "_step", step)
        object.__setattr__(self, "_counts", counts)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def step(self) -> float:
        return self._step

    @property
    def grid_counts(self) -> np.ndarray:
        return self._counts.copy()

    @property
    def grid_size(self) -> int:
        return int(np.prod(self._counts))

    def config(self) -> dict:
        """The configuration covered by the hash; budget and depth cap are excluded."""
        return {
            "label": self.label,
            "meta": self.meta,
            "n": self.n,
            "lower": _floats(self.lower),
            "upper": _floats(self.upper),
            "lipschitz": float(self.lipschitz),
            "threshold": float(self.threshold),
            "fp_margin": float(self.fp_margin),
            "exclusions": [[_floats(a), _floats(b)] for a, b in self.exclusions],
            "initial_step": float(self.step),
            "grid_counts": [int(c) for c in self._counts],
        }

    def config_hash(self) -> str:
        text = json.dumps(self.config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class EngineSettings:
    """Scheduling knobs. They shape the work order but never the verdict."""

    chunk_size: int = 4096
    task_budget: int = 1 << 18
    tasks_per_round: int = 16

    def __post_init__(self):
        if min(self.chunk_size, self.task_budget, self.tasks_per_round) < 1:
            raise ValueError("engine settings must be positive")


# Work items: ("grid", start, stop) is a range of flat initial-grid indices,
# ("boxes", depth, index_array) is an explicit chunk of lattice boxes, and
# ("split", depth, index_array) holds boxes already evaluated but not
# eliminated, parked at the depth cap; they resume by subdivision.

@dataclass(frozen=True)
class _Core:
    objective: Callable
    vectorized: bool
    lower: np.ndarray
    step: float
    counts: np.ndarray
    lipschitz: float
    limit: float
    excl_lo: np.ndarray
    excl_hi: np.ndarray
    max_depth: int
    chunk_size: int

    @classmethod
    def build(cls, p: CertProblem, s: EngineSettings) -> "_Core":
        n = p.n
        elo = np.array([e[0] for e in p.exclusions]).reshape(-1, n)
        ehi = np.array([e[1] for e in p.exclusions]).reshape(-1, n)
        return cls(
            p.objective, p.vectorized, p.lower, p.step, p._counts, float(p.lipschitz),
            float(p.threshold - p.fp_margin), elo, ehi, p.max_depth, s.chunk_size,
        )

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        if self.vectorized:
            f = np.asarray(self.objective(x), dtype=float).reshape(-1)
        else:
            f = np.array([float(self.objective(row)) for row in x])
        if f.shape != (x.shape[0],):
            raise ValueError("objective must return one value per point")
        return f

    def materialize(self, item) -> tuple[int, np.ndarray]:
        if item[0] == "grid":
            flat = np.arange(item[1], item[2], dtype=np.int64)
            return 0, np.stack(np.unravel_index(flat, tuple(self.counts)), axis=1).astype(np.int64)
        return item[1], item[2]

    def fully_excluded(self, depth: int, idx: np.ndarray) -> np.ndarray:
        out = np.zeros(idx.shape[0], dtype=bool)
        if not len(self.excl_lo):
            return out
        s = self.step / 2**depth
        lo = self.lower + idx * s
        hi = self.lower + (idx + 1) * s
        tol = _EXCLUSION_SLACK * s
        for elo, ehi in zip(self.excl_lo, self.excl_hi):
            out |= np.all(lo >= elo - tol, axis=1) & np.all(hi <= ehi + tol, axis=1)
        return out

    def centers_excluded(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(c.shape[0], dtype=bool)
        for elo, ehi in zip(self.excl_lo, self.excl_hi):
            out |= np.all(c >= elo, axis=1) & np.all(c <= ehi, axis=1)
        return out

    def centers(self, depth: int, idx: np.ndarray) -> np.ndarray:
        s = self.step / 2**depth
        return self.lower + (idx + 0.5) * s


@dataclass
class _TaskResult:
    boxes: int
    evaluated: np.ndarray
    eliminated: np.ndarray
    excluded: np.ndarray
    fmax: float
    argmax: Optional[np.ndarray]
    witness: Optional[np.ndarray]
    witness_value: Optional[float]
    leftovers: list
    unresolved: list


def _push_children(core: _Core, stack: list, excluded: np.ndarray, offsets: np.ndarray, depth: int, idx: np.ndarray):
    kids = (2 * idx[:, None, :] + offsets[None]).reshape(-1, idx.shape[1])
    if len(core.excl_lo):
        drop = core.fully_excluded(depth + 1, kids)
        excluded[depth + 1] += int(drop.sum())
        kids = kids[~drop]
    chunks = [kids[i : i + core.chunk_size] for i in range(0, kids.shape[0], core.chunk_size)]
    stack.extend(("boxes", depth + 1, ch) for ch in reversed(chunks))


def _run_task(core: _Core, item, task_budget: int) -> _TaskResult:
    n = core.lower.size
    depths = core.max_depth + 2
    evaluated = np.zeros(depths, dtype=np.int64)
    eliminated = np.zeros(depths, dtype=np.int64)
    excluded = np.zeros(depths, dtype=np.int64)
    offsets = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    root_n = math.sqrt(n)
    fmax, argmax = -math.inf, None
    unresolved = []
    stack = [item]
    boxes = 0
    while stack and boxes < task_budget:
        item = stack.pop()
        depth, idx = core.materialize(item)
        if item[0] == "split":
            _push_children(core, stack, excluded, offsets, depth, idx)
            continue
        if depth == 0 and len(core.excl_lo):
            drop = core.fully_excluded(0, idx)
            excluded[0] += int(drop.sum())
            idx = idx[~drop]
        if idx.shape[0] == 0:
            continue
        c = core.centers(depth, idx)
        f = core.evaluate(c)
        boxes += idx.shape[0]
        evaluated[depth] += idx.shape[0]
        if np.any(f > fmax):
            j = int(np.nanargmax(f))
            fmax, argmax = float(f[j]), c[j].copy()
        bad = f > core.limit
        if np.any(bad):
            bad &= ~core.centers_excluded(c)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[np.argmax(f[bad])])
            return _TaskResult(boxes, evaluated, eliminated, excluded, fmax, argmax, c[j].copy(), float(f[j]), [], unresolved)
        half = core.step / 2 ** (depth + 1)
        keep = ~(f + root_n * half * core.lipschitz <= core.limit)
        eliminated[depth] += int(idx.shape[0] - keep.sum())
        surv = idx[keep]
        if surv.shape[0] == 0:
            continue
        if depth >= core.max_depth:
            unresolved.append(("split", depth, surv))
            continue
        _push_children(core, stack, excluded, offsets, depth, surv)
    return _TaskResult(boxes, evaluated, eliminated, excluded, fmax, argmax, None, None, stack, unresolved)


# Report -------------------------------------------------------------------------

@dataclass(eq=False)
class CertificateReport:
    status: Status
    boxes_processed: int
    max_center_value: float
    witness: Optional[np.ndarray]
    witness_value: Optional[float]
    argmax: Optional[np.ndarray]
    config: dict
    config_hash: str
    evaluated_by_depth: list
    eliminated_by_depth: list
    excluded_by_depth: list
    rounds: int
    elapsed_seconds: float
    pending: list = field(default_factory=list, repr=False)
    unresolved: list = field(default_factory=list, repr=False)
    _lattice: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return self.status == Status.CERTIFIED

    def _boxes(self, items) -> Iterator[HyperBox]:
        lower, step, counts = self._lattice
        for item in items:
            if item[0] == "grid":
                flat = np.arange(item[1], item[2], dtype=np.int64)
                depth, idx = 0, np.stack(np.unravel_index(flat, tuple(counts)), axis=1)
            else:
                depth, idx = item[1], item[2]
            s = step / 2**depth
            for row in idx:
                yield HyperBox(lower + (row + 0.5) * s, s / 2, depth)

    def iter_frontier(self) -> Iterator[HyperBox]:
        yield from self._boxes(self.pending)
        yield from self._boxes(self.unresolved)

    @property
    def frontier(self) -> list[HyperBox]:
        return list(self.iter_frontier())

    @property
    def frontier_size(self) -> int:
        return sum(_item_len(i) for i in itertools.chain(self.pending, self.unresolved))

    def covered_cells(self) -> float:
        """Resolved plus pending volume, in units of initial grid cells."""
        n = len(self._lattice[0])
        total = 0.0
        pairs = itertools.zip_longest(self.eliminated_by_depth, self.excluded_by_depth, fillvalue=0)
        for d, (e, x) in enumerate(pairs):
            total += (e + x) / 2.0 ** (n * d)
        for item in itertools.chain(self.pending, self.unresolved):
            d = 0 if item[0] == "grid" else item[1]
            total += _item_len(item) / 2.0 ** (n * d)
        return total


def _item_len(item) -> int:
    return item[2] - item[1] if item[0] == "grid" else int(item[2].shape[0])


# Engine -------------------------------------------------------------------------

@dataclass
class _State:
    stack: list
    unresolved: list
    boxes: int = 0
    rounds: int = 0
    fmax: float = -math.inf
    argmax: Optional[np.ndarray] = None
    witness: Optional[np.ndarray] = None
    witness_value: Optional[float] = None
    evaluated: list = field(default_factory=list)
    eliminated: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    elapsed: float = 0.0

    def add_depth_counts(self, name: str, counts: np.ndarray):
        acc = getattr(self, name)
        nz = np.flatnonzero(counts)
        if nz.size:
            need = int(nz[-1]) + 1
            if len(acc) < need:
                acc.extend([0] * (need - len(acc)))
            for d in nz:
                acc[d] += int(counts[d])


def _initial_state(p: CertProblem, s: EngineSettings) -> _State:
    total = p.grid_size
    starts = list(range(0, total, s.chunk_size))
    stack = [("grid", a, min(a + s.chunk_size, total)) for a in reversed(starts)]
    return _State(stack=stack, unresolved=[])


def _make_executor(workers: int, core: _Core):
    if workers <= 1:
        return None
    try:
        pickle.dumps(core)
    except Exception:
        log.warning("objective is not picklable; using threads instead of processes")
        return ThreadPoolExecutor(max_workers=workers)
    return ProcessPoolExecutor(max_workers=workers)


def _run(
    p: CertProblem,
    state: _State,
    settings: EngineSettings,
    workers: int,
    checkpoint_path,
    checkpoint_interval: float,
    progress: Optional[Callable[[_State], None]],
) -> CertificateReport:
    if workers < 1:
        raise ValueError("workers must be at least 1")
    core = _Core.build(p, settings)
    # Leaves parked at an earlier depth cap can continue under a larger one.
    revived = [it for it in state.unresolved if it[1] < p.max_depth]
    state.unresolved = [it for it in state.unresolved if it[1] >= p.max_depth]
    state.stack.extend(revived)
    t0 = time.perf_counter()
    elapsed0 = state.elapsed
    last_ckpt = time.monotonic()
    executor = _make_executor(workers, core)
    try:
        while state.stack and state.witness is None and state.boxes < p.budget:
            batch = [state.stack.pop() for _ in range(min(settings.tasks_per_round, len(state.stack)))]
            per_task = max(1, min(settings.task_budget, -(-(p.budget - state.boxes) // len(batch))))
            if executor is None:
                results = [_run_task(core, it, per_task) for it in batch]
            else:
                results = list(executor.map(_run_task, [core] * len(batch), batch, [per_task] * len(batch)))
            for r in results:
                state.boxes += r.boxes
                state.add_depth_counts("evaluated", r.evaluated)
                state.add_depth_counts("eliminated", r.eliminated)
                state.add_depth_counts("excluded", r.excluded)
                if r.fmax > state.fmax:
                    state.fmax, state.argmax = r.fmax, r.argmax
                if r.witness is not None and state.witness is None:
                    state.witness, state.witness_value = r.witness, r.witness_value
                state.unresolved.extend(r.unresolved)
            for r in reversed(results):
                state.stack.extend(r.leftovers)
            state.rounds += 1
            state.elapsed = elapsed0 + time.perf_counter() - t0
            if progress is not None:
                progress(state)
            if checkpoint_path is not None and time.monotonic() - last_ckpt >= checkpoint_interval:
                save_checkpoint(checkpoint_path, p, settings, state)
                last_ckpt = time.monotonic()
    finally:
        if executor is not None:
            executor.shutdown()
    state.elapsed = elapsed0 + time.perf_counter() - t0
    if state.witness is not None:
        status = Status.REFUTED
    elif state.stack or state.unresolved:
        status = Status.BUDGET_EXCEEDED
    else:
        status = Status.CERTIFIED
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, p, settings, state)
    log.info("%s after %d boxes, max center value %r", status.value, state.boxes, state.fmax)
    return CertificateReport(
        status=status,
        boxes_processed=state.boxes,
        max_center_value=state.fmax,
        witness=state.witness,
        witness_value=state.witness_value,
        argmax=state.argmax,
        config=p.config(),
        config_hash=p.config_hash(),
        evaluated_by_depth=list(state.evaluated),
        eliminated_by_depth=list(state.eliminated),
        excluded_by_depth=list(state.excluded),
        rounds=state.rounds,
        elapsed_seconds=state.elapsed,
        pending=list(state.stack),
        unresolved=list(state.unresolved),
        _lattice=(p.lower, p.step, p._counts),
    )


def certify(
    p: CertProblem,
    workers: int = 1,
    checkpoint_path=None,
    checkpoint_interval: float = 60.0,
    settings: EngineSettings = EngineSettings(),
    progress: Optional[Callable] = None,
) -> CertificateReport:
    """Run branch and bound from the initial grid.

    With ``checkpoint_path`` the state is saved every ``checkpoint_interval``
    seconds and at the end, so an interrupted or budget-limited run can be
    continued with :func:`resume`.
    """
    return _run(p, _initial_state(p, settings), settings, workers, checkpoint_path, checkpoint_interval, progress)


def resume(
    checkpoint,
    p: CertProblem,
    workers: int = 1,
    checkpoint_path=None,
    checkpoint_interval: float = 60.0,
    progress: Optional[Callable] = None,
) -> CertificateReport:
    """Continue a run from a checkpoint file or a loaded checkpoint dict.

    The problem must hash identically to the one that wrote the checkpoint.
    ``p.budget`` caps the cumulative box count including earlier runs. The
    checkpoint's own engine settings are reused so the work order matches
    an uninterrupted run.
    """
    data = load_checkpoint(checkpoint) if not isinstance(checkpoint, dict) else checkpoint
    if data["config_hash"] != p.config_hash():
        raise ConfigMismatchError("checkpoint was written for a different problem configuration")
    settings = EngineSettings(**data["settings"])
    state = _state_from_json(data)
    if checkpoint_path is None and not isinstance(checkpoint, dict):
        checkpoint_path = checkpoint
    return _run(p, state, settings, workers, checkpoint_path, checkpoint_interval, progress)


# Checkpoints ----------------------------------------------------------------------

def _item_to_json(item) -> dict:
    if item[0] == "grid":
        return {"grid": [int(item[1]), int(item[2])]}
    # Lattice indices in the narrowest unsigned type, base64 encoded; nested lists are far too slow.
    top = int(item[2].max()) if item[2].size else 0
    dtype = next(t for t in ("<u1", "<u2", "<u4", "<u8") if top < 2 ** (8 * int(t[-1])))
    idx = np.ascontiguousarray(item[2], dtype=dtype)
    return {
        "depth": int(item[1]),
        "shape": list(idx.shape),
        "dtype": dtype,
        "index": base64.b64encode(idx.tobytes()).decode("ascii"),
        "evaluated": item[0] == "split",
    }


def _item_from_json(d: dict):
    if "grid" in d:
        a, b = d["grid"]
        return ("grid", int(a), int(b))
    idx = np.frombuffer(base64.b64decode(d["index"]), dtype=d["dtype"]).astype(np.int64).reshape(d["shape"])
    kind = "split" if d.get("evaluated") else "boxes"
    return (kind, int(d["depth"]), idx)


def _opt_floats(a):
    return None if a is None else _floats(a)


def checkpoint_dict(p: CertProblem, settings: EngineSettings, state: _State) -> dict:
    return {
        "schema": CHECKPOINT_SCHEMA,
        "version": CHECKPOINT_VERSION,
        "config_hash": p.config_hash(),
        "config": p.config(),
        "settings": {
            "chunk_size": settings.chunk_size,
            "task_budget": settings.task_budget,
            "tasks_per_round": settings.tasks_per_round,
        },
        "counters": {
            "boxes_processed": state.boxes,
            "rounds": state.rounds,
            "max_center_value": state.fmax if math.isfinite(state.fmax) else None,
            "argmax": _opt_floats(state.argmax),
            "witness": _opt_floats(state.witness),
            "witness_value": state.witness_value,
            "evaluated_by_depth": list(state.evaluated),
            "eliminated_by_depth": list(state.eliminated),
            "excluded_by_depth": list(state.excluded),
            "elapsed_seconds": state.elapsed,
        },
        "stack": [_item_to_json(i) for i in state.stack],
        "unresolved": [_item_to_json(i) for i in state.unresolved],
    }


def _state_from_json(data: dict) -> _State:
    c = data["counters"]
    arr = lambda v: None if v is None else np.array(v, dtype=float)  # noqa: E731
    return _State(
        stack=[_item_from_json(i) for i in data["stack"]],
        unresolved=[_item_from_json(i) for i in data["unresolved"]],
        boxes=int(c["boxes_processed"]),
        rounds=int(c["rounds"]),
        fmax=-math.inf if c["max_center_value"] is None else float(c["max_center_value"]),
        argmax=arr(c["argmax"]),
        witness=arr(c["witness"]),
        witness_value=c["witness_value"],
        evaluated=list(c["evaluated_by_depth"]),
        eliminated=list(c["eliminated_by_depth"]),
        excluded=list(c["excluded_by_depth"]),
        elapsed=float(c.get("elapsed_seconds", 0.0)),
    )


def save_checkpoint(path, p: CertProblem, settings: EngineSettings, state: _State) -> None:
    """Write the checkpoint atomically (temporary file, then rename)."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(checkpoint_dict(p, settings, state), fh, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != CHECKPOINT_SCHEMA or data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint format in {path}")
    return data


def problem_from_config(config: dict, objective: Callable, *, max_depth: int = DEFAULT_MAX_DEPTH,
                        budget: int = DEFAULT_BUDGET, vectorized: bool = True) -> CertProblem:
    """Rebuild a problem from its echoed configuration; the hash is preserved."""
    return CertProblem(
        objective=objective,
        lower=config["lower"],
        upper=config["upper"],
        lipschitz=config["lipschitz"],
        threshold=config["threshold"],
        exclusions=[tuple(e) for e in config["exclusions"]],
        fp_margin=config["fp_margin"],
        initial_delta=config["initial_step"],
        max_depth=max_depth,
        budget=budget,
        vectorized=vectorized,
        label=config["label"],
        meta=config["meta"],
    )
