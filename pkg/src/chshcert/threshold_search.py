"""Threshold scan over the Phi+ weight and the reference certification run.

For each ``nu`` the corner mass ``p_C`` is chosen to make the competing maxima
of the bound as small as possible. The global maximum at the excluded vertex
is pinned at exactly 1 for every ``p_C``, so the quantity minimized is the
best local maximum found away from the excluded cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from chshcert.bounds import (
    DOMAIN_LOWER,
    DOMAIN_UPPER,
    EXCLUDED_EDGE,
    EXCLUDED_LOWER,
    EXCLUDED_UPPER,
    EpsilonObjective,
    ReducedPoint,
    ResidualCertificate,
    comparison_fidelity_bound,
    epsilon_rho_batch,
    iota_sup,
    normalize_branch,
    residual_cube_certificate,
)
from chshcert.certifier import (
    DEFAULT_MAX_DEPTH,
    CertificateReport,
    CertProblem,
    EngineSettings,
    Status,
    certify,
)
from chshcert.chsh_model import REFERENCE_PARAMS, StateFamilyParams, chsh_score
from chshcert.qubit_algebra import InvalidParameterError

# Numerical slack on "eps <= 1"; the vertex value itself rounds to 1 + 2e-16.
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class MaximizerConfig:
    grid_points: int = 9
    n_starts: int = 8
    n_random_starts: int = 4
    seed: int = 0
    tol: float = 1e-8
    initial_step: float = np.pi / 32

    def __post_init__(self):
        if self.grid_points < 2 or self.n_starts < 1 or self.n_random_starts < 0:
            raise InvalidParameterError("maximizer needs a grid of at least 2 points and one start")
        if not (self.tol > 0 and self.initial_step > 0):
            raise InvalidParameterError("maximizer tolerances must be positive")


@dataclass(frozen=True)
class ScanConfig:
    nu_start: float = 0.0
    nu_end: float = 0.1
    nu_step: float = 0.001
    pc_tolerance: float = 1e-6
    pc_grid: int = 100
    maximizer: MaximizerConfig = field(default_factory=MaximizerConfig)
    certify_budget: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.nu_step > 0 or not self.pc_tolerance > 0:
            raise InvalidParameterError("nu_step and pc_tolerance must be positive")
        if not (0 <= self.nu_start <= 1 and 0 <= self.nu_end <= 1):
            raise InvalidParameterError("nu range must lie in [0, 1]")
        if self.pc_grid < 0 or self.certify_budget < 0:
            raise InvalidParameterError("pc_grid and certify_budget must be nonnegative")

    def nu_values(self) -> list[float]:
        count = int(math.floor((self.nu_end - self.nu_start) / self.nu_step + 1e-9)) + 1
        return [round(self.nu_start + k * self.nu_step, 12) for k in range(max(count, 1))]


@dataclass(frozen=True)
class ScanRow:
    nu: float
    best_pc: float
    eps_max: float
    chsh: float
    certified: bool = False

    @property
    def feasible(self) -> bool:
        return self.eps_max <= 1 + FEASIBILITY_TOL


@dataclass(frozen=True)
class EpsilonMax:
    """Best value found, its location, and the best local maximum outside the excluded cube."""

    value: float
    point: ReducedPoint
    runner_up: float
    runner_up_point: Optional[ReducedPoint]

    def __iter__(self):
        return iter((self.value, self.point))


@dataclass(frozen=True)
class PcMinimum:
    pc_star: float
    eps: float
    runner_up: float

    def __iter__(self):
        return iter((self.pc_star, self.eps))


# Maximizer ----------------------------------------------------------------------

def _directions(n: int) -> np.ndarray:
    """Coordinate directions and normalized two-coordinate diagonals."""
    eye = np.eye(n)
    dirs = [eye[i] * s for i in range(n) for s in (1, -1)]
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    dirs.append((si * eye[i] + sj * eye[j]) / math.sqrt(2))
    return np.array(dirs)


_MIN_GAIN = 1e-14


def pattern_search(
    f: Callable[[np.ndarray], np.ndarray],
    starts: np.ndarray,
    lower,
    upper,
    step: float,
    tol: float,
    max_iter: int = 5_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Projected compass search run on all starts at once; never decreases f.

    The step doubles after a success (up to ``step``) and halves after a failure.
    """
    x = np.array(starts, dtype=float)
    fx = f(x)
    dirs = _directions(x.shape[1])
    h = np.full(x.shape[0], float(step))
    for _ in range(max_iter):
        active = np.flatnonzero(h > tol)
        if active.size == 0:
            break
        cand = x[active, None, :] + h[active, None, None] * dirs[None]
        cand = np.clip(cand, lower, upper)
        fc = f(cand.reshape(-1, x.shape[1])).reshape(active.size, -1)
        best = np.argmax(fc, axis=1)
        fbest = fc[np.arange(active.size), best]
        # A minimum gain keeps rounding noise on flat ridges from stalling the shrink.
        up = fbest > fx[active] + _MIN_GAIN * np.maximum(1.0, np.abs(fx[active]))
        won = active[up]
        x[won] = cand[up, best[up]]
        fx[won] = fbest[up]
        h[won] = np.minimum(2 * h[won], step)
        h[active[~up]] /= 2
    return x, fx


def _in_excluded(x: np.ndarray) -> np.ndarray:
    return np.all((x >= EXCLUDED_LOWER) & (x <= EXCLUDED_UPPER), axis=-1)


def _grid(points: int) -> np.ndarray:
    axis = np.linspace(0.0, np.pi / 2, points)
    mesh = np.meshgrid(*([axis] * 5), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _top(values: np.ndarray, k: int) -> np.ndarray:
    order = np.argsort(-values, kind="stable")
    return order[:k]


def maximize_epsilon(p: StateFamilyParams, branch=0, cfg: MaximizerConfig = MaximizerConfig()) -> EpsilonMax:
    """Deterministic multistart ascent of the bound over [0, pi/2]^5.

    Starts are the best grid points overall, the best grid points outside the
    excluded cube, and seeded random points. Adding starts only adds to these
    lists, so the result never decreases with more starts.
    """
    b = normalize_branch(branch)

    def f(x):
        return epsilon_rho_batch(x, p.nu, p.p_C, b)

    grid = _grid(cfg.grid_points)
    fg = f(grid)
    outside = np.flatnonzero(~_in_excluded(grid))
    rng = np.random.default_rng(cfg.seed)
    randoms = rng.uniform(0.0, np.pi / 2, size=(cfg.n_random_starts, 5))
    starts = np.concatenate(
        [grid[_top(fg, cfg.n_starts)], grid[outside[_top(fg[outside], cfg.n_starts)]], randoms]
    )
    x, fx = pattern_search(f, starts, DOMAIN_LOWER, DOMAIN_UPPER, cfg.initial_step, cfg.tol)
    # Include the grid itself so the result is never below sampling.
    cand_x = np.concatenate([x, grid[[int(np.argmax(fg))]]])
    cand_f = np.concatenate([fx, fg[[int(np.argmax(fg))]]])
    j = int(np.argmax(cand_f))
    out_mask = ~_in_excluded(x)
    if out_mask.any():
        k = int(np.flatnonzero(out_mask)[np.argmax(fx[out_mask])])
        runner, runner_pt = float(fx[k]), ReducedPoint.from_array(x[k])
    else:
        runner, runner_pt = -math.inf, None
    if outside.size:
        g = int(outside[np.argmax(fg[outside])])
        if fg[g] > runner:
            runner, runner_pt = float(fg[g]), ReducedPoint.from_array(grid[g])
    return EpsilonMax(float(cand_f[j]), ReducedPoint.from_array(cand_x[j]), runner, runner_pt)


# Outer loop ---------------------------------------------------------------------

_INVPHI = (math.sqrt(5) - 1) / 2


def golden_section(g: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal function on [a, b] to an interval of width ``tol``."""
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    return (c, gc) if gc <= gd else (d, gd)


def min_over_pc(nu: float, cfg: ScanConfig = ScanConfig()) -> PcMinimum:
    """Choose p_C minimizing the largest local maximum away from the excluded cube.

    Golden-section search on [0, 1]; if a bracketing grid of ``cfg.pc_grid``
    points finds a lower value, the search is repeated around that point.
    """
    if not 0 <= nu <= 1:
        raise InvalidParameterError(f"nu must lie in [0, 1], got {nu}")
    cache: dict[float, EpsilonMax] = {}

    def run(pc: float) -> EpsilonMax:
        pc = min(1.0, max(0.0, pc))
        if pc not in cache:
            cache[pc] = maximize_epsilon(StateFamilyParams(nu, pc), 0, cfg.maximizer)
        return cache[pc]

    def g(pc: float) -> float:
        return run(pc).runner_up

    pc, val = golden_section(g, 0.0, 1.0, cfg.pc_tolerance)
    if cfg.pc_grid > 1:
        grid = np.linspace(0.0, 1.0, cfg.pc_grid)
        vals = np.array([g(float(x)) for x in grid])
        k = int(np.argmin(vals))
        if vals[k] < val:
            lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
            pc2, val2 = golden_section(g, float(lo), float(hi), cfg.pc_tolerance)
            pc, val = (pc2, val2) if val2 <= vals[k] else (float(grid[k]), float(vals[k]))
    best = run(pc)
    return PcMinimum(min(1.0, max(0.0, pc)), best.value, best.runner_up)


def scan(cfg: ScanConfig = ScanConfig(), on_row: Optional[Callable[[ScanRow], None]] = None) -> list[ScanRow]:
    """Rows up to and including the first infeasible one (eps > 1)."""
    rows = []
    for nu in cfg.nu_values():
        m = min_over_pc(nu, cfg)
        certified = False
        if cfg.certify_budget and m.eps <= 1 + FEASIBILITY_TOL:
            report = certify(
                reference_problem(StateFamilyParams(nu, m.pc_star), budget=cfg.certify_budget),
                workers=cfg.workers,
            )
            certified = report.status == Status.CERTIFIED and residual_cube_certificate(
                StateFamilyParams(nu, m.pc_star)
            ).valid
        row = ScanRow(nu, m.pc_star, m.eps, chsh_score(nu), certified)
        rows.append(row)
        if on_row is not None:
            on_row(row)
        if not row.feasible:
            break
    return rows


def threshold_candidate(rows: list[ScanRow]) -> Optional[ScanRow]:
    """Last feasible row before the first infeasible one, if any."""
    best = None
    for r in rows:
        if not r.feasible:
            break
        best = r
    return best


# Reference certification ----------------------------------------------------------

def reference_problem(
    p: StateFamilyParams = REFERENCE_PARAMS,
    *,
    branch=0,
    threshold: float = 1.0,
    lipschitz: Optional[float] = None,
    lipschitz_reading: str = "printed",
    lower=DOMAIN_LOWER,
    upper=DOMAIN_UPPER,
    initial_delta: float = EXCLUDED_EDGE,
    max_depth: int = DEFAULT_MAX_DEPTH,
    budget: int = 10**9,
    fp_margin: float = 1e-9,
) -> CertProblem:
    """Certification of ``eps <= threshold`` on a sub-box of the domain, minus the excluded cube."""
    objective = EpsilonObjective(p.nu, p.p_C, branch)
    iota = iota_sup(p, lipschitz_reading) if lipschitz is None else float(lipschitz)
    return CertProblem(
        objective=objective,
        lower=lower,
        upper=upper,
        lipschitz=iota,
        threshold=threshold,
        exclusions=[(EXCLUDED_LOWER, EXCLUDED_UPPER)],
        fp_margin=fp_margin,
        initial_delta=initial_delta,
        max_depth=max_depth,
        budget=budget,
        label="epsilon_rho",
        meta={**objective.describe(), "lipschitz_reading": lipschitz_reading if lipschitz is None else "explicit"},
    )


@dataclass(frozen=True, eq=False)
class ReproductionReport:
    params: StateFamilyParams
    certificate: CertificateReport
    residual: ResidualCertificate
    chsh: float
    iota: float
    comparison_fidelity: float

    @property
    def verdict(self) -> Status:
        if self.certificate.status == Status.CERTIFIED and not self.residual.valid:
            return Status.BUDGET_EXCEEDED
        return self.certificate.status

    @property
    def statement(self) -> str:
        if self.verdict == Status.CERTIFIED:
            return "extractability <= 1/2"
        if self.verdict == Status.REFUTED:
            return "bound exceeds threshold at witness"
        return "undecided (budget exceeded)"


def reproduce_reference_example(
    budget: int = 10**9,
    workers: int = 1,
    *,
    threshold: float = 1.0,
    checkpoint_path=None,
    checkpoint_interval: float = 60.0,
    settings: EngineSettings = EngineSettings(),
    progress=None,
    **problem_kwargs,
) -> ReproductionReport:
    """Certify the bound on the full domain outside the excluded cube and check the cube analytically."""
    p = REFERENCE_PARAMS
    problem = reference_problem(p, threshold=threshold, budget=budget, **problem_kwargs)
    cert = certify(
        problem,
        workers=workers,
        checkpoint_path=checkpoint_path,
        checkpoint_interval=checkpoint_interval,
        settings=settings,
        progress=progress,
    )
    s = chsh_score(p.nu)
    return ReproductionReport(
        params=p,
        certificate=cert,
        residual=residual_cube_certificate(p),
        chsh=s,
        iota=problem.lipschitz,
        comparison_fidelity=comparison_fidelity_bound(s),
    )
