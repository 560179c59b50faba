"""Block-diagonal CHSH state family, its block observables and the fidelity oracle.

Each party holds a three-level register ``i`` tensored with a qubit. On
register ``i`` Alice measures ``Z`` and ``cos(a) Z + sin(a) X`` with
``a = i pi/2``; Bob measures ``H+`` and ``cos(b) H+ + sin(b) H-`` with
``b = j pi/2``. The state is a mixture of two-qubit blocks ``rho^{ij}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from chshcert.qubit_algebra import (
    H_MINUS,
    H_PLUS,
    I2,
    PHI_PLUS,
    SQRT2,
    X,
    Z,
    ExtremalChannelParams,
    InvalidParameterError,
    InvalidStateError,
    affine_from_params,
    channel_singular_values,
    _block_fidelity,
    kraus_from_params,
    validate_state,
)

REGISTERS = (0, 1, 2)
REGISTER_ANGLES = (0.0, np.pi / 2, np.pi)


class BlockLabel(NamedTuple):
    i: int
    j: int

    @classmethod
    def checked(cls, i: int, j: int) -> "BlockLabel":
        if i not in REGISTERS or j not in REGISTERS:
            raise InvalidParameterError(f"block label ({i}, {j}) out of range")
        return cls(i, j)


SUPPORT = tuple(BlockLabel(i, j) for i, j in ((1, 1), (0, 0), (0, 2), (2, 0), (2, 2), (2, 1)))


@dataclass(frozen=True)
class StateFamilyParams:
    """Weight ``nu`` of the Phi+ block, corner mass ``p_C`` and corner split ``q``."""

    nu: float
    p_C: float
    q: float = 0.5

    def __post_init__(self):
        for name in ("nu", "p_C", "q"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)


REFERENCE_PARAMS = StateFamilyParams(nu=0.061, p_C=0.61381508, q=0.5)


def chsh_score(nu: float) -> float:
    if not (0.0 <= nu <= 1.0):
        raise InvalidParameterError(f"nu must lie in [0, 1], got {nu}")
    return float(2.0 + (2.0 * SQRT2 - 2.0) * nu)


def alice_observables(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    return Z, np.cos(alpha) * Z + np.sin(alpha) * X


def bob_observables(beta: float) -> tuple[np.ndarray, np.ndarray]:
    return H_PLUS, np.cos(beta) * H_PLUS + np.sin(beta) * H_MINUS


def chsh_operator(a0, a1, b0, b1) -> np.ndarray:
    return np.kron(a0, b0 + b1) + np.kron(a1, b0 - b1)


def block_observables() -> dict[BlockLabel, np.ndarray]:
    out = {}
    for i in REGISTERS:
        a0, a1 = alice_observables(REGISTER_ANGLES[i])
        for j in REGISTERS:
            b0, b1 = bob_observables(REGISTER_ANGLES[j])
            out[BlockLabel(i, j)] = chsh_operator(a0, a1, b0, b1)
    return out


_CORNER = 0.25 * np.kron(I2 + Z, I2 + H_PLUS)
_BLOCKS = {
    BlockLabel(1, 1): PHI_PLUS,
    BlockLabel(2, 1): 0.25 * (np.kron(I2, I2) + np.kron(Z, H_MINUS)),
    BlockLabel(2, 2): 0.25 * np.kron(I2 - Z, I2 + H_PLUS),
    BlockLabel(0, 0): _CORNER,
    BlockLabel(0, 2): _CORNER,
    BlockLabel(2, 0): _CORNER,
}


@dataclass(frozen=True, eq=False)
class StateBlocks:
    weights: Mapping[BlockLabel, float]
    blocks: Mapping[BlockLabel, np.ndarray]

    def __post_init__(self):
        if set(self.weights) != set(self.blocks):
            raise InvalidStateError("weights and blocks must share labels")
        w = np.array(list(self.weights.values()), dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidStateError("weights must be nonnegative and sum to 1")
        for rho in self.blocks.values():
            validate_state(rho)


def block_weights(p: StateFamilyParams) -> dict[BlockLabel, float]:
    rest = 1.0 - p.nu
    corner_a = rest * p.p_C * p.q / 2
    corner_b = rest * p.p_C * (1.0 - p.q) / 2
    return {
        BlockLabel(1, 1): p.nu,
        BlockLabel(0, 0): corner_a,
        BlockLabel(0, 2): corner_a,
        BlockLabel(2, 0): corner_b,
        BlockLabel(2, 2): corner_b,
        BlockLabel(2, 1): rest * (1.0 - p.p_C),
    }


@lru_cache(maxsize=64)
def build_state(p: StateFamilyParams) -> StateBlocks:
    """Blocks with positive weight; zero-weight blocks are left out of the support."""
    weights = {k: w for k, w in block_weights(p).items() if w > 0}
    return StateBlocks(weights, {k: _BLOCKS[k] for k in weights})


def block_scores(s: StateBlocks) -> dict[BlockLabel, float]:
    obs = block_observables()
    return {k: float(np.real(np.trace(obs[k] @ rho))) for k, rho in s.blocks.items()}


def total_chsh_score(s: StateBlocks) -> float:
    scores = block_scores(s)
    return float(sum(s.weights[k] * scores[k] for k in s.weights))


def _as_triple(channels) -> tuple[ExtremalChannelParams, ...]:
    if isinstance(channels, Mapping):
        if set(channels) != set(REGISTERS):
            raise InvalidParameterError("strategy needs a channel for each register 0, 1, 2")
        channels = [channels[i] for i in REGISTERS]
    channels = tuple(channels)
    if len(channels) != 3 or not all(isinstance(c, ExtremalChannelParams) for c in channels):
        raise InvalidParameterError("strategy needs three ExtremalChannelParams per party")
    return channels


@dataclass(frozen=True, eq=False)
class Strategy:
    """Local extremal channels, one per register on each side."""

    alice: Sequence[ExtremalChannelParams]
    bob: Sequence[ExtremalChannelParams]

    def __post_init__(self):
        object.__setattr__(self, "alice", _as_triple(self.alice))
        object.__setattr__(self, "bob", _as_triple(self.bob))

    @classmethod
    def uniform(cls, alice: ExtremalChannelParams, bob: ExtremalChannelParams) -> "Strategy":
        return cls((alice,) * 3, (bob,) * 3)

    @classmethod
    def identity(cls) -> "Strategy":
        c = ExtremalChannelParams.identity()
        return cls.uniform(c, c)

    @classmethod
    def discard_and_prepare(cls) -> "Strategy":
        """Every channel outputs |0><0|, so each block ends up at fidelity 1/2."""
        c = ExtremalChannelParams.amplitude_damping()
        return cls.uniform(c, c)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Strategy":
        return cls(
            [ExtremalChannelParams.random(rng) for _ in REGISTERS],
            [ExtremalChannelParams.random(rng) for _ in REGISTERS],
        )


def oracle_fidelity(p: StateFamilyParams, strat: Strategy) -> float:
    """Exact singlet fidelity after applying the strategy blockwise."""
    s = build_state(p)
    ka = [kraus_from_params(c) for c in strat.alice]
    kb = [kraus_from_params(c) for c in strat.bob]
    return float(
        sum(w * _block_fidelity(ka[k.i], kb[k.j], s.blocks[k]) for k, w in s.weights.items())
    )


def reduce_strategy(strat: Strategy):
    """Map a strategy to the five reduced angles and the branch sign (+1 or -1).

    Alice's and Bob's register-1 channels give the ordered angles
    ``arccos(max s) <= arccos(min s)``; Alice's register-2 translation sets
    ``theta = arccos|a2|``.
    """
    from chshcert.bounds import ReducedPoint

    a1, b1, a2 = strat.alice[1], strat.bob[1], strat.alice[2]

    def angles(c):
        hi, lo = max(c.s0, c.s1), min(c.s0, c.s1)
        return float(np.arccos(hi)), float(np.arccos(lo))

    a0t, a1t = angles(a1)
    b0t, b1t = angles(b1)
    trans = np.linalg.norm(affine_from_params(a2).a)
    theta = float(np.arccos(min(1.0, trans)))
    lam_a = channel_singular_values(a1.s0, a1.s1)[1]
    lam_b = channel_singular_values(b1.s0, b1.s1)[1]
    branch = -1 if lam_a * lam_b < 0 else 1
    return ReducedPoint(a0t, a1t, b0t, b1t, theta), branch


# Dense assembly on the full (register x qubit) space, used only for cross-checks.

def _projector(i: int) -> np.ndarray:
    p = np.zeros((3, 3))
    p[i, i] = 1.0
    return p


def _reorder(op: np.ndarray) -> np.ndarray:
    """Reorder tensor factors (rA, rB, qA, qB) into (rA, qA, rB, qB)."""
    t = op.reshape(3, 3, 2, 2, 3, 3, 2, 2)
    return t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(36, 36)


def dense_state(s: StateBlocks) -> np.ndarray:
    out = np.zeros((36, 36), dtype=complex)
    for k, w in s.weights.items():
        out += w * _reorder(np.kron(np.kron(_projector(k.i), _projector(k.j)), s.blocks[k]))
    return out


def dense_chsh_operator() -> np.ndarray:
    """CHSH operator built from the register-diagonal measurements on each side."""
    a = [sum(np.kron(_projector(i), alice_observables(REGISTER_ANGLES[i])[x]) for i in REGISTERS) for x in (0, 1)]
    b = [sum(np.kron(_projector(j), bob_observables(REGISTER_ANGLES[j])[y]) for j in REGISTERS) for y in (0, 1)]
    return np.kron(a[0], b[0] + b[1]) + np.kron(a[1], b[0] - b[1])
