"""Closed-form upper bounds on 4F - 1 for the CHSH state family.

After relaxation the bound depends on five angles: ``a0t, a1t`` (Alice's
register-1 channel, ``cos a0t = s0``, ``cos a1t = s1``), ``b0t, b1t`` (same
for Bob) and ``theta`` (Alice's register-2 translation, ``cos theta = |a2|``).
The two branches ``+`` and ``-`` correspond to the relative sign of the
second singular values on both sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from chshcert.chsh_model import StateFamilyParams
from chshcert.qubit_algebra import SQRT2, InvalidParameterError

HALF_PI = np.pi / 2
DOMAIN_LOWER = np.zeros(5)
DOMAIN_UPPER = np.full(5, HALF_PI)
VARIABLES = ("a0t", "a1t", "b0t", "b1t", "theta")

# Full amplitude damping on both sides: the global maximum, where the bound equals 1.
X_EXC = np.array([0.0, HALF_PI, 0.0, HALF_PI, 0.0])
EXCLUDED_EDGE = np.pi / 16
EXCLUDED_LOWER = np.array([0.0, HALF_PI - EXCLUDED_EDGE, 0.0, HALF_PI - EXCLUDED_EDGE, 0.0])
EXCLUDED_UPPER = np.array([EXCLUDED_EDGE, HALF_PI, EXCLUDED_EDGE, HALF_PI, EXCLUDED_EDGE])

Branch = Union[int, str, None]


def normalize_branch(branch: Branch) -> int:
    """Return +1, -1, or 0 for the pointwise maximum of both branches."""
    table = {1: 1, -1: -1, 0: 0, None: 0, "+": 1, "-": -1, "plus": 1, "minus": -1, "both": 0}
    try:
        return table[branch]
    except (KeyError, TypeError):
        raise InvalidParameterError(f"unknown branch {branch!r}") from None


@dataclass(frozen=True)
class ReducedPoint:
    a0t: float
    a1t: float
    b0t: float
    b1t: float
    theta: float

    def __post_init__(self):
        for name in VARIABLES:
            v = float(getattr(self, name))
            if not (0.0 <= v <= HALF_PI) or not np.isfinite(v):
                raise InvalidParameterError(f"{name} must lie in [0, pi/2], got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, x) -> "ReducedPoint":
        x = np.asarray(x, dtype=float)
        if x.shape != (5,):
            raise InvalidParameterError("reduced point needs 5 coordinates")
        return cls(*map(float, x))

    def as_array(self) -> np.ndarray:
        return np.array([self.a0t, self.a1t, self.b0t, self.b1t, self.theta])

    @property
    def is_canonical(self) -> bool:
        return self.a0t <= self.a1t and self.b0t <= self.b1t


@dataclass(frozen=True)
class TrigConstants:
    C1: float
    C2: float
    C3: float

    @classmethod
    def for_edge(cls, edge: float = EXCLUDED_EDGE) -> "TrigConstants":
        return cls(
            C1=float(np.sin(3 * edge) ** 2 / (2 * (3 * edge) ** 2)),
            C2=float(np.sin(2 * edge) ** 2 / (2 * (2 * edge) ** 2)),
            C3=float((1 - np.cos(edge / 2)) / (edge / 2) ** 2),
        )


TRIG_CONSTANTS = TrigConstants.for_edge()


# Building blocks ----------------------------------------------------------------

def epsilon_corner(q: float, a2: float, zeta2: float) -> float:
    """Corner-block bound; the corner fidelity is at most (1 + value) / 4."""
    if not 0 <= q <= 1 or a2 < 0 or zeta2 < 0 or a2 * a2 + zeta2 * zeta2 > 1 + 1e-12:
        raise InvalidParameterError("need q in [0, 1], a2, zeta2 >= 0 and a2^2 + zeta2^2 <= 1")
    return float(np.hypot(q + (1 - q) * a2, (1 - q) * zeta2))


def epsilon_21(a2: float, b1: float, zeta2: float, sigma_max_B1: float) -> float:
    if min(a2, b1, zeta2, sigma_max_B1) < 0 or b1 > 1 or sigma_max_B1 > 1:
        raise InvalidParameterError("inputs must be nonnegative with b1, sigma_max_B1 <= 1")
    if a2 * a2 + zeta2 * zeta2 > 1 + 1e-12:
        raise InvalidParameterError("need a2^2 + zeta2^2 <= 1")
    return float(a2 * b1 + zeta2 * sigma_max_B1)


def epsilon_phi(a1: float, b1: float, sigA, sigB) -> float:
    """Phi+ block bound from translations and ordered singular values."""
    sa = np.abs(np.asarray(sigA, dtype=float))
    sb = np.abs(np.asarray(sigB, dtype=float))
    for s in (sa, sb):
        if s.shape != (3,) or np.any(np.diff(s) > 1e-12):
            raise InvalidParameterError("singular values must be ordered by decreasing magnitude")
    return float(a1 * b1 + sa @ sb)


# Angle form -------------------------------------------------------------------

def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2], x[..., 3], x[..., 4]


def _side_vector(t0, t1):
    """(translation, l1, l2, l3) of one side's register-1 channel, as angles."""
    c0, c1 = np.cos(t0), np.cos(t1)
    return (c0 * c0 - c1 * c1, np.cos(t0 - t1), np.cos(t0 + t1), c0 * c0 + c1 * c1 - 1)


def _parts(x, nu, p_C):
    a0, a1, b0, b1, th = _split(x)
    A = _side_vector(a0, a1)
    B = _side_vector(b0, b1)
    k = (1 - nu) * (1 - p_C)
    base = nu * (A[0] * B[0] + A[1] * B[1]) + (1 - nu) * p_C * np.cos(th / 2)
    base = base + k * (np.cos(th) * B[0] + np.sin(th) * B[1])
    return base, nu * (A[2] * B[2] + A[3] * B[3])


def epsilon_rho_batch(x, nu: float, p_C: float, branch: Branch = 0) -> np.ndarray:
    """Vectorized bound over points stacked along the last axis (no domain checks)."""
    b = normalize_branch(branch)
    base, mixed = _parts(x, nu, p_C)
    if b == 0:
        return base + np.abs(mixed)
    return base + b * mixed


def epsilon_rho(x: ReducedPoint, p: StateFamilyParams, branch: Branch = 1) -> float:
    """Bound on 4F - 1 at a reduced point; ``p.q`` is ignored since q = 1/2 is the worst case."""
    if not isinstance(x, ReducedPoint):
        x = ReducedPoint.from_array(x)
    return float(epsilon_rho_batch(x.as_array(), p.nu, p.p_C, branch))


def epsilon_rho_composed(x: ReducedPoint, p: StateFamilyParams) -> float:
    """Same bound assembled from the three block bounds; equals the max over branches."""
    from chshcert.qubit_algebra import channel_singular_values

    ca0, ca1 = np.cos(x.a0t), np.cos(x.a1t)
    cb0, cb1 = np.cos(x.b0t), np.cos(x.b1t)
    sig_a = channel_singular_values(min(1.0, ca0), min(1.0, ca1))
    sig_b = channel_singular_values(min(1.0, cb0), min(1.0, cb1))
    a1, b1 = ca0**2 - ca1**2, cb0**2 - cb1**2
    ct, st = np.cos(x.theta), np.sin(x.theta)
    phi = epsilon_phi(a1, b1, sig_a, sig_b)
    corner = epsilon_corner(0.5, ct, st)
    e21 = ct * b1 + st * abs(sig_b[0])
    rest = 1 - p.nu
    return float(p.nu * phi + rest * p.p_C * corner + rest * (1 - p.p_C) * e21)


def _side_derivs(t0, t1):
    """Derivatives of the side vector with respect to t0 and t1."""
    d0 = (-np.sin(2 * t0), -np.sin(t0 - t1), -np.sin(t0 + t1), -np.sin(2 * t0))
    d1 = (np.sin(2 * t1), np.sin(t0 - t1), -np.sin(t0 + t1), -np.sin(2 * t1))
    return d0, d1


def grad_epsilon_rho_batch(x, nu: float, p_C: float, branch: Branch = 1) -> np.ndarray:
    """Analytic gradient; for ``branch=0`` the gradient of the active branch (ties go to +)."""
    b = normalize_branch(branch)
    a0, a1, b0, b1, th = _split(x)
    A = _side_vector(a0, a1)
    B = _side_vector(b0, b1)
    if b == 0:
        s = np.where(A[2] * B[2] + A[3] * B[3] >= 0, 1.0, -1.0)
    else:
        s = b
    k = (1 - nu) * (1 - p_C)

    def dot(u, v):
        return u[0] * v[0] + u[1] * v[1] + s * (u[2] * v[2] + u[3] * v[3])

    dA0, dA1 = _side_derivs(a0, a1)
    dB0, dB1 = _side_derivs(b0, b1)
    ct, st = np.cos(th), np.sin(th)
    g = [
        nu * dot(dA0, B),
        nu * dot(dA1, B),
        nu * dot(A, dB0) + k * (ct * dB0[0] + st * dB0[1]),
        nu * dot(A, dB1) + k * (ct * dB1[0] + st * dB1[1]),
        -(1 - nu) * p_C * np.sin(th / 2) / 2 + k * (-st * B[0] + ct * B[1]),
    ]
    return np.stack(np.broadcast_arrays(*g), axis=-1)


def grad_epsilon_rho(x: ReducedPoint, p: StateFamilyParams, branch: Branch = 1) -> np.ndarray:
    if not isinstance(x, ReducedPoint):
        x = ReducedPoint.from_array(x)
    return grad_epsilon_rho_batch(x.as_array(), p.nu, p.p_C, branch)


# Lipschitz constants ----------------------------------------------------------

def partial_derivative_bounds(p: StateFamilyParams) -> np.ndarray:
    """Upper bounds (3nu, 3nu, 3nu + K, 3nu + K, K) with K = (1 - nu)(1 - p_C).

    These hold as one-sided bounds on the canonically ordered region; the
    first two also bound the magnitude everywhere.
    """
    k = (1 - p.nu) * (1 - p.p_C)
    return np.array([3 * p.nu, 3 * p.nu, 3 * p.nu + k, 3 * p.nu + k, k])


def rigorous_partial_bounds(p: StateFamilyParams) -> np.ndarray:
    """Magnitude bounds valid on the whole box, from the triangle inequality."""
    k = (1 - p.nu) * (1 - p.p_C)
    return np.array(
        [4 * p.nu, 4 * p.nu, 4 * p.nu + SQRT2 * k, 4 * p.nu + SQRT2 * k, (1 - p.nu) * p.p_C / 2 + k]
    )


LIPSCHITZ_READINGS = ("printed", "tight", "rigorous")


def iota_sup(p: StateFamilyParams, reading: str = "printed") -> float:
    """Bound on the gradient norm used as Lipschitz constant.

    ``printed`` uses ``(1 - p_C)(1 - nu)^2`` for the theta term, ``tight`` its
    square ``((1 - p_C)(1 - nu))^2``, and ``rigorous`` the norm of
    :func:`rigorous_partial_bounds`.
    """
    k = (1 - p.nu) * (1 - p.p_C)
    if reading == "printed":
        last = (1 - p.p_C) * (1 - p.nu) ** 2
    elif reading == "tight":
        last = k * k
    elif reading == "rigorous":
        return float(np.linalg.norm(rigorous_partial_bounds(p)))
    else:
        raise InvalidParameterError(f"unknown Lipschitz reading {reading!r}")
    return float(np.sqrt(2 * (3 * p.nu) ** 2 + 2 * (3 * p.nu + k) ** 2 + last))


# Trigonometric lemmas ---------------------------------------------------------

def trig_cos_bound(x: float, Omega: float) -> float:
    """Quadratic majorant of cos on [0, Omega], tight at both ends."""
    if not (0 < Omega <= 2 * np.pi and 0 <= x <= Omega):
        raise InvalidParameterError("need 0 <= x <= Omega <= 2 pi, Omega > 0")
    return float(1 - (1 - np.cos(Omega)) / Omega**2 * x * x)


def trig_cos_product_bound(x: float, y: float, Omega: float) -> float:
    """Quadratic majorant of cos(x) cos(y) on [0, Omega]^2."""
    if not (0 < Omega <= np.pi and 0 <= x <= Omega and 0 <= y <= Omega):
        raise InvalidParameterError("need 0 <= x, y <= Omega <= pi, Omega > 0")
    return float(1 - np.sin(Omega) ** 2 / (2 * Omega**2) * (x * x + y * y))


def corner_q_factor(q, theta):
    """sqrt(1 - 4 q (1 - q) sin^2(theta/2)), the corner bound at a2 = cos theta, zeta2 = sin theta."""
    return np.sqrt(1 - 4 * q * (1 - q) * np.sin(theta / 2) ** 2)


# Residual cube ----------------------------------------------------------------

def residual_coordinates(x) -> np.ndarray:
    """Map points near the excluded vertex to r = (mu_a, mu_b, delta_a, delta_b, theta).

    ``mu = pi/2 - (t1 + t0)`` and ``delta = pi/2 - (t1 - t0)``; r vanishes at the vertex.
    """
    a0, a1, b0, b1, th = _split(x)
    return np.stack(
        np.broadcast_arrays(HALF_PI - (a1 + a0), HALF_PI - (b1 + b0), HALF_PI - (a1 - a0), HALF_PI - (b1 - b0), th),
        axis=-1,
    )


def residual_matrix(p: StateFamilyParams, c: TrigConstants = TRIG_CONSTANTS) -> np.ndarray:
    nu, pc = p.nu, p.p_C
    s, d = c.C1 + c.C2, c.C2 - c.C1
    g = 1 - (1 - nu) * pc
    k = (1 - nu) * (1 - pc)
    t55 = 0.5 * (1 - nu) * (s * (2 * pc - 2) - c.C3 * pc)
    return np.array(
        [
            [-nu * s, nu, nu * d, 0, 0],
            [nu, -s * g, 0, d * g, 0],
            [nu * d, 0, -nu * s, nu, 0],
            [0, d * g, nu, -s * g, k],
            [0, 0, 0, k, t55],
        ]
    )


@dataclass(frozen=True, eq=False)
class ResidualCertificate:
    """Negative-definiteness certificate for the quadratic majorant on the excluded cube."""

    T: np.ndarray
    lambda_max: float
    valid: bool

    def quadratic_form(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.einsum("...i,ij,...j->...", r, 0.5 * (self.T + self.T.T), r)

    def majorant(self, x) -> np.ndarray:
        """1 + r^T T r / 2: the second-order majorant of the + branch in r."""
        return 1 + 0.5 * self.quadratic_form(residual_coordinates(x))

    def eigen_bound(self, x) -> np.ndarray:
        """1 + lambda_max |r|^2, the eigenvalue form of the bound."""
        r = residual_coordinates(x)
        return 1 + self.lambda_max * np.sum(r * r, axis=-1)


def residual_cube_certificate(p: StateFamilyParams, c: TrigConstants = TRIG_CONSTANTS) -> ResidualCertificate:
    t = residual_matrix(p, c)
    lam = float(np.linalg.eigvalsh(0.5 * (t + t.T))[-1])
    return ResidualCertificate(T=t, lambda_max=lam, valid=lam < 0)


def comparison_fidelity_bound(S: float) -> float:
    """Fidelity with Phi+ guaranteed by a CHSH score S in the device-dependent setting."""
    if not -2 * SQRT2 - 1e-12 <= S <= 2 * SQRT2 + 1e-12:
        raise InvalidParameterError(f"CHSH score must lie in [-2 sqrt 2, 2 sqrt 2], got {S}")
    return float(S / (2 * SQRT2))


# Certification objective ------------------------------------------------------

@dataclass(frozen=True)
class EpsilonObjective:
    """Picklable batch objective for the certifier."""

    nu: float
    p_C: float
    branch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "branch", normalize_branch(self.branch))
        StateFamilyParams(self.nu, self.p_C)

    def __call__(self, x) -> np.ndarray:
        return epsilon_rho_batch(x, self.nu, self.p_C, self.branch)

    def describe(self) -> dict:
        return {"kind": "epsilon_rho", "nu": self.nu, "p_C": self.p_C, "branch": self.branch}
