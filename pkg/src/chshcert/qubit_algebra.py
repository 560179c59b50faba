"""Single-qubit channels and two-qubit fidelity algebra.

Channels are handled in two equivalent forms: a Kraus pair acting on density
matrices and an affine map ``v -> a + M v`` acting on Bloch vectors. Extremal
rank-2 channels are parametrized by two contraction parameters ``s0, s1`` and
two rotations of the Bloch ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

SQRT2 = np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)
H_PLUS = (Z + X) / SQRT2
H_MINUS = (Z - X) / SQRT2

PHI_PLUS_KET = np.array([1, 0, 0, 1], dtype=complex) / SQRT2
PHI_PLUS = np.outer(PHI_PLUS_KET, PHI_PLUS_KET.conj())

# Phi+ = (II + XX - YY + ZZ) / 4, so product fidelities pick up this signature.
J = np.diag([1.0, -1.0, 1.0])

Z_HAT = np.array([0.0, 0.0, 1.0])
H_PLUS_HAT = np.array([1.0, 0.0, 1.0]) / SQRT2
H_MINUS_HAT = np.array([-1.0, 0.0, 1.0]) / SQRT2

ROTATION_ATOL = 1e-12
COMPLETENESS_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
PSD_ATOL = 1e-10


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class InvalidChannelError(ValueError):
    """A Kraus pair does not describe a trace-preserving map."""


class InvalidStateError(ValueError):
    """An operator is not a valid density matrix."""


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def is_rotation(r, atol: float = ROTATION_ATOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    det = r[0] @ np.cross(r[1], r[2])
    return bool(np.max(np.abs(r.T @ r - np.eye(3))) <= atol and abs(det - 1) <= atol)


def su2_from_rotation(r) -> np.ndarray:
    """Lift a rotation matrix to one of its two SU(2) preimages.

    The returned ``U`` satisfies ``U (v . sigma) U^dag = (r v) . sigma``.
    """
    if not is_rotation(r):
        raise InvalidParameterError("matrix is not a proper rotation")
    x, y, z, w = Rotation.from_matrix(np.asarray(r, dtype=float)).as_quat()
    return w * I2 - 1j * (x * X + y * Y + z * Z)


def rotation_from_unitary(u) -> np.ndarray:
    """Adjoint action of a 2x2 unitary on Bloch vectors."""
    u = np.asarray(u, dtype=complex)
    return np.array(
        [[0.5 * np.real(np.trace(si @ u @ sj @ u.conj().T)) for sj in PAULIS] for si in PAULIS]
    )


def bloch_vector(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.array([np.real(np.trace(rho @ s)) for s in PAULIS])


def density_matrix(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return 0.5 * (I2 + v[0] * X + v[1] * Y + v[2] * Z)


def channel_singular_values(s0: float, s1: float) -> tuple[float, float, float]:
    """Signed singular values of the linear part of an extremal channel.

    They come ordered by absolute value, with the largest one nonnegative and
    the last two sharing a sign.
    """
    if not (0.0 <= s0 <= 1.0 and 0.0 <= s1 <= 1.0):
        raise InvalidParameterError(f"s0, s1 must lie in [0, 1], got {s0}, {s1}")
    root = np.sqrt(max(0.0, (1.0 - s0 * s0) * (1.0 - s1 * s1)))
    return (s0 * s1 + root, s0 * s1 - root, s0 * s0 + s1 * s1 - 1.0)


@dataclass(frozen=True, eq=False)
class ExtremalChannelParams:
    """Rank-2 extremal qubit channel ``K0 = U diag(s0, s1) V^dag``.

    ``R_U`` and ``R_V`` are the Bloch-ball rotations induced by ``U`` and ``V``.
    ``s0 = s1 = 1`` gives a unitary channel.
    """

    s0: float
    s1: float
    R_U: np.ndarray = field(default_factory=lambda: np.eye(3))
    R_V: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        for name in ("s0", "s1"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        for name in ("R_U", "R_V"):
            r = getattr(self, name)
            if not is_rotation(r):
                raise InvalidParameterError(f"{name} is not a proper rotation")
            object.__setattr__(self, name, _readonly(r))

    @classmethod
    def identity(cls) -> "ExtremalChannelParams":
        return cls(1.0, 1.0)

    @classmethod
    def amplitude_damping(cls, R_U=None, R_V=None) -> "ExtremalChannelParams":
        """Full amplitude damping, which prepares ``R_U z`` regardless of input."""
        return cls(1.0, 0.0, np.eye(3) if R_U is None else R_U, np.eye(3) if R_V is None else R_V)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ExtremalChannelParams":
        s0, s1 = rng.uniform(0.0, 1.0, size=2)
        ru = Rotation.random(random_state=rng).as_matrix()
        rv = Rotation.random(random_state=rng).as_matrix()
        return cls(float(s0), float(s1), ru, rv)


@dataclass(frozen=True, eq=False)
class KrausPair:
    K0: np.ndarray
    K1: np.ndarray

    def __post_init__(self):
        for name in ("K0", "K1"):
            k = np.asarray(getattr(self, name), dtype=complex)
            if k.shape != (2, 2):
                raise InvalidParameterError(f"{name} must be 2x2")
            object.__setattr__(self, name, _readonly(k, complex))

    def completeness_error(self) -> float:
        g = self.K0.conj().T @ self.K0 + self.K1.conj().T @ self.K1
        return float(np.max(np.abs(g - I2)))

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in (self.K0, self.K1))


@dataclass(frozen=True, eq=False)
class AffineChannel:
    """Bloch-ball action ``v -> a + M v``."""

    a: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        m = np.asarray(self.M, dtype=float)
        if a.shape != (3,) or m.shape != (3, 3):
            raise InvalidParameterError("affine channel needs a 3-vector and a 3x3 matrix")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "M", _readonly(m))


def kraus_from_params(p: ExtremalChannelParams) -> KrausPair:
    u = su2_from_rotation(p.R_U)
    v = su2_from_rotation(p.R_V)
    vh = v.conj().T
    k0 = u @ np.diag([p.s0, p.s1]) @ vh
    off = np.array(
        [[0.0, np.sqrt(max(0.0, 1.0 - p.s1**2))], [np.sqrt(max(0.0, 1.0 - p.s0**2)), 0.0]]
    )
    k1 = u @ off @ vh
    return KrausPair(k0, k1)


def affine_from_kraus(k: KrausPair, atol: float = COMPLETENESS_ATOL) -> AffineChannel:
    """Read off ``a`` from the image of the identity and ``M`` from the Pauli eigenstates.

    ``L[I] = I + a . sigma`` and ``L[(I + sigma_k)/2] = (I + (a + M e_k) . sigma)/2``.
    """
    if k.completeness_error() > atol:
        raise InvalidChannelError("Kraus operators are not trace preserving")
    a = 0.5 * bloch_vector(k.apply(I2))
    cols = [bloch_vector(k.apply(0.5 * (I2 + s))) - a for s in PAULIS]
    return AffineChannel(a, np.column_stack(cols))


def affine_from_params(p: ExtremalChannelParams) -> AffineChannel:
    lam = channel_singular_values(p.s0, p.s1)
    a = p.R_U @ np.array([0.0, 0.0, p.s0**2 - p.s1**2])
    m = p.R_U @ np.diag(lam) @ p.R_V.T
    return AffineChannel(a, m)


def apply_affine(c: AffineChannel, v) -> np.ndarray:
    return c.a + c.M @ np.asarray(v, dtype=float)


def product_singlet_fidelity(a, b) -> float:
    """Overlap of the product state with Bloch vectors ``a`` and ``b`` with Phi+."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(a) > 1 + 1e-12 or np.linalg.norm(b) > 1 + 1e-12:
        raise InvalidParameterError("Bloch vectors must have norm at most 1")
    return 0.25 * (1.0 + float(a @ J @ b))


def validate_state(rho) -> np.ndarray:
    """Return ``rho`` as a 4x4 complex array, raising if it is not a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError("two-qubit state must be 4x4")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_ATOL:
        raise InvalidStateError("state is not Hermitian")
    if abs(np.trace(rho) - 1) > HERMITIAN_ATOL:
        raise InvalidStateError("state does not have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -PSD_ATOL:
        raise InvalidStateError("state is not positive semidefinite")
    return rho


def extracted_block_fidelity(kA: KrausPair, kB: KrausPair, rho) -> float:
    """<Phi+| (L_A x L_B)[rho] |Phi+> summed over the four Kraus products."""
    return _block_fidelity(kA, kB, validate_state(rho))


def _block_fidelity(kA: KrausPair, kB: KrausPair, rho: np.ndarray) -> float:
    # (A x B)^dag |Phi+> is the row-major vectorization of A^dag conj(B) / sqrt 2.
    total = 0.0
    for ka in (kA.K0, kA.K1):
        for kb in (kB.K0, kB.K1):
            w = (ka.conj().T @ kb.conj()).reshape(4) / SQRT2
            total += float(np.real(w.conj() @ rho @ w))
    return min(1.0, max(0.0, total))
