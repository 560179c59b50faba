import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from chshcert.qubit_algebra import (
    H_PLUS,
    H_MINUS,
    H_PLUS_HAT,
    I2,
    PAULIS,
    PHI_PLUS,
    X,
    Z,
    Z_HAT,
    AffineChannel,
    ExtremalChannelParams,
    InvalidChannelError,
    InvalidParameterError,
    InvalidStateError,
    KrausPair,
    affine_from_kraus,
    affine_from_params,
    apply_affine,
    bloch_vector,
    channel_singular_values,
    density_matrix,
    extracted_block_fidelity,
    kraus_from_params,
    product_singlet_fidelity,
    rotation_from_unitary,
    su2_from_rotation,
)

unit = st.floats(0.0, 1.0)


def random_params(rng, count):
    return [ExtremalChannelParams.random(rng) for _ in range(count)]


def random_unit_vectors(rng, count):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_identity_params_give_identity_kraus():
    k = kraus_from_params(ExtremalChannelParams.identity())
    assert np.allclose(k.K0, I2, atol=1e-15)
    assert np.allclose(k.K1, 0, atol=1e-15)


def test_full_amplitude_damping_kraus_prepares_ground_state(rng):
    k = kraus_from_params(ExtremalChannelParams.amplitude_damping())
    assert np.allclose(k.K0, np.diag([1, 0]))
    assert np.allclose(k.K1, [[0, 1], [0, 0]])
    for v in random_unit_vectors(rng, 5):
        out = k.apply(density_matrix(v))
        assert np.allclose(out, np.diag([1, 0]), atol=1e-14)


def test_kraus_completeness_on_random_params(rng):
    worst = max(kraus_from_params(p).completeness_error() for p in random_params(rng, 10_000))
    assert worst <= 1e-12


def test_non_rotation_rejected():
    with pytest.raises(InvalidParameterError):
        ExtremalChannelParams(0.5, 0.5, np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(InvalidParameterError):
        ExtremalChannelParams(0.5, 0.5, 2 * np.eye(3))
    with pytest.raises(InvalidParameterError):
        ExtremalChannelParams(1.2, 0.5)


def test_su2_lift_reproduces_rotation(rng):
    for r in Rotation.random(50, random_state=rng).as_matrix():
        u = su2_from_rotation(r)
        assert np.allclose(u.conj().T @ u, I2, atol=1e-14)
        assert np.allclose(rotation_from_unitary(u), r, atol=1e-12)
        # sign of the lift does not matter
        assert np.allclose(rotation_from_unitary(-u), r, atol=1e-12)


def test_affine_from_kraus_identity_and_damping():
    c = affine_from_kraus(kraus_from_params(ExtremalChannelParams.identity()))
    assert np.allclose(c.a, 0) and np.allclose(c.M, np.eye(3))
    c = affine_from_kraus(kraus_from_params(ExtremalChannelParams.amplitude_damping()))
    assert np.allclose(c.a, [0, 0, 1]) and np.allclose(c.M, 0)


def test_affine_from_kraus_rejects_non_trace_preserving():
    with pytest.raises(InvalidChannelError):
        affine_from_kraus(KrausPair(0.5 * I2, np.zeros((2, 2))))


def test_kraus_and_closed_form_affine_agree(rng):
    worst = 0.0
    for p in random_params(rng, 10_000):
        a = affine_from_kraus(kraus_from_params(p))
        b = affine_from_params(p)
        worst = max(worst, np.max(np.abs(a.a - b.a)), np.max(np.abs(a.M - b.M)))
    assert worst <= 1e-10


def test_affine_from_params_examples(rng):
    r_u, r_v = Rotation.random(2, random_state=rng).as_matrix()
    c = affine_from_params(ExtremalChannelParams(1, 1, r_u, r_v))
    assert np.allclose(c.a, 0) and np.allclose(c.M, r_u @ r_v.T)
    h = 1 / np.sqrt(2)
    c = affine_from_params(ExtremalChannelParams(h, h))
    assert np.allclose(c.a, 0, atol=1e-15) and np.allclose(c.M, np.diag([1, 0, 0]), atol=1e-15)
    c = affine_from_params(ExtremalChannelParams(1, 0))
    assert np.allclose(c.a, [0, 0, 1]) and np.allclose(c.M, 0)


def test_relaxation_constraint(rng):
    params = random_params(rng, 10_000)
    u = random_unit_vectors(rng, len(params))
    worst = max(
        c.a @ c.a + np.sum((c.M @ v) ** 2) for c, v in zip((affine_from_params(p) for p in params), u)
    )
    assert worst <= 1 + 1e-12


def test_singular_value_examples(rng):
    assert channel_singular_values(1, 1) == pytest.approx((1, 1, 1))
    assert channel_singular_values(1, 0) == pytest.approx((0, 0, 0))
    for t in rng.uniform(0, np.pi / 2, 20):
        l1, l2, l3 = channel_singular_values(np.cos(t), np.cos(t))
        assert l1 == pytest.approx(1, abs=1e-14)
        assert l2 == pytest.approx(np.cos(t) ** 2 - np.sin(t) ** 2, abs=1e-14)
        assert l3 == pytest.approx(l2, abs=1e-14)
    with pytest.raises(InvalidParameterError):
        channel_singular_values(1.5, 0.2)


@given(unit, unit)
def test_singular_value_structure(s0, s1):
    l1, l2, l3 = channel_singular_values(s0, s1)
    assert abs(l1) + 1e-15 >= abs(l2) and abs(l2) + 1e-15 >= abs(l3)
    assert l1 >= 0
    assert l2 * l3 >= -1e-12
    assert channel_singular_values(s1, s0) == pytest.approx((l1, l2, l3), abs=1e-15)


def test_apply_affine_examples(rng):
    v = np.array([0.3, 0, 0.4])
    ident = affine_from_params(ExtremalChannelParams.identity())
    assert np.allclose(apply_affine(ident, v), v)
    damp = affine_from_params(ExtremalChannelParams.amplitude_damping())
    assert np.allclose(apply_affine(damp, v), [0, 0, 1])


def test_apply_affine_matches_kraus_route(rng):
    for p in random_params(rng, 500):
        v = rng.normal(size=3)
        v *= rng.uniform() / np.linalg.norm(v)
        via_kraus = bloch_vector(kraus_from_params(p).apply(density_matrix(v)))
        assert np.allclose(apply_affine(affine_from_params(p), v), via_kraus, atol=1e-12)


def test_product_singlet_fidelity_examples():
    assert product_singlet_fidelity(Z_HAT, Z_HAT) == pytest.approx(0.5, abs=1e-15)
    assert product_singlet_fidelity(np.zeros(3), H_PLUS_HAT) == 0.25
    rho = np.kron(density_matrix(Z_HAT), density_matrix(H_PLUS_HAT))
    trace = np.real(np.trace(PHI_PLUS @ rho))
    assert product_singlet_fidelity(Z_HAT, H_PLUS_HAT) == pytest.approx(trace, abs=1e-15)
    assert trace == pytest.approx(0.25 * (1 + 1 / np.sqrt(2)), abs=1e-15)
    with pytest.raises(InvalidParameterError):
        product_singlet_fidelity([2, 0, 0], Z_HAT)


def test_extracted_block_fidelity_examples():
    ident = kraus_from_params(ExtremalChannelParams.identity())
    assert extracted_block_fidelity(ident, ident, PHI_PLUS) == pytest.approx(1, abs=1e-15)
    rho21 = 0.25 * (np.kron(I2, I2) + np.kron(Z, H_MINUS))
    assert extracted_block_fidelity(ident, ident, rho21) == pytest.approx(0.25 * (1 + 1 / np.sqrt(2)), abs=1e-15)
    # Bob's rotation flips y so that the prepared pair has J-weighted overlap +1
    flip = Rotation.from_euler("z", np.pi).as_matrix()
    damp_a = kraus_from_params(ExtremalChannelParams.amplitude_damping())
    damp_b = kraus_from_params(ExtremalChannelParams.amplitude_damping(R_V=flip))
    for rho in (PHI_PLUS, rho21, np.kron(density_matrix(Z_HAT), density_matrix(H_PLUS_HAT))):
        assert extracted_block_fidelity(damp_a, damp_b, rho) == pytest.approx(0.5, abs=1e-15)


def test_extracted_block_fidelity_rejects_non_states():
    ident = kraus_from_params(ExtremalChannelParams.identity())
    with pytest.raises(InvalidStateError):
        extracted_block_fidelity(ident, ident, 2 * PHI_PLUS)
    with pytest.raises(InvalidStateError):
        extracted_block_fidelity(ident, ident, np.kron(X, Z) / 4 + np.eye(4) / 4 - np.eye(4) / 2)


def test_block_fidelity_of_product_states_matches_bloch_formula(rng):
    for _ in range(300):
        pa, pb = random_params(rng, 2)
        va, vb = rng.normal(size=(2, 3))
        va *= rng.uniform() / np.linalg.norm(va)
        vb *= rng.uniform() / np.linalg.norm(vb)
        rho = np.kron(density_matrix(va), density_matrix(vb))
        f = extracted_block_fidelity(kraus_from_params(pa), kraus_from_params(pb), rho)
        a = apply_affine(affine_from_params(pa), va)
        b = apply_affine(affine_from_params(pb), vb)
        assert 0 <= f <= 1
        assert f == pytest.approx(product_singlet_fidelity(a, b), abs=1e-12)


def test_pauli_conventions():
    assert np.allclose(H_PLUS @ H_PLUS, I2) and np.allclose(H_MINUS @ H_MINUS, I2)
    expansion = 0.25 * sum(s * np.kron(p, p) for s, p in zip((1, -1, 1), PAULIS)) + 0.25 * np.eye(4)
    assert np.allclose(expansion, PHI_PLUS)


@settings(max_examples=50)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_bloch_round_trip(x, y, z):
    v = np.array([x, y, z]) / max(1.0, np.linalg.norm([x, y, z]))
    assert np.allclose(bloch_vector(density_matrix(v)), v, atol=1e-15)


def test_affine_channel_shape_validation():
    with pytest.raises(InvalidParameterError):
        AffineChannel(np.zeros(2), np.eye(3))
