import numpy as np
import pytest

from chshcert.bounds import ReducedPoint, epsilon_rho
from chshcert.chsh_model import (
    REFERENCE_PARAMS,
    SUPPORT,
    BlockLabel,
    StateBlocks,
    StateFamilyParams,
    Strategy,
    block_observables,
    block_scores,
    build_state,
    chsh_score,
    dense_chsh_operator,
    dense_state,
    oracle_fidelity,
    reduce_strategy,
    total_chsh_score,
)
from chshcert.qubit_algebra import (
    H_MINUS,
    H_PLUS,
    PHI_PLUS,
    SQRT2,
    X,
    Z,
    ExtremalChannelParams,
    InvalidParameterError,
    InvalidStateError,
)


def test_chsh_score_values():
    assert chsh_score(0) == 2
    assert chsh_score(1) == pytest.approx(2 * SQRT2, abs=1e-15)
    assert chsh_score(0.061) == pytest.approx(2.050534, abs=1e-6)
    for bad in (-0.1, 2):
        with pytest.raises(InvalidParameterError):
            chsh_score(bad)


def test_block_observables_table():
    zp, zm, xp = 2 * np.kron(Z, H_PLUS), 2 * np.kron(Z, H_MINUS), 2 * np.kron(X, H_PLUS)
    expected = {
        (0, 0): zp, (0, 1): zp, (0, 2): zp,
        (1, 0): zp, (1, 1): SQRT2 * (np.kron(X, X) + np.kron(Z, Z)), (1, 2): xp,
        (2, 0): zp, (2, 1): zm, (2, 2): -zp,
    }
    obs = block_observables()
    assert set(obs) == {BlockLabel(*k) for k in expected}
    for k, w in expected.items():
        assert np.allclose(obs[BlockLabel(*k)], w, atol=1e-15), k


def test_block_label_range():
    with pytest.raises(InvalidParameterError):
        BlockLabel.checked(3, 0)


def test_build_state_support_and_weights():
    s = build_state(REFERENCE_PARAMS)
    assert set(s.weights) == set(SUPPORT)
    assert s.weights[BlockLabel(0, 0)] == pytest.approx(0.939 * 0.61381508 * 0.25, abs=1e-15)
    assert s.weights[BlockLabel(0, 0)] == pytest.approx(0.144093, abs=1e-6)
    assert sum(s.weights.values()) == pytest.approx(1, abs=1e-12)
    for rho in s.blocks.values():
        assert np.allclose(rho, rho.conj().T)
        assert np.trace(rho) == pytest.approx(1)
        assert np.linalg.eigvalsh(rho)[0] >= -1e-10


def test_build_state_pure_singlet():
    s = build_state(StateFamilyParams(1.0, 0.3, 0.7))
    assert dict(s.weights) == {BlockLabel(1, 1): 1.0}
    assert np.allclose(s.blocks[BlockLabel(1, 1)], PHI_PLUS)


def test_invalid_family_params():
    with pytest.raises(InvalidParameterError):
        StateFamilyParams(0.5, 1.2)
    with pytest.raises(InvalidStateError):
        StateBlocks({BlockLabel(1, 1): 0.5}, {BlockLabel(1, 1): PHI_PLUS})


def test_block_scores():
    scores = block_scores(build_state(REFERENCE_PARAMS))
    assert scores[BlockLabel(1, 1)] == pytest.approx(2 * SQRT2, abs=1e-12)
    for k in SUPPORT[1:]:
        assert scores[k] == pytest.approx(2, abs=1e-12), k


def test_score_independent_of_corner_weights(rng):
    for _ in range(100):
        nu, pc, q = rng.uniform(size=3)
        total = total_chsh_score(build_state(StateFamilyParams(nu, pc, q)))
        assert total == pytest.approx(chsh_score(nu), abs=1e-12)


def test_dense_assembly_matches_blocks():
    s = build_state(REFERENCE_PARAMS)
    rho, w = dense_state(s), dense_chsh_operator()
    assert np.trace(rho).real == pytest.approx(1)
    assert np.real(np.trace(w @ rho)) == pytest.approx(chsh_score(REFERENCE_PARAMS.nu), abs=1e-12)


def test_discard_and_prepare_gives_half(rng):
    strat = Strategy.discard_and_prepare()
    for _ in range(20):
        p = StateFamilyParams(*rng.uniform(size=3))
        assert oracle_fidelity(p, strat) == pytest.approx(0.5, abs=1e-14)


def test_identity_strategy_fidelity():
    # Phi+ block gives 1, corners 1/4 (1 + 1/sqrt2) up to sign, the (2,1) block 1/4 (1 + 1/sqrt2)
    p = REFERENCE_PARAMS
    corner = 0.25 * (1 + 1 / SQRT2)
    corner_22 = 0.25 * (1 - 1 / SQRT2)
    rest = 1 - p.nu
    expected = (
        p.nu
        + rest * p.p_C * p.q * corner
        + rest * p.p_C * (1 - p.q) / 2 * (corner + corner_22)
        + rest * (1 - p.p_C) * corner
    )
    got = oracle_fidelity(p, Strategy.identity())
    assert got == pytest.approx(expected, abs=1e-14)
    assert got == pytest.approx(0.411, abs=1e-3)
    assert oracle_fidelity(StateFamilyParams(1, 0.5), Strategy.identity()) == pytest.approx(1)


def test_reduce_strategy_examples():
    damp = ExtremalChannelParams.amplitude_damping()
    ident = ExtremalChannelParams.identity()
    x, branch = reduce_strategy(Strategy([ident, damp, ident], [ident] * 3))
    assert (x.a0t, x.a1t) == pytest.approx((0, np.pi / 2))
    assert x.theta == pytest.approx(np.pi / 2)
    x, branch = reduce_strategy(Strategy.identity())
    assert x.as_array() == pytest.approx([0, 0, 0, 0, np.pi / 2])
    assert branch == 1


def test_reduce_strategy_orders_angles_and_picks_branch():
    a = ExtremalChannelParams(0.2, 0.9)
    b = ExtremalChannelParams(0.9, 0.8)
    x, branch = reduce_strategy(Strategy([a] * 3, [b] * 3))
    assert x.is_canonical
    assert x.a0t == pytest.approx(np.arccos(0.9)) and x.a1t == pytest.approx(np.arccos(0.2))
    # lambda_2 = s0 s1 - sqrt(...) is negative for (0.2, 0.9) and positive for (0.9, 0.8)
    assert branch == -1


def test_dominance_is_tight_at_discard_and_prepare():
    strat = Strategy.discard_and_prepare()
    x, _ = reduce_strategy(strat)
    gap = 4 * oracle_fidelity(REFERENCE_PARAMS, strat) - 1 - epsilon_rho(x, REFERENCE_PARAMS, 0)
    assert gap == pytest.approx(0, abs=1e-12)


def test_dominance_on_random_strategies(rng):
    for _ in range(2000):
        strat = Strategy.random(rng)
        x, branch = reduce_strategy(strat)
        f = oracle_fidelity(REFERENCE_PARAMS, strat)
        assert 0 <= f <= 1
        assert 4 * f - 1 <= max(epsilon_rho(x, REFERENCE_PARAMS, 1), epsilon_rho(x, REFERENCE_PARAMS, -1)) + 1e-9
        # the branch reported by the reduction already dominates
        assert 4 * f - 1 <= epsilon_rho(x, REFERENCE_PARAMS, branch) + 1e-9


def test_strategy_validation():
    with pytest.raises(InvalidParameterError):
        Strategy([ExtremalChannelParams.identity()] * 2, [ExtremalChannelParams.identity()] * 3)
    s = Strategy({0: ExtremalChannelParams.identity(), 1: ExtremalChannelParams.identity(),
                  2: ExtremalChannelParams.identity()}, [ExtremalChannelParams.identity()] * 3)
    assert len(s.alice) == 3


def test_reduced_point_validation():
    with pytest.raises(InvalidParameterError):
        ReducedPoint(0, 0, 0, 0, 2.0)
