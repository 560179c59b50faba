import numpy as np
import pytest

from chshcert.bounds import EXCLUDED_LOWER, EXCLUDED_UPPER, X_EXC, epsilon_rho_batch
from chshcert.certifier import Status, load_checkpoint, resume
from chshcert.chsh_model import REFERENCE_PARAMS, StateFamilyParams, chsh_score
from chshcert.threshold_search import (
    FEASIBILITY_TOL,
    MaximizerConfig,
    ScanConfig,
    golden_section,
    maximize_epsilon,
    min_over_pc,
    pattern_search,
    reference_problem,
    reproduce_reference_example,
    scan,
    threshold_candidate,
)

FAST = MaximizerConfig(grid_points=7)


class TestMaximizer:
    def test_reference_maximum_is_the_vertex(self):
        m = maximize_epsilon(REFERENCE_PARAMS, "plus")
        assert m.value == pytest.approx(1, abs=1e-12)
        assert m.point.as_array() == pytest.approx(X_EXC, abs=1e-6)
        # the competing maximum sits at unital channels, just below 1
        assert 0.99 < m.runner_up < 1

    def test_pure_singlet(self):
        value, point = maximize_epsilon(StateFamilyParams(1.0, 0.3), 0)
        assert value == pytest.approx(3, abs=1e-12)
        assert point.as_array()[:4] == pytest.approx(np.zeros(4), abs=1e-6)

    def test_corners_only(self):
        value, point = maximize_epsilon(StateFamilyParams(0.0, 1.0), 0)
        assert value == pytest.approx(1, abs=1e-12)
        assert point.theta == pytest.approx(0, abs=1e-6)

    def test_never_below_sampling(self, rng):
        p = StateFamilyParams(0.08, 0.55)
        m = maximize_epsilon(p, 0, FAST)
        x = rng.uniform(0, np.pi / 2, size=(100_000, 5))
        assert m.value >= epsilon_rho_batch(x, p.nu, p.p_C, 0).max()

    def test_deterministic_and_monotone_in_starts(self):
        p = StateFamilyParams(0.07, 0.6)
        a = maximize_epsilon(p, 0, MaximizerConfig(grid_points=5, n_starts=1, n_random_starts=1))
        b = maximize_epsilon(p, 0, MaximizerConfig(grid_points=5, n_starts=1, n_random_starts=1))
        c = maximize_epsilon(p, 0, MaximizerConfig(grid_points=5, n_starts=6, n_random_starts=8))
        assert (a.value, a.runner_up) == (b.value, b.runner_up)
        assert c.value >= a.value and c.runner_up >= a.runner_up

    def test_pattern_search_on_quadratic(self):
        def f(x):
            return -np.sum((x - 0.3) ** 2, axis=1)

        x, fx = pattern_search(f, np.zeros((3, 5)), np.zeros(5), np.ones(5), 0.1, 1e-10)
        assert np.allclose(x, 0.3, atol=1e-8)


class TestOuterLoop:
    def test_golden_section(self):
        x, v = golden_section(lambda t: (t - 0.37) ** 2, 0, 1, 1e-8)
        assert x == pytest.approx(0.37, abs=1e-7)

    def test_no_phi_weight(self):
        m = min_over_pc(0.0, ScanConfig(pc_grid=5, maximizer=FAST))
        assert m.eps == pytest.approx(1, abs=1e-9)

    def test_reference_weight_is_feasible(self):
        m = min_over_pc(0.061, ScanConfig(pc_grid=10, maximizer=FAST))
        assert m.eps <= 1 + FEASIBILITY_TOL
        assert m.runner_up < 1
        # the reference corner mass is feasible as well, though not the only choice
        ref = maximize_epsilon(REFERENCE_PARAMS, 0)
        assert ref.value <= 1 + FEASIBILITY_TOL and ref.runner_up < 1
        assert m.runner_up <= maximize_epsilon(StateFamilyParams(0.061, 0.61381508), 0, FAST).runner_up

    def test_heavy_phi_weight_is_infeasible(self):
        assert min_over_pc(0.5, ScanConfig(pc_grid=5, maximizer=FAST)).eps > 1

    def test_scan_rows_and_candidate(self, rng):
        cfg = ScanConfig(nu_start=0.058, nu_end=0.066, nu_step=0.001, pc_grid=10, maximizer=FAST)
        rows = scan(cfg)
        assert [r.nu for r in rows] == pytest.approx(np.arange(0.058, 0.058 + 0.001 * len(rows), 0.001))
        for r in rows:
            assert r.chsh == pytest.approx(chsh_score(r.nu), abs=1e-12)
        assert not rows[-1].feasible and all(r.feasible for r in rows[:-1])
        cand = threshold_candidate(rows)
        assert 0.060 <= cand.nu <= 0.063
        assert cand.chsh == pytest.approx(2.05, abs=2e-3)
        x = rng.uniform(0, np.pi / 2, size=(100_000, 5))
        for r in rows[:-1]:
            assert epsilon_rho_batch(x, r.nu, r.best_pc, 0).max() <= 1

    def test_scan_infeasible_range(self):
        rows = scan(ScanConfig(nu_start=0.5, nu_end=0.6, nu_step=0.01, pc_grid=5, maximizer=FAST))
        assert len(rows) == 1 and not rows[0].feasible
        assert threshold_candidate(rows) is None

    def test_scan_single_step(self):
        rows = scan(ScanConfig(nu_start=0.01, nu_end=0.02, nu_step=0.5, pc_grid=3, maximizer=FAST))
        assert len(rows) == 1

    def test_invalid_scan_config(self):
        with pytest.raises(ValueError):
            ScanConfig(nu_step=0)


class TestReferenceRun:
    def test_small_budget_is_resumable(self, tmp_path):
        ckpt = tmp_path / "ref.json"
        rep = reproduce_reference_example(budget=1000, checkpoint_path=ckpt)
        assert rep.verdict == Status.BUDGET_EXCEEDED
        assert rep.certificate.frontier_size > 0
        assert rep.residual.valid
        assert rep.chsh == pytest.approx(2.0505, abs=1e-4)
        data = load_checkpoint(ckpt)
        assert data["config"]["meta"]["nu"] == REFERENCE_PARAMS.nu
        more = resume(ckpt, reference_problem(budget=100_000))
        assert more.boxes_processed > rep.certificate.boxes_processed

    def test_lowered_threshold_is_refuted_near_vertex(self):
        rep = reproduce_reference_example(budget=10**6, threshold=0.99)
        assert rep.verdict == Status.REFUTED
        w = rep.certificate.witness
        assert epsilon_rho_batch(w, REFERENCE_PARAMS.nu, REFERENCE_PARAMS.p_C, 0) > 0.99 - 1e-9
        assert not np.all((w >= EXCLUDED_LOWER) & (w <= EXCLUDED_UPPER))
        assert np.linalg.norm(w - X_EXC) < np.pi / 4

    def test_worker_count_invariance(self):
        a = reproduce_reference_example(budget=60_000, workers=1)
        b = reproduce_reference_example(budget=60_000, workers=3)
        for r in (a, b):
            assert r.verdict == Status.BUDGET_EXCEEDED
        assert a.certificate.boxes_processed == b.certificate.boxes_processed
        assert a.certificate.max_center_value == b.certificate.max_center_value

    def test_certifies_slice_with_mixed_ordering(self):
        # a0t in [pi/4, pi/2], a1t in [0, pi/4]: far from every near-maximum
        u = np.pi / 16
        p = reference_problem(lower=np.array([4, 0, 0, 0, 0]) * u, upper=np.array([8, 4, 8, 8, 8]) * u, budget=10**7)
        from chshcert.certifier import certify

        r = certify(p)
        assert r.status == Status.CERTIFIED
        assert r.max_center_value < 1
        assert r.covered_cells() == pytest.approx(p.grid_size)
