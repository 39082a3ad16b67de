import math

import numpy as np
import pytest

from corrbandit import policy, scalarize
from corrbandit.errors import ContractViolation
from corrbandit.policy import (AGNOSTIC, KNOWN_BUDGET, Certificate, Dims,
                               PolicyConfig, VerificationPlanner,
                               certificates_for_all, confidence_radius,
                               filter_and_commit, schedule_verification,
                               select_arm, verified_certificate)
from corrbandit.protocol import S1, S2, S3, ProtocolSpec

DIMS = Dims(dim=2, n_arms=5, n_agents=3, horizon=500)
SPEC2 = scalarize.linear([0.5, 0.5])


class TestConfidenceRadius:
    def test_agnostic_zero_count_guard(self):
        cfg = PolicyConfig(delta=0.05, corruption_knowledge=AGNOSTIC)
        expected = math.sqrt(math.log(2 * 2 * 5 * 3 * 500 / 0.05) / 2.0)
        got = confidence_radius(cfg, ProtocolSpec(S2), 0, DIMS, gamma=100.0)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_zero_budget_reduces_to_hoeffding(self):
        for kind in (S1, S2, S3):
            cfg = PolicyConfig(delta=0.01, corruption_knowledge=KNOWN_BUDGET)
            agnostic = PolicyConfig(delta=0.01, corruption_knowledge=AGNOSTIC)
            assert confidence_radius(cfg, ProtocolSpec(kind), 7, DIMS, 0.0) == \
                confidence_radius(agnostic, ProtocolSpec(kind), 7, DIMS, 123.0)

    def test_plug_in_arithmetic(self):
        # independent evaluation of the stated example values
        dims = Dims(dim=5, n_arms=20, n_agents=5, horizon=10_000)
        cfg = PolicyConfig(delta=0.01, corruption_knowledge=KNOWN_BUDGET)
        expected = math.sqrt(math.log(2 * 5 * 20 * 5 * 10_000 / 0.01) / 200.0) + 50.0 / 100.0
        got = confidence_radius(cfg, ProtocolSpec(S1), 100, dims, gamma=10.0)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_replication_inflates_raw_sharing_only(self):
        cfg = PolicyConfig(corruption_knowledge=KNOWN_BUDGET)
        r1 = confidence_radius(cfg, ProtocolSpec(S1), 50, DIMS, 6.0)
        r2 = confidence_radius(cfg, ProtocolSpec(S2), 50, DIMS, 6.0)
        r3 = confidence_radius(cfg, ProtocolSpec(S3), 50, DIMS, 6.0)
        assert r2 == r3
        assert r1 - r2 == pytest.approx((DIMS.n_agents - 1) * 6.0 / 50.0)

    def test_vectorized_counts(self):
        cfg = PolicyConfig(corruption_knowledge=AGNOSTIC)
        m = np.array([0, 1, 10, 100])
        out = confidence_radius(cfg, ProtocolSpec(S2), m, DIMS, 0.0)
        assert out.shape == (4,)
        assert out[0] == out[1]  # max{1, m} guard
        assert np.all(np.diff(out[1:]) < 0)


class TestSelectArm:
    def test_all_unpulled_ties_to_first(self):
        means = np.zeros((4, 2))
        radii = np.full(4, 10.0)
        assert select_arm(SPEC2, means, radii) == 0

    def test_dominant_arm_wins(self):
        means = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        radii = np.full(3, 1e-4)
        assert select_arm(SPEC2, means, radii) == 0

    def test_identical_state_ties_to_lower_index(self):
        means = np.array([[0.2, 0.2], [0.5, 0.5], [0.5, 0.5]])
        radii = np.array([0.01, 0.02, 0.02])
        assert select_arm(SPEC2, means, radii) == 1

    def test_depends_only_on_index_ordering(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            means = rng.uniform(0, 1, (5, 2))
            radii = rng.uniform(0, 0.3, 5)
            base = select_arm(SPEC2, means, radii)
            # a common positive rescale of all radii that keeps every corner
            # ordering (here: tiny enough to not cross any strict ordering)
            vals = scalarize.corner_values(SPEC2, means, radii)
            scaled = select_arm(SPEC2, means, radii * 1.0)
            assert scaled == base
            assert base == int(np.argmax(vals))


class TestVerificationPlanner:
    def test_zero_budget_never_verifies(self):
        planner = VerificationPlanner(0, 3, 4, 100)
        for t in (1, 2, 50):
            for n in range(3):
                assert schedule_verification(planner, t, n) == (False, None)

    def test_full_coverage_with_budget_k(self):
        # nu = K and N >= K: every arm verified exactly once within ceil(K/N) rounds
        planner = VerificationPlanner(4, 6, 4, 100)
        seen = []
        for n in range(6):
            flag, arm = planner.decision(1, n)
            if flag:
                seen.append(arm)
        assert sorted(seen) == [0, 1, 2, 3]
        assert planner.decision(2, 0) == (False, None)

    def test_total_slots_capped_by_horizon(self):
        planner = VerificationPlanner(10_000, 2, 3, 10)
        assert planner.total_slots == 20

    def test_quota_balanced(self):
        planner = VerificationPlanner(11, 2, 4, 100)
        assert planner.total_slots == 11
        assert planner.quota.tolist() == [3, 3, 3, 2]  # floor/ceil of nu/K

    def test_front_loaded_in_agent_then_round_order(self):
        planner = VerificationPlanner(5, 2, 3, 100)
        got = [(t, n, *planner.decision(t, n)) for t in (1, 2, 3) for n in (0, 1)]
        # slots: (1,0)->arm0 (1,1)->arm1 (2,0)->arm2 (2,1)->arm0 (3,0)->arm1
        assert got == [(1, 0, True, 0), (1, 1, True, 1), (2, 0, True, 2),
                       (2, 1, True, 0), (3, 0, True, 1), (3, 1, False, None)]


class TestCertificates:
    def test_unverified_arm_has_max_guard_width(self):
        cert = verified_certificate(SPEC2, np.zeros(2), 0, DIMS, 0.05)
        eps = math.sqrt(math.log(2 * 2 * 5 * 3 * 500 / 0.05) / 2.0)
        assert cert.lcb == pytest.approx(0.0 - eps)
        assert cert.ucb == pytest.approx(0.0 + eps)

    def test_exact_mean_limit(self):
        # many verified samples exactly at the arm mean: centre hits theta
        h = 4096
        mu = np.array([0.3, 0.7])
        cert = verified_certificate(SPEC2, mu * h, h, DIMS, 0.05)
        theta = scalarize.evaluate(SPEC2, mu)
        assert (cert.lcb + cert.ucb) / 2 == pytest.approx(theta)
        assert cert.ucb - cert.lcb < 0.1

    def test_scalar_arithmetic_example(self):
        # one objective, verified rewards {1, 0, 1, 1}
        dims = Dims(dim=1, n_arms=3, n_agents=2, horizon=100)
        spec = scalarize.linear([1.0])
        cert = verified_certificate(spec, np.array([3.0]), 4, dims, 0.05)
        eps = math.sqrt(math.log(2 * 1 * 3 * 2 * 100 / 0.05) / 8.0)
        assert (cert.lcb + cert.ucb) / 2 == pytest.approx(0.75)
        assert cert.ucb - cert.lcb == pytest.approx(2 * eps)

    def test_width_invariant(self):
        certs = certificates_for_all(SPEC2, np.array([[1.0, 2.0], [0.0, 0.0]]),
                                     np.array([4, 0]), Dims(2, 2, 1, 50), 0.1)
        ell = math.log(2 * 2 * 2 * 1 * 50 / 0.1)
        for cert, h in zip(certs, (4, 0)):
            assert cert.lcb <= cert.ucb
            width = 2 * math.sqrt(ell / (2 * max(1, h)))
            assert cert.ucb - cert.lcb == pytest.approx(width)


class TestFilterAndCommit:
    def cert(self, arm, lo, hi, h=5):
        return Certificate(arm, lo, hi, h)

    def test_dominated_arm_eliminated(self):
        certs = [self.cert(0, 0.6, 0.8), self.cert(1, 0.3, 0.5)]
        eliminated, committed = filter_and_commit(certs, np.array([3, 3]))
        assert eliminated == {1}
        assert committed == 0

    def test_overlap_keeps_both(self):
        certs = [self.cert(0, 0.4, 0.7), self.cert(1, 0.5, 0.8)]
        eliminated, committed = filter_and_commit(certs, np.array([3, 3]))
        assert eliminated == set() and committed is None

    def test_unique_survivor_commits(self):
        certs = [self.cert(0, 0.7, 0.8), self.cert(1, 0.2, 0.3), self.cert(2, 0.1, 0.2)]
        eliminated, committed = filter_and_commit(certs, np.array([1, 1, 1]))
        assert eliminated == {1, 2} and committed == 0

    def test_commit_blocked_without_full_verified_coverage(self):
        certs = [self.cert(0, 0.7, 0.8), self.cert(1, 0.2, 0.3), self.cert(2, 0.1, 0.2)]
        _, committed = filter_and_commit(certs, np.array([2, 2, 0]))
        assert committed is None

    def test_missing_certificates_block_elimination_of_that_arm(self):
        certs = [self.cert(0, 0.7, 0.8), None, self.cert(2, 0.1, 0.2)]
        eliminated, committed = filter_and_commit(certs, np.array([1, 1, 1]))
        assert eliminated == {2}
        assert committed is None  # arm 1 survives without a certificate

    def test_exact_tie_never_eliminates(self):
        certs = [self.cert(0, 0.5, 0.6), self.cert(1, 0.4, 0.5)]
        eliminated, _ = filter_and_commit(certs, np.array([1, 1]))
        assert eliminated == set()


def test_policy_config_validation():
    with pytest.raises(ContractViolation):
        PolicyConfig(delta=0.0)
    with pytest.raises(ContractViolation):
        PolicyConfig(corruption_knowledge="psychic")
    with pytest.raises(ContractViolation):
        PolicyConfig(nu=-1)
