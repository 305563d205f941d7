import math

import numpy as np
import pytest

from mcstep.bayes import (
    DiscretePrior,
    bayes_decide,
    bayes_limit_action,
    component_null_posteriors,
    posterior,
    single_step_bayes_prior,
    step_down_posterior_log_numerators,
    step_down_prior_log_atoms,
)
from mcstep.critical_values import single_step_fwe_constant, step_down_constants
from mcstep.gaussian import IntraclassCovariance, log_density
from mcstep.model import ProblemSpec, enumerate_actions, loss
from mcstep.procedures import single_step_decide, step_down_decide

I2 = IntraclassCovariance(k=2, sigma2=1.0, rho=0.0)


class TestPosterior:
    def test_two_atom_likelihood_ratio(self):
        # w = 1/2 each at (0,0) and (2,0); at z = (1.5, 0) the null mass of
        # coordinate 1 is 1 / (1 + e^(2*1.5 - 2)) = 1 / (1 + e)
        prior = DiscretePrior([[0.0, 0.0], [2.0, 0.0]], [0.5, 0.5])
        summary = posterior(prior, [1.5, 0.0], I2)
        oracle = 1.0 / (1.0 + math.e)
        assert summary.component_null[0] == pytest.approx(oracle, abs=1e-12)
        assert summary.component_null[1] == pytest.approx(1.0, abs=1e-12)
        assert sum(summary.cell.values()) == pytest.approx(1.0, abs=1e-12)

    def test_single_atom_prior(self):
        prior = DiscretePrior([[1.0, 0.0]], [1.0])
        summary = posterior(prior, [0.3, -0.7], I2)
        assert summary.cell == {(1, 0): 1.0}

    def test_far_shift_drives_cell_posterior_monotonically(self):
        prior = DiscretePrior([[0.0, 0.0], [2.0, 0.0]], [0.5, 0.5])
        values = [posterior(prior, [z1, 0.0], I2).component_null[0]
                  for z1 in (0.0, 1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-5

    def test_aggregation_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            means = np.abs(rng.normal(size=(5, 3))) * rng.integers(0, 2, size=(5, 3))
            prior = DiscretePrior(means, rng.uniform(0.1, 1.0, size=5))
            cov = IntraclassCovariance(k=3, rho=0.2)
            z = rng.normal(size=3)
            summary = posterior(prior, z, cov)
            for i in range(3):
                manual = sum(p for v, p in summary.cell.items() if v[i] == 0)
                assert summary.component_null[i] == pytest.approx(manual, abs=1e-12)

    def test_batch_matches_single(self):
        prior = DiscretePrior([[0.0, 0.0], [1.0, 2.0]], [0.3, 0.7])
        Z = np.array([[0.1, 0.2], [1.5, -0.4], [3.0, 3.0]])
        batch = component_null_posteriors(prior, Z, I2)
        rows = np.vstack([component_null_posteriors(prior, z, I2) for z in Z])
        assert np.allclose(batch, rows, atol=1e-14)


class TestBayesDecide:
    def test_threshold_example(self):
        prior = DiscretePrior([[0.0, 0.0], [2.0, 0.0]], [0.5, 0.5])
        action = bayes_decide(prior, [1.5, 0.0], I2, b=1.0)
        assert action.tolist() == [1, 0]

    def test_null_only_prior_accepts_everything(self):
        prior = DiscretePrior([[0.0, 0.0]], [1.0])
        for z in ([5.0, 5.0], [-3.0, 9.0]):
            assert bayes_decide(prior, z, I2, b=1.0).tolist() == [0, 0]

    def test_threshold_limits_in_b(self):
        # false acceptances costly (b large): threshold near 1, reject
        # whenever the posterior null mass is not certain; false
        # acceptances cheap (b small): threshold near 0, accept whenever
        # the null retains any mass
        prior = DiscretePrior([[0.0, 0.0], [2.0, 2.0]], [0.01, 0.99])
        z = [1.0, 1.0]
        assert bayes_decide(prior, z, I2, b=1e9).tolist() == [1, 1]
        assert bayes_decide(prior, z, I2, b=1e-9).tolist() == [0, 0]

    def test_minimizes_posterior_expected_loss(self):
        # oracle: exhaustive enumeration over all actions
        rng = np.random.default_rng(1)
        for _ in range(100):
            k = int(rng.integers(1, 6))
            cov = IntraclassCovariance(k=k, rho=float(rng.uniform(-0.15, 0.6)))
            n_atoms = int(rng.integers(1, 6))
            means = np.abs(rng.normal(size=(n_atoms, k))) * rng.integers(0, 2, size=(n_atoms, k))
            prior = DiscretePrior(means, rng.uniform(0.05, 1.0, size=n_atoms))
            b = float(rng.uniform(0.3, 3.0))
            z = rng.normal(size=k)
            action = bayes_decide(prior, z, cov, b)
            summary = posterior(prior, z, cov)
            chosen = sum(p * loss(action, v, b) for v, p in summary.cell.items())
            best = min(sum(p * loss(a, v, b) for v, p in summary.cell.items())
                       for a in enumerate_actions(k))
            assert chosen <= best + 1e-12


class TestMatchingPrior:
    def test_solved_null_mass(self):
        # b=1, C=1.6449, alt=1: p/(1-p) = e^1.1449
        prior = single_step_bayes_prior((1.6449, 1.6449), b=1.0)
        odds = math.exp(1.6449 - 0.5)
        expected_p = odds / (1.0 + odds)
        assert expected_p == pytest.approx(0.7586, abs=2e-4)
        marginal_null = sum(w for mu, w in zip(prior.means, prior.weights) if mu[0] == 0)
        assert marginal_null == pytest.approx(expected_p, abs=1e-12)

    @pytest.mark.parametrize("b", [1.0, 2.0])
    def test_reproduces_single_step_on_grid(self, b):
        spec = ProblemSpec(k=2, rho=0.0, alpha=0.05)
        cv = single_step_fwe_constant(spec)
        prior = single_step_bayes_prior(cv, b)
        axis = np.linspace(-4.0, 6.0, 41)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        Z = np.column_stack([g1.ravel(), g2.ravel()])
        assert np.array_equal(bayes_decide(prior, Z, I2, b), single_step_decide(Z, cv))

    def test_posterior_pinned_at_constant(self):
        spec = ProblemSpec(k=2, rho=0.0, alpha=0.05)
        cv = single_step_fwe_constant(spec)
        b = 2.0
        prior = single_step_bayes_prior(cv, b)
        c = cv.values[0]
        q = component_null_posteriors(prior, [c, 0.0], I2)
        assert q[0] == pytest.approx(b / (b + 1.0), abs=1e-12)
        # strictly inside/outside just off the constant
        assert component_null_posteriors(prior, [c + 1e-6, 0.0], I2)[0] < b / (b + 1.0)
        assert component_null_posteriors(prior, [c - 1e-6, 0.0], I2)[0] > b / (b + 1.0)

    def test_requires_independence(self):
        spec = ProblemSpec(k=2, rho=0.3, alpha=0.05)
        cv = single_step_fwe_constant(spec, mc_reps=100_000, seed=1)
        with pytest.raises(ValueError):
            single_step_bayes_prior(cv, 1.0)


class TestLimitNumerators:
    def test_single_alternative_cell(self):
        nums = step_down_posterior_log_numerators([2.5, 1.0], (1.64, 1.95), 2)
        assert nums[(1, 0)] == pytest.approx((2.5 - 1.95) * 4, abs=1e-12)
        assert nums[(0, 1)] == pytest.approx((1.0 - 1.95) * 4, abs=1e-12)

    def test_all_null_cell_is_one(self):
        for n in (2, 5, 9):
            nums = step_down_posterior_log_numerators([0.3, -1.0], (1.64, 1.95), n)
            assert nums[(0, 0)] == 0.0

    def test_pair_cell_matches_direct_sum(self):
        z = np.array([2.5, 1.0])
        c = (1.64, 1.95)
        n = 3
        nums = step_down_posterior_log_numerators(z, c, n)
        direct = 0.5 * (
            math.exp((z[0] - c[1]) * n**2 + (z[1] - c[0]) * n)
            + math.exp((z[1] - c[1]) * n**2 + (z[0] - c[0]) * n)
        )
        assert nums[(1, 1)] == pytest.approx(math.log(direct), abs=1e-12)

    def test_materialized_atoms_reproduce_numerators(self):
        # posterior numerators computed from the explicit atoms differ from
        # the closed form by one z-only constant across all cells
        z = np.array([1.2, 2.7, 0.4])
        c = (1.3, 1.8, 2.2)
        n = 2
        cov = IntraclassCovariance(k=3, sigma2=1.0, rho=0.0)
        means, logw = step_down_prior_log_atoms(c, n)
        nums = step_down_posterior_log_numerators(z, c, n)
        offsets = []
        for bits, lognum in nums.items():
            members = [j for j in range(means.shape[0])
                       if tuple((means[j] > 0).astype(int)) == bits]
            vals = [logw[j] + log_density(z, means[j], cov) for j in members]
            peak = max(vals)
            atom_lognum = peak + math.log(sum(math.exp(v - peak) for v in vals))
            offsets.append(atom_lognum - lognum)
        assert np.ptp(offsets) < 1e-9

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            step_down_posterior_log_numerators(np.zeros(9), tuple(range(1, 10)), 2)

    def test_requires_increasing_constants(self):
        with pytest.raises(ValueError):
            step_down_posterior_log_numerators([0.0, 0.0], (2.0, 1.0), 2)


class TestLimitAction:
    def setup_method(self):
        self.spec = ProblemSpec(k=3, rho=0.0, alpha=0.05)
        self.cv = step_down_constants(self.spec)

    def test_all_below_lowest_constant(self):
        action, report = bayes_limit_action([0.5, -1.0, 1.2], self.cv)
        assert action.tolist() == [0, 0, 0]
        assert report.conclusive
        assert all(row.action == (0, 0, 0) for row in report.rows)

    def test_matches_step_down_with_margin(self):
        rng = np.random.default_rng(2)
        c_desc = np.asarray(self.cv.values)[::-1]
        checked = 0
        while checked < 60:
            z = rng.normal(loc=rng.uniform(-1, 4, size=3))
            if np.min(np.abs(np.sort(z)[::-1] - c_desc)) <= 0.1:
                continue
            checked += 1
            action, report = bayes_limit_action(z, self.cv)
            assert report.conclusive, z
            assert report.matches_step_down, z
            assert np.array_equal(action, step_down_decide(z, self.cv))

    def test_boundary_is_inconclusive(self):
        z = [self.cv.values[-1], -1.0, -2.0]  # largest exactly at the top constant
        action, report = bayes_limit_action(z, self.cv)
        assert action is None
        assert report.boundary and not report.conclusive
        assert report.matches_step_down is None

    def test_early_transient_is_not_stabilization(self):
        # all three comparisons succeed but the smallest margin is modest;
        # small n favors the two-reject cell before the factorial weight
        # is overcome, so only the tail counts
        z = np.array([2.6721001, 1.85207786, 3.45976317])
        action, report = bayes_limit_action(z, self.cv)
        assert report.conclusive
        assert action.tolist() == [1, 1, 1]
        assert report.rows[0].action != (1, 1, 1)

    def test_report_table_shape(self):
        _, report = bayes_limit_action([0.1, 0.2, 0.3], self.cv)
        text = report.to_table()
        lines = text.strip().splitlines()
        assert lines[0] == "n,top_posterior,action,matches_step_down"
        assert len(lines) == 1 + len(report.rows)

    def test_winning_cell_posterior_monotone_after_stabilization(self):
        # diagnostic: once the action settles, the winning cell's posterior
        # mass keeps growing along the schedule
        rng = np.random.default_rng(77)
        c_desc = np.asarray(self.cv.values)[::-1]
        checked = 0
        while checked < 40:
            z = rng.normal(loc=rng.uniform(-1, 4, size=3))
            if np.min(np.abs(np.sort(z)[::-1] - c_desc)) <= 0.1:
                continue
            checked += 1
            _, report = bayes_limit_action(z, self.cv)
            assert report.conclusive
            start = next(i for i, r in enumerate(report.rows)
                         if r.n == report.stabilized_at)
            tail = [r.top_posterior for r in report.rows[start:]]
            assert all(a <= b + 1e-12 for a, b in zip(tail, tail[1:]))
