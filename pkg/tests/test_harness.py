from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import table, uniform_space
from interaction_bounds.functionals import interaction
from interaction_bounds.harness import (
    CHECKS,
    RandomInstanceSpec,
    SuiteReport,
    TailEstimate,
    centered_evaluator,
    exact_tail,
    generate_instance,
    mc_tail,
    run_property_suite,
    space_sampler,
)
from interaction_bounds.rng import derive_seed, substream
from interaction_bounds.space import TabulatedFunction, expectation


class TestRng:
    def test_substreams_reproducible(self):
        a = substream(7, 1, 2).integers(0, 1 << 32, size=4)
        b = substream(7, 1, 2).integers(0, 1 << 32, size=4)
        assert np.array_equal(a, b)

    def test_substreams_distinct(self):
        a = substream(7, 1, 2).integers(0, 1 << 32, size=4)
        b = substream(7, 1, 3).integers(0, 1 << 32, size=4)
        assert not np.array_equal(a, b)

    def test_derive_seed_range(self):
        s = derive_seed(123, 4, 5)
        assert 0 <= s < 1 << 63
        assert s == derive_seed(123, 4, 5)


class TestGenerateInstance:
    def test_deterministic(self):
        spec = RandomInstanceSpec(seed=42)
        s1, f1 = generate_instance(spec)
        s2, f2 = generate_instance(spec)
        assert s1 == s2
        assert np.array_equal(f1.values, f2.values)

    def test_different_seeds_differ(self):
        _, f1 = generate_instance(RandomInstanceSpec(seed=1))
        _, f2 = generate_instance(RandomInstanceSpec(seed=2))
        assert f1.space != f2.space or not np.array_equal(f1.values, f2.values)

    def test_pure_sum_has_no_interaction(self):
        spec = RandomInstanceSpec(values="sum_plus_perturbation", epsilon=0.0, seed=5)
        _, f = generate_instance(spec)
        assert interaction(f) <= 1e-12

    def test_uniform_values_in_range(self):
        spec = RandomInstanceSpec(n_axes=(3, 3), axis_size=(3, 3), seed=9)
        space, f = generate_instance(spec)
        assert space.size == 27
        assert f.values.min() >= -1.0 and f.values.max() <= 1.0

    def test_dirichlet_weights_valid(self):
        spec = RandomInstanceSpec(weights="dirichlet", seed=11)
        space, _ = generate_instance(spec)
        for axis in space.axes:
            assert abs(math.fsum(axis.weights) - 1.0) <= 1e-12

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            RandomInstanceSpec(n_axes=(3, 2))
        with pytest.raises(ValueError):
            RandomInstanceSpec(values="cauchy")
        with pytest.raises(ValueError):
            RandomInstanceSpec(weights="zipf")
        with pytest.raises(ValueError):
            RandomInstanceSpec(epsilon=-1.0)


class TestExactTail:
    def test_beyond_range_is_zero(self):
        f = table(uniform_space(2, 2), lambda c: float(sum(c)))
        tmax = f.max() - expectation(f)
        assert exact_tail(f, tmax) == 0.0
        assert exact_tail(f, tmax + 1.0) == 0.0

    def test_below_range_is_one(self):
        f = table(uniform_space(2, 2), lambda c: float(sum(c)))
        tmin = f.min() - expectation(f)
        assert exact_tail(f, tmin - 1e-9) == pytest.approx(1.0, abs=1e-12)

    def test_two_point(self):
        f = table(uniform_space(2), lambda c: float(c[0]))
        assert exact_tail(f, 0.4) == pytest.approx(0.5)

    def test_nonincreasing(self):
        rng = np.random.default_rng(3)
        space = uniform_space(3, 3)
        f = TabulatedFunction(space, rng.uniform(-1, 1, space.size))
        ts = np.linspace(-2.0, 2.0, 41)
        tails = [exact_tail(f, float(t)) for t in ts]
        assert all(a >= b for a, b in zip(tails, tails[1:]))


class TestMcTail:
    def test_constant_function(self):
        space = uniform_space(2, 2)
        f = TabulatedFunction.constant(space, 1.0)
        est = mc_tail(space_sampler(space), centered_evaluator(f), 0.1, 500, seed=1)
        assert est.mc_estimate == 0.0
        assert est.exact is None
        assert est.n_samples == 500

    def test_agrees_with_exact(self):
        rng = np.random.default_rng(4)
        space = uniform_space(3, 2, 2)
        f = TabulatedFunction(space, rng.uniform(-1, 1, space.size))
        for t in (0.1, 0.4):
            exact = exact_tail(f, t)
            est = mc_tail(
                space_sampler(space), centered_evaluator(f), t, 20_000, seed=2
            )
            stderr = max(est.mc_stderr, 1e-4)
            assert abs(est.mc_estimate - exact) <= 4.0 * stderr

    def test_deterministic(self):
        space = uniform_space(2, 3)
        rng = np.random.default_rng(5)
        f = TabulatedFunction(space, rng.uniform(-1, 1, space.size))
        a = mc_tail(space_sampler(space), centered_evaluator(f), 0.2, 1000, seed=3)
        b = mc_tail(space_sampler(space), centered_evaluator(f), 0.2, 1000, seed=3)
        assert a == b

    def test_stderr_scales_with_samples(self):
        space = uniform_space(2, 3)
        rng = np.random.default_rng(6)
        f = TabulatedFunction(space, rng.uniform(-1, 1, space.size))
        small = mc_tail(space_sampler(space), centered_evaluator(f), 0.1, 2000, seed=4)
        big = mc_tail(space_sampler(space), centered_evaluator(f), 0.1, 8000, seed=4)
        assert 0.3 <= big.mc_stderr / small.mc_stderr <= 0.7  # about one half


class TestPropertySuite:
    def test_count_zero_gives_empty_report(self):
        report = run_property_suite(RandomInstanceSpec(seed=1), count=0)
        assert report.checks == ()
        assert report.passed

    def test_small_run_passes(self):
        report = run_property_suite(
            RandomInstanceSpec(seed=2024), count=6, entropy_count=2, scalar_count=10
        )
        assert report.passed, report.format_table()
        names = {c.name for c in report.checks}
        assert names == {name for name, _ in CHECKS}
        by_name = {c.name: c for c in report.checks}
        assert by_name["efron_stein"].instances == 6
        assert by_name["herbst_identity"].instances == 2 * 4  # beta grid

    def test_sparse_values_also_pass(self):
        report = run_property_suite(
            RandomInstanceSpec(seed=77, values="sparse"),
            count=4,
            entropy_count=1,
            scalar_count=5,
        )
        assert report.passed, report.format_table()

    def test_dirichlet_weights_also_pass(self):
        report = run_property_suite(
            RandomInstanceSpec(seed=78, weights="dirichlet"),
            count=4,
            entropy_count=1,
            scalar_count=5,
        )
        assert report.passed, report.format_table()

    def test_injected_bug_is_reported_with_witness(self):
        report = run_property_suite(
            RandomInstanceSpec(seed=3), count=3, entropy_count=1, scalar_count=5,
            inject_bug=True,
        )
        assert not report.passed
        failed = {c.name: c for c in report.checks if not c.passed}
        assert "efron_stein" in failed
        assert failed["efron_stein"].witness_seed is not None

    def test_witness_seed_reproduces_instance(self):
        spec = RandomInstanceSpec(seed=3)
        report = run_property_suite(
            spec, count=3, entropy_count=1, scalar_count=5, inject_bug=True
        )
        witness = next(
            c.witness_seed for c in report.checks if c.name == "efron_stein"
        )
        import dataclasses

        _, f = generate_instance(dataclasses.replace(spec, seed=witness))
        assert f.space.size >= 2  # regenerable instance

    def test_deterministic_report(self):
        a = run_property_suite(
            RandomInstanceSpec(seed=5), count=4, entropy_count=1, scalar_count=5
        )
        b = run_property_suite(
            RandomInstanceSpec(seed=5), count=4, entropy_count=1, scalar_count=5
        )
        assert a.to_json() == b.to_json()

    def test_format_table_lists_all_checks(self):
        report = run_property_suite(
            RandomInstanceSpec(seed=6), count=2, entropy_count=1, scalar_count=3
        )
        text = report.format_table()
        for name, _ in CHECKS:
            assert name in text
