"""Tests for hyperplanes, piecewise-affine values and submodularity checks."""

import itertools

import numpy as np
import pytest

from src.problems.base import local_check_set
from src.values.pwa import (
    Hyperplane,
    PwaValue,
    ValueStack,
    fit_hyperplane,
    is_submodular_near,
    is_submodular_on,
    lattice_box,
)


def cut(a, b) -> Hyperplane:
    return Hyperplane(np.asarray(a, dtype=float), b)


def brute_submodular(f, points, tol=1e-9) -> bool:
    """Pairwise check written directly from the definition."""
    pts = [tuple(p) for p in points]
    for y, z in itertools.combinations(pts, 2):
        hi = tuple(max(u, v) for u, v in zip(y, z))
        lo = tuple(min(u, v) for u, v in zip(y, z))
        if f(np.array(hi)) + f(np.array(lo)) > f(np.array(y)) + f(np.array(z)) + tol:
            return False
    return True


class TestHyperplane:
    """Tests for single affine cuts."""

    def test_evaluate(self):
        """H(x) = <a, x> + b."""
        assert cut([1.0, -2.0], 3.0)((2, 1)) == 3.0

    def test_non_finite_rejected(self):
        """NaN or infinite coefficients are rejected."""
        with pytest.raises(ValueError):
            cut([np.nan, 0.0], 1.0)
        with pytest.raises(ValueError):
            cut([0.0, 0.0], np.inf)

    def test_evaluate_many_matches_pointwise(self):
        """Vectorised and pointwise evaluation agree."""
        h = cut([0.5, -1.5], 2.0)
        points = lattice_box((2, 2))
        assert h.evaluate_many(points).tolist() == [h(p) for p in points]


class TestPwaValue:
    """Tests for evaluation and cut bookkeeping."""

    def test_min_of_two(self):
        """Cuts {0,5} and {(1,0),0} at (3,0) give 3."""
        q = PwaValue(2, [cut([0, 0], 5.0), cut([1, 0], 0.0)])
        assert q((3, 0)) == 3.0

    def test_constant(self):
        """A single constant cut evaluates to its offset everywhere."""
        q = PwaValue(2, [cut([0, 0], 5.0)])
        assert q((0, 0)) == 5.0
        assert q((7, 3)) == 5.0

    def test_min_of_slanted(self):
        """Cuts {(-1,-1),10} and {0,7} at (2,2) give 6."""
        q = PwaValue(2, [cut([-1, -1], 10.0), cut([0, 0], 7.0)])
        assert q((2, 2)) == 6.0

    def test_empty_raises(self):
        """Evaluating with no cuts is an error."""
        with pytest.raises(ValueError):
            PwaValue(2).evaluate((0, 0))

    def test_dimension_mismatch(self):
        """A cut of the wrong dimension is rejected."""
        with pytest.raises(ValueError):
            PwaValue(2).add_cut(cut([1.0], 0.0))

    def test_add_cut_lowers(self):
        """Adding {0,3} to {0,5} gives 3 everywhere."""
        q = PwaValue(2, [cut([0, 0], 5.0)])
        q.add_cut(cut([0, 0], 3.0))
        assert q((4, 1)) == 3.0

    def test_dominated_cut_retained(self):
        """Adding {0,5} to {0,3} keeps the value and both cuts."""
        q = PwaValue(2, [cut([0, 0], 3.0)])
        q.add_cut(cut([0, 0], 5.0))
        assert q((4, 1)) == 3.0
        assert len(q) == 2

    def test_growth_past_capacity(self):
        """Many cuts can be appended; the minimum is always taken."""
        q = PwaValue(1)
        for k in range(50):
            q.add_cut(cut([0.0], 100.0 - k), iteration=k)
        assert len(q) == 50
        assert q((0,)) == 51.0
        assert q.iterations[-1] == 49

    def test_supporting_tie(self):
        """At (5,0) both cuts equal 5; indices are 0-based."""
        q = PwaValue(2, [cut([0, 0], 5.0), cut([1, 0], 0.0)])
        assert q.supporting_indices((5, 0), tie_tol=1e-9) == [0, 1]

    def test_supporting_single(self):
        """At (3,0) only the slanted cut supports."""
        q = PwaValue(2, [cut([0, 0], 5.0), cut([1, 0], 0.0)])
        assert q.supporting_indices((3, 0)) == [1]

    def test_supporting_identical(self):
        """Three identical cuts all support."""
        q = PwaValue(1, [cut([2.0], 1.0)] * 3)
        assert q.supporting_indices((4,)) == [0, 1, 2]

    def test_prefix_is_frozen_copy(self):
        """prefix(k) keeps the first k cuts and cannot grow."""
        q = PwaValue(1, [cut([0.0], 5.0), cut([0.0], 3.0)])
        head = q.prefix(1)
        assert head((0,)) == 5.0
        assert head.frozen
        with pytest.raises(RuntimeError):
            head.add_cut(cut([0.0], 1.0))
        q.add_cut(cut([0.0], 1.0))
        assert len(head) == 1

    def test_frozen_rejects_cuts(self):
        """A frozen value refuses new cuts."""
        q = PwaValue(1, [cut([0.0], 5.0)])
        q.freeze()
        with pytest.raises(RuntimeError):
            q.add_cut(cut([0.0], 1.0))

    def test_compact_keeps_values_on_box(self):
        """Compaction drops cuts supporting nowhere and keeps the values on the box."""
        points = lattice_box((3, 3))
        q = PwaValue(2, [cut([-1, -1], 10.0), cut([0, 0], 100.0), cut([-2, 0], 12.0)])
        before = q.evaluate_many(points)
        removed = q.compact(points)
        assert removed == 1
        assert np.array_equal(q.evaluate_many(points), before)


class TestFitHyperplane:
    """Tests for interpolation through the successor simplex."""

    def test_origin(self):
        """Anchor (0,0), values [1,3,2] gives a=(2,1), b=1."""
        h = fit_hyperplane((0, 0), [1.0, 3.0, 2.0])
        assert h.a.tolist() == [2.0, 1.0]
        assert h.b == 1.0

    def test_offset_anchor(self):
        """Anchor (1,1), values [10,9,8] gives a=(-1,-2), b=13."""
        h = fit_hyperplane((1, 1), [10.0, 9.0, 8.0])
        assert h.a.tolist() == [-1.0, -2.0]
        assert h.b == 13.0
        assert h((1, 1)) == 10.0

    def test_constant(self):
        """Equal values give a flat cut."""
        h = fit_hyperplane((3, 1), [5.0, 5.0, 5.0])
        assert h.a.tolist() == [0.0, 0.0]
        assert h.b == 5.0

    def test_reconstruction(self):
        """The cut passes through all n+1 interpolation points."""
        rng = np.random.default_rng(3)
        for _ in range(20):
            anchor = rng.integers(0, 10, size=3)
            values = rng.uniform(-1e6, 1e6, size=4)
            h = fit_hyperplane(anchor, values)
            points = np.vstack([anchor, anchor + np.eye(3, dtype=int)])
            assert np.max(np.abs(h.evaluate_many(points) - values)) <= 1e-9 * 1e6

    def test_wrong_length(self):
        """n+1 values are required."""
        with pytest.raises(ValueError):
            fit_hyperplane((0, 0), [1.0, 2.0])

    def test_non_finite(self):
        """Non-finite interpolation values are rejected."""
        with pytest.raises(ValueError):
            fit_hyperplane((0, 0), [1.0, np.inf, 2.0])


class TestSubmodularity:
    """Tests for the pairwise lattice check."""

    def test_negative_product(self):
        """f = -y1*y2 is submodular on Z(0,0)."""
        report = is_submodular_on(lambda y: -float(y[0] * y[1]), local_check_set((0, 0)))
        assert report.submodular

    def test_positive_product(self):
        """f = +y1*y2 violates the inequality, the pair (1,0),(0,1) by 1."""
        f = lambda y: float(y[0] * y[1])  # noqa: E731
        report = is_submodular_on(f, local_check_set((0, 0)))
        assert not report.submodular
        assert report.worst_violation >= 1.0
        pair = is_submodular_on(f, [(1, 0), (0, 1)])
        assert pair.worst_violation == 1.0

    def test_affine_zero_violation(self):
        """Affine functions pass with zero violation."""
        report = is_submodular_on(cut([0.3, -1.7], 2.0), local_check_set((2, 5)))
        assert report.submodular
        assert report.worst_violation == pytest.approx(0.0, abs=1e-12)

    def test_single_point(self):
        """Fewer than two points is trivially submodular."""
        assert is_submodular_on(lambda y: 0.0, [(1, 1)]).submodular

    def test_near_matches_on(self):
        """The cached local check agrees with the generic one."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = PwaValue(3, [cut(rng.normal(size=3), rng.normal()) for _ in range(4)])
            x = rng.integers(0, 4, size=3)
            near = is_submodular_near(q, x)
            full = is_submodular_on(q, local_check_set(x))
            assert near.submodular == full.submodular
            assert near.worst_violation == pytest.approx(full.worst_violation, abs=1e-12)

    def test_against_brute_force(self):
        """Random cut minima agree with a direct pairwise check."""
        rng = np.random.default_rng(5)
        for _ in range(30):
            q = PwaValue(2, [cut(rng.normal(size=2), rng.normal()) for _ in range(3)])
            points = local_check_set(rng.integers(0, 3, size=2))
            assert bool(is_submodular_on(q, points)) == brute_submodular(q, points)


class TestValueStack:
    """Tests for the per-time-step stack."""

    def test_terminal_continuation(self):
        """continuation(t_bar + 1) is the exact terminal function."""
        stack = ValueStack.initialized(3, 1, lambda x: -2.0 * float(x[0]), cut([-1.0], 9.0))
        assert stack.continuation(4)((3,)) == -6.0
        assert stack.continuation(2)((3,)) == 6.0

    def test_q_range(self):
        """q(t) exists for t = 1..t_bar only."""
        stack = ValueStack(t_bar=2, n=1, terminal=lambda x: 0.0)
        with pytest.raises(IndexError):
            stack.q(0)
        with pytest.raises(IndexError):
            stack.q(3)

    def test_snapshot_independent(self):
        """A snapshot is frozen and ignores later cuts."""
        stack = ValueStack.initialized(2, 1, lambda x: 0.0, cut([0.0], 5.0))
        snap = stack.snapshot()
        stack.q(1).add_cut(cut([0.0], 1.0))
        assert snap.frozen
        assert snap.evaluate(1, (0,)) == 5.0
        assert stack.evaluate(1, (0,)) == 1.0
        assert stack.cut_count() == 3
