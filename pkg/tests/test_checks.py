"""Tests for the verification utilities."""

import itertools

import numpy as np
import pytest

from src.oracle.checks import (
    check_concave_extensible,
    check_submodular_all,
    concave_closure_at,
    verification_passed,
    verification_report,
    verify_upper_bound,
)
from src.problems.base import StateSpace
from src.solver.gbdp import initial_stack
from src.values.pwa import SUB_TOL_FACTOR, Hyperplane, PwaValue, ValueStack


def brute_submodular(values: np.ndarray, space: StateSpace, tol: float) -> bool:
    states = [tuple(s) for s in space.states()]
    f = dict(zip(states, values))
    for y, z in itertools.combinations(states, 2):
        hi = tuple(max(a, b) for a, b in zip(y, z))
        lo = tuple(min(a, b) for a, b in zip(y, z))
        if f[hi] + f[lo] > f[y] + f[z] + tol:
            return False
    return True


def triangle_weights(space: StateSpace):
    """Barycentric weights of every state in every non-degenerate triangle of the 2-D box."""
    states = space.states().astype(float)
    layouts = []
    for tri in itertools.combinations(range(states.shape[0]), 3):
        corners = states[list(tri)]
        matrix = np.vstack([corners.T, np.ones(3)])
        if abs(np.linalg.det(matrix)) < 1e-12:
            continue
        rhs = np.vstack([states.T, np.ones(states.shape[0])])
        weights = np.linalg.solve(matrix, rhs).T
        inside = np.all(weights >= -1e-12, axis=1)
        layouts.append((list(tri), weights, inside))
    return layouts


def brute_extensible(values: np.ndarray, layouts, tol: float) -> bool:
    """Concave envelope as the best convex combination over triangles of the box."""
    envelope = values.copy()
    for tri, weights, inside in layouts:
        interpolated = weights @ values[tri]
        envelope = np.where(inside, np.maximum(envelope, interpolated), envelope)
    return bool(np.all(envelope - values <= tol))


def random_functions(rng: np.random.Generator, space: StateSpace, count: int):
    """Mix of cut minima, separable concave functions and plain noise."""
    states = space.states().astype(float)
    for k in range(count):
        kind = k % 3
        if kind == 0:
            cuts = [(rng.normal(size=2), rng.normal()) for _ in range(3)]
            yield np.min([states @ a + b for a, b in cuts], axis=0)
        elif kind == 1:
            total = states.sum(axis=1)
            yield -rng.uniform(0.1, 2.0) * total**2 + rng.normal(size=2) @ states.T
        else:
            yield rng.normal(size=states.shape[0])


class TestVerifyUpperBound:
    """Tests for the Q - V scan."""

    def test_initial_stack_dominates(self, short_problem, short_exact):
        """The fixed-point initialiser is an upper bound everywhere."""
        report = verify_upper_bound(initial_stack(short_problem), short_exact)
        assert report.worst_gap >= 0.0
        assert report.passed()

    def test_corrupted_cut_detected(self, short_problem, short_exact):
        """A cut far below V at t = 2 gives a negative gap there."""
        stack = initial_stack(short_problem)
        low = Hyperplane(np.full(2, -44.53), short_problem.initial_upper_bound().b - 10_000.0)
        stack.q(2).add_cut(low)
        report = verify_upper_bound(stack, short_exact)
        assert report.worst_gap < 0.0
        assert report.argmin_t == 2
        assert not report.passed()

    def test_dimension_mismatch(self, short_exact):
        """Stacks and tables must describe the same instance."""
        stack = ValueStack.initialized(2, 2, lambda x: 0.0, Hyperplane(np.zeros(2), 1.0))
        with pytest.raises(ValueError):
            verify_upper_bound(stack, short_exact)


class TestSubmodularAll:
    """Tests for the full-box submodularity scan."""

    def test_affine_cost(self):
        """Affine C is modular: zero violation."""
        space = StateSpace((6, 6, 6))
        report = check_submodular_all(lambda x: -0.083 * float(np.sum(x)), space)
        assert report.submodular
        assert report.worst_violation == pytest.approx(0.0, abs=1e-12)

    def test_positive_product(self):
        """f = y1*y2 on the unit square violates by 1."""
        space = StateSpace((1, 1))
        report = check_submodular_all(lambda x: float(x[0] * x[1]), space)
        assert not report.submodular
        assert report.worst_violation == 1.0
        assert set(report.worst_pair) == {(0, 1), (1, 0)}

    def test_terminal_layer_submodular(self, short_problem, short_exact):
        """The terminal row -C of the exact table is modular."""
        layer = short_exact.layer(short_problem.t_bar + 1)
        assert check_submodular_all(layer, short_problem.space).submodular

    def test_wrong_length(self):
        """A value vector must cover the box."""
        with pytest.raises(ValueError):
            check_submodular_all(np.zeros(3), StateSpace((1, 1)))

    def test_against_brute_force(self):
        """Random functions on a 4x4 box agree with a direct pairwise check."""
        space = StateSpace((3, 3))
        rng = np.random.default_rng(17)
        for values in random_functions(rng, space, 50):
            tol = SUB_TOL_FACTOR * (1.0 + float(np.max(np.abs(values))))
            assert bool(check_submodular_all(values, space)) == brute_submodular(values, space, tol)


class TestConcaveClosure:
    """Tests for the concave closure and extensibility check."""

    def test_affine_is_own_closure(self):
        """Affine functions equal their closure."""
        space = StateSpace((2, 2))
        f = Hyperplane(np.array([1.5, -0.5]), 2.0)
        for x in space.states():
            assert concave_closure_at(f, space, x) == pytest.approx(f(x), abs=1e-8)

    def test_chord(self):
        """f = (0, 0, 2) on {0,1,2}: closure at 1 is the chord value 1."""
        space = StateSpace((2,))
        assert concave_closure_at(np.array([0.0, 0.0, 2.0]), space, (1,)) == pytest.approx(1.0)

    def test_affine_vector(self):
        """f = (0, 1, 2): closure at 1 is 1."""
        space = StateSpace((2,))
        assert concave_closure_at(np.array([0.0, 1.0, 2.0]), space, (1,)) == pytest.approx(1.0)

    def test_not_extensible(self):
        """f = (0, 0, 2) is below its closure at 1."""
        report = check_concave_extensible(np.array([0.0, 0.0, 2.0]), StateSpace((2,)))
        assert not report.extensible
        assert report.worst_state == (1,)
        assert report.worst_gap == pytest.approx(1.0)

    def test_pwa_extensible(self):
        """Any minimum of cuts restricted to the box is extensible."""
        rng = np.random.default_rng(2)
        q = PwaValue(2, [Hyperplane(rng.normal(size=2), rng.normal()) for _ in range(4)])
        assert check_concave_extensible(q, StateSpace((3, 3))).extensible

    def test_size_limit(self):
        """The closure is limited to small boxes."""
        with pytest.raises(ValueError):
            check_concave_extensible(np.zeros(16), StateSpace((1, 1, 1, 1)))

    def test_against_brute_force(self):
        """Random functions on a 4x4 box agree with a triangle enumeration."""
        space = StateSpace((3, 3))
        layouts = triangle_weights(space)
        rng = np.random.default_rng(23)
        for values in random_functions(rng, space, 50):
            tol = 1e-8 * max(1.0, float(np.max(np.abs(values))))
            expected = brute_extensible(values, layouts, tol)
            assert bool(check_concave_extensible(values, space)) == expected


class TestVerificationReport:
    """Tests for the verify verdict."""

    def test_initial_stack_report(self, short_problem, short_exact):
        """The initialiser alone passes the upper-bound check."""
        report = verification_report(initial_stack(short_problem), short_exact,
                                     short_problem.default_eps_opt())
        assert report["prop1_pass"] is True
        assert report["prop1_worst_gap"] >= 0.0
        assert report["concave_extensible_all_t"] in (True, False)
        assert report["exact_value"] == pytest.approx(short_exact.v1_origin)
        assert report["converged"] is False

    def test_passed_requires_all_checks(self):
        """Upper bound, submodularity and extensibility must all hold; None is skipped."""
        base = {"prop1_pass": True, "submodular_all_t": True, "concave_extensible_all_t": None}
        assert verification_passed(base)
        assert not verification_passed({**base, "prop1_pass": False})
        assert not verification_passed({**base, "submodular_all_t": False})
        assert not verification_passed({**base, "concave_extensible_all_t": False})
