import concurrent.futures
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopdecode.coop_core import (
    AssignmentConstraints,
    CoopConfig,
    CostDecomposition,
    PropagationMatrix,
    TableSubproblem,
    build_propagation_matrix,
    consensus_check,
    coop_iterate,
    gap_certificate,
    pairwise_decomposition,
    run,
    scope_neighbourhoods,
    trace_to_csv,
    validate_propagation_matrix,
)
from coopdecode.errors import InfeasibleError, InvariantViolation, ParameterError, TopologyError
from coopdecode.oracle import all_assignments, estimate_equilibrium, minimize_bruteforce

from instances import random_ldpc, random_pairwise

F12 = np.array([[1.0, 3.0], [3.0, 2.0]])
F13 = np.array([[2.0, 0.0], [1.0, 1.0]])


def triangle(f23=None):
    f23 = np.array([[0.5, 4.0], [2.0, 1.0]]) if f23 is None else f23
    dec = pairwise_decomposition(3, {(0, 1): F12, (0, 2): F13, (1, 2): f23})
    return dec, build_propagation_matrix(scope_neighbourhoods(dec))


# -- propagation matrix ----------------------------------------------------


def test_validator_examples():
    assert not validate_propagation_matrix(PropagationMatrix.from_dense(np.eye(2)))
    assert validate_propagation_matrix(PropagationMatrix.from_dense(np.full((4, 4), 0.25)))
    bad = PropagationMatrix.from_dense([[0.5, 0.5], [0.4, 0.5]])
    assert validate_propagation_matrix(bad).failed == "column_sums"
    neg = PropagationMatrix.from_dense([[1.5, 0.5], [-0.5, 0.5]])
    assert validate_propagation_matrix(neg).failed == "nonnegative"
    asym = PropagationMatrix.from_dense([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    assert validate_propagation_matrix(asym)
    assert validate_propagation_matrix(asym, require_symmetric=True).failed == "symmetric"


def test_builder_triangle_and_path():
    w = build_propagation_matrix([{1, 2}, {0, 2}, {0, 1}]).to_dense()
    assert np.allclose(w, [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    w = build_propagation_matrix([{1}, {0, 2}, {1}]).to_dense()
    assert np.allclose(w, [[0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]])
    assert np.allclose(w.sum(axis=0), 1)


def test_builder_regular_bipartite_gets_self_loops():
    # 4-cycle: 2-regular and bipartite
    w = build_propagation_matrix([{1, 3}, {0, 2}, {1, 3}, {0, 2}]).to_dense()
    assert np.allclose(np.diag(w), 1 / 3)
    assert validate_propagation_matrix(PropagationMatrix.from_dense(w), require_symmetric=True)


def test_builder_errors():
    with pytest.raises(TopologyError) as err:
        build_propagation_matrix([{1}, {0}, {3}, {2}])
    assert err.value.component == [2, 3]
    with pytest.raises(ParameterError):
        build_propagation_matrix([{1}, set()])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_builder_output_always_valid(seed):
    _, w = random_pairwise(np.random.default_rng(seed))
    assert validate_propagation_matrix(w, require_symmetric=True)


# -- one iteration ---------------------------------------------------------


def test_triangle_first_update():
    dec, w = triangle()
    c, report = coop_iterate(dec, w, AssignmentConstraints.zeros(dec.domains), 0.0)
    assert np.allclose(c[0], [0.5, 1.5])
    # brute force over (x2, x3)
    e1 = dec.subproblems[0]
    for v in (0, 1):
        ref = min(e1.costs(np.array([[v, a, b]]))[0] for a, b in itertools.product((0, 1), repeat=2))
        assert c[0][v] == pytest.approx(ref)
    assert report.k == 1
    assert report.lower_bound == pytest.approx(sum(t.min() for t in c.values))


def test_lambda_zero_is_plain_subproblem_min():
    rng = np.random.default_rng(3)
    dec, w = random_pairwise(rng, n=6)
    c_prev = AssignmentConstraints.random(dec.domains, rng)
    c, _ = coop_iterate(dec, w, c_prev, 0.0)
    grid = all_assignments(dec.domains)
    for i, sub in enumerate(dec.subproblems):
        costs = sub.costs(grid)
        for v in (0, 1):
            assert c[i][v] == pytest.approx(costs[grid[:, i] == v].min())


def test_update_matches_bruteforce_blend():
    rng = np.random.default_rng(4)
    dec, w = random_pairwise(rng, n=6)
    c_prev = AssignmentConstraints.random(dec.domains, rng)
    lam = 0.7
    c, _ = coop_iterate(dec, w, c_prev, lam)
    grid = all_assignments(dec.domains)
    wd = w.to_dense()
    for i, sub in enumerate(dec.subproblems):
        scope = set(sub.scope)
        blend = (1 - lam) * sub.costs(grid)
        for j in range(dec.n):
            if wd[i, j] and j in scope:
                blend = blend + lam * wd[i, j] * c_prev[j][grid[:, j]]
            elif wd[i, j]:
                blend = blend + lam * wd[i, j] * c_prev[j].min()
        for v in (0, 1):
            assert c[i][v] == pytest.approx(blend[grid[:, i] == v].min())


def test_parallel_matches_sequential():
    dec, w = random_pairwise(np.random.default_rng(8), n=10)
    c0 = AssignmentConstraints.zeros(dec.domains)
    a, ra = coop_iterate(dec, w, c0, 0.9)
    with concurrent.futures.ThreadPoolExecutor(4) as pool:
        b, rb = coop_iterate(dec, w, c0, 0.9, executor=pool)
    for x, y in zip(a.values, b.values):
        assert np.array_equal(x, y)
    assert ra.consensus == rb.consensus


def test_parameter_and_infeasibility_errors():
    dec, w = triangle()
    c0 = AssignmentConstraints.zeros(dec.domains)
    with pytest.raises(ParameterError):
        coop_iterate(dec, w, c0, 1.0)
    # sub-problem 0 forbids x0 = 1 entirely
    table = np.zeros((2, 2))
    table[1, :] = np.inf
    subs = [TableSubproblem(0, (0, 1), table), TableSubproblem(1, (0, 1), np.zeros((2, 2)))]
    bad = CostDecomposition((2, 2), subs)
    w2 = build_propagation_matrix([{1}, {0}])
    with pytest.raises(InfeasibleError) as err:
        coop_iterate(bad, w2, AssignmentConstraints.zeros((2, 2)), 0.5)
    assert err.value.subproblem == 0


def test_fixpoint_residual():
    dec, w = random_pairwise(np.random.default_rng(12), n=7)
    c_inf, residual = estimate_equilibrium(dec, w, 0.9)
    _, report = coop_iterate(dec, w, c_inf, 0.9)
    assert report.residual < 1e-9


# -- consensus and certificates -------------------------------------------


def test_consensus_examples():
    assert consensus_check([{0: np.array([0.0, 1.0]), 1: np.array([2.0, 1.0])}])
    assert not consensus_check([{0: np.zeros(2)}])
    assert not consensus_check([{0: np.array([0.0, 1.0])}, {0: np.array([1.0, 0.0])}])
    f12 = np.array([[0.0, 10.0], [0.0, 10.0]])      # x1 -> 0
    f23 = np.array([[10.0, 10.0], [0.0, 0.0]])      # x1 -> 1
    dec = pairwise_decomposition(3, {(0, 1): f12, (0, 2): np.zeros((2, 2)), (1, 2): f23})
    w = build_propagation_matrix(scope_neighbourhoods(dec))
    _, report = coop_iterate(dec, w, AssignmentConstraints.zeros(dec.domains), 0.0)
    assert np.argmin(report.marginals[0][1]) == 0
    assert np.argmin(report.marginals[2][1]) == 1
    assert not report.consensus


def test_gap_certificate_examples():
    assert gap_certificate(10.0, 6.0, 0.25) == pytest.approx(1.0)
    assert gap_certificate(10.0, 6.0, 0.0) == 0.0
    with pytest.raises(InvariantViolation):
        gap_certificate(5.0, 6.0, 0.5)


def test_run_dominant_triangle_finds_optimum():
    # x = (1, 0, 1) far cheaper than everything else
    f12 = np.array([[5.0, 5.0], [0.0, 5.0]])
    f13 = np.array([[5.0, 5.0], [5.0, 0.0]])
    f23 = np.array([[5.0, 0.0], [5.0, 5.0]])
    dec = pairwise_decomposition(3, {(0, 1): f12, (0, 2): f13, (1, 2): f23})
    w = build_propagation_matrix(scope_neighbourhoods(dec))
    res = run(dec, w, CoopConfig(0.9, 300, consensus_window=40))
    x_star, _ = minimize_bruteforce(dec)
    assert res.stop_reason == "consensus"
    assert res.candidate.tolist() == x_star.tolist() == [1, 0, 1]
    assert res.trace[-1].gap_certificate < 1e-1


def test_run_cap_and_csv(tmp_path):
    dec, w = triangle()
    res = run(dec, w, CoopConfig(max_iterations=1))
    assert len(res.trace) == 1
    path = tmp_path / "trace.csv"
    text = trace_to_csv(res.trace, path)
    assert path.read_text() == text
    assert text.splitlines()[0] == "k,lower_bound,residual,consensus,candidate_cost"
    assert len(text.splitlines()) == 2


def test_run_deterministic():
    dec, w = random_pairwise(np.random.default_rng(21), n=9)
    a = run(dec, w, CoopConfig(0.9, 30))
    b = run(dec, w, CoopConfig(0.9, 30))
    for x, y in zip(a.final.values, b.final.values):
        assert np.array_equal(x, y)
    assert [r.lower_bound for r in a.trace] == [r.lower_bound for r in b.trace]


def test_unique_equilibrium_from_different_starts():
    rng = np.random.default_rng(30)
    dec, w = random_pairwise(rng, n=8)
    cfg = CoopConfig(0.9, 400, residual_tolerance=1e-12)
    a = run(dec, w, cfg)
    b = run(dec, w, cfg, c0=AssignmentConstraints.random(dec.domains, rng, 10.0))
    assert a.final.distance(b.final) < 1e-9
    assert np.array_equal(a.candidate, b.candidate)


def test_config_validation():
    with pytest.raises(ParameterError):
        CoopConfig(max_iterations=0)
    with pytest.raises(ParameterError):
        CoopConfig(lambda_schedule=lambda k: 1.2).lam(1)


# -- theorem properties on small instances --------------------------------

seeds = st.integers(0, 2 ** 31)


def _instance(seed):
    rng = np.random.default_rng(seed)
    if seed % 3 == 0:
        dec, w, _ = random_ldpc(rng)
        return dec, w, rng
    dec, w = random_pairwise(rng)
    return dec, w, rng


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_lower_bound_property(seed):
    dec, w, rng = _instance(seed)
    x = rng.integers(0, 2, (300, dec.n))
    energy = dec.energies(x)
    c = AssignmentConstraints.zeros(dec.domains)
    for _ in range(15):
        c, _ = coop_iterate(dec, w, c, 0.9)
        assert (c.evaluate(x) <= energy + 1e-9).all()
        assert c.lower_bound() <= minimize_bruteforce(dec)[1] + 1e-9


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from([0.5, 0.9]))
def test_monotone_bound_property(seed, lam):
    dec, w, _ = _instance(seed)
    c = AssignmentConstraints.zeros(dec.domains)
    prev = c.lower_bound()
    for _ in range(40):
        c, report = coop_iterate(dec, w, c, lam)
        assert report.lower_bound >= prev - 1e-9
        prev = report.lower_bound


@settings(max_examples=8, deadline=None)
@given(seeds)
def test_contraction_property(seed):
    rng = np.random.default_rng(seed)
    dec, w = random_pairwise(rng, n=int(rng.integers(3, 8)))
    c_inf, _ = estimate_equilibrium(dec, w, 0.9, iterations=600)
    c = AssignmentConstraints.random(dec.domains, rng, 5.0)
    d0 = c.distance(c_inf)
    for k in range(1, 20):
        c, _ = coop_iterate(dec, w, c, 0.9)
        assert c.distance(c_inf) <= 0.9 ** k * d0 + 1e-6
