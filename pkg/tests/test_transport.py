import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, sparse

from dnorm._simplex import STATUS_MAX_ITER, STATUS_OPTIMAL, transport_simplex
from dnorm.core import DNormError, NumericalError
from dnorm.generators import Constant, Dirichlet, DiscreteMeasure, ScaledPermutation
from dnorm.transport import (
    SupportTooLarge,
    cost_matrix,
    default_epsilon,
    dnorm_distance,
    exact_wasserstein,
    lipschitz_gap_bound,
    sinkhorn_wasserstein,
)


def highs_cost(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Independent oracle: the same LP through scipy's HiGHS."""
    m, n = p.size, q.size
    c = cost_matrix(p, q)
    idx = np.arange(m * n)
    rows = sparse.csr_matrix((np.ones(m * n), (np.repeat(np.arange(m), n), idx)), shape=(m, m * n))
    cols = sparse.csr_matrix((np.ones(m * n), (np.tile(np.arange(n), m), idx)), shape=(n, m * n))
    res = optimize.linprog(
        c.ravel(),
        A_eq=sparse.vstack([rows, cols[:-1]]),
        b_eq=np.concatenate([p.weights, q.weights[:-1]]),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0
    return float(res.fun)


def random_measure(rng, d, size, uniform=False):
    atoms = d * rng.dirichlet(np.ones(d), size)
    weights = np.full(size, 1.0 / size) if uniform else rng.dirichlet(np.ones(size))
    return DiscreteMeasure(atoms, weights)


def test_point_masses():
    a = DiscreteMeasure.point_mass([2.0, 0.0, 1.0])
    b = DiscreteMeasure.point_mass([0.0, 1.5, 1.5])
    assert exact_wasserstein(a, b).cost == pytest.approx(4.0, abs=1e-15)


def test_hand_two_by_two():
    # atoms on S_2: moving (2,0)->(1,1) costs 2, (0,2)->(1,1) costs 2
    p = DiscreteMeasure.uniform([[2.0, 0.0], [0.0, 2.0]])
    q = DiscreteMeasure.point_mass([1.0, 1.0])
    plan = exact_wasserstein(p, q)
    assert plan.cost == pytest.approx(2.0, abs=1e-15)
    assert plan.marginal_error() < 1e-15
    d = plan.to_dict()
    assert set(d) == {"cost", "rows", "cols", "nonzeros"}
    assert d["rows"] == 2 and d["cols"] == 1


def test_monotone_on_the_line():
    # on S_2 the optimal coupling is the quantile coupling; cost = L1 between CDFs * 2
    rng = np.random.default_rng(0)
    p = random_measure(rng, 2, 40)
    q = random_measure(rng, 2, 30)
    xs = np.concatenate([p.atoms[:, 0], q.atoms[:, 0]])
    grid = np.sort(np.unique(xs))
    fp = np.array([p.weights[p.atoms[:, 0] <= g].sum() for g in grid])
    fq = np.array([q.weights[q.atoms[:, 0] <= g].sum() for g in grid])
    w1 = float(np.sum(np.abs(fp - fq)[:-1] * np.diff(grid)))
    assert exact_wasserstein(p, q).cost == pytest.approx(2 * w1, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_against_highs(seed):
    rng = np.random.default_rng(seed)
    for _ in range(15):
        d = int(rng.integers(2, 6))
        p = random_measure(rng, d, int(rng.integers(1, 40)), uniform=seed % 2 == 0)
        q = random_measure(rng, d, int(rng.integers(1, 40)), uniform=seed % 2 == 0)
        plan = exact_wasserstein(p, q)
        assert plan.cost == pytest.approx(highs_cost(p, q), abs=1e-9)
        assert plan.marginal_error() < 1e-12
        assert np.all(plan.coupling >= 0)


def test_vertex_solution_is_sparse():
    rng = np.random.default_rng(3)
    p = random_measure(rng, 3, 30)
    q = random_measure(rng, 3, 25)
    plan = exact_wasserstein(p, q)
    assert len(plan.nonzeros()) <= p.size + q.size - 1


def test_degenerate_uniform_equal_sizes():
    # n x n uniform weights: every basis carries n zero-flow cells
    rng = np.random.default_rng(9)
    p = random_measure(rng, 3, 60, uniform=True)
    q = random_measure(rng, 3, 60, uniform=True)
    assert exact_wasserstein(p, q).cost == pytest.approx(highs_cost(p, q), abs=1e-9)


def test_simplex_status_and_iteration_cap():
    rng = np.random.default_rng(1)
    a = rng.dirichlet(np.ones(30))
    b = rng.dirichlet(np.ones(30))
    c = rng.random((30, 30))
    plan, status, it = transport_simplex(a, b, c)
    assert status == STATUS_OPTIMAL
    assert np.allclose(plan.sum(axis=1), a) and np.allclose(plan.sum(axis=0), b)
    _, status, it = transport_simplex(a, b, c, max_iter=2)
    assert status == STATUS_MAX_ITER and it == 2


def test_dimension_and_size_checks():
    a = DiscreteMeasure.point_mass([1.0, 1.0])
    b = DiscreteMeasure.point_mass([1.0, 1.0, 1.0])
    with pytest.raises(DNormError):
        exact_wasserstein(a, b)
    big = DiscreteMeasure.uniform(2 * np.eye(2)[np.arange(100) % 2])
    with pytest.raises(SupportTooLarge):
        exact_wasserstein(big, big, size_cap=100)


@given(st.integers(0, 2**31), st.integers(2, 4))
@settings(max_examples=25, deadline=None)
def test_metric_axioms(seed, d):
    rng = np.random.default_rng(seed)
    p, q, r = (random_measure(rng, d, int(rng.integers(1, 12))) for _ in range(3))
    pq = exact_wasserstein(p, q).cost
    assert pq == pytest.approx(exact_wasserstein(q, p).cost, abs=1e-9)
    assert exact_wasserstein(p, p).cost == pytest.approx(0.0, abs=1e-12)
    assert pq <= exact_wasserstein(p, r).cost + exact_wasserstein(r, q).cost + 1e-9
    # both measures lie on S_d, so no transport can cost more than 2d
    assert pq <= 2 * d + 1e-12


def test_sinkhorn_close_to_exact():
    rng = np.random.default_rng(4)
    p = random_measure(rng, 3, 30)
    q = random_measure(rng, 3, 30)
    res = sinkhorn_wasserstein(p, q)
    exact = exact_wasserstein(p, q).cost
    assert res.converged and not res.log_domain
    assert res.cost >= exact - 1e-9
    assert abs(res.cost - exact) <= 0.05 * exact
    assert default_epsilon(p, q) == pytest.approx(0.05 * cost_matrix(p, q).mean())


def test_sinkhorn_log_domain_for_tiny_epsilon():
    rng = np.random.default_rng(5)
    p = random_measure(rng, 3, 20)
    q = random_measure(rng, 3, 20)
    res = sinkhorn_wasserstein(p, q, epsilon=1e-3, max_iter=50_000)
    assert res.log_domain
    assert np.all(np.isfinite(res.coupling))
    exact = exact_wasserstein(p, q).cost
    assert res.cost == pytest.approx(exact, rel=0.02)


def test_sinkhorn_rejects_bad_epsilon():
    p = DiscreteMeasure.point_mass([1.0, 1.0])
    with pytest.raises(DNormError):
        sinkhorn_wasserstein(p, p, epsilon=0.0)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_distance_sup_to_l1(d):
    res = dnorm_distance(Constant(d), ScaledPermutation(d), n=2000)
    assert res.cost == pytest.approx(2 * (d - 1), abs=1e-9)
    assert res.rows == 1 and res.cols == d


def test_distance_identical_specs_zero():
    assert dnorm_distance(Dirichlet(3, 2.0), Dirichlet(3, 2.0), n=300).cost == pytest.approx(0.0, abs=1e-12)


def test_distance_sinkhorn_and_errors():
    res = dnorm_distance(Constant(3), ScaledPermutation(3), n=500, solver="sinkhorn")
    assert res.method == "sinkhorn"
    assert res.cost == pytest.approx(4.0, rel=0.05)
    with pytest.raises(DNormError):
        dnorm_distance(Constant(3), Constant(3), n=10, solver="nope")
    with pytest.raises(DNormError):
        dnorm_distance(Constant(3), Constant(2), n=10)


def test_sinkhorn_nonconvergence_reported_and_raised():
    rng = np.random.default_rng(6)
    p = random_measure(rng, 3, 20)
    q = random_measure(rng, 3, 20)
    res = sinkhorn_wasserstein(p, q, max_iter=5)
    assert not res.converged and res.n_iter == 5
    with pytest.raises(NumericalError):
        dnorm_distance(Dirichlet(3, 1.0), Dirichlet(3, 3.0), n=15, solver="sinkhorn", epsilon=1e-5)


def test_lipschitz_bound():
    assert lipschitz_gap_bound(None, None, 2.0, 0.5) == 1.0
    with pytest.raises(DNormError):
        lipschitz_gap_bound(None, None, -1.0, 0.5)
    with pytest.raises(DNormError):
        lipschitz_gap_bound(Constant(2), Constant(3), 1.0, 0.5)
