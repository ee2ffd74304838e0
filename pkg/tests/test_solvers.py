import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from slca.core import SparseCodingProblem, kkt_residual, objective
from slca.errors import NotConverged
from slca.problems import gen_random_problem
from slca.solvers import coord_descent, fista, lipschitz_constant

PAPER_OPTIMUM_EXACT = np.array([0.6830606, 0.0, 1.21779046])
PAPER_OBJECTIVE_EXACT = 0.25405354063263


def bounded_qp_oracle(problem):
    """Independent reference: L-BFGS-B on the smooth form with box a >= 0."""
    G = problem.gram.dense
    c = np.asarray(problem.b) - problem.lambda1
    const = 0.5 * float(problem.signal @ problem.signal)
    res = minimize(lambda a: (0.5 * a @ G @ a - c @ a + const, G @ a - c),
                   np.zeros(problem.N), jac=True, method="L-BFGS-B",
                   bounds=[(0, None)] * problem.N,
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    return res.x, res.fun


@pytest.mark.parametrize("solver", [fista, coord_descent])
def test_paper_instance(paper, solver):
    rep = solver(paper)
    assert rep.converged
    assert np.allclose(rep.solution, PAPER_OPTIMUM_EXACT, atol=1e-6)
    assert rep.objective == pytest.approx(PAPER_OBJECTIVE_EXACT, abs=1e-12)
    assert rep.kkt <= 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_instances_match_independent_oracle(seed):
    p = gen_random_problem(16, 64, 0.5, seed)
    _, E_ref = bounded_qp_oracle(p)
    cd = coord_descent(p)
    fi = fista(p)
    assert cd.objective <= E_ref + 1e-10
    assert abs(fi.objective - cd.objective) <= 1e-8 * abs(cd.objective)
    assert cd.kkt < 1e-8


def test_lipschitz_upper_bounds_largest_eigenvalue(paper):
    L = lipschitz_constant(paper)
    top = np.linalg.eigvalsh(paper.gram.dense)[-1]
    assert top <= L <= top * (1 + 1e-4)


def test_cd_objective_trace_monotone():
    rep = coord_descent(gen_random_problem(16, 64, 0.5, 4))
    E = np.array([e for _, e in rep.objective_trace])
    assert np.all(np.diff(E) <= 1e-14)


def test_fista_budget_warning(paper):
    with pytest.warns(NotConverged):
        rep = fista(paper, max_iter=3)
    assert not rep.converged and rep.iterations == 3
    with pytest.raises(ValueError):
        fista(paper, max_iter=0)


def test_lambda_above_max_b_gives_zero(paper):
    p = SparseCodingProblem(paper.dictionary, paper.signal, float(np.max(paper.b)) + 0.1)
    assert np.all(coord_descent(p).solution == 0)
    assert np.all(fista(p).solution == 0)


def test_elastic_net_matches_closed_form_shrinkage(paper):
    # with orthogonal atoms the elastic net decouples: a_i = max(b_i - l1, 0)/(1 + 2 l2)
    from slca.core import Dictionary
    D = Dictionary(np.eye(3))
    s = np.array([1.0, 0.05, 2.0])
    p = SparseCodingProblem(D, s, 0.1, 0.25, "elastic_net_classo")
    expected = np.maximum(s - 0.1, 0) / 1.5
    assert np.allclose(coord_descent(p).solution, expected, atol=1e-12)
    assert np.allclose(fista(p).solution, expected, atol=1e-8)


def test_lasso_mode_finds_signed_solution(rng):
    from slca.core import Dictionary, normalize
    D = normalize(Dictionary(rng.standard_normal((10, 5))))
    s = D.apply(np.array([1.0, -1.0, 0.0, 0.5, 0.0]))
    p = SparseCodingProblem(D, s, 0.01, mode="lasso")
    cd = coord_descent(p)
    fi = fista(p)
    assert cd.solution[1] < 0
    assert abs(cd.objective - fi.objective) <= 1e-9
    assert kkt_residual(p, cd.solution) < 1e-8


def test_solver_report_serialization(paper):
    d = fista(paper, timed=True).to_dict(include_timing=True)
    assert set(d) >= {"solution", "objective", "kkt", "iterations", "time_trace"}
    assert "time_trace" not in fista(paper).to_dict()


@given(st.integers(0, 10_000))
def test_cd_never_worse_than_warm_start(seed):
    p = gen_random_problem(6, 10, 1.0, seed)
    a0 = np.random.default_rng(seed).random(10)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NotConverged)
        rep = coord_descent(p, a0=a0)
    assert rep.objective <= objective(p, a0) + 1e-12
    assert rep.kkt < 1e-8


@pytest.mark.parametrize("seed", range(30))
def test_fista_matches_cd_on_random_instances(seed):
    p = gen_random_problem(16, 64, 0.5, 100 + seed)
    assert abs(fista(p).objective - coord_descent(p).objective) <= 1e-6


def test_fista_zero_solution_in_one_step(paper):
    p = SparseCodingProblem(paper.dictionary, paper.signal, float(paper.b.max()) + 0.1)
    with pytest.warns(NotConverged):
        rep = fista(p, max_iter=1)
    assert np.all(rep.solution == 0) and rep.kkt == 0.0


def test_cd_single_atom_closed_form():
    from slca.core import Dictionary
    p = SparseCodingProblem(Dictionary(np.array([[0.6], [0.8]])), np.array([1.0, 2.0]),
                            0.3, 0.2, "elastic_net_classo")
    rep = coord_descent(p, max_sweeps=2)
    assert rep.solution[0] == pytest.approx((2.2 - 0.3) / 1.4, rel=1e-15)


def test_cd_orthonormal_exact(rng):
    from slca.core import Dictionary
    Q = np.eye(4)[:, rng.permutation(4)]
    s = np.array([0.3, -1.0, 2.0, 0.05])
    p = SparseCodingProblem(Dictionary(Q), s, 0.1)
    assert np.array_equal(coord_descent(p).solution, np.maximum(Q.T @ s - 0.1, 0))
