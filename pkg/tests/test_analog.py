import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from slca.analog import (IntegratorConfig, alca_energy_descent_report, alca_rhs, integrate,
                         write_trajectory_csv)
from slca.core import SparseCodingProblem
from slca.errors import NumericalBlowup
from slca.problems import gen_random_problem
from slca.solvers import coord_descent

PAPER_OPTIMUM_EXACT = np.array([0.6830606, 0.0, 1.21779046])


def linear_regime_solution(problem, u0, t):
    """While every u_i stays above lambda the flow is linear: u' = b + (G - I) lambda - G u."""
    G = problem.gram.dense
    lam = problem.lambda1
    fixed = np.linalg.solve(G, problem.b + (G - np.eye(problem.N)) @ np.full(problem.N, lam))
    return fixed + scipy.linalg.expm(-G * t) @ (u0 - fixed)


@pytest.mark.parametrize("method,order", [("rk4", 4), ("explicit_euler", 1)])
def test_convergence_order_in_smooth_regime(paper, method, order):
    u0 = np.asarray(paper.b).copy()
    ref = linear_regime_solution(paper, u0, 0.5)
    errs = []
    for h in (0.05, 0.025, 0.0125):
        traj = integrate(paper, u0=u0, cfg=IntegratorConfig(method, h, 0.5, record_every=10**6))
        assert traj.final.t == pytest.approx(0.5)
        errs.append(np.max(np.abs(traj.final.u - ref)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - order) < 0.25)


def test_settles_at_optimum(paper):
    traj = integrate(paper, cfg=IntegratorConfig("rk4", 1e-3, 200.0, 1e-9))
    assert traj.terminated_reason == "settled"
    assert np.allclose(traj.final.a, PAPER_OPTIMUM_EXACT, atol=1e-6)
    assert np.max(np.abs(alca_rhs(traj.final.u, paper))) <= 1e-9


def test_rhs_matches_definition(paper, rng):
    G = paper.gram.dense
    for _ in range(5):
        u = rng.uniform(-1, 2, 3)
        a = np.maximum(u - paper.lambda1, 0)
        assert np.allclose(alca_rhs(u, paper), paper.b - u - (G - np.eye(3)) @ a, atol=1e-14)


def test_compiled_and_python_paths_agree(paper):
    cfg = IntegratorConfig("rk4", 1e-2, 5.0, record_every=50)
    fast = integrate(paper, cfg=cfg)
    slow = integrate(paper, cfg=cfg, pure_python=True)
    assert np.allclose(fast.u, slow.u, atol=1e-12)
    assert np.allclose(fast.times, slow.times)


def test_matrix_free_gram_path(paper):
    p = SparseCodingProblem(paper.dictionary, paper.signal, paper.lambda1, dense_gram_limit=1)
    assert not p.gram.is_dense
    traj = integrate(p, cfg=IntegratorConfig("rk4", 1e-2, 60.0, 1e-8))
    assert np.allclose(traj.final.a, PAPER_OPTIMUM_EXACT, atol=1e-6)


def test_record_every_and_final_sample(paper):
    traj = integrate(paper, cfg=IntegratorConfig("rk4", 1e-2, 1.05, record_every=20))
    assert np.allclose(traj.times, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.05])
    assert traj.steps == 105


def test_blowup_detected(paper):
    with pytest.raises(NumericalBlowup):
        integrate(paper, cfg=IntegratorConfig("explicit_euler", 3.0, 1000.0))


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk45")
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(settle_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(record_every=0)


def test_energy_descent_paper(paper):
    traj = integrate(paper, cfg=IntegratorConfig(record_every=10))
    values, flagged = alca_energy_descent_report(traj, paper)
    assert flagged == []
    assert values[-1][1] == pytest.approx(0.25405354063263, abs=1e-9)


@given(st.integers(0, 1000))
def test_energy_descent_random(seed):
    p = gen_random_problem(8, 16, 0.7, seed)
    traj = integrate(p, cfg=IntegratorConfig(step=1e-2, t_end=50.0, record_every=5))
    _, flagged = alca_energy_descent_report(traj, p)
    assert flagged == []


def test_energy_descent_flags_an_increase(paper):
    traj = integrate(paper, cfg=IntegratorConfig(step=1e-2, t_end=2.0, record_every=50))
    traj.samples.reverse()
    _, flagged = alca_energy_descent_report(traj, paper)
    assert flagged


def test_lasso_two_sided_settles_to_oracle(rng):
    from slca.core import Dictionary, normalize
    D = normalize(Dictionary(rng.standard_normal((12, 8))))
    p = SparseCodingProblem(D, rng.standard_normal(12), 0.2, mode="lasso")
    traj = integrate(p, cfg=IntegratorConfig(step=1e-2, t_end=500.0, settle_tol=1e-10))
    assert np.any(traj.final.a < 0)
    assert np.allclose(traj.final.a, coord_descent(p).solution, atol=1e-7)


def test_trajectory_csv(paper, tmp_path):
    traj = integrate(paper, cfg=IntegratorConfig(step=1e-2, t_end=1.0, record_every=25))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, traj)
    header = path.read_text().splitlines()[0]
    assert header == "t,u_1,u_2,u_3,a_1,a_2,a_3,energy"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(traj.samples), 8)


def test_rhs_examples(paper):
    assert np.array_equal(alca_rhs(np.zeros(3), paper), paper.b)
    above = SparseCodingProblem(paper.dictionary, paper.signal, float(paper.b.max()) + 0.1)
    assert np.all(alca_rhs(np.asarray(above.b), above) == 0)


def test_subthreshold_relaxation_is_monotone(paper):
    above = SparseCodingProblem(paper.dictionary, paper.signal, float(paper.b.max()) + 0.1)
    traj = integrate(above, cfg=IntegratorConfig(step=1e-2, t_end=40.0, record_every=10))
    assert np.all(traj.a == 0)
    assert np.all(np.diff(traj.u, axis=0) >= 0)
    assert np.allclose(traj.final.u, above.b, atol=1e-9)


def test_random_instance_matches_oracle():
    p = gen_random_problem(10, 20, 0.7, 17)
    traj = integrate(p, cfg=IntegratorConfig())
    assert traj.terminated_reason == "settled"
    assert np.allclose(traj.final.a, coord_descent(p).solution, atol=1e-5)


def test_constant_trajectory_has_no_increase(paper):
    from slca.analog import AnalogSample, AnalogTrajectory
    u = integrate(paper, cfg=IntegratorConfig()).final.u
    a = paper.threshold(u)
    traj = AnalogTrajectory([AnalogSample(t, u, a, 0.0) for t in range(5)])
    values, flagged = alca_energy_descent_report(traj, paper)
    assert flagged == [] and np.all(np.diff([v for _, v in values]) == 0)
