"""Cutting-plane LMI and simplex tests."""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core import lmi
from app.core.lmi import DualSimplex, HermitianParametrization, LmiStatus
from app.core.qstate import random_state


def test_lp_vertex_optimum():
    rows = [(np.array([1.0, 2.0]), 4.0), (np.array([3.0, 1.0]), 6.0)]
    x = lmi.lp_solve(rows, np.zeros(2), np.full(2, 10.0), np.array([1.0, 1.0]))
    assert x == pytest.approx([1.6, 1.2])


def test_lp_degenerate_duplicate_rows_terminate():
    base = [(np.array([1.0, 2.0]), 4.0), (np.array([3.0, 1.0]), 6.0)]
    # Every row is tight at the optimum and each appears several times
    rows = base * 5 + [(np.array([1.0, 1.0]), 2.8)] * 5
    x = lmi.lp_solve(rows, np.zeros(2), np.full(2, 10.0), np.array([1.0, 1.0]))
    assert x.sum() == pytest.approx(2.8)


def test_lp_respects_shifted_box():
    x = lmi.lp_solve([], np.array([1.0, -2.0]), np.array([5.0, 3.0]), np.array([-1.0, 1.0]))
    assert x == pytest.approx([1.0, 3.0])


def test_lp_infeasible():
    rows = [(np.array([-1.0]), -2.0)]  # x >= 2 inside [0, 1]
    assert lmi.lp_solve(rows, np.zeros(1), np.ones(1), np.ones(1)) is None


def test_idle_cuts_are_pruned():
    simplex = DualSimplex(np.array([1.0]), np.array([1.0]), 1e-10)
    simplex.add_row(np.array([1.0]), 5.0)
    status, pi = simplex.solve()
    assert status == LmiStatus.OPTIMAL
    assert pi == pytest.approx([1.0])
    assert simplex.prune(1) == 1
    assert simplex.num_cuts == 0


def test_largest_eigenvalue_as_lmi():
    a = np.diag([1.0, 3.0, -2.0])
    # maximize -t subject to t I - A PSD
    prog = lmi.build_program(
        objective=np.array([-1.0]),
        lower=np.array([-5.0]),
        upper=np.array([5.0]),
        constraints=[(-a, np.eye(3)[None])],
    )
    solution = lmi.solve(prog)
    assert solution.status == LmiStatus.OPTIMAL
    assert solution.x[0] == pytest.approx(3.0, abs=1e-7)
    assert solution.cuts >= 1


def test_random_hermitian_top_eigenvalue():
    a = random_state(4, seed=3).data
    prog = lmi.build_program(
        objective=np.array([-1.0]),
        lower=np.array([-2.0]),
        upper=np.array([2.0]),
        constraints=[(-a, np.eye(4)[None])],
    )
    solution = lmi.solve(prog, verbose=True)
    assert solution.x[0] == pytest.approx(np.linalg.eigvalsh(a)[-1], abs=1e-7)
    assert solution.trace and solution.trace[-1]["min_eigenvalue"] >= -1e-7


def test_density_matrix_program_bounds_optimum_from_above():
    """max tr(A X) over 2x2 density matrices equals lambda_max(A)."""
    a = np.array([[1.0, 0.5 - 0.5j], [0.5 + 0.5j, -1.0]])
    param = HermitianParametrization(2)
    lower, upper = param.box()
    trace = param.trace_row()
    prog = lmi.build_program(
        objective=np.array([np.real(np.trace(a @ b)) for b in param.basis]),
        lower=lower,
        upper=upper,
        constraints=[
            (np.zeros((2, 2)), param.basis),
            (np.ones((1, 1)), -trace[:, None, None]),
            (-np.ones((1, 1)), trace[:, None, None]),
        ],
    )
    solution = lmi.solve(prog, psd_tol=1e-5)
    top = np.linalg.eigvalsh(a)[-1]
    assert solution.status == LmiStatus.OPTIMAL
    assert solution.objective_value >= top - 1e-9
    assert solution.objective_value <= top + 1e-3


def test_infeasible_program():
    prog = lmi.build_program(
        objective=np.array([1.0]),
        lower=np.array([0.0]),
        upper=np.array([1.0]),
        constraints=[(-2.0 * np.eye(1), np.eye(1)[None])],
    )
    solution = lmi.solve(prog)
    assert solution.status == LmiStatus.INFEASIBLE
    assert solution.objective_value == -np.inf


def test_cut_budget_reports_iteration_limit():
    a = np.diag([1.0, 3.0])
    prog = lmi.build_program(
        objective=np.array([-1.0]),
        lower=np.array([-5.0]),
        upper=np.array([5.0]),
        constraints=[(-a, np.eye(2)[None])],
    )
    assert lmi.solve(prog, max_cuts=0).status == LmiStatus.ITERATION_LIMIT


def test_hermitian_parametrization_round_trip():
    m = random_state(3, seed=11).data
    param = HermitianParametrization(3)
    x = param.from_matrix(m)
    assert x.shape == (9,)
    assert np.allclose(param.to_matrix(x), m)
    assert param.trace_row() @ x == pytest.approx(1.0)
    lower, upper = param.box()
    assert np.all(lower <= x) and np.all(x <= upper)


def test_program_validation():
    with pytest.raises(ValidationError):
        lmi.build_program(
            objective=np.ones(1),
            lower=np.zeros(1),
            upper=np.ones(1),
            constraints=[(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((1, 2, 2)))],
        )
    with pytest.raises(ValidationError):
        lmi.build_program(
            objective=np.ones(1), lower=np.full(1, -np.inf), upper=np.ones(1), constraints=[]
        )
