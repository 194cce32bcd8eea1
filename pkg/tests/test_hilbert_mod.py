"""Free-module matrices, inner products, and CP certification."""

import numpy as np
import pytest

from pimsner_lab.star_core import make_algebra, sample
from pimsner_lab.hilbert_mod import (
    AMatrix,
    ChoiCapExceeded,
    LinearMapTable,
    choi_cp_check,
    cp_check_auto,
    inner,
    module_norm,
    positivity_probe,
    rank_one,
)


@pytest.fixture
def algebra():
    return make_algebra([2, 1])


def random_amatrix(algebra, rows, cols, seed):
    grid = [[sample(algebra, "element", seed + 97 * i + j)
             for j in range(cols)] for i in range(rows)]
    return AMatrix.from_elements(grid)


def test_flatten_roundtrip(algebra):
    x = random_amatrix(algebra, 3, 2, 5)
    back = AMatrix.from_flat(algebra, 3, 2, x.flatten())
    assert (x - back).max_abs() == 0.0


def test_flatten_is_multiplicative(algebra):
    """flatten(XY) = flatten(X) flatten(Y): the norm/positivity carrier is a
    genuine *-homomorphism."""
    x = random_amatrix(algebra, 3, 4, 1)
    y = random_amatrix(algebra, 4, 2, 2)
    lhs = (x @ y).flatten()
    rhs = x.flatten() @ y.flatten()
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_adjoint_against_flatten(algebra):
    x = random_amatrix(algebra, 2, 3, 7)
    assert np.max(np.abs(x.adjoint().flatten() - x.flatten().conj().T)) < 1e-14


def test_norm_against_numpy(algebra):
    x = random_amatrix(algebra, 3, 3, 11)
    want = max(np.linalg.norm(x.flatten_block(s), 2)
               for s in range(algebra.n_blocks))
    assert abs(x.norm() - want) < 1e-8 * want


def test_positivity_and_min_eig(algebra):
    x = random_amatrix(algebra, 2, 2, 3)
    pos = x.adjoint() @ x
    assert pos.is_positive()
    assert pos.min_eig() > -1e-12
    neg = pos - AMatrix.eye(algebra, 2) * (pos.norm() * 2.0)
    assert not neg.is_positive()


def test_inner_and_rank_one(algebra):
    mu = random_amatrix(algebra, 3, 1, 21)
    nu = random_amatrix(algebra, 3, 1, 22)
    xi = random_amatrix(algebra, 3, 1, 23)
    # e_{mu,nu} xi = mu <nu, xi>
    lhs = rank_one(mu, nu) @ xi
    rhs = mu.scale_element(inner(nu, xi), side="right")
    assert (lhs - rhs).max_abs() < 1e-12
    assert module_norm(mu) > 0.0
    # <xi, xi> is positive
    assert AMatrix.from_element(inner(xi, xi)).is_positive()


def test_submatrix_and_entries(algebra):
    x = random_amatrix(algebra, 4, 4, 31)
    sub = x.submatrix(slice(1, 3), slice(0, 2))
    assert (sub.rows, sub.cols) == (2, 2)
    assert sub.entry(0, 0).allclose(x.entry(1, 0), 0.0)


# ---------------------------------------------------------------------------
# CP certification
# ---------------------------------------------------------------------------

def identity_table(algebra, p):
    return LinearMapTable.from_amatrix_map(algebra, p, algebra, p,
                                           lambda x: x, name="id")


def test_choi_identity_map_is_cp(algebra):
    rep = choi_cp_check(identity_table(algebra, 2))
    assert rep.passed
    assert rep.method == "choi"
    assert rep.min_eigenvalue > -1e-12
    assert rep.unital_defect < 1e-12
    assert abs(rep.norm_bound - 1.0) < 1e-10


def test_choi_transpose_map_fails():
    """The transpose is positive but not completely positive: its Choi matrix
    has a -1 eigenvalue."""
    algebra = make_algebra([2])
    table = LinearMapTable.from_amatrix_map(
        algebra, 1, algebra, 1,
        lambda x: AMatrix(algebra, 1, 1,
                          [np.transpose(x.blocks[0], (0, 1, 3, 2))]),
        name="transpose")
    rep = choi_cp_check(table)
    assert not rep.passed
    assert rep.min_eigenvalue < -0.5


def test_choi_cap_triggers(algebra):
    table = identity_table(algebra, 40)
    with pytest.raises(ChoiCapExceeded):
        choi_cp_check(table, choi_cap=64)
    rep = cp_check_auto(table, choi_cap=64, probe_trials=10, seed=1)
    assert rep.method == "probe"
    assert rep.passed


def test_probe_flags_transpose():
    algebra = make_algebra([2])
    table = LinearMapTable.from_amatrix_map(
        algebra, 1, algebra, 1,
        lambda x: AMatrix(algebra, 1, 1,
                          [np.transpose(x.blocks[0], (0, 1, 3, 2))]))
    rep = positivity_probe(table, k=2, trials=20, seed=3)
    assert not rep.passed


def test_compose_tables(algebra):
    double = LinearMapTable.from_amatrix_map(algebra, 2, algebra, 2,
                                             lambda x: x * 2.0)
    comp = double.compose(identity_table(algebra, 2))
    x = random_amatrix(algebra, 2, 2, 41).flatten()
    assert np.max(np.abs(comp.apply_flat(x) - 2.0 * x)) < 1e-12


def test_cp_report_serializes(algebra):
    d = choi_cp_check(identity_table(algebra, 1)).to_dict()
    assert set(d) == {"method", "min_eig", "unital_defect", "norm_bound", "pass"}
