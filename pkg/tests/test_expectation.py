"""Conditional-expectation tower: axioms, trace collapse, induced maps."""

import numpy as np
import pytest

from pimsner_lab.star_core import sample
from pimsner_lab.hilbert_mod import AMatrix, module_norm, rank_one
from pimsner_lab.expectation import (
    _sample_matrix,
    embed_jk,
    eps_bar,
    eps_hat,
    ex_k,
    ex_k_table,
    ex_trace,
    verify_cond_exp,
)
from pimsner_lab.hilbert_mod import choi_cp_check
from pimsner_lab.lift import EInftyContext
from pimsner_lab.presets import PRESETS, build_preset


@pytest.fixture(scope="module")
def cuntz():
    return build_preset("cuntz2")


def test_trace_collapse_on_cuntz(cuntz):
    """With U = 1 and alpha = id the recursion collapses to the normalised
    trace: Ex_1(diag(1, 3)) = 2."""
    x = AMatrix.zeros(cuntz.algebra, 2, 2)
    x.set_entry(0, 0, cuntz.algebra.scalar(1.0))
    x.set_entry(1, 1, cuntz.algebra.scalar(3.0))
    got = ex_k(cuntz, 1, x)
    assert got.allclose(cuntz.algebra.scalar(2.0), 1e-12)


def test_ex_k_equals_trace_on_cuntz(cuntz):
    for k in (1, 2, 3):
        x = _sample_matrix(cuntz, 2 ** k, 100 + k)
        want = x
        for _ in range(k):
            want = _partial_trace_like(cuntz, want)
        assert (ex_k(cuntz, k, x) - want.entry(0, 0)).max_abs() < 1e-12


def _partial_trace_like(spec, x):
    return AMatrix.from_elements(
        [[ex_trace(spec, x.submatrix(slice(i * 2, i * 2 + 2),
                                     slice(j * 2, j * 2 + 2)))
          for j in range(x.cols // 2)] for i in range(x.rows // 2)]) \
        if x.rows > 2 else AMatrix.from_element(ex_trace(spec, x))


def test_bimodule_case_inverts_effective_automorphism():
    """For n = 1, M_{n^k}(A) = A and Ex_k = beta^{-k}."""
    for name in ("crossed-z3", "rotation-m2"):
        spec = build_preset(name)
        a = sample(spec.algebra, "element", 7)
        x = AMatrix.from_element(spec.beta.apply(a))
        assert ex_k(spec, 1, x).allclose(a, 1e-12)


def test_ex_undoes_left_action():
    for name in sorted(PRESETS):
        spec = build_preset(name)
        a = sample(spec.algebra, "element", 19)
        for k in (1, 2):
            got = ex_k(spec, k, spec.phi_k(a, k))
            assert got.allclose(a, 1e-10), name


def test_tower_compatibility():
    spec = build_preset("twisted2")
    x = _sample_matrix(spec, 2, 31)
    assert (ex_k(spec, 2, embed_jk(spec, x)) - ex_k(spec, 1, x)).max_abs() < 1e-11


def test_verify_cond_exp_all_presets():
    for name in sorted(PRESETS):
        spec = build_preset(name)
        rep = verify_cond_exp(spec, 2, seed=23)
        assert rep["pass"], (name, rep)


def test_ex_table_is_ucp(cuntz):
    rep = choi_cp_check(ex_k_table(cuntz, 2))
    assert rep.passed
    assert rep.unital_defect < 1e-10
    assert rep.norm_bound <= 1.0 + 1e-10


def test_eps_bar_contracts():
    from pimsner_lab.lift import einfty_inner

    spec = build_preset("twisted2")
    ctx = EInftyContext(spec, 1)
    for t in range(20):
        xi = spec.sample_vector(1, 200 + t)
        b = _sample_matrix(spec, 2, 300 + t)
        zeta = ctx.vector(xi, b)
        out = eps_bar(spec, 1, zeta)
        num = module_norm(out)
        den = np.sqrt(max(einfty_inner(ctx, zeta, zeta, "right").norm(), 0.0))
        assert num <= den * (1.0 + 1e-8) + 1e-12


def test_eps_hat_rank_one_formula():
    """eps-hat(e_{xi (x) b, eta (x) c}) = e_{xi . Ex(b c*), eta}."""
    spec = build_preset("twisted2")
    level = 2
    ctx = EInftyContext(spec, level)
    xi = spec.sample_vector(1, 41)
    eta = spec.sample_vector(1, 42)
    b = _sample_matrix(spec, spec.n ** level, 43)
    c = _sample_matrix(spec, spec.n ** level, 44)
    e = ctx.vector(xi, b) @ ctx.vector(eta, c).adjoint()
    got = eps_hat(spec, level, e)
    want = rank_one(xi.scale_element(ex_k(spec, level, b @ c.adjoint())), eta)
    assert (got - want).max_abs() < 1e-10


def test_eps_hat_unital():
    spec = build_preset("cuntz2")
    level = 2
    m = 3
    eye = AMatrix.eye(spec.algebra, m * spec.n ** level)
    out = eps_hat(spec, level, eye)
    assert (out - AMatrix.eye(spec.algebra, m)).max_abs() < 1e-12
