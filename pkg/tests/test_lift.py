"""Extended-module lifting, bimodule compression, and CPAP certificates."""

import numpy as np
import pytest

from pimsner_lab.star_core import ConfigurationError
from pimsner_lab.hilbert_mod import AMatrix, choi_cp_check
from pimsner_lab.fock import FockWindow, toeplitz_op
from pimsner_lab.expectation import _sample_matrix
from pimsner_lab.lift import (
    EInftyContext,
    FactorPair,
    bilateral_lift,
    compose_certificates,
    compression_table,
    cpap_certificate,
    eps_hat_graded,
    einfty_inner,
    factor_tables,
    lift_defect,
    pi_i,
    toeplitz_infty,
)
from pimsner_lab.presets import build_preset


@pytest.fixture(scope="module")
def cuntz():
    return build_preset("cuntz2")


@pytest.fixture(scope="module")
def twisted():
    return build_preset("twisted2")


# ---------------------------------------------------------------------------
# extended-module coordinates
# ---------------------------------------------------------------------------

def test_inner_products(twisted):
    ctx = EInftyContext(twisted, 1)
    x = ctx.vector(twisted.sample_vector(1, 1), _sample_matrix(twisted, 2, 2))
    y = ctx.vector(twisted.sample_vector(1, 3), _sample_matrix(twisted, 2, 4))
    z = ctx.vector(twisted.sample_vector(1, 5), _sample_matrix(twisted, 2, 6))
    right = einfty_inner(ctx, x, y, "right")
    assert (right.adjoint() - einfty_inner(ctx, y, x, "right")).max_abs() < 1e-12
    assert einfty_inner(ctx, x, x, "right").is_positive()
    left = einfty_inner(ctx, x, x, "left")
    assert left.is_positive()
    # bimodule link: <x, y>_left z = x <y, z>_right
    lhs = einfty_inner(ctx, x, y, "left") @ z
    rhs = x @ einfty_inner(ctx, y, z, "right")
    assert (lhs - rhs).max_abs() < 1e-10
    with pytest.raises(ConfigurationError):
        einfty_inner(ctx, x, y, "middle")


def test_phi_inf1_is_homomorphism(twisted):
    ctx = EInftyContext(twisted, 1)
    b1 = _sample_matrix(twisted, 2, 11)
    b2 = _sample_matrix(twisted, 2, 12)
    lhs = ctx.phi_inf1(b1 @ b2)
    rhs = ctx.phi_inf1(b1) @ ctx.phi_inf1(b2)
    assert (lhs - rhs).max_abs() < 1e-10
    assert (ctx.phi_inf1(b1.adjoint()) - ctx.phi_inf1(b1).adjoint()).max_abs() < 1e-12


def test_pi_i_is_representation(cuntz):
    w = FockWindow.one_sided(4)
    t1 = _sample_matrix(cuntz, 2, 21)
    t2 = _sample_matrix(cuntz, 2, 22)
    lhs = pi_i(cuntz, 1, t1, w) @ pi_i(cuntz, 1, t2, w)
    rhs = pi_i(cuntz, 1, t1 @ t2, w)
    assert lhs.max_block_dev(rhs) < 1e-10
    # support starts at degree i
    assert all(i >= 1 and i == j for (i, j) in pi_i(cuntz, 1, t1, w).blocks)


def test_unit_lift_reduces_to_toeplitz(cuntz):
    """With b = c = 1 the lifted generator collapses to t_mu t_nu*."""
    w = FockWindow.one_sided(5)
    ctx = EInftyContext(cuntz, 1)
    mu = cuntz.sample_vector(1, 31)
    nu = cuntz.sample_vector(2, 32)
    one = AMatrix.eye(cuntz.algebra, ctx.b_side)
    lifted = eps_hat_graded(ctx, toeplitz_infty(ctx, mu, one, nu, one, w), w)
    assert lifted.max_block_dev(toeplitz_op(cuntz, mu, nu, w)) < 1e-12


@pytest.mark.parametrize("preset", ["cuntz2", "twisted2"])
@pytest.mark.parametrize("i,level", [(1, 1), (1, 2), (2, 2)])
def test_defect_vanishes_at_and_above_i(preset, i, level):
    spec = build_preset(preset)
    w = FockWindow.one_sided(5)
    ctx = EInftyContext(spec, level)
    mu = spec.sample_vector(1, 41)
    nu = spec.sample_vector(1, 42)
    b0 = _sample_matrix(spec, spec.fiber_dim(i), 43)
    c0 = _sample_matrix(spec, spec.fiber_dim(i), 44)
    _, rep = lift_defect(ctx, mu, nu, b0, c0, i, w)
    assert rep["pass"], rep
    assert rep["max_dev_at_or_above_i"] < 1e-9
    assert all(k < i for k in rep["support"])


def test_defect_bimodule_case():
    spec = build_preset("rotation-m2")
    w = FockWindow.one_sided(5)
    ctx = EInftyContext(spec, 2)
    mu = spec.sample_vector(1, 51)
    nu = spec.sample_vector(1, 52)
    b0 = _sample_matrix(spec, 1, 53)
    c0 = _sample_matrix(spec, 1, 54)
    _, rep = lift_defect(ctx, mu, nu, b0, c0, 1, w, r=1, s=2)
    assert rep["pass"], rep


# ---------------------------------------------------------------------------
# bimodule lift
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["crossed-z3", "rotation-m2"])
def test_bilateral_lift_band_exact(preset):
    spec = build_preset(preset)
    two = FockWindow.two_sided_sym(6)
    for (r, s) in [(0, 0), (1, 0), (2, 1), (3, 3)]:
        mu = spec.sample_vector(1, 61 + r)
        nu = spec.sample_vector(1, 71 + s)
        _, rep = bilateral_lift(spec, mu, nu, r, s, two)
        assert rep["band_dev"] < 1e-12
        assert rep["bilateral_tail_dev"] < 1e-12
        assert all(-min(r, s) <= k < 0 for k in rep["compact_offsets"])


def test_bilateral_lift_compact_part_is_real():
    """u u* = 1 bilaterally, but the one-sided t t* = 1 - P_0: the compression
    keeps an honest extra block at offset -1."""
    spec = build_preset("crossed-z3")
    two = FockWindow.two_sided_sym(5)
    one_vec = AMatrix.eye(spec.algebra, 1)
    _, rep = bilateral_lift(spec, one_vec, one_vec, 1, 1, two)
    assert rep["compact_offsets"] == [-1]


def test_compression_table_is_cp():
    spec = build_preset("crossed-z3")
    table = compression_table(spec, FockWindow.two_sided_sym(2))
    rep = choi_cp_check(table)
    assert rep.passed


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_certificate_schema_and_bounds(cuntz):
    cert = cpap_certificate(cuntz, 2, [(0, 0), (1, 0), (1, 1)],
                            FockWindow.one_sided(4), seed=7,
                            created="2026-08-23")
    d = cert.to_dict()
    assert set(d) == {"spec", "N", "D", "flatten_dim", "generators",
                      "factor_maps", "tolerances", "seed", "created",
                      "tool_version"}
    assert d["D"] == 1 + 2 + 4
    assert d["flatten_dim"] == d["D"] * cuntz.algebra.total_dim
    for g in d["generators"]:
        assert set(g) >= {"r", "s", "seed", "coeff_expected",
                          "coeff_measured", "error"}
        num, den = g["coeff_expected"]
        assert isinstance(num, int) and isinstance(den, int)
    for fm in d["factor_maps"]:
        assert fm["cp"]["pass"]
        assert fm["direction"] in ("compress", "amplify")


def test_certificate_error_within_fejer_bound():
    spec = build_preset("crossed-z3")
    w = FockWindow.two_sided_sym(6)
    for big_n in (2, 3, 4):
        cert = cpap_certificate(spec, big_n, [(1, 0), (2, 0)], w, seed=5,
                                created="2026-08-23")
        for g in cert.generators:
            band = abs(g.r - g.s)
            assert g.error <= band / (big_n + 1) * g.norm + 1e-9


def test_window_too_small_rejected(cuntz):
    with pytest.raises(ConfigurationError):
        cpap_certificate(cuntz, 6, [(0, 0)], FockWindow.one_sided(4), seed=1)


def test_compose_certificates(cuntz):
    phi1, psi1, _ = factor_tables(cuntz, FockWindow.one_sided(4), 3)
    phi2, psi2, _ = factor_tables(cuntz, FockWindow.one_sided(3), 2)
    composed, rep = compose_certificates(FactorPair(phi1, psi1),
                                         FactorPair(phi2, psi2),
                                         seed=3, trials=3, choi_cap=20000)
    assert rep["pass"], rep
    assert composed.phi_cp.passed and composed.psi_cp.passed
    # chain mismatch is a structural error
    with pytest.raises(Exception):
        compose_certificates(FactorPair(phi2, psi2), FactorPair(phi1, psi1))
