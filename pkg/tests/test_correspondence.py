"""Correspondence axioms, the left-action tower, and tensor coordinates."""

import numpy as np
import pytest

from pimsner_lab.star_core import ConfigurationError, make_algebra, sample
from pimsner_lab.hilbert_mod import AMatrix, inner
from pimsner_lab.correspondence import ValidationError, default_max_degree
from pimsner_lab.presets import PRESETS, build_preset


@pytest.fixture(params=sorted(PRESETS))
def spec(request):
    return build_preset(request.param)


def test_presets_validate(spec):
    report = spec.validate(seed=11)
    assert report["pass"], report["checks"]


def test_phi1_is_unital_star_homomorphism(spec):
    a = sample(spec.algebra, "element", 3)
    b = sample(spec.algebra, "element", 4)
    assert (spec.phi1(a @ b) - spec.phi1(a) @ spec.phi1(b)).max_abs() < 1e-10
    assert (spec.phi1(a.adjoint()) - spec.phi1(a).adjoint()).max_abs() < 1e-12
    eye = AMatrix.eye(spec.algebra, spec.n)
    assert (spec.phi1(spec.algebra.unit()) - eye).max_abs() < 1e-12


def test_phi_recursion_nests_both_ways():
    """phi_{j+k} = entrywise-phi_k o phi_j, checked at j = k = 1 on the
    twisted preset (both sides computed independently)."""
    spec = build_preset("twisted2")
    a = sample(spec.algebra, "element", 17)
    lhs = spec.phi_k(a, 2)
    # entrywise phi_1 applied to phi_1(a)
    p1 = spec.phi1(a)
    rhs = spec.amplify(p1, 1)
    assert (lhs - rhs).max_abs() < 1e-12


def test_phi_k_against_independent_path(spec):
    """The cached-einsum amplification and the explicit I (x) U product
    construction must agree exactly."""
    a = sample(spec.algebra, "element", 29)
    for k in (1, 2, 3):
        assert (spec.phi_k(a, k) - spec.phi_k_direct(a, k)).max_abs() < 1e-12


def test_amplify_composes(spec):
    x = spec.phi1(sample(spec.algebra, "element", 5))
    lhs = spec.amplify(x, 2)
    rhs = spec.amplify(spec.amplify(x, 1), 1)
    assert (lhs - rhs).max_abs() < 1e-12


def test_tensor_inner_product_identity(spec):
    """<xi (x) eta, xi' (x) eta'> = <eta, phi(<xi, xi'>) eta'>."""
    if spec.n == 1:
        xi = spec.sample_vector(1, 1)
        xi2 = spec.sample_vector(1, 2)
        eta = spec.sample_vector(1, 3)
        eta2 = spec.sample_vector(1, 4)
        t1 = spec.tensor_vec(xi, eta, eta_degree=1)
        t2 = spec.tensor_vec(xi2, eta2, eta_degree=1)
        k = 1
    else:
        xi = spec.sample_vector(1, 1)
        xi2 = spec.sample_vector(1, 2)
        eta = spec.sample_vector(2, 3)
        eta2 = spec.sample_vector(2, 4)
        t1 = spec.tensor_vec(xi, eta)
        t2 = spec.tensor_vec(xi2, eta2)
        k = 2
    lhs = inner(t1, t2)
    mid = spec.phi_k(inner(xi, xi2), k)
    rhs = inner(eta, mid @ eta2)
    assert (lhs - rhs).max_abs() < 1e-10


def test_bimodule_amplification_invertible():
    spec = build_preset("rotation-m2")
    x = AMatrix.from_element(sample(spec.algebra, "element", 9))
    back = spec.amplify(spec.amplify(x, 3), -3)
    assert (x - back).max_abs() < 1e-10
    # beta = Ad U o alpha_1 really is the effective automorphism
    a = sample(spec.algebra, "element", 10)
    lhs = spec.phi1(a).entry(0, 0)
    rhs = spec.beta.apply(a)
    assert lhs.allclose(rhs, 1e-12)


def test_negative_amplify_requires_bimodule():
    spec = build_preset("cuntz2")
    x = AMatrix.eye(spec.algebra, 1)
    with pytest.raises(ConfigurationError):
        spec.amplify(x, -1)


def test_degree_inference(spec):
    if spec.n == 1:
        with pytest.raises(ConfigurationError):
            spec._degree_of(1)
    else:
        assert spec._degree_of(spec.n ** 3) == 3
        assert spec.fiber_dim(2) == spec.n ** 2


def test_max_degree_guard(spec):
    a = sample(spec.algebra, "element", 2)
    with pytest.raises(ConfigurationError):
        spec.phi_k(a, spec.max_degree + 1)


def test_validate_negative_control():
    """Scaling U by 2 breaks unitarity by exactly ||4 - 1|| = 3."""
    good = build_preset("cuntz2")
    import dataclasses
    bad = dataclasses.replace(good, unitary=good.unitary * 2.0)
    report = bad.validate()
    assert not report["pass"]
    assert abs(report["checks"]["unitarity"] - 3.0) < 1e-9
    with pytest.raises(ValidationError):
        bad.validate_or_raise()


def test_default_max_degree():
    assert default_max_degree(1) > default_max_degree(2) > default_max_degree(3)


def test_sample_vector_unit_norm(spec):
    v = spec.sample_vector(2 if spec.n > 1 else 0, 77)
    nrm = AMatrix.from_element(inner(v, v)).norm()
    assert abs(nrm - 1.0) < 1e-9
