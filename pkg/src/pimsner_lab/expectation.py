"""Conditional expectations onto A along the tower M_{n^k}(A).

The tower consists of the embeddings j_k: T -> T (x) 1 with inductive limit
represented only by finitely many compatible levels.  The expectations are
built by inverting one tensor layer at a time: undo the twist by U, undo the
diagonal automorphisms, then average the diagonal (normalised trace).  The
induced module map (eps-bar) and operator map (eps-hat) are *defined* as
entrywise applications of the level expectation in the fixed coordinates;
the defining formulas from the lifting machinery are then asserted as
theorems by the test-suite rather than used as definitions.
"""

from __future__ import annotations

import numpy as np

from .star_core import AElement, ConfigurationError, DEFAULT_TOL, SpecMismatchError, sample
from .hilbert_mod import (
    AMatrix,
    LinearMapTable,
    cp_check_auto,
    inner,
    module_norm,
)
from .correspondence import CorrespondenceSpec, kron_identity_left

__all__ = [
    "ex_trace",
    "embed_jk",
    "ex_k",
    "eps_bar",
    "eps_hat",
    "ex_k_table",
    "verify_cond_exp",
]


def ex_trace(spec: CorrespondenceSpec, x: AMatrix) -> AElement:
    """Normalised trace M_n(A) -> A: average of the diagonal entries."""
    if x.rows != x.cols:
        raise SpecMismatchError("normalised trace expects a square matrix")
    n = x.rows
    out = spec.algebra.zero()
    for i in range(n):
        out = out + x.entry(i, i)
    return out * (1.0 / n)


def embed_jk(spec: CorrespondenceSpec, t: AMatrix) -> AMatrix:
    """Tower embedding T -> T (x) 1, i.e. one entrywise amplification."""
    return spec.amplify(t, 1)


def _peel_layer(spec: CorrespondenceSpec, x: AMatrix) -> AMatrix:
    """One inversion step M_{m n}(A) -> M_m(A): Ad(I (x) U*), entrywise
    alpha-hat, then the inner normalised trace."""
    n = spec.n
    if x.rows % n or x.rows != x.cols:
        raise SpecMismatchError("matrix side must be a multiple of n")
    m = x.rows // n
    big_u = kron_identity_left(m, spec.unitary)
    y = big_u @ x @ big_u.adjoint()     # Ad(I (x) U*) with Ad V = V* . V
    out = AMatrix.zeros(spec.algebra, m, m)
    inv_alphas = [al.inverse() for al in spec.alphas]
    for p in range(m):
        for q in range(m):
            acc = spec.algebra.zero()
            for i in range(n):
                acc = acc + inv_alphas[i].apply(y.entry(p * n + i, q * n + i))
            out.set_entry(p, q, acc * (1.0 / n))
    return out


def ex_k(spec: CorrespondenceSpec, k: int, x: AMatrix) -> AElement:
    """Ex_k: M_{n^k}(A) -> A, peeling one tensor layer at a time."""
    if x.rows != spec.n ** k or x.rows != x.cols:
        raise SpecMismatchError(f"expected a {spec.n ** k} x {spec.n ** k} matrix")
    for _ in range(k):
        x = _peel_layer(spec, x)
    return x.entry(0, 0)


def eps_bar(spec: CorrespondenceSpec, level: int, zeta: AMatrix) -> AMatrix:
    """The contraction E^m (x) B -> E^m for B = M_{n^level}(A).

    Coordinates: a vector of (E^m (x) B) is a column over B, stored as a
    (rank * n^level) x n^level matrix over A; the map applies Ex_level to
    each B-entry."""
    nk = spec.n ** level
    if zeta.cols != nk or zeta.rows % nk:
        raise SpecMismatchError("vector does not match the requested level")
    m = zeta.rows // nk
    out_rows = []
    for i in range(m):
        b = zeta.submatrix(slice(i * nk, (i + 1) * nk), slice(0, nk))
        out_rows.append([ex_k(spec, level, b)])
    return AMatrix.from_elements(out_rows)


def eps_hat(spec: CorrespondenceSpec, level: int, t: AMatrix) -> AMatrix:
    """Entrywise Ex_level on an m x m matrix over B = M_{n^level}(A)."""
    nk = spec.n ** level
    if t.rows % nk or t.cols % nk:
        raise SpecMismatchError("matrix does not match the requested level")
    m, mc = t.rows // nk, t.cols // nk
    grid = []
    for i in range(m):
        row = []
        for j in range(mc):
            b = t.submatrix(slice(i * nk, (i + 1) * nk), slice(j * nk, (j + 1) * nk))
            row.append(ex_k(spec, level, b))
        grid.append(row)
    return AMatrix.from_elements(grid)


def ex_k_table(spec: CorrespondenceSpec, k: int, name: str = "") -> LinearMapTable:
    nk = spec.n ** k
    return LinearMapTable.from_amatrix_map(
        spec.algebra, nk, spec.algebra, 1,
        lambda x: AMatrix.from_element(ex_k(spec, k, x)),
        name=name or f"Ex_{k}")


def verify_cond_exp(spec: CorrespondenceSpec, level: int, seed: int = 23,
                    n_samples: int = 5, choi_cap: int = 4096) -> dict:
    """Check the conditional-expectation axioms for Ex_level.

    (i) Ex o phi = id; (ii) bimodule property; (iii) Schwarz positivity;
    (iv) tower compatibility Ex_{level+1} o j_level = Ex_level; (v) CP and
    contractivity.  Returns a report with the worst deviation per axiom."""
    tol = spec.tol
    nk = spec.n ** level
    axioms = {}
    dev_id = dev_bimod = 0.0
    schwarz_min = np.inf
    for t in range(n_samples):
        a = sample(spec.algebra, "element", seed + 10 * t)
        b = sample(spec.algebra, "element", seed + 10 * t + 1)
        x = _sample_matrix(spec, nk, seed + 10 * t + 2)
        dev_id = max(dev_id, (ex_k(spec, level, spec.phi_k(a, level)) - a).max_abs())
        lhs = ex_k(spec, level,
                   spec.phi_k(a, level) @ x @ spec.phi_k(b, level))
        rhs = a @ ex_k(spec, level, x) @ b
        dev_bimod = max(dev_bimod, (lhs - rhs).max_abs())
        y = ex_k(spec, level, x.adjoint() @ x)
        z = ex_k(spec, level, x).adjoint() @ ex_k(spec, level, x)
        diff = AMatrix.from_element(y - z)
        schwarz_min = min(schwarz_min, diff.min_eig())
    axioms["idempotence"] = {"max_dev": float(dev_id), "pass": dev_id <= tol.eq_tol}
    axioms["bimodule"] = {"max_dev": float(dev_bimod), "pass": dev_bimod <= tol.eq_tol}
    axioms["schwarz"] = {"min_eig": float(schwarz_min),
                         "pass": schwarz_min >= -tol.psd_tol}
    dev_tower = 0.0
    if level + 1 <= spec.max_degree:
        for t in range(n_samples):
            x = _sample_matrix(spec, nk, seed + 100 + t)
            dev_tower = max(dev_tower, (
                ex_k(spec, level + 1, embed_jk(spec, x))
                - ex_k(spec, level, x)).max_abs())
    axioms["tower"] = {"max_dev": float(dev_tower), "pass": dev_tower <= tol.eq_tol}
    cp = cp_check_auto(ex_k_table(spec, level), tol, choi_cap=choi_cap,
                       seed=seed + 999)
    axioms["cp"] = cp.to_dict()
    axioms["cp"]["contractive"] = cp.norm_bound <= 1.0 + 1e-8
    ok = all(v.get("pass", True) for v in axioms.values()) \
        and axioms["cp"]["contractive"] and cp.unital_defect <= 1e-8
    return {"level": level, "pass": bool(ok), "axioms": axioms}


def _sample_matrix(spec: CorrespondenceSpec, side: int, seed: int) -> AMatrix:
    grid = [[sample(spec.algebra, "element", seed * 613 + i * side + j)
             for j in range(side)] for i in range(side)]
    return AMatrix.from_elements(grid)
