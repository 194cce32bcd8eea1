"""The concrete correspondence family E = l^2_n (x) A.

The left action is phi(a) = U* diag[alpha_1(a), ..., alpha_n(a)] U for a
unitary U in M_n(A) and automorphisms alpha_i of A.  Coordinates are fixed
once and for all:

  C1  E^k is identified with A^{n^k}; multi-indices (i_1, ..., i_k) are read
      with i_1 (the first tensor factor) most significant.
  C2  (xi (x) eta)_{(i,m)} = [phi_k(xi_i) eta]_m for xi in E^j, eta in E^k.
  C3  x (x) I_{E^k} is "apply phi_k entrywise"; the tower embedding
      T -> T (x) 1 is the k = 1 case.

With these conventions both phi_k = entrywise-phi_1 o phi_{k-1} and
phi_{j+k} = entrywise-phi_k o phi_j hold, which pins down the recursion
(the printed amplification index in the source recursion is dimensionally
off by one level; the composite invariant is what we verify).

For n = 1 the left action collapses to a single automorphism
beta = Ad U o alpha_1 of A, powers of which implement amplification in
either direction; that is what makes the two-sided (bimodule) case work.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .star_core import (
    AElement,
    AlgebraSpec,
    Automorphism,
    ConfigurationError,
    DEFAULT_TOL,
    SpecMismatchError,
    Tolerances,
    sample,
)
from .hilbert_mod import AMatrix, inner

__all__ = [
    "CorrespondenceSpec",
    "ValidationError",
    "default_max_degree",
    "kron_identity_left",
]


class ValidationError(ValueError):
    """A correspondence axiom failed numerically."""


def default_max_degree(n: int) -> int:
    if n == 1:
        return 12
    if n == 2:
        return 8
    return 5


def kron_identity_left(m: int, u: AMatrix) -> AMatrix:
    """I_m (x) u as an AMatrix (outer index most significant)."""
    out_blocks = []
    eye = np.eye(m)
    n = u.rows
    q = u.cols
    for s, d in enumerate(u.spec.block_dims):
        b = np.einsum("PQ,ijab->PiQjab", eye, u.blocks[s], optimize=True)
        out_blocks.append(b.reshape(m * n, m * q, d, d))
    return AMatrix(u.spec, m * n, m * q, out_blocks)


def _aut_apply_matrix(alpha: Automorphism, x: AMatrix, inverse: bool = False) -> AMatrix:
    """Apply an automorphism of A entrywise to an AMatrix, vectorized."""
    al = alpha.inverse() if inverse else alpha
    pinv = al._perm_inv()
    out = []
    for s in range(x.spec.n_blocks):
        v = al.unitaries[s]
        out.append(np.einsum("ab,pqbc,cd->pqad", v.conj().T, x.blocks[pinv[s]], v,
                             optimize=True))
    return AMatrix(x.spec, x.rows, x.cols, out)


@dataclass
class CorrespondenceSpec:
    """Data (A, n, U, alpha_1..alpha_n) of the concrete correspondence."""

    algebra: AlgebraSpec
    n: int
    unitary: AMatrix                 # n x n over A
    alphas: tuple[Automorphism, ...]
    max_degree: int = 0
    name: str = "custom"
    tol: Tolerances = DEFAULT_TOL
    _phi1_units: list = field(default=None, repr=False)
    _beta: Automorphism = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("fiber multiplicity n must be >= 1")
        if (self.unitary.rows, self.unitary.cols) != (self.n, self.n):
            raise ConfigurationError("U must be n x n over A")
        if len(self.alphas) != self.n:
            raise ConfigurationError("need exactly n automorphisms")
        if self.max_degree <= 0:
            self.max_degree = default_max_degree(self.n)
        self._phi1_units = self._build_phi1_units()
        if self.n == 1:
            self._beta = self._effective_automorphism()

    # -- the left action ---------------------------------------------------

    def alpha_tilde(self, a: AElement) -> AMatrix:
        """diag[alpha_1(a), ..., alpha_n(a)] in M_n(A)."""
        out = AMatrix.zeros(self.algebra, self.n, self.n)
        for i, al in enumerate(self.alphas):
            out.set_entry(i, i, al.apply(a))
        return out

    def alpha_hat(self, x: AMatrix) -> AMatrix:
        """[delta_ij alpha_i^{-1}(x_ii)]; discards off-diagonal entries."""
        if (x.rows, x.cols) != (self.n, self.n):
            raise SpecMismatchError("alpha_hat expects an n x n matrix over A")
        out = AMatrix.zeros(self.algebra, self.n, self.n)
        for i, al in enumerate(self.alphas):
            out.set_entry(i, i, al.apply(x.entry(i, i), inverse=True))
        return out

    def phi1(self, a: AElement) -> AMatrix:
        u = self.unitary
        return u.adjoint() @ self.alpha_tilde(a) @ u

    def _effective_automorphism(self) -> Automorphism:
        """n = 1: phi_1 = Ad u o alpha_1 is itself an automorphism of A."""
        u = self.unitary.entry(0, 0)
        ad_u = Automorphism(self.algebra, tuple(range(self.algebra.n_blocks)),
                            tuple(u.blocks))
        return ad_u.compose(self.alphas[0])

    @property
    def beta(self) -> Automorphism:
        if self.n != 1:
            raise ConfigurationError("effective automorphism only exists for n = 1")
        return self._beta

    def _build_phi1_units(self):
        """phi_1 images of the matrix-unit basis of A, arranged per block
        pair for the vectorized entrywise amplification."""
        units = [[None] * self.algebra.n_blocks for _ in range(self.algebra.n_blocks)]
        imgs = {}
        for s, u, v, e in self.algebra.basis():
            imgs[(s, u, v)] = self.phi1(e)
        for s, ds in enumerate(self.algebra.block_dims):
            for t, dt in enumerate(self.algebra.block_dims):
                # (ds, ds, n, n, dt, dt): image of e^s_{uv}, block t
                arr = np.zeros((ds, ds, self.n, self.n, dt, dt), dtype=complex)
                for u in range(ds):
                    for v in range(ds):
                        arr[u, v] = imgs[(s, u, v)].blocks[t]
                units[s][t] = arr
        return units

    # -- amplification -----------------------------------------------------

    def amplify1(self, x: AMatrix) -> AMatrix:
        """x (x) I_E: apply phi_1 to every entry (inner index least significant)."""
        p, q = x.rows, x.cols
        n = self.n
        out_blocks = []
        for t, dt in enumerate(self.algebra.block_dims):
            acc = np.zeros((p, n, q, n, dt, dt), dtype=complex)
            for s in range(self.algebra.n_blocks):
                acc += np.einsum("PQuv,uvijce->PiQjce",
                                 x.blocks[s], self._phi1_units[s][t], optimize=True)
            out_blocks.append(acc.reshape(p * n, q * n, dt, dt))
        return AMatrix(self.algebra, p * n, q * n, out_blocks)

    def amplify(self, x: AMatrix, k: int) -> AMatrix:
        """x (x) I_{E^k}.  Negative k is only meaningful for n = 1 (two-sided
        modules), where amplification is a power of the effective automorphism."""
        if self.n == 1:
            out = x
            beta = self.beta
            inv = k < 0
            for _ in range(abs(k)):
                out = _aut_apply_matrix(beta, out, inverse=inv)
            return out
        if k < 0:
            raise ConfigurationError("negative amplification requires n = 1")
        for _ in range(k):
            x = self.amplify1(x)
        return x

    def phi_k(self, a: AElement, k: int) -> AMatrix:
        """The embedding A -> M_{n^k}(A); phi_0 = id."""
        if k < 0 or k > self.max_degree:
            raise ConfigurationError(f"degree {k} outside cache limit {self.max_degree}")
        return self.amplify(AMatrix.from_element(a), k)

    def phi_k_direct(self, a: AElement, k: int) -> AMatrix:
        """Independent code path: the recursion via the explicit unitary
        I_{n^{k-1}} (x) U and entrywise alpha-tilde, as matrix products."""
        out = AMatrix.from_element(a)
        for j in range(1, k + 1):
            m = self.n ** (j - 1)
            # entrywise alpha_tilde, inner index least significant
            expanded = AMatrix.zeros(self.algebra, m * self.n, m * self.n)
            for p in range(m):
                for q in range(m):
                    blk = self.alpha_tilde(out.entry(p, q))
                    for i in range(self.n):
                        expanded.set_entry(p * self.n + i, q * self.n + i,
                                           blk.entry(i, i))
            big_u = kron_identity_left(m, self.unitary)
            out = big_u.adjoint() @ expanded @ big_u
        return out

    # -- module vectors ----------------------------------------------------

    def fiber_dim(self, k: int) -> int:
        """Rank of E^k as a free module (1 for every degree when n = 1)."""
        if self.n == 1:
            return 1
        if k < 0:
            raise ConfigurationError("negative degrees require n = 1")
        return self.n ** k

    def tensor_vec(self, xi: AMatrix, eta: AMatrix, eta_degree: int | None = None) -> AMatrix:
        """Internal tensor of module vectors, (xi (x) eta)_{(i,m)} = [phi_k(xi_i) eta]_m.

        For n = 1 every tensor power has a single coordinate, so the degree
        of eta must be passed explicitly (it may be negative, two-sided case).
        """
        if xi.cols != 1 or eta.cols != 1:
            raise SpecMismatchError("tensor_vec expects column vectors")
        k = self._degree_of(eta.rows) if eta_degree is None else eta_degree
        return self.amplify(xi, k) @ eta

    def _degree_of(self, rank: int) -> int:
        if self.n == 1:
            raise ConfigurationError("degree of an n = 1 vector is ambiguous; pass it explicitly")
        k = 0
        r = rank
        while r > 1:
            if r % self.n:
                raise SpecMismatchError(f"rank {rank} is not a power of n = {self.n}")
            r //= self.n
            k += 1
        return k

    def sample_vector(self, degree: int, seed: int, unit_norm: bool = True) -> AMatrix:
        """Seeded module vector in E^degree (column AMatrix)."""
        rank = self.fiber_dim(degree)
        rows = []
        for i in range(rank):
            rows.append([sample(self.algebra, "element", seed * 7919 + i)])
        v = AMatrix.from_elements(rows)
        if unit_norm:
            nrm = np.sqrt(max(inner(v, v).norm(self.tol), 1e-300))
            v = v * (1.0 / nrm)
        return v

    # -- validation --------------------------------------------------------

    def validate(self, seed: int = 11) -> dict:
        """Check the correspondence axioms; returns a report dict."""
        tol = self.tol
        checks = {}
        u = self.unitary
        eye_n = AMatrix.eye(self.algebra, self.n)
        checks["unitarity"] = (u.adjoint() @ u - eye_n).norm(tol)
        checks["unitality"] = (self.phi1(self.algebra.unit()) - eye_n).max_abs()
        a = sample(self.algebra, "element", seed)
        b = sample(self.algebra, "element", seed + 1)
        checks["multiplicativity"] = (
            self.phi1(a @ b) - self.phi1(a) @ self.phi1(b)).max_abs()
        checks["star_property"] = (
            self.phi1(a.adjoint()) - self.phi1(a).adjoint()).max_abs()
        # faithfulness: the flattened matrix of phi_1 on the basis of A has
        # trivial kernel
        cols = []
        for _, _, _, e in self.algebra.basis():
            cols.append(self.phi1(e).flatten().ravel())
        mat = np.array(cols).T
        sv = np.linalg.svd(mat, compute_uv=False)
        checks["faithfulness_min_sv"] = float(sv.min())
        aut_dev = 0.0
        for al in self.alphas:
            x = sample(self.algebra, "element", seed + 2)
            y = sample(self.algebra, "element", seed + 3)
            aut_dev = max(aut_dev, (al.apply(x @ y) - al.apply(x) @ al.apply(y)).max_abs())
            aut_dev = max(aut_dev, (al.apply(al.apply(x), inverse=True) - x).max_abs())
        checks["automorphisms"] = aut_dev
        ok = (checks["unitarity"] <= 1e-8 and checks["unitality"] <= tol.eq_tol
              and checks["multiplicativity"] <= 1e-8
              and checks["star_property"] <= tol.eq_tol
              and checks["faithfulness_min_sv"] >= 1e-8
              and checks["automorphisms"] <= 1e-8)
        return {"pass": bool(ok), "checks": checks, "preset": self.name,
                "n": self.n, "block_dims": list(self.algebra.block_dims)}

    def validate_or_raise(self, seed: int = 11) -> dict:
        rep = self.validate(seed)
        if not rep["pass"]:
            bad = {k: v for k, v in rep["checks"].items()}
            raise ValidationError(f"correspondence axioms violated: {bad}")
        return rep
