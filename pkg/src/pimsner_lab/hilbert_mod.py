"""Free Hilbert A-modules and complete-positivity certification.

An :class:`AMatrix` is a p x q matrix over A = direct sum of matrix blocks,
i.e. an adjointable map A^q -> A^p between free modules.  Positivity and
norms of A-matrices are *defined* through :meth:`AMatrix.flatten`, which is
a faithful unital *-homomorphism onto block-diagonal complex matrices.

Complete positivity of linear maps between such flattened matrix spaces is
certified either by assembling Choi matrices per algebra block (exact, for
small sides) or by a randomized positivity probe (necessary condition only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .star_core import (
    AElement,
    AlgebraSpec,
    ConfigurationError,
    DEFAULT_TOL,
    SpecMismatchError,
    Tolerances,
    spectral_norm,
)

__all__ = [
    "AMatrix",
    "LinearMapTable",
    "CPReport",
    "inner",
    "rank_one",
    "choi_cp_check",
    "positivity_probe",
]

CHOI_CAP = 4096


class AMatrix:
    """p x q matrix over A, stored per algebra block as a (p, q, d, d) array."""

    __slots__ = ("spec", "rows", "cols", "blocks")

    def __init__(self, spec: AlgebraSpec, rows: int, cols: int, blocks):
        self.spec = spec
        self.rows = rows
        self.cols = cols
        self.blocks = [np.asarray(b, dtype=complex) for b in blocks]
        for b, d in zip(self.blocks, spec.block_dims):
            if b.shape != (rows, cols, d, d):
                raise SpecMismatchError(f"block array {b.shape} != {(rows, cols, d, d)}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, spec: AlgebraSpec, rows: int, cols: int) -> "AMatrix":
        return cls(spec, rows, cols,
                   [np.zeros((rows, cols, d, d), dtype=complex) for d in spec.block_dims])

    @classmethod
    def eye(cls, spec: AlgebraSpec, n: int) -> "AMatrix":
        out = cls.zeros(spec, n, n)
        for s, d in enumerate(spec.block_dims):
            idx = np.arange(n)
            out.blocks[s][idx, idx] = np.eye(d)
        return out

    @classmethod
    def from_elements(cls, grid) -> "AMatrix":
        """Build from a nested list of AElements (rows of columns)."""
        rows = len(grid)
        cols = len(grid[0])
        spec = grid[0][0].spec
        out = cls.zeros(spec, rows, cols)
        for i in range(rows):
            for j in range(cols):
                e = grid[i][j]
                if e.spec != spec:
                    raise SpecMismatchError("mixed algebra specs in grid")
                for s in range(spec.n_blocks):
                    out.blocks[s][i, j] = e.blocks[s]
        return out

    @classmethod
    def from_element(cls, e: AElement) -> "AMatrix":
        return cls.from_elements([[e]])

    def entry(self, i: int, j: int) -> AElement:
        return AElement(self.spec, [b[i, j] for b in self.blocks])

    def set_entry(self, i: int, j: int, e: AElement):
        for s in range(self.spec.n_blocks):
            self.blocks[s][i, j] = e.blocks[s]

    def submatrix(self, row_slice, col_slice) -> "AMatrix":
        bs = [b[row_slice, col_slice] for b in self.blocks]
        return AMatrix(self.spec, bs[0].shape[0], bs[0].shape[1], bs)

    def copy(self) -> "AMatrix":
        return AMatrix(self.spec, self.rows, self.cols, [b.copy() for b in self.blocks])

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "AMatrix", same_shape=True):
        if self.spec != other.spec:
            raise SpecMismatchError("operands over different algebras")
        if same_shape and (self.rows, self.cols) != (other.rows, other.cols):
            raise SpecMismatchError("shape mismatch")

    def __add__(self, other: "AMatrix") -> "AMatrix":
        self._check(other)
        return AMatrix(self.spec, self.rows, self.cols,
                       [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "AMatrix") -> "AMatrix":
        self._check(other)
        return AMatrix(self.spec, self.rows, self.cols,
                       [a - b for a, b in zip(self.blocks, other.blocks)])

    def __mul__(self, z) -> "AMatrix":
        return AMatrix(self.spec, self.rows, self.cols,
                       [b * complex(z) for b in self.blocks])

    __rmul__ = __mul__

    def __neg__(self) -> "AMatrix":
        return self * (-1.0)

    def __matmul__(self, other: "AMatrix") -> "AMatrix":
        self._check(other, same_shape=False)
        if self.cols != other.rows:
            raise SpecMismatchError(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        out = [np.einsum("pqab,qrbc->prac", a, b, optimize=True)
               for a, b in zip(self.blocks, other.blocks)]
        return AMatrix(self.spec, self.rows, other.cols, out)

    def adjoint(self) -> "AMatrix":
        out = [np.conj(np.transpose(b, (1, 0, 3, 2))) for b in self.blocks]
        return AMatrix(self.spec, self.cols, self.rows, out)

    def scale_element(self, a: AElement, side: str = "right") -> "AMatrix":
        """Entrywise multiply by a in A (module action for column vectors)."""
        if side == "right":
            out = [np.einsum("pqab,bc->pqac", b, e, optimize=True)
                   for b, e in zip(self.blocks, a.blocks)]
        else:
            out = [np.einsum("ab,pqbc->pqac", e, b, optimize=True)
                   for e, b in zip(a.blocks, self.blocks)]
        return AMatrix(self.spec, self.rows, self.cols, out)

    # -- flattening and metrics -------------------------------------------

    def flatten_block(self, s: int) -> np.ndarray:
        d = self.spec.block_dims[s]
        b = np.transpose(self.blocks[s], (0, 2, 1, 3))
        return b.reshape(self.rows * d, self.cols * d)

    def flatten(self) -> np.ndarray:
        """Direct sum over algebra blocks of the (p d_s) x (q d_s) matrices."""
        mats = [self.flatten_block(s) for s in range(self.spec.n_blocks)]
        r = sum(m.shape[0] for m in mats)
        c = sum(m.shape[1] for m in mats)
        out = np.zeros((r, c), dtype=complex)
        ro = co = 0
        for m in mats:
            out[ro:ro + m.shape[0], co:co + m.shape[1]] = m
            ro += m.shape[0]
            co += m.shape[1]
        return out

    @classmethod
    def from_flat(cls, spec: AlgebraSpec, rows: int, cols: int, flat: np.ndarray) -> "AMatrix":
        """Inverse of :meth:`flatten` (off-diagonal junk between blocks is dropped)."""
        out = cls.zeros(spec, rows, cols)
        ro = co = 0
        for s, d in enumerate(spec.block_dims):
            m = flat[ro:ro + rows * d, co:co + cols * d]
            out.blocks[s] = np.transpose(
                m.reshape(rows, d, cols, d), (0, 2, 1, 3)).astype(complex)
            ro += rows * d
            co += cols * d
        return out

    def norm(self, tol: Tolerances = DEFAULT_TOL) -> float:
        return max(spectral_norm(self.flatten_block(s), tol.norm_rel_tol)
                   for s in range(self.spec.n_blocks))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(b))) if b.size else 0.0 for b in self.blocks)

    def allclose(self, other: "AMatrix", tol: float = DEFAULT_TOL.eq_tol) -> bool:
        self._check(other)
        return (self - other).max_abs() <= tol

    def is_hermitian(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.rows == self.cols and (self - self.adjoint()).max_abs() <= tol.eq_tol

    def is_positive(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        if not self.is_hermitian(tol):
            return False
        for s in range(self.spec.n_blocks):
            m = self.flatten_block(s)
            m = (m + m.conj().T) / 2
            if np.linalg.eigvalsh(m).min() < -tol.psd_tol:
                return False
        return True

    def min_eig(self) -> float:
        vals = []
        for s in range(self.spec.n_blocks):
            m = self.flatten_block(s)
            vals.append(np.linalg.eigvalsh((m + m.conj().T) / 2).min())
        return float(min(vals))

    def __repr__(self):
        return f"AMatrix({self.rows}x{self.cols}, dims={self.spec.block_dims})"


def amat_arithmetic(x: AMatrix, y: AMatrix | None, op: str, scalar: complex = 1.0) -> AMatrix:
    if op == "add":
        return x + y
    if op == "mul":
        return x @ y
    if op == "adjoint":
        return x.adjoint()
    if op == "scale":
        return x * scalar
    raise ConfigurationError(f"unknown op {op!r}")


def inner(xi: AMatrix, eta: AMatrix) -> AElement:
    """Module inner product <xi, eta> = sum_i xi_i* eta_i for column vectors."""
    if xi.cols != 1 or eta.cols != 1:
        raise SpecMismatchError("inner product expects column vectors")
    res = (xi.adjoint() @ eta)
    return res.entry(0, 0)


def rank_one(mu: AMatrix, nu: AMatrix) -> AMatrix:
    """e_{mu,nu}: xi -> mu <nu, xi>; entries mu_i nu_l*."""
    if mu.cols != 1 or nu.cols != 1:
        raise SpecMismatchError("rank_one expects column vectors")
    return mu @ nu.adjoint()


def module_norm(xi: AMatrix, tol: Tolerances = DEFAULT_TOL) -> float:
    """Hilbert module norm ||<xi,xi>||^(1/2)."""
    return float(np.sqrt(max(inner(xi, xi).norm(tol), 0.0)))


# ---------------------------------------------------------------------------
# linear maps between flattened matrix spaces
# ---------------------------------------------------------------------------

@dataclass
class CPReport:
    method: str                # "choi" or "probe"
    min_eigenvalue: float      # Choi min eigenvalue, or worst probe eigenvalue
    unital_defect: float
    norm_bound: float          # ||Phi(1)||, an upper bound on ||Phi||_cb for CP maps
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {
            "method": self.method,
            "min_eig": self.min_eigenvalue,
            "unital_defect": self.unital_defect,
            "norm_bound": self.norm_bound,
            "pass": bool(self.passed),
        }


class ChoiCapExceeded(RuntimeError):
    """Choi side would exceed the cap; use positivity_probe instead."""


class LinearMapTable:
    """Linear map between flattened matrix spaces, defined on the matrix-unit
    basis of the domain.

    The flattened domain is a direct sum of full matrix algebras with sides
    ``domain_sides``; a map is completely positive iff each block restriction
    is, which is what the Choi assembly checks.  ``apply_flat`` evaluates the
    map on an arbitrary block-diagonal element; the basis-image table is
    built lazily and only when a Choi check asks for it.
    """

    def __init__(self, domain_sides, codomain_sides, apply_flat, name: str = ""):
        self.domain_sides = tuple(int(m) for m in domain_sides)
        self.codomain_sides = tuple(int(m) for m in codomain_sides)
        self._apply = apply_flat
        self.name = name
        self._images = None  # list per domain block: (m, m, C, C) arrays

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_amatrix_map(cls, spec: AlgebraSpec, p: int,
                         out_spec: AlgebraSpec, q: int, fn, name: str = ""):
        """Wrap a map AMatrix(p x p over spec) -> AMatrix(q x q over out_spec)."""
        dom = tuple(p * d for d in spec.block_dims)
        cod = tuple(q * d for d in out_spec.block_dims)

        def apply_flat(flat):
            x = AMatrix.from_flat(spec, p, p, flat)
            return fn(x).flatten()

        return cls(dom, cod, apply_flat, name=name)

    @property
    def domain_dim(self) -> int:
        return sum(self.domain_sides)

    @property
    def codomain_dim(self) -> int:
        return sum(self.codomain_sides)

    def apply_flat(self, flat: np.ndarray) -> np.ndarray:
        return self._apply(flat)

    def domain_identity(self) -> np.ndarray:
        return np.eye(self.domain_dim, dtype=complex)

    def codomain_identity(self) -> np.ndarray:
        return np.eye(self.codomain_dim, dtype=complex)

    def basis_images(self):
        """Images of the matrix-unit basis, grouped per domain block."""
        if self._images is not None:
            return self._images
        images = []
        off = 0
        n = self.domain_dim
        c = self.codomain_dim
        for m in self.domain_sides:
            arr = np.zeros((m, m, c, c), dtype=complex)
            for u in range(m):
                for v in range(m):
                    e = np.zeros((n, n), dtype=complex)
                    e[off + u, off + v] = 1.0
                    arr[u, v] = self._apply(e)
            images.append(arr)
            off += m
        self._images = images
        return images

    def compose(self, inner_map: "LinearMapTable", name: str = "") -> "LinearMapTable":
        if inner_map.codomain_sides != self.domain_sides:
            raise SpecMismatchError("composition shape chain mismatch")
        outer = self

        def apply_flat(flat):
            return outer._apply(inner_map._apply(flat))

        return LinearMapTable(inner_map.domain_sides, self.codomain_sides,
                              apply_flat, name=name or f"{self.name}*{inner_map.name}")


def choi_cp_check(table: LinearMapTable, tol: Tolerances = DEFAULT_TOL,
                  choi_cap: int = CHOI_CAP) -> CPReport:
    """Exact CP check: per domain block assemble the Choi matrix and test PSD."""
    c = table.codomain_dim
    for m in table.domain_sides:
        if m * c > choi_cap:
            raise ChoiCapExceeded(
                f"Choi side {m * c} exceeds cap {choi_cap}; use positivity_probe")
    images = table.basis_images()
    min_eig = np.inf
    herm_dev = 0.0
    for arr in images:
        m = arr.shape[0]
        choi = arr.transpose(0, 2, 1, 3).reshape(m * c, m * c)
        herm_dev = max(herm_dev, float(np.max(np.abs(choi - choi.conj().T))))
        ev = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
        min_eig = min(min_eig, float(ev.min()))
    one_img = table.apply_flat(table.domain_identity())
    unital_defect = spectral_norm(one_img - table.codomain_identity(), tol.norm_rel_tol)
    norm_bound = spectral_norm(one_img, tol.norm_rel_tol)
    passed = (herm_dev <= 1e-7) and (min_eig >= -tol.psd_tol)
    return CPReport("choi", float(min_eig), float(unital_defect), float(norm_bound),
                    passed, detail=f"hermitian_dev={herm_dev:.3e}")


def positivity_probe(table: LinearMapTable, k: int, trials: int, seed: int,
                     tol: Tolerances = DEFAULT_TOL) -> CPReport:
    """Necessary-condition CP check: apply (Phi x id_{M_k}) to seeded random
    positive elements and record the worst output eigenvalue."""
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    c = table.codomain_dim
    n = table.domain_dim
    worst = np.inf
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        # random positive element of (direct sum domain) tensor M_k
        cells = [[np.zeros((n, n), dtype=complex) for _ in range(k)] for _ in range(k)]
        off = 0
        for m in table.domain_sides:
            z = rng.standard_normal((m * k, m * k)) + 1j * rng.standard_normal((m * k, m * k))
            x = z.conj().T @ z / (m * k)
            for a in range(k):
                for b in range(k):
                    cells[a][b][off:off + m, off:off + m] = \
                        x[a * m:(a + 1) * m, b * m:(b + 1) * m]
            off += m
        out = np.zeros((c * k, c * k), dtype=complex)
        for a in range(k):
            for b in range(k):
                out[a * c:(a + 1) * c, b * c:(b + 1) * c] = table.apply_flat(cells[a][b])
        out = (out + out.conj().T) / 2
        worst = min(worst, float(np.linalg.eigvalsh(out).min()))
    one_img = table.apply_flat(table.domain_identity())
    unital_defect = spectral_norm(one_img - table.codomain_identity(), tol.norm_rel_tol)
    norm_bound = spectral_norm(one_img, tol.norm_rel_tol)
    passed = worst >= -tol.psd_tol
    return CPReport("probe", float(worst), float(unital_defect), float(norm_bound),
                    passed, detail=f"k={k} trials={trials}")


def cp_check_auto(table: LinearMapTable, tol: Tolerances = DEFAULT_TOL,
                  choi_cap: int = CHOI_CAP, probe_k: int = 2,
                  probe_trials: int = 50, seed: int = 0) -> CPReport:
    """Choi check when within cap, probe fallback otherwise."""
    try:
        return choi_cp_check(table, tol, choi_cap)
    except ChoiCapExceeded:
        return positivity_probe(table, probe_k, probe_trials, seed, tol)
