"""Truncated Fock modules and the finite section pipelines.

A :class:`GradedOperator` is a block operator on a degree window of the
(one- or two-sided) Fock module, blocks keyed by degree pairs and stored
sparsely.  Creation and Toeplitz operators are graded-banded and
degree-monotone, so every block whose degrees lie inside the window equals
its untruncated value; truncation error shows up only as absent blocks.

The pipelines are the compressions phi_N(x) = P_N x P_N followed by the
averaged amplifications Psi_N(x) = (N+1)^{-1} sum_k x (x) I_{E^k} (the sum
over k >= 0 one-sided, over all integers two-sided).  On canonical
generators they act as Schur multipliers; :func:`schur_oracle` computes the
same coefficients by direct counting with no operator machinery, and is
the authority whenever the two disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .star_core import ConfigurationError, DEFAULT_TOL, SpecMismatchError, Tolerances
from .hilbert_mod import AMatrix, LinearMapTable, rank_one
from .correspondence import CorrespondenceSpec

__all__ = [
    "FockWindow",
    "GradedOperator",
    "TailSymbol",
    "SchurRow",
    "creation_op",
    "toeplitz_op",
    "compress",
    "psi_amplify",
    "v_n",
    "w_n",
    "schur_oracle",
    "printed_coefficient",
    "tail_compare",
    "pipeline_table",
]


@dataclass(frozen=True)
class FockWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if not (self.lo <= 0 <= self.hi):
            raise ConfigurationError("window must contain degree 0")

    @property
    def two_sided(self) -> bool:
        return self.lo < 0

    def degrees(self):
        return range(self.lo, self.hi + 1)

    @classmethod
    def one_sided(cls, hi: int) -> "FockWindow":
        return cls(0, hi)

    @classmethod
    def two_sided_sym(cls, hi: int) -> "FockWindow":
        return cls(-hi, hi)


def _check_window(spec: CorrespondenceSpec, window: FockWindow):
    if window.two_sided and spec.n != 1:
        raise ConfigurationError("two-sided Fock modules require n = 1")


class GradedOperator:
    """Block operator on a Fock window; absent keys are zero blocks."""

    __slots__ = ("spec", "window", "blocks")

    def __init__(self, spec: CorrespondenceSpec, window: FockWindow, blocks=None):
        _check_window(spec, window)
        self.spec = spec
        self.window = window
        self.blocks: dict[tuple[int, int], AMatrix] = {}
        if blocks:
            for key, val in blocks.items():
                self.set_block(key[0], key[1], val)

    def _shape_of(self, i: int, j: int):
        return self.spec.fiber_dim(i), self.spec.fiber_dim(j)

    def set_block(self, i: int, j: int, val: AMatrix):
        if not (self.window.lo <= i <= self.window.hi
                and self.window.lo <= j <= self.window.hi):
            raise ConfigurationError(f"degrees ({i},{j}) outside window")
        if (val.rows, val.cols) != self._shape_of(i, j):
            raise SpecMismatchError(f"block ({i},{j}) has wrong shape")
        self.blocks[(i, j)] = val

    def add_block(self, i: int, j: int, val: AMatrix):
        if (i, j) in self.blocks:
            self.blocks[(i, j)] = self.blocks[(i, j)] + val
        else:
            self.set_block(i, j, val)

    def block(self, i: int, j: int) -> AMatrix:
        if (i, j) in self.blocks:
            return self.blocks[(i, j)]
        r, c = self._shape_of(i, j)
        return AMatrix.zeros(self.spec.algebra, r, c)

    def support(self):
        return sorted(self.blocks.keys())

    # -- algebra -----------------------------------------------------------

    def _check(self, other: "GradedOperator"):
        if self.spec is not other.spec and self.spec != other.spec:
            raise SpecMismatchError("operators over different correspondences")
        if self.window != other.window:
            raise SpecMismatchError("operators on different windows")

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        self._check(other)
        out = GradedOperator(self.spec, self.window, self.blocks)
        for key, val in other.blocks.items():
            out.add_block(*key, val)
        return out

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + (other * (-1.0))

    def __mul__(self, z) -> "GradedOperator":
        return GradedOperator(self.spec, self.window,
                              {k: v * z for k, v in self.blocks.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        self._check(other)
        out = GradedOperator(self.spec, self.window)
        by_row: dict[int, list[tuple[int, AMatrix]]] = {}
        for (k, j), val in other.blocks.items():
            by_row.setdefault(k, []).append((j, val))
        for (i, k), left in self.blocks.items():
            for j, right in by_row.get(k, ()):
                out.add_block(i, j, left @ right)
        return out

    def adjoint(self) -> "GradedOperator":
        return GradedOperator(self.spec, self.window,
                              {(j, i): v.adjoint() for (i, j), v in self.blocks.items()})

    @classmethod
    def identity(cls, spec: CorrespondenceSpec, window: FockWindow) -> "GradedOperator":
        out = cls(spec, window)
        for d in window.degrees():
            out.set_block(d, d, AMatrix.eye(spec.algebra, spec.fiber_dim(d)))
        return out

    # -- metrics -----------------------------------------------------------

    def to_amatrix(self) -> AMatrix:
        """Assemble the window into one square AMatrix over A."""
        dims = [self.spec.fiber_dim(d) for d in self.window.degrees()]
        offs = np.concatenate([[0], np.cumsum(dims)])
        total = int(offs[-1])
        out = AMatrix.zeros(self.spec.algebra, total, total)
        lo = self.window.lo
        for (i, j), val in self.blocks.items():
            ro, co = int(offs[i - lo]), int(offs[j - lo])
            for s in range(out.spec.n_blocks):
                out.blocks[s][ro:ro + val.rows, co:co + val.cols] = val.blocks[s]
        return out

    @classmethod
    def from_amatrix(cls, spec: CorrespondenceSpec, window: FockWindow,
                     mat: AMatrix, drop_tol: float = 0.0) -> "GradedOperator":
        dims = [spec.fiber_dim(d) for d in window.degrees()]
        offs = np.concatenate([[0], np.cumsum(dims)])
        out = cls(spec, window)
        degs = list(window.degrees())
        for a, i in enumerate(degs):
            for b, j in enumerate(degs):
                sub = mat.submatrix(slice(int(offs[a]), int(offs[a + 1])),
                                    slice(int(offs[b]), int(offs[b + 1])))
                if sub.max_abs() > drop_tol:
                    out.set_block(i, j, sub)
        return out

    def norm(self, tol: Tolerances = DEFAULT_TOL) -> float:
        if not self.blocks:
            return 0.0
        return self.to_amatrix().norm(tol)

    def max_block_dev(self, other: "GradedOperator") -> float:
        self._check(other)
        dev = 0.0
        for key in set(self.blocks) | set(other.blocks):
            dev = max(dev, (self.block(*key) - other.block(*key)).max_abs())
        return dev

    def shared_block_dev(self, other: "GradedOperator") -> float:
        """Deviation on degree pairs representable in both windows."""
        w1, w2 = self.window, other.window
        lo, hi = max(w1.lo, w2.lo), min(w1.hi, w2.hi)
        dev = 0.0
        keys = {k for k in (set(self.blocks) | set(other.blocks))
                if lo <= k[0] <= hi and lo <= k[1] <= hi}
        for i, j in keys:
            dev = max(dev, (self.block(i, j) - other.block(i, j)).max_abs())
        return dev

    def __repr__(self):
        return (f"GradedOperator(window=[{self.window.lo},{self.window.hi}], "
                f"support={self.support()})")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def creation_op(spec: CorrespondenceSpec, xi: AMatrix, window: FockWindow) -> GradedOperator:
    """t_xi: eta -> xi (x) eta, blocks (k+1, k) only."""
    _check_window(spec, window)
    if xi.cols != 1 or xi.rows != spec.fiber_dim(1):
        raise SpecMismatchError("creation vector must lie in E")
    out = GradedOperator(spec, window)
    for k in window.degrees():
        if k + 1 > window.hi:
            continue
        out.set_block(k + 1, k, spec.amplify(xi, k))
    return out


def toeplitz_op(spec: CorrespondenceSpec, mu: AMatrix, nu: AMatrix,
                window: FockWindow, r: int | None = None,
                s: int | None = None) -> GradedOperator:
    """t_mu t_nu* (one-sided) or s_mu s_nu* (two-sided): the banded operator
    with blocks (r+k, s+k) = e_{mu,nu} (x) I_{E^k}."""
    _check_window(spec, window)
    r = spec._degree_of(mu.rows) if r is None else r
    s = spec._degree_of(nu.rows) if s is None else s
    if r > window.hi or s > window.hi:
        raise ConfigurationError("generator degree exceeds window")
    e = rank_one(mu, nu)
    out = GradedOperator(spec, window)
    lo = window.lo if window.two_sided else 0
    # incremental amplification keeps the cost of deep bands manageable
    cur = e
    cur_k = 0
    for k in range(0, window.hi - max(r, s) + 1):
        if k > cur_k:
            cur = spec.amplify(cur, 1)
            cur_k = k
        if r + k >= window.lo and s + k >= window.lo:
            out.set_block(r + k, s + k, cur)
    if window.two_sided:
        cur = e
        for k in range(-1, -(window.hi - window.lo) - 1, -1):
            if r + k < window.lo or s + k < window.lo:
                break
            cur = spec.amplify(cur, -1)
            if r + k <= window.hi and s + k <= window.hi:
                out.set_block(r + k, s + k, cur)
    return out


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def compress(x: GradedOperator, big_n: int) -> GradedOperator:
    """phi_N(x) = P_N x P_N, keeping blocks with both degrees in [0, N]."""
    if not (0 <= big_n <= x.window.hi):
        raise ConfigurationError(f"N={big_n} out of range for window")
    out = GradedOperator(x.spec, x.window)
    for (i, j), val in x.blocks.items():
        if 0 <= i <= big_n and 0 <= j <= big_n:
            out.set_block(i, j, val)
    return out


def psi_amplify(x: GradedOperator, big_n: int) -> GradedOperator:
    """Psi_N(x) = (N+1)^{-1} sum_k x (x) I_{E^k} over representable shifts.

    One-sided windows sum k >= 0; two-sided windows sum over all integers
    (which makes the map unital)."""
    window = x.window
    for (i, j) in x.blocks:
        if not (0 <= i <= big_n and 0 <= j <= big_n):
            raise ConfigurationError("input support must lie within [0, N]^2")
    out = GradedOperator(x.spec, window)
    weight = 1.0 / (big_n + 1)
    k_lo = window.lo - big_n if window.two_sided else 0
    k_hi = window.hi
    for (i, j), val in x.blocks.items():
        cur = val
        cur_k = 0
        for k in range(0, k_hi + 1):
            if i + k > window.hi or j + k > window.hi:
                break
            if k > cur_k:
                cur = x.spec.amplify(cur, 1)
                cur_k = k
            out.add_block(i + k, j + k, cur * weight)
        if window.two_sided:
            cur = val
            for k in range(-1, k_lo - 1, -1):
                if i + k < window.lo or j + k < window.lo:
                    break
                cur = x.spec.amplify(cur, -1)
                out.add_block(i + k, j + k, cur * weight)
    return out


def schur_oracle(big_n: int, r: int, s: int, l: int, sided: str) -> Fraction:
    """Independent combinatorial count of the pipeline's Schur coefficient.

    Implemented as a direct loop over the compression/amplification indices;
    no operator machinery is involved.
    """
    if sided == "one":
        count = 0
        for k in range(0, big_n + 1):
            if r + k <= big_n and s + k <= big_n and k <= l:
                count += 1
        return Fraction(count, big_n + 1)
    if sided == "two":
        count = 0
        for k in range(-max(r, s) - big_n - 1, big_n + 2):
            if 0 <= r + k <= big_n and 0 <= s + k <= big_n:
                count += 1
        return Fraction(count, big_n + 1)
    raise ConfigurationError(f"unknown sidedness {sided!r}")


def printed_coefficient(big_n: int, r: int, s: int) -> Fraction:
    """The printed tail coefficient min(N-r, N-s)/(N+1) (0 when r or s > N).

    Direct counting gives (min(N-r, N-s)+1)/(N+1) instead; unitality of the
    two-sided pipeline at r = s forces the +1, so the oracle wins.  Both are
    reported, never silently."""
    if r > big_n or s > big_n:
        return Fraction(0)
    return Fraction(min(big_n - r, big_n - s), big_n + 1)


@dataclass
class SchurRow:
    N: int
    r: int
    s: int
    l: int
    expected: Fraction
    measured: float
    abs_err: float
    sided: str

    def csv_fields(self):
        return [self.N, self.r, self.s, self.l,
                self.expected.numerator, self.expected.denominator,
                f"{self.measured:.17g}", f"{self.abs_err:.17g}", self.sided]


@dataclass
class TailSymbol:
    """Eventual-block description sum_l c_l (e (x) I_{E^l}) of a Cuntz-Pimsner
    element modulo compacts."""
    r: int
    s: int
    e: AMatrix
    coeffs: dict = field(default_factory=dict)   # exceptional offsets
    tail: Fraction = Fraction(1)

    def coeff(self, l: int) -> Fraction:
        return self.coeffs.get(l, self.tail)

    def stabilization_offset(self) -> int:
        bad = [l for l, c in self.coeffs.items() if c != self.tail]
        return max(bad) + 1 if bad else 0


def _measure_coefficient(block: AMatrix, reference: AMatrix, eq_tol: float):
    """Least-squares scalar c with block ~ c * reference, plus residual."""
    num = 0.0 + 0.0j
    den = 0.0
    for b, rb in zip(block.blocks, reference.blocks):
        num += complex(np.vdot(rb, b))
        den += float(np.vdot(rb, rb).real)
    if den <= eq_tol ** 2:
        return 0.0, block.max_abs()
    c = num / den
    resid = (block - reference * c).max_abs()
    return c.real if abs(c.imag) < 1e-12 else c, resid


def _schur_measure(spec: CorrespondenceSpec, pipeline_out: GradedOperator,
                   e: AMatrix, big_n: int, r: int, s: int, sided: str,
                   offsets, tol: Tolerances):
    rows = []
    refs = {}
    cur = e
    cur_k = 0
    for l in sorted(o for o in offsets if o >= 0):
        while cur_k < l:
            cur = spec.amplify(cur, 1)
            cur_k += 1
        refs[l] = cur
    cur = e
    cur_k = 0
    for l in sorted((o for o in offsets if o < 0), reverse=True):
        while cur_k > l:
            cur = spec.amplify(cur, -1)
            cur_k -= 1
        refs[l] = cur
    for l in sorted(offsets):
        block = pipeline_out.block(r + l, s + l)
        c, resid = _measure_coefficient(block, refs[l], tol.eq_tol)
        if resid > max(tol.eq_tol, 1e-8):
            raise ValueError(
                f"pipeline output at offset {l} is not proportional to the "
                f"generator band (residual {resid:.3e})")
        expected = schur_oracle(big_n, r, s, l, sided)
        measured = float(np.real(c))
        rows.append(SchurRow(big_n, r, s, l, expected, measured,
                             abs(measured - float(expected)), sided))
    return rows


def v_n(spec: CorrespondenceSpec, mu: AMatrix, nu: AMatrix, big_n: int,
        window: FockWindow, r: int | None = None, s: int | None = None,
        tol: Tolerances = DEFAULT_TOL):
    """One-sided pipeline Psi_N o phi_N on t_mu t_nu*, with measured Schur rows."""
    r = spec._degree_of(mu.rows) if r is None else r
    s = spec._degree_of(nu.rows) if s is None else s
    top = toeplitz_op(spec, mu, nu, window, r=r, s=s)
    out = psi_amplify(compress(top, big_n), big_n)
    offsets = range(0, window.hi - max(r, s) + 1)
    rows = _schur_measure(spec, out, rank_one(mu, nu), big_n, r, s, "one",
                          offsets, tol)
    return out, rows


def w_n(spec: CorrespondenceSpec, mu: AMatrix, nu: AMatrix, big_n: int,
        window: FockWindow, r: int, s: int, tol: Tolerances = DEFAULT_TOL):
    """Two-sided pipeline (n = 1 only): every representable offset carries the
    same coefficient; there is no perturbation term."""
    if spec.n != 1:
        raise ConfigurationError("two-sided pipeline requires n = 1")
    if not window.two_sided:
        raise ConfigurationError("two-sided pipeline needs a two-sided window")
    top = toeplitz_op(spec, mu, nu, window, r=r, s=s)
    out = psi_amplify(compress(top, big_n), big_n)
    offsets = [l for l in range(window.lo - min(r, s), window.hi + 1)
               if window.lo <= r + l <= window.hi and window.lo <= s + l <= window.hi]
    rows = _schur_measure(spec, out, rank_one(mu, nu), big_n, r, s, "two",
                          offsets, tol)
    return out, rows


def tail_compare(x: GradedOperator, t: TailSymbol, tol: Tolerances = DEFAULT_TOL):
    """Compare a graded operator against an eventual-block description.

    Returns (max deviation at offsets >= stabilization, sorted list of
    offsets below stabilization where blocks deviate from the tail constant:
    the compact part)."""
    window = x.window
    stab = t.stabilization_offset()
    r, s = t.r, t.s
    lo = window.lo - min(r, s) if window.two_sided else 0
    hi = window.hi - max(r, s)
    tail_dev = 0.0
    compact = []
    cur = {0: t.e}
    ref = t.e
    for l in range(1, hi + 1):
        ref = x.spec.amplify(ref, 1)
        cur[l] = ref
    ref = t.e
    for l in range(-1, lo - 1, -1):
        ref = x.spec.amplify(ref, -1)
        cur[l] = ref
    for l in range(lo, hi + 1):
        if not (window.lo <= r + l <= window.hi and window.lo <= s + l <= window.hi):
            continue
        block = x.block(r + l, s + l)
        dev_tail = (block - cur[l] * float(t.tail)).max_abs()
        if l >= stab:
            tail_dev = max(tail_dev, dev_tail)
        if dev_tail > tol.eq_tol:
            compact.append(l)
    return tail_dev, sorted(compact)


def pipeline_table(spec: CorrespondenceSpec, window: FockWindow, big_n: int,
                   name: str = "") -> LinearMapTable:
    """The window-restricted pipeline as a linear map on the flattened window
    algebra, for CP certification."""
    _check_window(spec, window)
    total = sum(spec.fiber_dim(d) for d in window.degrees())

    def fn(mat: AMatrix) -> AMatrix:
        g = GradedOperator.from_amatrix(spec, window, mat)
        return psi_amplify(compress(g, big_n), big_n).to_amatrix()

    return LinearMapTable.from_amatrix_map(
        spec.algebra, total, spec.algebra, total, fn,
        name=name or f"pipeline(N={big_n})")
