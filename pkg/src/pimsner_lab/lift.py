"""Lifting machinery and completely positive approximation certificates.

Three constructions live here:

* the bimodule (n = 1) lift: compression of bilateral Toeplitz operators to
  the one-sided Fock module, which reproduces the one-sided generators on
  their whole band and leaves only finitely many low-degree blocks behind;

* the finite-level bimodule over B = M_{n^K}(A): coordinates, both inner
  products, the nonunital band representations pi_i and the defect identity
  eps-hat(t_{mu (x) b} t_{nu (x) c}*) - t_mu pi_i(b c*) t_nu*  which must be
  supported strictly below the compact level i;

* CPAP certificates: the finite-section pipeline factored through the
  matrix algebra M_D(A) of a compressed window, with CP witnesses for both
  factor maps, measured Schur coefficients and a Fejer-rate error bound,
  all serializable and re-runnable from the recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .star_core import ConfigurationError, DEFAULT_TOL, SpecMismatchError, Tolerances
from .hilbert_mod import (
    AMatrix,
    CPReport,
    LinearMapTable,
    cp_check_auto,
    rank_one,
)
from .correspondence import CorrespondenceSpec
from .expectation import eps_hat
from .fock import (
    FockWindow,
    GradedOperator,
    TailSymbol,
    compress,
    psi_amplify,
    schur_oracle,
    tail_compare,
    toeplitz_op,
    v_n,
    w_n,
)

__all__ = [
    "EInftyContext",
    "CPAPCertificate",
    "FactorPair",
    "einfty_inner",
    "pi_i",
    "toeplitz_infty",
    "lift_defect",
    "bilateral_lift",
    "cpap_certificate",
    "compose_certificates",
]

TOOL_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# the finite-level bimodule over B = M_{n^K}(A)
# ---------------------------------------------------------------------------

@dataclass
class EInftyContext:
    """Coordinates of the extended module at tower level K.

    Vectors of the m-th tensor power are columns over B, stored as
    (n^m * n^K) x n^K matrices over A.  The right inner product lands in B;
    the left one in M_n(B), one level up the tower."""

    spec: CorrespondenceSpec
    level: int

    def __post_init__(self):
        if self.level < 0 or self.level > self.spec.max_degree:
            raise ConfigurationError("level outside the cached tower")

    @property
    def b_side(self) -> int:
        return self.spec.n ** self.level

    def embed_element(self, a) -> AMatrix:
        """A -> B along the tower."""
        return self.spec.phi_k(a, self.level)

    def embed_compact(self, t: AMatrix, i: int) -> AMatrix:
        """K(E^i) = M_{n^i}(A) -> B via T -> T (x) 1 (requires i <= K)."""
        if i > self.level:
            raise ConfigurationError("compact level exceeds the context level")
        return self.spec.amplify(t, self.level - i)

    def phi_inf1(self, b: AMatrix) -> AMatrix:
        """Left action of B on the extended module: split off the outermost
        tensor layer of b and push each entry one level up the tower."""
        n, nk = self.spec.n, self.b_side
        if (b.rows, b.cols) != (nk, nk):
            raise SpecMismatchError("expected an element of B")
        if self.level == 0:
            return self.spec.phi1(b.entry(0, 0))
        inner_side = nk // n
        out = AMatrix.zeros(self.spec.algebra, n * nk, n * nk)
        for i in range(n):
            for j in range(n):
                sub = b.submatrix(slice(i * inner_side, (i + 1) * inner_side),
                                  slice(j * inner_side, (j + 1) * inner_side))
                up = self.spec.amplify(sub, 1)
                for s in range(out.spec.n_blocks):
                    out.blocks[s][i * nk:(i + 1) * nk, j * nk:(j + 1) * nk] = up.blocks[s]
        return out

    def amplify_inf(self, x: AMatrix, k: int) -> AMatrix:
        """x (x) I on the extended module: entrywise left-action expansion."""
        if k < 0:
            raise ConfigurationError("extended-module amplification is one-sided")
        nk = self.b_side
        for _ in range(k):
            u, v = x.rows // nk, x.cols // nk
            n = self.spec.n
            out = AMatrix.zeros(self.spec.algebra, u * n * nk, v * n * nk)
            for p in range(u):
                for q in range(v):
                    sub = x.submatrix(slice(p * nk, (p + 1) * nk),
                                      slice(q * nk, (q + 1) * nk))
                    up = self.phi_inf1(sub)
                    for s in range(out.spec.n_blocks):
                        out.blocks[s][p * n * nk:(p + 1) * n * nk,
                                      q * n * nk:(q + 1) * n * nk] = up.blocks[s]
            x = out
        return x

    def vector(self, xi: AMatrix, b: AMatrix) -> AMatrix:
        """Coordinates of xi (x) b: stack phi_K(xi_i) b over the module index."""
        nk = self.b_side
        m = xi.rows
        out = AMatrix.zeros(self.spec.algebra, m * nk, nk)
        for i in range(m):
            blk = self.embed_element(xi.entry(i, 0)) @ b
            for s in range(out.spec.n_blocks):
                out.blocks[s][i * nk:(i + 1) * nk] = blk.blocks[s]
        return out

    def b_entries(self, x: AMatrix):
        """Split a column over B into its B-entries."""
        nk = self.b_side
        return [x.submatrix(slice(i * nk, (i + 1) * nk), slice(0, nk))
                for i in range(x.rows // nk)]


def einfty_inner(ctx: EInftyContext, x: AMatrix, y: AMatrix, side: str) -> AMatrix:
    """Inner products of the extended bimodule in level-K coordinates.

    right: <x, y> = sum_i x_i* y_i in B.
    left:  the matrix [x_i y_j*], an element of M_{n^m}(B)."""
    xs, ys = ctx.b_entries(x), ctx.b_entries(y)
    if len(xs) != len(ys):
        raise SpecMismatchError("vectors of different module rank")
    nk = ctx.b_side
    if side == "right":
        acc = AMatrix.zeros(ctx.spec.algebra, nk, nk)
        for a, b in zip(xs, ys):
            acc = acc + a.adjoint() @ b
        return acc
    if side == "left":
        m = len(xs)
        out = AMatrix.zeros(ctx.spec.algebra, m * nk, m * nk)
        for i in range(m):
            for j in range(m):
                blk = xs[i] @ ys[j].adjoint()
                for s in range(out.spec.n_blocks):
                    out.blocks[s][i * nk:(i + 1) * nk, j * nk:(j + 1) * nk] = blk.blocks[s]
        return out
    raise ConfigurationError(f"unknown side {side!r}")


def pi_i(spec: CorrespondenceSpec, i: int, t: AMatrix,
         window: FockWindow) -> GradedOperator:
    """Nonunital band representation of K(E^i): acts on the first i tensor
    components of every degree >= i."""
    if i > window.hi:
        raise ConfigurationError("compact level exceeds the window")
    if t.rows != spec.fiber_dim(i) or t.cols != spec.fiber_dim(i):
        raise SpecMismatchError("compact has wrong side for level i")
    out = GradedOperator(spec, window)
    cur = t
    cur_k = 0
    for j in range(i, window.hi + 1):
        if j - i > cur_k:
            cur = spec.amplify(cur, 1)
            cur_k = j - i
        out.set_block(j, j, cur)
    return out


def toeplitz_infty(ctx: EInftyContext, mu: AMatrix, b: AMatrix,
                   nu: AMatrix, c: AMatrix, window: FockWindow,
                   r: int | None = None, s: int | None = None) -> dict:
    """t_{mu (x) b} t_{nu (x) c}* on the extended Fock module, as a dict of
    graded blocks over B keyed by degree pairs (r+k, s+k)."""
    r = _col_degree(ctx.spec, mu) if r is None else r
    s = _col_degree(ctx.spec, nu) if s is None else s
    if r > window.hi or s > window.hi:
        raise ConfigurationError("generator degree exceeds window")
    xb = ctx.vector(mu, b)
    yc = ctx.vector(nu, c)
    e_inf = xb @ yc.adjoint()
    blocks = {}
    cur = e_inf
    cur_k = 0
    for k in range(0, window.hi - max(r, s) + 1):
        if k > cur_k:
            cur = ctx.amplify_inf(cur, 1)
            cur_k = k
        blocks[(r + k, s + k)] = cur
    return blocks


def eps_hat_graded(ctx: EInftyContext, blocks: dict,
                   window: FockWindow) -> GradedOperator:
    """Apply the induced expectation blockwise, landing on the base Fock window."""
    out = GradedOperator(ctx.spec, window)
    for (i, j), val in blocks.items():
        out.set_block(i, j, eps_hat(ctx.spec, ctx.level, val))
    return out


def t_mu_op(spec: CorrespondenceSpec, mu: AMatrix, r: int,
            window: FockWindow) -> GradedOperator:
    """t_mu for mu in E^r: blocks (r+k, k) = mu (x) I_{E^k}."""
    out = GradedOperator(spec, window)
    cur = mu
    cur_k = 0
    for k in window.degrees():
        if r + k > window.hi or k < 0:
            continue
        if k > cur_k:
            cur = spec.amplify(cur, 1)
            cur_k = k
        out.set_block(r + k, k, cur)
    return out


def lift_defect(ctx: EInftyContext, mu: AMatrix, nu: AMatrix,
                b0: AMatrix, c0: AMatrix, i: int, window: FockWindow,
                r: int | None = None, s: int | None = None,
                tol: Tolerances = DEFAULT_TOL):
    """Defect of the lifted generator against t_mu pi_i(b c*) t_nu*.

    b0, c0 are level-i compacts (n^i x n^i over A); they are embedded into
    B along the tower.  Returns the defect operator together with a support
    report: offsets k >= i must vanish, the compact part sits below i."""
    spec = ctx.spec
    r = _col_degree(spec, mu) if r is None else r
    s = _col_degree(spec, nu) if s is None else s
    b = ctx.embed_compact(b0, i)
    c = ctx.embed_compact(c0, i)
    lifted = eps_hat_graded(
        ctx, toeplitz_infty(ctx, mu, b, nu, c, window, r=r, s=s), window)
    band = t_mu_op(spec, mu, r, window) \
        @ pi_i(spec, i, b0 @ c0.adjoint(), window) \
        @ t_mu_op(spec, nu, s, window).adjoint()
    defect = lifted - band
    support = []
    max_dev_tail = 0.0
    for k in range(0, window.hi - max(r, s) + 1):
        dev = defect.block(r + k, s + k).max_abs()
        if k >= i:
            max_dev_tail = max(max_dev_tail, dev)
        if dev > tol.eq_tol:
            support.append(k)
    report = {
        "i": i,
        "level": ctx.level,
        "r": r,
        "s": s,
        "max_dev_at_or_above_i": float(max_dev_tail),
        "support": support,
        "pass": max_dev_tail <= tol.eq_tol and all(k < i for k in support),
    }
    return defect, report


def _col_degree(spec: CorrespondenceSpec, v: AMatrix) -> int:
    if spec.n == 1:
        raise ConfigurationError("pass degrees explicitly for n = 1")
    return spec._degree_of(v.rows)


# ---------------------------------------------------------------------------
# the bimodule lift (n = 1)
# ---------------------------------------------------------------------------

def bilateral_lift(spec: CorrespondenceSpec, mu: AMatrix, nu: AMatrix,
                   r: int, s: int, two_sided: FockWindow,
                   tol: Tolerances = DEFAULT_TOL):
    """Compression of the bilateral generator to nonnegative degrees.

    Returns (compressed operator on the one-sided window, report).  On the
    band of the one-sided generator (offsets k >= 0) the compression equals
    t_mu t_nu* on the nose; offsets -min(r,s) <= k < 0 survive as finitely
    many extra blocks (they are compact, and vanish in the quotient), which
    the report lists rather than hiding."""
    if spec.n != 1:
        raise ConfigurationError("bimodule lift requires n = 1")
    if not two_sided.two_sided:
        raise ConfigurationError("need a two-sided window")
    one_sided = FockWindow.one_sided(two_sided.hi)
    bilateral = toeplitz_op(spec, mu, nu, two_sided, r=r, s=s)
    lifted = GradedOperator(spec, one_sided)
    for (i, j), val in bilateral.blocks.items():
        if i >= 0 and j >= 0:
            lifted.set_block(i, j, val)
    target = toeplitz_op(spec, mu, nu, one_sided, r=r, s=s)
    band_dev = 0.0
    for k in range(0, one_sided.hi - max(r, s) + 1):
        band_dev = max(band_dev,
                       (lifted.block(r + k, s + k) - target.block(r + k, s + k)).max_abs())
    # extra blocks are indexed by their (negative) band offset
    extra = sorted({j - s for (i, j) in lifted.blocks
                    if i - r == j - s and j - s < 0
                    and lifted.blocks[(i, j)].max_abs() > tol.eq_tol})
    tail = TailSymbol(r, s, rank_one(mu, nu))
    tail_dev, _ = tail_compare(bilateral, tail, tol)
    report = {
        "r": r, "s": s,
        "band_dev": float(band_dev),
        "compact_offsets": extra,
        "bilateral_tail_dev": float(tail_dev),
        "pass": band_dev <= tol.eq_tol and tail_dev <= tol.eq_tol,
    }
    return lifted, report


def compression_table(spec: CorrespondenceSpec, two_sided: FockWindow,
                      name: str = "") -> LinearMapTable:
    """x -> PxP from the flattened two-sided window onto the one-sided part."""
    one_sided = FockWindow.one_sided(two_sided.hi)
    total_two = sum(spec.fiber_dim(d) for d in two_sided.degrees())
    total_one = sum(spec.fiber_dim(d) for d in one_sided.degrees())

    def fn(mat: AMatrix) -> AMatrix:
        g = GradedOperator.from_amatrix(spec, two_sided, mat)
        out = GradedOperator(spec, one_sided)
        for (i, j), val in g.blocks.items():
            if i >= 0 and j >= 0:
                out.set_block(i, j, val)
        return out.to_amatrix()

    return LinearMapTable.from_amatrix_map(spec.algebra, total_two,
                                           spec.algebra, total_one, fn,
                                           name=name or "bilateral-compression")


# ---------------------------------------------------------------------------
# CPAP certificates
# ---------------------------------------------------------------------------

@dataclass
class FactorPair:
    """A factorization (phi: X -> C, psi: C -> X) with CP witnesses."""
    phi: LinearMapTable
    psi: LinearMapTable
    phi_cp: CPReport | None = None
    psi_cp: CPReport | None = None
    errors: list = field(default_factory=list)   # per-generator errors


@dataclass
class GeneratorRecord:
    r: int
    s: int
    seed: int
    coeff_expected: Fraction
    coeff_measured: float
    error: float
    norm: float

    def to_dict(self):
        return {
            "r": self.r, "s": self.s, "seed": self.seed,
            "coeff_expected": [self.coeff_expected.numerator,
                               self.coeff_expected.denominator],
            "coeff_measured": self.coeff_measured,
            "error": self.error,
            "generator_norm": self.norm,
        }


@dataclass
class CPAPCertificate:
    spec_fingerprint: dict
    N: int
    D: int
    flatten_dim: int
    generators: list
    factor_maps: list
    tolerances: Tolerances
    seed: int
    created: str
    tool_version: str = TOOL_VERSION

    def to_dict(self):
        return {
            "spec": self.spec_fingerprint,
            "N": self.N,
            "D": self.D,
            "flatten_dim": self.flatten_dim,
            "generators": [g.to_dict() for g in self.generators],
            "factor_maps": self.factor_maps,
            "tolerances": {
                "eq_tol": self.tolerances.eq_tol,
                "psd_tol": self.tolerances.psd_tol,
                "norm_rel_tol": self.tolerances.norm_rel_tol,
            },
            "seed": self.seed,
            "created": self.created,
            "tool_version": self.tool_version,
        }


def factor_tables(spec: CorrespondenceSpec, window: FockWindow, big_n: int):
    """The two factor maps of the pipeline: compress into the window algebra
    of [0, N] (a matrix algebra over A) and amplify back."""
    degs = list(window.degrees())
    total = sum(spec.fiber_dim(d) for d in degs)
    inner_window = FockWindow.one_sided(big_n)
    d_total = sum(spec.fiber_dim(d) for d in inner_window.degrees())

    def down(mat: AMatrix) -> AMatrix:
        g = GradedOperator.from_amatrix(spec, window, mat)
        c = compress(g, big_n)
        out = GradedOperator(spec, inner_window)
        for (i, j), val in c.blocks.items():
            out.set_block(i, j, val)
        return out.to_amatrix()

    def up(mat: AMatrix) -> AMatrix:
        g_small = GradedOperator.from_amatrix(spec, inner_window, mat)
        g = GradedOperator(spec, window)
        for (i, j), val in g_small.blocks.items():
            g.set_block(i, j, val)
        return psi_amplify(g, big_n).to_amatrix()

    phi = LinearMapTable.from_amatrix_map(spec.algebra, total, spec.algebra,
                                          d_total, down, name=f"compress(N={big_n})")
    psi = LinearMapTable.from_amatrix_map(spec.algebra, d_total, spec.algebra,
                                          total, up, name=f"amplify(N={big_n})")
    return phi, psi, d_total


def generator_band(spec: CorrespondenceSpec, r: int, s: int) -> int:
    """The band parameter governing the Fejer error rate."""
    return abs(r - s) if spec.n == 1 else max(r, s)


def cpap_certificate(spec: CorrespondenceSpec, big_n: int, generators,
                     window: FockWindow, seed: int, created: str = "",
                     choi_cap: int = 4096, probe_trials: int = 50,
                     tol: Tolerances | None = None) -> CPAPCertificate:
    """Build and certify the degree-N approximation of the quotient map.

    ``generators`` is a list of (r, s) degree pairs; seeded unit-norm vectors
    are drawn per pair.  The bimodule case measures || W_N(g) - g || directly;
    the general case measures the tail deviation from the oracle symbol."""
    tol = tol or spec.tol
    if big_n > window.hi:
        raise ConfigurationError("window too small for requested N")
    phi, psi, d_total = factor_tables(spec, window, big_n)
    phi_cp = cp_check_auto(phi, tol, choi_cap=choi_cap, probe_trials=probe_trials,
                           seed=seed + 1)
    psi_cp = cp_check_auto(psi, tol, choi_cap=choi_cap, probe_trials=probe_trials,
                           seed=seed + 2)
    gen_records = []
    for idx, (r, s) in enumerate(generators):
        gseed = seed + 100 * idx
        mu = spec.sample_vector(r, gseed)
        nu = spec.sample_vector(s, gseed + 1)
        e = rank_one(mu, nu)
        gnorm = e.norm(tol)
        band = generator_band(spec, r, s)
        if spec.n == 1:
            out, rows = w_n(spec, mu, nu, big_n, window, r=r, s=s, tol=tol)
            target = toeplitz_op(spec, mu, nu, window, r=r, s=s)
            err = (out - target).norm(tol)
            coeff = rows[0].measured if rows else 0.0
            expected = schur_oracle(big_n, r, s, 0, "two")
        else:
            _, rows = v_n(spec, mu, nu, big_n, window, r=r, s=s, tol=tol)
            stab = max(0, big_n - max(r, s))
            tail_rows = [row for row in rows if row.l >= stab]
            coeff = tail_rows[0].measured if tail_rows else 0.0
            expected = schur_oracle(big_n, r, s, big_n, "one")
            err = abs(coeff - 1.0) * gnorm
        bound = band / (big_n + 1) * gnorm + tol.eq_tol
        if err > bound + 1e-12 and band <= big_n + 1:
            raise ValueError(
                f"generator ({r},{s}): error {err:.3e} exceeds the Fejer "
                f"bound {bound:.3e}")
        gen_records.append(GeneratorRecord(r, s, gseed, expected,
                                           float(coeff), float(err), float(gnorm)))
    fingerprint = {
        "preset": spec.name,
        "block_dims": list(spec.algebra.block_dims),
        "n": spec.n,
        "window": [window.lo, window.hi],
    }
    total = sum(spec.fiber_dim(d) for d in window.degrees())
    return CPAPCertificate(
        spec_fingerprint=fingerprint,
        N=big_n,
        D=d_total,
        flatten_dim=d_total * spec.algebra.total_dim,
        generators=gen_records,
        factor_maps=[
            {"direction": "compress", "cp": phi_cp.to_dict(), "norm": phi_cp.norm_bound},
            {"direction": "amplify", "cp": psi_cp.to_dict(), "norm": psi_cp.norm_bound},
        ],
        tolerances=tol,
        seed=seed,
        created=created,
    )


def compose_certificates(outer: FactorPair, inner: FactorPair, seed: int = 0,
                         trials: int = 5, tol: Tolerances = DEFAULT_TOL,
                         choi_cap: int = 4096):
    """Chain two factorizations (psi o psi', phi' o phi) and re-certify.

    The inner pair must factor the outer pair's intermediate algebra.
    Returns the composed pair and a report with measured round-trip errors
    and the triangle-inequality bound."""
    if inner.phi.domain_sides != outer.phi.codomain_sides:
        raise SpecMismatchError("factorization chain mismatch")
    phi_c = inner.phi.compose(outer.phi)
    psi_c = outer.psi.compose(inner.psi)
    composed = FactorPair(phi_c, psi_c)
    composed.phi_cp = cp_check_auto(phi_c, tol, choi_cap=choi_cap, seed=seed + 1)
    composed.psi_cp = cp_check_auto(psi_c, tol, choi_cap=choi_cap, seed=seed + 2)

    def round_trip(pair: FactorPair, x):
        return pair.psi.apply_flat(pair.phi.apply_flat(x))

    rows = []
    for t in range(trials):
        rng = np.random.default_rng(seed + 10 + t)
        x = _random_block_diag(outer.phi.domain_sides, rng)
        e_outer = np.linalg.norm(round_trip(outer, x) - x, 2)
        y = outer.phi.apply_flat(x)
        e_inner = np.linalg.norm(
            outer.psi.apply_flat(round_trip(inner, y)) - outer.psi.apply_flat(y), 2)
        e_comp = np.linalg.norm(round_trip(composed, x) - x, 2)
        rows.append({"outer": float(e_outer), "inner_carried": float(e_inner),
                     "composed": float(e_comp),
                     "bound_ok": bool(e_comp <= e_outer + e_inner + tol.eq_tol)})
    report = {
        "trials": rows,
        "phi_cp": composed.phi_cp.to_dict(),
        "psi_cp": composed.psi_cp.to_dict(),
        "pass": all(r["bound_ok"] for r in rows)
        and composed.phi_cp.passed and composed.psi_cp.passed,
    }
    return composed, report


def _random_block_diag(sides, rng) -> np.ndarray:
    n = sum(sides)
    out = np.zeros((n, n), dtype=complex)
    off = 0
    for m in sides:
        z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        out[off:off + m, off:off + m] = z / np.sqrt(2 * m)
        off += m
    return out
