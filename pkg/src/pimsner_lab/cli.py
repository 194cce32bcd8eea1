"""Batch front end: verification suites, convergence tables, certificates.

Commands
--------
validate     correspondence axioms for a preset or config
schur        finite-section Schur coefficients vs the counting oracle
lift-check   bimodule-lift and defect-vanishing suites
expectation  conditional-expectation tower axioms per level
certificate  CPAP certificates over an N range
report       all of the above in one bundle

Exit codes: 0 all suites pass, 1 any violation, 2 configuration error.
Output is byte-stable for a fixed (config, seed, tool version): floats are
printed with 17 significant digits, rationals as integer num/den pairs, and
runtime statistics are kept out of the serialized payload.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

from .star_core import ConfigurationError
from .correspondence import CorrespondenceSpec, ValidationError
from .fock import FockWindow, SchurRow, v_n, w_n
from .expectation import _sample_matrix, verify_cond_exp
from .lift import (
    EInftyContext,
    TOOL_VERSION,
    bilateral_lift,
    cpap_certificate,
    lift_defect,
)
from .presets import load_spec

__all__ = ["RunConfig", "ReportBundle", "run", "serialize", "main"]

CSV_HEADER = ["N", "r", "s", "l", "expected_num", "expected_den",
              "measured", "abs_err", "sided"]
COMMANDS = ("validate", "schur", "lift-check", "expectation",
            "certificate", "report")


@dataclass
class RunConfig:
    spec: CorrespondenceSpec
    n_values: tuple[int, ...] = (2, 3, 4, 5)
    window_m: int | None = None        # window size; default derived from N
    band: int = 3                      # generator degree bound
    seed: int = 0
    out: str | None = None
    fmt: str = "json"
    choi_cap: int = 4096

    def window_for(self, big_n: int) -> FockWindow:
        hi = self.window_m if self.window_m is not None else big_n + 2
        if hi < big_n:
            raise ConfigurationError(
                f"window_m={hi} too small for N={big_n}")
        if hi > self.spec.max_degree:
            raise ConfigurationError(
                f"window_m={hi} exceeds max_degree={self.spec.max_degree}")
        if self.spec.n == 1:
            return FockWindow.two_sided_sym(hi)
        return FockWindow.one_sided(hi)


@dataclass
class ReportBundle:
    command: str
    spec_info: dict
    seed: int
    suites: dict = field(default_factory=dict)      # name -> report dict
    schur_rows: list = field(default_factory=list)  # SchurRow
    certificates: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)     # not serialized
    created: str = ""

    @property
    def passed(self) -> bool:
        return all(s.get("pass", False) for s in self.suites.values())

    def to_dict(self) -> dict:
        return {
            "tool_version": TOOL_VERSION,
            "created": self.created,
            "command": self.command,
            "spec": self.spec_info,
            "seed": self.seed,
            "pass": self.passed,
            "suites": self.suites,
            "schur_table": [_row_dict(r) for r in self.schur_rows],
            "certificates": [c.to_dict() for c in self.certificates],
        }


def _row_dict(row: SchurRow) -> dict:
    return {
        "N": row.N, "r": row.r, "s": row.s, "l": row.l,
        "expected": [row.expected.numerator, row.expected.denominator],
        "measured": row.measured, "abs_err": row.abs_err, "sided": row.sided,
    }


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def suite_validate(cfg: RunConfig) -> dict:
    return cfg.spec.validate(seed=cfg.seed + 11)


def suite_schur(cfg: RunConfig):
    """V_N/W_N tables against the counting oracle over the (N, r, s) grid."""
    spec = cfg.spec
    rows = []
    worst = 0.0
    for big_n in cfg.n_values:
        window = cfg.window_for(big_n)
        for r in range(cfg.band + 1):
            for s in range(cfg.band + 1):
                if max(r, s) > window.hi:
                    continue
                gseed = cfg.seed + 7001 * r + 31 * s + 1
                mu = spec.sample_vector(r, gseed)
                nu = spec.sample_vector(s, gseed + 1)
                if spec.n == 1:
                    _, got = w_n(spec, mu, nu, big_n, window, r=r, s=s)
                else:
                    _, got = v_n(spec, mu, nu, big_n, window, r=r, s=s)
                rows.extend(got)
                worst = max(worst, max(g.abs_err for g in got))
    report = {
        "rows": len(rows),
        "max_abs_err": worst,
        "pass": worst <= spec.tol.eq_tol,
    }
    return report, rows


def suite_lift_check(cfg: RunConfig) -> dict:
    """Defect vanishing on the extended module; bimodule lift when n = 1."""
    spec = cfg.spec
    window = FockWindow.one_sided(min(5, spec.max_degree))
    defects = []
    degree_pairs = [(1, 0), (1, 1), (2, 1)]
    for level in (1, 2):
        for i in (1, min(2, level)):
            if i > level or level > spec.max_degree:
                continue
            ctx = EInftyContext(spec, level)
            for idx, (r, s) in enumerate(degree_pairs):
                gseed = cfg.seed + 53 * level + 17 * i + idx
                mu = spec.sample_vector(r, gseed)
                nu = spec.sample_vector(s, gseed + 1)
                side = spec.fiber_dim(i) if spec.n > 1 else 1
                b0 = _sample_matrix(spec, side, gseed + 2)
                c0 = _sample_matrix(spec, side, gseed + 3)
                _, rep = lift_defect(ctx, mu, nu, b0, c0, i, window, r=r, s=s)
                defects.append(rep)
    out = {
        "defect": {
            "cases": defects,
            "pass": all(d["pass"] for d in defects),
        },
    }
    if spec.n == 1:
        two = FockWindow.two_sided_sym(min(8, spec.max_degree))
        lifts = []
        for r in range(cfg.band + 1):
            for s in range(cfg.band + 1):
                gseed = cfg.seed + 101 * r + 13 * s
                mu = spec.sample_vector(r, gseed)
                nu = spec.sample_vector(s, gseed + 1)
                _, rep = bilateral_lift(spec, mu, nu, r, s, two)
                lifts.append(rep)
        out["bimodule_lift"] = {
            "cases": lifts,
            "pass": all(l["pass"] for l in lifts),
        }
    out["pass"] = all(v["pass"] for k, v in out.items() if k != "pass")
    return out


def suite_expectation(cfg: RunConfig, k_max: int = 3) -> dict:
    levels = {}
    for k in range(1, min(k_max, cfg.spec.max_degree) + 1):
        levels[str(k)] = verify_cond_exp(cfg.spec, k, seed=cfg.seed + 23,
                                         choi_cap=cfg.choi_cap)
    return {"levels": levels,
            "pass": all(v["pass"] for v in levels.values())}


def suite_certificate(cfg: RunConfig, created: str):
    certs = []
    gens = [(r, s) for r in range(min(cfg.band, 2) + 1)
            for s in range(min(cfg.band, 2) + 1)][:6]
    ok = True
    for big_n in cfg.n_values:
        window = cfg.window_for(big_n)
        cert = cpap_certificate(cfg.spec, big_n, gens, window,
                                seed=cfg.seed, created=created,
                                choi_cap=cfg.choi_cap)
        certs.append(cert)
        for fm in cert.factor_maps:
            ok = ok and fm["cp"]["pass"]
    report = {"count": len(certs), "pass": ok}
    return report, certs


# ---------------------------------------------------------------------------
# runner and serialization
# ---------------------------------------------------------------------------

def run(command: str, cfg: RunConfig, created: str | None = None) -> ReportBundle:
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")
    created = created or datetime.now(timezone.utc).date().isoformat()
    bundle = ReportBundle(
        command=command,
        spec_info={
            "preset": cfg.spec.name,
            "block_dims": list(cfg.spec.algebra.block_dims),
            "n": cfg.spec.n,
            "max_degree": cfg.spec.max_degree,
            "tool_version": TOOL_VERSION,
        },
        seed=cfg.seed,
        created=created,
    )
    t0 = time.monotonic()
    if command in ("validate", "report"):
        bundle.suites["validate"] = suite_validate(cfg)
        if not bundle.suites["validate"]["pass"]:
            # nothing downstream is meaningful over a broken correspondence
            bundle.runtime["seconds"] = time.monotonic() - t0
            return bundle
    if command in ("schur", "report"):
        rep, rows = suite_schur(cfg)
        bundle.suites["schur"] = rep
        bundle.schur_rows = rows
    if command in ("lift-check", "report"):
        bundle.suites["lift_check"] = suite_lift_check(cfg)
    if command in ("expectation", "report"):
        bundle.suites["expectation"] = suite_expectation(cfg)
    if command in ("certificate", "report"):
        rep, certs = suite_certificate(cfg, created)
        bundle.suites["certificate"] = rep
        bundle.certificates = certs
    bundle.runtime["seconds"] = time.monotonic() - t0
    return bundle


def _emit_json(obj, out: io.TextIOBase, indent: int = 0):
    """Deterministic JSON with floats at 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        items = list(obj.items())
        for idx, (k, v) in enumerate(items):
            out.write(f'{pad}  "{k}": ')
            _emit_json(v, out, indent + 1)
            out.write(",\n" if idx < len(items) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.write("[]")
            return
        out.write("[\n")
        for idx, v in enumerate(obj):
            out.write(pad + "  ")
            _emit_json(v, out, indent + 1)
            out.write(",\n" if idx < len(obj) - 1 else "\n")
        out.write(pad + "]")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, int):
        out.write(str(obj))
    elif isinstance(obj, float):
        out.write(format(obj, ".17g"))
    elif isinstance(obj, Fraction):
        _emit_json([obj.numerator, obj.denominator], out, indent)
    elif obj is None:
        out.write("null")
    else:
        # escape via the repr rules of JSON strings
        import json
        out.write(json.dumps(str(obj)))


def serialize(bundle: ReportBundle, fmt: str, path: str | None):
    if fmt == "json":
        buf = io.StringIO()
        _emit_json(bundle.to_dict(), buf)
        buf.write("\n")
        text = buf.getvalue()
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in bundle.schur_rows:
            writer.writerow(row.csv_fields())
        text = buf.getvalue()
    else:
        raise ConfigurationError(f"unknown format {fmt!r}")
    if path:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigurationError(f"cannot write {path}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return text


def _parse_n_range(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            a, b = text.split("..")
            lo, hi = int(a), int(b)
            if lo > hi:
                raise ValueError("empty range")
            return tuple(range(lo, hi + 1))
        return (int(text),)
    except ValueError as exc:
        raise ConfigurationError(f"bad --N value {text!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pimsner-lab",
        description="Finite-section laboratory for Pimsner-algebra "
                    "approximation certificates.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--preset", help="built-in correspondence name")
    p.add_argument("--config", help="JSON correspondence config file")
    p.add_argument("--N", default="2..5", help="truncation range a..b or a")
    p.add_argument("--M", type=int, default=None, help="Fock window size")
    p.add_argument("--band", type=int, default=3, help="generator degree bound")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", dest="fmt", choices=("json", "csv"),
                   default=None)
    p.add_argument("--choi-cap", type=int, default=4096)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        spec = load_spec(args.preset, args.config)
        spec.validate_or_raise(seed=11)
        cfg = RunConfig(
            spec=spec,
            n_values=_parse_n_range(args.N),
            window_m=args.M,
            band=args.band,
            seed=args.seed,
            out=args.out,
            fmt=args.fmt or ("csv" if args.command == "schur" else "json"),
            choi_cap=args.choi_cap,
        )
        bundle = run(args.command, cfg)
        serialize(bundle, cfg.fmt, cfg.out)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 1
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
