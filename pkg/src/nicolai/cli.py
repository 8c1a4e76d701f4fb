"""Command-line driver.

Every command writes ``<command>.csv`` and ``<command>.json`` to the output
directory (``--out``, else ``$NICOLAI_OUT``, else ``./nicolai-out``).  The CSV
holds only deterministic values; timestamps and wall times go in the JSON.

Exit codes:
  0  every check passed
  1  at least one check failed
  2  bad command line or config file
  3  algebra/model error (bad region parity, zero coupling, ...)
  4  numerical error (window too large, solver or power iteration failure)
  5  output error (empty plot data, unwritable directory)
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import errors
from .algebra import CarMonomial, CarPolynomial, adjoint, grade, multiply, to_text
from .fock import DEFAULT_MAX_SITES
from .model import (
    SuperchargeSpec,
    as_coupling,
    delta,
    hamiltonian_derivation,
    local_hamiltonian,
    susy_laplacian,
    witness_operator,
)
from .region import Boundary
from .spectra import (
    CSV_FIELDS,
    DensityCurve,
    NormRow,
    averaged_witness_norms,
    bound_row,
    density_rows,
    energy_density_curve,
    ground_state,
    spectrum_row,
    susy_bound_check,
    susy_pairing_defect,
    witness_norm,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MODEL, EXIT_NUMERIC, EXIT_OUTPUT = range(6)

COMMANDS = ("verify-nilpotent", "verify-witness", "verify-susy-relation", "spectrum",
            "density-scan", "norm-scan", "bound-check")

# config keys and their defaults; flags of the same name override the file
DEFAULTS = {
    "g": "1",
    "M": "2,4,6,8",
    "N": "2,4,6,8",
    "boundary": "periodic",
    "k": "0..3",
    "n": "1..3",
    "sizes": "4,6,8,10",
    "width": "6",
    "out": None,
    "seed": "0",
    "max_sites": str(DEFAULT_MAX_SITES),
    "norm_method": "auto",
}


# -- parsing -----------------------------------------------------------------

def parse_int_list(text: str) -> list[int]:
    """``"1..5"`` (inclusive), ``"2,4,8"`` or a mix such as ``"0..2,7"``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise errors.ConfigParse(f"empty integer list {text!r}")
    return out


def parse_couplings(text: str) -> list:
    try:
        return [as_coupling(part) for part in str(text).split(",") if part.strip()]
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise errors.ConfigParse(f"cannot parse coupling list {text!r}: {exc}") from None


def parse_boundaries(text: str) -> list[Boundary]:
    text = str(text).strip().lower()
    if text == "both":
        return [Boundary.PERIODIC, Boundary.FREE]
    try:
        return [Boundary(text)]
    except ValueError:
        raise errors.ConfigParse(f"boundary must be periodic, free or both, not {text!r}") from None


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Unknown keys are rejected."""
    cfg: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise errors.ConfigParse(f"{path}:{lineno}: expected key = value")
            if key == "command":
                cfg[key] = value.strip()
                continue
            if key not in DEFAULTS:
                raise errors.ConfigParse(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = value.strip()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nicolai",
        description="Exact checks and spectra for the Nicolai chain with linear coupling g.",
        epilog=__doc__.split("\n\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="suite to run (may also come from the config file)")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--g", help="coupling list, e.g. 1 or 0,1/2,-1")
    parser.add_argument("--M", help="left extents (even), e.g. 2,4")
    parser.add_argument("--N", help="right extents (even), e.g. 2..8")
    parser.add_argument("--boundary", help="periodic, free or both")
    parser.add_argument("--k", help="witness indices, e.g. 0..3")
    parser.add_argument("--n", help="averaging lengths, e.g. 1..5")
    parser.add_argument("--sizes", help="chain sizes L = M + N, e.g. 4,6,8")
    parser.add_argument("--width", help="maximal monomial support width for verify-susy-relation")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", help="seed for iterative solvers")
    parser.add_argument("--max-sites", dest="max_sites", help="Fock window cap")
    parser.add_argument("--norm-method", dest="norm_method", help="auto, dense_svd, iterative or sector_blocks")
    return parser


def resolve_config(argv=None) -> dict[str, str]:
    args = build_parser().parse_args(argv)
    cfg = dict(DEFAULTS)
    command = None
    if args.config:
        try:
            file_cfg = read_config(args.config)
        except OSError as exc:
            raise errors.ConfigParse(f"cannot read config: {exc}") from None
        command = file_cfg.pop("command", None)
        cfg.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command or command
    if cfg["command"] not in COMMANDS:
        raise errors.ConfigParse(f"no valid command given (choose from {', '.join(COMMANDS)})")
    return cfg


# -- commands ----------------------------------------------------------------

def _norm_method(cfg):
    return None if cfg["norm_method"] == "auto" else cfg["norm_method"]


def cmd_verify_nilpotent(cfg) -> tuple[list[dict], list[str]]:
    rows = []
    for g, M, N, bc in itertools.product(parse_couplings(cfg["g"]), parse_int_list(cfg["M"]),
                                         parse_int_list(cfg["N"]), parse_boundaries(cfg["boundary"])):
        spec = SuperchargeSpec.periodic(g, M, N) if bc is Boundary.PERIODIC else SuperchargeSpec.free(g, M, N)
        Q = spec.build()
        Qd = adjoint(Q)
        rows.append({"g": g, "M": M, "N": N, "boundary": bc.value, "exact": Q.exact,
                     "Q_squared_zero": multiply(Q, Q).is_zero(),
                     "Qdag_squared_zero": multiply(Qd, Qd).is_zero(),
                     "Q_odd": grade(Q) == 1,
                     "H_even": grade(local_hamiltonian(Q)) == 0})
    return rows, ["Q_squared_zero", "Qdag_squared_zero", "Q_odd", "H_even"]


def cmd_verify_witness(cfg):
    rows = []
    for g, k in itertools.product(parse_couplings(cfg["g"]), parse_int_list(cfg["k"])):
        O = witness_operator(g, k)
        results = {
            "periodic": delta(g, O, prune=False),
            "free": delta(g, O, boundary=Boundary.FREE, prune=False),
            "periodic+2": delta(g, O, extra=2, prune=False),
            "periodic+4": delta(g, O, extra=4, prune=False),
        }
        target = CarPolynomial.scalar(g)
        rows.append({"g": g, "k": k, "exact": O.exact,
                     "delta_O_equals_g": results["periodic"] == target,
                     "region_independent": all(r == results["periodic"] for r in results.values()),
                     "delta_O": to_text(results["periodic"])})
    return rows, ["delta_O_equals_g", "region_independent"]


def _monomials_in(sites):
    for states in itertools.product(range(4), repeat=len(sites)):
        cre = tuple(s for s, st in zip(sites, states) if st & 1)
        ann = tuple(s for s, st in zip(sites, states) if st & 2)
        yield CarPolynomial({CarMonomial(cre, ann): 1})


def cmd_verify_susy_relation(cfg):
    width = int(cfg["width"])
    rows = []
    for g in parse_couplings(cfg["g"]):
        checked = failed = 0
        for start in (0, 1):
            for A in _monomials_in(range(start, start + width)):
                checked += 1
                if susy_laplacian(g, A) != hamiltonian_derivation(g, A):
                    failed += 1
        rows.append({"g": g, "width": width, "monomials": checked, "mismatches": failed,
                     "exact": True, "susy_relation": failed == 0})
    return rows, ["susy_relation"]


def cmd_spectrum(cfg):
    rows = []
    seed, cap = int(cfg["seed"]), int(cfg["max_sites"])
    for g, M, N, bc in itertools.product(parse_couplings(cfg["g"]), parse_int_list(cfg["M"]),
                                         parse_int_list(cfg["N"]), parse_boundaries(cfg["boundary"])):
        spec = SuperchargeSpec.periodic(g, M, N) if bc is Boundary.PERIODIC else SuperchargeSpec.free(g, M, N)
        res = ground_state(g, spec.region, seed=seed, max_sites=cap)
        row = spectrum_row(res, M + N)
        row["positivity"] = res.ground_energy >= -1e-10
        row["zero_mode_criterion"] = res.zero_mode == (res.q_norm <= 1e-5 and res.qdag_norm <= 1e-5)
        if res.degeneracy_complete and all(len(v) == math.comb(res.region.size, n)
                                           for n, v in res.sector_spectra.items()):
            row["susy_pairing"] = susy_pairing_defect(res.sector_spectra) <= 1e-8
        rows.append(row)
    return rows, ["positivity", "zero_mode_criterion", "susy_pairing"]


def cmd_density_scan(cfg):
    rows, curves = [], []
    seed, cap = int(cfg["seed"]), int(cfg["max_sites"])
    for g, bc in itertools.product(parse_couplings(cfg["g"]), parse_boundaries(cfg["boundary"])):
        curve = energy_density_curve(g, parse_int_list(cfg["sizes"]), bc, seed=seed, max_sites=cap)
        curves.append((g, bc, curve))
        for row in density_rows(curve):
            row["positivity"] = row["e"] >= -1e-10
            row["breaking"] = row["e"] > 1e-6 if g != 0 else abs(row["E0"]) <= 1e-10
            rows.append(row)
    return rows, ["positivity", "breaking"], curves


def cmd_norm_scan(cfg):
    rows, tables = [], []
    for g in parse_couplings(cfg["g"]):
        o1 = witness_norm(g, 1)
        table = averaged_witness_norms(g, parse_int_list(cfg["n"]), math.sqrt(10.0) * o1, _norm_method(cfg))
        tables.append((g, table))
        for r in table:
            rows.append({"g": g, "n": r.n, "O1_norm": o1, "o_norm": r.norm, "sqrt_n_o_norm": r.sqrt_n_norm,
                         "bound": r.bound, "slack": r.slack, "method": r.method, "exact": False,
                         "norm_bound": r.slack >= 1e-10, "converged": r.converged})
    return rows, ["norm_bound", "converged"], tables


def cmd_bound_check(cfg):
    rows = []
    seed, cap = int(cfg["seed"]), int(cfg["max_sites"])
    for g, n in itertools.product(parse_couplings(cfg["g"]), parse_int_list(cfg["n"])):
        rep = susy_bound_check(g, n, seed=seed, max_sites=cap, norm_method=_norm_method(cfg))
        row = bound_row(rep)
        row.update({"n": n, "chain_slack": rep.chain_slack, "energy_bound": rep.energy_bound,
                    "identity_error": rep.identity_error, "exact": False})
        row.update(rep.checks)
        rows.append(row)
    return rows, list(rep.checks) if rows else []


# -- output ------------------------------------------------------------------

def emit_plot_data(data, path) -> Path:
    """Whitespace-delimited columns for external plotting.

    A :class:`DensityCurve` gives ``(L, e)``; a list of :class:`NormRow` gives
    ``(n, ||o(n)||, sqrt(n) ||o(n)||)``.
    """
    if isinstance(data, DensityCurve):
        header = "# L e"
        lines = [f"{r.L} {r.e!r}" for r in data.rows]
    else:
        rows = list(data or [])
        if rows and not all(isinstance(r, NormRow) for r in rows):
            raise TypeError("expected a DensityCurve or NormRow list")
        header = "# n norm sqrt_n_norm"
        lines = [f"{r.n} {r.norm!r} {r.sqrt_n_norm!r}" for r in rows]
    if not lines:
        raise errors.EmptyInput("nothing to write")
    path = Path(path)
    path.write_text("\n".join([header, *lines]) + "\n")
    return path


def _csv_text(rows: list[dict]) -> str:
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    ordered = [f for f in CSV_FIELDS if f in fields] + [f for f in fields if f not in CSV_FIELDS]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=ordered, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else ("" if v is None else str(v)))
                         for k, v in row.items()})
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    if isinstance(x, np.generic):
        return x.item()
    return str(x)


def run(cfg: dict) -> int:
    command = cfg["command"]
    started = time.perf_counter()
    handler = {
        "verify-nilpotent": cmd_verify_nilpotent,
        "verify-witness": cmd_verify_witness,
        "verify-susy-relation": cmd_verify_susy_relation,
        "spectrum": cmd_spectrum,
        "density-scan": cmd_density_scan,
        "norm-scan": cmd_norm_scan,
        "bound-check": cmd_bound_check,
    }[command]
    result = handler(cfg)
    rows, flags = result[0], result[1]
    wall = time.perf_counter() - started

    out_dir = Path(cfg["out"] or os.environ.get("NICOLAI_OUT") or "nicolai-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = command
    (out_dir / f"{stem}.csv").write_text(_csv_text(rows))
    if command == "density-scan":
        for g, bc, curve in result[2]:
            emit_plot_data(curve, out_dir / f"{stem}_g{str(g).replace('/', '_')}_{bc.value}.dat")
    elif command == "norm-scan":
        for g, table in result[2]:
            emit_plot_data(table, out_dir / f"{stem}_g{str(g).replace('/', '_')}.dat")

    checks = {f: all(r[f] for r in rows if f in r) for f in flags}
    passed = all(checks.values())
    meta = {
        "command": command,
        "config": {k: v for k, v in cfg.items()},
        "checks": checks,
        "passed": passed,
        "records": rows,
        "wall_time_s": wall,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": int(cfg["seed"]),
        "tolerances": {"positivity": 1e-10, "residual": 1e-8, "degeneracy_rel": 1e-8, "power_iteration": 1e-10,
                       "float_zero": 1e-14},
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(_jsonable(meta), indent=2) + "\n")
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {command}: {name}")
    print(f"wrote {out_dir / (stem + '.csv')}")
    return EXIT_OK if passed else EXIT_FAIL


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except errors.ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return run(cfg)
    except errors.ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (errors.WindowTooLarge, errors.SolverNoConvergence, errors.IterationDivergence,
            errors.NotNumberConserving) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (errors.EmptyInput, OSError) as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (errors.NicolaiError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
