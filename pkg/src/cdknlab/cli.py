"""Batch front end: build spaces, verify CD, measure distances, run
convergence and omega experiments, and emit deterministic reports.

Exit codes: 0 = computation ran and every mathematical claim checked out,
2 = a violation was found (negative margin beyond tolerance, broken
monotonicity), 1 = usage or IO problem.  Reports are written atomically and
depend only on the config and seed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2


def _limit_threads():
    """CDKNLAB_THREADS caps the worker pools of the numeric backends."""
    n = os.environ.get("CDKNLAB_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "HIGHS_NUM_THREADS"):
            os.environ.setdefault(var, n)


_limit_threads()

from . import cdcheck as cdc  # noqa: E402
from .ikrw import convergence_experiment, ikrw_fm  # noqa: E402
from .errors import CdknLabError  # noqa: E402
from .mmspace import detect_singular_set, space_from_dict, space_summary  # noqa: E402


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    out: Optional[str] = None
    format: str = "csv"
    seed: Optional[int] = None


# ---------------------------------------------------------------------------
# Deterministic serialization


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def _render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _render_json(obj) -> str:
    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
            return _fmt(x)
        return x

    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".cdknlab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_report(out: str, fmt: str, header, rows, summary: dict):
    """Tabular report plus a JSON summary sidecar next to it."""
    if fmt == "json":
        _atomic_write(out, _render_json({"rows": [dict(zip(header, r)) for r in rows],
                                         "summary": summary}))
    else:
        _atomic_write(out, _render_csv(header, rows))
        _atomic_write(out + ".summary.json", _render_json(summary))


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}")


def _load_space(path: str):
    try:
        return space_from_dict(_read_json(path))
    except CdknLabError as e:
        raise UsageError(f"bad space descriptor {path}: {e}")


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_model(args) -> int:
    space = _load_space(args.space)
    summary = space_summary(space)
    if args.detect_singular:
        summary["detected_singular_points"] = list(detect_singular_set(space))
    text = _render_json(summary)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_cdcheck(args) -> int:
    space = _load_space(args.space)
    suite = cdc.cd_suite(space, args.K, args.N, args.samples, args.seed,
                         t_grid=args.t_grid, nprime_grid=args.nprime_grid,
                         tol=args.tol, restrict_to_regular_k=args.restrict_k)
    header = ["sample", "t", "nprime", "s_value", "t_value", "margin", "status"]
    rows = []
    for si, rep in enumerate(suite.reports):
        for r in rep.rows:
            rows.append([si, r.t, r.nprime, r.s_value, r.t_value, r.margin, r.status])
    passed = suite.passes()
    summary = {
        "K": args.K, "N": args.N, "grid_n": suite.grid_n,
        "tolerance": args.tol, "seed": args.seed, "samples": args.samples,
        "min_margin": _fmt(suite.min_margin()), "counts": suite.counts(),
        "passed": passed,
    }
    _write_report(args.out, args.format, header, rows, summary)
    return EXIT_OK if passed else EXIT_VIOLATION


def _cmd_convexity(args) -> int:
    d = _read_json(args.psi)
    try:
        x = [float(v) for v in d["x"]]
        psi = [float(v) for v in d["psi"]]
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"bad psi file: {e}")
    rep = cdc.kn_convexity_check((x, psi), args.K, args.N,
                                 n_triples=args.triples, seed=args.seed)
    passed = rep.min_margin >= -args.tol
    summary = {"K": args.K, "N": args.N, "n_triples": rep.n_triples,
               "min_margin": _fmt(rep.min_margin),
               "worst_triple": list(rep.worst) if rep.worst else None,
               "tolerance": args.tol, "seed": args.seed, "passed": passed}
    text = _render_json(summary)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_VIOLATION


def _cmd_ikrw(args) -> int:
    a = _load_space(args.space_a)
    b = _load_space(args.space_b)
    from .mmspace import k_cut
    header = ["k", "fm_value", "log_mass", "base_point", "hausdorff", "wc", "contribution"]
    rows = []
    value = 0.0
    for k in range(args.k_bar, args.k_max + 1):
        fm, terms = ikrw_fm(k_cut(a, k), k_cut(b, k), c_kind=args.c_kind,
                               return_terms=True)
        contrib = 2.0 ** (-k) * min(1.0, fm)
        value += contrib
        rows.append([k, fm, terms["log_mass"], terms["base_point"],
                     terms["hausdorff"], terms["wc"], contrib])
    summary = {"value": _fmt(value), "tail_bound": _fmt(2.0 ** (-args.k_max)),
               "k_bar": args.k_bar, "k_max": args.k_max, "c_kind": args.c_kind}
    _write_report(args.out, args.format, header, rows, summary)
    return EXIT_OK


def _cmd_converge(args) -> int:
    seq = _read_json(args.seq)
    table, suite = convergence_experiment(
        seq, run_cd=not args.no_cd, cd_samples=args.cd_samples,
        seed=args.seed, tol=args.tol)
    header = ["n", "k", "log_mass_gap", "base_point_gap", "hausdorff_gap",
              "wc_gap", "total"]
    rows = [[r.n, r.k, r.log_mass_gap, r.base_point_gap, r.hausdorff_gap,
             r.wc_gap, r.total] for r in table.rows]
    ks = sorted({r.k for r in table.rows})
    monotone = all(table.decreasing("wc_gap", k, slack=1e-9) for k in ks)
    summary = {
        "series": {str(n): _fmt(v) for n, v in table.series.items()},
        "monotone_wc": monotone, "seed": args.seed,
    }
    passed = monotone
    if suite is not None:
        summary["cd_min_margin"] = _fmt(suite.min_margin())
        summary["cd_passed"] = suite.passes()
        passed = passed and suite.passes()
    summary["passed"] = passed
    _write_report(args.out, args.format, header, rows, summary)
    return EXIT_OK if passed else EXIT_VIOLATION


def _cmd_omega(args) -> int:
    space = _load_space(args.space)
    table = cdc.OmegaTable()
    header = ["k", "h", "M", "omega", "n_samples", "Omega"]
    rows = []
    scaled = 2.0 ** (1.0 - 1.0 / args.N) * args.M
    for h in range(args.k, args.h_max + 1):
        cdc.estimate_omega(space, args.k, h, scaled, n_samples=args.samples,
                           N=args.N, seed=args.seed, table=table)
        omega_plain = cdc.estimate_omega(space, args.k, h, args.M,
                                         n_samples=args.samples, N=args.N,
                                         seed=args.seed)
        Om = cdc.omega_to_Omega(table, args.k, h, args.M, args.delta, N=args.N)
        rows.append([args.k, h, args.M, omega_plain, args.samples, Om])
    summary = {"k": args.k, "h_max": args.h_max, "M": args.M,
               "delta": args.delta, "N": args.N, "seed": args.seed,
               "samples": args.samples}
    _write_report(args.out, args.format, header, rows, summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdknlab",
                description="Numerical experiments for curvature-dimension "
                            "bounds with negative generalized dimension.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("model", help="build a space and print its summary")
    sp.add_argument("--space", required=True)
    sp.add_argument("--out")
    sp.add_argument("--detect-singular", action="store_true")
    sp.set_defaults(fn=_cmd_model)

    sp = sub.add_parser("cdcheck", help="verify CD(K, N) on sampled marginal pairs")
    sp.add_argument("--space", required=True)
    sp.add_argument("--K", type=float, required=True)
    sp.add_argument("--N", type=float, required=True)
    sp.add_argument("--t-grid", type=int, default=11, dest="t_grid")
    sp.add_argument("--nprime-grid", type=int, default=9, dest="nprime_grid")
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--tol", type=float, default=cdc.DEFAULT_TOL)
    sp.add_argument("--restrict-k", type=int, default=None, dest="restrict_k")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(fn=_cmd_cdcheck)

    sp = sub.add_parser("convexity", help="sampled (K, N)-convexity check of a weight")
    sp.add_argument("--psi", required=True, help="JSON file with x / psi arrays")
    sp.add_argument("--K", type=float, required=True)
    sp.add_argument("--N", type=float, required=True)
    sp.add_argument("--triples", type=int, default=400)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_convexity)

    sp = sub.add_parser("ikrw", help="truncated iKRW series between two spaces")
    sp.add_argument("--space-a", required=True, dest="space_a")
    sp.add_argument("--space-b", required=True, dest="space_b")
    sp.add_argument("--k-bar", type=int, default=0, dest="k_bar")
    sp.add_argument("--k-max", type=int, default=12, dest="k_max")
    sp.add_argument("--c-kind", choices=("tanh", "cap1"), default="tanh", dest="c_kind")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(fn=_cmd_ikrw)

    sp = sub.add_parser("converge", help="gap table for a converging family")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--no-cd", action="store_true", dest="no_cd")
    sp.add_argument("--cd-samples", type=int, default=4, dest="cd_samples")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--tol", type=float, default=cdc.DEFAULT_TOL)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(fn=_cmd_converge)

    sp = sub.add_parser("omega", help="estimate geodesic mass escaping the regular sets")
    sp.add_argument("--space", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--h-max", type=int, required=True, dest="h_max")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--N", type=float, default=-2.0)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(fn=_cmd_omega)
    return p


def run(config: RunConfig) -> int:
    """Programmatic entry point mirroring the command line."""
    argv = [config.command]
    for k, v in {**config.inputs, **config.flags}.items():
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        else:
            argv.extend([flag, str(v)])
    if config.out:
        argv.extend(["--out", config.out])
    if config.seed is not None:
        argv.extend(["--seed", str(config.seed)])
    if config.format != "csv":
        argv.extend(["--format", config.format])
    return main(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except CdknLabError as e:
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_USAGE
    except OSError as e:
        sys.stderr.write(f"io error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
