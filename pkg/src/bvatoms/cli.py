"""Command-line front end.

Exit codes: 0 success, 1 validation error (JSON on stderr), 2 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .atoms import verify_atom
from .boxing import box_set
from .coarea import exact_layers, riemann_sample, superlevel
from .diagnostics import constants_report, gn_ratio, trace_ratio
from .errors import FormatError, InvariantViolation
from .grid import component_variation, gradient_measure, isotropic_total_variation, total_variation
from .heat import HeatEvalPlan
from .io import (ATOM_COLUMNS, atom_rows, dumps_artifact, read_artifact, read_frostman, read_grid, write_bvgrid,
                 write_csv)
from .pipeline import Mode, decompose

ARTIFACT_NAME = "artifact.json"
ATOMS_CSV = "atoms.csv"
SUMMARY_NAME = "summary.txt"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Resolved options of one invocation."""

    command: str
    input: str | None = None
    fmt: str | None = None
    mode: Mode = field(default_factory=Mode)
    cprime: str | float = "auto"
    plan: HeatEvalPlan = field(default_factory=HeatEvalPlan)
    out: str | None = None
    seed: int = 0
    threads: int = 1
    emit_json: bool = True
    emit_csv: bool = True
    plotdata: bool = False

    def __post_init__(self):
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def _cprime(s):
    if s == "auto":
        return s
    return _positive(float)(s)


def _keyvals(pairs, allowed):
    out = {}
    for p in pairs:
        key, sep, val = p.partition("=")
        if not sep or key not in allowed:
            raise UsageError(f"expected one of {', '.join(k + '=<value>' for k in allowed)}, got {p!r}")
        out[key] = val
    missing = set(allowed) - set(out)
    if missing:
        raise UsageError(f"missing {', '.join(sorted(missing))}")
    return out


def _add_input(p, required=True):
    p.add_argument("input", nargs=None if required else "?", help="BVGRID or plain PGM file")
    p.add_argument("--format", dest="fmt", choices=["bvgrid", "pgm"], help="override format detection")


def _add_plan(p):
    p.add_argument("--rho", type=int, default=4, help="lattice points per cell at fine scales")
    p.add_argument("--margin", type=_positive(float), default=1.0, help="sampled region beyond the support")
    p.add_argument("--ratio", type=_positive(float), default=2.0, help="geometric ratio of the time grid")
    p.add_argument("--kernel", choices=["face", "point"], default="face")
    p.add_argument("--no-refine", action="store_true", help="skip the refinement-stability check")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bvatoms", description="Atomic decomposition of discrete BV functions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tv", help="total variation and per-component breakdown")
    _add_input(p)

    p = sub.add_parser("coarea", help="coarea layers as JSON")
    _add_input(p)
    p.add_argument("--mode", choices=["exact", "riemann"], default="exact")
    p.add_argument("--n", type=int, help="number of Riemann intervals")
    p.add_argument("--scheme", choices=["uniform", "quantile"], default="uniform")

    p = sub.add_parser("boxing", help="dyadic boxing of a thresholded input")
    _add_input(p)
    p.add_argument("--threshold", type=float, required=True, help="boxes the set {u > threshold}")
    p.add_argument("--plotdata", metavar="DIR", help="write level/ratio CSVs to DIR")

    p = sub.add_parser("decompose", help="full decomposition; writes artifact, atom table and summary")
    _add_input(p)
    p.add_argument("--mode", choices=["exact", "riemann"], default="exact")
    p.add_argument("--n", type=int)
    p.add_argument("--scheme", choices=["uniform", "quantile"], default="uniform")
    p.add_argument("--cprime", type=_cprime, default="auto", help="'auto' or a positive number")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--verify", action="store_true", help="also verify every atom")
    p.add_argument("--plotdata", action="store_true", help="write plot CSVs next to the artifact")
    _add_plan(p)

    p = sub.add_parser("verify-atoms", help="re-verify every atom of an artifact")
    p.add_argument("artifact")
    p.add_argument("-o", "--out", help="directory for report.json and atoms.csv (default: stdout only)")
    p.add_argument("--threads", type=int, default=1)
    _add_plan(p)

    p = sub.add_parser("diagnose", help="Sobolev ratio, trace ratio and corpus constants")
    _add_input(p, required=False)
    p.add_argument("--gn", action="store_true")
    p.add_argument("--trace", nargs=2, metavar=("alpha=<v>", "nu=<file>"))
    p.add_argument("--constants", metavar="corpus=<dir>")
    p.add_argument("--no-heat", action="store_true", help="skip heat margins in --constants")

    p = sub.add_parser("gen-corpus", help="write a seeded corpus of BVGRID files")
    p.add_argument("--kind", choices=list(corpus_mod.KINDS), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--dim", type=int, choices=[2, 3], default=2)
    p.add_argument("--p", type=float, default=0.6, help="percolation probability")
    p.add_argument("-o", "--out", required=True)
    return parser


def _mode(args) -> Mode:
    if args.mode == "riemann" and args.n is None:
        raise UsageError("--mode riemann requires --n")
    return Mode(args.mode, args.n if args.mode == "riemann" else None, args.scheme)


def _plan(args) -> HeatEvalPlan:
    return HeatEvalPlan(rho=args.rho, margin=args.margin, ratio=args.ratio, kernel=args.kernel)


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, input=getattr(args, "input", None), fmt=getattr(args, "fmt", None),
                    out=getattr(args, "out", None), threads=getattr(args, "threads", 1),
                    seed=getattr(args, "seed", 0))
    if hasattr(args, "mode"):
        cfg.mode = _mode(args)
    if hasattr(args, "rho"):
        cfg.plan = _plan(args)
    if hasattr(args, "cprime"):
        cfg.cprime = args.cprime
    pd = getattr(args, "plotdata", None)
    cfg.plotdata = bool(pd)
    return cfg


# subcommands

def cmd_tv(args, cfg, out):
    u = read_grid(cfg.input, cfg.fmt)
    m = gradient_measure(u)
    out.write(_dump({"tv": total_variation(m),
                     "components": [component_variation(m, l) for l in range(u.spec.d)],
                     "isotropic_tv": isotropic_total_variation(u),
                     "spec": u.spec.to_dict()}) + "\n")
    return 0


def cmd_coarea(args, cfg, out):
    u = read_grid(cfg.input, cfg.fmt)
    layers = exact_layers(u) if cfg.mode.kind == "exact" else riemann_sample(u, cfg.mode.n, cfg.mode.scheme)
    out.write(_dump([L.to_dict() for L in layers]) + "\n")
    return 0


def _boxing_plotdata(directory: Path, rows: list[dict], prefix: str = "") -> None:
    directory.mkdir(parents=True, exist_ok=True)
    levels = {}
    for r in rows:
        levels[r["level"]] = levels.get(r["level"], 0) + 1
    write_csv(directory / f"{prefix}levels.csv", [{"level": k, "count": v} for k, v in sorted(levels.items())],
              ["level", "count"])
    ratios = np.array([r["ratio"] for r in rows], dtype=float)
    if len(ratios):
        counts, edges = np.histogram(ratios, bins=20)
        hist = [{"lo": float(a), "hi": float(b), "count": int(c)} for a, b, c in zip(edges[:-1], edges[1:], counts)]
    else:
        hist = []
    write_csv(directory / f"{prefix}ratio_hist.csv", hist, ["lo", "hi", "count"])


def cmd_boxing(args, cfg, out):
    u = read_grid(cfg.input, cfg.fmt)
    U = superlevel(u, args.threshold)
    if U.is_empty():
        raise UsageError(f"threshold {args.threshold} leaves an empty set")
    try:
        res = box_set(U, check=True)
        partition_ok = True
    except InvariantViolation:
        res = box_set(U, check=False)
        partition_ok = False
    rows = res.cube_table()
    out.write(_dump({"cubes": rows, "constant": res.constant, "partition_ok": partition_ok,
                     "threshold": args.threshold, "cells": U.count}) + "\n")
    if args.plotdata:
        _boxing_plotdata(Path(args.plotdata), rows)
    return 0 if partition_ok else 2


def _verify_all(dec, plan, refine, threads):
    def one(entry):
        return verify_atom(entry.atom, plan, refine=refine)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, dec.entries))


def _report(reports) -> dict:
    n = len(reports)
    refine_flags = [r.refine_ok for r in reports if r.refine_ok is not None]
    margins = [r.heat_margin for r in reports]
    return {
        "atoms": n,
        "passed": sum(r.passed for r in reports),
        "support_ok": sum(r.support_ok for r in reports),
        "cancellation_ok": sum(r.cancellation_ok for r in reports),
        "mass_ok": sum(r.mass_ok for r in reports),
        "heat_ok": sum(r.heat_ok for r in reports),
        "refine_checked": len(refine_flags),
        "refine_ok": sum(refine_flags),
        "max_mass": max((r.mass for r in reports), default=None),
        "max_heat_margin": max(margins, default=None),
        "all_passed": all(r.passed for r in reports) and all(refine_flags),
    }


def _summary_text(dec, report=None) -> str:
    s = dec.summary
    lines = [
        f"input digest        {dec.digest}",
        f"grid                {' x '.join(map(str, dec.spec.shape))}, h = {dec.spec.h!r}",
        f"mode                {dec.mode.to_dict()}",
        f"C'                  {dec.cprime!r}",
        f"boxing constant     {s['boxing_constant']!r}",
        f"layers              {s['layers']}",
        f"cubes               {s['cubes']}",
        f"atoms               {s['atoms']}",
        f"|Du|                {s['tv']!r}",
        f"sum |lambda|        {s['sum_abs_lambda']!r}",
        f"sum |lambda| / |Du| {s['ratio']!r}",
        f"layer perimeter sum {s['layer_perimeter_sum']!r}",
        f"reconstruction res. {s['reconstruction_residual']!r}",
        "weak-star residuals " + ", ".join(f"{k}={v:.3e}" for k, v in s["weak_star"].items()),
    ]
    if report is not None:
        lines.append(f"atoms passing       {report['passed']} / {report['atoms']}")
        lines.append(f"max heat margin     {report['max_heat_margin']!r}")
    return "\n".join(lines) + "\n"


def cmd_decompose(args, cfg, out):
    u = read_grid(cfg.input, cfg.fmt)
    dec = decompose(u, cfg.mode, cfg.cprime, threads=cfg.threads, check=True)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / ARTIFACT_NAME).write_text(dumps_artifact(dec))
    reports = report = None
    if args.verify:
        reports = _verify_all(dec, cfg.plan, not args.no_refine, cfg.threads)
        report = _report(reports)
        (outdir / "report.json").write_text(_dump({"summary": report, "plan": cfg.plan.to_dict(),
                                                   "atoms": [r.to_dict() for r in reports]}) + "\n")
    write_csv(outdir / ATOMS_CSV, atom_rows(dec, reports), ATOM_COLUMNS)
    text = _summary_text(dec, report)
    (outdir / SUMMARY_NAME).write_text(text)
    if args.plotdata:
        boxing_rows = []
        seen = set()
        for e in dec.entries:
            key = (e.atom.provenance.get("layer"), e.atom.cube)
            if key in seen:
                continue
            seen.add(key)
            boxing_rows.append({"level": e.atom.cube.level,
                                "ratio": e.atom.side ** (dec.spec.d - 1) / e.atom.boundary_mass})
        _boxing_plotdata(outdir / "plotdata", boxing_rows)
        write_csv(outdir / "plotdata" / "layers.csv", dec.layers,
                  ["index", "sigma", "a", "t", "perimeter", "cells", "cubes", "boxing_constant", "closed_mass"])
    out.write(text)
    return 0


def cmd_verify(args, cfg, out):
    dec = read_artifact(args.artifact)
    reports = _verify_all(dec, cfg.plan, not args.no_refine, cfg.threads)
    report = _report(reports)
    doc = {"summary": report, "plan": cfg.plan.to_dict(), "atoms": [r.to_dict() for r in reports]}
    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(_dump(doc) + "\n")
        write_csv(outdir / ATOMS_CSV, atom_rows(dec, reports), ATOM_COLUMNS)
    out.write(_dump(report) + "\n")
    return 0


def cmd_diagnose(args, cfg, out):
    if not (args.gn or args.trace or args.constants):
        raise UsageError("diagnose needs at least one of --gn, --trace, --constants")
    result = {}
    u = None
    if args.gn or args.trace:
        if cfg.input is None:
            raise UsageError("--gn and --trace need an input grid")
        u = read_grid(cfg.input, cfg.fmt)
    if args.gn:
        result["gn_ratio"] = gn_ratio(u)
        result["gn_bound"] = 1.0 / (2 * u.spec.d)
    if args.trace:
        kv = _keyvals(args.trace, ["alpha", "nu"])
        try:
            alpha = float(kv["alpha"])
        except ValueError:
            raise UsageError(f"alpha must be a number, got {kv['alpha']!r}") from None
        nu = read_frostman(kv["nu"])
        result["trace"] = trace_ratio(u, alpha, nu)
    if args.constants:
        kv = _keyvals([args.constants], ["corpus"])
        files = sorted(Path(kv["corpus"]).glob("*.bvgrid")) + sorted(Path(kv["corpus"]).glob("*.pgm"))
        if not files:
            raise UsageError(f"no .bvgrid or .pgm files in {kv['corpus']}")
        result["constants"] = constants_report([read_grid(f) for f in files], heat=not args.no_heat)
    out.write(_dump(result) + "\n")
    return 0


def cmd_gen_corpus(args, cfg, out):
    if args.size < 1 or args.count < 0:
        raise UsageError("--size must be >= 1 and --count >= 0")
    items = corpus_mod.gen_corpus(args.kind, args.seed, args.count, args.size, args.dim, args.p)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(max(args.count - 1, 0))))
    names = []
    for i, u in enumerate(items):
        name = f"{args.kind}_{args.seed}_{i:0{width}d}.bvgrid"
        write_bvgrid(outdir / name, u)
        names.append(name)
    out.write(_dump({"kind": args.kind, "seed": args.seed, "count": args.count, "size": args.size,
                     "dim": args.dim, "files": names}) + "\n")
    return 0


COMMANDS = {"tv": cmd_tv, "coarea": cmd_coarea, "boxing": cmd_boxing, "decompose": cmd_decompose,
            "verify-atoms": cmd_verify, "diagnose": cmd_diagnose, "gen-corpus": cmd_gen_corpus}


def _fail(err, code, kind, stderr):
    doc = err.to_dict() if isinstance(err, FormatError) else {"error": str(err), "file": None, "line": None}
    doc["kind"] = kind
    stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        return COMMANDS[args.command](args, cfg, stdout)
    except InvariantViolation as err:
        return _fail(err, 2, "invariant", stderr)
    except FormatError as err:
        return _fail(err, 1, "format", stderr)
    except (UsageError, ValueError, OSError) as err:
        return _fail(err, 1, "validation", stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
