"""File formats: BVGRID, plain PGM, FROSTMAN and the decomposition artifact."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .atoms import Atom
from .boxing import DyadicCube
from .diagnostics import FrostmanMeasure
from .errors import FormatError
from .grid import GridFunction, GridSpec, VectorFaceMeasure
from .pipeline import Decomposition, Entry, Mode

ARTIFACT_VERSION = 1


def _tokens(text: str):
    """Yield ``(token, line_number)`` skipping ``#`` comments."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            yield tok, lineno


def _number(tok: str, lineno: int, path, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise FormatError(f"expected {'integer' if kind is int else 'number'}, got {tok!r}", path, lineno) from None


def parse_bvgrid(text: str, path: str | None = None) -> GridFunction:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file", path, 1)
    head = lines[0].split()
    if not head or head[0] != "BVGRID":
        raise FormatError("missing 'BVGRID' header", path, 1)
    if len(head) < 3:
        raise FormatError("header needs 'BVGRID <d> <h> <n1> ... <nd>'", path, 1)
    d = _number(head[1], 1, path, int)
    if d not in (2, 3):
        raise FormatError(f"dimension must be 2 or 3, got {d}", path, 1)
    if len(head) != 3 + d:
        raise FormatError(f"header declares d={d} but lists {len(head) - 3} extents", path, 1)
    h = _number(head[2], 1, path)
    if not h > 0:
        raise FormatError(f"spacing must be positive, got {h}", path, 1)
    shape = tuple(_number(t, 1, path, int) for t in head[3:])
    if any(n < 1 for n in shape):
        raise FormatError(f"extents must be positive, got {shape}", path, 1)
    body = "\n".join(lines[1:])
    vals = []
    for tok, lineno in _tokens(body):
        v = _number(tok, lineno + 1, path)
        if not np.isfinite(v):
            raise FormatError(f"non-finite value {tok!r}", path, lineno + 1)
        vals.append(v)
    expected = int(np.prod(shape))
    if len(vals) != expected:
        raise FormatError(f"expected {expected} values for shape {shape}, found {len(vals)}", path, len(lines))
    return GridFunction(GridSpec(shape, h), np.asarray(vals).reshape(shape))


def format_bvgrid(u: GridFunction) -> str:
    spec = u.spec
    out = io.StringIO()
    out.write(f"BVGRID {spec.d} {spec.h!r} {' '.join(str(n) for n in spec.shape)}\n")
    rows = u.values.reshape(-1, spec.shape[-1])
    for row in rows:
        out.write(" ".join(repr(float(v)) for v in row))
        out.write("\n")
    return out.getvalue()


def parse_pgm(text: str, path: str | None = None) -> GridFunction:
    toks = list(_tokens(text))
    if not toks or toks[0][0] != "P2":
        raise FormatError("only plain PGM ('P2') is supported", path, 1)
    if len(toks) < 4:
        raise FormatError("truncated PGM header", path, toks[-1][1] if toks else 1)
    width = _number(toks[1][0], toks[1][1], path, int)
    height = _number(toks[2][0], toks[2][1], path, int)
    maxval = _number(toks[3][0], toks[3][1], path, int)
    if width < 1 or height < 1 or maxval < 1:
        raise FormatError("PGM width, height and maxval must be positive", path, toks[3][1])
    data = toks[4:]
    if len(data) != width * height:
        raise FormatError(f"expected {width * height} pixels, found {len(data)}", path,
                          data[-1][1] if data else toks[3][1])
    vals = np.array([_number(t, ln, path, int) for t, ln in data], dtype=float)
    if np.any(vals < 0) or np.any(vals > maxval):
        bad = next(ln for (t, ln), v in zip(data, vals) if v < 0 or v > maxval)
        raise FormatError(f"pixel outside [0, {maxval}]", path, bad)
    arr = vals.reshape(height, width) / maxval
    return GridFunction(GridSpec((height, width), 1.0 / max(height, width)), arr)


def read_grid(path, fmt: str | None = None) -> GridFunction:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path) from None
    if fmt is None:
        first = text.lstrip().split(None, 1)[0] if text.strip() else ""
        fmt = "pgm" if first == "P2" else "bvgrid"
    if fmt == "pgm":
        return parse_pgm(text, path)
    if fmt == "bvgrid":
        return parse_bvgrid(text, path)
    raise FormatError(f"unknown format {fmt!r}", path)


def write_bvgrid(path, u: GridFunction) -> None:
    Path(path).write_text(format_bvgrid(u))


def parse_frostman(text: str, path: str | None = None) -> FrostmanMeasure:
    lines = text.splitlines()
    if not lines or not lines[0].split() or lines[0].split()[0] != "FROSTMAN":
        raise FormatError("missing 'FROSTMAN <d> <exponent> <c_nu>' header", path, 1)
    head = lines[0].split()
    if len(head) != 4:
        raise FormatError("header needs 'FROSTMAN <d> <exponent> <c_nu>'", path, 1)
    d = _number(head[1], 1, path, int)
    exponent = _number(head[2], 1, path)
    const = _number(head[3], 1, path)
    if const <= 0:
        raise FormatError("growth constant must be positive", path, 1)
    pts, ws = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("#", 1)[0].split()
        if not fields:
            continue
        if len(fields) != d + 1:
            raise FormatError(f"expected {d} coordinates and a weight, got {len(fields)} fields", path, lineno)
        nums = [_number(f, lineno, path) for f in fields]
        if nums[-1] < 0:
            raise FormatError("negative weight", path, lineno)
        pts.append(nums[:-1])
        ws.append(nums[-1])
    if not pts:
        raise FormatError("measure has no atoms", path, len(lines))
    return FrostmanMeasure(np.array(pts), np.array(ws), exponent, const)


def read_frostman(path) -> FrostmanMeasure:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path) from None
    return parse_frostman(text, path)


def format_frostman(nu: FrostmanMeasure) -> str:
    lines = [f"FROSTMAN {nu.d} {nu.exponent!r} {nu.constant!r}"]
    for p, w in zip(nu.points, nu.weights):
        lines.append(" ".join(repr(float(v)) for v in p) + f" {float(w)!r}")
    return "\n".join(lines) + "\n"


# decomposition artifact

def artifact_dict(dec: Decomposition) -> dict:
    atoms = []
    for e in dec.entries:
        a = e.atom
        faces = [[a.axis, *(int(v) for v in c), float(w)] for c, w in zip(a.cells, a.weights)]
        atoms.append({"l": a.axis, "Q": a.cube.to_dict(), "boundary_mass": a.boundary_mass, "scale": a.scale,
                      "provenance": a.provenance, "faces": faces})
    return {
        "header": {"version": ARTIFACT_VERSION, "spec": dec.spec.to_dict(), "mode": dec.mode.to_dict(),
                   "Cprime": dec.cprime, "digest": dec.digest},
        "layers": dec.layers,
        "atoms": atoms,
        "lambdas": [e.lam for e in dec.entries],
        "Du": [[[*(int(v) for v in c), float(w)] for c, w in zip(cs, ws)]
               for cs, ws in zip(dec.Du.cells, dec.Du.weights)],
        "summary": dec.summary,
    }


def dumps_artifact(dec: Decomposition) -> str:
    return json.dumps(artifact_dict(dec), sort_keys=True, separators=(",", ":"))


def artifact_from_dict(data: dict, path: str | None = None) -> Decomposition:

    try:
        head = data["header"]
        spec = GridSpec.from_dict(head["spec"])
        cprime = float(head["Cprime"])
        entries = []
        if len(data["atoms"]) != len(data["lambdas"]):
            raise FormatError("atoms and lambdas differ in length", path)
        for rec, lam in zip(data["atoms"], data["lambdas"]):
            faces = rec["faces"]
            l = int(rec["l"])
            cells = np.array([f[1:1 + spec.d] for f in faces], dtype=np.int64).reshape(-1, spec.d)
            weights = np.array([f[-1] for f in faces], dtype=float)
            if any(int(f[0]) != l for f in faces):
                raise FormatError("atom lists faces of another axis", path)
            scale = float(rec["scale"])
            cube = DyadicCube(int(rec["Q"]["level"]), tuple(rec["Q"]["coords"]))
            atom = Atom(spec, l, cube, cells, weights / scale, scale, cprime, float(rec["boundary_mass"]),
                        dict(rec.get("provenance") or {}))
            entries.append(Entry(float(lam), atom))
        du_cells = tuple(np.array([f[:spec.d] for f in comp], dtype=np.int64).reshape(-1, spec.d)
                         for comp in data["Du"])
        du_w = tuple(np.array([f[-1] for f in comp], dtype=float) for comp in data["Du"])
        Du = VectorFaceMeasure(spec, du_cells, du_w)
        dec = Decomposition(spec, head["digest"], Mode.from_dict(head["mode"]), cprime, entries,
                            list(data["layers"]), Du)
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"malformed artifact: missing or invalid field {exc}", path) from None
    dec.summary = dict(data.get("summary") or {})
    return dec


def read_artifact(path) -> Decomposition:
    path = str(path)
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path) from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    return artifact_from_dict(data, path)


ATOM_COLUMNS = ["index", "l", "level", "coords", "side", "lambda", "mass", "signed_mass", "heat_sup",
                "heat_budget", "heat_margin", "refine_change", "support_ok", "cancellation_ok", "mass_ok",
                "heat_ok", "refine_ok"]


def atom_rows(dec: Decomposition, reports=None) -> list[dict]:
    rows = []
    for i, e in enumerate(dec.entries):
        a = e.atom
        row = {"index": i, "l": a.axis, "level": a.cube.level, "coords": " ".join(map(str, a.cube.coords)),
               "side": a.side, "lambda": e.lam, "mass": a.mass(), "signed_mass": a.signed_mass()}
        if reports is not None:
            r = reports[i]
            row.update({"heat_sup": r.heat_sup, "heat_budget": r.heat_budget, "heat_margin": r.heat_margin,
                        "refine_change": r.refine_change, "support_ok": r.support_ok,
                        "cancellation_ok": r.cancellation_ok, "mass_ok": r.mass_ok, "heat_ok": r.heat_ok,
                        "refine_ok": r.refine_ok})
        rows.append(row)
    return rows


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
