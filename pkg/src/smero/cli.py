"""Batch command-line front end.

Usage::

    smero <command> --input <spec.json> --out <prefix> [--plot] [--tol T] [--resolution N] [--seed S]

Every run writes ``<prefix>.json``::

    {"schema": "smero-result/1", "command": ..., "input_digest": "sha256:...",
     "version": ..., "wall_time": seconds, "status": "ok" | "error",
     "payload": {...}}                       # on success
     "error": {"name": ..., "message": ...}  # on failure

Exit status is 0 on success, 2 when the input fails validation and 3 on a
numerical failure.  CSV files use ``<prefix>_<name>.csv`` and, with
``--plot``, a gnuplot script ``<prefix>.gp`` references them.

Input documents (unknown fields are rejected):

potential
    ``{"variant": "RationalSingular", "poles": [{"x": 0.0, "r": 1}], "regular": [[re, im], ...]}``
    ``{"variant": "SolitonTau", "k": [1, 2], "signs": [-1, 1], "shifts": [0, 0], "time": 0}``
    ``{"variant": "Elliptic", "omega1": 1, "omega2": [0, 1], "n": 1, "shift": 0}``
space
    ``{"poles": [[x, r], ...], "mode": "compact", "interval": [a, b], "rho": 0.05, "tol": 1e-8}``
    ``{"poles": [[x, r], ...], "mode": "bloch", "period": T, "kappa": [re, im]}``
lattice
    ``{"omega1": 1.0, "omega2": [re, im]}``
atoms (elements of a space)
    ``{"kind": "monomial", "pole": j, "exponent": e, "coeff": [re, im]}``
    ``{"kind": "bump", "center": c, "width": w, "freq": 0, "phase": 0, "coeff": [re, im]}``

Per command:

check     ``{"potential", "poles"?: [x, ...], "window"?: [a, b], "order"?: int}``
basis     ``{"space", "basis_size"?: int}``
ip        ``{"space", "f": [atoms], "g": [atoms], "orientation"?: "upper" | "lower", "potential"?}``
count     ``{"space", "basis_size"?: int}``
evolve    ``{"potential", "t_range": [t0, t1], "t_steps": int, "window": [a, b]}``
spectrum  ``{"lattice"}``
bloch     ``{"lattice", "kappa": [re, im], "pole_shift"?: x, "count"?: int}``
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .elliptic import WeierstrassData
from .errors import SchemaError, SmeroError
from .genus1 import bloch_norm_signs, canonical_contour, spectrum_projection, write_spectrum_csv
from .local import classify_pole, negative_subspace, parity_window
from .potentials import (
    Elliptic,
    RationalSingular,
    SolitonTau,
    evolve_track,
    find_real_poles,
    local_expansion,
    potential_from_dict,
    type_label,
)
from .space import (
    DEFAULT_TOL,
    SpaceSpec,
    atom_from_dict,
    element_from_atoms,
    gram_basis,
    gram_matrix,
    inner_product,
    negative_count_formula,
    pair_residue,
    recommended_basis_size,
    signature,
    symmetry_defect,
)

SCHEMA = "smero-result/1"
COMMANDS = ("check", "basis", "ip", "count", "evolve", "spectrum", "bloch")

_FIELDS = {
    "check": ({"potential"}, {"poles", "window", "order"}),
    "basis": ({"space"}, {"basis_size"}),
    "ip": ({"space", "f", "g"}, {"orientation", "potential"}),
    "count": ({"space"}, {"basis_size"}),
    "evolve": ({"potential", "t_range", "t_steps", "window"}, set()),
    "spectrum": ({"lattice"}, set()),
    "bloch": ({"lattice", "kappa"}, {"pole_shift", "count"}),
}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(v)
    raise SchemaError(f"expected a number or [re, im], got {v!r}")


def _pair(v, what):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise SchemaError(f"{what} must be a two-element list")
    return float(v[0]), float(v[1])


def _jsonable(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def parse_space(d, tol=None) -> SpaceSpec:
    if not isinstance(d, dict):
        raise SchemaError("space must be an object")
    allowed = {"poles", "mode", "interval", "period", "kappa", "rho", "tol"}
    extra = set(d) - allowed
    if extra:
        raise SchemaError(f"unknown space fields: {sorted(extra)}")
    try:
        poles = tuple((float(x), int(r)) for x, r in d.get("poles", []))
        interval = _pair(d["interval"], "interval") if "interval" in d else None
        return SpaceSpec(poles, interval=interval, mode=d.get("mode", "compact"),
                         period=None if d.get("period") is None else float(d["period"]),
                         kappa=_cplx(d.get("kappa", 1.0)), rho=None if d.get("rho") is None else float(d["rho"]),
                         tol=float(tol if tol is not None else d.get("tol", DEFAULT_TOL)))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad space: {exc}") from exc


def parse_lattice(d) -> WeierstrassData:
    if not isinstance(d, dict) or set(d) - {"omega1", "omega2"}:
        raise SchemaError("lattice must be {omega1, omega2}")
    try:
        return WeierstrassData(float(d.get("omega1", 1.0)), _cplx(d.get("omega2", [0.0, 1.0])))
    except ValueError as exc:
        raise SchemaError(f"bad lattice: {exc}") from exc


def parse_atoms(items, s: SpaceSpec):
    if not isinstance(items, list):
        raise SchemaError("an element is a list of atoms")
    try:
        atoms = [atom_from_dict(a) for a in items]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad atom: {exc}") from exc
    for a in atoms:
        if hasattr(a, "pole") and not 0 <= a.pole < len(s.poles):
            raise SchemaError(f"atom refers to pole {a.pole}, space has {len(s.poles)}")
    return element_from_atoms(atoms, s)


def validate(command: str, doc) -> None:
    if command not in COMMANDS:
        raise SchemaError(f"unknown command {command!r}")
    if not isinstance(doc, dict):
        raise SchemaError("input must be a JSON object")
    required, optional = _FIELDS[command]
    missing = required - set(doc)
    if missing:
        raise SchemaError(f"{command}: missing fields {sorted(missing)}")
    extra = set(doc) - required - optional
    if extra:
        raise SchemaError(f"{command}: unknown fields {sorted(extra)}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


class _Out:
    def __init__(self, prefix: str):
        self.prefix = prefix
        self.csvs: dict = {}

    def csv_path(self, name: str) -> str:
        path = f"{self.prefix}_{name}.csv"
        self.csvs[name] = path
        return path

    def write_csv(self, name, header, rows) -> str:
        path = self.csv_path(name)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return path


def _series_dict(a):
    return {"center": _jsonable(a.center), "min_degree": a.min_degree, "coeffs": [_jsonable(c) for c in a.coeffs]}


def cmd_check(doc, args, out):
    p = potential_from_dict(doc["potential"])
    order = int(doc.get("order", 24))
    if "poles" in doc:
        xs = [float(x) for x in doc["poles"]]
    elif isinstance(p, RationalSingular):
        xs = [x for x, _ in p.poles]
    elif isinstance(p, Elliptic):
        xs = [p.shift]
    else:
        if "window" not in doc:
            raise SchemaError("check on a soliton potential needs 'poles' or 'window'")
        xs = [pi.position for pi in find_real_poles(p, _pair(doc["window"], "window"))]
    poles = []
    for x in xs:
        op = local_expansion(p, x, order=order)
        cert = classify_pole(op)
        poles.append({"x": x, "certificate": cert.to_dict(), "u_series": _series_dict(op.u_coeffs)})
    payload = {"verdict": all(q["certificate"]["verdict"] for q in poles), "poles": poles}
    if len(poles) == 1:
        payload["r"] = poles[0]["certificate"]["r"]
    return payload


def cmd_basis(doc, args, out):
    s = parse_space(doc["space"], args.tol)
    size = int(doc.get("basis_size", recommended_basis_size(s)))
    basis = gram_basis(s, size, seed=args.seed)
    windows = []
    for x, r in s.poles:
        exps, dim = negative_subspace(r)
        windows.append({"x": x, "r": r, "window_degrees": parity_window(r), "negative_degrees": exps,
                        "negative_subspace_dim": dim})
    return {"space": s.to_dict(), "windows": windows, "basis": [[a.to_dict() for a in e.atoms] for e in basis]}


def cmd_ip(doc, args, out):
    s = parse_space(doc["space"], args.tol)
    f = parse_atoms(doc["f"], s)
    g = parse_atoms(doc["g"], s)
    orientation = doc.get("orientation", "upper")
    if orientation not in ("upper", "lower"):
        raise SchemaError("orientation must be 'upper' or 'lower'")
    value = inner_product(f, g, s, orientation=orientation)
    payload = {"value": _jsonable(value), "orientation": orientation,
               "residues": [_jsonable(pair_residue(f, g, j)) for j in range(len(s.poles))]}
    if "potential" in doc:
        payload["symmetry_defect"] = symmetry_defect(potential_from_dict(doc["potential"]), f, g, s)
    return payload


def cmd_count(doc, args, out):
    s = parse_space(doc["space"], args.tol)
    size = int(doc.get("basis_size", recommended_basis_size(s)))
    basis = gram_basis(s, size, seed=args.seed)
    G = gram_matrix(basis, None, s)
    neg, zero, pos = signature(G)
    n = G.shape[0]
    rows = [(i, j, float(G[i, j].real), float(G[i, j].imag)) for i in range(n) for j in range(n)]
    path = out.write_csv("gram", ["row", "col", "re", "im"], rows)
    return {"formula_count": negative_count_formula(s), "gram_count": neg,
            "signature": {"negative": neg, "zero": zero, "positive": pos}, "basis_size": n, "gram_csv": path}


def cmd_evolve(doc, args, out):
    p = potential_from_dict(doc["potential"])
    if not isinstance(p, SolitonTau):
        raise SchemaError("evolve needs a SolitonTau potential")
    t0, t1 = _pair(doc["t_range"], "t_range")
    tl = evolve_track(p, (t0, t1), int(doc["t_steps"]), _pair(doc["window"], "window"))
    rows = [(tid, ev.time, ev.position, ev.tau_zero_multiplicity, ev.pole_type_coefficient,
             "" if ev.r is None else ev.r) for tid, ev in tl.rows()]
    path = out.write_csv("timeline", ["track", "t", "x", "multiplicity", "pole_coefficient", "r"], rows)
    events = [{"time": e.time, "position": e.position, "transition": e.transition, "m_before": e.m_before,
               "m_at": e.m_at, "r_before": e.r_before, "r_at": e.r_at,
               "complex_pair_distance": e.complex_pair_distance, "tau2_normalized": e.tau2_normalized}
              for e in tl.events]
    counts = sorted(set(int(c) for c in tl.negative_counts))
    return {"timeline_csv": path, "events": events, "negative_counts": counts, "times": len(tl.times)}


def cmd_spectrum(doc, args, out):
    data = parse_lattice(doc["lattice"])
    contour = canonical_contour(data, args.resolution)
    comps = spectrum_projection(contour)
    path = out.csv_path("spectrum")
    write_spectrum_csv(comps, path)
    return {"lattice": data.to_dict(), "lattice_class": data.lattice_class, "resolution": args.resolution,
            "spectrum_csv": path,
            "components": [{"label": c.label, "points": len(c.points), "max_imag_alpha": c.max_imag,
                            "through_marked_point": k.through_pole}
                           for c, k in zip(comps, contour.components)]}


def cmd_bloch(doc, args, out):
    data = parse_lattice(doc["lattice"])
    kappa = _cplx(doc["kappa"])
    if abs(abs(kappa) - 1) > 1e-12:
        raise SchemaError("kappa must be unimodular")
    res = bloch_norm_signs(kappa, data, pole_shift=float(doc.get("pole_shift", 0.0)),
                           count=int(doc.get("count", 40)), resolution=args.resolution)
    rows = [(l, a.real, a.imag, al.real, al.imag, nv.real, nv.imag, sg)
            for l, (a, al, nv, sg) in enumerate(zip(res.points, res.alphas, res.norms, res.signs))]
    path = out.write_csv("bloch", ["index", "re_a", "im_a", "re_alpha", "im_alpha", "re_norm", "im_norm", "sign"],
                         rows)
    return {"kappa": _jsonable(kappa), "signs": list(res.signs), "negative_total": res.negative_total,
            "gram_signature": list(res.gram_signature), "bloch_csv": path}


_DISPATCH = {"check": cmd_check, "basis": cmd_basis, "ip": cmd_ip, "count": cmd_count, "evolve": cmd_evolve,
             "spectrum": cmd_spectrum, "bloch": cmd_bloch}


# ---------------------------------------------------------------------------
# Plot scripts
# ---------------------------------------------------------------------------


def _gnuplot(command: str, csvs: dict) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead"]
    if "spectrum" in csvs:
        lines += ["set multiplot layout 1,2", "set title 'contour (a-plane)'",
                  f"plot '{csvs['spectrum']}' using 1:2:7 with points pt 7 ps 0.3 lc variable notitle",
                  "set title 'spectrum (alpha-plane)'",
                  f"plot '{csvs['spectrum']}' using 3:4:7 with points pt 7 ps 0.3 lc variable notitle",
                  "unset multiplot"]
    if "timeline" in csvs:
        lines += ["set xlabel 't'", "set ylabel 'x'",
                  f"plot '{csvs['timeline']}' using 2:3:1 with linespoints lc variable notitle"]
    if "gram" in csvs:
        lines += ["set view map",
                  f"splot '{csvs['gram']}' using 1:2:3 with image notitle"]
    if "bloch" in csvs:
        lines += ["set xlabel 'index'", "set ylabel 'sign'",
                  f"plot '{csvs['bloch']}' using 1:8 with impulses notitle"]
    if len(lines) == 2:
        lines.append(f"# {command}: nothing to plot")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _clean(obj):
    """Round-trip floats so the result JSON is deterministic and valid."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return _jsonable(obj)
    return obj


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smero", description="Spectrally meromorphic Schrodinger operator toolkit.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", required=True, help="JSON input document")
    ap.add_argument("--out", required=True, help="output path prefix")
    ap.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    ap.add_argument("--tol", type=float, default=None, help="quadrature tolerance override")
    ap.add_argument("--resolution", type=int, default=256, help="contour grid resolution")
    ap.add_argument("--seed", type=int, default=0, help="seed for random basis elements")
    return ap


def run(args) -> int:
    out = _Out(args.out)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    result = {"schema": SCHEMA, "command": args.command, "version": __version__}
    start = time.perf_counter()
    status = 0
    try:
        raw = Path(args.input).read_bytes()
        result["input_digest"] = "sha256:" + hashlib.sha256(raw).hexdigest()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"input is not valid JSON: {exc}") from exc
        validate(args.command, doc)
        payload = _DISPATCH[args.command](doc, args, out)
        result["status"] = "ok"
        result["payload"] = payload
    except SchemaError as exc:
        status = 2
        result["status"] = "error"
        result["error"] = {"name": exc.name, "message": str(exc)}
    except OSError as exc:
        status = 2
        result["status"] = "error"
        result["error"] = {"name": "InputUnreadable", "message": str(exc)}
    except SmeroError as exc:
        status = 3
        result["status"] = "error"
        result["error"] = {"name": exc.name, "message": str(exc)}
    result.setdefault("input_digest", None)
    if args.plot:
        gp = f"{args.out}.gp"
        Path(gp).write_text(_gnuplot(args.command, out.csvs))
        result["plot_script"] = gp
    result["wall_time"] = time.perf_counter() - start
    Path(f"{args.out}.json").write_text(json.dumps(_clean(result), sort_keys=True, indent=2) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
