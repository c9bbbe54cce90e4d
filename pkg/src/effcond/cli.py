"""Command-line front end.

Every subcommand validates its inputs, runs one pipeline, and writes a JSON
(or CSV) artifact atomically.  Exit status is 0 on success, 1 on invalid
input and 2 on numeric failure.  A reproducibility header (package version,
config hash, geometry hash) goes to stderr and into every JSON artifact.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EffcondError, ValidationError

SWEEP_SCHEMA = "effcond-sweep/1"


class UsageError(ValidationError):
    pass


# ---------------------------------------------------------------------------
# formatting and I/O


def _num(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    if x == int(x) and abs(x) < 2 ** 53:
        return format(x, ".1f")
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy and complex values into JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": _plain(obj.real.tolist()), "im": _plain(obj.imag.tolist())}
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits."""
    obj = _plain(obj) if _level == 0 else obj
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _num(obj)
    return json.dumps(obj)


def write_atomic(path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def parse_tensor(text: str) -> np.ndarray:
    """'a11,a12,a21,a22' row-major; entries may be complex like '1+2j'."""
    parts = [p.strip().replace(" ", "") for p in text.split(",")]
    if len(parts) != 4:
        raise UsageError(f"tensor literal needs 4 comma-separated entries, got {text!r}")
    try:
        vals = [complex(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"cannot parse tensor literal {text!r}") from exc
    return np.array(vals).reshape(2, 2)


def parse_list(text: str, n: int | None = None) -> list:
    try:
        vals = [complex(p.strip().replace(" ", "")) for p in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} values, got {len(vals)} in {text!r}")
    return vals


def tensor_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict):
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    if isinstance(obj, str):
        return parse_tensor(obj)
    return np.asarray(obj, dtype=complex)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read JSON from {path}: {exc}") from exc


def _threads() -> int:
    raw = os.environ.get("EFFCOND_THREADS", "")
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        k = int(raw)
    except ValueError as exc:
        raise UsageError(f"EFFCOND_THREADS must be a positive integer, got {raw!r}") from exc
    if k < 1:
        raise UsageError("EFFCOND_THREADS must be at least 1")
    return k


def _header(args, geom=None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "func")}
    for k, v in list(cfg.items()):
        if isinstance(v, Path):
            cfg[k] = str(v)
    cfg_hash = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
    geo_hash = hashlib.sha256(geom.key()).hexdigest() if geom is not None else None
    head = {"version": __version__, "config_hash": cfg_hash[:16],
            "geometry_hash": geo_hash[:16] if geo_hash else None}
    print(f"# effcond {head['version']} config={head['config_hash']} "
          f"geometry={head['geometry_hash']}", file=sys.stderr)
    return head


def _geometry(args):
    from .field_space import read_geometry
    mirror = args.mirror
    if mirror is not None and mirror != "auto":
        mirror = int(mirror)
    return read_geometry(args.geometry, mirror=mirror)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    from .field_space import AdmissiblePair
    from .reference_solver import solve_effective
    geom = _geometry(args)
    pair = AdmissiblePair(parse_tensor(args.sigma1), parse_tensor(args.sigma2))
    head = _header(args, geom)
    rep = solve_effective(geom, pair, tol=args.tol)
    _emit(args, dumps({"header": head, "n": geom.n, "f": geom.f,
                       "sigma_star": rep.sigma_star, "iterations": rep.iterations,
                       "residual": rep.residual}) + "\n")
    return 0


def cmd_represent(args) -> int:
    from .canonical_rep import build_eigenbasis, extract_rep, validate_rep
    geom = _geometry(args)
    head = _header(args, geom)
    basis = build_eigenbasis(geom, half_m=args.half_m, eps=args.eps)
    rep = extract_rep(basis, rank_tol=args.rank_tol, dilate=not args.no_dilate)
    checks = validate_rep(rep, rank_tol=args.rank_tol)
    out = {"header": head, **rep.to_json(), "validation": checks,
           "auxiliary": rep.diagnostics.get("auxiliary")}
    _emit(args, dumps(out) + "\n")
    return 0


def _load_rep(path):
    from .canonical_rep import CanonicalRep
    obj = _read_json(path)
    try:
        return CanonicalRep.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed rep JSON: {exc}") from exc


def cmd_approx(args) -> int:
    from . import effective_approx as ea
    rep = _load_rep(args.rep)
    head = _header(args)
    out = {"header": head}
    if args.coupled:
        obj = _read_json(args.coupled)
        L1 = ea.CoupledTensor(tensor_from_json(obj["L1"]))
        L2 = ea.CoupledTensor(tensor_from_json(obj["L2"]))
        out["L_star"] = ea.l_star_coupled(rep, L1, L2).matrix
    elif args.lam:
        t = parse_list(args.lam, 3)
        out["lambda"] = t
        out["sigma_star"] = ea.sigma_diag_theorem1(rep, None, t)
    else:
        if args.pair:
            obj = _read_json(args.pair)
            s1, s2 = tensor_from_json(obj["sigma1"]), tensor_from_json(obj["sigma2"])
        elif args.sigma1 and args.sigma2:
            s1, s2 = parse_tensor(args.sigma1), parse_tensor(args.sigma2)
        else:
            raise UsageError("approx needs --lambda, --sigma1/--sigma2, --pair or --coupled")
        out["sigma_star"] = ea.sigma_star_theorem2(rep, s1, s2)
    _emit(args, dumps(out) + "\n")
    return 0


def cmd_laminate(args) -> int:
    from .laminate_models import polycrystal_laminate, program_from_json, program_to_json
    prog = program_from_json(_read_json(args.program))
    head = _header(args)
    sig = polycrystal_laminate(prog)
    _emit(args, dumps({"header": head, "program": program_to_json(prog), "sigma_star": sig}) + "\n")
    return 0


def _read_samples(path):
    from .recovery import SpectralSample
    rows = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    first = True
    for line in csv.reader(io.StringIO(text)):
        if not line or line[0].lstrip().startswith("#"):
            continue
        try:
            vals = [float(v) for v in line]
        except ValueError as exc:
            if first:
                first = False
                continue  # column header
            raise ValidationError(f"cannot parse sample row {line}") from exc
        first = False
        if len(vals) != 4:
            raise ValidationError("sample rows need 4 columns: re lambda, im lambda, re sigma, im sigma")
        rows.append(SpectralSample(complex(vals[0], vals[1]), complex(vals[2], vals[3])))
    return rows


def cmd_recover(args) -> int:
    from .recovery import recover_spectrum
    samples = _read_samples(args.samples)
    head = _header(args)
    res = recover_spectrum(samples, args.k)
    _emit(args, dumps({"header": head, **res.to_json()}) + "\n")
    return 0


def cmd_truncate_check(args) -> int:
    from .truncation import build_truncated_space, compare_expansions
    geom = _geometry(args)
    head = _header(args, geom)
    space = build_truncated_space(geom, args.M, rank_tol=args.rank_tol)
    d1 = parse_tensor(args.dir1).real
    d2 = parse_tensor(args.dir2).real
    cmp_ = compare_expansions(geom, args.M, d1, d2, space=space)
    rep = space.to_json()
    _emit(args, dumps({"header": head, "dim": rep["dim"], "raw_count": rep["raw_count"],
                       "closure_residuals": rep["closure_residuals"],
                       "expansion_discrepancy_by_order": cmp_["by_order"]}) + "\n")
    return 0


def _grid(spec: str, scale: str) -> np.ndarray:
    try:
        a, b, k = spec.split(":")
        a, b, k = float(a), float(b), int(k)
    except ValueError as exc:
        raise UsageError(f"grid must be start:stop:count, got {spec!r}") from exc
    if k < 1:
        raise UsageError("grid count must be positive")
    if scale == "log":
        if a <= 0 or b <= 0:
            raise UsageError("log grids need positive endpoints")
        return np.geomspace(a, b, k)
    return np.linspace(a, b, k)


def cmd_sweep(args) -> int:
    from . import effective_approx as ea
    grid = _grid(args.grid, args.scale)
    base = parse_list(args.lam, 3)
    idx = {"lambda1": 0, "lambda2": 1, "lambda3": 2}[args.variable]
    if args.rep:
        rep = _load_rep(args.rep)
        geom = None

        def point(x):
            t = list(base)
            t[idx] = x
            return ea.sigma_diag_theorem1(rep, None, t)
    elif args.geometry:
        from .field_space import AdmissiblePair
        from .reference_solver import solve_effective
        geom = _geometry(args)

        def point(x):
            t = list(base)
            t[idx] = x
            pair = AdmissiblePair(np.diag(t[:2]), t[2] * np.eye(2))
            return solve_effective(geom, pair, tol=args.tol).sigma_star
    else:
        raise UsageError("sweep needs --rep or --geometry")
    head = _header(args, geom)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(point, grid))
    buf = io.StringIO()
    buf.write(f"# {SWEEP_SCHEMA} version={head['version']} config={head['config_hash']} "
              f"geometry={head['geometry_hash']} variable={args.variable}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_lambda", "im_lambda", "re_s11", "im_s11", "re_s12", "im_s12",
                "re_s21", "im_s21", "re_s22", "im_s22"])
    for x, s in zip(grid, results):
        lam = complex(x)
        vals = [lam.real, lam.imag]
        for v in np.asarray(s).ravel():
            vals += [complex(v).real, complex(v).imag]
        w.writerow([format(v, ".17g") for v in vals])
    _emit(args, buf.getvalue())
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    head = _header(args)
    results = run_selftest()
    ok = all(r["passed"] for r in results)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}", file=sys.stderr)
    if args.output:
        write_atomic(args.output, dumps({"header": head, "results": results}) + "\n")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 0.5:
        raise argparse.ArgumentTypeError("must lie in (0, 0.5)")
    return v


def _small_positive(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="effcond", description="Effective conductivity of 2-D two-phase composites.")
    p.add_argument("--version", action="version", version=f"effcond {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def geo(sp):
        sp.add_argument("--geometry", required=True, help="JSON {n, chi, [mirror]} or 0/1 ASCII grid")
        sp.add_argument("--mirror", default=None, help="mirror offset or 'auto'")

    def out(sp):
        sp.add_argument("-o", "--output", default=None, help="output file (default stdout)")

    sp = sub.add_parser("solve", help="oracle effective tensor")
    geo(sp)
    sp.add_argument("--sigma1", required=True, help="'a11,a12,a21,a22'")
    sp.add_argument("--sigma2", required=True)
    sp.add_argument("--tol", type=_small_positive, default=1e-10)
    out(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("represent", help="extract a canonical rep")
    geo(sp)
    sp.add_argument("--half-m", type=_positive_int, default=None)
    sp.add_argument("--eps", type=_unit_interval, default=1e-10)
    sp.add_argument("--rank-tol", type=_small_positive, default=1e-8)
    sp.add_argument("--no-dilate", action="store_true", help="round fractional compressions instead")
    out(sp)
    sp.set_defaults(func=cmd_represent)

    sp = sub.add_parser("approx", help="evaluate sigma* or L* from a rep")
    sp.add_argument("--rep", required=True)
    sp.add_argument("--lambda", dest="lam", default=None, help="'l1,l2,l3' for Theorem 1")
    sp.add_argument("--sigma1", default=None)
    sp.add_argument("--sigma2", default=None)
    sp.add_argument("--pair", default=None, help="JSON {sigma1, sigma2}")
    sp.add_argument("--coupled", default=None, help="JSON {L1, L2}, each 4 x 4")
    out(sp)
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("laminate", help="polycrystal hierarchical laminate")
    sp.add_argument("--program", required=True)
    out(sp)
    sp.set_defaults(func=cmd_laminate)

    sp = sub.add_parser("recover", help="fit (rho, beta^2) to sigma*_11(1, 1, lambda) samples")
    sp.add_argument("--samples", required=True, help="CSV: re lambda, im lambda, re sigma, im sigma")
    sp.add_argument("--k", type=_positive_int, required=True)
    out(sp)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("truncate-check", help="build and verify a truncated space")
    geo(sp)
    sp.add_argument("--M", type=_positive_int, default=2)
    sp.add_argument("--rank-tol", type=_small_positive, default=1e-10)
    sp.add_argument("--dir1", default="1,0.3,0.3,0.5")
    sp.add_argument("--dir2", default="-0.4,0,0,0.7")
    out(sp)
    sp.set_defaults(func=cmd_truncate_check)

    sp = sub.add_parser("sweep", help="sigma* over a grid of one lambda")
    sp.add_argument("--rep", default=None)
    sp.add_argument("--geometry", default=None)
    sp.add_argument("--mirror", default=None)
    sp.add_argument("--variable", choices=["lambda1", "lambda2", "lambda3"], default="lambda3")
    sp.add_argument("--grid", required=True, help="start:stop:count")
    sp.add_argument("--scale", choices=["lin", "log"], default="log")
    sp.add_argument("--lambda", dest="lam", default="1,1,1", help="fixed values of the other lambdas")
    sp.add_argument("--tol", type=_small_positive, default=1e-10)
    out(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("selftest", help="quick end-to-end checks")
    out(sp)
    sp.set_defaults(func=cmd_selftest)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 1
    except EffcondError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"error (LinAlgError): {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
