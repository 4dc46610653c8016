"""Command-line entry point: ``haplitz {fourier,verify,hankelness,diagnose,normalize}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import compactness as cp
from . import hankelness as hk
from . import mobius
from . import quadrature
from . import symbols as sym
from . import wordalg as wa

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2

log = logging.getLogger("haplitz")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


@dataclass
class RunConfig:
    """Resolved options for one run: flags first, then the config file on top."""

    command: str
    options: dict[str, Any]
    seed: int = 0
    emit: str = "csv"
    out: str | None = None
    workers: int = 1
    timings: dict[str, float] = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None

    @contextmanager
    def step(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            dt = time.perf_counter() - t0
            self.timings[name] = self.timings.get(name, 0.0) + dt
            log.info(json.dumps({"step": name, "seconds": round(dt, 6)}))


# --------------------------------------------------------------------------
# argument helpers


def parse_range(text: str) -> list[float]:
    """``a:b:count`` (inclusive linspace) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be a:b:count")
        a, b, c = float(parts[0]), float(parts[1]), int(parts[2])
        if c < 1:
            raise ConfigError(f"range {text!r} needs a positive count")
        return [float(x) for x in np.linspace(a, b, c)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_int_range(text: str) -> list[int]:
    text = str(text).strip()
    if ":" in text:
        a, b = (int(x) for x in text.split(":", 1))
        if b < a:
            raise ConfigError(f"empty degree range {text!r}")
        return list(range(a, b + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def parse_point(text) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}") from exc


def _as_list(v, conv: Callable[[str], list]) -> list:
    if isinstance(v, (list, tuple)):
        return [float(x) if not isinstance(x, str) else x for x in v]
    return conv(v)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _load_symbol(path: str) -> sym.MatrixSymbol:
    try:
        return sym.load_symbol(path)
    except (OSError, json.JSONDecodeError, sym.SymbolError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load symbol {path}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, np.ndarray):
        return _matrix(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _matrix(A: np.ndarray) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _factor_json(s: sym.MatrixSymbol, window: int = 64) -> dict:
    """Coefficient list of a possibly rectangular factor; tails are cut to ``|k| <= window``."""
    lo, hi = s.support_bounds()
    exact = lo is not None and hi is not None
    lo = -window if lo is None else lo
    hi = window if hi is None else hi
    terms = []
    if hi >= lo:
        for j, c in enumerate(s.window(lo, hi)):
            if np.any(c):
                terms.append({"k": lo + j, **_matrix(c)})
    return {"shape": list(s.shape), "terms": terms, "exact": exact}


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


# --------------------------------------------------------------------------
# subcommands


def cmd_fourier(cfg: RunConfig) -> int:
    s = _load_symbol(cfg.symbol)
    ks = parse_int_range(cfg.k)
    with cfg.step("coefficients"):
        C = s.coeffs(np.asarray(ks))
    check = None
    if cfg.quadrature:
        with cfg.step("quadrature"):
            vals, m = quadrature.adaptive_coefficients(s.sample, np.asarray(ks), tol=cfg.tol)
        check = (vals, m)
    ext = None
    if cfg.at is not None:
        with cfg.step("harmonic_extension"):
            ext = sym.harmonic_ext(s, parse_point(cfg.at))
    if cfg.emit == "json":
        out = {"n": s.n, "coefficients": [{"k": k, **_matrix(C[i])} for i, k in enumerate(ks)]}
        if check is not None:
            out["quadrature_nodes"] = check[1]
            out["quadrature_max_diff"] = float(np.max(np.abs(check[0] - C))) if len(ks) else 0.0
        if ext is not None:
            out["harmonic_extension"] = {"z": parse_point(cfg.at), **_matrix(ext)}
        _write(cfg, _json_text(out))
        return EXIT_OK
    header = ["k", "row", "col", "re", "im"] + (["quad_re", "quad_im"] if check else [])
    rows = []
    p, q = s.shape
    for i, k in enumerate(ks):
        for a in range(p):
            for b in range(q):
                row = [k, a, b, float(C[i, a, b].real), float(C[i, a, b].imag)]
                if check:
                    v = check[0][i, a, b]
                    row += [float(v.real), float(v.imag)]
                rows.append(row)
    _write(cfg, _csv_text(header, rows))
    return EXIT_OK


def _verify_draw(seed: int, n: int, deg: int, N: int, margin: int, points, names) -> list:
    rng = np.random.default_rng(seed)
    env = {k: sym.random_laurent(rng, n, deg, -deg, deg, 1.0) for k in ("a", "b", "c", "d")}
    reports = []
    for z in points:
        for name in names:
            reports.append(mobius.verify_identity(name, env, z, N, margin, seed=seed))
    return reports


def cmd_verify(cfg: RunConfig) -> int:
    names = list(cfg.identities or mobius.ACCEPTANCE_IDENTITIES)
    unknown = [x for x in names if x not in mobius.REGISTRY]
    if unknown:
        raise ConfigError(f"unknown identities {unknown}; known {sorted(mobius.REGISTRY)}")
    if cfg.N <= cfg.margin or cfg.n < 1 or cfg.deg < 0:
        raise ConfigError("need N > margin, n >= 1 and deg >= 0")
    points = [parse_point(p) for p in _as_list(cfg.z, lambda t: [x for x in str(t).split(",") if x])]
    for z in points:
        if abs(z) >= 1:
            raise ConfigError(f"point {z} is not inside the disk")
    seeds = [cfg.seed + i for i in range(cfg.draws)]
    with cfg.step("identities"):
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                batches = list(pool.map(lambda s: _verify_draw(s, cfg.n, cfg.deg, cfg.N, cfg.margin, points, names),
                                        seeds))
        else:
            batches = [_verify_draw(s, cfg.n, cfg.deg, cfg.N, cfg.margin, points, names) for s in seeds]
    reports = [r for b in batches for r in b]
    ok = all(r.passed for r in reports)
    if cfg.emit == "json":
        _write(cfg, _json_text({
            "passed": ok,
            "results": [{"identity": r.name, "seed": r.seed, "z": r.z, "N": r.N, "window": list(r.window),
                         "residual": r.residual, "verdict": r.verdict} for r in reports],
        }))
    else:
        rows = [[r.name, r.seed, _fmt_z(r.z), r.N, f"{r.window[0]}:{r.window[1]}", r.residual, r.verdict]
                for r in reports]
        _write(cfg, _csv_text(["identity", "seed", "z", "N", "window", "residual", "verdict"], rows))
    return EXIT_OK if ok else EXIT_PARTIAL


def _fmt_z(z: complex) -> str:
    return f"{z.real:g}{z.imag:+g}j"


def cmd_hankelness(cfg: RunConfig) -> int:
    phi = _load_symbol(cfg.phi)
    psi = _load_symbol(cfg.psi)
    if phi.n != psi.n:
        raise ConfigError(f"block sizes differ: {phi.n} vs {psi.n}")
    d = cfg.d if cfg.d is not None else 1.0
    with cfg.step("feasibility"):
        res = hk.find_feasible_A(phi, psi, d=d, degree_cap=cfg.degree_cap)
    out: dict[str, Any] = {"verdict": res.verdict, "d": d}
    if isinstance(res, hk.Feasible):
        with cfg.step("product_check"):
            resid, defect = hk.product_window_check(phi, psi, res.A.A, degree=cfg.degree_cap)
        out.update(A=_matrix(res.A.A), residual_x=res.residual_x, residual_y=res.residual_y,
                   route=res.route, product_residual=resid, hankel_defect=defect)
    else:
        out.update(margin=res.margin, attained=res.attained, A_best=_matrix(res.A_best), gap=res.gap)
    if res.truncated_mass:
        out["truncated_mass"] = res.truncated_mass
    if cfg.decompose:
        with cfg.step("decomposition"):
            dec = hk.huw_decompose(phi, psi, degree_cap=cfg.degree_cap)
        if isinstance(dec, hk.HuwDecomposition):
            payload = {
                "l": dec.l, "D": _matrix(dec.D), "condition": dec.condition,
                **{k: (_factor_json(v) if v is not None else None)
                   for k, v in (("U1", dec.U1), ("W1", dec.W1), ("W2", dec.W2), ("U2", dec.U2))},
            }
        else:
            payload = {"verdict": dec.verdict, "margin": dec.margin}
        Path(cfg.decompose).write_text(_json_text(payload))
    if cfg.emit == "json":
        _write(cfg, _json_text(out))
    else:
        rows = []
        for key, val in out.items():
            if isinstance(val, dict):
                A = np.array(val["re"]) + 1j * np.array(val["im"])
                for (i, j), v in np.ndenumerate(A):
                    rows.append([f"{key}[{i},{j}]", complex(v)])
            else:
                rows.append([key, val])
        _write(cfg, _csv_text(["field", "value"], rows))
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    phi = _load_symbol(cfg.phi)
    psi = _load_symbol(cfg.psi)
    if phi.n != psi.n:
        raise ConfigError(f"block sizes differ: {phi.n} vs {psi.n}")
    if cfg.n is not None and int(cfg.n) != phi.n:
        raise ConfigError(f"config says n={cfg.n} but the symbols have n={phi.n}")
    rays = _as_list(cfg.rays, parse_range)
    radii = _as_list(cfg.radii, parse_range)
    which = cfg.which if isinstance(cfg.which, (list, tuple)) else [w for w in str(cfg.which).split(",") if w]
    bad = [w for w in which if w not in cp.QUANTITIES]
    if bad:
        raise ConfigError(f"unknown quantities {bad}; choose from {list(cp.QUANTITIES)}")
    try:
        grid = cp.SweepGrid(tuple(rays), tuple(radii))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with cfg.step("sweep"):
        report = cp.radial_sweep(phi, psi, grid, which, d=cfg.d, seed=cfg.seed, workers=cfg.workers,
                                 starts=cfg.starts)
    rows = [r.csv_values() for r in report.rows]
    summary = report.summary()
    summary["errors"] = [{"theta": r.theta, "r": r.r, "error": r.error} for r in report.failures]
    if cfg.emit == "json":
        _write(cfg, _json_text({
            "rows": [dict(zip(cp.DiagnosticRow.CSV_FIELDS, map(_nan_to_none, v))) for v in rows],
            "summary": _clean(summary),
        }))
    else:
        _write(cfg, _csv_text(cp.DiagnosticRow.CSV_FIELDS, rows))
    if cfg.summary:
        Path(cfg.summary).write_text(_json_text(_clean(summary)))
    return EXIT_PARTIAL if report.failures else EXIT_OK


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return _nan_to_none(obj)


def cmd_normalize(cfg: RunConfig) -> int:
    try:
        ws = wa.parse(cfg.word)
    except wa.WordError as exc:
        raise ConfigError(f"cannot parse word: {exc}") from exc
    rng = np.random.default_rng(cfg.seed)
    with cfg.step("normalize"):
        nf = wa.normalize(ws, cfg.strategy, rng)
    residual = None
    if not cfg.no_certify:
        names = sorted(set().union(*(wa.names_of(a.expr) for _, w in ws for a in w.atoms)))
        env = {k: sym.random_laurent(rng, cfg.n, cfg.deg, -cfg.deg, cfg.deg, 1.0) for k in names}
        with cfg.step("certify"):
            _, residual = wa.certify(ws, env, cfg.N, cfg.strategy, rng)
    parity = sorted({wa.h_parity(w) for _, w in ws})
    if cfg.emit == "json":
        _write(cfg, _json_text({
            "input": wa.pretty(ws), "normal_form": wa.pretty(nf), "words": len(nf),
            "parity": parity, "residual": residual,
        }))
    else:
        rows = [[_fmt_coef(c), str(w), wa.h_parity(w)] for c, w in nf]
        text = _csv_text(["coefficient", "word", "parity"], rows)
        if residual is not None:
            text += f"# residual={residual!r}\n"
        text += f"# normal_form={wa.pretty(nf)}\n"
        _write(cfg, text)
    return EXIT_OK


def _fmt_coef(c: complex) -> str:
    return repr(c.real) if c.imag == 0 else repr(c)


# --------------------------------------------------------------------------
# parser and dispatch

COMMANDS = {
    "fourier": cmd_fourier,
    "verify": cmd_verify,
    "hankelness": cmd_hankelness,
    "diagnose": cmd_diagnose,
    "normalize": cmd_normalize,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--emit", choices=("json", "csv"), default="csv", help="output format (default csv)")
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the main output here instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="log step timings to stderr")

    p = _Parser(prog="haplitz", description="Block Toeplitz and Hankel operator toolkit.")
    p.add_argument("--version", action="version", version=f"haplitz {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fourier", parents=[common], help="Fourier coefficients of a symbol file")
    f.add_argument("symbol")
    f.add_argument("--k", default="-4:4", help="degrees as lo:hi or a comma list")
    f.add_argument("--quadrature", action="store_true", help="add a trapezoid cross-check")
    f.add_argument("--tol", type=float, default=1e-12)
    f.add_argument("--at", help="also report the harmonic extension at this point, e.g. 0.3+0.4j")

    v = sub.add_parser("verify", parents=[common], help="run the operator identity suite on random symbols")
    v.add_argument("--n", type=int, default=2)
    v.add_argument("--deg", type=int, default=3)
    v.add_argument("--N", type=int, default=64)
    v.add_argument("--margin", type=int, default=16)
    v.add_argument("--draws", type=int, default=1)
    v.add_argument("--z", default="0,0.5,0.3+0.4j", help="comma-separated disk points")
    v.add_argument("--identities", nargs="*", help=f"subset of {sorted(mobius.REGISTRY)}")

    h = sub.add_parser("hankelness", parents=[common], help="decide whether H_Phi T_Psi is a Hankel operator")
    h.add_argument("phi")
    h.add_argument("psi")
    h.add_argument("--d", type=float, default=None, help="entry bound for A (default 1)")
    h.add_argument("--degree-cap", type=int, default=None)
    h.add_argument("--decompose", help="write the analytic factorization as JSON to this path")

    d = sub.add_parser("diagnose", parents=[common], help="compactness diagnostics along rays")
    d.add_argument("phi")
    d.add_argument("psi")
    d.add_argument("--rays", default="0")
    d.add_argument("--radii", default="0.5:0.99:10", help="a:b:count or a comma list")
    d.add_argument("--which", default="c1,c2,gamma1,gamma2,omega,product_kernel")
    d.add_argument("--n", type=int, default=None)
    d.add_argument("--d", type=float, default=None, help="box bound (default 2^(2n))")
    d.add_argument("--starts", type=int, default=5)
    d.add_argument("--summary", help="write the per-ray trend summary as JSON here")

    w = sub.add_parser("normalize", parents=[common], help="rewrite a Toeplitz/Hankel word to normal form")
    w.add_argument("word", help="e.g. 'H(a)*T(b~)*H(c*)'")
    w.add_argument("--strategy", choices=wa.STRATEGIES, default="leftmost")
    w.add_argument("--n", type=int, default=2)
    w.add_argument("--deg", type=int, default=3)
    w.add_argument("--N", type=int, default=32)
    w.add_argument("--no-certify", action="store_true")
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    opts = dict(vars(args))
    if opts.get("config"):
        overrides = _load_config(opts["config"])
        aliases = {"degree-cap": "degree_cap", "no-certify": "no_certify"}
        for key, val in overrides.items():
            key = aliases.get(key, key)
            if key not in opts or key in ("command", "config"):
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            opts[key] = val
    command = opts.pop("command")
    seed = int(opts.get("seed", 0))
    emit = opts.get("emit", "csv")
    if emit not in ("json", "csv"):
        raise ConfigError(f"emit must be json or csv, not {emit!r}")
    for key in ("tol",):
        if key in opts and not float(opts[key]) > 0:
            raise ConfigError(f"{key} must be positive")
    return RunConfig(command, opts, seed=seed, emit=emit, out=opts.get("out"), workers=cp.default_workers())


def main(argv: Sequence[str] | None = None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(handler)
    log.propagate = False
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        cfg = make_config(args)
        code = COMMANDS[cfg.command](cfg)
        log.info(json.dumps({"command": cfg.command, "exit": code,
                             "timings": {k: round(v, 6) for k, v in cfg.timings.items()}}))
        return code
    except ConfigError as exc:
        print(f"haplitz: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (sym.SymbolError, wa.WordError, hk.HankelnessError, ValueError) as exc:
        print(f"haplitz: failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    finally:
        log.removeHandler(handler)

if __name__ == "__main__":
    raise SystemExit(main())
