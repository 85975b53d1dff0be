"""Command-line front end driven by a single JSON configuration file.

Usage::

    conetrace <subcommand> --config path [--out dir] [--threads N] [-v]

Subcommands are ``spectrum``, ``ellipticity``, ``trace``, ``fit``, ``wp``
and ``report`` (trace followed by fit).  Outputs are written to the output
directory as CSV and JSON; every file records the SHA-256 of the canonical
configuration and the package version.  Exit codes: 0 on success
(including a negative verdict), 1 on a numerical failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from ._errors import ConeTraceError, ConfigError
from ._io import config_hash, format_number, read_csv, write_csv, write_json

log = logging.getLogger("conetrace")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

SUBCOMMANDS = ("spectrum", "ellipticity", "trace", "fit", "wp", "report")

_TOP_KEYS = {"operator", "cross_section", "sector", "gamma", "strip", "mode_cap", "eigenvalues",
             "t_grid", "dunford", "basis", "fit", "wp", "tolerances", "output_dir"}
_TOLERANCE_KEYS = {"tail", "weight", "wp", "max_condition", "dunford"}
_DEFAULT_TOLERANCES = {"tail": 1e-10, "weight": 1e-10, "wp": 1e-8, "max_condition": 1e12,
                       "dunford": 1e-13}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _section(data, name: str, allowed: set) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"'{name}' must be an object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(unknown)}")
    return data


def _number(value, name: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{name}' must be a number")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"'{name}' must be a {'positive ' if positive else ''}finite number")
    return value


def _integer(value, name: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"'{name}' must lie in [{lo}, {hi}]")
    return value


@dataclass
class RunConfig:
    """Validated run configuration; see the README for the schema."""

    raw: dict
    base_dir: Path
    operator: dict = field(default_factory=dict)
    cross_section: dict = field(default_factory=lambda: {"type": "circle", "c": 1.0})
    sector: dict = field(default_factory=lambda: {"phi": math.pi / 4, "delta": 0.5})
    gamma: float = 0.5
    strip: tuple | None = None
    mode_cap: int | None = None
    eigenvalues: dict = field(default_factory=lambda: {"mode": "exact", "lambda_max": 45000.0})
    t_grid: dict = field(default_factory=lambda: {"min": 1e-3, "max": 0.05, "count": 40})
    dunford: bool = True
    basis: dict = field(default_factory=lambda: {"m": 2, "n": 1, "K": 5, "K_log": 0})
    fit: dict = field(default_factory=dict)
    wp: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    output_dir: str | None = None

    @property
    def digest(self) -> str:
        return config_hash(self.raw)

    @classmethod
    def from_dict(cls, data, base_dir=".") -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a JSON object")
        _section(data, "config", _TOP_KEYS)
        cfg = cls(raw=data, base_dir=Path(base_dir))

        op = _section(data.get("operator"), "operator",
                      {"type", "sign", "G_profile", "truncation_order", "file",
                       "order", "coefficients", "label"})
        cfg.operator = {"type": "cone_laplacian", "sign": "geometer", **op}
        if cfg.operator["type"] not in ("cone_laplacian", "fuchs"):
            raise ConfigError("operator.type must be 'cone_laplacian' or 'fuchs'")

        if "cross_section" in data:
            cs = _section(data["cross_section"], "cross_section", {"type", "c", "n", "eigenvalues"})
            cfg.cross_section = dict(cs)
            kind = cs.get("type", "circle")
            if kind == "circle":
                _number(cs.get("c", 1.0), "cross_section.c", positive=True)
            elif kind == "explicit":
                _integer(cs.get("n"), "cross_section.n", lo=1)
                if not isinstance(cs.get("eigenvalues"), list) or not cs["eigenvalues"]:
                    raise ConfigError("cross_section.eigenvalues must be a nonempty list")
            else:
                raise ConfigError("cross_section.type must be 'circle' or 'explicit'")

        if "sector" in data:
            sec = _section(data["sector"], "sector", {"phi", "delta"})
            cfg.sector = {"phi": _number(sec.get("phi", math.pi / 4), "sector.phi"),
                          "delta": _number(sec.get("delta", 0.5), "sector.delta", positive=True)}
            if not 0 < cfg.sector["phi"] < math.pi / 2:
                raise ConfigError("sector.phi must lie in (0, pi/2)")
        if "gamma" in data:
            cfg.gamma = _number(data["gamma"], "gamma")
        if data.get("strip") is not None:
            strip = data["strip"]
            if not isinstance(strip, list) or len(strip) != 2:
                raise ConfigError("strip must be a list [lo, hi]")
            lo, hi = (_number(v, "strip") for v in strip)
            if lo > hi:
                raise ConfigError("strip edges must be ordered")
            cfg.strip = (lo, hi)
        if data.get("mode_cap") is not None:
            cfg.mode_cap = _integer(data["mode_cap"], "mode_cap", lo=1)

        if "eigenvalues" in data:
            ev = _section(data["eigenvalues"], "eigenvalues",
                          {"mode", "lambda_max", "file", "grid_size", "count"})
            mode = ev.get("mode", "exact")
            if mode == "exact":
                _number(ev.get("lambda_max", 45000.0), "eigenvalues.lambda_max", positive=True)
            elif mode == "fd":
                _integer(ev.get("grid_size", 4096), "eigenvalues.grid_size", lo=64)
                _integer(ev.get("count", 10), "eigenvalues.count", lo=1)
            elif mode == "list":
                if not isinstance(ev.get("file"), str):
                    raise ConfigError("eigenvalues.file is required in list mode")
            else:
                raise ConfigError("eigenvalues.mode must be 'exact', 'fd' or 'list'")
            cfg.eigenvalues = {"mode": mode, **ev}

        if "t_grid" in data:
            tg = _section(data["t_grid"], "t_grid", {"min", "max", "count", "values"})
            if "values" in tg:
                if not isinstance(tg["values"], list) or not tg["values"]:
                    raise ConfigError("t_grid.values must be a nonempty list")
                for v in tg["values"]:
                    _number(v, "t_grid.values", positive=True)
            else:
                lo = _number(tg.get("min", 1e-3), "t_grid.min", positive=True)
                hi = _number(tg.get("max", 0.05), "t_grid.max", positive=True)
                _integer(tg.get("count", 40), "t_grid.count", lo=2)
                if lo >= hi:
                    raise ConfigError("t_grid.min must be below t_grid.max")
            cfg.t_grid = dict(tg)
        if "dunford" in data:
            if not isinstance(data["dunford"], bool):
                raise ConfigError("dunford must be true or false")
            cfg.dunford = data["dunford"]

        if "basis" in data:
            b = _section(data["basis"], "basis", {"m", "n", "K", "K_log"})
            cfg.basis = {"m": _integer(b.get("m", 2), "basis.m", lo=1),
                         "n": _integer(b.get("n", 1), "basis.n", lo=1),
                         "K": _integer(b.get("K", 5), "basis.K", lo=1),
                         "K_log": _integer(b.get("K_log", 0), "basis.K_log", lo=0)}
        cfg.fit = dict(_section(data.get("fit"), "fit", {"input", "weighting", "n_terms"}))
        if cfg.fit.get("weighting", "relative") not in ("relative", "none"):
            raise ConfigError("fit.weighting must be 'relative' or 'none'")
        if cfg.fit.get("n_terms") is not None:
            _integer(cfg.fit["n_terms"], "fit.n_terms", lo=0, hi=cfg.basis["K"])

        wp = _section(data.get("wp"), "wp", {"symbol", "K", "points", "N", "method", "moduli"})
        sym = _section(wp.get("symbol", {}), "wp.symbol", {"type", "power", "d", "offset"})
        if sym.get("type", "resolvent") != "resolvent":
            raise ConfigError("wp.symbol.type must be 'resolvent'")
        from .weakly_parametric import MAX_COEFFICIENTS
        cfg.wp = {
            "symbol": {"type": "resolvent",
                       "power": _integer(sym.get("power", 1), "wp.symbol.power", lo=1),
                       "d": _integer(sym.get("d", 2), "wp.symbol.d", lo=1),
                       "offset": _number(sym.get("offset", 0.0), "wp.symbol.offset")},
            "K": _integer(wp.get("K", 6), "wp.K", lo=1, hi=MAX_COEFFICIENTS),
            "points": wp.get("points", [[1.0, 1.0]]),
            "N": wp.get("N", [0, 2, 4]),
            "method": wp.get("method", "auto"),
            "moduli": wp.get("moduli"),
        }
        if cfg.wp["method"] not in ("auto", "cauchy", "sector"):
            raise ConfigError("wp.method must be 'auto', 'cauchy' or 'sector'")
        for N in cfg.wp["N"]:
            _integer(N, "wp.N", lo=0, hi=cfg.wp["K"])
        for pt in cfg.wp["points"]:
            if not isinstance(pt, list) or len(pt) != 2:
                raise ConfigError("wp.points entries must be [xi, rho]")

        tol = _section(data.get("tolerances"), "tolerances", _TOLERANCE_KEYS)
        cfg.tolerances = {**_DEFAULT_TOLERANCES,
                          **{k: _number(v, f"tolerances.{k}", positive=True) for k, v in tol.items()}}
        if data.get("output_dir") is not None:
            if not isinstance(data["output_dir"], str):
                raise ConfigError("output_dir must be a string")
            cfg.output_dir = data["output_dir"]
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"configuration file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(data, path.parent)

    def resolve(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p

    # -- builders -----------------------------------------------------------

    def build_cross_section(self):
        from .spectral import CrossSection
        try:
            return CrossSection.from_json(self.cross_section)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid cross_section: {exc}") from exc

    def build_operator(self, cs):
        from .fuchs_algebra import FuchsOperator, build_cone_laplacian
        op = dict(self.operator)
        try:
            if "file" in op:
                data = json.loads(self.resolve(op["file"]).read_text(encoding="utf-8"))
                return FuchsOperator.from_json(data)
            if op["type"] == "fuchs":
                body = {k: op[k] for k in ("order", "coefficients", "label", "sign",
                                           "truncation_order") if k in op}
                return FuchsOperator.from_json(body)
            return build_cone_laplacian(cs, op.get("G_profile"), op.get("sign", "geometer"),
                                        op.get("truncation_order", 16))
        except FileNotFoundError as exc:
            raise ConfigError(f"operator file not found: {exc.filename}") from exc
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"invalid operator: {exc}") from exc

    def build_sector(self):
        from .spectral import Sector
        return Sector(self.sector["phi"], self.sector["delta"])

    def t_values(self) -> list[float]:
        import numpy as np
        if "values" in self.t_grid:
            return sorted(float(v) for v in self.t_grid["values"])
        return [float(v) for v in np.geomspace(self.t_grid.get("min", 1e-3),
                                               self.t_grid.get("max", 0.05),
                                               self.t_grid.get("count", 40))]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _out_dir(cfg: RunConfig, override) -> Path:
    out = Path(override) if override else cfg.resolve(cfg.output_dir or "conetrace_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_spectrum(cfg: RunConfig, out: Path) -> dict:
    """Boundary spectrum in a strip and the weight-line verdict."""
    from .spectral import WeightLine, boundary_spectrum, check_weight_ellipticity
    cs = cfg.build_cross_section()
    A = cfg.build_operator(cs)
    beta = WeightLine(cfg.gamma, cs.n).real_part
    strip = cfg.strip or (beta - 4.0, beta + 4.0)
    entries = boundary_spectrum(A, cs, strip, mode_cap=cfg.mode_cap)
    elliptic, margin = check_weight_ellipticity(A, cs, cfg.gamma, tol=cfg.tolerances["weight"])
    rows = [(e.z.real, e.z.imag, e.mode_index, e.algebraic_multiplicity) for e in entries]
    write_csv(out / "spectrum.csv", ["re", "im", "mode_index", "multiplicity"], rows, cfg.digest)
    report = {
        "command": "spectrum",
        "strip": list(strip),
        "entries": [{"z": [r[0], r[1]], "mode_index": r[2], "multiplicity": r[3]} for r in rows],
        "weight_line": {"gamma": cfg.gamma, "real_part": beta},
        "elliptic": elliptic,
        "margin": margin,
    }
    write_json(out / "spectrum.json", report, cfg.digest)
    print(f"boundary spectrum in [{strip[0]:g}, {strip[1]:g}]: {len(entries)} points")
    for re, im, _, mult in rows:
        print(f"  z = {re:+.12g}{im:+.3g}i  multiplicity {mult}")
    verdict = "elliptic" if elliptic else "not elliptic"
    print(f"weight line Re z = {beta:g}: {verdict} (margin {margin:g})")
    return report


def cmd_ellipticity(cfg: RunConfig, out: Path) -> dict:
    """Parameter-ellipticity checks with respect to the configured sector and weight."""
    from .spectral import check_parameter_ellipticity
    cs = cfg.build_cross_section()
    A = cfg.build_operator(cs)
    rep = check_parameter_ellipticity(A, cs, cfg.build_sector(), cfg.gamma)
    report = {"command": "ellipticity", **rep.to_json()}
    write_json(out / "ellipticity.json", report, cfg.digest)
    for key in ("condition_i", "condition_ii", "condition_iii"):
        print(f"{key}: ok={report[key]['ok']} margin={report[key]['margin']:g}")
    print(f"overall: {'parameter-elliptic' if rep.overall else 'not certified'}")
    return report


def _eigenvalues(cfg: RunConfig):
    from .oracle import EigenvalueList, ModelCone, eigenvalues_exact_cone, eigenvalues_fd
    ev = cfg.eigenvalues
    if ev["mode"] == "list":
        path = cfg.resolve(ev["file"])
        if not path.exists():
            raise ConfigError(f"eigenvalue file not found: {path}")
        header, rows = read_csv(path)
        try:
            i_lam = header.index("lambda")
            i_mult = header.index("multiplicity") if "multiplicity" in header else None
            lam = [float(r[i_lam]) for r in rows]
            mult = [int(r[i_mult]) if i_mult is not None else 1 for r in rows]
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"malformed eigenvalue file {path}: {exc}") from exc
        lam_max = float(ev.get("lambda_max", math.inf))
        return EigenvalueList(lam, mult, lam_max)
    cs = cfg.build_cross_section()
    model = ModelCone(cs, cfg.build_operator(cs))
    if ev["mode"] == "fd":
        return eigenvalues_fd(model, ev.get("grid_size", 4096), ev.get("count", 10))
    return eigenvalues_exact_cone(model, float(ev.get("lambda_max", 45000.0)))


def _trace_rows(cfg: RunConfig):
    from .oracle import Contour, dunford_heat_trace, heat_trace_sum
    eigs = _eigenvalues(cfg)
    samples = heat_trace_sum(eigs, cfg.t_values())
    contour = Contour(cfg.sector["phi"], cfg.sector["delta"])
    tail_tol = cfg.tolerances["tail"]
    rows = []
    for s in samples:
        row = [s.t, s.value, s.tail_bound, "true" if s.tail_bound <= tail_tol else "false"]
        if cfg.dunford:
            d = dunford_heat_trace(eigs, contour, s.t, tol=cfg.tolerances["dunford"])
            row += [d, abs(d - s.value)]
        rows.append(row)
    header = ["t", "value", "tail_bound", "tail_ok"] + (["dunford", "dunford_diff"] if cfg.dunford else [])
    return samples, header, rows


def cmd_trace(cfg: RunConfig, out: Path) -> dict:
    """Heat trace over the t-grid, optionally cross-checked by the contour integral."""
    samples, header, rows = _trace_rows(cfg)
    write_csv(out / "trace.csv", header, rows, cfg.digest)
    bad = sum(1 for r in rows if r[3] == "false")
    print(f"heat trace: {len(rows)} samples, {bad} above the tail tolerance")
    if cfg.dunford:
        print(f"contour cross-check: max difference {max(r[5] for r in rows):.3g}")
    return {"command": "trace", "rows": len(rows), "tail_failures": bad}


def _read_samples(path: Path):
    from .oracle import HeatTraceSample
    if not path.exists():
        raise ConfigError(f"trace file not found: {path}")
    header, rows = read_csv(path)
    try:
        it, iv = header.index("t"), header.index("value")
        ib = header.index("tail_bound") if "tail_bound" in header else None
        return [HeatTraceSample(float(r[it]), float(r[iv]), float(r[ib]) if ib is not None else 0.0)
                for r in rows]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed trace file {path}: {exc}") from exc


def _fit_report(cfg: RunConfig, samples) -> dict:
    from .expansion import ExpansionBasis, fit_heat_trace, residual_order
    b = cfg.basis
    basis = ExpansionBasis(b["m"], b["n"], b["K"], b["K_log"])
    fit = fit_heat_trace(samples, basis, cfg.fit.get("weighting", "relative"),
                         tail_tol=cfg.tolerances["tail"],
                         max_condition=cfg.tolerances["max_condition"])
    # default: subtract the two leading terms, so the slope estimates the third exponent
    n_terms = cfg.fit.get("n_terms", 2 if b["K"] > 2 else None)
    res = residual_order(samples, fit, n_terms=n_terms)
    report = {"command": "fit", "basis": basis.to_json(), **fit.to_json(res.slope),
              "residual": {"status": res.status, "slope": res.slope, "expected": res.expected,
                           "n_terms": n_terms}}
    if cfg.cross_section.get("type", "circle") == "circle" and cfg.operator["type"] == "cone_laplacian" \
            and b["m"] == 2 and b["n"] == 1:
        c = float(cfg.cross_section.get("c", 1.0))
        report["reference"] = {"area_term": c / 4, "boundary_term": -math.sqrt(math.pi) * c / 4}
    return report


def cmd_fit(cfg: RunConfig, out: Path) -> dict:
    """Fit the small-time expansion to a trace file (or to freshly computed samples)."""
    if cfg.fit.get("input"):
        samples = _read_samples(cfg.resolve(cfg.fit["input"]))
    else:
        samples, _, _ = _trace_rows(cfg)
    report = _fit_report(cfg, samples)
    write_json(out / "fit.json", report, cfg.digest)
    for e, c in zip(report["exponents"], report["coefficients"]):
        print(f"  t^{e:+g}: {c:.12g}")
    print(f"residual slope: {report['residual']['slope']} (expected {report['residual']['expected']})")
    return report


def cmd_wp(cfg: RunConfig, out: Path) -> dict:
    """Weakly parametric coefficients of the configured symbol, with remainder slopes."""
    from .weakly_parametric import resolvent_symbol, wp_coefficients, wp_remainder_order
    w = cfg.wp
    sym = resolvent_symbol(w["symbol"]["power"], w["symbol"]["d"], w["symbol"]["offset"],
                           cfg.build_sector())
    points = [([float(v) for v in (p[0] if isinstance(p[0], list) else [p[0]])], float(p[1]))
              for p in w["points"]]
    table = wp_coefficients(sym, w["K"], points=points, method=w["method"], tol=cfg.tolerances["wp"])
    rows = [[k, ";".join(format_number(x) for x in xi), rho, re, im, err]
            for k, xi, rho, re, im, err in table.rows()]
    write_csv(out / "wp.csv", ["k", "xi", "rho", "re", "im", "err"], rows, cfg.digest)
    remainders = []
    for N in w["N"]:
        r = wp_remainder_order(sym, table, N, moduli=w["moduli"])
        remainders.append({"N": N, "status": r.status,
                           "slope": None if math.isnan(r.slope) else r.slope,
                           "expected": r.expected})
    report = {"command": "wp", "method": table.method, "shift": table.shift, "d": table.d,
              "converged": table.all_converged, "remainders": remainders}
    write_json(out / "wp.json", report, cfg.digest)
    for k, _, _, re, im, err in table.rows():
        print(f"  h_{k} = {re:+.15g} {im:+.3g}i  (err {err:.2g})")
    for r in remainders:
        print(f"  N={r['N']}: {r['status']} slope {r['slope']} (expected {r['expected']:g})")
    return report


def cmd_report(cfg: RunConfig, out: Path) -> dict:
    """Trace followed by fit, with both outputs and a combined summary."""
    samples, header, rows = _trace_rows(cfg)
    write_csv(out / "trace.csv", header, rows, cfg.digest)
    fit = _fit_report(cfg, samples)
    write_json(out / "fit.json", fit, cfg.digest)
    summary = {"command": "report", "trace_rows": len(rows), "fit": fit}
    write_json(out / "report.json", summary, cfg.digest)
    print(f"report: {len(rows)} trace samples; leading coefficient {fit['coefficients'][0]:.12g}")
    return summary


_COMMANDS = {"spectrum": cmd_spectrum, "ellipticity": cmd_ellipticity, "trace": cmd_trace,
             "fit": cmd_fit, "wp": cmd_wp, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conetrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conetrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_COMMANDS[name].__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP worker threads")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = RunConfig.load(args.config)
        out = _out_dir(cfg, args.out)
        log.info("config sha256 %s", cfg.digest)
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                _COMMANDS[args.command](cfg, out)
        else:
            _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConeTraceError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
