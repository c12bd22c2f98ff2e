"""Command line interface: config loading, subcommand dispatch, CSV output.

All outputs are deterministic data-only CSV/JSON files; rerunning a
subcommand with the same config and seed reproduces them byte for byte,
independent of the worker-count flag (parallelism stays inside the
numerical kernels).  Exit codes: 0 success, 1 a verification reported
failures, 2 configuration error (the message names the offending key).
"""

import argparse
import json
import os
import sys

import numpy as np

from .geometry import GeometryParams, TFGrid
from .embeddings import (
    StoppingSequence,
    embed_energy,
    embed_mass,
    embed_var_mass_sup,
    embed_aux,
)
from .sizes import SizeSpec
from .outer import outer_lp, iter_lp_lq, cover_superlevel_aux
from .operators import carleson, var_carleson, TruncationLadder, var_truncation
from . import harness
from .harness import Ensemble, Exponents, stability_strips, write_report

__all__ = ["RunConfig", "ConfigError", "run", "main"]

ENV_OUTDIR = "TFOUTER_OUTDIR"

_GEOMETRY_KEYS = (
    "alpha_minus", "beta_minus", "beta_plus", "alpha_plus", "d", "d_prime",
    "d_dblprime", "eps", "b", "decay_N", "R0",
)
_GRID_KEYS = ("y_range", "n_y", "eta_range", "n_eta", "t_range", "n_t")

_DEFAULTS = {
    "geometry": {k: None for k in _GEOMETRY_KEYS},
    "grid": None,
    "ensemble": {
        "seed": 0,
        "size": 50,
        "n_z": 32,
        "period": 8.0,
        "n_eta": 16,
        "n_t": 8,
        "eta_pad": 4.0,
        "t_range": [0.25, 2.0],
        "ncell": 4,
        "K": 3,
        "exponents": {"p": 4.0, "q": 4.0, "r": 3.0},
    },
    "experiment": None,
    "outdir": None,
    "levels": 2,
    "sweep": {"which": "energy", "explore": False, "points": [], "stability": True},
    "duality": {
        "n_eta": 64,
        "n_t": 32,
        "eta_pad": 7.0,
        "t_min": 0.085,
        "t_max": 1.30,
    },
}

class ConfigError(Exception):
    """Invalid run configuration; the message names the offending key."""


def _merge(base, update, path):
    out = dict(base)
    for k, v in update.items():
        if k not in base:
            raise ConfigError(f"unknown config key: {path}{k}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override must look like key=value: {text}")
    key, _, raw = text.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = value
    for part in reversed(key.split(".")):
        node = {part: node}
    return node


class RunConfig:
    """Validated run configuration assembled from file plus overrides."""

    def __init__(self, data=None, overrides=()):
        cfg = _DEFAULTS
        if data:
            cfg = _merge(cfg, self._predefault(data), "")
        for ov in overrides:
            cfg = _merge(cfg, self._predefault(_parse_override(ov)), "")
        self.data = cfg
        self.geometry = self._build_geometry(cfg["geometry"])
        self.ensemble = self._build_ensemble(cfg["ensemble"])
        self.grid = self._build_grid(cfg["grid"])

    @staticmethod
    def _predefault(data):
        # a null grid block in the file replaces the default wholesale
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        data = dict(data)
        if data.get("grid") is not None and not isinstance(data["grid"], dict):
            raise ConfigError("grid: must be an object or null")
        if isinstance(data.get("grid"), dict):
            grid = data.pop("grid")
            for k in grid:
                if k not in _GRID_KEYS:
                    raise ConfigError(f"unknown config key: grid.{k}")
            defaults = {"y_range": None, "n_y": None, "eta_range": None,
                        "n_eta": None, "t_range": None, "n_t": None}
            defaults.update(grid)
            data["grid"] = defaults
        if isinstance(data.get("geometry"), dict):
            for k in data["geometry"]:
                if k not in _GEOMETRY_KEYS:
                    raise ConfigError(f"unknown config key: geometry.{k}")
        return data

    @staticmethod
    def _build_geometry(block):
        given = {k: v for k, v in block.items() if v is not None}
        try:
            return GeometryParams(**given)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"geometry: {ex}") from None

    def _build_ensemble(self, block):
        exps = block["exponents"]
        try:
            exponents = Exponents(**exps)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"ensemble.exponents: {ex}") from None
        args = {k: v for k, v in block.items() if k != "exponents"}
        try:
            return Ensemble(exponents=exponents, geom=self.geometry, **args)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"ensemble: {ex}") from None

    def _build_grid(self, block):
        if block is None:
            return self.ensemble.grid
        missing = [k for k in _GRID_KEYS if block.get(k) is None]
        if missing:
            raise ConfigError(f"grid.{missing[0]}: required when grid block is given")
        try:
            grid = TFGrid(block["y_range"], block["n_y"], block["eta_range"],
                          block["n_eta"], block["t_range"], block["n_t"])
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"grid: {ex}") from None
        if grid.n_y != self.ensemble.n_z:
            raise ConfigError("grid.n_y: must equal ensemble.n_z (shared lattice)")
        if abs(grid.period - self.ensemble.period) > 1e-9:
            raise ConfigError("grid.y_range: period must match ensemble.period")
        return grid

    def outdir(self, flag_value=None):
        for v in (flag_value, self.data["outdir"], os.environ.get(ENV_OUTDIR)):
            if v:
                return v
        return "tfouter-out"


def load_config(path, overrides=()):
    if path is None:
        return RunConfig(None, overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as ex:
        raise ConfigError(f"cannot read config: {ex}") from None
    except json.JSONDecodeError as ex:
        raise ConfigError(f"config is not valid JSON: {ex}") from None
    return RunConfig(data, overrides)


def _instance(cfg, i):
    ens = cfg.ensemble
    rng = ens.instance_rng(i)
    f = ens.random_function(rng)
    stopping = ens.random_stopping(rng)
    seqfun = ens.random_seqfun(rng)
    return f, stopping, seqfun


def _write_field_csv(path, field):
    grid = field.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,eta,y,re,im\n")
        for k in range(grid.n_t):
            for e in range(grid.n_eta):
                for i in range(grid.n_y):
                    v = complex(field.values[k, e, i])
                    fh.write(
                        f"{float(grid.t[k])!r},{float(grid.eta[e])!r},"
                        f"{float(grid.y[i])!r},{v.real!r},{v.imag!r}\n"
                    )


def _embedded(cfg, which, i):
    ens = cfg.ensemble
    grid, gen, geom = cfg.grid, ens.generators, cfg.geometry
    f, stopping, seqfun = _instance(cfg, i)
    if which == "energy":
        return embed_energy(f, grid, gen)
    if which == "mass":
        rng = ens.instance_rng(i)
        a = ens.random_density(rng)
        single = ens.random_stopping(rng, K=1)
        return embed_mass(a, single, grid, gen)
    if which == "var-mass":
        return embed_var_mass_sup(seqfun, stopping, grid, gen)
    if which == "aux":
        return embed_aux(seqfun, stopping, grid, gen, geom)
    raise ConfigError(f"unknown field kind: {which}")


def _cmd_embed(cfg, args):
    field = _embedded(cfg, args.field, args.instance)
    outdir = cfg.outdir(args.outdir)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"embed-{args.field}.csv")
    _write_field_csv(path, field)
    mx = float(np.max(np.abs(field.values)))
    return 0, f"embed {args.field}: instance={args.instance} max={mx:.6g} -> {path}"


_SIZE_FOR = {
    "energy": "S_energy",
    "mass": "S_mass",
    "var-mass": "S_mass",
    "aux": "S_inf",
}


def _cmd_opnorm(cfg, args):
    field = _embedded(cfg, args.field, args.instance)
    spec = SizeSpec(_SIZE_FOR[args.field])
    e = cfg.ensemble.exponents
    p = e.p if args.field == "energy" else e.p_prime
    q = e.q if args.field == "energy" else e.q_prime
    if args.iterated:
        value, report = iter_lp_lq(field, p, q, spec, cfg.geometry,
                                   strips=stability_strips(cfg.grid),
                                   n_ladder=harness._OUTER_LADDER,
                                   inner_ladder=harness._INNER_LADDER)
        label = f"L^{p:g}(l^{q:g})"
    else:
        value, report = outer_lp(field, p, spec, cfg.geometry)
        label = f"L^{p:g}"
    outdir = cfg.outdir(args.outdir)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"opnorm-{args.field}.csv")
    report.to_csv(path)
    return 0, (f"opnorm {args.field}: {label}({spec.kind}) = {value:.6g} "
               f"weak={report.weak:.6g} -> {path}")


def _cmd_cover(cfg, args):
    ens = cfg.ensemble
    _f, stopping, seqfun = _instance(cfg, args.instance)
    if args.zero:
        seqfun = type(seqfun)(np.zeros_like(seqfun.values), seqfun.r_prime)
    cov = cover_superlevel_aux(seqfun, stopping, args.level, args.big_r,
                               args.big_q, cfg.grid, cfg.geometry)
    outdir = cfg.outdir(args.outdir)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "cover.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("y,eta,t,premeasure\n")
        for T in cov.tents():
            fh.write(f"{T.x!r},{T.xi!r},{T.s!r},{T.premeasure!r}\n")
    n_pts = cov.points.shape[0]
    return 0, (f"cover: lambda={args.level:g} points={n_pts} "
               f"selected={len(cov.selected)} -> {path}")


def _cmd_operator(cfg, args):
    ens = cfg.ensemble
    dz = ens.dz
    f, stopping, _seqfun = _instance(cfg, args.instance)
    r = args.r if args.r is not None else ens.exponents.r
    if args.kind == "carleson":
        rng = ens.instance_rng(args.instance)
        _ = ens.random_function(rng)
        single = ens.random_stopping(rng, K=1)
        out = carleson(f, single, dz)
    elif args.kind == "variation":
        out = var_carleson(f, stopping, r, dz)
    else:
        t0, t1 = cfg.grid.t_range
        scales = np.geomspace(t0, t1, min(cfg.grid.n_t * 2, 64))
        ladder = TruncationLadder(scales)
        out = var_truncation(f, ladder, r, dz)
    out = np.asarray(out, dtype=complex)
    outdir = cfg.outdir(args.outdir)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"operator-{args.kind}.csv")
    half = ens.period / 2.0
    z = -half + dz * np.arange(ens.n_z)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("z,re,im\n")
        for i in range(ens.n_z):
            fh.write(f"{float(z[i])!r},{out[i].real!r},{out[i].imag!r}\n")
    norm = float(np.sqrt(np.sum(np.abs(out) ** 2) * dz))
    return 0, f"operator {args.kind}: l2 norm = {norm:.6g} -> {path}"


def _verify_report(cfg, target, args):
    ens = cfg.ensemble
    if target == "duality":
        d = cfg.data["duality"]
        return harness.verify_duality(
            ens, levels=cfg.data["levels"], n_eta_base=d["n_eta"],
            n_t_base=d["n_t"], eta_pad=d["eta_pad"], t_min=d["t_min"],
            t_max_base=d["t_max"],
        )
    if target == "holder":
        return harness.verify_holder(ens, stability=not args.fast)
    if target == "rn":
        return harness.verify_radon_nikodym(ens)
    if target == "interp":
        return harness.verify_interpolation(ens)
    if target == "bounds":
        sw = cfg.data["sweep"]
        return harness.bound_ratio_sweep(
            ens, sw["which"], explore=sw["explore"],
            stability=sw["stability"] and not args.fast,
        )
    if target == "sizecontrol":
        return harness.verify_size_control(ens)
    if target == "wavepackets":
        return harness.verify_wavepackets(cfg.geometry)
    raise ConfigError(f"unknown verify target: {target}")


def _summary_line(report):
    s = report["summary"]
    parts = []
    for k, v in s.items():
        if isinstance(v, float):
            parts.append(f"{k}={v:.4g}")
        elif isinstance(v, (int, str)):
            parts.append(f"{k}={v}")
        elif isinstance(v, (list, tuple)) and v and all(
                isinstance(x, (int, float)) for x in v):
            parts.append(f"{k}=[{','.join(f'{float(x):.4g}' for x in v)}]")
    return " ".join(parts)


def _cmd_verify(cfg, args):
    report = _verify_report(cfg, args.target, args)
    outdir = cfg.outdir(args.outdir)
    csv_path, _ = write_report(report, outdir)
    line = f"verify {args.target}: {_summary_line(report)} -> {csv_path}"
    if report["flags"]:
        return 1, line + " FLAGS: " + ",".join(report["flags"])
    return 0, line


def _cmd_sweep(cfg, args):
    sw = cfg.data["sweep"]
    points = sw["points"] or [cfg.ensemble.exponents.as_dict()]
    outdir = cfg.outdir(args.outdir)
    failures = 0
    lines = []
    all_rows = []
    for pt in points:
        exps = Exponents(p=pt.get("p", 4.0), q=pt.get("q", 4.0), r=pt.get("r", 3.0))
        ens = cfg.ensemble._clone(exponents=exps)
        rep = harness.bound_ratio_sweep(
            ens, sw["which"], explore=sw["explore"],
            stability=sw["stability"] and not args.fast,
        )
        all_rows.extend(rep["instances"])
        if rep["flags"]:
            failures += 1
        lines.append(f"p={exps.p:g} q={exps.q:g} r={exps.r:g}: "
                     f"max={rep['summary']['base_max']:.4g}")
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"sweep-{sw['which']}.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("instance,exponents,lhs,rhs,ratio,flags\n")
        for r in all_rows:
            fh.write(
                f"{r['instance']},{r['exponents']},{float(r['lhs'])!r},"
                f"{float(r['rhs'])!r},{float(r['ratio'])!r},{r['flags']}\n"
            )
    line = f"sweep {sw['which']}: " + "; ".join(lines) + f" -> {path}"
    return (1 if failures else 0), line


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tfouter",
        description="embeddings, outer norms, tent covers and operator checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-key config override")
        p.add_argument("--outdir", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="worker count hint (outputs are identical for any value)")

    p = sub.add_parser("embed", help="write one embedded field as CSV")
    common(p)
    p.add_argument("--field", default="energy",
                   choices=("energy", "mass", "var-mass", "aux"))
    p.add_argument("--instance", type=int, default=0)

    p = sub.add_parser("opnorm", help="outer norm of an embedded field")
    common(p)
    p.add_argument("--field", default="energy",
                   choices=("energy", "mass", "var-mass", "aux"))
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--iterated", action="store_true")

    p = sub.add_parser("cover", help="greedy superlevel tent cover")
    common(p)
    p.add_argument("--lambda", dest="level", type=float, required=True)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--zero", action="store_true", help="use the zero field")
    p.add_argument("--big-r", type=float, default=2.0)
    p.add_argument("--big-q", type=float, default=8.0)

    p = sub.add_parser("operator", help="apply a truncation operator")
    common(p)
    p.add_argument("--kind", default="carleson",
                   choices=("carleson", "variation", "truncation"))
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--r", type=float, default=None)

    p = sub.add_parser("verify", help="run a verification experiment")
    common(p)
    p.add_argument("target", choices=("duality", "holder", "rn", "interp",
                                      "bounds", "sizecontrol", "wavepackets"))
    p.add_argument("--fast", action="store_true",
                   help="skip the stability (doubling/refinement) passes")

    p = sub.add_parser("sweep", help="bound ratio sweep over exponent points")
    common(p)
    p.add_argument("--fast", action="store_true",
                   help="skip the stability (doubling/refinement) passes")
    return parser


_COMMANDS = {
    "embed": _cmd_embed,
    "opnorm": _cmd_opnorm,
    "cover": _cmd_cover,
    "operator": _cmd_operator,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def run(argv):
    """Parse argv, dispatch, print the one-line summary, return exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        code, line = _COMMANDS[args.command](cfg, args)
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    print(line)
    return code


def main(argv=None):
    sys.exit(run(sys.argv[1:] if argv is None else argv))
