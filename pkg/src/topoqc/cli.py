"""Command-line experiment drivers.

Each subcommand emits one machine-readable table (CSV or JSON) with a
fixed column schema, suitable for golden-file comparison:

  chern          mu, trial, C, admissible, residual
  mistake-ratio  eps1, mistakes, trials, ratio
  nfield         i, j, n           (plus a trailing sum row)
  zak            ky, trial, phi, winding
  egp            ky, trial, phiE, winding

Settings resolve as defaults < config file (--config, JSON) < flags.
Exit codes: 0 success, 1 config error, 2 measurement failure in every
trial. Reruns with identical settings produce byte-identical output.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional

import numpy as np

from . import __version__, measure, sim
from .invariants import AmbiguousWinding, DegenerateLink, MeshGrid, \
    NotQuantized, chern, egp, integer_field, zak_phase, zak_winding
from .model import GapClosed, ModelParams

MODES = ("exact-oracle", "noise-free-circuit", "noisy-circuit")
FORMATS = ("csv", "json")
COMMANDS = ("chern", "mistake-ratio", "nfield", "zak", "egp")
SINGLE_MU_COMMANDS = ("mistake-ratio", "nfield", "zak", "egp")

COLUMNS = {
    "chern": ("mu", "trial", "C", "admissible", "residual"),
    "mistake-ratio": ("eps1", "mistakes", "trials", "ratio"),
    "nfield": ("i", "j", "n"),
    "zak": ("ky", "trial", "phi", "winding"),
    "egp": ("ky", "trial", "phiE", "winding"),
}

_CONFIG_KEYS = ("mu", "mu_list", "mesh", "shots", "eps1", "eps2", "trials",
                "seed", "mode", "beta", "nl", "out", "format")


class ConfigError(Exception):
    pass


class MeasurementFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse failures to exit code 1 instead of its default 2
    def error(self, message):
        raise ConfigError(message)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    command: str
    mu_list: tuple
    n_kx: int = 8
    n_ky: int = 8
    shots: int = 5120
    eps1_list: tuple = (0.008,)
    eps2: Optional[float] = None
    trials: int = 1
    seed: int = 42
    mode: str = "exact-oracle"
    beta: float = 2.1
    n_L: Optional[int] = None
    out: Optional[str] = None
    fmt: str = "csv"


def _parse_mesh(value) -> tuple:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        dims = value
    elif isinstance(value, str):
        parts = value.lower().split("x")
        if len(parts) != 2:
            raise ConfigError(f"mesh must look like '8x8', got {value!r}")
        dims = parts
    else:
        raise ConfigError(f"mesh must look like '8x8', got {value!r}")
    try:
        nx, ny = int(dims[0]), int(dims[1])
    except (TypeError, ValueError):
        raise ConfigError(f"mesh must hold two integers, got {value!r}")
    if nx < 1 or ny < 1:
        raise ConfigError("mesh dimensions must be positive")
    return nx, ny


def _parse_floats(value, name) -> tuple:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        items = value
    elif isinstance(value, str):
        items = [p for p in value.split(",") if p.strip()]
    else:
        raise ConfigError(f"{name} must be a number or comma list")
    try:
        out = tuple(float(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or comma list")
    if not out:
        raise ConfigError(f"{name} must not be empty")
    return out


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    for key in data:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    return data


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON settings file")
    common.add_argument("--mu", type=float, help="single chemical potential")
    common.add_argument("--mu-list", dest="mu_list",
                        help="comma list of chemical potentials")
    common.add_argument("--mesh", help="torus mesh, e.g. 8x8")
    common.add_argument("--shots", type=int, help="shots per expectation")
    common.add_argument("--eps1", help="single-qubit gate error "
                        "(comma list sweeps mistake-ratio)")
    common.add_argument("--eps2", type=float,
                        help="two-qubit gate error (default 10*eps1)")
    common.add_argument("--trials", type=int, help="independent repetitions")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--beta", type=float, help="inverse temperature")
    common.add_argument("--nl", type=int, help="kx loop length for egp")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", dest="fmt", choices=FORMATS)

    parser = _Parser(prog="topoqc",
                     description="topological invariants from simulated "
                                 "interference circuits")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("chern", parents=[common],
                   help="Chern number per (mu, trial)")
    sub.add_parser("mistake-ratio", parents=[common],
                   help="noisy Chern mistake ratio over an eps1 sweep")
    sub.add_parser("nfield", parents=[common],
                   help="integer gauge field n(k) per plaquette")
    sub.add_parser("zak", parents=[common],
                   help="Zak phase profile and winding per trial")
    sub.add_parser("egp", parents=[common],
                   help="ensemble geometric phase profile per trial")
    return parser


def resolve_config(argv) -> ExperimentConfig:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise ConfigError("a subcommand is required "
                          f"(one of {', '.join(COMMANDS)})")

    merged = {}
    if ns.config:
        merged.update(_load_config_file(ns.config))
    for key in ("mu", "mu_list", "mesh", "shots", "eps1", "eps2", "trials",
                "seed", "mode", "beta", "nl", "out"):
        v = getattr(ns, key)
        if v is not None:
            merged[key] = v
    if ns.fmt is not None:
        merged["format"] = ns.fmt

    if "mu" in merged and "mu_list" in merged:
        raise ConfigError("give either mu or mu_list, not both")
    if "mu" in merged:
        mu_list = _parse_floats(merged["mu"], "mu")
    elif "mu_list" in merged:
        mu_list = _parse_floats(merged["mu_list"], "mu_list")
    else:
        mu_list = ()
    if not mu_list:
        raise ConfigError("at least one mu is required")
    if ns.command in SINGLE_MU_COMMANDS and len(mu_list) != 1:
        raise ConfigError(f"{ns.command} takes a single mu")

    n_kx, n_ky = _parse_mesh(merged.get("mesh", "8x8"))
    eps1_list = _parse_floats(merged.get("eps1", 0.008), "eps1")
    if ns.command != "mistake-ratio" and len(eps1_list) != 1:
        raise ConfigError(f"{ns.command} takes a single eps1")
    for e in eps1_list:
        if not 0.0 <= e <= 1.0:
            raise ConfigError("eps1 must lie in [0, 1]")
    eps2 = merged.get("eps2")
    if eps2 is not None:
        eps2 = float(eps2)
        if not 0.0 <= eps2 <= 1.0:
            raise ConfigError("eps2 must lie in [0, 1]")

    def _int(key, default, minimum):
        try:
            v = int(merged.get(key, default))
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be an integer")
        if v < minimum:
            raise ConfigError(f"{key} must be >= {minimum}")
        return v

    shots = _int("shots", 5120, 1)
    trials = _int("trials", 1, 1)
    seed = _int("seed", 42, 0)
    mode = merged.get("mode", "exact-oracle")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    fmt = merged.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
    try:
        beta = float(merged.get("beta", 2.1))
    except (TypeError, ValueError):
        raise ConfigError("beta must be a number")
    if ns.command == "egp" and beta <= 0:
        raise ConfigError("beta must be positive")
    n_L = merged.get("nl")
    if n_L is not None:
        n_L = _int("nl", n_L, 1)
    out = merged.get("out")
    if out is not None:
        out = str(out)

    return ExperimentConfig(command=ns.command, mu_list=mu_list,
                            n_kx=n_kx, n_ky=n_ky, shots=shots,
                            eps1_list=eps1_list, eps2=eps2, trials=trials,
                            seed=seed, mode=mode, beta=beta, n_L=n_L,
                            out=out, fmt=fmt)


# ---------------------------------------------------------------------------
# command bodies

def _warn(msg) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _mesh_for(cfg: ExperimentConfig) -> MeshGrid:
    if cfg.command == "egp" and cfg.n_L is not None:
        return MeshGrid(cfg.n_L, cfg.n_ky)
    return MeshGrid(cfg.n_kx, cfg.n_ky)


def _field(cfg: ExperimentConfig, mu: float, trial: int, band_pairs,
           eps1: Optional[float] = None):
    params = ModelParams(mu=mu)
    mesh = _mesh_for(cfg)
    if cfg.mode == "exact-oracle" and eps1 is None:
        return measure.oracle_overlap_field(params, mesh, band_pairs)
    if cfg.mode == "noise-free-circuit" and eps1 is None:
        return measure.circuit_overlap_field(params, mesh,
                                             band_pairs=band_pairs)
    e1 = cfg.eps1_list[0] if eps1 is None else eps1
    noise = sim.NoiseModel(eps1=e1, eps2=cfg.eps2)
    return measure.circuit_overlap_field(params, mesh, noise=noise,
                                         master_seed=cfg.seed, trial=trial,
                                         shots=cfg.shots,
                                         band_pairs=band_pairs)


def cmd_chern(cfg: ExperimentConfig):
    rows, failed, total = [], 0, 0
    for mu in cfg.mu_list:
        for t in range(cfg.trials):
            total += 1
            try:
                res = chern(_field(cfg, mu, t, measure.MINUS_PAIR))
                rows.append([float(mu), t, int(res.C), bool(res.admissible),
                             float(res.residual)])
            except (DegenerateLink, NotQuantized) as exc:
                _warn(f"mu={mu} trial={t}: {exc}")
                failed += 1
                rows.append([float(mu), t, None, None, None])
    return rows, None, failed, total


def cmd_mistake_ratio(cfg: ExperimentConfig):
    mu = cfg.mu_list[0]
    mesh = _mesh_for(cfg)
    reference = chern(measure.oracle_overlap_field(ModelParams(mu=mu), mesh))
    noisy = dataclasses.replace(cfg, mode="noisy-circuit")
    rows = []
    for e1 in cfg.eps1_list:
        mistakes = 0
        for t in range(cfg.trials):
            try:
                res = chern(_field(noisy, mu, t, measure.MINUS_PAIR, eps1=e1))
                if res.C != reference.C:
                    mistakes += 1
            except (DegenerateLink, NotQuantized):
                mistakes += 1
        rows.append([float(e1), mistakes, cfg.trials,
                     float(mistakes / cfg.trials)])
    return rows, None, 0, len(rows)


def cmd_nfield(cfg: ExperimentConfig):
    mu = cfg.mu_list[0]
    try:
        n = integer_field(_field(cfg, mu, 0, measure.MINUS_PAIR))
    except (DegenerateLink, NotQuantized) as exc:
        raise MeasurementFailure(f"mu={mu}: {exc}")
    rows = [[i, j, int(n[i, j])]
            for i in range(n.shape[0]) for j in range(n.shape[1])]
    return rows, int(n.sum()), 0, 1


def _profile_rows(cfg: ExperimentConfig, phase_of, band_pairs):
    mesh = _mesh_for(cfg)
    kys = mesh.kys()
    mu = cfg.mu_list[0]
    rows, failed = [], 0
    for t in range(cfg.trials):
        U = _field(cfg, mu, t, band_pairs)
        phis = []
        for j in range(mesh.n_ky):
            try:
                phis.append(float(phase_of(U, j)))
            except DegenerateLink as exc:
                _warn(f"trial={t} row={j}: {exc}")
                phis.append(None)
        winding = None
        if all(p is not None for p in phis):
            try:
                winding = int(zak_winding(np.array(phis)))
            except AmbiguousWinding as exc:
                _warn(f"trial={t}: {exc}")
        else:
            failed += 1
        for j in range(mesh.n_ky):
            rows.append([float(kys[j]), t, phis[j], winding])
    return rows, None, failed, cfg.trials


def cmd_zak(cfg: ExperimentConfig):
    return _profile_rows(cfg, zak_phase, measure.MINUS_PAIR)


def cmd_egp(cfg: ExperimentConfig):
    return _profile_rows(cfg, lambda U, j: egp(U, cfg.beta, j),
                         measure.ALL_PAIRS)


# ---------------------------------------------------------------------------
# rendering

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _render_csv(cfg: ExperimentConfig, rows, extra) -> str:
    lines = [",".join(COLUMNS[cfg.command])]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    if extra is not None:
        lines.append(",".join(["sum", "", _cell(extra)]))
    return "\n".join(lines) + "\n"


def _meta(cfg: ExperimentConfig) -> dict:
    mesh = _mesh_for(cfg)
    return {
        "command": cfg.command,
        "version": __version__,
        "config": {
            "mu_list": list(cfg.mu_list),
            "mesh": [cfg.n_kx, cfg.n_ky],
            "shots": cfg.shots,
            "eps1": list(cfg.eps1_list),
            "eps2": cfg.eps2,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "mode": cfg.mode,
            "beta": cfg.beta,
            "n_L": mesh.n_kx if cfg.command == "egp" else cfg.n_L,
            "format": cfg.fmt,
        },
    }


def _render_json(cfg: ExperimentConfig, rows, extra) -> str:
    cols = COLUMNS[cfg.command]
    payload = {"meta": _meta(cfg),
               "rows": [dict(zip(cols, row)) for row in rows]}
    if extra is not None:
        payload["sum"] = extra
    return json.dumps(payload, indent=2) + "\n"


def _emit(cfg: ExperimentConfig, rows, extra) -> None:
    render = _render_json if cfg.fmt == "json" else _render_csv
    text = render(cfg, rows, extra)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)


_BODIES = {
    "chern": cmd_chern,
    "mistake-ratio": cmd_mistake_ratio,
    "nfield": cmd_nfield,
    "zak": cmd_zak,
    "egp": cmd_egp,
}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        rows, extra, failed, total = _BODIES[cfg.command](cfg)
    except GapClosed as exc:
        # a mesh point sits on a critical momentum for this mu
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MeasurementFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(cfg, rows, extra)
    if total > 0 and failed == total:
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
