"""Command-line front end.

Every command builds a RunConfig from (lowest to highest precedence) a
key=value config file, positional key=value tokens and flags, runs one check
or oracle, and writes a CSV or JSON report. Exit status: 0 when every check
passes, 1 when a check fails, 2 for configuration errors.
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
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import GridSpec, recurrence_limit, recurrence_table, theorem1_check
from .geometry import SpaceParams, invariant_suite
from .heat import get_kernel
from .htype import InfeasibleDimensionError, build_htype
from .lps import Flag, lp_integral, sigma_threshold

OUTPUT_DIR_ENV = "DRHEAT_OUTPUT_DIR"
COMMANDS = ("geometry-check", "eval-kernel", "check-bounds", "recurrence", "sigma-threshold", "lp-probe")
GEOMETRY_TOL = 1e-12
RECURRENCE_TOL = 1e-6


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    m: int = 2
    k: int = 0
    eps: float = 0.1
    sigma: float = 0.0
    p: float = 2.0
    i: int = 0
    t_min: float = 0.1
    t_max: float = 10.0
    r_max: float = 12.0
    points: int = 21
    seed: int = 0
    L: int = 400
    I: int = 8
    Q: float | None = None
    integrand: str = "oracle"
    out: str | None = None
    format: str = "json"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.command != "sigma-threshold" or self.Q is None:
            try:
                build_htype(self.m, self.k)
            except InfeasibleDimensionError as exc:
                raise ConfigError(str(exc)) from None
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if self.p <= 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.i < 0:
            raise ConfigError(f"i must be non-negative, got {self.i}")
        if self.command == "check-bounds" and self.i > 3:
            raise ConfigError("check-bounds supports i in {0, 1, 2, 3}")
        if not 0 < self.t_min <= self.t_max:
            raise ConfigError(f"need 0 < t-min <= t-max, got {self.t_min}, {self.t_max}")
        if self.r_max <= 0:
            raise ConfigError(f"r-max must be positive, got {self.r_max}")
        if self.points < 2:
            raise ConfigError(f"points must be at least 2, got {self.points}")
        if self.L < 1 or self.I < 1:
            raise ConfigError("L and I must be at least 1")
        if self.Q is not None and self.Q <= 0:
            raise ConfigError(f"Q must be positive, got {self.Q}")
        if self.integrand not in ("oracle", "lemma"):
            raise ConfigError(f"integrand must be 'oracle' or 'lemma', got {self.integrand!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")

    @property
    def params(self) -> SpaceParams:
        return SpaceParams(self.m, self.k)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"epsilon": "eps", "t-min": "t_min", "t-max": "t_max", "r-max": "r_max"}


def _coerce(key: str, raw: str):
    key = _ALIASES.get(key, key).replace("-", "_")
    if key not in _FIELD_TYPES or key == "command":
        raise ConfigError(f"unknown setting {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if "int" in kind:
            return key, int(raw)
        if "float" in kind:
            return key, float(raw)
    except ValueError:
        raise ConfigError(f"setting {key} expects a number, got {raw!r}") from None
    return key, raw


def parse_key_values(lines, origin: str) -> dict:
    """Parse key=value lines; blank lines and '#' comments are skipped."""
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        k, v = _coerce(key, val)
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drheat", description="Heat kernel oracles and estimate checks on Damek-Ricci spaces.")
    ap.add_argument("--version", action="version", version=f"drheat {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("settings", nargs="*", metavar="key=value", help="settings, same keys as the flags")
    ap.add_argument("--config", help="key=value file; flags and positional settings override it")
    for name, kind in [
        ("m", int), ("k", int), ("eps", float), ("sigma", float), ("p", float), ("i", int),
        ("t-min", float), ("t-max", float), ("r-max", float), ("points", int), ("seed", int),
        ("L", int), ("I", int), ("Q", float),
    ]:
        ap.add_argument(f"--{name}", type=kind, dest=name.replace("-", "_"), default=None)
    ap.add_argument("--integrand", choices=("oracle", "lemma"), default=None)
    ap.add_argument("--out", default=None, help=f"report path; relative paths are placed under ${OUTPUT_DIR_ENV} if set")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    return ap


def load_config(argv) -> RunConfig:
    args = build_parser().parse_intermixed_args(argv)
    values: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text().splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        values.update(parse_key_values(text, args.config))
    values.update(parse_key_values(args.settings, "argument"))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if f.name != "command" and v is not None:
            values[f.name] = v
    cfg = RunConfig(command=args.command, **values)
    cfg.validate()
    return cfg


# ------------------------------------------------------------- output

def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _clean(x.item())
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def render_json(cfg: RunConfig, payload: dict) -> str:
    doc = {"version": __version__, "config": asdict(cfg), **payload}
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def render_csv(cfg: RunConfig, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# drheat {__version__}\n")
    buf.write("# config " + json.dumps(_clean(asdict(cfg)), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def resolve_output(out: str | None) -> Path | None:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if out is None:
        return None
    path = Path(out)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------ commands

def _grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.t_min, cfg.t_max, 0.0, cfg.r_max, cfg.points)


def cmd_geometry(cfg: RunConfig):
    defects = invariant_suite(cfg.m, cfg.k, samples=max(cfg.points, 1000), seed=cfg.seed)
    checks = {name: {"defect": v, "passed": v <= GEOMETRY_TOL} for name, v in defects.items()}
    ok = all(c["passed"] for c in checks.values())
    rows = [(name, c["defect"], int(c["passed"])) for name, c in checks.items()]
    return ok, {"tolerance": GEOMETRY_TOL, "checks": checks, "passed": ok}, (["check", "defect", "passed"], rows)


def cmd_eval_kernel(cfg: RunConfig):
    kernel = get_kernel(cfg.params)
    t_grid, r_grid = _grid(cfg).grids()
    rows = []
    ok = True
    for t in t_grid:
        val, err, oracle = kernel.table(float(t), r_grid, cfg.i)
        for r, v, e, o in zip(r_grid, val, err, oracle):
            ok &= bool(math.isfinite(v)) and (cfg.i > 0 or v > 0)
            rows.append((float(t), float(r), cfg.i, float(v), str(o), float(e)))
    header = ["t", "r", "i", "value", "oracle", "est_error"]
    payload = {"passed": ok, "rows": [dict(zip(header, row)) for row in rows]}
    return ok, payload, (header, rows)


def cmd_check_bounds(cfg: RunConfig):
    rep = theorem1_check(cfg.params, cfg.eps, cfg.i, _grid(cfg))
    payload = {**asdict(rep), "passed": rep.passed}
    header = list(payload)
    return rep.passed, payload, (header, [[payload[h] if not isinstance(payload[h], dict) else json.dumps(payload[h], sort_keys=True) for h in header]])


def cmd_recurrence(cfg: RunConfig):
    tab = recurrence_table(cfg.eps, cfg.L, cfg.I)
    rows = []
    for ell in range(cfg.L + 1):
        for i in range(cfg.I + 1):
            rows.append((ell, i, float(tab.beta_table[ell, i]), float(tab.gamma_table[ell, i]),
                         recurrence_limit(cfg.eps, i)))
    dev = max(abs(tab.gamma_table[-1, i] - recurrence_limit(cfg.eps, i)) for i in range(cfg.I + 1))
    beta_dev = max(abs(tab.beta_table[-1, i] - 1) for i in range(cfg.I + 1))
    ok = dev <= RECURRENCE_TOL
    payload = {
        "lambda_eps": tab.lambda_eps, "gamma_max_deviation": dev, "beta_max_deviation": beta_dev,
        "tolerance": RECURRENCE_TOL, "passed": ok,
        "gamma_last_row": tab.gamma_table[-1].tolist(), "beta_last_row": tab.beta_table[-1].tolist(),
    }
    return ok, payload, (["l", "i", "beta", "gamma", "gamma_limit"], rows)


def cmd_sigma_threshold(cfg: RunConfig):
    Q = cfg.Q if cfg.Q is not None else cfg.params.Q
    thr = sigma_threshold(Q, cfg.p)
    return True, {"Q": Q, "p": cfg.p, "threshold": thr}, (["Q", "p", "threshold"], [(float(Q), cfg.p, thr)])


def cmd_lp_probe(cfg: RunConfig):
    rep = lp_integral(cfg.params, cfg.p, cfg.sigma, cfg.i, r_max=cfg.r_max, integrand=cfg.integrand)
    ok = rep.flag == rep.analytic_flag and rep.flag != Flag.INDETERMINATE.value
    payload = {**asdict(rep), "passed": ok}
    rows = [(float(r), float(ts), float(v)) for r, ts, v in rep.t_star_profile]
    return ok, payload, (["r", "t_star", "k_sigma_global"], rows)


HANDLERS = {
    "geometry-check": cmd_geometry,
    "eval-kernel": cmd_eval_kernel,
    "check-bounds": cmd_check_bounds,
    "recurrence": cmd_recurrence,
    "sigma-threshold": cmd_sigma_threshold,
    "lp-probe": cmd_lp_probe,
}


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ok, payload, (header, rows) = HANDLERS[cfg.command](cfg)
    text = render_json(cfg, payload) if cfg.format == "json" else render_csv(cfg, header, rows)
    path = resolve_output(cfg.out)
    if path is not None:
        write_atomic(path, text)
    if cfg.command == "sigma-threshold":
        # shortest round-trip repr, so Q=1 p=2 prints 0.25
        stdout.write(f"{payload['threshold']!r}\n")
    elif path is None:
        stdout.write(text)
    if cfg.command != "sigma-threshold":
        print(f"{cfg.command}: {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 1


def main(argv=None) -> int:
    try:
        cfg = load_config(argv)
    except ConfigError as exc:
        print(f"drheat: configuration error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
