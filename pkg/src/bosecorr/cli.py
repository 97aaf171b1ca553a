"""Command-line front end: thermodynamic and correlation-length sweeps, and a
verification run of the built-in consistency checks.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 solver failure on at least one row (the row carries an error marker).
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, fields, replace
import io
import json
import math
import sys

import numpy as np

from .errors import BosecorrError, InvalidArgument

THERMO_COLUMNS = ["T", "mu", "c", "phi_potential", "density", "entropy", "specific_heat"]
CORRLEN_COLUMNS = ["T", "mu", "c", "sector", "r", "re_inv_xi", "im_inv_xi", "two_kf",
                   "roots", "residuals"]
FORMATS = ("csv", "json")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    c: float = 2.0
    mu: float = None
    mu_min: float = None
    mu_max: float = None
    mu_steps: int = None
    T: float = None
    t_min: float = None
    t_max: float = None
    t_steps: int = None
    t_scale: str = "log"
    sector: str = "field"
    r: int = None
    phi: float = None
    phi_min: float = None
    phi_max: float = None
    phi_steps: int = None
    branch: tuple = None
    grid_m: int = None
    grid_lambda: float = None
    tol: float = None
    damping: float = None
    max_iter: int = None
    out: str = None
    format: str = "csv"
    jobs: int = 1
    verify_bounds: dict = field(default=None, compare=False)

    def validate(self):
        if self.command not in ("thermo", "corrlen", "verify"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.jobs is None or self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.command == "verify":
            return
        if not (self.c is not None and self.c > 0):
            raise ConfigError("c must be positive (inf selects the hard-core gas)")
        self.temperatures()
        self.chemical_potentials()
        self.twists()
        try:
            self.solver_config()
            if self.command == "corrlen":
                self.spec(self.twists()[0])
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def _range(name, single, lo, hi, steps, scale="lin", default=None):
        if single is not None:
            if any(v is not None for v in (lo, hi, steps)):
                raise ConfigError(f"give either --{name} or a --{name}-min/max/steps range")
            return [float(single)]
        if lo is None and hi is None and steps is None:
            if default is None:
                raise ConfigError(f"--{name} or a --{name}-min/max/steps range is required")
            return [default]
        if lo is None or hi is None or steps is None:
            raise ConfigError(f"--{name}-min, --{name}-max and --{name}-steps go together")
        if steps < 1 or lo > hi or (steps > 1 and lo == hi):
            raise ConfigError(f"empty or reversed {name} range [{lo}, {hi}] with {steps} steps")
        if scale == "log":
            if lo <= 0:
                raise ConfigError(f"log-spaced {name} range needs a positive minimum")
            vals = np.geomspace(lo, hi, steps) if steps > 1 else np.array([lo])
        elif scale == "lin":
            vals = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
        else:
            raise ConfigError(f"scale must be log or lin, got {scale!r}")
        return [float(v) for v in vals]

    def temperatures(self):
        ts = self._range("t", self.T, self.t_min, self.t_max, self.t_steps, self.t_scale)
        if any(not (t > 0 and math.isfinite(t)) for t in ts):
            raise ConfigError("temperatures must be positive")
        return ts

    def chemical_potentials(self):
        return self._range("mu", self.mu, self.mu_min, self.mu_max, self.mu_steps)

    def twists(self):
        return self._range("phi", self.phi, self.phi_min, self.phi_max, self.phi_steps, default=0.0)

    def solver_config(self):
        from .nlie import SolverConfig
        kw = {}
        for key in ("grid_m", "grid_lambda", "tol", "damping", "max_iter"):
            v = getattr(self, key)
            if v is not None:
                kw[key] = v
        return SolverConfig(**kw)

    def spec(self, phi):
        from .excitations import OSCILLATING_DENSITY_BRANCHES, ExcitationSpec
        branches = self.branch
        r = self.r
        if branches is None and self.sector == "density" and r in (None, 1):
            branches = OSCILLATING_DENSITY_BRANCHES
        return ExcitationSpec(self.sector, r=r, phi=phi if self.sector == "genfunc" else 0.0,
                              branches=branches)


def _fmt(x):
    return format(float(x), ".17g")


def _error_marker(exc):
    return f"error:{type(exc).__name__}"


def _write(cfg, columns, rows):
    if cfg.format == "json":
        text = json.dumps(rows, indent=1, sort_keys=False) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
        text = buf.getvalue()
    if cfg.out is None or cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)


def _map(fn, tasks, jobs):
    """Ordered map; results never depend on the number of workers."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# ---- thermo ----

def _thermo_row(task):
    from .thermo import ModelParams, thermo_point
    c, mu, T, scfg = task
    row = {"T": _fmt(T), "mu": _fmt(mu), "c": _fmt(c)}
    try:
        vals = thermo_point(ModelParams(c, mu, T), scfg)
    except BosecorrError as exc:
        mark = _error_marker(exc)
        row.update({k: mark for k in THERMO_COLUMNS[3:]})
        return row, True
    row.update({"phi_potential": _fmt(vals["phi"]), "density": _fmt(vals["density"]),
                "entropy": _fmt(vals["entropy"]), "specific_heat": _fmt(vals["specific_heat"])})
    return row, False


def cmd_thermo(cfg):
    """One row per (mu, T) point with phi, n, s and c_V. Returns the exit code."""
    cfg.validate()
    scfg = cfg.solver_config()
    tasks = [(cfg.c, mu, T, scfg) for mu in cfg.chemical_potentials() for T in cfg.temperatures()]
    out = _map(_thermo_row, tasks, cfg.jobs)
    _write(cfg, THERMO_COLUMNS, [r for r, _ in out])
    return 3 if any(bad for _, bad in out) else 0


# ---- corrlen ----

CHUNK = 8


def _roots_text(roots):
    return ";".join(f"{_fmt(z.real)}{'+' if z.imag >= 0 else '-'}{_fmt(abs(z.imag))}j" for z in roots)


def _corrlen_chunk(task):
    """Temperatures of one chunk in order, each seeded by the previous roots."""
    from .corrlen import inverse_corrlen
    from .thermo import ModelParams
    c, mu, temps, spec, scfg = task
    rows = []
    seeds = spec.seeds
    for T in temps:
        row = {"T": _fmt(T), "mu": _fmt(mu), "c": _fmt(c), "sector": spec.sector, "r": str(spec.r)}
        params = ModelParams(c, mu, T)
        try:
            try:
                res = inverse_corrlen(params, replace(spec, seeds=seeds), scfg)
            except BosecorrError:
                if seeds is None:
                    raise
                res = inverse_corrlen(params, replace(spec, seeds=None), scfg)
        except BosecorrError as exc:
            mark = _error_marker(exc)
            row.update({k: mark for k in CORRLEN_COLUMNS[5:]})
            rows.append((row, True))
            seeds = spec.seeds
            continue
        v = res.value
        resid = res.diagnostics["residuals"]
        row.update({
            "re_inv_xi": _fmt(v.real), "im_inv_xi": _fmt(v.imag),
            "two_kf": _fmt(v.imag) if spec.sector == "density" else "nan",
            "roots": _roots_text(res.roots.all()),
            "residuals": ";".join(f"{k}={_fmt(resid[k])}" for k in sorted(resid)),
        })
        rows.append((row, False))
        seeds = None if res.diagnostics["mode"] == "analytic" else tuple(res.roots.all())
    return rows


def cmd_corrlen(cfg):
    """1/xi of one sector along (mu, phi, T); rows in sweep order. Returns the exit code."""
    cfg.validate()
    scfg = cfg.solver_config()
    temps = cfg.temperatures()
    tasks = []
    for mu in cfg.chemical_potentials():
        for phi in cfg.twists():
            spec = cfg.spec(phi)
            for i in range(0, len(temps), CHUNK):
                tasks.append((cfg.c, mu, temps[i:i + CHUNK], spec, scfg))
    out = [row for chunk in _map(_corrlen_chunk, tasks, cfg.jobs) for row in chunk]
    _write(cfg, CORRLEN_COLUMNS, [r for r, _ in out])
    return 3 if any(bad for _, bad in out) else 0


# ---- verify ----

def _checks():
    """(name, bound, measure) triples; measure returns (error, value)."""
    from .corrlen import inverse_corrlen, tonks_field_value
    from .excitations import ExcitationSpec
    from .ground_state import FermiInterval, ground_state_summary, resolvent
    from .oracles import tonks_field_corrlen
    from .thermo import ModelParams
    from .numerics import kernel_xxz, theta_xxz
    from .xxz import XxzParams, affleck_ratio

    def z_bar():
        z = ground_state_summary(2.0, 1.0).z
        return abs(z - 1.38), z

    def z_rho():
        gs = ground_state_summary(2.0, 1.0)
        return abs(gs.z - 2 * math.pi * gs.rho_at_q), gs.z

    def resolvent_sum():
        gs = ground_state_summary(2.0, 1.0)
        fi = FermiInterval(gs.q)
        x, w = fi.quadrature
        val = float(np.sum(w * resolvent(2.0, fi, x, gs.q)))
        return abs(val - (2 * math.pi * gs.rho_at_q - 1)), val

    def tonks():
        errs = [abs(tonks_field_value(mu, T) - tonks_field_corrlen(mu, T))
                for mu, T in ((-1.0, 1.0), (1.0, 1.0), (-0.5, 0.2))]
        return max(errs), tonks_field_value(1.0, 1.0)

    def contour():
        errs = []
        for mu, T in ((1.0, 1.0), (1.0, 0.5), (0.5, 0.5)):
            p = ModelParams(2.0, mu, T)
            a = inverse_corrlen(p, ExcitationSpec("field", contour_mode="straight")).value
            b = inverse_corrlen(p, ExcitationSpec("field", contour_mode="indented")).value
            errs.append(abs(a - b))
        return max(errs), a.real

    def lattice_parity():
        lam = np.linspace(-3, 3, 61)
        e1 = np.max(np.abs(kernel_xxz(lam, 2.5) - kernel_xxz(-lam, 2.5)))
        e2 = np.max(np.abs(theta_xxz(lam, 2.5) + theta_xxz(-lam, 2.5)))
        return float(max(e1, e2)), 0.0

    def affleck():
        ratio = affleck_ratio(XxzParams(2.5, 0.5, 0.01, 5e-4))
        return abs(ratio - 1), ratio

    return [("z_bar", 0.01, z_bar), ("z_equals_2pi_rho", 1e-8, z_rho),
            ("resolvent_integral", 1e-8, resolvent_sum), ("tonks_field", 1e-8, tonks),
            ("contour_modes", 1e-8, contour), ("lattice_parity", 1e-14, lattice_parity),
            ("affleck_low_T", 0.05, affleck)]


def cmd_verify(cfg):
    """Run the consistency checks; writes a JSON report and returns 1 if any fails."""
    cfg.validate()
    overrides = dict(cfg.verify_bounds or {})
    report = []
    for name, bound, fn in _checks():
        bound = float(overrides.get(name, bound))
        try:
            err, value = fn()
            ok = bool(err <= bound)
            entry = {"check": name, "bound": bound, "measured": float(err), "value": float(value),
                     "pass": ok}
        except BosecorrError as exc:
            entry = {"check": name, "bound": bound, "measured": None, "value": None,
                     "pass": False, "error": _error_marker(exc)}
        report.append(entry)
    text = json.dumps(report, indent=1) + "\n"
    if cfg.out is None or cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    return 0 if all(e["pass"] for e in report) else 1


# ---- argument handling ----

_FLAG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="bosecorr", allow_abbrev=False,
                                     description="Bose gas thermodynamics and correlation lengths")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("thermo", "corrlen", "verify"):
        p = sub.add_parser(name, allow_abbrev=False)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--format")
        p.add_argument("--jobs", type=int)
        if name == "verify":
            continue
        for flag in ("c", "mu", "mu-min", "mu-max", "T", "t-min", "t-max", "grid-lambda", "tol", "damping"):
            p.add_argument(f"--{flag}", type=_float)
        for flag in ("mu-steps", "t-steps", "grid-m", "max-iter"):
            p.add_argument(f"--{flag}", type=int)
        p.add_argument("--t-scale")
        if name == "corrlen":
            p.add_argument("--sector")
            p.add_argument("--r", type=int)
            for flag in ("phi", "phi-min", "phi-max"):
                p.add_argument(f"--{flag}", type=_float)
            p.add_argument("--phi-steps", type=int)
            p.add_argument("--branch", type=int, action="append")
    return parser


def config_from_args(argv):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        raise ConfigError("invalid command line") from exc
    values = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        for key, v in data.items():
            k = key.replace("-", "_")
            if k not in _FLAG_TYPES or k == "command":
                raise ConfigError(f"unknown config key {key!r}")
            values[k] = v
    for key, v in vars(ns).items():
        if key in ("command", "config") or v is None:
            continue
        values[key] = v
    try:
        for key, v in list(values.items()):
            typ = _FLAG_TYPES[key]
            if v is None:
                continue
            if key == "branch":
                values[key] = tuple(int(b) for b in v)
            elif typ in (float, int):
                if isinstance(v, bool) or (typ is int and isinstance(v, float) and not v.is_integer()):
                    raise ValueError(f"{key}={v!r}")
                values[key] = typ(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    try:
        return RunConfig(command=ns.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


COMMANDS = {"thermo": cmd_thermo, "corrlen": cmd_corrlen, "verify": cmd_verify}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = config_from_args(argv)
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"bosecorr: {exc}", file=sys.stderr)
        return 2
    except InvalidArgument as exc:
        print(f"bosecorr: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bosecorr: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
