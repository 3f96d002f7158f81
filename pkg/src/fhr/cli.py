"""Command-line front end.

Usage
-----
::

    fhr kernel --x 0.5 --t 0.5 [--config run.ini]
    fhr verify {laplace,identities,moments,bessel} [--config run.ini]
    fhr solve --config run.ini [--out DIR]
    fhr bounds RUN_DIR

Exit codes: 0 success, 1 a verification or bound failed, 2 input error
(bad config, domain error, missing or corrupt run files), 3
non-convergence.

Configuration files are INI-style ``key = value`` documents with the
sections ``[model]``, ``[grid]``, ``[initial]``, ``[solver]`` and
``[output]``; ``#`` starts a comment.  Unknown sections or keys and
repeated keys are rejected.  Every key is optional; the defaults are
listed in :data:`DEFAULTS` and printed by ``fhr --help``.
"""
import argparse
import configparser
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .bounds import check_run, pointwise_H_bound
from .convolution import IDENTITY_GRID, check_identities
from .errors import (AccuracyError, ConfigError, DataError, DegenerateBoundConstant,
                     DomainError, FHRError, NonConvergenceError, ValidationError)
from .grid import Field, Grid
from .kernel import (DEFAULT_QUAD, FORMS, QuadratureSpec, build_kernel_table, evaluate,
                     moment_oracle, spatial_integral, verify_laplace)
from .params import RATE_COINCIDENCE, ModelParams, bound_constants, validate
from .solver import (GENERATORS, FDMOptions, InitialData, PicardSpec, SolutionField,
                     fdm_solve, initial_profile, picard_solve, representation_318)
from .specfun import bessel_i, bessel_j, series_oracle

__all__ = [
    "DEFAULTS",
    "ProfileSpec",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "emit_config",
    "cmd_kernel",
    "cmd_verify",
    "cmd_solve",
    "cmd_bounds",
    "main",
    "EXIT_OK",
    "EXIT_FAILED",
    "EXIT_INPUT",
    "EXIT_NONCONVERGENCE",
]

log = logging.getLogger("fhr")

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_NONCONVERGENCE = 0, 1, 2, 3

#: Default value of every configuration key.  The model constants are an
#: illustrative demonstration set, not fitted or measured data.
DEFAULTS = {
    "model": {"a": 0.5, "D": 1.0, "eps": 0.08, "beta": 0.8, "delta": 0.04,
              "d": 1.0, "c": 0.3, "h": 0.2},
    "grid": {"x_min": -20.0, "x_max": 20.0, "nx": 401, "t_max": 2.0, "nt": 201},
    "initial": {
        **{f"{v}_{k}": val for v in ("u0", "w0", "y0")
           for k, val in (("kind", "zero"), ("center", 0.0), ("width", 1.0),
                          ("amplitude", 0.0), ("value", 0.0))},
        "u0_kind": "gaussian", "u0_width": 2.0, "u0_amplitude": 0.5,
    },
    "solver": {"tol": 1e-6, "max_iter": 50, "rel_tol": 1e-8, "abs_tol": 1e-12,
               "max_subdivisions": 2000, "oracle": False, "kernel_form": "exact"},
    "output": {"dir": "fhr_run", "label": ""},
}

_INT_KEYS = {"nx", "nt", "max_iter", "max_subdivisions"}
_STR_KEYS = {"kernel_form", "dir", "label", "u0_kind", "w0_kind", "y0_kind"}
_BOOL_KEYS = {"oracle"}

#: Thresholds of the verification suites.
LAPLACE_X = (0.25, 0.5, 1.0, 2.0, 4.0)
LAPLACE_S = (0.5, 1.0, 2.0, 4.0, 8.0)
LAPLACE_TOL = 1e-4
MOMENT_T = (0.25, 0.5, 1.0, 2.0, 5.0)
MOMENT_TOL = 1e-5
IDENTITY_TOL = 1e-4
IDENTITY_MIN_RATIO = 2.0
# Residuals below this are already at rounding level and cannot shrink further.
IDENTITY_ROUNDOFF = 1e-12
BESSEL_TOL = 1e-12
BESSEL_Z_MAX = 50.0

FIELD_HEADER = "x,t,u,w,y"
BOUNDS_HEADER = "t,observed,envelope,margin,pass"
DIAG_HEADER = "iteration,update_norm"
LOCK_NAME = ".fhr.lock"


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileSpec:
    """A named initial profile: ``gaussian``, ``constant`` or ``zero``."""

    kind: str = "zero"
    center: float = 0.0
    width: float = 1.0
    amplitude: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in GENERATORS:
            raise ConfigError(f"unknown initial profile {self.kind!r}; expected one of {GENERATORS}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ConfigError("gaussian width must be positive")

    def sample(self, x):
        return initial_profile(x, self.kind, self.center, self.width, self.amplitude, self.value)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run.

    Attributes
    ----------
    params : ModelParams
    grid : Grid
    u0, w0, y0 : ProfileSpec
    picard : PicardSpec
    quad : QuadratureSpec
    output_dir : str
    seed_label : str
        Free text copied to the manifest.
    oracle : bool
        Also run the finite-difference and representation cross-checks.
    kernel_form : {"exact", "printed"}
    defaulted : tuple of str
        ``section.key`` names that were not given in the file.
    """

    params: ModelParams
    grid: Grid
    u0: ProfileSpec = ProfileSpec("gaussian", 0.0, 2.0, 0.5)
    w0: ProfileSpec = ProfileSpec()
    y0: ProfileSpec = ProfileSpec()
    picard: PicardSpec = PicardSpec()
    quad: QuadratureSpec = DEFAULT_QUAD
    output_dir: str = "fhr_run"
    seed_label: str = ""
    oracle: bool = False
    kernel_form: str = "exact"
    defaulted: tuple = field(default=(), compare=False)

    def initial_data(self):
        x = self.grid.x
        return InitialData(self.u0.sample(x), self.w0.sample(x), self.y0.sample(x))


def _convert(section, key, text):
    default = DEFAULTS[section][key]
    try:
        if key in _BOOL_KEYS:
            low = text.strip().lower()
            if low not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(text)
            return configparser.ConfigParser.BOOLEAN_STATES[low]
        if key in _INT_KEYS:
            return int(text)
        if key in _STR_KEYS:
            return text.strip()
        return float(text)
    except ValueError:
        kind = type(default).__name__
        raise ConfigError(f"[{section}] {key} = {text!r} is not a valid {kind}") from None


def _new_parser():
    parser = configparser.ConfigParser(strict=True, interpolation=None,
                                       inline_comment_prefixes=("#",),
                                       comment_prefixes=("#", ";"),
                                       default_section="__no_default_section__")
    parser.optionxform = str          # keys are case-sensitive ("D" vs "d")
    return parser


def _read(parser, text, source):
    try:
        parser.read_string(text, source=source)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        what = (f"key {exc.option!r} in [{exc.section}]"
                if isinstance(exc, configparser.DuplicateOptionError)
                else f"section [{exc.section}]")
        raise ConfigError(f"{source}:{exc.lineno}: duplicate {what}") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()!r}") from None


def _from_sections(sections, source, strict_model=True):
    """Build a :class:`RunConfig` from ``{section: {key: text}}``."""
    unknown = set(sections) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}; "
                          f"expected {list(DEFAULTS)}")
    values, defaulted = {}, []
    for sec, keys in DEFAULTS.items():
        given = sections.get(sec, {})
        bad = set(given) - set(keys)
        if bad:
            raise ConfigError(f"{source}: unknown key(s) {sorted(bad)} in [{sec}]; "
                              f"allowed: {sorted(keys)}")
        vals = {}
        for key, default in keys.items():
            if key in given:
                vals[key] = _convert(sec, key, given[key])
            else:
                vals[key] = default
                defaulted.append(f"{sec}.{key}")
        values[sec] = vals

    g = values["grid"]
    grid = Grid(g["x_min"], g["x_max"], g["nx"], g["t_max"], g["nt"])
    ini = values["initial"]
    profiles = {v: ProfileSpec(ini[f"{v}_kind"], ini[f"{v}_center"], ini[f"{v}_width"],
                               ini[f"{v}_amplitude"], ini[f"{v}_value"])
                for v in ("u0", "w0", "y0")}
    s = values["solver"]
    if s["kernel_form"] not in FORMS:
        raise ConfigError(f"[solver] kernel_form must be one of {FORMS}")
    picard = PicardSpec(s["tol"], s["max_iter"])
    try:
        quad = QuadratureSpec(s["rel_tol"], s["abs_tol"], s["max_subdivisions"])
    except DomainError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    raw = ModelParams(**values["model"])
    if strict_model:
        x = grid.x
        sups = [float(np.max(np.abs(profiles[v].sample(x)))) for v in ("u0", "w0", "y0")]
        params = validate(raw, *sups)
    else:
        params = _kernel_level_check(raw)
    out = values["output"]
    return RunConfig(params, grid, profiles["u0"], profiles["w0"], profiles["y0"], picard,
                     quad, out["dir"], out["label"], s["oracle"], s["kernel_form"],
                     tuple(defaulted))


def _kernel_level_check(raw):
    """Ranges under which the kernel formulas themselves make sense.

    Kernel evaluation needs only ``D > 0`` and nonnegative rates; the
    stricter ranges of :func:`fhr.params.validate` belong to the solution
    theory and would exclude the damped-heat-kernel reduction
    ``eps = delta = 0``.
    """
    for name in ("a", "D", "eps", "beta", "delta", "d", "c", "h"):
        v = getattr(raw, name)
        if not math.isfinite(v):
            raise ValidationError(name, f"must be finite, got {v!r}")
        if v < 0:
            raise ValidationError(name, f"must be nonnegative, got {v}")
    if not raw.D > 0:
        raise ValidationError("D", f"must be positive, got {raw.D}")
    return raw


def parse_config_text(text, source="<string>", strict_model=True):
    """Parse configuration text; see :func:`parse_config`."""
    parser = _new_parser()
    _read(parser, text, source)
    sections = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    return _from_sections(sections, source, strict_model)


def parse_config(path, strict_model=True):
    """Read a configuration file.

    Parameters
    ----------
    path : str or Path
    strict_model : bool
        Apply the full admissibility check of the model constants
        (``0 < a < 1``, positive rates).  ``False`` applies only the
        kernel-level check used by ``fhr kernel``.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        Missing file, syntax error or duplicate (with the line number),
        unknown section or key, unconvertible value.
    ValidationError
        A model constant out of range.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {str(path)!r} not found")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path), strict_model)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_sections(cfg):
    """``{section: {key: value}}`` view of a :class:`RunConfig`."""
    p, g = cfg.params, cfg.grid
    initial = {}
    for v in ("u0", "w0", "y0"):
        prof = getattr(cfg, v)
        for k in ("kind", "center", "width", "amplitude", "value"):
            initial[f"{v}_{k}"] = getattr(prof, k)
    return {
        "model": {k: float(getattr(p, k)) for k in DEFAULTS["model"]},
        "grid": {"x_min": float(g.x_min), "x_max": float(g.x_max), "nx": int(g.nx),
                 "t_max": float(g.t_max), "nt": int(g.nt)},
        "initial": {k: (v if isinstance(v, str) else float(v)) for k, v in initial.items()},
        "solver": {"tol": float(cfg.picard.tol), "max_iter": int(cfg.picard.max_iter),
                   "rel_tol": float(cfg.quad.rel_tol), "abs_tol": float(cfg.quad.abs_tol),
                   "max_subdivisions": int(cfg.quad.max_subdivisions),
                   "oracle": bool(cfg.oracle), "kernel_form": cfg.kernel_form},
        "output": {"dir": cfg.output_dir, "label": cfg.seed_label},
    }


def emit_config(cfg):
    """Serialise a :class:`RunConfig` to configuration text.

    Floats are written with ``repr`` so that
    ``parse_config_text(emit_config(cfg)) == cfg``.
    """
    lines = []
    for sec, keys in config_sections(cfg).items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in keys.items())
        lines.append("")
    return "\n".join(lines)


def _defaults_help():
    rows = ["configuration defaults (every key optional):"]
    for sec, keys in DEFAULTS.items():
        rows.append(f"  [{sec}]")
        rows.extend(f"    {k} = {_fmt(v)}" for k, v in keys.items())
    rows.append("  initial profiles: gaussian (center, width, amplitude), constant (value), zero")
    rows.append("  the [model] defaults are an illustrative demonstration set, not measured data")
    rows.append("")
    rows.append("exit codes: 0 ok, 1 verification failed, 2 input error, 3 non-convergence")
    rows.append("environment: FHR_THREADS caps the number of worker threads")
    return "\n".join(rows)


def _load(config, strict_model=True):
    if config is None:
        return parse_config_text("", "<defaults>", strict_model)
    return parse_config(config, strict_model)


# --------------------------------------------------------------------------
# Run directories
# --------------------------------------------------------------------------

@contextmanager
def run_lock(run_dir):
    """Exclusive marker file guarding a run directory."""
    path = Path(run_dir) / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"run directory {str(run_dir)!r} is locked by another process "
                          f"(remove {LOCK_NAME} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_fields(path, grid, u, w, y):
    """``x,t,u,w,y`` rows, time-major, 17 significant digits."""
    X, T = np.meshgrid(grid.x, grid.t)           # shape (nt, nx): t outer, x inner
    cols = [X.ravel(), T.ravel()] + [np.asarray(f).T.ravel() for f in (u, w, y)]
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", delimiter=",",
               header=FIELD_HEADER, comments="")


def read_fields(path, grid):
    """Inverse of :func:`write_fields`; returns ``(u, w, y)`` of shape ``(nx, nt)``.

    Raises
    ------
    DataError
        Missing file, wrong header, unparsable or non-finite entries, or
        coordinates that do not match ``grid``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path.name} is missing from the run directory")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != FIELD_HEADER:
            raise DataError(f"{path.name}: header {header!r}, expected {FIELD_HEADER!r}")
        try:
            arr = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{path.name}: {exc}") from None
    if arr.shape != (grid.nx * grid.nt, 5):
        raise DataError(f"{path.name}: {arr.shape[0]} rows x {arr.shape[1]} columns, expected "
                        f"{grid.nx * grid.nt} x 5")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path.name}: non-finite entries")
    arr = arr.reshape(grid.nt, grid.nx, 5)
    X, T = np.meshgrid(grid.x, grid.t)
    if not (np.allclose(arr[..., 0], X, rtol=0, atol=1e-9 * max(1.0, grid.dx))
            and np.allclose(arr[..., 1], T, rtol=0, atol=1e-9 * max(1.0, grid.dt))):
        raise DataError(f"{path.name}: coordinates do not match the configured grid")
    return tuple(arr[..., j].T.copy() for j in (2, 3, 4))


def _write_csv(path, header, rows, fmt="%.17g"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt % c for c in row) + "\n")


def _derived_constants(p):
    out = {"l": p.l, "q": p.q}
    for name in ("S", "M", "N"):
        try:
            out[name] = getattr(bound_constants(p, (name,)), name)
        except DegenerateBoundConstant as exc:
            out[name] = {"degenerate": str(exc)}
    return out


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_kernel(x, t, cfg, out=None):
    """Print ``H1``, ``H2``, ``H``, the pointwise envelope and its margin.

    Returns
    -------
    int
        0 when ``|H|`` is within the envelope (up to the numerical slack),
        1 otherwise.

    Raises
    ------
    DomainError
        For ``t <= 0`` or non-finite ``x``.
    """
    out = sys.stdout if out is None else out
    if not (math.isfinite(x) and math.isfinite(t)) or t <= 0:
        raise DomainError(f"kernel needs finite x and t > 0, got x={x}, t={t}")
    p = cfg.params
    vals = evaluate(("H1", "H2", "H"), x, t, p, cfg.quad, cfg.kernel_form)
    H = float(vals["H"])
    bound = float(pointwise_H_bound(x, t, p))
    margin = bound - abs(H)
    ok = margin >= -(1e-7 + 1e-4 * bound)
    print(f"x      = {x:.15g}", file=out)
    print(f"t      = {t:.15g}", file=out)
    for k in ("H1", "H2", "H"):
        print(f"{k:<6} = {float(vals[k]):.15g}", file=out)
    print(f"bound  = {bound:.15g}", file=out)
    print(f"margin = {margin:.15g}", file=out)
    print(f"status = {'within bound' if ok else 'BOUND VIOLATED'}", file=out)
    return EXIT_OK if ok else EXIT_FAILED


def _verify_laplace(cfg, out):
    res = verify_laplace(LAPLACE_X, LAPLACE_S, cfg.params, cfg.quad, form=cfg.kernel_form)
    rows = [(f"x={x:g} s={s:g}", res[i, j], LAPLACE_TOL, "<=")
            for i, x in enumerate(LAPLACE_X) for j, s in enumerate(LAPLACE_S)]
    return rows


def _verify_moments(cfg, out):
    p = cfg.params
    oracle = moment_oracle(np.array(MOMENT_T), p)
    mass = spatial_integral("H", np.array(MOMENT_T), p, cfg.quad, form=cfg.kernel_form)
    return [(f"t={t:g}", abs(m - o), MOMENT_TOL, "<=") for t, m, o in zip(MOMENT_T, mass, oracle)]


def _verify_identities(cfg, out):
    p = cfg.params
    if abs(p.dd - p.be) <= RATE_COINCIDENCE * (p.dd + p.be):
        print("rates coincide (beta*eps = delta*d): identities collapse to "
              "e^{-dd t} * H = K_delta", file=out)
    coarse = check_identities(IDENTITY_GRID, p, cfg.quad, cfg.kernel_form)
    fine = check_identities(IDENTITY_GRID.refined(2), p, cfg.quad, cfg.kernel_form)
    rows = []
    for name, r in coarse.residuals.items():
        rows.append((f"{name} (coarse)", r, IDENTITY_TOL, "<="))
        rf = fine.residuals[name]
        rows.append((f"{name} (refined)", rf, IDENTITY_TOL, "<="))
        if r > IDENTITY_ROUNDOFF:
            ratio = r / rf if rf > 0 else math.inf
            rows.append((f"{name} (shrink factor)", ratio, IDENTITY_MIN_RATIO, ">="))
    return rows


def bessel_errors(z):
    """Scaled errors ``|f - oracle| / max(1, |oracle|)`` for ``J0, J1, I0, I1``.

    For ``J`` (bounded by 1) this is the absolute error; for ``I``, whose
    values reach ``3e20`` at ``|z| = 50``, it is the relative error.
    """
    z = np.asarray(z, dtype=float)
    out = {}
    for name, fn, mod in (("J0", bessel_j, False), ("J1", bessel_j, False),
                          ("I0", bessel_i, True), ("I1", bessel_i, True)):
        n = int(name[1])
        ref = np.array([series_oracle(n, zz, modified=mod) for zz in z])
        got = np.asarray(fn(n, z), dtype=float)
        out[name] = np.abs(got - ref) / np.maximum(1.0, np.abs(ref))
    return out


def _verify_bessel(cfg, out):
    z = np.linspace(-BESSEL_Z_MAX, BESSEL_Z_MAX, 2001)
    errs = bessel_errors(z)
    rows = []
    for name, e in errs.items():
        i = int(np.argmax(e))
        rows.append((f"{name} worst z={z[i]:g}", float(e[i]), BESSEL_TOL, "<="))
    return rows


_SUITES = {"laplace": _verify_laplace, "identities": _verify_identities,
           "moments": _verify_moments, "bessel": _verify_bessel}


def cmd_verify(cfg, which, out=None):
    """Run one verification suite and print its residual table.

    Returns
    -------
    int
        0 iff every residual is under its threshold, else 1 (the worst
        case is named).
    """
    out = sys.stdout if out is None else out
    if which not in _SUITES:
        raise ConfigError(f"unknown suite {which!r}; expected one of {sorted(_SUITES)}")
    rows = _SUITES[which](cfg, out)
    print(f"{'case':<28} {'value':>12} {'threshold':>12}  status", file=out)
    worst, worst_score = None, -math.inf
    for case, r, tol, op in rows:
        # score > 0 means a breach; normalised so cases are comparable.
        score = (r / tol - 1.0) if op == "<=" else (tol / r - 1.0 if r > 0 else math.inf)
        print(f"{case:<28} {r:12.3e} {op + format(tol, '.1e'):>12}  "
              f"{'ok' if score <= 0 else 'FAIL'}", file=out)
        if score > worst_score:
            worst, worst_score = (case, r, tol, op), score
    case, r, tol, op = worst
    if worst_score <= 0:
        print(f"verify {which}: PASS ({len(rows)} cases, closest {case}: {r:.3e})", file=out)
        return EXIT_OK
    print(f"verify {which}: FAIL worst case {case}: {r:.3e} not {op} {tol:.1e}", file=out)
    return EXIT_FAILED


def _write_diagnostics(path, history):
    _write_csv(path, DIAG_HEADER, [(str(i), h) for i, h in enumerate(history, 1)])


def cmd_solve(cfg, out_dir=None, out=None):
    """Solve the system and persist the run.

    Writes ``fields.csv``, ``diagnostics.csv`` and ``manifest.json`` (plus
    ``fields_fdm.csv`` and ``route_diff.csv`` when ``cfg.oracle``).  The
    manifest is written last, once, and made read-only.

    Returns
    -------
    Path
        The run directory.

    Raises
    ------
    ConfigError
        If the directory already holds a manifest or is locked.
    NonConvergenceError
        After writing the partial ``diagnostics.csv``.
    """
    out = sys.stdout if out is None else out
    run = Path(out_dir if out_dir is not None else cfg.output_dir)
    run.mkdir(parents=True, exist_ok=True)
    if (run / "manifest.json").exists():
        raise ConfigError(f"{run}/manifest.json exists; runs are immutable, "
                          f"choose a new output directory")
    started = _now()
    with run_lock(run):
        grid, p = cfg.grid, cfg.params
        data = cfg.initial_data()
        log.info("building kernel table on %d x %d grid", grid.nx, grid.nt)
        table = build_kernel_table(grid, p, cfg.quad, cfg.kernel_form)
        log.info("Picard iteration")
        try:
            sol = picard_solve(data, grid, p, table, cfg.picard)
        except NonConvergenceError as exc:
            _write_diagnostics(run / "diagnostics.csv", exc.history)
            raise
        files = ["fields.csv", "diagnostics.csv"]
        write_fields(run / "fields.csv", grid, sol.u.values, sol.w.values, sol.y.values)
        _write_diagnostics(run / "diagnostics.csv", sol.update_history)
        diagnostics = {
            "method": sol.method,
            "iterations": sol.iterations_used,
            "final_update_norm": sol.final_update_norm,
            "tol": cfg.picard.tol,
            "converged": True,
            "lipschitz": sol.lipschitz,
            "phi_norm": sol.phi_norm,
            "phi_norm_rule": "sup |phi| over the realised u range, inflated by 10%",
        }
        if cfg.oracle:
            log.info("finite-difference and representation cross-checks")
            fdm = fdm_solve(data, grid, p, FDMOptions())
            rep = representation_318(data, grid, p, table, sol.u).values
            write_fields(run / "fields_fdm.csv", grid, fdm.u.values, fdm.w.values, fdm.y.values)
            pu, fu = sol.u.values, fdm.u.values
            d_pf = np.max(np.abs(pu - fu), axis=0)
            d_pr = np.max(np.abs(pu - rep), axis=0)
            d_rf = np.max(np.abs(rep - fu), axis=0)
            _write_csv(run / "route_diff.csv",
                       "t,picard_vs_fdm,picard_vs_representation,representation_vs_fdm",
                       zip(grid.t, d_pf, d_pr, d_rf))
            files += ["fields_fdm.csv", "route_diff.csv"]
            diagnostics["route_diff"] = {"picard_vs_fdm": float(d_pf.max()),
                                         "picard_vs_representation": float(d_pr.max()),
                                         "representation_vs_fdm": float(d_rf.max())}
        manifest = {
            "tool": "fhr",
            "version": __version__,
            "started": started,
            "finished": _now(),
            "seed_label": cfg.seed_label,
            "config": config_sections(cfg),
            "defaulted_keys": list(cfg.defaulted),
            "model_defaults_note": ("model constants not given in the configuration "
                                    "default to an illustrative demonstration set"),
            "derived": _derived_constants(p),
            "diagnostics": diagnostics,
            "checksums": {name: sha256_file(run / name) for name in files},
        }
        path = run / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8")
        os.chmod(path, 0o444)
    print(f"solve: {sol.iterations_used} Picard sweeps, final update "
          f"{sol.final_update_norm:.3e}; wrote {run}", file=out)
    if cfg.oracle:
        rd = diagnostics["route_diff"]
        print("route differences: " + ", ".join(f"{k}={v:.3e}" for k, v in rd.items()), file=out)
    return run


def load_run(run_dir):
    """Read a run directory back.

    Returns
    -------
    (RunConfig, dict, SolutionField, list of str)
        Configuration, manifest, solution and checksum warnings.

    Raises
    ------
    DataError
        Missing or corrupt manifest or fields.
    """
    run = Path(run_dir)
    mpath = run / "manifest.json"
    if not mpath.is_file():
        raise DataError(f"{run} has no manifest.json")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        sections = {sec: {k: _fmt(v) for k, v in keys.items()}
                    for sec, keys in manifest["config"].items()}
        phi_norm = float(manifest["diagnostics"]["phi_norm"])
        checksums = dict(manifest["checksums"])
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise DataError(f"{mpath} is corrupt: {exc}") from None
    cfg = _from_sections(sections, str(mpath))
    warnings = []
    for name, digest in checksums.items():
        f = run / name
        if f.is_file() and sha256_file(f) != digest:
            warnings.append(f"{name} does not match its manifest checksum")
    u, w, y = read_fields(run / "fields.csv", cfg.grid)
    g = cfg.grid
    sol = SolutionField(g, Field(g, u), Field(g, w), Field(g, y), phi_norm=phi_norm,
                        method=manifest["diagnostics"].get("method", "picard"))
    return cfg, manifest, sol, warnings


def _report_rows(rep):
    flags = rep.row_pass
    for i, t in enumerate(rep.times):
        status = "skipped" if rep.skipped else ("true" if flags[i] else "false")
        yield (t, rep.observed[i], rep.envelope[i], rep.margin[i], status)


def cmd_bounds(run_dir, out=None):
    """Check a persisted run against every a priori estimate.

    Writes ``bounds_u.csv``, ``bounds_w.csv``, ``bounds_y.csv`` and
    ``bounds_kernels.csv`` into the run directory.  The envelope uses the
    ``phi`` norm recorded in the manifest, so tampering with the fields
    is caught rather than absorbed into a larger envelope.

    Returns
    -------
    int
        0 iff every report passes or is skipped as degenerate, else 1.
    """
    out = sys.stdout if out is None else out
    run = Path(run_dir)
    cfg, manifest, sol, warnings = load_run(run)
    for wmsg in warnings:
        log.warning(wmsg)
        print(f"warning: {wmsg}", file=out)
    with run_lock(run):
        data = cfg.initial_data()
        table = build_kernel_table(cfg.grid, cfg.params, cfg.quad, cfg.kernel_form)
        reports = check_run(sol, cfg.params, data, table, cfg.quad, sol.phi_norm)
        by_id = {r.bound_id: r for r in reports}
        for comp in ("u", "w", "y"):
            _write_csv(run / f"bounds_{comp}.csv", BOUNDS_HEADER, _report_rows(by_id[comp]))
        kernel_rows = [(r.bound_id,) + row for r in reports if r.bound_id not in "uwy"
                       for row in _report_rows(r)]
        _write_csv(run / "bounds_kernels.csv", "bound_id," + BOUNDS_HEADER, kernel_rows)
    for r in reports:
        print(r.summary(), file=out)
    failed = [r.bound_id for r in reports if not r.skipped and not r.passed]
    skipped = [r.bound_id for r in reports if r.skipped]
    passed = len(reports) - len(failed) - len(skipped)
    line = f"bounds: {passed} passed, {len(failed)} failed, {len(skipped)} skipped (degenerate)"
    if failed:
        line += f"; failing: {', '.join(failed)}"
    print(line, file=out)
    return EXIT_FAILED if failed else EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="fhr",
        description="Fundamental solution, solver and a priori estimate checks "
                    "for the FitzHugh-Rinzel reaction-diffusion system.",
        epilog=_defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"fhr {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="evaluate H1, H2, H and the pointwise envelope")
    k.add_argument("--x", type=float, required=True, help="position")
    k.add_argument("--t", type=float, required=True, help="time (> 0)")
    k.add_argument("--config", help="configuration file (model constants)")

    v = sub.add_parser("verify", help="run a built-in verification suite")
    v.add_argument("which", choices=sorted(_SUITES))
    v.add_argument("--config", help="configuration file (model constants)")

    s = sub.add_parser("solve", help="solve the system and write a run directory")
    s.add_argument("--config", help="configuration file")
    s.add_argument("--out", help="run directory (overrides [output] dir)")

    b = sub.add_parser("bounds", help="check a run directory against the estimates")
    b.add_argument("run_dir", help="directory written by 'fhr solve'")
    return parser


def _dispatch(args):
    if args.command == "kernel":
        return cmd_kernel(args.x, args.t, _load(args.config, strict_model=False))
    if args.command == "verify":
        return cmd_verify(_load(args.config), args.which)
    if args.command == "solve":
        cmd_solve(_load(args.config), args.out)
        return EXIT_OK
    return cmd_bounds(args.run_dir)


def main(argv=None):
    """Console entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (NonConvergenceError, AccuracyError) as exc:
        print(f"fhr: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (FHRError, OSError) as exc:
        print(f"fhr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
