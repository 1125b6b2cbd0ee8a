"""Plain-text instance files and bench configuration files.

Both use ``key = value`` lines grouped under ``[section]`` headers (the
:mod:`configparser` dialect).  Matrix values span several lines: every row
after the first goes on its own indented continuation line, entries are
separated by whitespace.  An instance file looks like::

    [meta]
    name = scsc_small
    kind = random-quadratic

    [params]
    L_x = 10
    ...

    [f]
    hessian =
        2 0
        0 1
    linear = 1 0

    [g]
    hessian =
        1
    linear = 0

    [B]
    shape = 1 2
    matrix =
        1 1

Numbers are written with 17 significant digits so reading back reproduces
every value exactly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

from .oracles import QuadraticFn
from .problem import NonQuadratic, ProblemParams, SaddlePointProblem, _uncounted
from .traces import format_float

PARAM_KEYS = ("L_x", "L_y", "L_xy", "mu_x", "mu_y", "mu_xy", "mu_yx")


class ConfigError(ValueError):
    """Malformed instance or configuration file; the message names the field."""


def _parser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case-sensitive (L_x, tau_B)
    return cp


def _fmt_row(row):
    return " ".join(format_float(v) for v in row)


def _fmt_matrix(M):
    M = np.atleast_2d(M)
    return "\n" + "\n".join(_fmt_row(r) for r in M)


def _parse_matrix(text, where):
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    try:
        M = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if M.ndim != 2 or (rows and any(len(r) != len(rows[0]) for r in rows)):
        raise ConfigError(f"{where}: rows have different lengths")
    return M


def _parse_vector(text, where):
    try:
        return np.array([float(v) for v in text.split()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def dump_instance(problem: SaddlePointProblem, meta=None) -> str:
    f, g = _uncounted(problem.f), _uncounted(problem.g)
    if not (isinstance(f, QuadraticFn) and isinstance(g, QuadraticFn)):
        raise NonQuadratic("only quadratic instances can be written to a file")
    out = io.StringIO()
    meta = dict(meta or {})
    if problem.name and "name" not in meta:
        meta["name"] = problem.name
    if meta:
        out.write("[meta]\n")
        for k, v in meta.items():
            out.write(f"{k} = {v}\n")
        out.write("\n")
    out.write("[params]\n")
    for k in PARAM_KEYS:
        out.write(f"{k} = {format_float(getattr(problem.params, k))}\n")
    for sec, fn in (("f", f), ("g", g)):
        out.write(f"\n[{sec}]\nhessian ={_fmt_matrix(fn.hessian).replace(chr(10), chr(10) + '    ')}\n")
        out.write(f"linear = {_fmt_row(fn.linear)}\n")
        out.write(f"offset = {format_float(fn.offset)}\n")
    B = problem.dense_B()
    out.write(f"\n[B]\nshape = {B.shape[0]} {B.shape[1]}\n")
    out.write(f"matrix ={_fmt_matrix(B).replace(chr(10), chr(10) + '    ')}\n")
    return out.getvalue()


def _get(cp, section, key, default=None):
    if not cp.has_section(section):
        raise ConfigError(f"missing section [{section}]")
    if key not in cp[section]:
        if default is not None:
            return default
        raise ConfigError(f"[{section}] missing field '{key}'")
    return cp[section][key]


def load_instance(text: str):
    """Parse an instance file; returns ``(problem, meta)``."""
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable instance file: {exc}") from None
    vals = {}
    for k in PARAM_KEYS:
        raw = _get(cp, "params", k, default="0" if k.startswith("mu") else None)
        try:
            vals[k] = float(raw)
        except ValueError:
            raise ConfigError(f"[params] field '{k}' is not a number: {raw!r}") from None
    try:
        params = ProblemParams(**vals)
    except ValueError as exc:
        raise ConfigError(f"[params] {exc}") from None
    fns = []
    for sec, L, mu in (("f", params.L_x, params.mu_x), ("g", params.L_y, params.mu_y)):
        H = _parse_matrix(_get(cp, sec, "hessian"), f"[{sec}] hessian")
        b = _parse_vector(_get(cp, sec, "linear", default=" ".join(["0"] * H.shape[0])), f"[{sec}] linear")
        c = float(_get(cp, sec, "offset", default="0"))
        try:
            fns.append(QuadraticFn(H, b, c, L=L, mu=mu))
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
    B = _parse_matrix(_get(cp, "B", "matrix"), "[B] matrix")
    if "shape" in cp["B"]:
        shape = tuple(int(v) for v in cp["B"]["shape"].split())
        if shape != B.shape:
            raise ConfigError(f"[B] field 'shape' says {shape} but the matrix is {B.shape}")
    meta = dict(cp["meta"]) if cp.has_section("meta") else {}
    try:
        problem = SaddlePointProblem(fns[0], fns[1], B, params, name=meta.get("name"))
    except ValueError as exc:
        raise ConfigError(f"[B] {exc}") from None
    return problem, meta


@dataclass
class RunConfig:
    """One solver run of a bench matrix."""

    name: str
    instance: str
    method: str = "sliding"
    eps: float = 1e-8
    relative: bool = True
    restarts: int | None = None
    max_iters: int = 100_000
    step: float | None = None
    tau_f: float = 1.0
    tau_g: float = 1.0
    tau_B: float = 1.0
    seed: int = 0
    output: str | None = None
    extra: dict = field(default_factory=dict)


_RUN_FIELDS = {
    "instance": str, "method": str, "eps": float, "relative": "bool", "restarts": int, "max_iters": int,
    "step": float, "tau_f": float, "tau_g": float, "tau_B": float, "seed": int, "output": str,
}
METHODS = ("sliding", "extragradient", "gda")


def parse_bench_config(text: str, seed_override=None):
    """Parse a bench configuration into a list of :class:`RunConfig`.

    ``[defaults]`` holds shared fields; every ``[run NAME]`` section is one
    run.  Unknown keys and bad values raise :class:`ConfigError` naming the
    field.
    """
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    defaults = dict(cp["defaults"]) if cp.has_section("defaults") else {}
    runs = []
    for sec in cp.sections():
        if sec == "defaults":
            continue
        if not sec.startswith("run "):
            raise ConfigError(f"unknown section [{sec}]; expected [defaults] or [run NAME]")
        name = sec[4:].strip()
        merged = {**defaults, **dict(cp[sec])}
        kw = {}
        for key, raw in merged.items():
            if key not in _RUN_FIELDS:
                raise ConfigError(f"[{sec}] unknown field '{key}'")
            kind = _RUN_FIELDS[key]
            try:
                if kind == "bool":
                    kw[key] = cp.BOOLEAN_STATES[raw.lower()]
                else:
                    kw[key] = kind(raw)
            except (ValueError, KeyError):
                raise ConfigError(f"[{sec}] field '{key}' has invalid value {raw!r}") from None
        if "instance" not in kw:
            raise ConfigError(f"[{sec}] missing field 'instance'")
        rc = RunConfig(name=name, **kw)
        if rc.method not in METHODS:
            raise ConfigError(f"[{sec}] field 'method' must be one of {METHODS}")
        if not rc.eps > 0:
            raise ConfigError(f"[{sec}] field 'eps' must be positive")
        if seed_override is not None:
            rc.seed = int(seed_override)
        runs.append(rc)
    if not runs:
        raise ConfigError("config defines no [run NAME] sections")
    return runs
