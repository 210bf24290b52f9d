"""Run configuration: an INI-style document with fixed sections.

::

    [family.f1]
    kind = damped_moebius
    log_multiplier = -1
    damping = 0.3

    [family.f2]
    kind = damped_moebius
    log_multiplier = 1
    damping = 0.3

    [base]
    p1 = 0.5
    seed = 0

    [experiment]
    name = onoff
    horizon = 10000000
    checkpoints = 10000, 100000, 1000000, 10000000

    [output]
    dir = out
    bins = 4096

Map kinds: ``moebius`` (log_multiplier), ``logistic`` (``r`` with the sign
taken from the section, or a signed ``coef``), ``damped_moebius``
(log_multiplier, damping) and ``expr`` (``expr = inverse(logistic(coef=0.5))``,
also ``compose(...)``).  Unknown sections and keys are errors.
"""

from __future__ import annotations

import ast
import configparser
import re
from dataclasses import dataclass, field

from .interval_maps import (
    Direction,
    IntervalMap,
    MapFamily,
    compose,
    damped_moebius,
    logistic_perturb,
    moebius,
    validate_family,
)
from .lyapunov import Regime, classify_regime


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class PreconditionError(ValueError):
    pass


_INT, _FLOAT, _STR, _INTS, _FLOATS = "int", "float", "str", "ints", "floats"

# experiment name -> key -> (type, default)
EXPERIMENTS = {
    "classify": {"zero_tolerance": (_FLOAT, 1e-12)},
    "minimality": {"Q": (_INT, 10**6), "tau": (_FLOAT, 1e-9)},
    "stationary": {"iterations": (_INT, 10000), "metric": (_STR, "tv"), "initial": (_STR, "lebesgue"),
                   "record_every": (_INT, 100), "noise_epsilon": (_FLOAT, 0.0), "quadrature_nodes": (_INT, 32)},
    "basin-scan": {"cylinder_length": (_INT, 3), "subdivisions": (_INT, 8), "samples_per_cell": (_INT, 500),
                   "horizon": (_INT, 10000), "delta": (_FLOAT, 1e-3)},
    "graph": {"words": (_INT, 100), "horizon": (_INT, 10000), "tolerance": (_FLOAT, 1e-10)},
    "sync": {"pair_count": (_INT, 1000), "x0": (_FLOAT, 0.1), "y0": (_FLOAT, 0.9), "horizon": (_INT, 10000),
             "stride": (_INT, 10)},
    "onoff": {"orbits": (_INT, 16), "x0": (_FLOAT, 0.5), "horizon": (_INT, 10**7), "beta": (_FLOAT, 0.05),
              "checkpoints": (_INTS, [10**4, 10**5, 10**6, 10**7]), "indicator": (_STR, "auto")},
    "excursions": {"orbits": (_INT, 64), "x0": (_FLOAT, 0.5), "horizons": (_INTS, [5 * 10**6, 10**7]),
                   "beta": (_FLOAT, 0.05)},
    "clt": {"x0": (_FLOAT, 0.5), "n": (_INT, 10**5), "samples": (_INT, 10**4),
            "a_grid": (_FLOATS, [0.25 * k for k in range(1, 13)])},
    "pullback": {"x0": (_FLOAT, 0.5), "n_grid": (_INTS, [0, 10**3, 10**4, 10**5]), "words_per_n": (_INT, 100),
                 "beta": (_FLOAT, 0.05), "window": (_INT, 10**6)},
    "drift": {"x0": (_FLOAT, 0.5), "samples": (_INT, 1000), "horizon": (_INT, 10**5), "delta": (_FLOAT, 1e-6)},
    "timeseries": {"x0": (_FLOAT, 0.5), "steps": (_INT, 1000), "stride": (_INT, 1)},
}

REQUIRED_REGIMES = {
    "basin-scan": {Regime.INTERMINGLED_BASINS},
    "graph": {Regime.INTERMINGLED_BASINS},
    "sync": {Regime.SYNCHRONIZATION},
    "onoff": {Regime.ONOFF_AT_ZERO, Regime.DOUBLE_NEUTRAL},
    "excursions": {Regime.ONOFF_AT_ZERO},
    "clt": {Regime.ONOFF_AT_ZERO},
    "pullback": {Regime.ONOFF_AT_ZERO},
    "drift": {Regime.DRIFT_TO_ONE, Regime.DRIFT_TO_ZERO},
}

_MAP_KEYS = {
    "moebius": {"log_multiplier"},
    "logistic": {"r", "coef"},
    "damped_moebius": {"log_multiplier", "damping"},
    "expr": {"expr"},
}
_BASE_KEYS = {"p1", "seed"}
_OUTPUT_KEYS = {"dir", "bins", "workers"}


@dataclass
class RunConfig:
    f1: IntervalMap
    f2: IntervalMap
    p1: float = 0.5
    experiment: str = "classify"
    params: dict = field(default_factory=dict)
    seed: int = 0
    outdir: str = "out"
    bins: int = 4096
    workers: int | None = None

    @property
    def family(self) -> MapFamily:
        return MapFamily.from_p1(self.f1, self.f2, self.p1)


# -- map expressions ------------------------------------------------------------

_CALLS = {
    "moebius": lambda log_multiplier: moebius(log_multiplier),
    "logistic": lambda coef: IntervalMap("logistic", (float(coef),)),
    "damped_moebius": lambda log_multiplier, damping: damped_moebius(log_multiplier, damping),
}


def parse_map_expr(text: str) -> IntervalMap:
    """Parse ``moebius(...)``, ``logistic(...)``, ``damped_moebius(...)``, ``compose(...)``, ``inverse(...)``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad map expression {text!r}") from exc
    return _eval_node(tree.body)


def _number(node):
    value = ast.literal_eval(node)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {ast.unparse(node)!r}")
    return float(value)


def _eval_node(node):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ConfigError(f"expected a map constructor, got {ast.unparse(node)!r}")
    name = node.func.id
    if name == "compose":
        if node.keywords or not node.args:
            raise ConfigError("compose takes one or more maps")
        return compose(*(_eval_node(a) for a in node.args))
    if name == "inverse":
        if node.keywords or len(node.args) != 1:
            raise ConfigError("inverse takes exactly one map")
        return IntervalMap("inverse", components=(_eval_node(node.args[0]),))
    if name not in _CALLS:
        raise ConfigError(f"unknown map constructor {name!r}")
    if node.args:
        raise ConfigError(f"{name} takes keyword arguments only")
    kwargs = {kw.arg: _number(kw.value) for kw in node.keywords}
    try:
        return _CALLS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for {name}: {exc}") from exc


# -- parsing --------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text):
    """(section, key) -> 1-based line number, and section -> header line."""
    keys, sections = {}, {}
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith(("#", ";")):
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1).strip()
            sections.setdefault(current, lineno)
            continue
        m = _KEY_RE.match(line)
        if m and current is not None and not line[:1].isspace():
            keys.setdefault((current, m.group(1).strip()), lineno)
    return keys, sections


def _convert(value, kind, where, line):
    try:
        if kind == _INT:
            v = float(value) if re.search(r"[.eE]", value) else int(value)
            if isinstance(v, float):
                if not v.is_integer():
                    raise ValueError
                v = int(v)
            return v
        if kind == _FLOAT:
            return float(value)
        if kind == _STR:
            return value.strip()
        items = [s.strip() for s in value.split(",") if s.strip()]
        sub = _INT if kind == _INTS else _FLOAT
        return [_convert(s, sub, where, line) for s in items]
    except ValueError:
        raise ConfigError(f"{where}: cannot read {value!r} as {kind}", line) from None


def _parse_map(section, sec, lines, direction):
    def line_of(key):
        return lines.get((section, key))

    kind = sec.get("kind")
    if kind is None:
        raise ConfigError(f"[{section}] needs a 'kind'", lines.get((section, "kind")))
    kind = kind.strip()
    if kind not in _MAP_KEYS:
        raise ConfigError(f"[{section}] unknown kind {kind!r}", line_of("kind"))
    allowed = _MAP_KEYS[kind] | {"kind"}
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"[{section}] unknown key {key!r}", line_of(key))
    get = lambda key: _convert(sec[key], _FLOAT, f"[{section}] {key}", line_of(key))  # noqa: E731
    if kind == "moebius":
        return moebius(get("log_multiplier"))
    if kind == "damped_moebius":
        return damped_moebius(get("log_multiplier"), get("damping"))
    if kind == "logistic":
        if ("r" in sec) == ("coef" in sec):
            raise ConfigError(f"[{section}] logistic needs exactly one of 'r' or 'coef'", line_of("kind"))
        if "coef" in sec:
            return IntervalMap("logistic", (get("coef"),))
        return logistic_perturb(get("r"), direction)
    try:
        return parse_map_expr(sec["expr"])
    except ConfigError as exc:
        raise ConfigError(str(exc), line_of("expr")) from None


def parse_config(text: str, validate: bool = True, experiment: str | None = None) -> RunConfig:
    """Parse and validate a configuration document.

    Raises :class:`ConfigError` (with a line number where one applies) for
    syntax errors, unknown sections or keys, bad values and families that
    fail the boundary, direction or monotonicity conditions.  ``experiment``
    selects the experiment when the document does not name one, and must
    agree with it when it does.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(exc.message if hasattr(exc, "message") else str(exc), getattr(exc, "lineno", None)) from None
    lines, headers = _line_index(text)
    known = {"family.f1", "family.f2", "base", "experiment", "output"}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]", headers.get(name))
    for name in ("family.f1", "family.f2"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    f1 = _parse_map("family.f1", parser["family.f1"], lines, Direction.DOWN)
    f2 = _parse_map("family.f2", parser["family.f2"], lines, Direction.UP)

    base = parser["base"] if parser.has_section("base") else {}
    for key in base:
        if key not in _BASE_KEYS:
            raise ConfigError(f"[base] unknown key {key!r}", lines.get(("base", key)))
    p1 = _convert(base["p1"], _FLOAT, "[base] p1", lines.get(("base", "p1"))) if "p1" in base else 0.5
    seed = _convert(base["seed"], _INT, "[base] seed", lines.get(("base", "seed"))) if "seed" in base else 0
    if not 0.0 < p1 < 1.0:
        raise ConfigError(f"probabilities must lie in (0, 1), got p1={p1!r}", lines.get(("base", "p1")))

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    name = exp.get("name", experiment or "classify").strip()
    if experiment is not None and name != experiment:
        raise ConfigError(f"config is for experiment {name!r}, not {experiment!r}", lines.get(("experiment", "name")))
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}", lines.get(("experiment", "name")))
    schema = EXPERIMENTS[name]
    params = {k: (list(v) if isinstance(v, list) else v) for k, (_, v) in schema.items()}
    for key in exp:
        if key == "name":
            continue
        if key not in schema:
            raise ConfigError(f"[experiment] unknown key {key!r} for {name}", lines.get(("experiment", key)))
        params[key] = _convert(exp[key], schema[key][0], f"[experiment] {key}", lines.get(("experiment", key)))

    out = parser["output"] if parser.has_section("output") else {}
    for key in out:
        if key not in _OUTPUT_KEYS:
            raise ConfigError(f"[output] unknown key {key!r}", lines.get(("output", key)))
    outdir = out.get("dir", "out").strip()
    bins = _convert(out["bins"], _INT, "[output] bins", lines.get(("output", "bins"))) if "bins" in out else 4096
    workers = _convert(out["workers"], _INT, "[output] workers", lines.get(("output", "workers"))) if "workers" in out else None

    cfg = RunConfig(f1, f2, p1, name, params, seed, outdir, bins, workers)
    if validate:
        report = validate_family(cfg.family)
        if not report.ok:
            raise ConfigError(report.summary())
    return cfg


def check_preconditions(cfg: RunConfig) -> Regime:
    regime = classify_regime(cfg.family).regime
    required = REQUIRED_REGIMES.get(cfg.experiment)
    if required and regime not in required:
        raise PreconditionError(
            f"experiment {cfg.experiment} needs regime {sorted(r.value for r in required)}, family is {regime.value}"
        )
    return regime


# -- serialization --------------------------------------------------------------


def _fmt_value(v):
    if isinstance(v, list):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _map_lines(m: IntervalMap):
    if m.kind == "moebius":
        return [("kind", "moebius"), ("log_multiplier", repr(m.params[0]))]
    if m.kind == "logistic":
        return [("kind", "logistic"), ("coef", repr(m.params[0]))]
    if m.kind == "damped_moebius":
        return [("kind", "damped_moebius"), ("log_multiplier", repr(m.params[0])), ("damping", repr(m.params[1]))]
    return [("kind", "expr"), ("expr", m.to_expr())]


def serialize(cfg: RunConfig) -> str:
    parts = []
    for section, m in (("family.f1", cfg.f1), ("family.f2", cfg.f2)):
        parts.append(f"[{section}]")
        parts.extend(f"{k} = {v}" for k, v in _map_lines(m))
        parts.append("")
    parts += ["[base]", f"p1 = {cfg.p1!r}", f"seed = {cfg.seed}", ""]
    parts += ["[experiment]", f"name = {cfg.experiment}"]
    parts.extend(f"{k} = {_fmt_value(v)}" for k, v in cfg.params.items())
    parts += ["", "[output]", f"dir = {cfg.outdir}", f"bins = {cfg.bins}"]
    if cfg.workers is not None:
        parts.append(f"workers = {cfg.workers}")
    return "\n".join(parts) + "\n"
