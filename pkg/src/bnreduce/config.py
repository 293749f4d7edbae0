"""Run configuration: a YAML file validated against a fixed key schema.

Every key is checked before any computation starts.  Errors carry the
offending key path and its line in the file.  Environment variables
BNR_OUTPUT_DIR and BNR_THREADS override the output directory and the
thread count; command-line flags override both.
"""

import copy
import os

import yaml

from .errors import ConfigError

# schema: key -> (type check, default).  Nested dicts are sections.
_NUM = (int, float)

DEFAULT_TOLERANCES = {
    "rate_exponent": 0.05,        # |fitted - predicted| exponent of eps vs lam
    "rate_constant": 0.05,        # relative gap of eps lam^k at the largest lam
    "w_exponent": None,           # None: 10% of the predicted exponent
    "pohozaev": 1e-6,
    "green_limit": 0.05,
    "projection_lambda": 0.01,    # projection fit vs bubble height ...
    "projection_min_M": 100.0,    # ... for every shot with M at least this
    "sandwich_spread": 10.0,
    "shot_rtol": 1e-11,
    "fit_last": 6,
    "robin_ratio": 0.10,
    "crit_gtol": 1e-10,
}

SCHEMA = {
    "problem": {"N": (int, 5), "q": (_NUM, 3.0), "eps": (_NUM, 0.0)},
    "domain": {
        "kind": (str, "ball"),
        "center": (list, None),
        "radius": (_NUM, 1.0),
        "shape": (str, "sphere"),          # generic: sphere | ellipsoid
        "semi_axes": (list, None),
        "points": (int, 1600),
        "offset_factor": (_NUM, 4.0),
        "provider_tol": (_NUM, 1e-4),
    },
    "sweep": {
        "M_min": (_NUM, 10.0),
        "M_max": (_NUM, 1e4),
        "count": (int, 16),
        "spacing": (str, "geometric"),
        "clamp_eps_zero": (bool, False),
    },
    "tolerances": {k: (_NUM + (type(None),), v) for k, v in DEFAULT_TOLERANCES.items()},
    "output_dir": (str, "bnr_out"),
    "threads": (int, 1),
    "robin": {"direction": (list, None), "count": (int, 12), "d_min": (_NUM, 0.01)},
    "green": {"x": (list, None), "count": (int, 10)},
    "phi": {"points": (list, None), "lambdas": (list, None)},
    "crit": {"n": (int, 1), "starts": (int, 10), "seed": (int, 0), "radius": (_NUM, 0.5)},
    "pohozaev": {"rho": (list, [0.3, 0.6])},
}


class _Lines:
    """Line numbers of keys, recorded while composing the YAML tree."""

    def __init__(self, node):
        self.map = {}
        self._walk(node, ())

    def _walk(self, node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (k.value,)
                self.map[key] = k.start_mark.line + 1
                self._walk(v, key)

    def get(self, path):
        return self.map.get(tuple(path))


def _defaults(schema):
    out = {}
    for k, v in schema.items():
        out[k] = _defaults(v) if isinstance(v, dict) else copy.deepcopy(v[1])
    return out


def _check(data, schema, lines, path=()):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", ".".join(path) or None, lines.get(path))
    out = {}
    for k, v in data.items():
        key = path + (str(k),)
        name = ".".join(key)
        if k not in schema:
            raise ConfigError("unknown key", name, lines.get(key))
        spec = schema[k]
        if isinstance(spec, dict):
            out[k] = _check(v if v is not None else {}, spec, lines, key)
            continue
        typ = spec[0]
        if typ is _NUM and isinstance(v, bool) or (typ is int and isinstance(v, bool)):
            raise ConfigError("expected a number", name, lines.get(key))
        if v is not None and not isinstance(v, typ):
            raise ConfigError(f"wrong type {type(v).__name__}", name, lines.get(key))
        out[k] = v
    return out


def _merge(base, over):
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def parse_config(text, source="<config>"):
    """Parse and validate YAML text; returns a plain dict with defaults filled."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{source}: malformed YAML", None,
                          mark.line + 1 if mark else None) from exc
    lines = _Lines(node) if node is not None else _Lines(None)
    cfg = _defaults(SCHEMA)
    if data is None:
        data = {}
    _merge(cfg, _check(data, SCHEMA, lines))
    _semantic(cfg, lines)
    return cfg


def _semantic(cfg, lines):
    def fail(msg, *path):
        raise ConfigError(msg, ".".join(path), lines.get(path))

    pr = cfg["problem"]
    N, q = pr["N"], pr["q"]
    if N < 3:
        fail("dimension must be at least 3", "problem", "N")
    if not 2 < q < 2.0 * N / (N - 2):
        fail(f"q must lie in (2, {2.0 * N / (N - 2):g})", "problem", "q")
    if pr["eps"] < 0:
        fail("eps must be nonnegative", "problem", "eps")
    dm = cfg["domain"]
    if dm["kind"] not in ("ball", "generic"):
        fail("domain kind must be 'ball' or 'generic'", "domain", "kind")
    if dm["center"] is not None and len(dm["center"]) != N:
        fail("centre has the wrong dimension", "domain", "center")
    if not dm["radius"] > 0:
        fail("radius must be positive", "domain", "radius")
    if dm["shape"] not in ("sphere", "ellipsoid"):
        fail("generic shape must be 'sphere' or 'ellipsoid'", "domain", "shape")
    if dm["shape"] == "ellipsoid" and (dm["semi_axes"] is None or len(dm["semi_axes"]) != N):
        fail("ellipsoid needs N semi-axes", "domain", "semi_axes")
    sw = cfg["sweep"]
    if sw["spacing"] != "geometric":
        fail("only geometric spacing is supported", "sweep", "spacing")
    if not 0 < sw["M_min"] < sw["M_max"]:
        fail("need 0 < M_min < M_max", "sweep", "M_min")
    if sw["count"] < 2:
        fail("need at least two sweep points", "sweep", "count")
    if cfg["threads"] < 1:
        fail("threads must be positive", "threads")
    for r in cfg["pohozaev"]["rho"]:
        if not isinstance(r, _NUM) or not 0 < r <= 1:
            fail("radii must lie in (0, 1]", "pohozaev", "rho")
        if abs(r * 20 - round(r * 20)) > 1e-9:
            fail("radii must be multiples of 0.05 (profile panel edges)", "pohozaev", "rho")


def load_config(path=None):
    if path is None:
        return parse_config("")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def apply_overrides(cfg, out=None, threads=None, tols=(), environ=None):
    """Environment first, then explicit flags."""
    env = os.environ if environ is None else environ
    if env.get("BNR_OUTPUT_DIR"):
        cfg["output_dir"] = env["BNR_OUTPUT_DIR"]
    if env.get("BNR_THREADS"):
        try:
            cfg["threads"] = int(env["BNR_THREADS"])
        except ValueError as exc:
            raise ConfigError("BNR_THREADS must be an integer", "threads") from exc
    if out is not None:
        cfg["output_dir"] = out
    if threads is not None:
        cfg["threads"] = threads
    for item in tols:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("tolerance override must look like NAME=VALUE", name)
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError("unknown tolerance", f"tolerances.{name}")
        try:
            cfg["tolerances"][name] = float(value)
        except ValueError as exc:
            raise ConfigError("tolerance value must be a number", f"tolerances.{name}") from exc
    if cfg["threads"] < 1:
        raise ConfigError("threads must be positive", "threads")
    return cfg
