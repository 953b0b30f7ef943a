"""YAML problem configuration: schema, validation and object construction.

Errors carry the dotted key path and the line of the offending node.
Unknown keys are rejected everywhere.  Symbol entries are strings in the
grammar of :mod:`gammabdm.expr`; the available variables are

* interior, cylinder: ``x, t, xi, tau, absxi, side``
* interior, Euclidean: ``x1..xd, r, xi1..xid, absxi, side``
* boundary components: the base variables of the boundary point
  (``x, t`` or ``x1..xd, r``) plus ``xip`` (tangential covector sign),
  ``xin`` and ``eta`` (normal frequencies).

``side`` is ``+1``/``-1`` on the two sides of a cut and ``0`` elsewhere.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .expr import Expression, ExpressionError
from .fiber import FiberGrid
from .fredholm import FredholmSettings
from .geometry import (
    BoundaryCospherePoint,
    CospherePoint,
    CylinderGeometry,
    EuclideanGeometry,
    GroupSpec,
    OrbitGeometry,
)
from .symbols import BdMSymbol, ComponentBoundary, InteriorSymbol, TransmissionError, embed_psdo
from .trajectory import GammaSymbol, ProjectionSymbol, restrict

__all__ = [
    "ConfigError",
    "GroupConfig",
    "GeometryConfig",
    "FiberConfig",
    "TermConfig",
    "OperatorConfig",
    "ProjectionConfig",
    "SweepConfig",
    "OracleConfig",
    "OutputConfig",
    "ProblemConfig",
    "load_config",
    "loads_config",
    "parse_point",
    "Problem",
    "build_problem",
    "DEMOS",
]


class ConfigError(ValueError):
    """Schema or value error, anchored at a key path and source line."""


# ---------------------------------------------------------------- schema
@dataclass
class GroupConfig:
    kind: str = "Z"
    action: str = "dilate"
    parameter: float = 2.0


@dataclass
class GeometryConfig:
    base: str = "cylinder"
    dim: int = 2
    group: GroupConfig = field(default_factory=GroupConfig)
    Z: list = field(default_factory=lambda: [0.0, 1.0])


@dataclass
class FiberConfig:
    N: int = 32
    L: float = 10.0
    trace_order: int = 3
    kappa_mode: str = "sinc"


@dataclass
class TermConfig:
    """One operator entry: a multiplication or a zero-order symbol.

    ``multiply`` is a covector-free function (``d`` optionally overrides
    its value on the boundary summand).  ``interior`` is a general symbol;
    ``boundary`` lists its boundary components (``a_plus``, ``a_minus``,
    ``g_plus``, ``g_minus``, ``b_plus``, ``b_minus``, ``c``, ``d``).
    Without ``boundary`` the symbol is embedded after a transmission test.
    """

    multiply: str | None = None
    d: str | None = None
    interior: str | None = None
    at_infinity: str | None = None
    boundary: dict | None = None


@dataclass
class OperatorConfig:
    matrix_size: int = 1
    terms: dict = field(default_factory=lambda: {0: TermConfig(multiply="1")})


@dataclass
class ProjectionConfig:
    preset: str | None = None
    lo: float = -math.inf
    hi: float = math.inf
    W: Any = "inside"


@dataclass
class SweepConfig:
    interior_count: int = 8
    boundary_count: int = 8
    directions: int = 8
    random_points: int = 0
    points: list = field(default_factory=list)


@dataclass
class OracleConfig:
    enabled: bool = False
    depth: int = 8
    refinements: int = 3
    n_angle: int = 8
    cells_per_level: int = 2


@dataclass
class OutputConfig:
    dir: str = "out"
    report: str = "report.json"
    csv: str = "sigma_min.csv"


@dataclass
class ProblemConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    projections: dict = field(default_factory=lambda: {"P1": ProjectionConfig(preset="full"), "P2": None})
    sweep: SweepConfig = field(default_factory=SweepConfig)
    fredholm: FredholmSettings = field(default_factory=FredholmSettings)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        """Plain data with all defaults filled in (recorded in reports)."""
        def conv(o):
            if dataclasses.is_dataclass(o):
                return {f.name: conv(getattr(o, f.name)) for f in dataclasses.fields(o)}
            if isinstance(o, dict):
                return {str(k): conv(v) for k, v in o.items()}
            if isinstance(o, (list, tuple)):
                return [conv(v) for v in o]
            if isinstance(o, float) and math.isinf(o):
                return "inf" if o > 0 else "-inf"
            return o
        return conv(self)


# ---------------------------------------------------------------- loading
class _Src:
    """Constructed YAML data with the source line of every key path."""

    def __init__(self, text: str, name: str):
        self.name = name
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{name}: invalid YAML: {exc}") from None
        self.lines: dict[str, int] = {}
        self.data = {} if node is None else self._walk(node, "")

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = self._walk(k, path + ".<key>")
                sub = f"{path}.{key}" if path else str(key)
                self.lines[sub] = k.start_mark.line + 1
                out[key] = self._walk(v, sub)
                self.lines[sub] = k.start_mark.line + 1
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._walk(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        loader = yaml.SafeLoader("")
        return loader.construct_object(node, deep=True)

    def error(self, path: str, msg: str) -> ConfigError:
        line = self.lines.get(path)
        where = f"{self.name}:{line}" if line else self.name
        return ConfigError(f"{where}: {path or '<root>'}: {msg}")


def _coerce(src: _Src, path: str, value, typ):
    if value is None:
        return None
    if typ is bool:
        if not isinstance(value, bool):
            raise src.error(path, f"expected a boolean, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise src.error(path, f"expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, str) and value.strip().lstrip("+-") in ("inf", "infinity"):
            return -math.inf if value.strip().startswith("-") else math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise src.error(path, f"expected a number, got {value!r}")
        return float(value)
    if typ is str:
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise src.error(path, f"expected a string, got {value!r}")
        return str(value)
    return value


_TYPES = {"int": int, "float": float, "str": str, "bool": bool, "str | None": str}


def _build(src: _Src, cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise src.error(path, f"expected a mapping for {cls.__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise src.error(sub, f"unknown key {key!r} (allowed: {', '.join(names)})")
        ftype = names[key].type
        nested = {"group": GroupConfig}.get(key) if cls is GeometryConfig else None
        if nested is not None:
            kwargs[key] = _build(src, nested, value, sub)
        elif isinstance(ftype, str) and ftype in _TYPES:
            kwargs[key] = _coerce(src, sub, value, _TYPES[ftype])
        elif ftype in (int, float, str, bool):
            kwargs[key] = _coerce(src, sub, value, ftype)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise src.error(path, str(exc)) from None


def _build_terms(src: _Src, data, path: str, n: int) -> dict:
    if not isinstance(data, dict) or not data:
        raise src.error(path, "expected a nonempty mapping k -> term")
    out = {}
    for k, v in data.items():
        sub = f"{path}.{k}"
        if isinstance(k, bool) or not isinstance(k, int):
            raise src.error(sub, f"term keys must be integers, got {k!r}")
        if n == 1:
            out[k] = _build_term(src, v, sub)
        else:
            if not isinstance(v, list) or len(v) != n or any(not isinstance(r, list) or len(r) != n for r in v):
                raise src.error(sub, f"expected a {n}x{n} nested list of terms")
            out[k] = [[_build_term(src, e, f"{sub}[{i}][{j}]") if e is not None else None
                       for j, e in enumerate(r)] for i, r in enumerate(v)]
    return out


def _build_term(src: _Src, v, path: str) -> TermConfig:
    if isinstance(v, (int, float, str)) and not isinstance(v, bool):
        v = {"multiply": str(v)}
    t = _build(src, TermConfig, v, path)
    if (t.multiply is None) == (t.interior is None):
        raise src.error(path, "exactly one of 'multiply' or 'interior' is required")
    if t.multiply is not None and t.boundary is not None:
        raise src.error(path, "'boundary' components belong to 'interior' terms")
    if t.boundary is not None:
        if not isinstance(t.boundary, dict):
            raise src.error(path + ".boundary", "expected a mapping of components")
        for key in t.boundary:
            if key not in _COMPONENTS:
                raise src.error(f"{path}.boundary.{key}", f"unknown component {key!r}")
        t.boundary = {k: str(e) for k, e in t.boundary.items()}
    return t


def _build_projection(src: _Src, v, path: str):
    if v is None:
        return None
    if isinstance(v, str):
        return ProjectionConfig(preset=v)
    pc = _build(src, ProjectionConfig, v, path)
    if isinstance(pc.W, list):
        pc.W = tuple(float(w) for w in pc.W)
    elif pc.W not in ("inside", "all", "none"):
        raise src.error(path + ".W", f"W must be 'inside', 'all', 'none' or a list of levels, got {pc.W!r}")
    return pc


def loads_config(text: str, name: str = "<config>") -> ProblemConfig:
    """Parse and validate a YAML configuration string."""
    src = _Src(text, name)
    data = src.data
    if not isinstance(data, dict):
        raise src.error("", "top level must be a mapping")
    allowed = {f.name for f in dataclasses.fields(ProblemConfig)}
    for key in data:
        if key not in allowed:
            raise src.error(str(key), f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
    cfg = ProblemConfig()
    if "geometry" in data:
        cfg.geometry = _build(src, GeometryConfig, data["geometry"], "geometry")
        if not isinstance(cfg.geometry.Z, list) or not cfg.geometry.Z:
            raise src.error("geometry.Z", "expected a nonempty list of levels")
        cfg.geometry.Z = [_coerce(src, f"geometry.Z[{i}]", z, float) for i, z in enumerate(cfg.geometry.Z)]
    if "fiber" in data:
        cfg.fiber = _build(src, FiberConfig, data["fiber"], "fiber")
    if "operator" in data:
        op = data["operator"]
        if not isinstance(op, dict):
            raise src.error("operator", "expected a mapping")
        for key in op:
            if key not in ("matrix_size", "terms"):
                raise src.error(f"operator.{key}", f"unknown key {key!r} (allowed: matrix_size, terms)")
        n = _coerce(src, "operator.matrix_size", op.get("matrix_size", 1), int)
        if n < 1:
            raise src.error("operator.matrix_size", "must be positive")
        terms = _build_terms(src, op.get("terms"), "operator.terms", n)
        cfg.operator = OperatorConfig(n, terms)
    if "projections" in data:
        pr = data["projections"]
        if not isinstance(pr, dict):
            raise src.error("projections", "expected a mapping with P1 and optionally P2")
        for key in pr:
            if key not in ("P1", "P2"):
                raise src.error(f"projections.{key}", f"unknown key {key!r} (allowed: P1, P2)")
        cfg.projections = {"P1": _build_projection(src, pr.get("P1", "full"), "projections.P1"),
                           "P2": _build_projection(src, pr.get("P2"), "projections.P2")}
    if "sweep" in data:
        cfg.sweep = _build(src, SweepConfig, data["sweep"], "sweep")
        for i, p in enumerate(cfg.sweep.points):
            try:
                _check_point_spec(p)
            except ConfigError as exc:
                raise src.error(f"sweep.points[{i}]", str(exc)) from None
    if "fredholm" in data:
        cfg.fredholm = _build(src, FredholmSettings, data["fredholm"], "fredholm")
    if "oracle" in data:
        cfg.oracle = _build(src, OracleConfig, data["oracle"], "oracle")
    if "output" in data:
        cfg.output = _build(src, OutputConfig, data["output"], "output")
    if "seed" in data:
        cfg.seed = _coerce(src, "seed", data["seed"], int)
    try:
        geo = build_geometry(cfg.geometry)
    except (ValueError, ConfigError) as exc:
        raise src.error("geometry", str(exc)) from None
    for k, t in cfg.operator.terms.items():
        entries = [((), t)] if cfg.operator.matrix_size == 1 else [
            ((i, j), e) for i, row in enumerate(t) for j, e in enumerate(row) if e is not None]
        for idx, e in entries:
            path = f"operator.terms.{k}" + "".join(f"[{i}]" for i in idx)
            try:
                build_term(geo, e)
            except (ValueError, ExpressionError) as exc:
                raise src.error(path, str(exc)) from None
    try:
        build_problem(cfg)
    except (ValueError, ExpressionError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return cfg


def load_config(path: str) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), str(path))


# ---------------------------------------------------------------- points
_POINT_KEYS = {
    "interior": {"kind", "x", "xi", "side"},
    "boundary": {"kind", "level", "angle", "sign"},
    "infinity": {"kind"},
}


def _check_point_spec(spec) -> None:
    if not isinstance(spec, dict) or spec.get("kind") not in _POINT_KEYS:
        raise ConfigError("a point needs kind: interior | boundary | infinity")
    extra = set(spec) - _POINT_KEYS[spec["kind"]]
    if extra:
        raise ConfigError(f"unknown point keys {sorted(extra)}")


def parse_point(spec: dict | str, geometry: OrbitGeometry):
    """Build a cosphere point from a mapping (or a YAML flow string).

    ``{kind: interior, x: [..], xi: [..], side: "+"}``,
    ``{kind: boundary, level: 1.0, angle: 0.3, sign: 1}`` or
    ``{kind: infinity}``.
    """
    if isinstance(spec, str):
        try:
            spec = yaml.safe_load(spec)
        except yaml.YAMLError as exc:
            raise ConfigError(f"unparseable point: {exc}") from None
    _check_point_spec(spec)
    kind = spec["kind"]
    try:
        if kind == "infinity":
            return CospherePoint.infinity()
        if kind == "boundary":
            return geometry.boundary_point(float(spec["level"]), float(spec.get("angle", 0.0)), int(spec.get("sign", 1)))
        x = [float(c) for c in spec["x"]]
        xi = [float(c) for c in spec["xi"]]
        if len(x) != geometry.dim or len(xi) != geometry.dim:
            raise ConfigError(f"point needs {geometry.dim} coordinates")
        side = spec.get("side")
        p = CospherePoint(tuple(x), tuple(xi), None if side is None else str(side))
        geometry.validate(p)
        return p
    except KeyError as exc:
        raise ConfigError(f"point is missing {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"point outside geometry: {exc}") from None


# ---------------------------------------------------------------- building
_COMPONENTS = ("a_plus", "a_minus", "g_plus", "g_minus", "b_plus", "b_minus", "c", "d")


def interior_variables(geometry: OrbitGeometry) -> list[str]:
    if geometry.base == "cylinder":
        return ["x", "t", "xi", "tau", "absxi", "side"]
    d = geometry.dim
    return [f"x{i + 1}" for i in range(d)] + ["r"] + [f"xi{i + 1}" for i in range(d)] + ["absxi", "side"]


def boundary_variables(geometry: OrbitGeometry) -> list[str]:
    if geometry.base == "cylinder":
        base = ["x", "t"]
    else:
        base = [f"x{i + 1}" for i in range(geometry.dim)] + ["r"]
    return base + ["xip", "xin", "eta"]


_SIDE = {"+": 1.0, "-": -1.0, None: 0.0}


def _interior_values(geometry: OrbitGeometry, X, XI, side) -> dict:
    X, XI = np.asarray(X, dtype=float), np.asarray(XI, dtype=float)
    vals = {"absxi": np.linalg.norm(XI, axis=-1), "side": _SIDE[side]}
    if geometry.base == "cylinder":
        vals.update(x=X[..., 0], t=X[..., 1], xi=XI[..., 0], tau=XI[..., 1])
    else:
        for i in range(geometry.dim):
            vals[f"x{i + 1}"] = X[..., i]
            vals[f"xi{i + 1}"] = XI[..., i]
        vals["r"] = np.linalg.norm(X, axis=-1)
    return vals


def _boundary_values(geometry: OrbitGeometry, p: BoundaryCospherePoint) -> dict:
    if geometry.base == "cylinder":
        return {"x": p.x[0], "t": p.x[1], "xip": float(np.sign(p.xi[0]))}
    vals = {f"x{i + 1}": p.x[i] for i in range(geometry.dim)}
    vals["r"] = float(np.linalg.norm(p.x))
    T = geometry.tangent_basis(p.x)
    vals["xip"] = float(np.sign(np.asarray(p.xi) @ T[0])) if geometry.dim == 2 else 1.0
    return vals


def _interior_symbol(geometry: OrbitGeometry, source: str, at_infinity: str | None, label: str) -> InteriorSymbol:
    ex = Expression.parse(source, interior_variables(geometry))
    vinf = None
    if at_infinity is not None:
        vinf = complex(Expression.parse(at_infinity, [])())
    elif not ex.names:
        vinf = complex(ex())

    def af(X, XI, side):
        return ex(**_interior_values(geometry, X, XI, side))

    def f(p: CospherePoint):
        return complex(np.asarray(af(np.array([p.x]), np.array([p.xi]), p.side)).ravel()[0])

    return InteriorSymbol(f, vinf, af, label=source)


def _component_fn(geometry: OrbitGeometry, name: str, source: str):
    ex = Expression.parse(source, boundary_variables(geometry))
    if name in ("g_plus", "g_minus"):
        return lambda p: (lambda xin, eta: ex(**_boundary_values(geometry, p), xin=xin, eta=eta))
    if name == "d":
        return lambda p: complex(np.asarray(ex(**_boundary_values(geometry, p), xin=0.0, eta=0.0)).ravel()[0])
    return lambda p: (lambda xin: ex(**_boundary_values(geometry, p), xin=xin, eta=0.0) * np.ones_like(xin))


def build_term(geometry: OrbitGeometry, t: TermConfig) -> BdMSymbol:
    if t.multiply is not None:
        f = _interior_symbol(geometry, t.multiply, t.at_infinity, t.multiply)
        d = None
        if t.d is not None:
            ex = Expression.parse(t.d, boundary_variables(geometry))
            d = lambda p: complex(np.asarray(ex(**_boundary_values(geometry, p), xin=0.0, eta=0.0)).ravel()[0])
        return BdMSymbol.multiplier(f, geometry, d)
    a = _interior_symbol(geometry, t.interior, t.at_infinity, t.interior)
    if t.boundary is None:
        try:
            return embed_psdo(a, geometry)
        except TransmissionError as exc:
            raise ConfigError(f"symbol {t.interior!r}: {exc}") from None
    parts = {k: _component_fn(geometry, k, s) for k, s in t.boundary.items()}
    return BdMSymbol(a, ComponentBoundary(**parts))


def build_geometry(g: GeometryConfig) -> OrbitGeometry:
    group = GroupSpec(g.group.action, g.group.parameter, g.group.kind)
    if g.base == "cylinder":
        if g.dim != 2:
            raise ConfigError("geometry.dim: the cylinder is two-dimensional")
        return CylinderGeometry(group, g.Z)
    if g.base == "euclidean":
        return EuclideanGeometry(group, g.Z, g.dim)
    raise ConfigError(f"geometry.base: unknown base {g.base!r} (cylinder | euclidean)")


def build_projection(geometry: OrbitGeometry, pc: ProjectionConfig) -> ProjectionSymbol:
    if pc.preset is not None:
        return ProjectionSymbol.preset(geometry, pc.preset)
    return ProjectionSymbol(geometry, pc.lo, pc.hi, pc.W)


@dataclass
class Problem:
    """Objects built from a configuration."""

    config: ProblemConfig
    geometry: OrbitGeometry
    D: GammaSymbol
    P1: ProjectionSymbol
    P2: ProjectionSymbol
    grid: FiberGrid

    @property
    def triple(self):
        return restrict(self.D, self.P1, self.P2)


def build_problem(cfg: ProblemConfig) -> Problem:
    geo = build_geometry(cfg.geometry)
    n = cfg.operator.matrix_size
    terms = {}
    for k, t in cfg.operator.terms.items():
        if n == 1:
            terms[k] = build_term(geo, t)
        else:
            terms[k] = [[BdMSymbol.zero() if e is None else build_term(geo, e) for e in row] for row in t]
    D = GammaSymbol(geo, terms, n)
    P1 = build_projection(geo, cfg.projections["P1"])
    P2 = P1 if cfg.projections.get("P2") is None else build_projection(geo, cfg.projections["P2"])
    if cfg.fiber.kappa_mode not in ("sinc", "power"):
        raise ConfigError(f"fiber.kappa_mode: unknown mode {cfg.fiber.kappa_mode!r}")
    grid = FiberGrid(cfg.fiber.N, cfg.fiber.L, cfg.fiber.trace_order)
    return Problem(cfg, geo, D, P1, P2, grid)


# ---------------------------------------------------------------- demos
DEMOS = {
    "cylinder": """\
geometry:
  base: cylinder
  group: {kind: Z, action: dilate, parameter: 2.0}
  Z: [0.0, 1.0]
fiber: {N: 32, L: 10.0}
operator:
  terms:
    0: "1"
    1: "0.3"
projections: {P1: cylinder-restriction}
sweep: {interior_count: 4, boundary_count: 4, directions: 4}
oracle: {enabled: true, depth: 8, refinements: 3}
""",
    "cylinder-sin": """\
geometry:
  base: cylinder
  group: {kind: Z, action: dilate, parameter: 2.0}
  Z: [0.0, 1.0]
fiber: {N: 32, L: 10.0}
operator:
  terms:
    0: {multiply: "sin(x)"}
projections: {P1: cylinder-restriction}
sweep: {interior_count: 4, boundary_count: 4, directions: 4}
oracle: {enabled: true, depth: 8, refinements: 3}
""",
    "disc": """\
geometry:
  base: euclidean
  dim: 2
  group: {kind: Z, action: dilate, parameter: 2.0}
  Z: [1.0]
fiber: {N: 32, L: 10.0}
operator:
  terms:
    0: {multiply: "1 + 0.25*x1"}
    1: {multiply: "0.3*exp(-r**2)"}
    -1: {multiply: "0.2*cos(x2)"}
projections: {P1: disc-example}
sweep: {interior_count: 4, boundary_count: 4, directions: 4}
oracle: {enabled: true, depth: 8, refinements: 3}
""",
}
