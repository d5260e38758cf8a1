"""Run configuration: a YAML file of expression strings and run settings.

Schema (all keys optional unless marked)::

    problem: es                 # stokes | pp | es            (required)
    pressure_bc: neumann        # neumann | mixed | dirichlet
    dirichlet_sides: [left]     # mixed only; subset of left/right/bottom/top
    mesh: {nx: 32, ny: 32, rect: [0, 0, 1, 1]}
    eps: 1.0                    # single value (solve, problem es)
    eps_grid: "10:1e4:10"       # start:stop:factor, or an explicit list
    reference: pp               # sweep reference: pp | stokes
    k: 2                        # asymptotics order, 0..3
    mms_n: [8, 16, 32]          # mms mesh sizes
    data:
      F: ["0", "0"]
      div_F: "0"
      u_b: ["x*(x-1)", "y*(y-1)"]
      g_b: ["2", "2"]           # vector dotted with the outward normal,
                                # a scalar string, or {left: "...", ...}
      p_b: "0"
    exact:                      # error reporting only, never used by solves
      u: ["...", "..."]
      p: "..."
      grad_u: [["du/dx", "du/dy"], ["dv/dx", "dv/dy"]]   # optional
      grad_p: ["dp/dx", "dp/dy"]                         # optional
    output: out                 # directory for CSV and VTK files
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .expr import ExprSyntaxError, compile_expr
from .mesh import SIDES, BoundaryPartition
from .systems import REGIMES, ProblemData

PROBLEMS = ("stokes", "pp", "es")
REFERENCES = ("pp", "stokes")
_TOP_KEYS = {"problem", "pressure_bc", "dirichlet_sides", "mesh", "eps", "eps_grid",
             "reference", "k", "mms_n", "data", "exact", "output"}
_DATA_KEYS = {"F", "div_F", "u_b", "g_b", "p_b"}
_EXACT_KEYS = {"u", "p", "grad_u", "grad_p"}


class ConfigError(ValueError):
    pass


def parse_eps_grid(value) -> list[float]:
    """``"start:stop:factor"`` (geometric, inclusive) or an explicit list."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"eps grid {value!r} is not start:stop:factor")
        try:
            start, stop, factor = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"eps grid {value!r}: {exc}") from None
        if not (start > 0 and stop >= start and factor > 1):
            raise ConfigError(f"eps grid {value!r} needs 0 < start <= stop and factor > 1")
        n = int(math.floor(math.log(stop / start) / math.log(factor) + 1e-9))
        grid = [start * factor**i for i in range(n + 1)]
    else:
        try:
            grid = [float(e) for e in value]
        except (TypeError, ValueError):
            raise ConfigError(f"eps grid {value!r} is neither a string nor a list of numbers") from None
    if not grid or any(not e > 0 for e in grid):
        raise ConfigError(f"eps grid values must be positive, got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"eps grid must be strictly increasing, got {grid}")
    return grid


def _scalar(name: str, text):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ConfigError(f"{name}: expected an expression string, got {text!r}")
    try:
        return compile_expr(text)
    except ExprSyntaxError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _pair(name: str, value):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name}: expected a list of two expressions, got {value!r}")
    fx, fy = _scalar(f"{name}[0]", value[0]), _scalar(f"{name}[1]", value[1])
    return lambda x, y: (fx(x, y), fy(x, y))


def _flux(value):
    if isinstance(value, dict):
        unknown = set(value) - set(SIDES)
        if unknown:
            raise ConfigError(f"g_b: unknown sides {sorted(unknown)}")
        per_side = {s: _scalar(f"g_b.{s}", value.get(s, "0")) for s in SIDES}
        normals = {"left": (-1, 0), "right": (1, 0), "bottom": (0, -1), "top": (0, 1)}

        def g(x, y, nx, ny):
            x, y, nx, ny = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, nx, ny)))
            out = np.zeros(x.shape)
            for side, (a, b) in normals.items():
                sel = np.isclose(nx, a) & np.isclose(ny, b)
                if np.any(sel):
                    out[sel] = per_side[side](x[sel], y[sel])
            return out

        return g
    if isinstance(value, (list, tuple)):
        v = _pair("g_b", value)

        def g(x, y, nx, ny):
            vx, vy = v(x, y)
            return vx * nx + vy * ny

        return g
    s = _scalar("g_b", value)
    return lambda x, y, nx, ny: s(x, y)


@dataclass
class RunConfig:
    problem: str
    pressure_bc: str = "neumann"
    dirichlet_sides: tuple = ()
    nx: int = 32
    ny: int = 32
    rect: tuple = (0.0, 0.0, 1.0, 1.0)
    eps: float | None = None
    eps_grid: list | None = None
    reference: str = "pp"
    k: int = 1
    mms_n: tuple = (8, 16, 32)
    data: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    output: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.pressure_bc not in REGIMES:
            raise ConfigError(f"pressure_bc must be one of {REGIMES}, got {self.pressure_bc!r}")
        if self.pressure_bc == "mixed":
            bad = set(self.dirichlet_sides) - set(SIDES)
            if bad or not self.dirichlet_sides or set(self.dirichlet_sides) == set(SIDES):
                raise ConfigError(f"mixed regime needs a proper nonempty subset of {SIDES} "
                                  f"as dirichlet_sides, got {list(self.dirichlet_sides)}")
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise ConfigError(f"mesh counts must be positive, got {self.nx}x{self.ny}")
        x0, y0, x1, y1 = self.rect
        if not (x1 > x0 and y1 > y0):
            raise ConfigError(f"degenerate rectangle {self.rect}")
        if self.eps is not None and not float(self.eps) > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.problem == "es" and self.eps is None and self.eps_grid is None:
            raise ConfigError("problem es needs eps or eps_grid")
        if self.eps_grid is not None:
            self.eps_grid = parse_eps_grid(self.eps_grid)
        if self.reference not in REFERENCES:
            raise ConfigError(f"reference must be one of {REFERENCES}, got {self.reference!r}")
        if not 0 <= int(self.k) <= 3:
            raise ConfigError(f"k must lie in 0..3, got {self.k}")
        if any(int(n) < 1 for n in self.mms_n) or len(self.mms_n) < 2:
            raise ConfigError(f"mms_n needs at least two positive sizes, got {list(self.mms_n)}")
        unknown = set(self.data) - _DATA_KEYS
        if unknown:
            raise ConfigError(f"unknown data entries {sorted(unknown)}")
        unknown = set(self.exact) - _EXACT_KEYS
        if unknown:
            raise ConfigError(f"unknown exact entries {sorted(unknown)}")
        # compile once so syntax errors surface before any solve
        try:
            self.problem_data()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.exact_functions()

    @property
    def partition(self) -> BoundaryPartition:
        if self.pressure_bc == "mixed":
            return BoundaryPartition.mixed(self.dirichlet_sides)
        return BoundaryPartition.neumann() if self.pressure_bc == "neumann" else BoundaryPartition.dirichlet()

    def problem_data(self, eps: float | None = None) -> ProblemData:
        d = self.data
        kwargs = {}
        if "F" in d:
            kwargs["F"] = _pair("F", d["F"])
        if "div_F" in d:
            kwargs["div_F"] = _scalar("div_F", d["div_F"])
        if "u_b" in d:
            kwargs["u_b"] = _pair("u_b", d["u_b"])
        if "g_b" in d:
            kwargs["g_b"] = _flux(d["g_b"])
        if "p_b" in d:
            kwargs["p_b"] = _scalar("p_b", d["p_b"])
        eps = self.eps if eps is None else eps
        return ProblemData(**kwargs, pressure_bc=self.pressure_bc, partition=self.partition,
                           eps=eps if self.problem == "es" else None)

    def exact_functions(self) -> dict:
        e = self.exact
        out = {}
        if "u" in e:
            out["u"] = _pair("exact.u", e["u"])
        if "p" in e:
            out["p"] = _scalar("exact.p", e["p"])
        if "grad_p" in e:
            out["grad_p"] = _pair("exact.grad_p", e["grad_p"])
        if "grad_u" in e:
            g = e["grad_u"]
            if not isinstance(g, (list, tuple)) or len(g) != 2:
                raise ConfigError("exact.grad_u: expected two rows of two expressions")
            r0, r1 = _pair("exact.grad_u[0]", g[0]), _pair("exact.grad_u[1]", g[1])
            out["grad_u"] = lambda x, y: (r0(x, y), r1(x, y))
        if ("u" in out) != ("p" in out):
            raise ConfigError("exact solution needs both u and p")
        return out

    @classmethod
    def from_dict(cls, raw: dict, **overrides) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        if "problem" not in raw and "problem" not in overrides:
            raise ConfigError("missing required key 'problem'")
        mesh = raw.get("mesh") or {}
        kw = dict(
            problem=raw.get("problem"),
            pressure_bc=raw.get("pressure_bc", "neumann"),
            dirichlet_sides=tuple(raw.get("dirichlet_sides", ())),
            nx=int(mesh.get("nx", 32)),
            ny=int(mesh.get("ny", mesh.get("nx", 32))),
            rect=tuple(float(v) for v in mesh.get("rect", (0, 0, 1, 1))),
            eps=raw.get("eps"),
            eps_grid=raw.get("eps_grid"),
            reference=raw.get("reference", "pp"),
            k=int(raw.get("k", 1)),
            mms_n=tuple(int(n) for n in raw.get("mms_n", (8, 16, 32))),
            data=dict(raw.get("data") or {}),
            exact=dict(raw.get("exact") or {}),
            output=str(raw.get("output", "out")),
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if kw["eps"] is not None:
            kw["eps"] = float(kw["eps"])
        return cls(**kw)


def load_config(path, **overrides) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(raw, **overrides)
