"""TOML run configuration.

Top-level keys mirror :class:`SolverConfig` fields; the nested tables
``[grid]``, ``[damping]`` and ``[ic]`` mirror :class:`Grid`,
:class:`DampingSpec` and :class:`InitialCondition`. Harness-only settings
live in ``[checks]``, ``[output]`` and ``[sweep]``. Unknown keys are errors.

Example::

    dt = 1e-3
    t_end = 1.0
    seed = 0

    [grid]
    modes = [32, 32, 32]

    [damping]
    kind = "log"
    alpha = 1.0

    [ic]
    kind = "taylor_green"
    perturbation = 0.1
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import ConfigError, DampingSpec, InitialCondition, SolverConfig
from .spectral import Grid

SOLVER_KEYS = {
    "viscosity": float, "dt": float, "t_end": float, "cutoff_R": float,
    "dealias": str, "output_every": int, "seed": int, "nonlinear": bool,
    "cfl": float, "check_cfl": bool,
}
GRID_KEYS = {"modes": list, "box": list}
DAMPING_KEYS = {"kind": str, "alpha": float, "beta": float, "allow_critical": bool}
IC_KEYS = {
    "kind": str, "amplitude": (float, list), "perturbation": float, "energy_target": float,
    "spectrum_slope": float, "wavevector": list, "phase": float, "path": str, "seed": int,
}
CHECKS_KEYS = {
    "energy": bool, "dz": bool, "decay": bool,
    "energy_tolerance": float, "energy_rel_tolerance": float,
    "dz_rel_tolerance": float, "b_alpha": str,
}
OUTPUT_KEYS = {"checkpoint_every": int, "ledger": str, "checkpoint": bool}
SWEEP_KEYS = {"alpha": list, "beta": list, "kind": list}
TABLES = {"grid": GRID_KEYS, "damping": DAMPING_KEYS, "ic": IC_KEYS,
          "checks": CHECKS_KEYS, "output": OUTPUT_KEYS, "sweep": SWEEP_KEYS}


@dataclass(frozen=True)
class ChecksConfig:
    energy: bool = True
    dz: bool = False
    decay: bool = False
    energy_tolerance: float | None = None
    energy_rel_tolerance: float | None = None
    dz_rel_tolerance: float | None = None
    b_alpha: str = "max"


@dataclass(frozen=True)
class OutputConfig:
    checkpoint_every: int = 0  # steps; 0 = final state only
    checkpoint: bool = True
    ledger: str = "ledger.csv"


@dataclass(frozen=True)
class RunSpec:
    solver: SolverConfig
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def sweep_points(self) -> list[dict]:
        """Cartesian product of the sweep axes, in sorted parameter order."""
        if not self.sweep:
            return [{}]
        names = sorted(self.sweep)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.sweep[n] for n in names))]


def _coerce(where: str, value, kind):
    kinds = kind if isinstance(kind, tuple) else (kind,)
    for k in kinds:
        if k is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if k is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if k is bool and isinstance(value, bool):
            return value
        if k is str and isinstance(value, str):
            return value
        if k is list and isinstance(value, list):
            return value
    names = "/".join(k.__name__ for k in kinds)
    raise ConfigError(f"{where}: expected {names}, got {type(value).__name__} {value!r}")


def _table(data: dict, name: str, schema: dict) -> dict:
    out = {}
    for key, value in data.items():
        where = f"{name}.{key}" if name else key
        if key not in schema:
            raise ConfigError(f"{where}: unknown key (allowed: {', '.join(sorted(schema))})")
        out[key] = _coerce(where, value, schema[key])
    return out


def _float_list(where, values, length=None):
    if length is not None and len(values) != length:
        raise ConfigError(f"{where}: expected {length} entries, got {len(values)}")
    return [_coerce(f"{where}[{i}]", v, float) for i, v in enumerate(values)]


def parse_config(data: dict) -> RunSpec:
    """Build a :class:`RunSpec` from an already-decoded TOML mapping."""
    top, tables = {}, {}
    for key, value in data.items():
        if key in TABLES:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table")
            tables[key] = _table(value, key, TABLES[key])
        elif key in SOLVER_KEYS:
            top[key] = _coerce(key, value, SOLVER_KEYS[key])
        else:
            raise ConfigError(f"{key}: unknown key")

    if "grid" not in tables or "modes" not in tables["grid"]:
        raise ConfigError("grid.modes: required")
    g = tables["grid"]
    modes = g["modes"]
    if len(modes) == 1:
        modes = modes * 3
    if len(modes) != 3 or not all(isinstance(m, int) and not isinstance(m, bool) for m in modes):
        raise ConfigError(f"grid.modes: expected 1 or 3 integers, got {modes!r}")
    box = _float_list("grid.box", g.get("box", [2 * math.pi] * 3), 3)
    try:
        grid = Grid(tuple(modes), tuple(box))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    d = tables.get("damping", {})
    try:
        damping = DampingSpec(
            kind=d.get("kind", "none"), alpha=d.get("alpha", 0.0),
            beta=d.get("beta"), allow_critical=d.get("allow_critical", False),
        )
    except ValueError as exc:
        raise ConfigError(f"damping: {exc}") from exc

    ic_raw = dict(tables.get("ic", {}))
    if isinstance(ic_raw.get("amplitude"), list):
        ic_raw["amplitude"] = tuple(_float_list("ic.amplitude", ic_raw["amplitude"], 3))
    if "wavevector" in ic_raw:
        wv = ic_raw["wavevector"]
        if len(wv) != 3 or not all(isinstance(k, int) and not isinstance(k, bool) for k in wv):
            raise ConfigError(f"ic.wavevector: expected 3 integers, got {wv!r}")
        ic_raw["wavevector"] = tuple(wv)
    try:
        ic = InitialCondition(**ic_raw)
    except ValueError as exc:
        raise ConfigError(f"ic: {exc}") from exc

    try:
        solver = SolverConfig(grid=grid, damping=damping, ic=ic, **top)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    checks = ChecksConfig(**tables.get("checks", {}))
    if checks.b_alpha not in ("max", "theorem", "proof"):
        raise ConfigError(f"checks.b_alpha: expected max/theorem/proof, got {checks.b_alpha!r}")
    output = OutputConfig(**tables.get("output", {}))
    if output.checkpoint_every < 0:
        raise ConfigError("output.checkpoint_every: must be >= 0")

    sweep = {}
    for axis, values in tables.get("sweep", {}).items():
        if not values:
            raise ConfigError(f"sweep.{axis}: empty list")
        if axis == "kind":
            sweep[axis] = [_coerce(f"sweep.kind[{i}]", v, str) for i, v in enumerate(values)]
        else:
            sweep[axis] = _float_list(f"sweep.{axis}", values)
    return RunSpec(solver, checks, output, sweep, data)


def load_config(path) -> RunSpec:
    """Read and validate a TOML config; every failure is a :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_point(spec: RunSpec, point: dict) -> RunSpec:
    """Substitute one sweep point into the damping spec."""
    if not point:
        return spec
    d = spec.solver.damping
    kind = point.get("kind", d.kind)
    alpha = point.get("alpha", d.alpha)
    beta = point.get("beta", d.beta) if kind == "power" else None
    damping = DampingSpec(kind=kind, alpha=alpha, beta=beta, allow_critical=d.allow_critical)
    return replace(spec, solver=replace(spec.solver, damping=damping), sweep={})


def with_seed(spec: RunSpec, seed: int | None) -> RunSpec:
    if seed is None:
        return spec
    return replace(spec, solver=replace(spec.solver, seed=int(seed)))
