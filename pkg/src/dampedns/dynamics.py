"""Damped anisotropic Navier-Stokes on the torus: right-hand side and time stepping.

The state is advanced by an integrating-factor RK2 (Heun) scheme. The
horizontal diffusion ``nu * Delta_h`` is integrated exactly per mode by
``exp(-nu |xi_h|^2 dt)``; advection and damping are explicit. Pressure never
appears: it is the part removed by the Leray projection.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import spectral as sp
from .norms import h01_norm
from .spectral import Grid, PhysicalVectorField, SpectralVectorField

log = logging.getLogger(__name__)

E = math.e
DAMPING_KINDS = ("none", "power", "log")
DEALIAS_RULES = ("two-thirds", "none")


class ConfigError(ValueError):
    """Invalid solver or initial-condition configuration."""


class BlowUpError(FloatingPointError):
    def __init__(self, step: int, t: float, mode: tuple[int, ...], message: str = ""):
        self.step = step
        self.t = t
        self.mode = mode
        super().__init__(message or f"non-finite coefficients at step {step} (t={t:g}), first at mode {mode}")


@dataclass(frozen=True)
class DampingSpec:
    """Zero-order absorption term ``a(|u|^2) u``.

    ``power``: a = alpha |u|^(beta-1), needs beta > 3 unless ``allow_critical``
    is set, which admits exactly beta = 3. ``log``: a = alpha log(e + |u|^2) |u|^2.
    """

    kind: str = "none"
    alpha: float = 0.0
    beta: float | None = None
    allow_critical: bool = False

    def __post_init__(self):
        if self.kind not in DAMPING_KINDS:
            raise ConfigError(f"unknown damping kind {self.kind!r}; expected one of {DAMPING_KINDS}")
        if self.kind == "none":
            return
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ConfigError(f"damping needs alpha > 0, got {self.alpha}")
        if self.kind == "power":
            if self.beta is None:
                raise ConfigError("power-law damping needs beta")
            if self.beta == 3 and not self.allow_critical:
                raise ConfigError("beta = 3 power-law damping is the open case; set allow_critical to run it")
            if self.beta < 3:
                raise ConfigError(f"power-law damping needs beta > 3, got {self.beta}")
        elif self.beta is not None:
            raise ConfigError("beta only applies to power-law damping")

    @classmethod
    def none(cls) -> DampingSpec:
        return cls("none")

    @classmethod
    def power_law(cls, alpha: float, beta: float, allow_critical: bool = False) -> DampingSpec:
        return cls("power", float(alpha), float(beta), allow_critical)

    @classmethod
    def logarithmic(cls, alpha: float) -> DampingSpec:
        return cls("log", float(alpha))

    @property
    def active(self) -> bool:
        return self.kind != "none"

    @property
    def exponent(self) -> float:
        """beta for power law, 3 for the logarithmic case (its limiting exponent)."""
        return 3.0 if self.kind != "power" else float(self.beta)

    def coefficient(self, mag2: np.ndarray) -> np.ndarray:
        """a as a function of |u|^2."""
        if self.kind == "log":
            return self.alpha * np.log(E + mag2) * mag2
        if self.kind == "power":
            return self.alpha * mag2 ** ((self.beta - 1.0) / 2.0)
        return np.zeros_like(mag2)

    def density(self, mag2: np.ndarray) -> np.ndarray:
        """Dissipation density D with a |u|^2 = alpha D."""
        if self.kind == "log":
            return np.log(E + mag2) * mag2**2
        if self.kind == "power":
            return mag2 ** ((self.beta + 1.0) / 2.0)
        return np.zeros_like(mag2)


@dataclass(frozen=True)
class InitialCondition:
    """Initial velocity recipe.

    kinds and their parameters:

    * ``taylor_green``: amplitude, perturbation (L2 fraction of a random
      divergence-free field added on top), seed
    * ``random_div_free``: energy_target (H^{0,1} norm), spectrum_slope, seed
    * ``single_mode``: wavevector (integers), amplitude (3-vector), phase
    * ``from_file``: path (checkpoint file or ``.npy`` physical samples)
    """

    kind: str = "taylor_green"
    amplitude: float | tuple[float, float, float] = 1.0
    perturbation: float = 0.0
    energy_target: float = 1.0
    spectrum_slope: float = 0.0
    wavevector: tuple[int, int, int] = (1, 0, 0)
    phase: float = 0.0
    path: str | None = None
    seed: int | None = None

    KINDS = ("taylor_green", "random_div_free", "single_mode", "from_file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown initial condition {self.kind!r}; expected one of {self.KINDS}")
        if isinstance(self.amplitude, list):
            object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))
        object.__setattr__(self, "wavevector", tuple(int(k) for k in self.wavevector))
        if self.kind == "random_div_free" and not self.energy_target > 0:
            raise ConfigError("energy_target must be positive")
        if self.kind == "from_file" and not self.path:
            raise ConfigError("from_file initial condition needs a path")
        if self.perturbation < 0:
            raise ConfigError("perturbation must be nonnegative")


def _seed_stream(seed: int | None, name: str) -> np.random.SeedSequence:
    """Named sub-stream of the run seed, so each consumer is independently reproducible."""
    key = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")
    return np.random.SeedSequence([0 if seed is None else int(seed), key])


def _taylor_green(grid: Grid, amplitude: float) -> SpectralVectorField:
    L1, L2, L3 = grid.box
    # u2 is rescaled by L2/L1 so that the field stays divergence-free on any box
    def tg(x1, x2, x3):
        a1, a2, a3 = 2 * np.pi * x1 / L1, 2 * np.pi * x2 / L2, 2 * np.pi * x3 / L3
        return (
            amplitude * np.sin(a1) * np.cos(a2) * np.cos(a3),
            -amplitude * (L2 / L1) * np.cos(a1) * np.sin(a2) * np.cos(a3),
            np.zeros_like(a1),
        )

    field_hat = sp.forward_transform(PhysicalVectorField.from_function(grid, tg))
    return SpectralVectorField(grid, sp.symmetrize(field_hat.coeffs))


def _random_div_free(grid: Grid, slope: float, seed_seq) -> SpectralVectorField:
    rng = np.random.default_rng(seed_seq)
    coeffs = np.stack([sp.band_limited_scalar(grid, rng) for _ in range(3)])
    k = grid.xi_abs
    with np.errstate(divide="ignore"):
        envelope = np.where(k > 0, k ** (slope / 2.0), 0.0)
    return sp.leray_project(SpectralVectorField(grid, coeffs * envelope))


def make_initial_condition(ic: InitialCondition, grid: Grid, seed: int | None = None) -> SpectralVectorField:
    """Real, divergence-free initial field on ``grid``.

    ``seed`` is the run seed; the IC's own ``seed`` wins when set. Random
    parts draw from the ``ic`` sub-stream.
    """
    seed = ic.seed if ic.seed is not None else seed
    if ic.kind == "taylor_green":
        u = _taylor_green(grid, float(ic.amplitude))
        if ic.perturbation > 0:
            w = _random_div_free(grid, 0.0, _seed_stream(seed, "ic"))
            w = w * (ic.perturbation * u.l2_norm() / w.l2_norm())
            u = u + w
        return u
    if ic.kind == "random_div_free":
        u = _random_div_free(grid, ic.spectrum_slope, _seed_stream(seed, "ic"))
        return u * (ic.energy_target / h01_norm(u))
    if ic.kind == "single_mode":
        amp = np.broadcast_to(np.asarray(ic.amplitude, dtype=float), (3,))
        k = np.asarray(ic.wavevector)
        for kk, n in zip(k, grid.modes):
            if not -n // 2 < kk < n // 2:
                raise ConfigError(f"wavevector {tuple(k)} not resolved on grid {grid.modes}")
        xi = 2 * np.pi * k / np.asarray(grid.box)
        if abs(xi @ amp) > 1e-12 * (np.linalg.norm(xi) * np.linalg.norm(amp) + 1e-300):
            raise ConfigError("single-mode amplitude must be orthogonal to its wavevector")

        def mode(x1, x2, x3):
            c = np.cos(xi[0] * x1 + xi[1] * x2 + xi[2] * x3 - ic.phase)
            return amp[0] * c, amp[1] * c, amp[2] * c

        u = sp.forward_transform(PhysicalVectorField.from_function(grid, mode))
        return SpectralVectorField(grid, sp.symmetrize(u.coeffs))
    return load_initial_field(Path(ic.path), grid)


def load_initial_field(path: Path, grid: Grid) -> SpectralVectorField:
    if not path.exists():
        raise ConfigError(f"initial condition file {path} does not exist")
    if path.suffix == ".npy":
        try:
            samples = np.load(path, allow_pickle=False)
        except ValueError as exc:
            raise ConfigError(f"{path}: not a valid .npy array ({exc})") from exc
        if samples.shape != (3,) + grid.shape:
            raise ConfigError(f"{path}: expected array of shape {(3,) + grid.shape}, got {samples.shape}")
        try:
            u = sp.forward_transform(PhysicalVectorField(grid, samples))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        state, header = read_checkpoint(path)
        if tuple(header["modes"]) != grid.modes:
            raise ConfigError(f"{path}: checkpoint grid {header['modes']} differs from {grid.modes}")
        u = state.u_hat
    return sp.leray_project(SpectralVectorField(grid, sp.symmetrize(u.coeffs)))


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    damping: DampingSpec = field(default_factory=DampingSpec)
    viscosity: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    cutoff_R: float | None = None
    dealias: str = "two-thirds"
    ic: InitialCondition = field(default_factory=InitialCondition)
    output_every: int = 1
    seed: int = 0
    nonlinear: bool = True
    isotropic: bool = False  # test-only: full Laplacian instead of Delta_h
    cfl: float = 0.5
    check_cfl: bool = True

    def __post_init__(self):
        if not (self.viscosity > 0):
            raise ConfigError(f"viscosity must be positive, got {self.viscosity}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= 0):
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.cutoff_R is not None and not self.cutoff_R > 0:
            raise ConfigError(f"cutoff_R must be positive, got {self.cutoff_R}")
        if self.dealias not in DEALIAS_RULES:
            raise ConfigError(f"dealias must be one of {DEALIAS_RULES}, got {self.dealias!r}")
        if int(self.output_every) < 1:
            raise ConfigError("output_every must be >= 1")
        if self.check_cfl:
            limit = self.max_stable_dt()
            if self.dt > limit:
                raise ConfigError(f"dt={self.dt:g} exceeds the advective limit {limit:.3g} "
                                  f"({self.cfl} / (max|xi| * max|u0|))")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def initial_field(self) -> SpectralVectorField:
        return _initial_field_cached(self.ic, self.grid, self.seed, self.cutoff_R)

    def max_stable_dt(self) -> float:
        u0 = self.initial_field()
        speed = float(np.sqrt(np.max(np.sum(sp.fft_inverse(u0.coeffs, self.grid) ** 2, axis=0))))
        if speed == 0:
            return np.inf
        return self.cfl / (self.grid.xi_max * speed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"modes": list(self.grid.modes), "box": list(self.grid.box)}
        return d

    def physics_hash(self) -> str:
        """Hash of every field that shapes the trajectory (t_end excluded)."""
        d = self.to_dict()
        d.pop("t_end")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@lru_cache(maxsize=16)
def _initial_field_cached(ic, grid, seed, cutoff_R):
    u = make_initial_condition(ic, grid, seed)
    if cutoff_R is not None:
        u = sp.friedrichs_cutoff(u, cutoff_R)
    return u


@dataclass(frozen=True, eq=False)
class SimulationState:
    t: float
    u_hat: SpectralVectorField
    step_index: int = 0


def damping_term(u: PhysicalVectorField, spec: DampingSpec) -> PhysicalVectorField:
    """Pointwise a(|u|^2) u."""
    mag2 = np.sum(u.samples**2, axis=0)
    return PhysicalVectorField(u.grid, spec.coefficient(mag2) * u.samples)


class _Kernel:
    """Per-config multipliers and the hot loop, in the half-spectrum (rfft) layout."""

    def __init__(self, cfg: SolverConfig):
        g = cfg.grid
        h = sp.half_width(g)
        self.cfg = cfg
        self.grid = g
        self.xi_odd = np.ascontiguousarray(g.xi_odd[..., :h])
        self.ixi = 1j * self.xi_odd
        self.mask = np.ascontiguousarray(g.dealias_mask[..., :h]) if cfg.dealias == "two-thirds" else None
        self.cutoff = None
        if cfg.cutoff_R is not None and not np.isinf(cfg.cutoff_R):
            self.cutoff = np.ascontiguousarray(g.xi_abs[..., :h] < cfg.cutoff_R)
        lap = g.xi_sq if cfg.isotropic else g.xi_h_sq
        self.lap = np.ascontiguousarray(lap[..., :h])
        self.decay = np.exp(-cfg.viscosity * self.lap * cfg.dt)
        k2 = np.sum(self.xi_odd**2, axis=0)
        self.xi_over_k2 = self.xi_odd / np.where(k2 == 0, 1.0, k2)

    def project(self, c):
        d = self.xi_over_k2[0] * c[0]
        d += self.xi_over_k2[1] * c[1]
        d += self.xi_over_k2[2] * c[2]
        return c - self.xi_odd * d

    def physical(self, c):
        return sp.rfft_inverse(c, self.grid)

    def _curl_into(self, w, cd):
        x = self.xi_odd
        np.multiply(x[1], cd[2], out=w[0])
        w[0] -= x[2] * cd[1]
        np.multiply(x[2], cd[0], out=w[1])
        w[1] -= x[0] * cd[2]
        np.multiply(x[0], cd[1], out=w[2])
        w[2] -= x[1] * cd[0]
        w *= 1j

    def nonlinear(self, c, u_x=None):
        """J_R P[-(u.grad)u - a(|u|^2)u]; the explicit part of the right-hand side.

        The advection is evaluated as omega x u of the dealiased field. It
        differs from (u.grad)u by grad(|u|^2/2), which the projection removes;
        on the retained modes both products are alias-free. ``u_x`` may carry
        the physical samples of ``c`` when already known.
        """
        cfg = self.cfg
        damped = cfg.damping.active
        adv = cfg.nonlinear
        if not (adv or damped):
            return np.zeros_like(c)
        # inverse batch: [u_dealiased, omega, u (when damping needs it)]
        n_inv = (6 if adv else 0) + (3 if damped and u_x is None else 0)
        if n_inv:
            w = np.empty((n_inv,) + c.shape[1:], dtype=complex)
            if adv:
                if self.mask is not None:
                    np.multiply(c, self.mask, out=w[:3])
                else:
                    w[:3] = c
                self._curl_into(w[3:6], w[:3])
            if n_inv in (3, 9):
                w[n_inv - 3:] = c
            phys = sp.rfft_inverse(w, self.grid)
            if n_inv in (3, 9):
                u_x = phys[n_inv - 3:]
        prod = np.empty(((3 if adv else 0) + (3 if damped else 0),) + self.grid.shape)
        if adv:
            u, om = phys[:3], phys[3:6]
            np.multiply(om[1], u[2], out=prod[0])
            prod[0] -= om[2] * u[1]
            np.multiply(om[2], u[0], out=prod[1])
            prod[1] -= om[0] * u[2]
            np.multiply(om[0], u[1], out=prod[2])
            prod[2] -= om[1] * u[0]
        if damped:
            mag2 = u_x[0] * u_x[0]
            mag2 += u_x[1] * u_x[1]
            mag2 += u_x[2] * u_x[2]
            np.multiply(cfg.damping.coefficient(mag2), u_x, out=prod[-3:])
        hat = sp.rfft_forward(prod, self.grid)
        if adv:
            out = hat[0:3]
            if self.mask is not None:
                out *= self.mask
            if damped:
                out += hat[3:6]
        else:
            out = hat
        out = self.project(out)
        out *= -1.0
        if self.cutoff is not None:
            out *= self.cutoff
        return out

    def rhs(self, c):
        lin = -self.cfg.viscosity * self.lap * c
        if self.cutoff is not None:
            lin *= self.cutoff
        return self.nonlinear(c) + lin

    def step(self, c, u_x=None):
        dt = self.cfg.dt
        k1 = self.nonlinear(c, u_x)
        u1 = self.decay * (c + dt * k1)
        k2 = self.nonlinear(u1)
        out = self.decay * (c + 0.5 * dt * k1) + 0.5 * dt * k2
        out = sp.symmetrize_half(self.project(out))
        if self.cutoff is not None:
            out *= self.cutoff
        return out


@lru_cache(maxsize=8)
def _kernel(cfg: SolverConfig) -> _Kernel:
    return _Kernel(cfg)


def nonlinear_term(u_hat: SpectralVectorField, dealias: str = "two-thirds") -> SpectralVectorField:
    """Pseudo-spectral (u . grad) u, dealiased by the 2/3 rule before and after the product."""
    if dealias not in DEALIAS_RULES:
        raise ValueError(f"unknown dealias rule {dealias!r}")
    g = u_hat.grid
    c = u_hat.coeffs
    mask = g.dealias_mask if dealias == "two-thirds" else None
    cd = c * mask if mask is not None else c
    u_x = sp.fft_inverse(cd, g)
    grads = sp.fft_inverse(1j * g.xi_odd[:, None] * cd[None, :], g)
    nl = sp.fft_forward(np.einsum("l...,lj...->j...", u_x, grads), g)
    if mask is not None:
        nl = nl * mask
    return SpectralVectorField(g, nl)


def rhs(state: SimulationState, cfg: SolverConfig) -> SpectralVectorField:
    """J_R( P[-(u.grad)u - a u] + nu Delta_h u ) in mode space."""
    g = cfg.grid
    half = sp.to_half(np.asarray(state.u_hat.coeffs), g)
    return SpectralVectorField(g, sp.to_full(_kernel(cfg).rhs(half), g))


def initial_state(cfg: SolverConfig) -> SimulationState:
    return SimulationState(0.0, cfg.initial_field(), 0)


def _first_bad_mode(c: np.ndarray) -> tuple[int, ...]:
    bad = np.argwhere(~np.isfinite(c))
    return tuple(int(i) for i in bad[0]) if len(bad) else ()


def _state(cfg: SolverConfig, half: np.ndarray, n: int) -> SimulationState:
    return SimulationState(n * cfg.dt, SpectralVectorField(cfg.grid, sp.to_full(half, cfg.grid)), n)


def step(state: SimulationState, cfg: SolverConfig) -> SimulationState:
    """Advance one time step of size ``cfg.dt``."""
    half = _kernel(cfg).step(sp.to_half(np.asarray(state.u_hat.coeffs), cfg.grid))
    n = state.step_index + 1
    if not np.all(np.isfinite(half)):
        raise BlowUpError(n, n * cfg.dt, _first_bad_mode(half))
    return _state(cfg, half, n)


def run(cfg: SolverConfig, sinks=(), state: SimulationState | None = None, ledger=None):
    """Integrate from ``state`` (default: the initial condition) to ``cfg.t_end``.

    A ledger row is appended at the start and every ``output_every`` steps,
    plus the final step. Each sink is called as ``sink(ledger)`` after every
    append. On blow-up the sinks see the partial ledger before the error
    propagates. Returns ``(final_state, ledger)``.
    """
    from .diagnostics import EnergyLedger, append_half, physical_velocity

    if state is None:
        state = initial_state(cfg)
    if ledger is None:
        ledger = EnergyLedger.for_config(cfg)
    g = cfg.grid
    c = sp.to_half(np.asarray(state.u_hat.coeffs), g)
    n = state.step_index
    if not ledger.rows:
        _, u_x = append_half(state.t, c, cfg, ledger, return_physical=True)
        for sink in sinks:
            sink(ledger)
    else:
        u_x = physical_velocity(c, g)
    kernel = _kernel(cfg)
    n_total = cfg.n_steps
    speed0 = ledger.rows[0]["u_max_lattice"]
    warned = False
    try:
        while n < n_total:
            c = kernel.step(c, u_x)
            u_x = None
            n += 1
            if not np.all(np.isfinite(c)):
                raise BlowUpError(n, n * cfg.dt, _first_bad_mode(c))
            if n % cfg.output_every == 0 or n == n_total:
                row, u_x = append_half(n * cfg.dt, c, cfg, ledger, return_physical=True)
                for sink in sinks:
                    sink(ledger)
                if not warned and speed0 > 0 and row["u_max_lattice"] > 2 * speed0:
                    warnings.warn(f"max speed doubled by t={n * cfg.dt:g}; the dt guard used the initial speed",
                                  RuntimeWarning, stacklevel=2)
                    warned = True
    except BlowUpError:
        for sink in sinks:
            sink(ledger)
        raise
    return _state(cfg, c, n), ledger


# checkpoints

CHECKPOINT_MAGIC = "dampedns-checkpoint"


def write_checkpoint(path, state: SimulationState, cfg: SolverConfig | None = None, ledger=None) -> None:
    """Header line (JSON) followed by little-endian float64 (re, im) pairs, component-major."""
    g = state.u_hat.grid
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "modes": list(g.modes),
        "box": list(g.box),
        "t": state.t,
        "step": state.step_index,
        "config_hash": cfg.physics_hash() if cfg is not None else None,
        "ledger": ledger.resume_state() if ledger is not None else None,
    }
    payload = np.ascontiguousarray(state.u_hat.coeffs).astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(payload)


def read_checkpoint(path) -> tuple[SimulationState, dict]:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            line = fh.readline()
            header = json.loads(line.decode())
            payload = fh.read()
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: unreadable checkpoint header ({exc})") from exc
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a {CHECKPOINT_MAGIC} file")
    try:
        grid = Grid(tuple(header["modes"]), tuple(header["box"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad grid in header ({exc})") from exc
    expected = 3 * grid.size * 16
    if len(payload) != expected:
        raise ConfigError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    coeffs = np.frombuffer(payload, dtype="<c16").reshape((3,) + grid.shape)
    state = SimulationState(float(header["t"]), SpectralVectorField(grid, coeffs), int(header["step"]))
    return state, header


def with_overrides(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)
